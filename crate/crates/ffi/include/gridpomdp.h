#ifndef GRIDPOMDP_H
#define GRIDPOMDP_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum GpStatus {
  GP_STATUS_OK = 0,
  GP_STATUS_NULL_POINTER = 1,
  GP_STATUS_INVALID_ARGUMENT = 2,
  GP_STATUS_PARSE = 3,
  GP_STATUS_VALIDATION = 4,
  GP_STATUS_NUMERICAL = 5,
  GP_STATUS_IO = 6,
  GP_STATUS_BUFFER_TOO_SMALL = 7,
  GP_STATUS_PANIC = 8,
} GpStatus;

typedef enum GpScheme {
  GP_SCHEME_D1 = 1,
  GP_SCHEME_D2 = 2,
} GpScheme;

typedef enum GpPolicy {
  // Smallest action of the extended nested argmin set.
  GP_POLICY_STEP2 = 0,
  // Exact one-step lookahead on the extended bias.
  GP_POLICY_LOOKAHEAD = 1,
} GpPolicy;

// An average-cost solution of a modified MDP.
typedef struct GpAverageSolution GpAverageSolution;

// A discounted solution of a modified MDP.
typedef struct GpDiscountSolution GpDiscountSolution;

// A modified MDP together with the model it was built from.
typedef struct GpMdp GpMdp;

// A parsed POMDP.
typedef struct GpModel GpModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *gp_version(void);

// Copies the calling thread's last error message into `buf` (NUL-terminated,
// truncated to `len`). Returns the full message length without the NUL.
//
// # Safety
// `buf` must be null or valid for `len` bytes.
size_t gp_last_error_message(char *buf, size_t len);

// Parses a model from a file in the Cassandra format.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum GpStatus gp_model_from_file(const char *path, struct GpModel **out);

// Parses a model from Cassandra-format text.
//
// # Safety
// `text` must be a NUL-terminated string; `out` must be writable.
enum GpStatus gp_model_from_string(const char *text, struct GpModel **out);

// # Safety
// `model` must come from a `gp_model_*` constructor and not be freed twice.
void gp_model_free(struct GpModel *model);

// Writes the numbers of states, actions and observations.
//
// # Safety
// All pointers must be valid.
enum GpStatus gp_model_dims(const struct GpModel *model,
                            size_t *states,
                            size_t *actions,
                            size_t *observations);

// Builds the modified MDP for `scheme` on the grid described by `pattern`
// (for example `"3-E"` or `"2-E+10-R"`).
//
// # Safety
// `model` must be a live handle, `pattern` NUL-terminated, `out` writable.
enum GpStatus gp_mdp_build(const struct GpModel *model,
                           enum GpScheme scheme,
                           const char *pattern,
                           uint64_t seed,
                           struct GpMdp **out);

// # Safety
// `mdp` must come from [`gp_mdp_build`] and not be freed twice.
void gp_mdp_free(struct GpMdp *mdp);

// Number of support beliefs, or 0 for a null handle.
//
// # Safety
// `mdp` must be null or a live handle.
size_t gp_mdp_support_size(const struct GpMdp *mdp);

// Solves the average-cost modified MDP to discount-optimality order `order`.
//
// # Safety
// `mdp` must be a live handle; `out` writable.
enum GpStatus gp_average_solve(const struct GpMdp *mdp,
                               int32_t order,
                               struct GpAverageSolution **out);

// # Safety
// `sol` must come from [`gp_average_solve`] and not be freed twice.
void gp_average_free(struct GpAverageSolution *sol);

// Copies the gain on the support into `buf`; `needed` receives its length.
//
// # Safety
// `buf` must be valid for `len` doubles; `needed` null or writable.
enum GpStatus gp_average_gain(const struct GpAverageSolution *sol,
                              double *buf,
                              size_t len,
                              size_t *needed);

// Copies the bias on the support into `buf`; `needed` receives its length.
//
// # Safety
// As for [`gp_average_gain`].
enum GpStatus gp_average_bias(const struct GpAverageSolution *sol,
                              double *buf,
                              size_t len,
                              size_t *needed);

// Largest nested-equation residual of the solution.
//
// # Safety
// `sol` must be a live handle and `residual` writable.
enum GpStatus gp_average_max_residual(const struct GpAverageSolution *sol, double *residual);

// Extends the solution to the belief `x` of length `len`.
//
// # Safety
// Handles must be live and belong together; `x` valid for `len` doubles;
// output pointers writable.
enum GpStatus gp_average_extend(const struct GpMdp *mdp,
                                const struct GpAverageSolution *sol,
                                const double *x,
                                size_t len,
                                size_t *action,
                                double *gain,
                                double *bias);

// Sampled upper bound: `delta` receives the largest sampled residual and
// `upper` the maximum support gain plus `delta`.
//
// # Safety
// Handles must be live and belong together; outputs writable.
enum GpStatus gp_bound_estimate(const struct GpMdp *mdp,
                                const struct GpAverageSolution *sol,
                                size_t samples,
                                uint64_t seed,
                                double *delta,
                                double *upper);

// Simulates the average-cost policy from the model's start belief and
// returns the mean per-stage cost and its bootstrap standard error.
//
// # Safety
// Handles must be live and belong together; outputs writable.
enum GpStatus gp_simulate(const struct GpMdp *mdp,
                          const struct GpAverageSolution *sol,
                          enum GpPolicy policy,
                          size_t trajectories,
                          size_t horizon,
                          uint64_t seed,
                          size_t bootstrap,
                          double *mean,
                          double *standard_error);

// Discounted value iteration on the modified MDP.
//
// # Safety
// `mdp` must be a live handle; `out` writable.
enum GpStatus gp_discount_solve(const struct GpMdp *mdp,
                                double alpha,
                                double tol,
                                struct GpDiscountSolution **out);

// # Safety
// `sol` must come from [`gp_discount_solve`] and not be freed twice.
void gp_discount_free(struct GpDiscountSolution *sol);

// Copies the support values into `buf`; `needed` receives their count.
//
// # Safety
// `buf` must be valid for `len` doubles; `needed` null or writable.
enum GpStatus gp_discount_values(const struct GpDiscountSolution *sol,
                                 double *buf,
                                 size_t len,
                                 size_t *needed);

// Value of the extended discounted approximation at `x`.
//
// # Safety
// Handles must be live and belong together; `x` valid for `len` doubles.
enum GpStatus gp_discount_value_at(const struct GpMdp *mdp,
                                   const struct GpDiscountSolution *sol,
                                   const double *x,
                                   size_t len,
                                   double *value);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GRIDPOMDP_H */
