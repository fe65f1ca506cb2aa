//! C ABI over the gridpomdp solver.
//!
//! Objects are opaque handles created by `gp_*_new`/`gp_*_build`/`gp_*_solve`
//! and released with the matching `gp_*_free`. Every fallible call returns a
//! [`GpStatus`]; on failure the message is available from
//! [`gp_last_error_message`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use gridpomdp::avgcost::{extend_average_solution, solve_multichain, SensitiveSolution};
use gridpomdp::bounds::estimate_theorem2_delta;
use gridpomdp::discount::{value_iteration, DiscountSolution};
use gridpomdp::grids::GridScheme;
use gridpomdp::lower::{ModifiedMdp, Scheme};
use gridpomdp::model::cassandra::{parse_pomdp, read_pomdp_file};
use gridpomdp::sim::{simulate_trajectories, AverageLookaheadPolicy, AverageStepPolicy, BeliefPolicy};
use gridpomdp::{Belief, Error, PomdpModel};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Validation = 4,
    Numerical = 5,
    Io = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GpScheme {
    D1 = 1,
    D2 = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GpPolicy {
    /// Smallest action of the extended nested argmin set.
    Step2 = 0,
    /// Exact one-step lookahead on the extended bias.
    Lookahead = 1,
}

/// A parsed POMDP.
pub struct GpModel(PomdpModel);

/// A modified MDP together with the model it was built from.
pub struct GpMdp {
    model: PomdpModel,
    mdp: ModifiedMdp,
}

/// An average-cost solution of a modified MDP.
pub struct GpAverageSolution(SensitiveSolution);

/// A discounted solution of a modified MDP.
pub struct GpDiscountSolution(DiscountSolution);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> GpStatus {
    match e {
        Error::Parse { .. } => GpStatus::Parse,
        Error::Validation(_) | Error::InvalidBelief(_) | Error::RowNormalization { .. } => GpStatus::Validation,
        Error::InvalidArgument(_) | Error::TreeTooLarge { .. } => GpStatus::InvalidArgument,
        Error::Io(_) | Error::Json(_) => GpStatus::Io,
        _ => GpStatus::Numerical,
    }
}

struct Fail(GpStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> GpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            GpStatus::Ok
        }
        Ok(Err(Fail(code, msg))) => {
            set_error(msg);
            code
        }
        Err(_) => {
            set_error("internal panic".into());
            GpStatus::Panic
        }
    }
}

fn null() -> Fail {
    Fail(GpStatus::NullPointer, "null pointer argument".into())
}

unsafe fn as_ref<'a, T>(p: *const T) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(null)
}

unsafe fn c_str<'a>(p: *const c_char) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null());
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(GpStatus::InvalidArgument, "string is not UTF-8".into()))
}

unsafe fn write_out<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null());
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn belief_arg(x: *const f64, len: usize) -> Result<Belief, Fail> {
    if x.is_null() {
        return Err(null());
    }
    Ok(Belief::new(std::slice::from_raw_parts(x, len).to_vec())?)
}

unsafe fn copy_out(src: &[f64], buf: *mut f64, len: usize, needed: *mut usize) -> Result<(), Fail> {
    if !needed.is_null() {
        *needed = src.len();
    }
    if len < src.len() {
        return Err(Fail(GpStatus::BufferTooSmall, format!("buffer holds {len}, need {}", src.len())));
    }
    if buf.is_null() {
        return Err(null());
    }
    ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length without the NUL.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn gp_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Parses a model from a file in the Cassandra format.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gp_model_from_file(path: *const c_char, out: *mut *mut GpModel) -> GpStatus {
    guard(|| write_out(out, GpModel(read_pomdp_file(c_str(path)?)?)))
}

/// Parses a model from Cassandra-format text.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gp_model_from_string(text: *const c_char, out: *mut *mut GpModel) -> GpStatus {
    guard(|| write_out(out, GpModel(parse_pomdp(c_str(text)?)?)))
}

/// # Safety
/// `model` must come from a `gp_model_*` constructor and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn gp_model_free(model: *mut GpModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Writes the numbers of states, actions and observations.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn gp_model_dims(
    model: *const GpModel,
    states: *mut usize,
    actions: *mut usize,
    observations: *mut usize,
) -> GpStatus {
    guard(|| {
        let m = &as_ref(model)?.0;
        if states.is_null() || actions.is_null() || observations.is_null() {
            return Err(null());
        }
        *states = m.num_states();
        *actions = m.num_actions();
        *observations = m.num_observations();
        Ok(())
    })
}

/// Builds the modified MDP for `scheme` on the grid described by `pattern`
/// (for example `"3-E"` or `"2-E+10-R"`).
///
/// # Safety
/// `model` must be a live handle, `pattern` NUL-terminated, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gp_mdp_build(
    model: *const GpModel,
    scheme: GpScheme,
    pattern: *const c_char,
    seed: u64,
    out: *mut *mut GpMdp,
) -> GpStatus {
    guard(|| {
        let m = &as_ref(model)?.0;
        let grid = GridScheme::from_pattern(c_str(pattern)?, m.num_states(), seed)?;
        let scheme = match scheme {
            GpScheme::D1 => Scheme::D1,
            GpScheme::D2 => Scheme::D2,
        };
        let mdp = ModifiedMdp::build(m, &grid, scheme)?;
        write_out(out, GpMdp { model: m.clone(), mdp })
    })
}

/// # Safety
/// `mdp` must come from [`gp_mdp_build`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn gp_mdp_free(mdp: *mut GpMdp) {
    if !mdp.is_null() {
        drop(Box::from_raw(mdp));
    }
}

/// Number of support beliefs, or 0 for a null handle.
///
/// # Safety
/// `mdp` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gp_mdp_support_size(mdp: *const GpMdp) -> usize {
    mdp.as_ref().map_or(0, |m| m.mdp.len())
}

/// Solves the average-cost modified MDP to discount-optimality order `order`.
///
/// # Safety
/// `mdp` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gp_average_solve(
    mdp: *const GpMdp,
    order: i32,
    out: *mut *mut GpAverageSolution,
) -> GpStatus {
    guard(|| write_out(out, GpAverageSolution(solve_multichain(&as_ref(mdp)?.mdp, order)?)))
}

/// # Safety
/// `sol` must come from [`gp_average_solve`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn gp_average_free(sol: *mut GpAverageSolution) {
    if !sol.is_null() {
        drop(Box::from_raw(sol));
    }
}

/// Copies the gain on the support into `buf`; `needed` receives its length.
///
/// # Safety
/// `buf` must be valid for `len` doubles; `needed` null or writable.
#[no_mangle]
pub unsafe extern "C" fn gp_average_gain(
    sol: *const GpAverageSolution,
    buf: *mut f64,
    len: usize,
    needed: *mut usize,
) -> GpStatus {
    guard(|| copy_out(&as_ref(sol)?.0.gain, buf, len, needed))
}

/// Copies the bias on the support into `buf`; `needed` receives its length.
///
/// # Safety
/// As for [`gp_average_gain`].
#[no_mangle]
pub unsafe extern "C" fn gp_average_bias(
    sol: *const GpAverageSolution,
    buf: *mut f64,
    len: usize,
    needed: *mut usize,
) -> GpStatus {
    guard(|| copy_out(&as_ref(sol)?.0.bias, buf, len, needed))
}

/// Largest nested-equation residual of the solution.
///
/// # Safety
/// `sol` must be a live handle and `residual` writable.
#[no_mangle]
pub unsafe extern "C" fn gp_average_max_residual(sol: *const GpAverageSolution, residual: *mut f64) -> GpStatus {
    guard(|| {
        let s = as_ref(sol)?;
        if residual.is_null() {
            return Err(null());
        }
        *residual = s.0.max_residual();
        Ok(())
    })
}

/// Extends the solution to the belief `x` of length `len`.
///
/// # Safety
/// Handles must be live and belong together; `x` valid for `len` doubles;
/// output pointers writable.
#[no_mangle]
pub unsafe extern "C" fn gp_average_extend(
    mdp: *const GpMdp,
    sol: *const GpAverageSolution,
    x: *const f64,
    len: usize,
    action: *mut usize,
    gain: *mut f64,
    bias: *mut f64,
) -> GpStatus {
    guard(|| {
        let m = as_ref(mdp)?;
        let s = as_ref(sol)?;
        check_pair(m, &s.0)?;
        let x = belief_arg(x, len)?;
        if x.len() != m.model.num_states() {
            return Err(Fail(GpStatus::InvalidArgument, "belief has the wrong dimension".into()));
        }
        if action.is_null() || gain.is_null() || bias.is_null() {
            return Err(null());
        }
        let e = extend_average_solution(&m.model, &m.mdp, &s.0, &x)?;
        *action = e.action;
        *gain = e.gain;
        *bias = e.bias;
        Ok(())
    })
}

fn check_pair(m: &GpMdp, s: &SensitiveSolution) -> Result<(), Fail> {
    if s.gain.len() != m.mdp.len() {
        return Err(Fail(GpStatus::InvalidArgument, "solution does not belong to this MDP".into()));
    }
    Ok(())
}

/// Sampled upper bound: `delta` receives the largest sampled residual and
/// `upper` the maximum support gain plus `delta`.
///
/// # Safety
/// Handles must be live and belong together; outputs writable.
#[no_mangle]
pub unsafe extern "C" fn gp_bound_estimate(
    mdp: *const GpMdp,
    sol: *const GpAverageSolution,
    samples: usize,
    seed: u64,
    delta: *mut f64,
    upper: *mut f64,
) -> GpStatus {
    guard(|| {
        let m = as_ref(mdp)?;
        let s = as_ref(sol)?;
        check_pair(m, &s.0)?;
        if delta.is_null() || upper.is_null() {
            return Err(null());
        }
        let r = estimate_theorem2_delta(&m.model, &m.mdp, &s.0, samples, seed)?;
        *delta = r.delta_hat;
        *upper = r.upper_bound;
        Ok(())
    })
}

/// Simulates the average-cost policy from the model's start belief and
/// returns the mean per-stage cost and its bootstrap standard error.
///
/// # Safety
/// Handles must be live and belong together; outputs writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn gp_simulate(
    mdp: *const GpMdp,
    sol: *const GpAverageSolution,
    policy: GpPolicy,
    trajectories: usize,
    horizon: usize,
    seed: u64,
    bootstrap: usize,
    mean: *mut f64,
    standard_error: *mut f64,
) -> GpStatus {
    guard(|| {
        let m = as_ref(mdp)?;
        let s = as_ref(sol)?;
        check_pair(m, &s.0)?;
        if mean.is_null() || standard_error.is_null() {
            return Err(null());
        }
        let (model, mdp, sol) = (&m.model, &m.mdp, &s.0);
        let step = AverageStepPolicy { model, mdp, sol };
        let look = AverageLookaheadPolicy { model, mdp, sol };
        let p: &dyn BeliefPolicy = match policy {
            GpPolicy::Step2 => &step,
            GpPolicy::Lookahead => &look,
        };
        let x0 = model.initial_belief();
        let r = simulate_trajectories(model, p, &x0, trajectories, horizon, seed)?.with_bootstrap(bootstrap)?;
        *mean = r.mean;
        *standard_error = r.standard_error.unwrap_or(0.0);
        Ok(())
    })
}

/// Discounted value iteration on the modified MDP.
///
/// # Safety
/// `mdp` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gp_discount_solve(
    mdp: *const GpMdp,
    alpha: f64,
    tol: f64,
    out: *mut *mut GpDiscountSolution,
) -> GpStatus {
    guard(|| write_out(out, GpDiscountSolution(value_iteration(&as_ref(mdp)?.mdp, alpha, tol)?)))
}

/// # Safety
/// `sol` must come from [`gp_discount_solve`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn gp_discount_free(sol: *mut GpDiscountSolution) {
    if !sol.is_null() {
        drop(Box::from_raw(sol));
    }
}

/// Copies the support values into `buf`; `needed` receives their count.
///
/// # Safety
/// `buf` must be valid for `len` doubles; `needed` null or writable.
#[no_mangle]
pub unsafe extern "C" fn gp_discount_values(
    sol: *const GpDiscountSolution,
    buf: *mut f64,
    len: usize,
    needed: *mut usize,
) -> GpStatus {
    guard(|| copy_out(&as_ref(sol)?.0.values, buf, len, needed))
}

/// Value of the extended discounted approximation at `x`.
///
/// # Safety
/// Handles must be live and belong together; `x` valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn gp_discount_value_at(
    mdp: *const GpMdp,
    sol: *const GpDiscountSolution,
    x: *const f64,
    len: usize,
    value: *mut f64,
) -> GpStatus {
    guard(|| {
        let m = as_ref(mdp)?;
        let s = as_ref(sol)?;
        if s.0.values.len() != m.mdp.len() {
            return Err(Fail(GpStatus::InvalidArgument, "solution does not belong to this MDP".into()));
        }
        let x = belief_arg(x, len)?;
        if x.len() != m.model.num_states() {
            return Err(Fail(GpStatus::InvalidArgument, "belief has the wrong dimension".into()));
        }
        if value.is_null() {
            return Err(null());
        }
        *value = m.mdp.evaluate_extension(&m.model, &s.0.values, &x, s.0.alpha)?.value;
        Ok(())
    })
}
