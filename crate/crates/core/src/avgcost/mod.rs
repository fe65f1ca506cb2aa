//! Average-cost solution of a finite MDP by multichain policy iteration with
//! n-discount optimal (sensitive) tie-breaking, and its extension from the
//! support beliefs to the whole simplex.

mod chain;
mod extend;
mod sensitive;

pub use chain::{chain_decompose, ChainDecomposition};
pub use extend::{extend_average_solution, AverageExtension, BiasOracle, GainOracle};
pub use sensitive::{
    nested_residuals, policy_evaluation_sensitive, policy_improvement_sensitive, solve_multichain,
    ChainSummary, Improvement, PolicyEvaluation, SensitiveSolution, DEFAULT_ORDER,
    MAX_POLICY_ITERATIONS, RESIDUAL_TOL,
};

/// Relative membership tolerance for the nested argmin sets.
pub const NESTED_ARGMIN_TOL: f64 = 1e-9;

/// Narrows `candidates` to the near-minimizers of `q`, preserving index order.
/// The tolerance is relative to the largest magnitude among the candidates.
pub(crate) fn narrow(candidates: &[usize], q: impl Fn(usize) -> f64) -> Vec<usize> {
    let vals: Vec<f64> = candidates.iter().map(|&u| q(u)).collect();
    let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let scale = vals.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let tol = NESTED_ARGMIN_TOL * scale;
    candidates
        .iter()
        .zip(&vals)
        .filter(|(_, v)| **v <= min + tol)
        .map(|(u, _)| *u)
        .collect()
}
