//! Discounted-cost solution of a modified MDP and the policies it induces.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grids::sample_belief;
use crate::lower::{ExtensionOracle, ModifiedMdp};
use crate::mdp::FiniteMdp;
use crate::model::{Belief, PomdpModel};
use crate::rng;

pub const MAX_VI_ITERATIONS: usize = 1_000_000;

#[derive(Debug, Clone, Serialize)]
pub struct DiscountSolution {
    pub values: Vec<f64>,
    pub alpha: f64,
    /// Sup-norm difference of the last two iterates.
    pub residual: f64,
    /// Bound on the sup-norm distance to the exact fixed point,
    /// `α/(1−α) · residual`.
    pub error_bound: f64,
    pub greedy_policy: Vec<usize>,
    pub iterations: usize,
}

/// Jacobi value iteration from zero. Stops once successive iterates differ by
/// at most `tol·min(1, (1−α)/(2α))`, which keeps the distance to the fixed
/// point within `tol/2`.
pub fn value_iteration(mdp: &ModifiedMdp, alpha: f64, tol: f64) -> Result<DiscountSolution> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!(
            "discount factor {alpha} must lie in [0,1)"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    let threshold = if alpha == 0.0 {
        tol
    } else {
        tol * f64::min(1.0, (1.0 - alpha) / (2.0 * alpha))
    };
    let mut values = vec![0.0; mdp.len()];
    let mut iterations = 0;
    let residual = loop {
        let (next, _) = mdp.bellman(&values, alpha);
        let diff = next
            .iter()
            .zip(&values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        values = next;
        iterations += 1;
        if diff <= threshold {
            break diff;
        }
        if iterations >= MAX_VI_ITERATIONS {
            return Err(Error::NoConvergence {
                iterations,
                detail: format!("value iteration residual {diff:e}"),
            });
        }
    };
    let (_, greedy_policy) = mdp.bellman(&values, alpha);
    let error_bound = if alpha == 0.0 { 0.0 } else { alpha / (1.0 - alpha) * residual };
    Ok(DiscountSolution {
        values,
        alpha,
        residual,
        error_bound,
        greedy_policy,
        iterations,
    })
}

impl DiscountSolution {
    pub fn oracle<'a>(&'a self, model: &'a PomdpModel, mdp: &'a ModifiedMdp) -> ExtensionOracle<'a> {
        ExtensionOracle { mdp, model, values: &self.values, alpha: self.alpha }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DiscountErrorReport {
    /// Largest sampled `|(TJ̃)(x) − J̃(x)|`.
    pub max_residual: f64,
    /// `max_residual / (1−α)`: a sampled (under-)estimate of the bound on
    /// `‖J̃ − J*‖∞`.
    pub gap_bound: f64,
    pub beliefs_evaluated: usize,
    pub seed: u64,
}

/// Bellman residual `(TJ̃)(x) − J̃(x)` of the extended approximation at `x`.
pub fn bellman_residual(
    model: &PomdpModel,
    mdp: &ModifiedMdp,
    sol: &DiscountSolution,
    x: &Belief,
) -> Result<f64> {
    let oracle = sol.oracle(model, mdp);
    let exact = model.exact_backup(x, &oracle, sol.alpha).value;
    let approx = mdp.evaluate_extension(model, &sol.values, x, sol.alpha)?.value;
    Ok(exact - approx)
}

/// Samples the Bellman residual at `samples` uniform beliefs plus every
/// support belief.
pub fn discounted_error_bounds(
    model: &PomdpModel,
    mdp: &ModifiedMdp,
    sol: &DiscountSolution,
    samples: usize,
    seed: u64,
) -> Result<DiscountErrorReport> {
    let mut stream = rng::substream(seed, "discount-bounds", 0);
    let mut beliefs: Vec<Belief> = (0..samples)
        .map(|_| sample_belief(model.num_states(), &mut stream))
        .collect();
    beliefs.extend(mdp.support().iter().cloned());
    let mut max_residual: f64 = 0.0;
    for x in &beliefs {
        max_residual = max_residual.max(bellman_residual(model, mdp, sol, x)?.abs());
    }
    Ok(DiscountErrorReport {
        max_residual,
        gap_bound: max_residual / (1.0 - sol.alpha),
        beliefs_evaluated: beliefs.len(),
        seed,
    })
}

/// One-step lookahead on the true dynamics with `J̃` as continuation cost.
pub fn lookahead_action(
    model: &PomdpModel,
    mdp: &ModifiedMdp,
    sol: &DiscountSolution,
    x: &Belief,
) -> usize {
    let oracle = sol.oracle(model, mdp);
    model.exact_backup(x, &oracle, sol.alpha).action()
}

/// Minimizer of the modified backup at `x`.
pub fn greedy_modified_action(
    model: &PomdpModel,
    mdp: &ModifiedMdp,
    sol: &DiscountSolution,
    x: &Belief,
) -> Result<usize> {
    Ok(mdp.evaluate_extension(model, &sol.values, x, sol.alpha)?.action())
}
