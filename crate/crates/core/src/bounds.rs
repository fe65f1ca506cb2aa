//! Sampled bound estimates for average-cost approximations.
//!
//! Both estimates maximize (or minimize) a residual over finitely many beliefs,
//! so a sampled `δ` under-estimates the supremum and a sampled `δ−`
//! over-estimates the infimum.

use rayon::prelude::*;
use serde::Serialize;

use crate::avgcost::{extend_average_solution, BiasOracle, SensitiveSolution};
use crate::error::{Error, Result};
use crate::grids::sample_belief;
use crate::lower::ModifiedMdp;
use crate::model::{Belief, PomdpModel, ValueOracle};
use crate::rng;
use crate::sim::BeliefPolicy;

pub const SAMPLED_SUP_LABEL: &str = "sampled (under-estimate of sup)";
pub const SAMPLED_INF_LABEL: &str = "sampled (over-estimate of inf)";

#[derive(Debug, Clone, Serialize)]
pub struct Quantiles {
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub q95: f64,
    pub max: f64,
}

impl Quantiles {
    /// Nearest-rank quantiles of a non-empty sample.
    pub fn of(values: &[f64]) -> Self {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let q = |p: f64| v[((p * (v.len() - 1) as f64).round() as usize).min(v.len() - 1)];
        Self { min: v[0], q25: q(0.25), median: q(0.5), q75: q(0.75), q95: q(0.95), max: v[v.len() - 1] }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    /// Largest sampled `(Th̃)(x) − J̃*(x) − h̃(x)`.
    pub delta_hat: f64,
    /// `max_c gain(c) + delta_hat`.
    pub upper_bound: f64,
    pub max_gain: f64,
    pub samples: usize,
    pub support_points: usize,
    pub seed: u64,
    pub argmax: Belief,
    pub quantiles: Quantiles,
    pub label: &'static str,
}

impl BoundReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn sample_beliefs(n: usize, count: usize, seed: u64, tag: &str) -> Vec<Belief> {
    let mut stream = rng::substream(seed, tag, 0);
    (0..count).map(|_| sample_belief(n, &mut stream)).collect()
}

/// `(Th̃)(x) − J̃*(x) − h̃(x)` at each belief, with `T` the exact undiscounted backup.
pub fn theorem2_residuals(
    model: &PomdpModel,
    mdp: &ModifiedMdp,
    sol: &SensitiveSolution,
    beliefs: &[Belief],
) -> Result<Vec<f64>> {
    let h = BiasOracle { model, mdp, sol };
    beliefs
        .par_iter()
        .map(|x| {
            let ext = extend_average_solution(model, mdp, sol, x)?;
            Ok(model.exact_backup(x, &h, 1.0).value - ext.gain - ext.bias)
        })
        .collect()
}

/// Samples `samples` uniform beliefs plus every support belief and reports the
/// largest residual and the resulting upper bound.
pub fn estimate_theorem2_delta(
    model: &PomdpModel,
    mdp: &ModifiedMdp,
    sol: &SensitiveSolution,
    samples: usize,
    seed: u64,
) -> Result<BoundReport> {
    let mut beliefs = sample_beliefs(model.num_states(), samples, seed, "theorem2");
    beliefs.extend(mdp.support().iter().cloned());
    let residuals = theorem2_residuals(model, mdp, sol, &beliefs)?;
    let (arg, delta_hat) = residuals
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) });
    let max_gain = sol.gain_range().1;
    Ok(BoundReport {
        delta_hat,
        upper_bound: max_gain + delta_hat,
        max_gain,
        samples,
        support_points: mdp.len(),
        seed,
        argmax: beliefs[arg].clone(),
        quantiles: Quantiles::of(&residuals),
        label: SAMPLED_SUP_LABEL,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PolicyDeltaReport {
    pub delta_plus: f64,
    pub delta_minus: f64,
    pub samples: usize,
    pub seed: u64,
    /// `[λ+δ−, λ+δ+]` when the sampled `J` is constant at `λ`.
    pub sandwich: Option<(f64, f64)>,
    pub label_plus: &'static str,
    pub label_minus: &'static str,
}

/// `g̃_{μ(x)}(x) + E{h(x̃)} − J(x) − h(x)` at each belief, with the exact
/// one-step expectation under `μ(x)`.
pub fn policy_residuals(
    model: &PomdpModel,
    policy: &dyn BeliefPolicy,
    j: &(dyn ValueOracle + Sync),
    h: &(dyn ValueOracle + Sync),
    beliefs: &[Belief],
) -> Result<Vec<(f64, f64)>> {
    beliefs
        .par_iter()
        .map(|x| {
            let u = policy.action(x)?;
            let jx = j.value(x);
            Ok((model.q_value(x, u, h, 1.0) - jx - h.value(x), jx))
        })
        .collect()
}

pub fn policy_delta_bounds(
    model: &PomdpModel,
    policy: &dyn BeliefPolicy,
    j: &(dyn ValueOracle + Sync),
    h: &(dyn ValueOracle + Sync),
    samples: usize,
    seed: u64,
) -> Result<PolicyDeltaReport> {
    if samples == 0 {
        return Err(Error::InvalidArgument("sample count must be positive".into()));
    }
    let beliefs = sample_beliefs(model.num_states(), samples, seed, "lemma2");
    let res = policy_residuals(model, policy, j, h, &beliefs)?;
    let delta_plus = res.iter().map(|r| r.0).fold(f64::NEG_INFINITY, f64::max);
    let delta_minus = res.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
    let jmin = res.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    let jmax = res.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
    let sandwich = (jmax - jmin <= 1e-9 * jmax.abs().max(1.0))
        .then(|| (jmin + delta_minus, jmin + delta_plus));
    Ok(PolicyDeltaReport {
        delta_plus,
        delta_minus,
        samples,
        seed,
        sandwich,
        label_plus: SAMPLED_SUP_LABEL,
        label_minus: SAMPLED_INF_LABEL,
    })
}
