//! Sensitive policy evaluation and improvement.
//!
//! For a stationary policy with transition matrix `P`, cost `g` and limiting
//! matrix `P*`, let `Z = (I − P + P*)^{-1}` and `D = Z(I − P*)` (the deviation
//! matrix). Then
//!
//! ```text
//! gain = P* g,   h = D g,   w_k = −D w_{k−1}  (w_0 = h)
//! ```
//!
//! is the unique solution of `gain = P gain`, `gain + h = g + P h`,
//! `w_{k−1} + w_k = P w_k` together with the normalizations `P* h = 0`,
//! `P* w_k = 0`. These normalizations are exactly the ones produced by solving
//! the block-triangular system one level deeper and discarding the top block.

use serde::Serialize;

use super::chain::{chain_decompose, ChainDecomposition};
use super::narrow;
use crate::error::{Error, Result};
use crate::linalg::{to_matrix, Solver};
use crate::mdp::FiniteMdp;

pub const DEFAULT_ORDER: i32 = 2;
pub const MAX_POLICY_ITERATIONS: usize = 10_000;
/// Acceptance threshold for the nested-equation residuals.
pub const RESIDUAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Serialize)]
pub struct PolicyEvaluation {
    pub gain: Vec<f64>,
    pub bias: Vec<f64>,
    /// `w_1 .. w_{n+1}`.
    pub w: Vec<Vec<f64>>,
    pub chain: ChainDecomposition,
}

impl PolicyEvaluation {
    /// The vector compared at nested level `level` (−1 gain, 0 bias, k ≥ 1 `w_k`).
    fn level(&self, level: i32) -> &[f64] {
        match level {
            -1 => &self.gain,
            0 => &self.bias,
            k => &self.w[k as usize - 1],
        }
    }
}

fn check_order(n: i32) -> Result<()> {
    if n < -1 {
        return Err(Error::InvalidArgument(format!("order {n} must be at least -1")));
    }
    Ok(())
}

fn check_policy<M: FiniteMdp + ?Sized>(mdp: &M, policy: &[usize]) -> Result<()> {
    if policy.len() != mdp.num_states() {
        return Err(Error::InvalidArgument(format!(
            "policy has {} entries for {} states",
            policy.len(),
            mdp.num_states()
        )));
    }
    if let Some(s) = policy.iter().position(|&u| u >= mdp.num_actions()) {
        return Err(Error::InvalidArgument(format!("policy action at state {s} is out of range")));
    }
    Ok(())
}

fn mat_vec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    a.iter().map(|r| r.iter().zip(x).map(|(p, v)| p * v).sum()).collect()
}

pub fn policy_evaluation_sensitive<M: FiniteMdp + ?Sized>(
    mdp: &M,
    policy: &[usize],
    n: i32,
) -> Result<PolicyEvaluation> {
    check_order(n)?;
    check_policy(mdp, policy)?;
    let p = mdp.policy_matrix(policy);
    let g = mdp.policy_costs(policy);
    let chain = chain_decompose(&p)?;
    let pstar = &chain.stationary;
    let size = p.len();
    let a: Vec<Vec<f64>> = (0..size)
        .map(|i| {
            (0..size)
                .map(|j| if i == j { 1.0 } else { 0.0 } - p[i][j] + pstar[i][j])
                .collect()
        })
        .collect();
    let z = Solver::new(to_matrix(&a), "sensitive evaluation")?;
    let deviation = |v: &[f64]| -> Result<Vec<f64>> {
        let pv = mat_vec(pstar, v);
        let centered: Vec<f64> = v.iter().zip(&pv).map(|(a, b)| a - b).collect();
        z.solve(&centered)
    };
    let gain = mat_vec(pstar, &g);
    let bias = deviation(&g)?;
    let mut w: Vec<Vec<f64>> = Vec::new();
    for _ in 0..=n {
        let prev = w.last().unwrap_or(&bias);
        let next: Vec<f64> = deviation(prev)?.into_iter().map(|v| -v).collect();
        w.push(next);
    }
    Ok(PolicyEvaluation { gain, bias, w, chain })
}

/// Nested argmin sets `U_{−1} ⊇ U_0 ⊇ … ⊇ U_{n+1}` at state `s`.
fn nested_sets<M: FiniteMdp + ?Sized>(
    mdp: &M,
    eval: &PolicyEvaluation,
    s: usize,
    n: i32,
) -> Vec<Vec<usize>> {
    let mut sets = Vec::with_capacity((n + 3) as usize);
    let mut cand: Vec<usize> = (0..mdp.num_actions()).collect();
    for level in -1..=n + 1 {
        let v = eval.level(level);
        cand = if level == 0 {
            narrow(&cand, |u| mdp.cost(s, u) + mdp.expect(s, u, v))
        } else {
            narrow(&cand, |u| mdp.expect(s, u, v))
        };
        sets.push(cand.clone());
    }
    sets
}

#[derive(Debug, Clone)]
pub struct Improvement {
    pub policy: Vec<usize>,
    pub improved: bool,
}

/// Keeps the current action wherever it survives to `U_{n+1}`; elsewhere takes
/// the smallest index of `U_{n+1}`.
pub fn policy_improvement_sensitive<M: FiniteMdp + ?Sized>(
    mdp: &M,
    eval: &PolicyEvaluation,
    current: &[usize],
    n: i32,
) -> Improvement {
    let mut improved = false;
    let policy = current
        .iter()
        .enumerate()
        .map(|(s, &u)| {
            let top = nested_sets(mdp, eval, s, n).pop().expect("at least two levels");
            if top.contains(&u) {
                u
            } else {
                improved = true;
                top[0]
            }
        })
        .collect();
    Improvement { policy, improved }
}

#[derive(Debug, Clone, Serialize)]
pub struct ChainSummary {
    pub recurrent_classes: Vec<Vec<usize>>,
    pub transient: Vec<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SensitiveSolution {
    pub order: i32,
    pub gain: Vec<f64>,
    pub bias: Vec<f64>,
    pub w: Vec<Vec<f64>>,
    pub policy: Vec<usize>,
    /// Sup-norm residual of each nested optimality equation, from the gain
    /// equation (index 0) through the `w_{n+1}` equation.
    pub residuals: Vec<f64>,
    /// Whether the policy's action lies in every nested argmin set.
    pub policy_in_argmin: bool,
    /// Whether the gain is the same at every support state.
    pub constant_gain: bool,
    pub chain: ChainSummary,
    pub iterations: usize,
}

impl SensitiveSolution {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }

    pub fn gain_range(&self) -> (f64, f64) {
        let lo = self.gain.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.gain.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    pub(crate) fn level(&self, level: i32) -> &[f64] {
        match level {
            -1 => &self.gain,
            0 => &self.bias,
            k => &self.w[k as usize - 1],
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Residuals of the nested optimality equations
///
/// ```text
/// gain(s)            = min_{u ∈ U}      P_u gain(s)
/// gain(s) + h(s)     = min_{u ∈ U_{−1}} g_u(s) + P_u h(s)
/// w_{k−1}(s) + w_k(s) = min_{u ∈ U_{k−1}} P_u w_k(s)
/// ```
///
/// and whether `policy(s)` belongs to every `U_k(s)`.
pub fn nested_residuals<M: FiniteMdp + ?Sized>(
    mdp: &M,
    eval: &PolicyEvaluation,
    policy: &[usize],
    n: i32,
) -> (Vec<f64>, bool) {
    let levels = (n + 3) as usize;
    let mut res = vec![0.0f64; levels];
    let mut inside = true;
    for s in 0..mdp.num_states() {
        let sets = nested_sets(mdp, eval, s, n);
        let all: Vec<usize> = (0..mdp.num_actions()).collect();
        for (idx, level) in (-1..=n + 1).enumerate() {
            let allowed = if idx == 0 { &all } else { &sets[idx - 1] };
            let v = eval.level(level);
            let (lhs, rhs) = match level {
                -1 => (
                    eval.gain[s],
                    allowed.iter().map(|&u| mdp.expect(s, u, v)).fold(f64::INFINITY, f64::min),
                ),
                0 => (
                    eval.gain[s] + eval.bias[s],
                    allowed
                        .iter()
                        .map(|&u| mdp.cost(s, u) + mdp.expect(s, u, v))
                        .fold(f64::INFINITY, f64::min),
                ),
                k => (
                    eval.level(k - 1)[s] + v[s],
                    allowed.iter().map(|&u| mdp.expect(s, u, v)).fold(f64::INFINITY, f64::min),
                ),
            };
            res[idx] = res[idx].max((lhs - rhs).abs());
        }
        inside &= sets.iter().all(|set| set.contains(&policy[s]));
    }
    (res, inside)
}

/// Smallest-index myopic minimizer at every state.
fn myopic_policy<M: FiniteMdp + ?Sized>(mdp: &M) -> Vec<usize> {
    (0..mdp.num_states())
        .map(|s| {
            (0..mdp.num_actions())
                .fold((0, f64::INFINITY), |(b, bv), u| {
                    let v = mdp.cost(s, u);
                    if v < bv { (u, v) } else { (b, bv) }
                })
                .0
        })
        .collect()
}

/// Multichain policy iteration to an `n`-discount optimal policy, starting
/// from the myopic policy.
pub fn solve_multichain<M: FiniteMdp + ?Sized>(mdp: &M, n: i32) -> Result<SensitiveSolution> {
    check_order(n)?;
    let mut policy = myopic_policy(mdp);
    let mut previous: Vec<usize> = policy.clone();
    let mut iterations = 0;
    loop {
        iterations += 1;
        let eval = policy_evaluation_sensitive(mdp, &policy, n)?;
        let step = policy_improvement_sensitive(mdp, &eval, &policy, n);
        if !step.improved {
            let (residuals, policy_in_argmin) = nested_residuals(mdp, &eval, &policy, n);
            let (lo, hi) = eval
                .gain
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &g| (l.min(g), h.max(g)));
            let constant_gain = hi - lo <= 1e-9 * lo.abs().max(hi.abs()).max(1.0);
            return Ok(SensitiveSolution {
                order: n,
                gain: eval.gain,
                bias: eval.bias,
                w: eval.w,
                policy,
                residuals,
                policy_in_argmin,
                constant_gain,
                chain: ChainSummary {
                    recurrent_classes: eval.chain.classes,
                    transient: eval.chain.transient,
                },
                iterations,
            });
        }
        if iterations >= MAX_POLICY_ITERATIONS {
            return Err(Error::NoConvergence {
                iterations,
                detail: format!("last two policies {previous:?} and {policy:?}"),
            });
        }
        previous = std::mem::replace(&mut policy, step.policy);
    }
}
