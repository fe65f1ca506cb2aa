//! Extension of an average-cost solution on `C` to arbitrary beliefs.

use serde::Serialize;

use super::narrow;
use super::sensitive::SensitiveSolution;
use crate::error::Result;
use crate::lower::ModifiedMdp;
use crate::mdp::SparseRow;
use crate::model::{Belief, PomdpModel, ValueOracle};

#[derive(Debug, Clone, Serialize)]
pub struct AverageExtension {
    /// `U_{n+1}(x)` in increasing order.
    pub actions: Vec<usize>,
    /// Smallest index of `U_{n+1}(x)`.
    pub action: usize,
    /// `J̃*(x)`.
    pub gain: f64,
    /// `h̃(x)`.
    pub bias: f64,
}

fn dot(row: &SparseRow, v: &[f64]) -> f64 {
    row.iter().map(|&(c, p)| p * v[c]).sum()
}

/// Runs the nested argmin at `x` with the modified one-step distribution over
/// `C`, then sets `J̃*(x) = Ẽ[gain]` and `h̃(x) = x'g_u + Ẽ[h] − J̃*(x)`.
pub fn extend_average_solution(
    model: &PomdpModel,
    mdp: &ModifiedMdp,
    sol: &SensitiveSolution,
    x: &Belief,
) -> Result<AverageExtension> {
    let rows = mdp.successor_rows(model, x)?;
    let costs: Vec<f64> = (0..rows.len()).map(|u| model.stage_cost(x, u)).collect();
    let mut cand: Vec<usize> = (0..rows.len()).collect();
    for level in -1..=sol.order + 1 {
        let v = sol.level(level);
        cand = if level == 0 {
            narrow(&cand, |u| costs[u] + dot(&rows[u], v))
        } else {
            narrow(&cand, |u| dot(&rows[u], v))
        };
    }
    let u = cand[0];
    let gain = dot(&rows[u], &sol.gain);
    let bias = costs[u] + dot(&rows[u], &sol.bias) - gain;
    Ok(AverageExtension { actions: cand, action: u, gain, bias })
}

/// `x ↦ h̃(x)`.
pub struct BiasOracle<'a> {
    pub model: &'a PomdpModel,
    pub mdp: &'a ModifiedMdp,
    pub sol: &'a SensitiveSolution,
}

impl ValueOracle for BiasOracle<'_> {
    fn value(&self, x: &Belief) -> f64 {
        extend_average_solution(self.model, self.mdp, self.sol, x)
            .expect("grid contains every vertex, so convex weights always exist")
            .bias
    }
}

/// `x ↦ J̃*(x)`.
pub struct GainOracle<'a> {
    pub model: &'a PomdpModel,
    pub mdp: &'a ModifiedMdp,
    pub sol: &'a SensitiveSolution,
}

impl ValueOracle for GainOracle<'_> {
    fn value(&self, x: &Belief) -> f64 {
        extend_average_solution(self.model, self.mdp, self.sol, x)
            .expect("grid contains every vertex, so convex weights always exist")
            .gain
    }
}
