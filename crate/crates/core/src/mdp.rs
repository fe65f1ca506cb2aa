//! Finite-state MDP interface shared by the modified MDPs and hand-built tables.

use crate::error::{Error, Result};
use crate::model::{argmin_set, ARGMIN_TOL};

/// Sparse probability row: `(state index, probability)` sorted by index.
pub type SparseRow = Vec<(usize, f64)>;

pub trait FiniteMdp {
    fn num_states(&self) -> usize;
    fn num_actions(&self) -> usize;
    /// `P(·|s,u)`.
    fn row(&self, s: usize, u: usize) -> &SparseRow;
    /// `g_u(s)`.
    fn cost(&self, s: usize, u: usize) -> f64;

    /// `Σ_t P(t|s,u) v(t)`.
    fn expect(&self, s: usize, u: usize, values: &[f64]) -> f64 {
        self.row(s, u).iter().map(|&(t, p)| p * values[t]).sum()
    }

    /// Dense transition matrix of a stationary policy.
    fn policy_matrix(&self, policy: &[usize]) -> Vec<Vec<f64>> {
        let n = self.num_states();
        policy
            .iter()
            .enumerate()
            .map(|(s, &u)| {
                let mut r = vec![0.0; n];
                for &(t, p) in self.row(s, u) {
                    r[t] += p;
                }
                r
            })
            .collect()
    }

    fn policy_costs(&self, policy: &[usize]) -> Vec<f64> {
        policy.iter().enumerate().map(|(s, &u)| self.cost(s, u)).collect()
    }

    /// One Jacobi sweep `min_u [g_u + α P_u v]` with smallest-index minimizers.
    fn bellman(&self, values: &[f64], alpha: f64) -> (Vec<f64>, Vec<usize>) {
        let mut out = Vec::with_capacity(self.num_states());
        let mut policy = Vec::with_capacity(self.num_states());
        let mut q = vec![0.0; self.num_actions()];
        for s in 0..self.num_states() {
            for (u, qu) in q.iter_mut().enumerate() {
                *qu = self.cost(s, u) + alpha * self.expect(s, u, values);
            }
            let b = argmin_set(&q, ARGMIN_TOL);
            out.push(b.value);
            policy.push(b.action());
        }
        (out, policy)
    }
}

/// An explicitly tabulated MDP.
#[derive(Debug, Clone)]
pub struct TabularMdp {
    rows: Vec<Vec<SparseRow>>,
    costs: Vec<Vec<f64>>,
}

impl TabularMdp {
    /// `transition[s][u][t]` and `cost[s][u]`; rows must be probability vectors.
    pub fn new(transition: Vec<Vec<Vec<f64>>>, cost: Vec<Vec<f64>>) -> Result<Self> {
        let n = transition.len();
        if n == 0 || cost.len() != n {
            return Err(Error::InvalidArgument("empty or mismatched MDP tables".into()));
        }
        let na = transition[0].len();
        let mut rows = Vec::with_capacity(n);
        for (s, per_action) in transition.iter().enumerate() {
            if per_action.len() != na || cost[s].len() != na {
                return Err(Error::InvalidArgument(format!("state {s} has a wrong action count")));
            }
            let mut out = Vec::with_capacity(na);
            for (u, r) in per_action.iter().enumerate() {
                let sum: f64 = r.iter().sum();
                if r.len() != n || r.iter().any(|p| *p < 0.0) || (sum - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidArgument(format!(
                        "row (state {s}, action {u}) is not a probability vector"
                    )));
                }
                out.push(
                    r.iter()
                        .enumerate()
                        .filter(|(_, p)| **p > 0.0)
                        .map(|(t, p)| (t, *p))
                        .collect(),
                );
            }
            rows.push(out);
        }
        Ok(Self { rows, costs: cost })
    }
}

impl FiniteMdp for TabularMdp {
    fn num_states(&self) -> usize {
        self.rows.len()
    }

    fn num_actions(&self) -> usize {
        self.rows[0].len()
    }

    fn row(&self, s: usize, u: usize) -> &SparseRow {
        &self.rows[s][u]
    }

    fn cost(&self, s: usize, u: usize) -> f64 {
        self.costs[s][u]
    }
}
