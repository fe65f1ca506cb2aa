//! Belief-space policies, Monte-Carlo evaluation and bootstrap standard errors.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::avgcost::{extend_average_solution, BiasOracle, SensitiveSolution};
use crate::discount::{greedy_modified_action, lookahead_action, DiscountSolution};
use crate::error::{Error, Result};
use crate::lower::ModifiedMdp;
use crate::model::{sample_index, Belief, PomdpModel};
use crate::rng;

pub const DEFAULT_BOOTSTRAP_RESAMPLES: usize = 100;

/// A stationary policy on beliefs.
pub trait BeliefPolicy: Sync {
    fn action(&self, x: &Belief) -> Result<usize>;
    fn describe(&self) -> String;
}

/// Smallest index of `U_{n+1}(x)` from the extended average solution.
pub struct AverageStepPolicy<'a> {
    pub model: &'a PomdpModel,
    pub mdp: &'a ModifiedMdp,
    pub sol: &'a SensitiveSolution,
}

impl BeliefPolicy for AverageStepPolicy<'_> {
    fn action(&self, x: &Belief) -> Result<usize> {
        Ok(extend_average_solution(self.model, self.mdp, self.sol, x)?.action)
    }

    fn describe(&self) -> String {
        format!("average-step2 {} {} n={}", self.mdp.scheme(), self.mdp.grid().pattern(), self.sol.order)
    }
}

/// `argmin_u x'g_u + Σ_z p(z|x,u) h̃(φ_u(x,z))` on the true dynamics.
pub struct AverageLookaheadPolicy<'a> {
    pub model: &'a PomdpModel,
    pub mdp: &'a ModifiedMdp,
    pub sol: &'a SensitiveSolution,
}

impl BeliefPolicy for AverageLookaheadPolicy<'_> {
    fn action(&self, x: &Belief) -> Result<usize> {
        let h = BiasOracle { model: self.model, mdp: self.mdp, sol: self.sol };
        Ok(self.model.exact_backup(x, &h, 1.0).action())
    }

    fn describe(&self) -> String {
        format!("average-lookahead {} {} n={}", self.mdp.scheme(), self.mdp.grid().pattern(), self.sol.order)
    }
}

/// One-step lookahead with the discounted approximation as continuation cost.
pub struct DiscountLookaheadPolicy<'a> {
    pub model: &'a PomdpModel,
    pub mdp: &'a ModifiedMdp,
    pub sol: &'a DiscountSolution,
}

impl BeliefPolicy for DiscountLookaheadPolicy<'_> {
    fn action(&self, x: &Belief) -> Result<usize> {
        Ok(lookahead_action(self.model, self.mdp, self.sol, x))
    }

    fn describe(&self) -> String {
        format!("discount-lookahead {} {} alpha={}", self.mdp.scheme(), self.mdp.grid().pattern(), self.sol.alpha)
    }
}

/// Minimizer of the modified discounted backup.
pub struct DiscountGreedyPolicy<'a> {
    pub model: &'a PomdpModel,
    pub mdp: &'a ModifiedMdp,
    pub sol: &'a DiscountSolution,
}

impl BeliefPolicy for DiscountGreedyPolicy<'_> {
    fn action(&self, x: &Belief) -> Result<usize> {
        greedy_modified_action(self.model, self.mdp, self.sol, x)
    }

    fn describe(&self) -> String {
        format!("discount-greedy {} {} alpha={}", self.mdp.scheme(), self.mdp.grid().pattern(), self.sol.alpha)
    }
}

/// Always the same action.
pub struct ConstantPolicy(pub usize);

impl BeliefPolicy for ConstantPolicy {
    fn action(&self, _: &Belief) -> Result<usize> {
        Ok(self.0)
    }

    fn describe(&self) -> String {
        format!("constant {}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub policy: String,
    pub seed: u64,
    pub horizon: usize,
    pub trajectories: usize,
    /// Per-trajectory average cost per stage, in trajectory order.
    pub averages: Vec<f64>,
    pub mean: f64,
    pub standard_error: Option<f64>,
    pub bootstrap_resamples: Option<usize>,
}

impl SimulationReport {
    /// Fills in the bootstrap standard error of the mean.
    pub fn with_bootstrap(mut self, resamples: usize) -> Result<Self> {
        self.standard_error = Some(bootstrap_standard_error(&self.averages, resamples, self.seed)?);
        self.bootstrap_resamples = Some(resamples);
        Ok(self)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One row per trajectory.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["trajectory", "average_cost", "policy", "seed", "horizon"])
            .map_err(csv_err)?;
        for (i, a) in self.averages.iter().enumerate() {
            w.write_record([
                i.to_string(),
                format!("{a:?}"),
                self.policy.clone(),
                self.seed.to_string(),
                self.horizon.to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

fn run_trajectory(
    model: &PomdpModel,
    policy: &dyn BeliefPolicy,
    x0: &Belief,
    horizon: usize,
    seed: u64,
    index: usize,
) -> Result<f64> {
    let mut rng = rng::substream(seed, "trajectory", index as u64);
    let mut s = sample_index(x0, &mut rng);
    let mut belief = x0.clone();
    let mut total = 0.0;
    for _ in 0..horizon {
        let u = policy.action(&belief)?;
        total += model.cost(u, s);
        let (s_next, z) = model.sample_step(s, u, &mut rng);
        belief = model.belief_update(&belief, u, z)?;
        s = s_next;
    }
    Ok(total / horizon as f64)
}

/// Simulates `count` trajectories of `horizon` steps from `x0`. Trajectory `i`
/// draws from its own sub-stream, so the report does not depend on scheduling.
pub fn simulate_trajectories(
    model: &PomdpModel,
    policy: &dyn BeliefPolicy,
    x0: &Belief,
    count: usize,
    horizon: usize,
    seed: u64,
) -> Result<SimulationReport> {
    if count == 0 || horizon == 0 {
        return Err(Error::InvalidArgument("trajectory count and horizon must be positive".into()));
    }
    if x0.len() != model.num_states() {
        return Err(Error::InvalidBelief("start belief has the wrong dimension".into()));
    }
    let averages: Vec<f64> = (0..count)
        .into_par_iter()
        .map(|i| run_trajectory(model, policy, x0, horizon, seed, i))
        .collect::<Result<_>>()?;
    let mean = averages.iter().sum::<f64>() / count as f64;
    Ok(SimulationReport {
        policy: policy.describe(),
        seed,
        horizon,
        trajectories: count,
        averages,
        mean,
        standard_error: None,
        bootstrap_resamples: None,
    })
}

/// Standard deviation (divisor `B`) of `B` resampled means.
pub fn bootstrap_standard_error(samples: &[f64], resamples: usize, seed: u64) -> Result<f64> {
    if samples.len() < 2 || resamples < 2 {
        return Err(Error::InvalidArgument(
            "bootstrap needs at least two samples and two resamples".into(),
        ));
    }
    let mut rng = rng::substream(seed, "bootstrap", 0);
    let n = samples.len();
    let means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| samples[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    let mu = means.iter().sum::<f64>() / resamples as f64;
    let var = means.iter().map(|m| (m - mu).powi(2)).sum::<f64>() / resamples as f64;
    Ok(var.sqrt())
}
