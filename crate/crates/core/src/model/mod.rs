//! POMDP data model and exact belief-space primitives.

mod belief;
pub mod cassandra;

pub use belief::{Belief, BELIEF_EQ_TOL};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Probability rows whose sum is off by more than this are rejected.
pub const ROW_REPAIR_TOL: f64 = 1e-6;
/// Validated rows must sum to one within this tolerance.
pub const ROW_SUM_TOL: f64 = 1e-9;
/// Observations with likelihood at or below this are never branched on.
pub const MIN_OBS_PROB: f64 = 1e-12;
/// Actions within this distance of the minimum belong to the argmin set.
pub const ARGMIN_TOL: f64 = 1e-9;

/// Optional human-readable names for states, actions and observations.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Labels {
    pub states: Option<Vec<String>>,
    pub actions: Option<Vec<String>>,
    pub observations: Option<Vec<String>>,
}

/// A finite POMDP with expected per-stage costs.
///
/// Tables are row-major: `transition[u][s][s']`, `observation[u][s'][z]`,
/// `cost[u][s]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel")]
pub struct PomdpModel {
    num_states: usize,
    num_actions: usize,
    num_observations: usize,
    transition: Vec<Vec<Vec<f64>>>,
    observation: Vec<Vec<Vec<f64>>>,
    cost: Vec<Vec<f64>>,
    discount: f64,
    start_belief: Option<Belief>,
    #[serde(default)]
    labels: Labels,
}

#[derive(Deserialize)]
struct RawModel {
    num_states: usize,
    num_actions: usize,
    num_observations: usize,
    transition: Vec<Vec<Vec<f64>>>,
    observation: Vec<Vec<Vec<f64>>>,
    cost: Vec<Vec<f64>>,
    discount: f64,
    start_belief: Option<Belief>,
    #[serde(default)]
    labels: Labels,
}

impl TryFrom<RawModel> for PomdpModel {
    type Error = Error;

    fn try_from(raw: RawModel) -> Result<Self> {
        let model = PomdpModel::new(raw.transition, raw.observation, raw.cost, raw.discount)?
            .with_labels(raw.labels)?;
        let model = match raw.start_belief {
            Some(b) => model.with_start(b)?,
            None => model,
        };
        if model.num_states != raw.num_states
            || model.num_actions != raw.num_actions
            || model.num_observations != raw.num_observations
        {
            return Err(Error::Validation(
                "declared dimensions disagree with table shapes".into(),
            ));
        }
        Ok(model)
    }
}

/// Result of a one-step backup: the minimum and every action attaining it.
#[derive(Debug, Clone, PartialEq)]
pub struct Backup {
    pub value: f64,
    pub actions: Vec<usize>,
}

impl Backup {
    /// Smallest-index minimizing action.
    pub fn action(&self) -> usize {
        self.actions[0]
    }
}

/// Minimum of `values` and the ascending list of indices within `tol` of it.
pub fn argmin_set(values: &[f64], tol: f64) -> Backup {
    let value = values.iter().copied().fold(f64::INFINITY, f64::min);
    let actions = values
        .iter()
        .enumerate()
        .filter(|(_, v)| **v <= value + tol)
        .map(|(i, _)| i)
        .collect();
    Backup { value, actions }
}

/// A real-valued function on the belief simplex.
pub trait ValueOracle {
    fn value(&self, x: &Belief) -> f64;
}

impl<F: Fn(&Belief) -> f64> ValueOracle for F {
    fn value(&self, x: &Belief) -> f64 {
        self(x)
    }
}

/// One reachable posterior: observation, its likelihood, and the updated belief.
#[derive(Debug, Clone)]
pub struct Posterior {
    pub observation: usize,
    pub probability: f64,
    pub belief: Belief,
}

fn check_row(row: &[f64], what: impl Fn() -> String) -> Result<Vec<f64>> {
    if row.iter().any(|p| !p.is_finite() || *p < 0.0 || *p > 1.0 + ROW_REPAIR_TOL) {
        return Err(Error::Validation(format!(
            "{} has an entry outside [0,1]",
            what()
        )));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > ROW_REPAIR_TOL {
        return Err(Error::Validation(format!("{} sums to {sum}", what())));
    }
    // Only repair rows carrying visible residue, so already-normalized rows
    // stay bit-identical across parse/serialize cycles.
    if (sum - 1.0).abs() > 1e-12 {
        Ok(row.iter().map(|p| (p / sum).min(1.0)).collect())
    } else {
        Ok(row.to_vec())
    }
}

impl PomdpModel {
    /// Validates the tables and renormalizes rows that are off by at most 1e-6.
    pub fn new(
        transition: Vec<Vec<Vec<f64>>>,
        observation: Vec<Vec<Vec<f64>>>,
        cost: Vec<Vec<f64>>,
        discount: f64,
    ) -> Result<Self> {
        let num_actions = transition.len();
        if num_actions == 0 {
            return Err(Error::Validation("model needs at least one action".into()));
        }
        let num_states = transition[0].len();
        if num_states == 0 {
            return Err(Error::Validation("model needs at least one state".into()));
        }
        let num_observations = observation.first().and_then(|o| o.first()).map_or(0, Vec::len);
        if num_observations == 0 {
            return Err(Error::Validation(
                "model needs at least one observation".into(),
            ));
        }
        if observation.len() != num_actions || cost.len() != num_actions {
            return Err(Error::Validation(
                "transition, observation and cost tables disagree on the action count".into(),
            ));
        }
        if !(0.0..=1.0).contains(&discount) {
            return Err(Error::Validation(format!("discount {discount} not in [0,1]")));
        }

        let mut t_out = Vec::with_capacity(num_actions);
        for (u, rows) in transition.iter().enumerate() {
            if rows.len() != num_states || rows.iter().any(|r| r.len() != num_states) {
                return Err(Error::Validation(format!(
                    "transition table for action {u} is not {num_states}x{num_states}"
                )));
            }
            let mut checked = Vec::with_capacity(num_states);
            for (s, row) in rows.iter().enumerate() {
                checked.push(check_row(row, || format!("transition row (action {u}, state {s})"))?);
            }
            t_out.push(checked);
        }
        let mut o_out = Vec::with_capacity(num_actions);
        for (u, rows) in observation.iter().enumerate() {
            if rows.len() != num_states || rows.iter().any(|r| r.len() != num_observations) {
                return Err(Error::Validation(format!(
                    "observation table for action {u} is not {num_states}x{num_observations}"
                )));
            }
            let mut checked = Vec::with_capacity(num_states);
            for (s, row) in rows.iter().enumerate() {
                checked.push(check_row(row, || {
                    format!("observation row (action {u}, end state {s})")
                })?);
            }
            o_out.push(checked);
        }
        for (u, row) in cost.iter().enumerate() {
            if row.len() != num_states {
                return Err(Error::Validation(format!(
                    "cost vector for action {u} has length {}",
                    row.len()
                )));
            }
            if row.iter().any(|c| !c.is_finite()) {
                return Err(Error::Validation(format!(
                    "cost vector for action {u} is not finite"
                )));
            }
        }
        Ok(Self {
            num_states,
            num_actions,
            num_observations,
            transition: t_out,
            observation: o_out,
            cost,
            discount,
            start_belief: None,
            labels: Labels::default(),
        })
    }

    pub fn with_start(mut self, start: Belief) -> Result<Self> {
        if start.len() != self.num_states {
            return Err(Error::Validation(format!(
                "start belief has {} entries, model has {} states",
                start.len(),
                self.num_states
            )));
        }
        self.start_belief = Some(start);
        Ok(self)
    }

    pub fn with_labels(mut self, labels: Labels) -> Result<Self> {
        let check = |names: &Option<Vec<String>>, n: usize, what: &str| match names {
            Some(v) if v.len() != n => Err(Error::Validation(format!(
                "{} {what} names for {n} {what}",
                v.len()
            ))),
            _ => Ok(()),
        };
        check(&labels.states, self.num_states, "states")?;
        check(&labels.actions, self.num_actions, "actions")?;
        check(&labels.observations, self.num_observations, "observations")?;
        self.labels = labels;
        Ok(self)
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn num_observations(&self) -> usize {
        self.num_observations
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn start_belief(&self) -> Option<&Belief> {
        self.start_belief.as_ref()
    }

    /// The declared start belief, or the uniform belief when none is given.
    pub fn initial_belief(&self) -> Belief {
        self.start_belief
            .clone()
            .unwrap_or_else(|| Belief::uniform(self.num_states))
    }

    pub fn labels(&self) -> &Labels {
        &self.labels
    }

    /// `P(s'|s,u)`.
    pub fn transition(&self, u: usize, s: usize, s_next: usize) -> f64 {
        self.transition[u][s][s_next]
    }

    pub fn transition_row(&self, u: usize, s: usize) -> &[f64] {
        &self.transition[u][s]
    }

    /// `P(z|s',u)`.
    pub fn observation(&self, u: usize, s_next: usize, z: usize) -> f64 {
        self.observation[u][s_next][z]
    }

    pub fn observation_row(&self, u: usize, s_next: usize) -> &[f64] {
        &self.observation[u][s_next]
    }

    /// `g_u(s)`.
    pub fn cost(&self, u: usize, s: usize) -> f64 {
        self.cost[u][s]
    }

    pub fn cost_vector(&self, u: usize) -> &[f64] {
        &self.cost[u]
    }

    fn check_belief(&self, x: &Belief) {
        assert_eq!(
            x.len(),
            self.num_states,
            "belief dimension does not match the model"
        );
    }

    /// Predicted next-state distribution `Σ_s x(s) P(·|s,u)`.
    pub fn predict(&self, x: &Belief, u: usize) -> Vec<f64> {
        self.check_belief(x);
        let mut out = vec![0.0; self.num_states];
        for (s, &xs) in x.iter().enumerate() {
            if xs == 0.0 {
                continue;
            }
            for (o, p) in out.iter_mut().zip(&self.transition[u][s]) {
                *o += xs * p;
            }
        }
        out
    }

    /// `p(z|x,u)` for every observation.
    pub fn observation_probabilities(&self, x: &Belief, u: usize) -> Vec<f64> {
        let pred = self.predict(x, u);
        self.obs_from_prediction(&pred, u)
    }

    fn obs_from_prediction(&self, pred: &[f64], u: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.num_observations];
        for (s_next, &p) in pred.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for (o, q) in out.iter_mut().zip(&self.observation[u][s_next]) {
                *o += p * q;
            }
        }
        out
    }

    fn posterior_from_prediction(&self, pred: &[f64], u: usize, z: usize, pz: f64) -> Belief {
        let probs = pred
            .iter()
            .enumerate()
            .map(|(s_next, p)| p * self.observation[u][s_next][z] / pz)
            .collect();
        Belief::renormalized(probs)
    }

    /// Bayes posterior `φ_u(x,z)`.
    pub fn belief_update(&self, x: &Belief, u: usize, z: usize) -> Result<Belief> {
        let pred = self.predict(x, u);
        let pz = self.obs_from_prediction(&pred, u)[z];
        if pz <= MIN_OBS_PROB {
            return Err(Error::ZeroProbabilityObservation {
                action: u,
                observation: z,
                probability: pz,
            });
        }
        Ok(self.posterior_from_prediction(&pred, u, z, pz))
    }

    /// All posteriors reachable from `x` under `u`, skipping observations with
    /// likelihood at or below [`MIN_OBS_PROB`].
    pub fn posteriors(&self, x: &Belief, u: usize) -> Vec<Posterior> {
        let pred = self.predict(x, u);
        let obs = self.obs_from_prediction(&pred, u);
        obs.iter()
            .enumerate()
            .filter(|(_, &pz)| pz > MIN_OBS_PROB)
            .map(|(z, &pz)| Posterior {
                observation: z,
                probability: pz,
                belief: self.posterior_from_prediction(&pred, u, z, pz),
            })
            .collect()
    }

    /// Expected immediate cost `x'g_u`.
    pub fn stage_cost(&self, x: &Belief, u: usize) -> f64 {
        self.check_belief(x);
        x.iter().zip(&self.cost[u]).map(|(a, b)| a * b).sum()
    }

    /// `x'g_u + α Σ_z p(z|x,u) J(φ_u(x,z))` for one action.
    pub fn q_value(&self, x: &Belief, u: usize, j: &dyn ValueOracle, alpha: f64) -> f64 {
        let mut v = self.stage_cost(x, u);
        if alpha != 0.0 {
            let cont: f64 = self
                .posteriors(x, u)
                .iter()
                .map(|p| p.probability * j.value(&p.belief))
                .sum();
            v += alpha * cont;
        }
        v
    }

    /// Exact one-step Bellman backup `(TJ)(x)` with its argmin set.
    pub fn exact_backup(&self, x: &Belief, j: &dyn ValueOracle, alpha: f64) -> Backup {
        let q: Vec<f64> = (0..self.num_actions)
            .map(|u| self.q_value(x, u, j, alpha))
            .collect();
        argmin_set(&q, ARGMIN_TOL)
    }

    /// Draws `(s', z)` from the true dynamics.
    pub fn sample_step<R: Rng + ?Sized>(&self, s: usize, u: usize, rng: &mut R) -> (usize, usize) {
        let s_next = sample_index(&self.transition[u][s], rng);
        let z = sample_index(&self.observation[u][s_next], rng);
        (s_next, z)
    }

    /// Full-information MDP view: `P(·|s,u)` and `g_u(s)`.
    pub fn underlying_mdp(&self) -> (Vec<Vec<Vec<f64>>>, Vec<Vec<f64>>) {
        (self.transition.clone(), self.cost.clone())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Inverse-CDF draw from a probability vector.
pub fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let r: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = i;
            if r < acc {
                return i;
            }
        }
    }
    last
}
