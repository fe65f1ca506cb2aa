//! Finite modified MDPs whose optimal costs lower-bound the POMDP's.
//!
//! Two constructions over a grid `G` with convex weights `γ`:
//!
//! * **D1** lives on `C = G`. From `x_j` under `u` the next support point is
//!   `x_i` with probability `Σ_z p(z|x_j,u) γ_i(φ_u(x_j,z))`. With the vertex
//!   grid this is the QMDP approximation.
//! * **D2** lives on the posteriors `C = {φ_u(x_i,z) : p(z|x_i,u) > 0}`. From
//!   `y ∈ C` under `u`, the controller first learns which grid point `x_i` the
//!   belief "came from" (with probability `γ_i(y)`) and then the observation,
//!   landing on `φ_u(x_i,z)` with probability `γ_i(y) p(z|x_i,u)`.
//!
//! In both cases the per-stage cost at a support belief `c` is `c'g_u`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grids::{ConvexWeights, GridScheme};
use crate::mdp::FiniteMdp;
use crate::model::{argmin_set, Backup, Belief, PomdpModel, ValueOracle, ARGMIN_TOL};

/// Modified rows must sum to one within this before renormalization.
pub const MODIFIED_ROW_TOL: f64 = 1e-8;
/// Maximum node count for exhaustive belief-tree evaluation.
pub const TREE_NODE_LIMIT: u128 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    D1,
    D2,
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "d1" => Ok(Scheme::D1),
            "d2" => Ok(Scheme::D2),
            _ => Err(Error::InvalidArgument(format!("unknown scheme '{s}'"))),
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Scheme::D1 => write!(f, "d1"),
            Scheme::D2 => write!(f, "d2"),
        }
    }
}

pub use crate::mdp::SparseRow;

/// Generating triple of a D2 support belief.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Origin {
    pub grid_index: usize,
    pub action: usize,
    pub observation: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ModifiedMdp {
    scheme: Scheme,
    grid: GridScheme,
    support: Vec<Belief>,
    num_actions: usize,
    /// `transition[c][u]`.
    transition: Vec<Vec<SparseRow>>,
    /// `cost[c][u] = c'g_u`.
    cost: Vec<Vec<f64>>,
    /// D2 only: generating triples of each support belief.
    provenance: Vec<Vec<Origin>>,
    /// D2 only: `grid_successors[i][u]` is the distribution of `φ_u(x_i,z)` over `C`.
    #[serde(skip)]
    grid_successors: Vec<Vec<SparseRow>>,
}

/// Dense accumulator producing sorted sparse rows.
struct Accumulator {
    dense: Vec<f64>,
    touched: Vec<usize>,
}

impl Accumulator {
    fn new(n: usize) -> Self {
        Self { dense: vec![0.0; n], touched: Vec::new() }
    }

    fn add(&mut self, i: usize, p: f64) {
        if p == 0.0 {
            return;
        }
        if self.dense[i] == 0.0 {
            self.touched.push(i);
        }
        self.dense[i] += p;
    }

    fn take(&mut self) -> SparseRow {
        self.touched.sort_unstable();
        let row = self
            .touched
            .iter()
            .map(|&i| (i, self.dense[i]))
            .filter(|(_, p)| *p > 0.0)
            .collect();
        for &i in &self.touched {
            self.dense[i] = 0.0;
        }
        self.touched.clear();
        row
    }
}

fn normalize_row(row: &mut SparseRow, c: usize, u: usize) -> Result<()> {
    let sum: f64 = row.iter().map(|(_, p)| p).sum();
    if (sum - 1.0).abs() > MODIFIED_ROW_TOL {
        return Err(Error::RowNormalization { row: c, action: u, sum });
    }
    if sum != 1.0 {
        for (_, p) in row.iter_mut() {
            *p /= sum;
        }
    }
    Ok(())
}

fn dot_row(row: &SparseRow, values: &[f64]) -> f64 {
    row.iter().map(|&(i, p)| p * values[i]).sum()
}

impl FiniteMdp for ModifiedMdp {
    fn num_states(&self) -> usize {
        self.support.len()
    }

    fn num_actions(&self) -> usize {
        self.num_actions
    }

    /// `P̃(·|c,u)`.
    fn row(&self, c: usize, u: usize) -> &SparseRow {
        &self.transition[c][u]
    }

    /// `g̃_u(c) = c'g_u`.
    fn cost(&self, c: usize, u: usize) -> f64 {
        self.cost[c][u]
    }
}

impl ModifiedMdp {
    pub fn build(model: &PomdpModel, grid: &GridScheme, scheme: Scheme) -> Result<Self> {
        if grid.num_states() != model.num_states() {
            return Err(Error::InvalidArgument(
                "grid dimension does not match the model".into(),
            ));
        }
        match scheme {
            Scheme::D1 => Self::build_d1(model, grid),
            Scheme::D2 => Self::build_d2(model, grid),
        }
    }

    fn build_d1(model: &PomdpModel, grid: &GridScheme) -> Result<Self> {
        let na = model.num_actions();
        let support = grid.points().to_vec();
        let mut acc = Accumulator::new(support.len());
        let mut transition = Vec::with_capacity(support.len());
        let mut cost = Vec::with_capacity(support.len());
        for (c, x) in support.iter().enumerate() {
            let mut rows = Vec::with_capacity(na);
            for u in 0..na {
                for post in model.posteriors(x, u) {
                    for (i, w) in grid.convex_coords(&post.belief)?.support {
                        acc.add(i, post.probability * w);
                    }
                }
                let mut row = acc.take();
                normalize_row(&mut row, c, u)?;
                rows.push(row);
            }
            transition.push(rows);
            cost.push((0..na).map(|u| model.stage_cost(x, u)).collect());
        }
        Ok(Self {
            scheme: Scheme::D1,
            grid: grid.clone(),
            support,
            num_actions: na,
            transition,
            cost,
            provenance: Vec::new(),
            grid_successors: Vec::new(),
        })
    }

    fn build_d2(model: &PomdpModel, grid: &GridScheme) -> Result<Self> {
        let na = model.num_actions();
        let mut support: Vec<Belief> = Vec::new();
        let mut provenance: Vec<Vec<Origin>> = Vec::new();
        let mut grid_successors: Vec<Vec<SparseRow>> = Vec::with_capacity(grid.len());
        for (i, xi) in grid.points().iter().enumerate() {
            let mut per_action = Vec::with_capacity(na);
            for u in 0..na {
                let mut row: SparseRow = Vec::new();
                for post in model.posteriors(xi, u) {
                    let origin = Origin { grid_index: i, action: u, observation: post.observation };
                    let c = match support.iter().position(|y| y.approx_eq(&post.belief)) {
                        Some(c) => {
                            provenance[c].push(origin);
                            c
                        }
                        None => {
                            support.push(post.belief);
                            provenance.push(vec![origin]);
                            support.len() - 1
                        }
                    };
                    match row.iter_mut().find(|(k, _)| *k == c) {
                        Some(entry) => entry.1 += post.probability,
                        None => row.push((c, post.probability)),
                    }
                }
                row.sort_by_key(|e| e.0);
                per_action.push(row);
            }
            grid_successors.push(per_action);
        }

        let mut acc = Accumulator::new(support.len());
        let mut transition = Vec::with_capacity(support.len());
        let mut cost = Vec::with_capacity(support.len());
        for (c, y) in support.iter().enumerate() {
            let weights = grid.convex_coords(y)?;
            let mut rows = Vec::with_capacity(na);
            for u in 0..na {
                for &(i, w) in &weights.support {
                    for &(k, p) in &grid_successors[i][u] {
                        acc.add(k, w * p);
                    }
                }
                let mut row = acc.take();
                normalize_row(&mut row, c, u)?;
                rows.push(row);
            }
            transition.push(rows);
            cost.push((0..na).map(|u| model.stage_cost(y, u)).collect());
        }
        Ok(Self {
            scheme: Scheme::D2,
            grid: grid.clone(),
            support,
            num_actions: na,
            transition,
            cost,
            provenance,
            grid_successors,
        })
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn grid(&self) -> &GridScheme {
        &self.grid
    }

    pub fn support(&self) -> &[Belief] {
        &self.support
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn provenance(&self) -> &[Vec<Origin>] {
        &self.provenance
    }

    /// One-step distribution over `C` from an arbitrary belief under `u`.
    pub fn successor_row(&self, model: &PomdpModel, x: &Belief, u: usize) -> Result<SparseRow> {
        let mut acc = Accumulator::new(self.len());
        match self.scheme {
            Scheme::D1 => {
                for post in model.posteriors(x, u) {
                    for (i, w) in self.grid.convex_coords(&post.belief)?.support {
                        acc.add(i, post.probability * w);
                    }
                }
            }
            Scheme::D2 => {
                let weights: ConvexWeights = self.grid.convex_coords(x)?;
                for &(i, w) in &weights.support {
                    for &(k, p) in &self.grid_successors[i][u] {
                        acc.add(k, w * p);
                    }
                }
            }
        }
        let mut row = acc.take();
        normalize_row(&mut row, usize::MAX, u)?;
        Ok(row)
    }

    /// Successor rows for every action.
    pub fn successor_rows(&self, model: &PomdpModel, x: &Belief) -> Result<Vec<SparseRow>> {
        (0..self.num_actions)
            .map(|u| self.successor_row(model, x, u))
            .collect()
    }

    /// The modified backup at an arbitrary belief:
    /// `min_u [x'g_u + α Σ_c P̃(c|x,u) V(c)]` with its argmin set.
    pub fn evaluate_extension(
        &self,
        model: &PomdpModel,
        values: &[f64],
        x: &Belief,
        alpha: f64,
    ) -> Result<Backup> {
        let mut q = Vec::with_capacity(self.num_actions);
        for u in 0..self.num_actions {
            let mut v = model.stage_cost(x, u);
            if alpha != 0.0 {
                v += alpha * dot_row(&self.successor_row(model, x, u)?, values);
            }
            q.push(v);
        }
        Ok(argmin_set(&q, ARGMIN_TOL))
    }

    /// Returns `((T̃^N J₀)(x₀), (T^N J₀)(x₀))` with `J₀ = 0`: the modified
    /// N-stage cost and the exact N-stage cost from the reachable belief tree.
    pub fn nstage_lower_bound_check(
        &self,
        model: &PomdpModel,
        horizon: usize,
        x0: &Belief,
        alpha: f64,
    ) -> Result<(f64, f64)> {
        let branching = (model.num_actions() * model.num_observations()) as u128;
        let mut nodes: u128 = 0;
        let mut level: u128 = 1;
        for _ in 0..=horizon {
            nodes = nodes.saturating_add(level);
            level = level.saturating_mul(branching);
        }
        if nodes > TREE_NODE_LIMIT {
            return Err(Error::TreeTooLarge { nodes, limit: TREE_NODE_LIMIT });
        }
        if horizon == 0 {
            return Ok((0.0, 0.0));
        }
        let mut values = vec![0.0; self.len()];
        for _ in 1..horizon {
            values = self.bellman(&values, alpha).0;
        }
        let approx = self.evaluate_extension(model, &values, x0, alpha)?.value;
        let exact = exact_nstage(model, x0, horizon, alpha);
        Ok((approx, exact))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// `(T^N 0)(x)` by recursion over the reachable belief tree.
pub fn exact_nstage(model: &PomdpModel, x: &Belief, horizon: usize, alpha: f64) -> f64 {
    if horizon == 0 {
        return 0.0;
    }
    let cont = |y: &Belief| exact_nstage(model, y, horizon - 1, alpha);
    model.exact_backup(x, &cont, alpha).value
}

/// The modified-MDP extension of support values, as a belief function.
pub struct ExtensionOracle<'a> {
    pub mdp: &'a ModifiedMdp,
    pub model: &'a PomdpModel,
    pub values: &'a [f64],
    pub alpha: f64,
}

impl ValueOracle for ExtensionOracle<'_> {
    fn value(&self, x: &Belief) -> f64 {
        self.mdp
            .evaluate_extension(self.model, self.values, x, self.alpha)
            .expect("grid contains every vertex, so convex weights always exist")
            .value
    }
}
