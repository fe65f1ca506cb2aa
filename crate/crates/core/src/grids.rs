//! Belief grids and their LP-based convex representation.
//!
//! A grid always starts with the `|S|` simplex vertices, so every belief has a
//! convex representation. Weights are the basic optimal solution of
//!
//! ```text
//! min Σ_i γ_i ‖x − x_i‖₁   s.t.  Σ_i γ_i x_i = x,  γ ≥ 0
//! ```
//!
//! (the unit-sum constraint is implied because every `x_i` and `x` sum to one),
//! started from the vertex basis and pivoted with Bland's rule.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::DenseLp;
use crate::model::Belief;
use crate::rng;

/// Weights below this are treated as round-off and dropped.
const WEIGHT_FLOOR: f64 = 1e-14;

/// A finite belief set `G` whose first `|S|` points are the vertices `e_s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridScheme {
    points: Vec<Belief>,
    pattern: String,
    seed: Option<u64>,
}

/// Convex weights of one belief: `(grid index, weight)` sorted by index.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvexWeights {
    pub support: Vec<(usize, f64)>,
}

impl ConvexWeights {
    /// Largest L1 distance from `x` to a supporting point.
    pub fn radius(&self, grid: &GridScheme, x: &Belief) -> f64 {
        self.support
            .iter()
            .map(|&(i, _)| x.l1_distance(&grid.points[i]))
            .fold(0.0, f64::max)
    }

    pub fn reconstruct(&self, grid: &GridScheme) -> Vec<f64> {
        let mut out = vec![0.0; grid.num_states()];
        for &(i, w) in &self.support {
            for (o, p) in out.iter_mut().zip(grid.points[i].iter()) {
                *o += w * p;
            }
        }
        out
    }
}

/// Uniform sample from the simplex via normalized exponential draws.
pub fn sample_belief<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Belief {
    let draws: Vec<f64> = (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            -(1.0 - u).ln()
        })
        .collect();
    if draws.iter().all(|&d| d == 0.0) {
        return Belief::uniform(n);
    }
    Belief::renormalized(draws)
}

fn vertices(n: usize) -> Vec<Belief> {
    (0..n).map(|s| Belief::vertex(n, s)).collect()
}

fn push_unique(points: &mut Vec<Belief>, p: Belief) {
    if !points.iter().any(|q| q.approx_eq(&p)) {
        points.push(p);
    }
}

impl GridScheme {
    /// Builds a grid from arbitrary points, prepending any missing vertices
    /// and dropping duplicates.
    pub fn from_points(num_states: usize, extra: Vec<Belief>, pattern: impl Into<String>) -> Result<Self> {
        if num_states == 0 {
            return Err(Error::InvalidArgument("grid needs at least one state".into()));
        }
        let mut points = vertices(num_states);
        for p in extra {
            if p.len() != num_states {
                return Err(Error::InvalidArgument(format!(
                    "grid point has {} entries, expected {num_states}",
                    p.len()
                )));
            }
            push_unique(&mut points, p);
        }
        Ok(Self { points, pattern: pattern.into(), seed: None })
    }

    /// Vertices plus `k` evenly spaced interior points on every edge (`k-E`).
    pub fn edge(num_states: usize, k: usize) -> Self {
        let mut points = vertices(num_states);
        for s in 0..num_states {
            for t in s + 1..num_states {
                for j in 1..=k {
                    let f = j as f64 / (k + 1) as f64;
                    let mut v = vec![0.0; num_states];
                    v[s] = 1.0 - f;
                    v[t] = f;
                    push_unique(&mut points, Belief::renormalized(v));
                }
            }
        }
        Self { points, pattern: format!("{k}-E"), seed: None }
    }

    /// Vertices plus `n` uniformly sampled beliefs (`n-R`).
    pub fn random(num_states: usize, n: usize, seed: u64) -> Self {
        let mut rng = rng::substream(seed, "grid-random", 0);
        let mut points = vertices(num_states);
        for _ in 0..n {
            push_unique(&mut points, sample_belief(num_states, &mut rng));
        }
        Self { points, pattern: format!("{n}-R"), seed: Some(seed) }
    }

    /// Deduplicated union; patterns are joined with `+`.
    pub fn combine(&self, other: &GridScheme) -> Result<Self> {
        if self.num_states() != other.num_states() {
            return Err(Error::InvalidArgument("grids have different dimensions".into()));
        }
        let mut points = self.points.clone();
        for p in &other.points {
            push_unique(&mut points, p.clone());
        }
        Ok(Self {
            points,
            pattern: format!("{}+{}", self.pattern, other.pattern),
            seed: self.seed.or(other.seed),
        })
    }

    /// Parses `<k>-E`, `<n>-R` and `+`-joined combinations such as `2-E+10-R`.
    /// The `i`-th random component draws from the sub-stream `(seed, "grid", i)`.
    pub fn from_pattern(pattern: &str, num_states: usize, seed: u64) -> Result<Self> {
        let mut grid: Option<GridScheme> = None;
        let mut random_parts = 0u64;
        for part in pattern.split('+') {
            let part = part.trim();
            let (count, kind) = part
                .split_once('-')
                .ok_or_else(|| Error::InvalidArgument(format!("bad grid component '{part}'")))?;
            let count: usize = count
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad grid count in '{part}'")))?;
            let g = match kind {
                "E" | "e" => GridScheme::edge(num_states, count),
                "R" | "r" => {
                    let sub = rng::derive_seed(seed, "grid", random_parts);
                    random_parts += 1;
                    let mut g = GridScheme::random(num_states, count, sub);
                    g.seed = Some(seed);
                    g
                }
                _ => {
                    return Err(Error::InvalidArgument(format!(
                        "unknown grid kind in '{part}' (expected E or R)"
                    )))
                }
            };
            grid = Some(match grid {
                None => g,
                Some(acc) => acc.combine(&g)?,
            });
        }
        grid.ok_or_else(|| Error::InvalidArgument("empty grid pattern".into()))
    }

    pub fn points(&self) -> &[Belief] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn num_states(&self) -> usize {
        self.points[0].len()
    }

    pub fn pattern(&self) -> &str {
        &self.pattern
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Convex weights of `x` over the grid.
    pub fn convex_coords(&self, x: &Belief) -> Result<ConvexWeights> {
        let n = self.num_states();
        if x.len() != n {
            return Err(Error::InvalidArgument("belief dimension mismatch".into()));
        }
        if let Some(s) = x.as_vertex() {
            return Ok(ConvexWeights { support: vec![(s, 1.0)] });
        }
        let cols = self.points.len();
        let mut a = vec![0.0; n * cols];
        for (i, p) in self.points.iter().enumerate() {
            for s in 0..n {
                a[s * cols + i] = p[s];
            }
        }
        let lp = DenseLp {
            rows: n,
            cols,
            a,
            b: x.to_vec(),
            c: self.points.iter().map(|p| x.l1_distance(p)).collect(),
        };
        let basis: Vec<usize> = (0..n).collect();
        let sol = lp.minimize_from_identity(&basis).map_err(|e| match e {
            Error::Infeasible(m) => Error::Infeasible(format!("convex representation: {m}")),
            other => other,
        })?;
        let mut support: Vec<(usize, f64)> = sol
            .x
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > WEIGHT_FLOOR)
            .map(|(i, &w)| (i, w))
            .collect();
        let total: f64 = support.iter().map(|(_, w)| w).sum();
        if total <= 0.0 {
            return Err(Error::Infeasible("convex representation lost all mass".into()));
        }
        for (_, w) in support.iter_mut() {
            *w /= total;
        }
        Ok(ConvexWeights { support })
    }

    /// Sampled estimate of the discretization fineness: the largest L1
    /// distance from a sampled belief to one of its supporting grid points.
    /// This under-estimates the true worst case over the simplex.
    pub fn estimate_epsilon(&self, samples: usize, seed: u64) -> Result<f64> {
        let mut rng = rng::substream(seed, "epsilon", 0);
        let beliefs: Vec<Belief> = (0..samples)
            .map(|_| sample_belief(self.num_states(), &mut rng))
            .collect();
        self.epsilon_on(&beliefs)
    }

    /// Same estimate over caller-supplied beliefs.
    pub fn epsilon_on(&self, beliefs: &[Belief]) -> Result<f64> {
        let mut eps: f64 = 0.0;
        for x in beliefs {
            let w = self.convex_coords(x)?;
            eps = eps.max(w.radius(self, x));
        }
        Ok(eps)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
