//! Dense tableau simplex method for small equality-form linear programs.
//!
//! Solves `min c'x  s.t.  A x = b, x ≥ 0` with Bland's smallest-index rule for
//! both the entering and the leaving variable, so the pivot sequence (and the
//! returned basic solution) is a deterministic function of the input.

use crate::error::{Error, Result};

const PIVOT_EPS: f64 = 1e-11;
const COST_EPS: f64 = 1e-12;
const MAX_PIVOTS: usize = 100_000;

/// `min c'x` subject to `A x = b`, `x ≥ 0`; `a` is row-major `rows × cols`.
#[derive(Debug, Clone)]
pub struct DenseLp {
    pub rows: usize,
    pub cols: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Basic column per remaining constraint row.
    pub basis: Vec<usize>,
    pub pivots: usize,
}

struct Tableau {
    m: usize,
    width: usize,
    // m constraint rows then one reduced-cost row; last column is the rhs.
    t: Vec<f64>,
    basis: Vec<usize>,
    pivots: usize,
}

impl Tableau {
    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * self.width + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.t[i * self.width + self.width - 1]
    }

    fn pivot(&mut self, r: usize, col: usize) {
        let w = self.width;
        let p = self.t[r * w + col];
        for j in 0..w {
            self.t[r * w + j] /= p;
        }
        self.t[r * w + col] = 1.0;
        for i in 0..=self.m {
            if i == r {
                continue;
            }
            let f = self.t[i * w + col];
            if f == 0.0 {
                continue;
            }
            for j in 0..w {
                let v = self.t[r * w + j];
                if v != 0.0 {
                    self.t[i * w + j] -= f * v;
                }
            }
            self.t[i * w + col] = 0.0;
        }
        self.basis[r] = col;
        self.pivots += 1;
    }

    /// Runs Bland pivots over columns `< active` until optimal.
    fn optimize(&mut self, active: usize) -> Result<()> {
        loop {
            if self.pivots > MAX_PIVOTS {
                return Err(Error::NoConvergence {
                    iterations: self.pivots,
                    detail: "simplex pivot limit".into(),
                });
            }
            let obj = self.m;
            let Some(col) = (0..active).find(|&j| self.at(obj, j) < -COST_EPS) else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.m {
                let a = self.at(i, col);
                if a <= PIVOT_EPS {
                    continue;
                }
                let ratio = self.rhs(i).max(0.0) / a;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((k, best)) => {
                        let tie = (ratio - best).abs() <= 1e-12 * (1.0 + best.abs());
                        if ratio < best && !tie || tie && self.basis[i] < self.basis[k] {
                            Some((i, ratio))
                        } else {
                            Some((k, best))
                        }
                    }
                };
            }
            match leave {
                Some((r, _)) => self.pivot(r, col),
                None => return Err(Error::Infeasible("objective unbounded below".into())),
            }
        }
    }

    fn set_objective(&mut self, cost: &[f64]) {
        let w = self.width;
        let obj = self.m;
        for j in 0..w {
            self.t[obj * w + j] = 0.0;
        }
        for (j, &cj) in cost.iter().enumerate() {
            self.t[obj * w + j] = cj;
        }
        for i in 0..self.m {
            let cb = cost.get(self.basis[i]).copied().unwrap_or(0.0);
            if cb == 0.0 {
                continue;
            }
            for j in 0..w {
                self.t[obj * w + j] -= cb * self.t[i * w + j];
            }
        }
    }
}

impl DenseLp {
    fn check(&self) -> Result<()> {
        if self.a.len() != self.rows * self.cols
            || self.b.len() != self.rows
            || self.c.len() != self.cols
        {
            return Err(Error::InvalidArgument("LP dimensions are inconsistent".into()));
        }
        Ok(())
    }

    fn extract(&self, tab: &Tableau) -> LpSolution {
        let mut x = vec![0.0; self.cols];
        for (i, &j) in tab.basis.iter().enumerate() {
            if j < self.cols {
                x[j] = tab.rhs(i).max(0.0);
            }
        }
        let objective = x.iter().zip(&self.c).map(|(a, b)| a * b).sum();
        LpSolution {
            x,
            objective,
            basis: tab.basis.clone(),
            pivots: tab.pivots,
        }
    }

    /// Starts from a caller-supplied basis whose columns form the identity
    /// matrix (row `i` owned by `basis[i]`), skipping phase one. Requires `b ≥ 0`.
    pub fn minimize_from_identity(&self, basis: &[usize]) -> Result<LpSolution> {
        self.check()?;
        if basis.len() != self.rows {
            return Err(Error::InvalidArgument("basis size must equal row count".into()));
        }
        for (i, &j) in basis.iter().enumerate() {
            if j >= self.cols || self.b[i] < 0.0 {
                return Err(Error::InvalidArgument("basis is not a feasible identity".into()));
            }
            for r in 0..self.rows {
                let want = if r == i { 1.0 } else { 0.0 };
                if self.a[r * self.cols + j] != want {
                    return Err(Error::InvalidArgument(format!(
                        "column {j} is not unit vector {i}"
                    )));
                }
            }
        }
        let width = self.cols + 1;
        let mut t = vec![0.0; (self.rows + 1) * width];
        for i in 0..self.rows {
            t[i * width..i * width + self.cols]
                .copy_from_slice(&self.a[i * self.cols..(i + 1) * self.cols]);
            t[i * width + self.cols] = self.b[i];
        }
        let mut tab = Tableau {
            m: self.rows,
            width,
            t,
            basis: basis.to_vec(),
            pivots: 0,
        };
        tab.set_objective(&self.c);
        tab.optimize(self.cols)?;
        Ok(self.extract(&tab))
    }

    /// Two-phase simplex from scratch.
    pub fn minimize(&self) -> Result<LpSolution> {
        self.check()?;
        let (m, n) = (self.rows, self.cols);
        let width = n + m + 1;
        let mut t = vec![0.0; (m + 1) * width];
        for i in 0..m {
            let flip = if self.b[i] < 0.0 { -1.0 } else { 1.0 };
            for j in 0..n {
                t[i * width + j] = flip * self.a[i * n + j];
            }
            t[i * width + n + i] = 1.0;
            t[i * width + width - 1] = flip * self.b[i];
        }
        let mut tab = Tableau {
            m,
            width,
            t,
            basis: (n..n + m).collect(),
            pivots: 0,
        };
        let phase1: Vec<f64> = (0..n + m).map(|j| if j >= n { 1.0 } else { 0.0 }).collect();
        tab.set_objective(&phase1);
        tab.optimize(n + m)?;
        let infeas: f64 = (0..m)
            .filter(|&i| tab.basis[i] >= n)
            .map(|i| tab.rhs(i).abs())
            .sum();
        let scale = 1.0 + self.b.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if infeas > 1e-9 * scale {
            return Err(Error::Infeasible(format!(
                "phase one ended with artificial mass {infeas:e}"
            )));
        }
        // Drive zero-level artificials out of the basis; drop redundant rows.
        let mut i = 0;
        while i < tab.m {
            if tab.basis[i] >= n {
                if let Some(j) = (0..n).find(|&j| tab.at(i, j).abs() > PIVOT_EPS) {
                    tab.pivot(i, j);
                } else {
                    let w = tab.width;
                    tab.t.drain(i * w..(i + 1) * w);
                    tab.basis.remove(i);
                    tab.m -= 1;
                    continue;
                }
            }
            i += 1;
        }
        tab.set_objective(&self.c);
        tab.optimize(n)?;
        Ok(self.extract(&tab))
    }
}
