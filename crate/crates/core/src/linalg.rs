//! Dense LU solves with one step of iterative refinement.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Pivots smaller than this fraction of the largest pivot mark the matrix singular.
const SINGULAR_RATIO: f64 = 1e-13;

pub(crate) fn to_matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    DMatrix::from_fn(n, m, |i, j| rows[i][j])
}

/// Factorization of a square matrix, reusable across right-hand sides.
pub(crate) struct Solver {
    a: DMatrix<f64>,
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl Solver {
    pub(crate) fn new(a: DMatrix<f64>, what: &str) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::InvalidArgument(format!("{what}: matrix is not square")));
        }
        let lu = a.clone().lu();
        let u = lu.u();
        let diag: Vec<f64> = u.diagonal().iter().map(|v| v.abs()).collect();
        let max = diag.iter().copied().fold(0.0, f64::max);
        let min = diag.iter().copied().fold(f64::INFINITY, f64::min);
        if a.nrows() > 0 && (max == 0.0 || min <= SINGULAR_RATIO * max || !min.is_finite()) {
            return Err(Error::Singular(format!(
                "{what}: smallest pivot {min:e} against largest {max:e}"
            )));
        }
        Ok(Self { a, lu })
    }

    pub(crate) fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let rhs = DVector::from_column_slice(b);
        let mut x = self
            .lu
            .solve(&rhs)
            .ok_or_else(|| Error::Singular("LU solve failed".into()))?;
        let r = &rhs - &self.a * &x;
        if let Some(dx) = self.lu.solve(&r) {
            x += dx;
        }
        Ok(x.iter().copied().collect())
    }
}
