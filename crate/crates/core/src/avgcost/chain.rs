//! Recurrent-class structure and the Cesàro limit matrix of a finite chain.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{to_matrix, Solver};

/// Rows must sum to one within this.
const STOCHASTIC_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Serialize)]
pub struct ChainDecomposition {
    /// Recurrent classes, each sorted, ordered by smallest member.
    pub classes: Vec<Vec<usize>>,
    pub transient: Vec<usize>,
    /// Limiting matrix `P* = lim (1/N) Σ P^k`.
    pub stationary: Vec<Vec<f64>>,
}

impl ChainDecomposition {
    /// Index of the recurrent class containing `s`, if any.
    pub fn class_of(&self, s: usize) -> Option<usize> {
        self.classes.iter().position(|c| c.binary_search(&s).is_ok())
    }
}

/// Strongly connected components of the graph `i → j` iff `p[i][j] > 0`,
/// by an iterative Tarjan traversal.
fn strong_components(p: &[Vec<f64>]) -> Vec<Vec<usize>> {
    let n = p.len();
    let succ: Vec<Vec<usize>> = p
        .iter()
        .map(|r| (0..n).filter(|&j| r[j] > 0.0).collect())
        .collect();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut comps = Vec::new();
    let mut next = 0;
    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        let mut work: Vec<(usize, usize)> = vec![(root, 0)];
        index[root] = next;
        low[root] = next;
        next += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&mut (v, ref mut k)) = work.last_mut() {
            if *k < succ[v].len() {
                let w = succ[v][*k];
                *k += 1;
                if index[w] == usize::MAX {
                    index[w] = next;
                    low[w] = next;
                    next += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    work.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            work.pop();
            if let Some(&(parent, _)) = work.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                let mut comp = Vec::new();
                loop {
                    let w = stack.pop().expect("tarjan stack");
                    on_stack[w] = false;
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                comp.sort_unstable();
                comps.push(comp);
            }
        }
    }
    comps
}

/// Stationary law of an irreducible block: `π(I − P_C) = 0`, `Σπ = 1`.
fn stationary_law(p: &[Vec<f64>], class: &[usize]) -> Result<Vec<f64>> {
    let m = class.len();
    if m == 1 {
        return Ok(vec![1.0]);
    }
    // Transposed system with the last equation replaced by normalization.
    let mut a = vec![vec![0.0; m]; m];
    for (r, row) in a.iter_mut().enumerate().take(m - 1) {
        for (c, &j) in class.iter().enumerate() {
            let delta = if r == c { 1.0 } else { 0.0 };
            row[c] = delta - p[j][class[r]];
        }
    }
    a[m - 1] = vec![1.0; m];
    let mut b = vec![0.0; m];
    b[m - 1] = 1.0;
    let pi = Solver::new(to_matrix(&a), "stationary distribution")?.solve(&b)?;
    let pi: Vec<f64> = pi.into_iter().map(|v| v.max(0.0)).collect();
    let sum: f64 = pi.iter().sum();
    Ok(pi.into_iter().map(|v| v / sum).collect())
}

pub fn chain_decompose(p: &[Vec<f64>]) -> Result<ChainDecomposition> {
    let n = p.len();
    for (i, r) in p.iter().enumerate() {
        let sum: f64 = r.iter().sum();
        if r.len() != n || r.iter().any(|v| *v < 0.0) || (sum - 1.0).abs() > STOCHASTIC_TOL {
            return Err(Error::InvalidArgument(format!(
                "row {i} of the chain is not a probability vector"
            )));
        }
    }
    let comps = strong_components(p);
    let mut comp_of = vec![0; n];
    for (k, c) in comps.iter().enumerate() {
        for &s in c {
            comp_of[s] = k;
        }
    }
    let mut classes: Vec<Vec<usize>> = comps
        .iter()
        .enumerate()
        .filter(|(k, c)| {
            c.iter()
                .all(|&s| (0..n).all(|j| p[s][j] == 0.0 || comp_of[j] == *k))
        })
        .map(|(_, c)| c.clone())
        .collect();
    classes.sort_by_key(|c| c[0]);

    let mut class_idx = vec![usize::MAX; n];
    for (k, c) in classes.iter().enumerate() {
        for &s in c {
            class_idx[s] = k;
        }
    }
    let transient: Vec<usize> = (0..n).filter(|&s| class_idx[s] == usize::MAX).collect();

    let mut stationary = vec![vec![0.0; n]; n];
    let mut laws = Vec::with_capacity(classes.len());
    for c in &classes {
        let pi = stationary_law(p, c)?;
        for &s in c {
            for (&j, &v) in c.iter().zip(&pi) {
                stationary[s][j] = v;
            }
        }
        laws.push(pi);
    }

    if !transient.is_empty() {
        // Absorption probabilities B = (I − P_TT)^{-1} R.
        let t = transient.len();
        let a: Vec<Vec<f64>> = transient
            .iter()
            .enumerate()
            .map(|(r, &i)| {
                transient
                    .iter()
                    .enumerate()
                    .map(|(c, &j)| if r == c { 1.0 } else { 0.0 } - p[i][j])
                    .collect()
            })
            .collect();
        let solver = Solver::new(to_matrix(&a), "absorption probabilities")?;
        for (k, c) in classes.iter().enumerate() {
            let rhs: Vec<f64> = transient
                .iter()
                .map(|&i| c.iter().map(|&j| p[i][j]).sum())
                .collect();
            let absorb = solver.solve(&rhs)?;
            for r in 0..t {
                let w = absorb[r].max(0.0);
                for (&j, &v) in c.iter().zip(&laws[k]) {
                    stationary[transient[r]][j] += w * v;
                }
            }
        }
        for &i in &transient {
            let sum: f64 = stationary[i].iter().sum();
            for v in stationary[i].iter_mut() {
                *v /= sum;
            }
        }
    }
    Ok(ChainDecomposition { classes, transient, stationary })
}
