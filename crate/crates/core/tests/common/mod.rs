//! Fixtures and independent reference computations shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use gridpomdp::model::cassandra::read_pomdp_file;
use gridpomdp::PomdpModel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FIXTURES: [&str; 4] = ["two_state", "chain3", "multichain2", "ring3"];

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(format!("../../docs/fixtures/{name}.pomdp"))
}

pub fn fixture(name: &str) -> PomdpModel {
    read_pomdp_file(fixture_path(name)).unwrap()
}

/// Dense tables of a model: `t[u][s][s']`, `o[u][s'][z]`, `g[u][s]`.
pub struct Tables {
    pub t: Vec<Vec<Vec<f64>>>,
    pub o: Vec<Vec<Vec<f64>>>,
    pub g: Vec<Vec<f64>>,
}

pub fn tables(m: &PomdpModel) -> Tables {
    let (ns, na, no) = (m.num_states(), m.num_actions(), m.num_observations());
    Tables {
        t: (0..na)
            .map(|u| (0..ns).map(|s| (0..ns).map(|t| m.transition(u, s, t)).collect()).collect())
            .collect(),
        o: (0..na)
            .map(|u| (0..ns).map(|s| (0..no).map(|z| m.observation(u, s, z)).collect()).collect())
            .collect(),
        g: (0..na).map(|u| (0..ns).map(|s| m.cost(u, s)).collect()).collect(),
    }
}

/// Joint `P(s', z | x, u)` by enumeration over `(s, s')`.
pub fn joint(tb: &Tables, x: &[f64], u: usize) -> Vec<Vec<f64>> {
    let ns = x.len();
    let no = tb.o[u][0].len();
    let mut j = vec![vec![0.0; no]; ns];
    for s in 0..ns {
        for t in 0..ns {
            for z in 0..no {
                j[t][z] += x[s] * tb.t[u][s][t] * tb.o[u][t][z];
            }
        }
    }
    j
}

/// `(p(z|x,u), posterior)` for every observation with positive probability.
pub fn bayes(tb: &Tables, x: &[f64], u: usize) -> Vec<(usize, f64, Vec<f64>)> {
    let j = joint(tb, x, u);
    let no = j[0].len();
    (0..no)
        .filter_map(|z| {
            let pz: f64 = j.iter().map(|r| r[z]).sum();
            (pz > 1e-12).then(|| (z, pz, j.iter().map(|r| r[z] / pz).collect()))
        })
        .collect()
}

pub fn stage(tb: &Tables, x: &[f64], u: usize) -> f64 {
    x.iter().zip(&tb.g[u]).map(|(a, b)| a * b).sum()
}

/// `(T^N 0)(x)` over the full belief tree.
pub fn tree_value(tb: &Tables, x: &[f64], n: usize, alpha: f64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    (0..tb.g.len())
        .map(|u| {
            stage(tb, x, u)
                + alpha
                    * bayes(tb, x, u)
                        .iter()
                        .map(|(_, p, y)| p * tree_value(tb, y, n - 1, alpha))
                        .sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        assert!(a[p][c].abs() > 1e-14, "singular reference system");
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            if f != 0.0 {
                for k in c..n {
                    a[r][k] -= f * a[c][k];
                }
                b[r] -= f * b[c];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

pub fn random_stochastic<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 0.05).collect();
    let s: f64 = v.iter().sum();
    v.into_iter().map(|p| p / s).collect()
}

/// Random model with the given dimensions.
pub fn random_model(seed: u64, ns: usize, na: usize, no: usize) -> PomdpModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = (0..na).map(|_| (0..ns).map(|_| random_stochastic(&mut rng, ns)).collect()).collect();
    let o = (0..na).map(|_| (0..ns).map(|_| random_stochastic(&mut rng, no)).collect()).collect();
    let g = (0..na).map(|_| (0..ns).map(|_| rng.random_range(0.0..3.0)).collect()).collect();
    PomdpModel::new(t, o, g, 0.95).unwrap()
}

pub fn random_belief<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    random_stochastic(rng, n)
}

/// Relative value iteration with the aperiodicity transform `h ← ½h + ½Th`
/// on a unichain MDP; returns the optimal gain.
pub fn relative_vi(t: &[Vec<Vec<f64>>], g: &[Vec<f64>], iters: usize) -> f64 {
    let (na, ns) = (t.len(), t[0].len());
    let mut h = vec![0.0; ns];
    let mut gain = 0.0;
    for _ in 0..iters {
        let next: Vec<f64> = (0..ns)
            .map(|s| {
                (0..na)
                    .map(|u| {
                        g[u][s] + 0.5 * h[s] + 0.5 * (0..ns).map(|k| t[u][s][k] * h[k]).sum::<f64>()
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        gain = next[0];
        h = next.iter().map(|v| v - gain).collect();
    }
    gain
}
