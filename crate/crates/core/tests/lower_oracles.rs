mod common;

use common::*;
use gridpomdp::discount::value_iteration;
use gridpomdp::grids::GridScheme;
use gridpomdp::lower::{exact_nstage, ModifiedMdp, Scheme};
use gridpomdp::mdp::FiniteMdp;
use gridpomdp::{Belief, PomdpModel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const SCHEMES: [Scheme; 2] = [Scheme::D1, Scheme::D2];

/// Bracketing linear interpolation on the 2-state edge grid with `k` interior
/// points, keyed by the second coordinate.
fn bracket_weights(grid: &GridScheme, x: &[f64], k: usize) -> Vec<(usize, f64)> {
    let h = 1.0 / (k + 1) as f64;
    let find = |p: f64| {
        grid.points()
            .iter()
            .position(|g| (g[1] - p).abs() < 1e-12)
            .expect("grid point present")
    };
    let pos = x[1] / h;
    let lo = pos.floor().min(k as f64);
    let t = pos - lo;
    if t < 1e-12 {
        return vec![(find(lo * h), 1.0)];
    }
    vec![(find(lo * h), 1.0 - t), (find((lo + 1.0) * h), t)]
}

fn dense(row: &[(usize, f64)], n: usize) -> Vec<f64> {
    let mut d = vec![0.0; n];
    for &(i, p) in row {
        d[i] += p;
    }
    d
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn modified_nstage_cost_never_exceeds_belief_tree_value() {
    for seed in 0..8u64 {
        let ns = 2 + (seed % 2) as usize;
        let m = random_model(100 + seed, ns, 2, 2);
        let tb = tables(&m);
        let x0 = Belief::new(random_belief(&mut ChaCha8Rng::seed_from_u64(seed), ns)).unwrap();
        for k in 0..3 {
            let grid = GridScheme::edge(ns, k);
            for scheme in SCHEMES {
                let mdp = ModifiedMdp::build(&m, &grid, scheme).unwrap();
                for alpha in [0.9, 1.0] {
                    for n in 0..=5 {
                        let (approx, exact) = mdp.nstage_lower_bound_check(&m, n, &x0, alpha).unwrap();
                        let oracle = tree_value(&tb, &x0, n, alpha);
                        assert!((exact - oracle).abs() < 1e-9, "tree {exact} vs {oracle}");
                        assert!(approx <= oracle + 1e-9, "seed {seed} {scheme} {k}-E N={n}: {approx} > {oracle}");
                    }
                }
            }
        }
    }
}

#[test]
fn short_horizons_coincide() {
    let m = fixture("chain3");
    let x0 = m.initial_belief();
    let mdp = ModifiedMdp::build(&m, &GridScheme::edge(3, 1), Scheme::D2).unwrap();
    assert_eq!(mdp.nstage_lower_bound_check(&m, 0, &x0, 1.0).unwrap(), (0.0, 0.0));
    let (a, e) = mdp.nstage_lower_bound_check(&m, 1, &x0, 1.0).unwrap();
    let myopic = (0..2).map(|u| m.stage_cost(&x0, u)).fold(f64::INFINITY, f64::min);
    assert!((a - myopic).abs() < 1e-12 && (e - myopic).abs() < 1e-12);
    assert!((exact_nstage(&m, &x0, 3, 0.9) - tree_value(&tables(&m), &x0, 3, 0.9)).abs() < 1e-12);
}

#[test]
fn tree_guard_rejects_large_horizons() {
    let m = fixture("ring3");
    let mdp = ModifiedMdp::build(&m, &GridScheme::edge(3, 0), Scheme::D1).unwrap();
    assert!(mdp.nstage_lower_bound_check(&m, 12, &m.initial_belief(), 1.0).is_err());
}

#[test]
fn d1_rows_match_bracketing_enumeration() {
    let m = fixture("two_state");
    let tb = tables(&m);
    for k in 0..5 {
        let grid = GridScheme::edge(2, k);
        let mdp = ModifiedMdp::build(&m, &grid, Scheme::D1).unwrap();
        assert_eq!(mdp.support(), grid.points());
        for (j, xj) in grid.points().iter().enumerate() {
            for u in 0..2 {
                let mut want = vec![0.0; grid.len()];
                for (_, pz, y) in bayes(&tb, xj, u) {
                    for (i, w) in bracket_weights(&grid, &y, k) {
                        want[i] += pz * w;
                    }
                }
                let got = dense(mdp.row(j, u), grid.len());
                assert!(max_diff(&got, &want) < 1e-12, "{k}-E row ({j},{u})");
                assert_eq!(mdp.cost(j, u), m.stage_cost(xj, u));
            }
        }
    }
}

#[test]
fn d2_vertex_rows_match_enumeration() {
    for name in ["two_state", "chain3"] {
        let m = fixture(name);
        let tb = tables(&m);
        let ns = m.num_states();
        let grid = GridScheme::edge(ns, 0);
        let mdp = ModifiedMdp::build(&m, &grid, Scheme::D2).unwrap();
        // Deduplicated posteriors in (i, u, z) order, with their generators.
        let mut support: Vec<Vec<f64>> = Vec::new();
        let mut target = vec![vec![Vec::new(); m.num_actions()]; ns];
        for (i, xi) in grid.points().iter().enumerate() {
            for u in 0..m.num_actions() {
                for (_, pz, y) in bayes(&tb, xi, u) {
                    let c = match support.iter().position(|s| max_diff(s, &y) <= 1e-9) {
                        Some(c) => c,
                        None => {
                            support.push(y);
                            support.len() - 1
                        }
                    };
                    target[i][u].push((c, pz));
                }
            }
        }
        assert_eq!(mdp.len(), support.len(), "{name}");
        for (c, y) in support.iter().enumerate() {
            assert!(mdp.support()[c].linf_distance(y) < 1e-12);
            for u in 0..m.num_actions() {
                // Vertex weights of y are its own coordinates.
                let mut want = vec![0.0; support.len()];
                for (i, yi) in y.iter().enumerate() {
                    for &(t, p) in &target[i][u] {
                        want[t] += yi * p;
                    }
                }
                assert!(max_diff(&dense(mdp.row(c, u), support.len()), &want) < 1e-12);
                assert!((mdp.cost(c, u) - stage(&tb, y, u)).abs() < 1e-15);
            }
        }
    }
}

#[test]
fn vertex_d1_is_the_underlying_mdp() {
    let m = fixture("chain3");
    let mdp = ModifiedMdp::build(&m, &GridScheme::edge(3, 0), Scheme::D1).unwrap();
    for s in 0..3 {
        for u in 0..2 {
            assert!(max_diff(&dense(mdp.row(s, u), 3), m.transition_row(u, s)) < 1e-15);
        }
    }
}

#[test]
fn fully_observed_vertex_d2_is_the_underlying_mdp() {
    let base = random_model(7, 3, 2, 2);
    let (t, g) = base.underlying_mdp();
    let eye: Vec<Vec<f64>> = (0..3).map(|s| (0..3).map(|z| f64::from(u8::from(s == z))).collect()).collect();
    let m = PomdpModel::new(t.clone(), vec![eye.clone(), eye], g, 0.9).unwrap();
    let mdp = ModifiedMdp::build(&m, &GridScheme::edge(3, 0), Scheme::D2).unwrap();
    assert_eq!(mdp.len(), 3);
    for c in 0..3 {
        let s = mdp.support()[c].as_vertex().unwrap();
        for u in 0..2 {
            let mut want = vec![0.0; 3];
            for (k, p) in dense(mdp.row(c, u), 3).into_iter().enumerate() {
                want[mdp.support()[k].as_vertex().unwrap()] += p;
            }
            assert!(max_diff(&want, &t[u][s]) < 1e-15);
        }
    }
}

#[test]
fn extension_matches_direct_formula() {
    let m = fixture("two_state");
    let tb = tables(&m);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for k in [0usize, 1, 3] {
        let grid = GridScheme::edge(2, k);
        for scheme in SCHEMES {
            let mdp = ModifiedMdp::build(&m, &grid, scheme).unwrap();
            let values: Vec<f64> = (0..mdp.len()).map(|c| (c as f64 * 0.37).sin() * 3.0).collect();
            for _ in 0..50 {
                let x = random_belief(&mut rng, 2);
                let q: Vec<f64> = (0..2)
                    .map(|u| {
                        let cont: f64 = match scheme {
                            Scheme::D1 => bayes(&tb, &x, u)
                                .iter()
                                .map(|(_, pz, y)| {
                                    pz * bracket_weights(&grid, y, k)
                                        .iter()
                                        .map(|&(i, w)| w * values[i])
                                        .sum::<f64>()
                                })
                                .sum(),
                            Scheme::D2 => bracket_weights(&grid, &x, k)
                                .iter()
                                .map(|&(i, w)| {
                                    w * bayes(&tb, &grid.points()[i], u)
                                        .iter()
                                        .map(|(_, pz, y)| {
                                            let c = mdp
                                                .support()
                                                .iter()
                                                .position(|s| s.linf_distance(y) <= 1e-9)
                                                .unwrap();
                                            pz * values[c]
                                        })
                                        .sum::<f64>()
                                })
                                .sum(),
                        };
                        stage(&tb, &x, u) + 0.8 * cont
                    })
                    .collect();
                let want = q[0].min(q[1]);
                let b = Belief::new(x.clone()).unwrap();
                let got = mdp.evaluate_extension(&m, &values, &b, 0.8).unwrap();
                assert!((got.value - want).abs() < 1e-12, "{scheme} {k}-E at {x:?}");
                let myopic = mdp.evaluate_extension(&m, &values, &b, 0.0).unwrap().value;
                assert!((myopic - stage(&tb, &x, 0).min(stage(&tb, &x, 1))).abs() < 1e-15);
            }
        }
    }
}

#[test]
fn extension_reproduces_fixed_point_on_support() {
    let m = fixture("chain3");
    let mdp = ModifiedMdp::build(&m, &GridScheme::edge(3, 1), Scheme::D2).unwrap();
    let sol = value_iteration(&mdp, 0.9, 1e-11).unwrap();
    for (c, y) in mdp.support().iter().enumerate() {
        let v = mdp.evaluate_extension(&m, &sol.values, y, 0.9).unwrap().value;
        assert!((v - sol.values[c]).abs() < 1e-9);
    }
}

#[test]
fn vertex_d2_dominates_vertex_d1() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for name in FIXTURES {
        let m = fixture(name);
        let ns = m.num_states();
        let grid = GridScheme::edge(ns, 0);
        let d1 = ModifiedMdp::build(&m, &grid, Scheme::D1).unwrap();
        let d2 = ModifiedMdp::build(&m, &grid, Scheme::D2).unwrap();
        let v1 = value_iteration(&d1, 0.95, 1e-10).unwrap();
        let v2 = value_iteration(&d2, 0.95, 1e-10).unwrap();
        for _ in 0..200 {
            let x = Belief::new(random_belief(&mut rng, ns)).unwrap();
            let a = d1.evaluate_extension(&m, &v1.values, &x, 0.95).unwrap().value;
            let b = d2.evaluate_extension(&m, &v2.values, &x, 0.95).unwrap().value;
            assert!(b >= a - 1e-9, "{name}: D2 {b} < D1 {a}");
        }
    }
}

#[test]
fn support_cap_and_stochastic_rows() {
    for name in FIXTURES {
        let m = fixture(name);
        for pattern in ["0-E", "1-E", "2-E+5-R"] {
            let grid = GridScheme::from_pattern(pattern, m.num_states(), 3).unwrap();
            for scheme in SCHEMES {
                let mdp = ModifiedMdp::build(&m, &grid, scheme).unwrap();
                if scheme == Scheme::D2 {
                    assert!(mdp.len() <= grid.len() * m.num_actions() * m.num_observations());
                    assert_eq!(mdp.provenance().len(), mdp.len());
                }
                for c in 0..mdp.len() {
                    for u in 0..m.num_actions() {
                        let row = mdp.row(c, u);
                        assert!(row.iter().all(|&(_, p)| p > 0.0));
                        assert!((row.iter().map(|r| r.1).sum::<f64>() - 1.0).abs() <= 1e-8);
                        assert_eq!(mdp.cost(c, u), m.stage_cost(&mdp.support()[c], u));
                    }
                }
            }
        }
    }
}

#[test]
fn modified_mdp_is_deterministic() {
    let m = fixture("ring3");
    let grid = GridScheme::from_pattern("1-E+4-R", 3, 17).unwrap();
    let a = ModifiedMdp::build(&m, &grid, Scheme::D2).unwrap().to_json().unwrap();
    let b = ModifiedMdp::build(&m, &grid, Scheme::D2).unwrap().to_json().unwrap();
    assert_eq!(a, b);
}
