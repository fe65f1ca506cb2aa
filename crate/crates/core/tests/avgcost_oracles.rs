mod common;

use common::*;
use gridpomdp::avgcost::{
    chain_decompose, nested_residuals, extend_average_solution, policy_evaluation_sensitive,
    solve_multichain, RESIDUAL_TOL,
};
use gridpomdp::grids::GridScheme;
use gridpomdp::lower::{ModifiedMdp, Scheme};
use gridpomdp::mdp::{FiniteMdp, TabularMdp};
use gridpomdp::Belief;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    (0..n)
        .map(|i| (0..n).map(|j| (0..n).map(|k| a[i][k] * b[k][j]).sum()).collect())
        .collect()
}

/// Random MDP with sparse rows, so that policies induce varied chain structures.
fn sparse_mdp(rng: &mut ChaCha8Rng, ns: usize, na: usize) -> (Vec<Vec<Vec<f64>>>, Vec<Vec<f64>>) {
    let t = (0..ns)
        .map(|_| {
            (0..na)
                .map(|_| {
                    let mut row = vec![0.0; ns];
                    for _ in 0..rng.random_range(1..=2) {
                        row[rng.random_range(0..ns)] += rng.random_range(0.2..1.0);
                    }
                    let s: f64 = row.iter().sum();
                    row.iter().map(|p| p / s).collect()
                })
                .collect()
        })
        .collect();
    // Integer-valued costs make ties between policies common.
    let g = (0..ns).map(|_| (0..na).map(|_| f64::from(rng.random_range(0..4u8))).collect()).collect();
    (t, g)
}

/// Block-diagonal chain with dense aperiodic recurrent blocks and transient
/// states leaking into them.
fn random_multichain(rng: &mut ChaCha8Rng, blocks: &[usize], transient: usize) -> Vec<Vec<f64>> {
    let n: usize = blocks.iter().sum::<usize>() + transient;
    let mut p = vec![vec![0.0; n]; n];
    let mut start = 0;
    for &b in blocks {
        for i in start..start + b {
            let row = random_stochastic(rng, b);
            p[i][start..start + b].copy_from_slice(&row);
        }
        start += b;
    }
    for i in start..n {
        p[i] = random_stochastic(rng, n);
    }
    p
}

/// Augmented system through `w_{n+2}` solved by SVD least squares; returns
/// `(gain, h, w_1..w_{n+1})`.
fn augmented_oracle(p: &[Vec<f64>], g: &[f64], n: i32) -> (Vec<f64>, Vec<f64>, Vec<Vec<f64>>) {
    let s = p.len();
    let levels = (n + 4) as usize;
    let blocks = levels;
    let mut a = DMatrix::<f64>::zeros(blocks * s, levels * s);
    let mut b = DVector::<f64>::zeros(blocks * s);
    for k in 0..blocks {
        for i in 0..s {
            let r = k * s + i;
            for j in 0..s {
                a[(r, k * s + j)] -= p[i][j];
            }
            a[(r, k * s + i)] += 1.0;
            if k > 0 {
                a[(r, (k - 1) * s + i)] += 1.0;
            }
            if k == 1 {
                b[r] = g[i];
            }
        }
    }
    // Block 0: (I−P)gain = 0; block 1: gain + (I−P)h = g; block k: v_{k−1} + (I−P)v_k = 0.
    let x = a.svd(true, true).solve(&b, 1e-12).unwrap();
    let take = |l: usize| (0..s).map(|i| x[l * s + i]).collect::<Vec<f64>>();
    (take(0), take(1), (2..levels - 1).map(take).collect())
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn limiting_matrix_matches_tail_cesaro_average() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut chains = vec![vec![vec![0.0, 1.0], vec![1.0, 0.0]]];
    for _ in 0..5 {
        chains.push(random_multichain(&mut rng, &[2, 3], 2));
    }
    for p in &chains {
        let n = p.len();
        let d = chain_decompose(p).unwrap();
        let big = 10_000;
        let mut pow = p.clone();
        for _ in 1..big {
            pow = matmul(&pow, p);
        }
        let mut avg = vec![vec![0.0; n]; n];
        for _ in 0..big {
            pow = matmul(&pow, p);
            for i in 0..n {
                for j in 0..n {
                    avg[i][j] += pow[i][j] / big as f64;
                }
            }
        }
        for i in 0..n {
            assert!(max_diff(&d.stationary[i], &avg[i]) < 1e-6, "row {i}");
            assert!((d.stationary[i].iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        let pp = matmul(&d.stationary, p);
        for i in 0..n {
            assert!(max_diff(&pp[i], &d.stationary[i]) < 1e-9);
        }
    }
}

#[test]
fn recurrent_classes_partition_recurrent_states() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let p = random_multichain(&mut rng, &[1, 2, 3], 3);
    let d = chain_decompose(&p).unwrap();
    assert_eq!(d.classes, vec![vec![0], vec![1, 2], vec![3, 4, 5]]);
    assert_eq!(d.transient, vec![6, 7, 8]);
    assert_eq!(d.class_of(4), Some(2));
    assert_eq!(d.class_of(7), None);
}

#[test]
fn evaluation_matches_augmented_system() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for trial in 0..20 {
        let p = if trial % 2 == 0 {
            random_multichain(&mut rng, &[2, 2], 2)
        } else {
            sparse_mdp(&mut rng, 6, 1).0.into_iter().map(|r| r[0].clone()).collect()
        };
        let g: Vec<f64> = (0..p.len()).map(|_| rng.random_range(-2.0..3.0)).collect();
        let mdp = TabularMdp::new(
            p.iter().map(|r| vec![r.clone()]).collect(),
            g.iter().map(|&c| vec![c]).collect(),
        )
        .unwrap();
        for n in [-1, 0, 2] {
            let eval = policy_evaluation_sensitive(&mdp, &vec![0; p.len()], n).unwrap();
            let (gain, h, w) = augmented_oracle(&p, &g, n);
            assert!(max_diff(&eval.gain, &gain) < 1e-8, "trial {trial} gain");
            assert!(max_diff(&eval.bias, &h) < 1e-8, "trial {trial} bias");
            assert_eq!(eval.w.len(), (n + 1) as usize);
            for (a, b) in eval.w.iter().zip(&w) {
                assert!(max_diff(a, b) < 1e-7, "trial {trial} w");
            }
        }
    }
}

#[test]
fn laurent_expansion_of_discounted_costs() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..10 {
        let p = random_multichain(&mut rng, &[2, 1], 2);
        let g: Vec<f64> = (0..p.len()).map(|_| rng.random_range(0.0..3.0)).collect();
        let mdp = TabularMdp::new(
            p.iter().map(|r| vec![r.clone()]).collect(),
            g.iter().map(|&c| vec![c]).collect(),
        )
        .unwrap();
        let eval = policy_evaluation_sensitive(&mdp, &vec![0; p.len()], 2).unwrap();
        let alpha: f64 = 0.99;
        let n = p.len();
        let a: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| f64::from(u8::from(i == j)) - alpha * p[i][j]).collect())
            .collect();
        let v = gauss_solve(a, g.clone());
        let rho = (1.0 - alpha) / alpha;
        let scale = 1.0 + eval.w[2].iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for s in 0..n {
            let series = (1.0 + rho)
                * (eval.gain[s] / rho + eval.bias[s] + rho * eval.w[0][s] + rho * rho * eval.w[1][s]);
            assert!((v[s] - series).abs() < 10.0 * rho.powi(3) * scale, "state {s}");
        }
    }
}

/// Per-state lexicographic optimum of `(gain, h, w_1)` over all deterministic policies.
fn enumerate_policies(mdp: &TabularMdp) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    let mut evals = Vec::new();
    let mut pol = vec![0usize; ns];
    loop {
        let p = mdp.policy_matrix(&pol);
        let g = mdp.policy_costs(&pol);
        let (gain, h, w) = augmented_oracle(&p, &g, 0);
        evals.push((gain, h, w[0].clone()));
        let mut i = 0;
        while i < ns && pol[i] == na - 1 {
            pol[i] = 0;
            i += 1;
        }
        if i == ns {
            break;
        }
        pol[i] += 1;
    }
    let best = |sel: &dyn Fn(&(Vec<f64>, Vec<f64>, Vec<f64>)) -> &Vec<f64>, pool: &[usize]| {
        (0..ns)
            .map(|s| pool.iter().map(|&k| sel(&evals[k])[s]).fold(f64::INFINITY, f64::min))
            .collect::<Vec<f64>>()
    };
    let all: Vec<usize> = (0..evals.len()).collect();
    let gstar = best(&|e| &e.0, &all);
    let a: Vec<usize> = all.into_iter().filter(|&k| max_diff(&evals[k].0, &gstar) < 1e-9).collect();
    let hstar = best(&|e| &e.1, &a);
    let b: Vec<usize> = a.into_iter().filter(|&k| max_diff(&evals[k].1, &hstar) < 1e-9).collect();
    let wstar = best(&|e| &e.2, &b);
    (gstar, hstar, wstar)
}

#[test]
fn policy_iteration_is_lexicographically_optimal() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for trial in 0..25 {
        let (ns, na) = if trial % 2 == 0 { (4, 3) } else { (5, 2) };
        let (t, g) = sparse_mdp(&mut rng, ns, na);
        let mdp = TabularMdp::new(t, g).unwrap();
        let sol = solve_multichain(&mdp, 1).unwrap();
        let (gstar, hstar, wstar) = enumerate_policies(&mdp);
        assert!(max_diff(&sol.gain, &gstar) < 1e-8, "trial {trial} gain {:?} vs {gstar:?}", sol.gain);
        assert!(max_diff(&sol.bias, &hstar) < 1e-8, "trial {trial} bias");
        assert!(max_diff(&sol.w[0], &wstar) < 1e-7, "trial {trial} w1");
        assert!(sol.max_residual() <= RESIDUAL_TOL && sol.policy_in_argmin);
    }
}

#[test]
fn disconnected_cycles_keep_their_own_gains() {
    let stay = |s: usize| (0..4).map(|t| f64::from(u8::from(t == s))).collect::<Vec<f64>>();
    let swap = |s: usize| stay(s ^ 1);
    let t = (0..4).map(|s| vec![swap(s), stay(s)]).collect();
    let g = vec![vec![1.0, 1.5], vec![1.0, 1.5], vec![2.0, 2.5], vec![2.0, 2.5]];
    let sol = solve_multichain(&TabularMdp::new(t, g).unwrap(), 2).unwrap();
    assert_eq!(sol.gain, vec![1.0, 1.0, 2.0, 2.0]);
    assert!(!sol.constant_gain);
    assert_eq!(sol.chain.recurrent_classes, vec![vec![0, 1], vec![2, 3]]);

    let m = fixture("multichain2");
    let mdp = ModifiedMdp::build(&m, &GridScheme::edge(4, 0), Scheme::D1).unwrap();
    let sol = solve_multichain(&mdp, 2).unwrap();
    assert!(max_diff(&sol.gain, &[1.0, 1.0, 2.0, 2.0]) < 1e-12);
    assert!(sol.max_residual() <= RESIDUAL_TOL);
}

#[test]
fn fully_observed_gain_matches_relative_value_iteration() {
    let m = fixture("ring3");
    let (t, g) = m.underlying_mdp();
    let lambda = relative_vi(&t, &g, 5000);
    let ns = m.num_states();
    let tab = TabularMdp::new(
        (0..ns).map(|s| (0..t.len()).map(|u| t[u][s].clone()).collect()).collect(),
        (0..ns).map(|s| (0..t.len()).map(|u| g[u][s]).collect()).collect(),
    )
    .unwrap();
    let sol = solve_multichain(&tab, 2).unwrap();
    assert!(sol.gain.iter().all(|v| (v - lambda).abs() < 1e-9), "{:?} vs {lambda}", sol.gain);
    let qmdp = ModifiedMdp::build(&m, &GridScheme::edge(ns, 0), Scheme::D1).unwrap();
    let q = solve_multichain(&qmdp, 2).unwrap();
    assert!(max_diff(&q.gain, &sol.gain) < 1e-9);
}

#[test]
fn residuals_vanish_on_every_fixture_and_order() {
    for name in FIXTURES {
        let m = fixture(name);
        for pattern in ["0-E", "1-E", "2-E"] {
            let grid = GridScheme::from_pattern(pattern, m.num_states(), 0).unwrap();
            for scheme in [Scheme::D1, Scheme::D2] {
                let mdp = ModifiedMdp::build(&m, &grid, scheme).unwrap();
                for n in -1..=5 {
                    let sol = solve_multichain(&mdp, n).unwrap();
                    assert_eq!(sol.residuals.len(), (n + 3) as usize);
                    assert!(
                        sol.max_residual() <= RESIDUAL_TOL && sol.policy_in_argmin,
                        "{name} {pattern} {scheme} n={n}: {:?}",
                        sol.residuals
                    );
                    for class in &sol.chain.recurrent_classes {
                        let g0 = sol.gain[class[0]];
                        assert!(class.iter().all(|&c| (sol.gain[c] - g0).abs() < 1e-9));
                    }
                }
            }
        }
    }
}

#[test]
fn residuals_detect_a_perturbed_bias() {
    let m = fixture("chain3");
    let mdp = ModifiedMdp::build(&m, &GridScheme::edge(3, 1), Scheme::D2).unwrap();
    let sol = solve_multichain(&mdp, 1).unwrap();
    let mut eval = policy_evaluation_sensitive(&mdp, &sol.policy, 1).unwrap();
    let (clean, _) = nested_residuals(&mdp, &eval, &sol.policy, 1);
    assert!(clean.iter().all(|r| *r <= RESIDUAL_TOL));
    eval.bias[0] += 1e-3;
    let (dirty, _) = nested_residuals(&mdp, &eval, &sol.policy, 1);
    assert!(dirty[1] > 1e-4);
}

#[test]
fn extension_agrees_with_support_and_direct_formula() {
    let m = fixture("two_state");
    let tb = tables(&m);
    let grid = GridScheme::edge(2, 1);
    let mdp = ModifiedMdp::build(&m, &grid, Scheme::D1).unwrap();
    let sol = solve_multichain(&mdp, 2).unwrap();
    for (c, y) in mdp.support().iter().enumerate() {
        let e = extend_average_solution(&m, &mdp, &sol, y).unwrap();
        assert!((e.gain - sol.gain[c]).abs() < 1e-9);
        assert!((e.bias - sol.bias[c]).abs() < 1e-9);
        assert!(e.actions.contains(&sol.policy[c]));
    }
    // Direct evaluation at x = (0.4, 0.6) with bracketing weights on {0, 1/2, 1}.
    let x = [0.4, 0.6];
    let idx = |q: f64| grid.points().iter().position(|p| (p[1] - q).abs() < 1e-12).unwrap();
    let row = |u: usize| {
        let mut r = vec![0.0; grid.len()];
        for (_, pz, y) in bayes(&tb, &x, u) {
            let (lo, t) = if y[1] <= 0.5 { (0.0, y[1] / 0.5) } else { (0.5, (y[1] - 0.5) / 0.5) };
            r[idx(lo)] += pz * (1.0 - t);
            r[idx(lo + 0.5)] += pz * t;
        }
        r
    };
    let dot = |r: &[f64], v: &[f64]| r.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    let rows = [row(0), row(1)];
    let gains = [dot(&rows[0], &sol.gain), dot(&rows[1], &sol.gain)];
    let q0 = [stage(&tb, &x, 0) + dot(&rows[0], &sol.bias), stage(&tb, &x, 1) + dot(&rows[1], &sol.bias)];
    let e = extend_average_solution(&m, &mdp, &sol, &Belief::new(x.to_vec()).unwrap()).unwrap();
    let u = e.action;
    assert!(gains[u] <= gains[1 - u] + 1e-9);
    if (gains[0] - gains[1]).abs() < 1e-9 {
        assert!(q0[u] <= q0[1 - u] + 1e-9);
    }
    assert!((e.gain - gains[u]).abs() < 1e-12);
    assert!((e.bias - (q0[u] - gains[u])).abs() < 1e-12);
}

#[test]
fn constant_gain_extends_to_a_constant() {
    let m = fixture("ring3");
    let mdp = ModifiedMdp::build(&m, &GridScheme::edge(3, 2), Scheme::D2).unwrap();
    let sol = solve_multichain(&mdp, 2).unwrap();
    assert!(sol.constant_gain);
    let lambda = sol.gain[0];
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..50 {
        let x = Belief::new(random_belief(&mut rng, 3)).unwrap();
        let e = extend_average_solution(&m, &mdp, &sol, &x).unwrap();
        assert!((e.gain - lambda).abs() < 1e-9);
    }
}

#[test]
fn gain_times_horizon_is_below_exact_cost_plus_bias_span() {
    for name in FIXTURES {
        let m = fixture(name);
        let x0 = m.initial_belief();
        for scheme in [Scheme::D1, Scheme::D2] {
            let mdp = ModifiedMdp::build(&m, &GridScheme::edge(m.num_states(), 1), scheme).unwrap();
            let sol = solve_multichain(&mdp, 2).unwrap();
            let (_, exact) = mdp.nstage_lower_bound_check(&m, 6, &x0, 1.0).unwrap_or((0.0, f64::NAN));
            if exact.is_nan() {
                continue;
            }
            let e = extend_average_solution(&m, &mdp, &sol, &x0).unwrap();
            let span = sol.bias.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b))
                - sol.bias.iter().fold(f64::INFINITY, |a, &b| a.min(b));
            assert!(6.0 * e.gain <= exact + span + 1e-9, "{name} {scheme}");
        }
    }
}

#[test]
fn invalid_orders_and_policies_are_rejected() {
    let m = fixture("two_state");
    let mdp = ModifiedMdp::build(&m, &GridScheme::edge(2, 0), Scheme::D1).unwrap();
    assert!(solve_multichain(&mdp, -2).is_err());
    assert!(policy_evaluation_sensitive(&mdp, &[0], 0).is_err());
    assert!(policy_evaluation_sensitive(&mdp, &[0, 5], 0).is_err());
}
