mod common;

use asymgame::belief::Belief;
use asymgame::instances::{
    constant_cost_game, guessing_game, matching_pennies, one_state_repeated, random_one_sided, random_two_sided,
    revelation_game, OneSidedShape,
};
use asymgame::lp::solve_matrix_game;
use asymgame::oracle::{build_extensive_form, one_sided_oracle_game, sequence_form_value};
use asymgame::solver::{
    dirichlet_samples, fit_max_affine, solve_general_bounds, solve_one_sided, solve_regression, Caps, RegressionConfig,
    SolverConfig,
};
use asymgame::stage::{general_stage_game_t, one_sided_backup_maximin, pwlc_eval, PURE_PRESCRIPTION_CAP};
use common::*;
use proptest::prelude::*;

fn config(samples: usize, seed: u64) -> SolverConfig {
    SolverConfig {
        samples_per_stage: samples,
        seed,
        ..SolverConfig::default()
    }
}

fn oracle_value(g: &asymgame::model::OneSidedGame) -> f64 {
    let ef = build_extensive_form(&one_sided_oracle_game(g).unwrap()).unwrap();
    sequence_form_value(&ef).unwrap().value
}

#[test]
fn single_stage_is_exact() {
    let mut r = rng(90);
    for _ in 0..10 {
        let g = one_sided(&mut r, 1, 4, 3, 1);
        let pi = Belief::initial_one_sided(&g);
        let sol = solve_one_sided(&g, &config(20, 0)).unwrap();
        let direct = one_sided_backup_maximin(&pi, None, &g, 0).unwrap().value;
        assert!((sol.value - direct).abs() <= 1e-9, "{} vs {direct}", sol.value);
    }
    let v = solve_one_sided(&matching_pennies(), &config(10, 0)).unwrap().value;
    assert!((v - 0.5).abs() <= 1e-9);
}

#[test]
fn single_state_values_add_up() {
    let mut r = rng(91);
    for horizon in 1..=3 {
        let costs: Vec<Vec<Vec<f64>>> = (0..horizon).map(|_| random_matrix(&mut r, 3, 2)).collect();
        let g = one_state_repeated(&costs);
        let expected: f64 = costs.iter().map(|m| solve_matrix_game(m).unwrap().value).sum();
        let v = solve_one_sided(&g, &config(10, 0)).unwrap().value;
        assert!((v - expected).abs() <= 1e-8, "{v} vs {expected}");
    }
}

#[test]
fn revelation_matches_oracle() {
    for (prior, reward) in [([0.5, 0.5], 0.5), ([0.3, 0.7], 0.25), ([0.8, 0.2], 1.0)] {
        let g = revelation_game(prior, reward);
        let v = solve_one_sided(&g, &config(200, 0)).unwrap().value;
        let o = oracle_value(&g);
        assert!(v <= o + 1e-7 && o - v <= 1e-3, "{v} vs {o}");
    }
    let g = guessing_game();
    assert!((solve_one_sided(&g, &config(50, 0)).unwrap().value - 0.5).abs() <= 1e-7);
}

#[test]
fn value_function_layout() {
    let g = revelation_game([0.5, 0.5], 0.5);
    let sol = solve_one_sided(&g, &config(30, 0)).unwrap();
    let vf = &sol.value_function;
    assert_eq!(vf.horizon(), 2);
    assert!(vf.next(1).is_none());
    assert_eq!(vf.next(0), Some(vf.alpha(1)));
    for t in 0..2 {
        assert_eq!(vf.provenance(t).len(), vf.alpha(t).len());
        // Vertices, reachable beliefs, then random samples.
        assert!(vf.samples(t).len() >= 2 + 30);
    }
    let pi = Belief::initial_one_sided(&g);
    assert_eq!(vf.eval(&pi).unwrap(), sol.value);
    assert_eq!(pwlc_eval(vf.alpha(0), &pi).unwrap(), sol.value);
}

#[test]
fn sample_streams_are_nested() {
    let a = dirichlet_samples(5, 1, 3, 10);
    let b = dirichlet_samples(5, 1, 3, 20);
    assert_eq!(a[..], b[..10]);
    assert_ne!(dirichlet_samples(5, 2, 3, 10), a);
    for s in &b {
        assert!((s.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn caps_refuse_oversized_games() {
    let g = random_one_sided(
        92,
        OneSidedShape {
            horizon: 3,
            states: 3,
            actions1: 2,
            actions2: 2,
            observations: 2,
        },
    );
    let mut cfg = config(5, 0);
    cfg.caps.states = 2;
    assert!(solve_one_sided(&g, &cfg).is_err());
    let mut cfg = config(5, 0);
    cfg.caps.horizon = 2;
    assert!(solve_one_sided(&g, &cfg).is_err());
    assert!(solve_regression(&g, &cfg).is_err());
}

#[test]
fn general_single_stage_has_no_gap() {
    let mut r = rng(93);
    for _ in 0..5 {
        let g = dense_game(&mut r, &[spaces(2, 2, 2, 2, 2, 0)]);
        let est = solve_general_bounds(&g, 10, 4, &Caps::default()).unwrap();
        let exact = general_stage_game_t(&Belief::initial(&g), &g, 0, PURE_PRESCRIPTION_CAP).unwrap().value;
        assert!((est.minmax - exact).abs() <= 1e-12 && (est.maxmin - exact).abs() <= 1e-12);
    }
}

#[test]
fn general_bounds_are_ordered_and_bracket() {
    let g = random_two_sided(1);
    let est = solve_general_bounds(&g, 10, 4, &Caps::default()).unwrap();
    assert!(est.maxmin <= est.minmax + 1e-9);
    for stage in &est.tables.stages {
        for e in stage {
            assert!(e.lower <= e.upper + 1e-9);
        }
    }
    let fine = solve_general_bounds(&g, 20, 8, &Caps::default()).unwrap();
    let delta = (fine.minmax - est.minmax).abs().max((fine.maxmin - est.maxmin).abs());
    let o = sequence_form_value(&build_extensive_form(&g).unwrap()).unwrap().value;
    assert!(fine.maxmin - delta - 1e-9 <= o && o <= fine.minmax + delta + 1e-9);
}

#[test]
fn doubling_samples_never_lowers_the_value() {
    for seed in 0..4 {
        let g = random_one_sided(
            94 + seed,
            OneSidedShape {
                horizon: 3,
                states: 2,
                actions1: 2,
                actions2: 2,
                observations: 2,
            },
        );
        let a = solve_one_sided(&g, &config(15, seed)).unwrap().value;
        let b = solve_one_sided(&g, &config(30, seed)).unwrap().value;
        assert!(b >= a - 1e-9, "{b} < {a}");
    }
}

#[test]
fn solves_are_deterministic() {
    let g = random_one_sided(
        95,
        OneSidedShape {
            horizon: 3,
            states: 3,
            actions1: 2,
            actions2: 2,
            observations: 2,
        },
    );
    let a = solve_one_sided(&g, &config(20, 4)).unwrap();
    let b = solve_one_sided(&g, &config(20, 4)).unwrap();
    for t in 0..3 {
        let bits = |s: &asymgame::stage::AlphaSet| -> Vec<u64> {
            s.vectors().iter().flatten().map(|v| v.to_bits()).collect()
        };
        assert_eq!(bits(a.value_function.alpha(t)), bits(b.value_function.alpha(t)));
    }
    let ra = solve_regression(&g, &config(20, 4)).unwrap();
    let rb = solve_regression(&g, &config(20, 4)).unwrap();
    assert_eq!(ra, rb);
}

/// Supports of a value function, merged when within `tol` of each other.
fn distinct(vectors: &[Vec<f64>], tol: f64) -> usize {
    let mut kept: Vec<&Vec<f64>> = Vec::new();
    for v in vectors {
        if !kept.iter().any(|k| k.iter().zip(v).all(|(a, b)| (a - b).abs() <= tol)) {
            kept.push(v);
        }
    }
    kept.len()
}

#[test]
fn regression_recovers_exact_supports() {
    let g = revelation_game([0.5, 0.5], 0.5);
    let exact = solve_one_sided(&g, &config(200, 0)).unwrap();
    // Stage 1 of the revelation game: a guess against a known belief.
    let m = distinct(exact.value_function.alpha(1).vectors(), 1e-9);
    let mut cfg = config(100, 0);
    cfg.pieces = m;
    let fit = solve_regression(&g, &cfg).unwrap();
    assert!(fit.alpha[1].len() <= m);
    assert!(fit.stages[1].mse <= 1e-6, "m = {m}, mse = {}", fit.stages[1].mse);
    // The fitted value is read off the returned sets alone.
    let pi = Belief::initial_one_sided(&g);
    assert_eq!(fit.eval(&pi).unwrap(), pwlc_eval(&fit.alpha[0], &pi).unwrap());
}

#[test]
fn regression_examples() {
    let g = constant_cost_game(3, 2, 0.4);
    for pieces in [1, 3] {
        let mut cfg = config(30, 0);
        cfg.pieces = pieces;
        let fit = solve_regression(&g, &cfg).unwrap();
        for s in &fit.stages {
            assert!(s.mse <= 1e-10);
        }
        let v = fit.eval(&Belief::initial_one_sided(&g)).unwrap();
        assert!((v - 1.2).abs() <= 1e-8);
    }

    let xs: Vec<Vec<f64>> = dirichlet_samples(1, 0, 2, 50);
    let ys: Vec<f64> = xs.iter().map(|x| (x[0] - 0.5).abs()).collect();
    let (w, mse, _) = fit_max_affine(&xs, &ys, 1, &RegressionConfig::default(), 0, 0).unwrap();
    assert_eq!(w.len(), 1);
    assert!(mse >= 0.0);
    let (_, mse2, _) = fit_max_affine(&xs, &ys, 2, &RegressionConfig::default(), 0, 0).unwrap();
    assert!(mse2 <= 1e-10, "{mse2}");
    assert!(fit_max_affine(&xs, &ys, 0, &RegressionConfig::default(), 0, 0).is_err());
}

#[test]
fn oversized_steps_are_reported_as_divergence() {
    let xs: Vec<Vec<f64>> = dirichlet_samples(2, 0, 3, 40);
    let ys: Vec<f64> = xs.iter().map(|x| x[0] * x[0] - x[1]).collect();
    let cfg = RegressionConfig {
        learning_rate: 1e3,
        refit_rounds: 0,
        restarts: 1,
        ..RegressionConfig::default()
    };
    let err = fit_max_affine(&xs, &ys, 1, &cfg, 0, 3).unwrap_err();
    assert!(matches!(err, asymgame::error::Error::Divergence { stage: 3, .. }), "{err:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn alpha_sets_never_exceed_backups(seed in any::<u64>()) {
        let mut r = rng(seed);
        let g = one_sided(&mut r, 3, 3, 2, 2);
        let sol = solve_one_sided(&g, &config(10, seed)).unwrap();
        let vf = &sol.value_function;
        for t in 0..g.horizon() {
            for b in vf.samples(t) {
                let pi = Belief::over_states(t, b.clone()).unwrap();
                let backup = one_sided_backup_maximin(&pi, vf.next(t), &g, t).unwrap().value;
                prop_assert!(pwlc_eval(vf.alpha(t), &pi).unwrap() <= backup + 1e-7);
            }
        }
    }

    #[test]
    fn solver_value_is_a_lower_bound(seed in any::<u64>()) {
        let g = one_sided(&mut rng(seed), 2, 2, 2, 2);
        let sol = solve_one_sided(&g, &config(10, seed)).unwrap();
        prop_assert!(sol.value <= oracle_value(&g) + 1e-7);
    }

    #[test]
    fn general_bounds_ordered(seed in any::<u64>()) {
        let mut r = rng(seed);
        let g = dense_game(&mut r, &[spaces(2, 2, 2, 1, 2, 2), spaces(2, 2, 2, 1, 1, 0)]);
        let est = solve_general_bounds(&g, 6, 3, &Caps::default()).unwrap();
        prop_assert!(est.maxmin <= est.minmax + 1e-9);
    }
}
