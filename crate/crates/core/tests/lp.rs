mod common;

use asymgame::lp::{solve_lp, solve_lp_with, solve_matrix_game, strategy_bounds, LinearProgram, PivotRule, SolveOptions};
use common::*;
use proptest::prelude::*;
use rand::Rng;

#[test]
fn single_bound() {
    let mut lp = LinearProgram::new(1);
    lp.set_objective(0, 1.0);
    lp.add_le(&[(0, 1.0)], 1.0);
    let s = solve_lp(&lp).unwrap();
    assert!(s.is_optimal());
    assert_eq!(s.value, 1.0);
}

#[test]
fn degenerate_optimal_face() {
    let mut lp = LinearProgram::new(2);
    lp.set_objective(0, 1.0);
    lp.set_objective(1, 1.0);
    lp.add_le(&[(0, 1.0), (1, 1.0)], 1.0);
    let s = solve_lp(&lp).unwrap();
    assert!((s.value - 1.0).abs() < 1e-12);
    assert!((s.primal[0] + s.primal[1] - 1.0).abs() < 1e-12);
    assert!(s.primal.iter().all(|&v| v >= 0.0));
}

#[test]
fn identity_matrix_game() {
    let s = solve_matrix_game(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
    assert!((s.value - 0.5).abs() < 1e-12);
    for p in s.row.iter().chain(&s.col) {
        assert!((p - 0.5).abs() < 1e-12);
    }
}

#[test]
fn zero_matrix_game() {
    let s = solve_matrix_game(&[vec![0.0, 0.0], vec![0.0, 0.0]]).unwrap();
    assert_eq!(s.value, 0.0);
}

#[test]
fn random_4x5_against_support_enumeration() {
    let mut r = rng(45);
    for _ in 0..50 {
        let m = random_matrix(&mut r, 4, 5);
        let v = solve_matrix_game(&m).unwrap().value;
        let reference = support_enumeration(&m).expect("nondegenerate");
        assert!((v - reference).abs() <= 1e-8, "{v} vs {reference}");
    }
}

#[test]
fn equilibrium_strategies_certify_value() {
    let mut r = rng(46);
    for _ in 0..50 {
        let rows = r.random_range(1..=5);
        let cols = r.random_range(1..=5);
        let m = random_matrix(&mut r, rows, cols);
        let s = solve_matrix_game(&m).unwrap();
        let (upper, lower) = strategy_bounds(&m, &s.row, &s.col);
        assert!(upper <= s.value + 1e-9 && lower >= s.value - 1e-9);
    }
}

#[test]
fn random_lps_against_vertex_enumeration() {
    let mut r = rng(1010);
    for _ in 0..10 {
        let (c, a, b) = random_bounded_lp(&mut r, 6, 5);
        let s = solve_lp(&lp_from_dense(&c, &a, &b)).unwrap();
        let reference = vertex_enumeration(&c, &a, &b).unwrap();
        assert!((s.value - reference).abs() <= 1e-8);
    }
}

/// Number of bases of an `m`-row, `n + m`-column tableau.
fn basis_bound(m: usize, n: usize) -> usize {
    let mut b: u128 = 1;
    for i in 0..m {
        b = b * (n + m - i) as u128 / (i + 1) as u128;
    }
    b.min(usize::MAX as u128) as usize
}

fn lp_strategy() -> impl Strategy<Value = (Vec<f64>, Vec<Vec<f64>>, Vec<f64>)> {
    (1usize..6, 1usize..6, any::<u64>()).prop_map(|(m, n, seed)| random_bounded_lp(&mut rng(seed), m, n))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn strong_duality((c, a, b) in lp_strategy()) {
        let lp = lp_from_dense(&c, &a, &b);
        let s = solve_lp(&lp).unwrap();
        prop_assert!(s.is_optimal());
        prop_assert!((s.value - lp.dual_value(&s.dual)).abs() <= 1e-7);
        prop_assert!(lp.primal_residual(&s.primal) <= 1e-9);
        prop_assert!(lp.dual_residual(&s.dual) <= 1e-9);
    }

    #[test]
    fn minimax_symmetry(rows in 1usize..6, cols in 1usize..6, seed in any::<u64>()) {
        let m = random_matrix(&mut rng(seed), rows, cols);
        let neg_t: Vec<Vec<f64>> = (0..cols).map(|j| (0..rows).map(|i| -m[i][j]).collect()).collect();
        let a = solve_matrix_game(&m).unwrap().value;
        let b = solve_matrix_game(&neg_t).unwrap().value;
        prop_assert!((a + b).abs() <= 1e-8);
    }

    /// Degenerate instances (many tight constraints at the origin) terminate
    /// under Bland's rule within the number of bases.
    #[test]
    fn bland_terminates_on_degenerate_lps(m in 2usize..6, n in 2usize..5, seed in any::<u64>()) {
        let mut r = rng(seed);
        let mut lp = LinearProgram::new(n);
        for j in 0..n {
            lp.set_objective(j, r.random_range(0.0..1.0));
        }
        for i in 0..m {
            let row: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
            lp.add_le_dense(row, if i == 0 { 1.0 } else { 0.0 });
        }
        lp.add_le_dense(vec![1.0; n], 1.0);
        let opts = SolveOptions { rule: PivotRule::Bland, ..SolveOptions::default() };
        let s = solve_lp_with(&lp, &opts).unwrap();
        prop_assert!(s.is_optimal());
        prop_assert!(s.iterations <= 2 * basis_bound(m + 1, n));
        let d = solve_lp(&lp).unwrap();
        prop_assert!((s.value - d.value).abs() <= 1e-9);
    }
}
