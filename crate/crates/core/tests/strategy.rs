mod common;

use std::collections::BTreeMap;

use asymgame::belief::{Belief, Prescription};
use asymgame::error::Result;
use asymgame::instances::{guessing_game, matching_pennies, one_state_repeated, revelation_game};
use asymgame::lp::solve_matrix_game;
use asymgame::model::{lower_one_sided, with_perfect_recall, GameDefinition, OneSidedGame};
use asymgame::oracle::{build_extensive_form, one_sided_oracle_game, sequence_form_value};
use asymgame::solver::{solve_one_sided, SolverConfig};
use asymgame::strategy::{
    best_response_value, evaluate_profile, expanded_play_distribution, extract_cib_strategy, play_distribution,
    reduce_strategy, rho_project, simulate, ExpandedStrategy, HistoryStrategy, PlayKey, HISTORY_CAP,
};
use asymgame::tensor::{for_each_index, Tensor};
use common::*;
use proptest::prelude::*;
use rand::Rng;

fn solved(g: &OneSidedGame, samples: usize) -> asymgame::solver::OneSidedSolution {
    let cfg = SolverConfig {
        samples_per_stage: samples,
        ..SolverConfig::default()
    };
    solve_one_sided(g, &cfg).unwrap()
}

fn oracle_value(g: &OneSidedGame) -> f64 {
    sequence_form_value(&build_extensive_form(&one_sided_oracle_game(g).unwrap()).unwrap()).unwrap().value
}

/// Uses the table of `base`, blended toward action 0 by player 1's first
/// probability at the previous stage.
struct Remembering {
    base: HistoryStrategy,
}

impl ExpandedStrategy for Remembering {
    fn player(&self) -> usize {
        self.base.player
    }

    fn prescription(
        &self,
        t: usize,
        common: &[usize],
        past: &[(Prescription, Prescription)],
        rows: usize,
        actions: usize,
    ) -> Result<Prescription> {
        let w = past.last().map_or(0.0, |(g1, _)| 0.5 * g1.get(0, 0));
        let rows = (0..rows)
            .map(|p| {
                let base = self
                    .base
                    .row(t, common, p)
                    .map(<[f64]>::to_vec)
                    .unwrap_or_else(|_| vec![1.0 / actions as f64; actions]);
                base.iter().enumerate().map(|(u, v)| (1.0 - w) * v + if u == 0 { w } else { 0.0 }).collect()
            })
            .collect();
        Prescription::from_rows_normalized(t, self.base.player, rows)
    }
}

/// Depth-first enumeration of play under expanded strategies.
#[allow(clippy::too_many_arguments)]
fn enumerate_expanded(
    g: &GameDefinition,
    e1: &dyn ExpandedStrategy,
    e2: &dyn ExpandedStrategy,
    t: usize,
    c: &mut Vec<usize>,
    past: &mut Vec<(Prescription, Prescription)>,
    (x, p1, p2): (usize, usize, usize),
    w: f64,
    out: &mut [BTreeMap<PlayKey, f64>],
) {
    let s = *g.spaces(t);
    let g1 = e1.prescription(t, c, past, s.private1, s.actions1).unwrap();
    let g2 = e2.prescription(t, c, past, s.private2, s.actions2).unwrap();
    for u1 in 0..s.actions1 {
        for u2 in 0..s.actions2 {
            let a = w * g1.get(p1, u1) * g2.get(p2, u2);
            if a == 0.0 {
                continue;
            }
            *out[t].entry((c.clone(), x, p1, p2, u1, u2)).or_insert(0.0) += a;
            if t + 1 == g.horizon() {
                continue;
            }
            let n = *g.spaces(t + 1);
            let shape = [n.states, n.private1, n.private2, s.increments];
            let mut targets = Vec::new();
            for_each_index(&shape, |i| targets.push(i.to_vec()));
            for i in targets {
                let k = *g.kernel(t).get(&[x, p1, p2, u1, u2, i[0], i[1], i[2], i[3]]);
                if k == 0.0 {
                    continue;
                }
                c.push(i[3]);
                past.push((g1.clone(), g2.clone()));
                enumerate_expanded(g, e1, e2, t + 1, c, past, (i[0], i[1], i[2]), a * k, out);
                past.pop();
                c.pop();
            }
        }
    }
}

fn expanded_oracle(g: &GameDefinition, e1: &dyn ExpandedStrategy, e2: &dyn ExpandedStrategy) -> Vec<BTreeMap<PlayKey, f64>> {
    let mut out = vec![BTreeMap::new(); g.horizon()];
    let init = g.initial();
    let sh = init.shape().to_vec();
    for_each_index(&sh, |i| {
        let w = *init.get(i);
        if w > 0.0 {
            enumerate_expanded(g, e1, e2, 0, &mut Vec::new(), &mut Vec::new(), (i[0], i[1], i[2]), w, &mut out);
        }
    });
    out
}

#[test]
fn projection_keeps_history_strategies() {
    let mut r = rng(100);
    let g = dense_game(&mut r, &[spaces(2, 2, 2, 2, 2, 2), spaces(2, 2, 2, 2, 1, 2), spaces(1, 2, 2, 1, 1, 0)]);
    let s1 = random_strategy(&mut r, &g, 1);
    let s2 = random_strategy(&mut r, &g, 2);
    let (p1, p2) = rho_project(&s1, &s2, &g, HISTORY_CAP).unwrap();
    assert_eq!(p1, s1);
    assert_eq!(p2, s2);
}

#[test]
fn projection_preserves_play() {
    let mut r = rng(101);
    for _ in 0..5 {
        let g = dense_game(&mut r, &[spaces(2, 2, 2, 2, 2, 2), spaces(2, 2, 2, 2, 2, 0)]);
        let e1 = Remembering {
            base: random_strategy(&mut r, &g, 1),
        };
        let e2 = Remembering {
            base: random_strategy(&mut r, &g, 2),
        };
        let expected = expanded_oracle(&g, &e1, &e2);
        let (p1, p2) = rho_project(&e1, &e2, &g, HISTORY_CAP).unwrap();
        let projected = play_distribution(&g, &p1, &p2, HISTORY_CAP).unwrap();
        let direct = expanded_play_distribution(&e1, &e2, &g, HISTORY_CAP).unwrap();
        for t in 0..2 {
            assert!(max_diff(&expected[t], &projected[t]) <= 1e-12);
            assert!(max_diff(&expected[t], &direct[t]) <= 1e-12);
        }
    }
}

/// Static two-state game in which player 2's observation carries no
/// information, so every increment with the same `u2` yields the same belief.
fn blind_game() -> OneSidedGame {
    let mut tr = Tensor::zeros(&[2, 2, 2, 2]);
    for_each_index(&[2, 2, 2, 2], |i| tr.set(i, (i[0] == i[3]) as u8 as f64));
    let ob = Tensor::from_vec(&[2, 2, 2, 3], vec![1.0 / 3.0; 24]).unwrap();
    let mut r = rng(102);
    let cost = |r: &mut rand_chacha::ChaCha8Rng| Tensor::from_vec(&[2, 2, 2], (0..8).map(|_| r.random::<f64>()).collect()).unwrap();
    OneSidedGame::new(vec![tr], vec![ob], vec![cost(&mut r), cost(&mut r)], vec![0.3, 0.7]).unwrap()
}

#[test]
fn cib_prescriptions_depend_on_beliefs_only() {
    let g = blind_game();
    let sol = solved(&g, 30);
    let un = extract_cib_strategy(&sol.value_function, &g).unroll(HISTORY_CAP).unwrap();
    let mut by_belief: BTreeMap<Vec<u64>, Vec<Vec<f64>>> = BTreeMap::new();
    let mut collisions = 0;
    for (key, b) in &un.beliefs[1] {
        let rows: Vec<Vec<f64>> = (0..2).map(|x| un.strategy.stages[1][&format!("{key}|p={x}")].clone()).collect();
        let bits: Vec<u64> = b.iter().map(|v| v.to_bits()).collect();
        if let Some(seen) = by_belief.get(&bits) {
            collisions += 1;
            assert_eq!(seen, &rows);
        } else {
            by_belief.insert(bits, rows);
        }
    }
    assert!(collisions > 0);
}

#[test]
fn best_response_examples() {
    let pennies = lower_one_sided(&matching_pennies());
    let uniform = HistoryStrategy::uniform(&pennies, 1, HISTORY_CAP).unwrap();
    assert!((best_response_value(&pennies, &uniform, HISTORY_CAP).unwrap().value - 0.5).abs() <= 1e-12);

    let guessing = lower_one_sided(&guessing_game());
    let revealing = HistoryStrategy::from_fn(&guessing, 1, HISTORY_CAP, |t, _, x| {
        if t == 0 {
            (0..2).map(|u| (u == x) as u8 as f64).collect()
        } else {
            vec![1.0]
        }
    })
    .unwrap();
    let br = best_response_value(&guessing, &revealing, HISTORY_CAP).unwrap();
    assert!((br.value - 1.0).abs() <= 1e-12);
    let check = evaluate_profile(&guessing, &revealing, &br.strategy, HISTORY_CAP).unwrap();
    assert!((check - br.value).abs() <= 1e-12);
}

#[test]
fn extracted_strategy_is_nearly_unexploitable() {
    for (prior, reward) in [([0.5, 0.5], 0.5), ([0.3, 0.7], 0.25)] {
        let g = revelation_game(prior, reward);
        let sol = solved(&g, 200);
        let un = extract_cib_strategy(&sol.value_function, &g).unroll(HISTORY_CAP).unwrap();
        let br = best_response_value(&lower_one_sided(&g), &un.strategy, HISTORY_CAP).unwrap().value;
        let o = oracle_value(&g);
        assert!(br >= o - 1e-7 && br <= o + 1e-3, "{br} vs {o}");
    }
}

#[test]
fn cib_examples() {
    let g = matching_pennies();
    let cib = extract_cib_strategy(&solved(&g, 10).value_function, &g);
    let pi = Belief::initial_one_sided(&g);
    for u in 0..2 {
        assert!((cib.action(0, &pi, 0).unwrap()[u] - 0.5).abs() <= 1e-9);
    }

    let mut r = rng(103);
    let costs: Vec<Vec<Vec<f64>>> = (0..3).map(|_| random_matrix(&mut r, 3, 3)).collect();
    let g = one_state_repeated(&costs);
    let cib = extract_cib_strategy(&solved(&g, 10).value_function, &g);
    for (t, m) in costs.iter().enumerate() {
        let pi = Belief::over_states(t, vec![1.0]).unwrap();
        let row = cib.action(t, &pi, 0).unwrap();
        assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-10);
        let v = solve_matrix_game(m).unwrap().value;
        let worst = (0..3).map(|u2| (0..3).map(|u1| row[u1] * m[u1][u2]).sum::<f64>()).fold(f64::NEG_INFINITY, f64::max);
        assert!((worst - v).abs() <= 1e-9, "stage {t}: {worst} vs {v}");
    }

    let g = revelation_game([0.4, 0.6], 0.5);
    let cib = extract_cib_strategy(&solved(&g, 50).value_function, &g);
    let pi = Belief::over_states(0, vec![0.45, 0.55]).unwrap();
    let a = cib.prescription(0, &pi).unwrap();
    let b = cib.prescription(0, &pi).unwrap();
    for x in 0..2 {
        for (u, v) in a.row(x).iter().zip(b.row(x)) {
            assert_eq!(u.to_bits(), v.to_bits());
        }
    }
}

/// The oracle game of a one-sided game together with a player-1 strategy
/// there that reads only the current state and the common history.
fn state_based_strategy(g: &OneSidedGame, seed: u64) -> (GameDefinition, GameDefinition, HistoryStrategy, HistoryStrategy) {
    let reduced = lower_one_sided(g);
    let (full, map) = with_perfect_recall(&reduced, 1).unwrap();
    let small = random_strategy(&mut rng(seed), &reduced, 1);
    let big = HistoryStrategy::from_fn(&full, 1, HISTORY_CAP, |t, c, a| small.row(t, c, map.base(t, a)).unwrap().to_vec()).unwrap();
    (full, reduced, big, small)
}

#[test]
fn reduction_fixes_state_based_strategies() {
    for seed in 0..5 {
        let g = revelation_game([0.35, 0.65], 0.5);
        let (full, reduced, big, small) = state_based_strategy(&g, seed);
        let out = reduce_strategy(&big, &full, &reduced, HISTORY_CAP).unwrap();
        let mut r = rng(200 + seed);
        for _ in 0..5 {
            let s2 = random_strategy(&mut r, &reduced, 2);
            let a = marginal_c_x_u(&play_distribution(&full, &big, &s2, HISTORY_CAP).unwrap());
            let b = marginal_c_x_u(&play_distribution(&reduced, &out, &s2, HISTORY_CAP).unwrap());
            for (x, y) in a.iter().zip(&b) {
                assert!(max_diff(x, y) <= 1e-12);
            }
        }
        // Rows on histories that carry mass are returned unchanged.
        let s2 = HistoryStrategy::uniform(&reduced, 2, HISTORY_CAP).unwrap();
        let play = play_distribution(&reduced, &small, &s2, HISTORY_CAP).unwrap();
        for (t, m) in play.iter().enumerate() {
            for (c, x, p1, _, _, _) in m.keys() {
                let (got, want) = (out.row(t, c, *p1).unwrap(), small.row(t, c, *x).unwrap());
                for (u, v) in got.iter().zip(want) {
                    assert!((u - v).abs() <= 1e-12);
                }
            }
        }
    }
}

#[test]
fn reduction_uses_uniform_rows_off_support() {
    // Guessing with a second stage-1 action for player 1 that costs nothing extra.
    let mut tr = Tensor::zeros(&[2, 2, 1, 2]);
    let mut ob = Tensor::zeros(&[2, 2, 1, 2]);
    for_each_index(&[2, 2, 1, 2], |i| {
        tr.set(i, (i[0] == i[3]) as u8 as f64);
        ob.set(i, (i[1] == i[3]) as u8 as f64);
    });
    let c0 = Tensor::zeros(&[2, 2, 1]);
    let mut c1 = Tensor::zeros(&[2, 2, 2]);
    for_each_index(&[2, 2, 2], |i| c1.set(i, (i[0] == i[2]) as u8 as f64));
    let g = OneSidedGame::new(vec![tr], vec![ob], vec![c0, c1], vec![0.5, 0.5]).unwrap();
    let reduced = lower_one_sided(&g);
    let (full, map) = with_perfect_recall(&reduced, 1).unwrap();
    let revealing = HistoryStrategy::from_fn(&full, 1, HISTORY_CAP, |t, _, a| {
        let x = map.base(t, a);
        if t == 0 {
            (0..2).map(|u| (u == x) as u8 as f64).collect()
        } else {
            vec![1.0, 0.0]
        }
    })
    .unwrap();
    let out = reduce_strategy(&revealing, &full, &reduced, HISTORY_CAP).unwrap();
    // Player 2 saw action 0, so state 1 is impossible there.
    assert_eq!(out.row(1, &[0], 1).unwrap(), &[0.5, 0.5]);
    assert_eq!(out.row(1, &[0], 0).unwrap(), &[1.0, 0.0]);
}

#[test]
fn simulation_of_a_deterministic_game_has_no_variance() {
    let costs = vec![vec![vec![1.0, 2.0], vec![3.0, 4.0]], vec![vec![0.5, 0.25], vec![0.0, 1.0]]];
    let g = lower_one_sided(&one_state_repeated(&costs));
    let pure = |player: usize, a: usize| HistoryStrategy::from_fn(&g, player, HISTORY_CAP, |_, _, _| (0..2).map(|u| (u == a) as u8 as f64).collect()).unwrap();
    let rep = simulate(&g, &pure(1, 1), &pure(2, 0), 3, 500).unwrap();
    assert_eq!(rep.mean, 3.0);
    assert_eq!(rep.std_error, 0.0);
}

#[test]
fn simulation_of_matching_pennies() {
    let g = lower_one_sided(&matching_pennies());
    let s1 = HistoryStrategy::uniform(&g, 1, HISTORY_CAP).unwrap();
    let s2 = HistoryStrategy::uniform(&g, 2, HISTORY_CAP).unwrap();
    let rep = simulate(&g, &s1, &s2, 11, 100_000).unwrap();
    assert!((rep.mean - 0.5).abs() <= 3.0 * rep.std_error, "{rep:?}");
    assert_eq!(rep, simulate(&g, &s1, &s2, 11, 100_000).unwrap());
}

/// Exact expected cost by recursion over every outcome.
fn exhaustive_cost(g: &GameDefinition, s1: &HistoryStrategy, s2: &HistoryStrategy) -> f64 {
    fn go(g: &GameDefinition, s1: &HistoryStrategy, s2: &HistoryStrategy, t: usize, c: &mut Vec<usize>, (x, p1, p2): (usize, usize, usize)) -> f64 {
        let s = *g.spaces(t);
        let d1 = s1.row(t, c, p1).unwrap().to_vec();
        let d2 = s2.row(t, c, p2).unwrap().to_vec();
        let mut total = 0.0;
        for u1 in 0..s.actions1 {
            for u2 in 0..s.actions2 {
                let a = d1[u1] * d2[u2];
                if a == 0.0 {
                    continue;
                }
                let mut v = *g.cost(t).get(&[x, u1, u2]);
                if t + 1 < g.horizon() {
                    let n = *g.spaces(t + 1);
                    let mut targets = Vec::new();
                    for_each_index(&[n.states, n.private1, n.private2, s.increments], |i| targets.push(i.to_vec()));
                    for i in targets {
                        let k = *g.kernel(t).get(&[x, p1, p2, u1, u2, i[0], i[1], i[2], i[3]]);
                        if k > 0.0 {
                            c.push(i[3]);
                            v += k * go(g, s1, s2, t + 1, c, (i[0], i[1], i[2]));
                            c.pop();
                        }
                    }
                }
                total += a * v;
            }
        }
        total
    }
    let init = g.initial();
    let mut total = 0.0;
    for_each_index(init.shape(), |i| {
        let w = *init.get(i);
        if w > 0.0 {
            total += w * go(g, s1, s2, 0, &mut Vec::new(), (i[0], i[1], i[2]));
        }
    });
    total
}

#[test]
fn simulation_matches_exhaustive_expectation() {
    let mut r = rng(104);
    for seed in 0..3 {
        let g = dense_game(&mut r, &[spaces(2, 2, 2, 2, 2, 2), spaces(2, 2, 2, 2, 1, 0)]);
        let s1 = random_strategy(&mut r, &g, 1);
        let s2 = random_strategy(&mut r, &g, 2);
        let exact = exhaustive_cost(&g, &s1, &s2);
        assert!((exact - evaluate_profile(&g, &s1, &s2, HISTORY_CAP).unwrap()).abs() <= 1e-12);
        let rep = simulate(&g, &s1, &s2, seed, 50_000).unwrap();
        assert!((rep.mean - exact).abs() <= 3.0 * rep.std_error, "{rep:?} vs {exact}");
    }
}

#[test]
fn strategies_round_trip_through_json() {
    let mut r = rng(105);
    let g = dense_game(&mut r, &[spaces(2, 2, 2, 2, 2, 2), spaces(2, 2, 2, 1, 1, 0)]);
    let s = random_strategy(&mut r, &g, 1);
    let back = HistoryStrategy::from_json(&s.to_json().to_string()).unwrap();
    assert_eq!(back, s);
    let mut bad = s.clone();
    bad.stages[0].values_mut().next().unwrap()[0] += 0.1;
    assert!(HistoryStrategy::from_json(&bad.to_json().to_string()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn best_response_dominates_the_value(seed in any::<u64>()) {
        let mut r = rng(seed);
        let g = one_sided(&mut r, 2, 2, 2, 2);
        let lowered = lower_one_sided(&g);
        let s1 = random_strategy(&mut r, &lowered, 1);
        let br = best_response_value(&lowered, &s1, HISTORY_CAP).unwrap().value;
        prop_assert!(br >= oracle_value(&g) - 1e-7);
    }
}
