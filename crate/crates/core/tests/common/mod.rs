//! Generators and brute-force reference solvers shared by the integration
//! tests and the acceptance suite.
#![allow(dead_code)]

use std::collections::BTreeMap;

use asymgame::belief::{Belief, Prescription};
use asymgame::lp::LinearProgram;
use asymgame::model::{GameDefinition, OneSidedGame, Stage, StageSpaces};
use asymgame::stage::AlphaSet;
use asymgame::strategy::{HistoryStrategy, PlayDistribution, HISTORY_CAP};
use asymgame::tensor::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform point of the simplex.
pub fn simplex(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..n).map(|_| r.sample::<f64, _>(Exp1)).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Simplex point with some coordinates zeroed, to exercise boundaries.
pub fn sparse_simplex(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut v = simplex(r, n);
    if n > 1 && r.random_bool(0.3) {
        let k = r.random_range(0..n);
        v[k] = 0.0;
        let s: f64 = v.iter().sum();
        v.iter_mut().for_each(|x| *x /= s);
    }
    v
}

pub fn prescription(r: &mut ChaCha8Rng, t: usize, player: usize, rows: usize, actions: usize) -> Prescription {
    Prescription::new(t, player, (0..rows).map(|_| sparse_simplex(r, actions)).collect()).unwrap()
}

pub fn state_belief(r: &mut ChaCha8Rng, t: usize, n: usize) -> Belief {
    Belief::over_states(t, sparse_simplex(r, n)).unwrap()
}

pub fn alpha_set(r: &mut ChaCha8Rng, t: usize, dim: usize, count: usize) -> AlphaSet {
    let v = (0..count)
        .map(|_| (0..dim).map(|_| r.random_range(-1.0..2.0)).collect())
        .collect();
    AlphaSet::new(t, v).unwrap()
}

/// Random one-sided game with the given horizon and sizes drawn up to the
/// given maxima.
pub fn one_sided(r: &mut ChaCha8Rng, horizon: usize, max_states: usize, max_actions: usize, max_obs: usize) -> OneSidedGame {
    let shape = asymgame::instances::OneSidedShape {
        horizon,
        states: r.random_range(1..=max_states),
        actions1: r.random_range(1..=max_actions),
        actions2: r.random_range(1..=max_actions),
        observations: r.random_range(1..=max_obs),
    };
    asymgame::instances::random_one_sided(r.random(), shape)
}

/// Game with dense random kernels: every `(x', p1', p2', z)` has positive
/// probability from every tuple.
pub fn dense_game(r: &mut ChaCha8Rng, spaces: &[StageSpaces]) -> GameDefinition {
    let horizon = spaces.len();
    let stages = (0..horizon)
        .map(|t| {
            let s = spaces[t];
            let kernel = (t + 1 < horizon).then(|| {
                let n = spaces[t + 1];
                let rows = s.states * s.private1 * s.private2 * s.actions1 * s.actions2;
                let width = n.states * n.private1 * n.private2 * s.increments;
                let data = (0..rows).flat_map(|_| simplex(r, width)).collect();
                Tensor::from_vec(
                    &[s.states, s.private1, s.private2, s.actions1, s.actions2, n.states, n.private1, n.private2, s.increments],
                    data,
                )
                .unwrap()
            });
            let n = s.states * s.actions1 * s.actions2;
            Stage {
                spaces: s,
                kernel,
                cost: Tensor::from_vec(&[s.states, s.actions1, s.actions2], (0..n).map(|_| r.random::<f64>()).collect()).unwrap(),
                labels: None,
            }
        })
        .collect();
    let s0 = spaces[0];
    let initial = Tensor::from_vec(&[s0.states, s0.private1, s0.private2], simplex(r, s0.belief_len())).unwrap();
    GameDefinition::new(stages, initial).unwrap()
}

pub fn spaces(states: usize, a1: usize, a2: usize, p1: usize, p2: usize, z: usize) -> StageSpaces {
    StageSpaces {
        states,
        actions1: a1,
        actions2: a2,
        private1: p1,
        private2: p2,
        increments: z,
    }
}

/// Behavioral strategy with random rows on every reachable information
/// realization of `player`.
pub fn random_strategy(r: &mut ChaCha8Rng, g: &GameDefinition, player: usize) -> HistoryStrategy {
    HistoryStrategy::from_fn(g, player, HISTORY_CAP, |t, _, _| sparse_simplex(r, g.spaces(t).actions(player))).unwrap()
}

/// Per stage, the probability of `(common history, state, u1, u2)`.
pub fn marginal_c_x_u(d: &PlayDistribution) -> Vec<BTreeMap<(Vec<usize>, usize, usize, usize), f64>> {
    d.iter()
        .map(|m| {
            let mut out = BTreeMap::new();
            for ((c, x, _, _, u1, u2), p) in m {
                *out.entry((c.clone(), *x, *u1, *u2)).or_insert(0.0) += p;
            }
            out
        })
        .collect()
}

/// Largest absolute difference between two keyed measures (missing keys
/// count as zero).
pub fn max_diff<K: Ord + Clone>(a: &BTreeMap<K, f64>, b: &BTreeMap<K, f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for (k, v) in a {
        worst = worst.max((v - b.get(k).copied().unwrap_or(0.0)).abs());
    }
    for (k, v) in b {
        worst = worst.max((v - a.get(k).copied().unwrap_or(0.0)).abs());
    }
    worst
}

/// Solves the square system `m x = b` by Gaussian elimination with partial
/// pivoting; `None` when (numerically) singular.
pub fn solve_square(mut m: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col].abs() < 1e-11 {
            return None;
        }
        m.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            if f != 0.0 {
                for k in col..n {
                    m[row][k] -= f * m[col][k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| m[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / m[row][row];
    }
    Some(x)
}

fn next_subset(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    for i in (0..k).rev() {
        if idx[i] < n - k + i {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Calls `f` with every `k`-subset of `0..n` in lexicographic order.
pub fn for_each_subset(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        if k == 0 || !next_subset(&mut idx, n) {
            break;
        }
    }
}

/// Optimum of `max c·v, A v ≤ b, v ≥ 0` (bounded and feasible) by
/// enumerating every choice of `n` tight constraints among the `m + n`
/// rows, solving for the vertex and keeping the best feasible one.
pub fn vertex_enumeration(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> Option<f64> {
    let n = c.len();
    let mut rows: Vec<(Vec<f64>, f64)> = a.iter().cloned().zip(b.iter().copied()).collect();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = -1.0;
        rows.push((e, 0.0));
    }
    let mut best: Option<f64> = None;
    for_each_subset(rows.len(), n, |s| {
        let m = s.iter().map(|&i| rows[i].0.clone()).collect();
        let rhs = s.iter().map(|&i| rows[i].1).collect();
        let Some(v) = solve_square(m, rhs) else {
            return;
        };
        let feasible = rows
            .iter()
            .all(|(r, bi)| r.iter().zip(&v).map(|(x, y)| x * y).sum::<f64>() <= bi + 1e-9);
        if feasible {
            let val: f64 = c.iter().zip(&v).map(|(x, y)| x * y).sum();
            best = Some(best.map_or(val, |b: f64| b.max(val)));
        }
    });
    best
}

pub fn lp_from_dense(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> LinearProgram {
    let mut lp = LinearProgram::new(c.len());
    for (j, &cj) in c.iter().enumerate() {
        lp.set_objective(j, cj);
    }
    for (row, &bi) in a.iter().zip(b) {
        lp.add_le_dense(row.clone(), bi);
    }
    lp
}

/// Random bounded LP with the origin feasible: the first row is strictly
/// positive, the rest mixed in sign.
pub fn random_bounded_lp(r: &mut ChaCha8Rng, m: usize, n: usize) -> (Vec<f64>, Vec<Vec<f64>>, Vec<f64>) {
    let c = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
    let a = (0..m)
        .map(|i| {
            (0..n)
                .map(|_| if i == 0 { r.random_range(0.1..1.0) } else { r.random_range(-0.5..1.0) })
                .collect()
        })
        .collect();
    let b = (0..m).map(|_| r.random_range(0.5..2.0)).collect();
    (c, a, b)
}

/// Value of the matrix game `min_p max_q pᵀ M q` by support enumeration:
/// for equal-size supports, solve the indifference systems of both players
/// and keep the first pair that is a Nash equilibrium. Assumes a
/// nondegenerate matrix.
pub fn support_enumeration(m: &[Vec<f64>]) -> Option<f64> {
    let (rows, cols) = (m.len(), m[0].len());
    for k in 1..=rows.min(cols) {
        let mut found = None;
        for_each_subset(rows, k, |si| {
            if found.is_some() {
                return;
            }
            for_each_subset(cols, k, |sj| {
                if found.is_some() {
                    return;
                }
                // Row weights p on si and value v: Σ_i p_i M[i][j] = v for j in sj, Σ p = 1.
                let mut a = Vec::new();
                let mut b = Vec::new();
                for &j in sj {
                    let mut row: Vec<f64> = si.iter().map(|&i| m[i][j]).collect();
                    row.push(-1.0);
                    a.push(row);
                    b.push(0.0);
                }
                let mut ones = vec![1.0; k];
                ones.push(0.0);
                a.push(ones.clone());
                b.push(1.0);
                let Some(pv) = solve_square(a, b) else { return };
                let mut a = Vec::new();
                let mut b = Vec::new();
                for &i in si {
                    let mut row: Vec<f64> = sj.iter().map(|&j| m[i][j]).collect();
                    row.push(-1.0);
                    a.push(row);
                    b.push(0.0);
                }
                a.push(ones);
                b.push(1.0);
                let Some(qv) = solve_square(a, b) else { return };
                let v = pv[k];
                if pv[..k].iter().chain(&qv[..k]).any(|&w| w < -1e-12) {
                    return;
                }
                let mut p = vec![0.0; rows];
                si.iter().zip(&pv).for_each(|(&i, &w)| p[i] = w);
                let mut q = vec![0.0; cols];
                sj.iter().zip(&qv).for_each(|(&j, &w)| q[j] = w);
                let col_best = (0..cols)
                    .map(|j| (0..rows).map(|i| p[i] * m[i][j]).sum::<f64>())
                    .fold(f64::NEG_INFINITY, f64::max);
                let row_best = (0..rows)
                    .map(|i| (0..cols).map(|j| q[j] * m[i][j]).sum::<f64>())
                    .fold(f64::INFINITY, f64::min);
                if col_best <= v + 1e-10 && row_best >= v - 1e-10 {
                    found = Some(v);
                }
            });
        });
        if found.is_some() {
            return found;
        }
    }
    None
}

pub fn random_matrix(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|_| (0..cols).map(|_| r.random_range(-1.0..1.0)).collect())
        .collect()
}

/// Maximin value of a one-sided stage by brute force over player 2's mixed
/// action on a `1/k` grid (inner minimum over player 1's pure actions per
/// state is exact), for a final stage.
pub fn terminal_maximin_grid(pi: &[f64], g: &OneSidedGame, t: usize, k: u32) -> f64 {
    let n2 = g.actions2(t);
    let mut best = f64::NEG_INFINITY;
    for q in asymgame::grid::compositions(n2, k) {
        let q: Vec<f64> = q.iter().map(|&c| c as f64 / k as f64).collect();
        let v: f64 = (0..g.states(t))
            .map(|x| {
                pi[x]
                    * (0..g.actions1(t))
                        .map(|u1| (0..n2).map(|u2| q[u2] * g.cost(t).get(&[x, u1, u2])).sum::<f64>())
                        .fold(f64::INFINITY, f64::min)
            })
            .sum();
        best = best.max(v);
    }
    best
}
