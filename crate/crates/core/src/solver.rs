//! Backward induction: point-based solving of one-sided games, grid
//! estimates of the upper and lower values of general games, and a
//! regression-based approximate solver.

use std::collections::{BTreeMap, HashMap};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::belief::{all_next_beliefs, one_sided_next_belief, one_sided_q, Belief, ZERO_PROB};
use crate::error::{Error, Result};
use crate::grid::freudenthal;
use crate::model::{GameDefinition, OneSidedGame};
use crate::stage::{
    general_stage_bounds, general_stage_game_t, one_sided_backup_maximin, one_sided_backup_minmax, pwlc_eval,
    AlphaSet, GRID_PAIR_CAP, PURE_PRESCRIPTION_CAP,
};

/// Size limits applied before any exponential work starts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Caps {
    pub states: usize,
    pub horizon: usize,
    pub tree_nodes: usize,
    pub pure_prescriptions: usize,
    pub grid_pairs: usize,
    pub grid_points: usize,
    pub reachable_beliefs: usize,
    pub histories: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            states: 8,
            horizon: 4,
            tree_nodes: 1_000_000,
            pure_prescriptions: PURE_PRESCRIPTION_CAP,
            grid_pairs: GRID_PAIR_CAP,
            grid_points: 200_000,
            reachable_beliefs: 5_000,
            histories: 1_000_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegressionConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Rounds of assign-and-refit before the subgradient epochs.
    pub refit_rounds: usize,
    pub restarts: usize,
}

impl Default for RegressionConfig {
    fn default() -> Self {
        RegressionConfig {
            epochs: 200,
            learning_rate: 0.5,
            refit_rounds: 50,
            restarts: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub samples_per_stage: usize,
    /// Random samples per stage in the preliminary pass that fixes the
    /// reachable beliefs. Independent of `samples_per_stage`.
    pub preliminary_samples: usize,
    pub seed: u64,
    pub pieces: usize,
    pub belief_grid: u32,
    pub prescription_grid: u32,
    pub regression: RegressionConfig,
    pub caps: Caps,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            samples_per_stage: 200,
            preliminary_samples: 20,
            seed: 0,
            pieces: 4,
            belief_grid: 25,
            prescription_grid: 10,
            regression: RegressionConfig::default(),
            caps: Caps::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleKind {
    Vertex,
    Reachable,
    Random,
}

/// Where an alpha vector came from: the backup at sample `sample` of its stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaProvenance {
    pub sample: usize,
    pub kind: SampleKind,
    pub backup_value: f64,
    pub lp_iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: usize,
    pub vertices: usize,
    pub reachable: usize,
    pub random: usize,
    pub vectors: usize,
    pub lp_iterations: usize,
}

/// Per-stage alpha sets `A_0..A_{T-1}` plus the terminal `{0}` at index `T`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OneSidedValueFunction {
    alpha: Vec<AlphaSet>,
    samples: Vec<Vec<Vec<f64>>>,
    provenance: Vec<Vec<AlphaProvenance>>,
    reports: Vec<StageReport>,
    reachable_truncated: bool,
}

impl OneSidedValueFunction {
    pub fn horizon(&self) -> usize {
        self.alpha.len() - 1
    }

    /// `A_t`; `t = T` gives the zero set.
    pub fn alpha(&self, t: usize) -> &AlphaSet {
        &self.alpha[t]
    }

    /// Continuation set used by the stage-t backup (`None` at the final stage).
    pub fn next(&self, t: usize) -> Option<&AlphaSet> {
        (t + 1 < self.horizon()).then(|| &self.alpha[t + 1])
    }

    pub fn samples(&self, t: usize) -> &[Vec<f64>] {
        &self.samples[t]
    }

    pub fn provenance(&self, t: usize) -> &[AlphaProvenance] {
        &self.provenance[t]
    }

    pub fn reports(&self) -> &[StageReport] {
        &self.reports
    }

    pub fn reachable_truncated(&self) -> bool {
        self.reachable_truncated
    }

    pub fn eval(&self, pi: &Belief) -> Result<f64> {
        pwlc_eval(&self.alpha[pi.stage()], pi)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OneSidedSolution {
    pub value: f64,
    pub value_function: OneSidedValueFunction,
}

fn check_caps_one_sided(g: &OneSidedGame, caps: &Caps) -> Result<()> {
    if g.horizon() > caps.horizon {
        return Err(Error::CapExceeded {
            what: "horizon",
            limit: caps.horizon,
            actual: g.horizon(),
        });
    }
    let nx = (0..g.horizon()).map(|t| g.states(t)).max().unwrap_or(0);
    if nx > caps.states {
        return Err(Error::CapExceeded {
            what: "states",
            limit: caps.states,
            actual: nx,
        });
    }
    Ok(())
}

/// Uniform samples from the simplex of dimension `n`, reproducible per
/// `(seed, stage)`; the first `k` draws do not depend on how many follow.
pub fn dirichlet_samples(seed: u64, stage: usize, n: usize, count: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stage as u64 + 1);
    (0..count)
        .map(|_| {
            let e: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(Exp1)).collect();
            let s: f64 = e.iter().sum();
            e.into_iter().map(|v| v / s).collect()
        })
        .collect()
}

fn with_context(e: Error, t: usize, b: &[f64]) -> Error {
    match e {
        Error::Lp { status, context } => Error::Lp {
            status,
            context: format!("stage {t}, belief {b:?}: {context}"),
        },
        e => e,
    }
}

fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

fn backward_pass(g: &OneSidedGame, sample_sets: Vec<Vec<(Vec<f64>, SampleKind)>>, truncated: bool) -> Result<OneSidedValueFunction> {
    let horizon = g.horizon();
    let mut alpha: Vec<Option<AlphaSet>> = vec![None; horizon + 1];
    alpha[horizon] = Some(AlphaSet::zero(horizon, g.states(horizon - 1)));
    let mut provenance = vec![Vec::new(); horizon];
    let mut reports = Vec::with_capacity(horizon);
    for t in (0..horizon).rev() {
        let next = if t + 1 < horizon { alpha[t + 1].as_ref() } else { None };
        let samples = &sample_sets[t];
        let sols = samples
            .par_iter()
            .map(|(b, _)| {
                let pi = Belief::over_states(t, b.clone())?;
                one_sided_backup_maximin(&pi, next, g, t).map_err(|e| with_context(e, t, b))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut seen = std::collections::HashSet::new();
        let mut vectors = Vec::new();
        let mut iters = 0;
        for (i, (s, (_, kind))) in sols.iter().zip(samples).enumerate() {
            iters += s.lp_iterations;
            if seen.insert(bits(&s.nu)) {
                vectors.push(s.nu.clone());
                provenance[t].push(AlphaProvenance {
                    sample: i,
                    kind: *kind,
                    backup_value: s.value,
                    lp_iterations: s.lp_iterations,
                });
            }
        }
        let count = |k: SampleKind| samples.iter().filter(|(_, kk)| *kk == k).count();
        reports.push(StageReport {
            stage: t,
            vertices: count(SampleKind::Vertex),
            reachable: count(SampleKind::Reachable),
            random: count(SampleKind::Random),
            vectors: vectors.len(),
            lp_iterations: iters,
        });
        alpha[t] = Some(AlphaSet::new(t, vectors)?);
    }
    reports.reverse();
    Ok(OneSidedValueFunction {
        alpha: alpha.into_iter().map(|a| a.expect("every stage filled")).collect(),
        samples: sample_sets
            .into_iter()
            .map(|s| s.into_iter().map(|(b, _)| b).collect())
            .collect(),
        provenance,
        reports,
        reachable_truncated: truncated,
    })
}

fn sample_sets(
    g: &OneSidedGame,
    reachable: &[Vec<Vec<f64>>],
    random: usize,
    seed: u64,
) -> Vec<Vec<(Vec<f64>, SampleKind)>> {
    (0..g.horizon())
        .map(|t| {
            let n = g.states(t);
            let mut out = Vec::new();
            let mut seen = std::collections::HashSet::new();
            let mut push = |b: Vec<f64>, k: SampleKind, out: &mut Vec<(Vec<f64>, SampleKind)>| {
                if seen.insert(bits(&b)) {
                    out.push((b, k));
                }
            };
            for i in 0..n {
                let mut v = vec![0.0; n];
                v[i] = 1.0;
                push(v, SampleKind::Vertex, &mut out);
            }
            for b in reachable.get(t).into_iter().flatten() {
                push(b.clone(), SampleKind::Reachable, &mut out);
            }
            for b in dirichlet_samples(seed, t, n, random) {
                push(b, SampleKind::Random, &mut out);
            }
            out
        })
        .collect()
}

/// Beliefs reachable from the initial belief when player 1 follows the
/// min-max prescriptions of `vf`. Truncated at `cap` per stage.
pub fn reachable_beliefs(g: &OneSidedGame, vf: &OneSidedValueFunction, cap: usize) -> Result<(Vec<Vec<Vec<f64>>>, bool)> {
    let mut out = vec![vec![g.initial().to_vec()]];
    let mut truncated = false;
    for t in 0..g.horizon() - 1 {
        let mut next: Vec<Vec<f64>> = Vec::new();
        let mut seen = std::collections::HashSet::new();
        'outer: for b in &out[t] {
            let pi = Belief::over_states(t, b.clone())?;
            let g1 = one_sided_backup_minmax(&pi, vf.next(t), g, t)
                .map_err(|e| with_context(e, t, b))?
                .gamma1;
            for z in 0..g.increments(t) {
                let r: f64 = one_sided_q(&pi, &g1, z, g)?.iter().sum();
                if r <= ZERO_PROB {
                    continue;
                }
                let nb = one_sided_next_belief(&pi, &g1, z, g)?.direction().to_vec();
                if seen.insert(bits(&nb)) {
                    if next.len() == cap {
                        truncated = true;
                        break 'outer;
                    }
                    next.push(nb);
                }
            }
        }
        out.push(next);
    }
    Ok((out, truncated))
}

/// Point-based backward induction. Each stage backs up the simplex
/// vertices, the beliefs reachable under a preliminary pass, and
/// `samples_per_stage` Dirichlet(1) draws; the supporting vectors form
/// `A_t`. The returned value lower-bounds the game value.
pub fn solve_one_sided(g: &OneSidedGame, cfg: &SolverConfig) -> Result<OneSidedSolution> {
    check_caps_one_sided(g, &cfg.caps)?;
    let prelim = backward_pass(g, sample_sets(g, &[], cfg.preliminary_samples, cfg.seed), false)?;
    let (reach, truncated) = reachable_beliefs(g, &prelim, cfg.caps.reachable_beliefs)?;
    let vf = backward_pass(g, sample_sets(g, &reach, cfg.samples_per_stage, cfg.seed), truncated)?;
    let value = vf.eval(&Belief::initial_one_sided(g))?;
    Ok(OneSidedSolution {
        value,
        value_function: vf,
    })
}

/// Memoized estimates on the `1/k` belief grid of one stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridEntry {
    pub counts: Vec<u32>,
    pub upper: f64,
    pub lower: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneralValueTables {
    pub belief_grid: u32,
    pub prescription_grid: u32,
    pub interpolation: String,
    /// Stage 0 holds the initial belief only (off-grid, counts empty);
    /// later stages hold the grid points the recursion needed.
    pub stages: Vec<Vec<GridEntry>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneralEstimate {
    /// Estimate of the upper value (min-max recursion).
    pub minmax: f64,
    /// Estimate of the lower value (max-min recursion).
    pub maxmin: f64,
    pub tables: GeneralValueTables,
}

fn interpolate(table: &HashMap<Vec<u32>, (f64, f64)>, b: &Belief, k: u32) -> (f64, f64) {
    let (mut u, mut l) = (0.0, 0.0);
    for (v, w) in freudenthal(b.direction(), k) {
        let (vu, vl) = table.get(&v).expect("grid point collected in the forward sweep");
        u += w * vu;
        l += w * vl;
    }
    (b.mass() * u, b.mass() * l)
}

fn grid_belief(t: usize, shape: [usize; 3], counts: &[u32], k: u32) -> Belief {
    let d: Vec<f64> = counts.iter().map(|&c| c as f64 / k as f64).collect();
    Belief::normalized(t, shape, d).expect("grid counts sum to k > 0")
}

/// Grid estimates of the upper and lower values. Continuation values are
/// barycentric interpolations on the `1/belief_grid` simplex grid; stage
/// problems are evaluated on `1/prescription_grid` prescription grids, and
/// the final stage is solved exactly over pure prescriptions. Only grid
/// points reachable by interpolation from the initial belief are evaluated.
pub fn solve_general_bounds(g: &GameDefinition, belief_grid: u32, prescription_grid: u32, caps: &Caps) -> Result<GeneralEstimate> {
    if belief_grid == 0 {
        return Err(Error::InvalidArgument("belief grid resolution must be positive".into()));
    }
    if g.horizon() > caps.horizon {
        return Err(Error::CapExceeded {
            what: "horizon",
            limit: caps.horizon,
            actual: g.horizon(),
        });
    }
    let horizon = g.horizon();
    let shape_of = |t: usize| {
        let s = g.spaces(t);
        [s.states, s.private1, s.private2]
    };
    let pi0 = Belief::initial(g);

    // Forward sweep: grid points needed at each later stage.
    let mut points: Vec<Vec<Belief>> = vec![vec![pi0.clone()]];
    let mut keys: Vec<Vec<Vec<u32>>> = vec![vec![Vec::new()]];
    for t in 0..horizon - 1 {
        let s = g.spaces(t);
        let grid1 = crate::stage::prescription_grid(t, 1, s.private1, s.actions1, prescription_grid);
        let grid2 = crate::stage::prescription_grid(t, 2, s.private2, s.actions2, prescription_grid);
        let pairs = grid1.len().saturating_mul(grid2.len());
        if pairs > caps.grid_pairs {
            return Err(Error::CapExceeded {
                what: "prescription grid pairs",
                limit: caps.grid_pairs,
                actual: pairs,
            });
        }
        let needed: Vec<Vec<Vec<u32>>> = points[t]
            .par_iter()
            .map(|pi| -> Result<Vec<Vec<u32>>> {
                let mut out = Vec::new();
                for g1 in &grid1 {
                    for g2 in &grid2 {
                        let (m, beliefs) = all_next_beliefs(pi, g1, g2, g)?;
                        for (mz, b) in m.iter().zip(&beliefs) {
                            if *mz > ZERO_PROB {
                                out.extend(freudenthal(b.direction(), belief_grid).into_iter().map(|(v, _)| v));
                            }
                        }
                    }
                }
                out.sort_unstable();
                out.dedup();
                Ok(out)
            })
            .collect::<Result<_>>()?;
        let mut all: Vec<Vec<u32>> = needed.into_iter().flatten().collect();
        all.sort_unstable();
        all.dedup();
        if all.len() > caps.grid_points {
            return Err(Error::CapExceeded {
                what: "belief grid points",
                limit: caps.grid_points,
                actual: all.len(),
            });
        }
        points.push(all.iter().map(|c| grid_belief(t + 1, shape_of(t + 1), c, belief_grid)).collect());
        keys.push(all);
    }

    // Backward sweep over the collected points.
    let mut tables: Vec<HashMap<Vec<u32>, (f64, f64)>> = vec![HashMap::new(); horizon];
    for t in (0..horizon).rev() {
        let vals: Vec<(f64, f64)> = if t + 1 == horizon {
            points[t]
                .par_iter()
                .map(|pi| general_stage_game_t(pi, g, t, caps.pure_prescriptions).map(|s| (s.value, s.value)))
                .collect::<Result<_>>()?
        } else {
            let next = &tables[t + 1];
            let up = |b: &Belief| interpolate(next, b, belief_grid).0;
            let lo = |b: &Belief| interpolate(next, b, belief_grid).1;
            points[t]
                .iter()
                .map(|pi| -> Result<(f64, f64)> {
                    let u = general_stage_bounds(pi, &up, g, t, prescription_grid, caps.grid_pairs)?.minmax;
                    let l = general_stage_bounds(pi, &lo, g, t, prescription_grid, caps.grid_pairs)?.maxmin;
                    Ok((u, l))
                })
                .collect::<Result<_>>()?
        };
        tables[t] = keys[t].iter().cloned().zip(vals).collect();
    }
    let (minmax, maxmin) = tables[0][&Vec::new()];
    let stages = keys
        .iter()
        .zip(&tables)
        .map(|(ks, tab)| {
            ks.iter()
                .map(|c| {
                    let (upper, lower) = tab[c];
                    GridEntry {
                        counts: c.clone(),
                        upper,
                        lower,
                    }
                })
                .collect()
        })
        .collect();
    Ok(GeneralEstimate {
        minmax,
        maxmin,
        tables: GeneralValueTables {
            belief_grid,
            prescription_grid,
            interpolation: "freudenthal-barycentric".into(),
            stages,
        },
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionStage {
    pub stage: usize,
    pub mse: f64,
    pub epochs: usize,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    /// Fitted `A_0..A_{T-1}` and the terminal `{0}`.
    pub alpha: Vec<AlphaSet>,
    pub stages: Vec<RegressionStage>,
}

impl RegressionResult {
    pub fn eval(&self, pi: &Belief) -> Result<f64> {
        pwlc_eval(&self.alpha[pi.stage()], pi)
    }
}

fn max_affine(w: &[Vec<f64>], p: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (j, wj) in w.iter().enumerate() {
        let s: f64 = wj.iter().zip(p).map(|(a, b)| a * b).sum();
        if s > best.1 {
            best = (j, s);
        }
    }
    best
}

fn mse(w: &[Vec<f64>], xs: &[Vec<f64>], ys: &[f64]) -> f64 {
    xs.iter()
        .zip(ys)
        .map(|(x, y)| (max_affine(w, x).1 - y).powi(2))
        .sum::<f64>()
        / xs.len() as f64
}

fn least_squares(xs: &[&Vec<f64>], ys: &[f64], n: usize) -> Option<Vec<f64>> {
    if xs.is_empty() {
        return None;
    }
    let a = DMatrix::from_fn(xs.len(), n, |i, j| xs[i][j]);
    let b = DVector::from_column_slice(ys);
    let sol = a.svd(true, true).solve(&b, 1e-12).ok()?;
    Some(sol.iter().copied().collect())
}

/// Least-squares fit of `π ↦ max_j ⟨w_j, π⟩` with `m` pieces: contiguous
/// initial partitions along seeded random directions, alternating
/// assignment and per-piece least squares, then subgradient epochs. The best
/// iterate over restarts is returned.
pub fn fit_max_affine(
    xs: &[Vec<f64>],
    ys: &[f64],
    m: usize,
    cfg: &RegressionConfig,
    seed: u64,
    stage: usize,
) -> Result<(Vec<Vec<f64>>, f64, usize)> {
    if m == 0 {
        return Err(Error::InvalidArgument("at least one piece is required".into()));
    }
    let n = xs[0].len();
    let all: Vec<&Vec<f64>> = xs.iter().collect();
    let global = least_squares(&all, ys, n).unwrap_or_else(|| vec![0.0; n]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1_000 + stage as u64);
    let mut best: Option<(Vec<Vec<f64>>, f64, usize)> = None;
    for _ in 0..cfg.restarts.max(1) {
        let dir: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
        let mut order: Vec<usize> = (0..xs.len()).collect();
        let key = |i: usize| xs[i].iter().zip(&dir).map(|(a, b)| a * b).sum::<f64>();
        order.sort_by(|&a, &b| key(a).total_cmp(&key(b)).then(a.cmp(&b)));
        let chunk = xs.len().div_ceil(m);
        let mut w: Vec<Vec<f64>> = (0..m)
            .map(|j| {
                let idx: Vec<usize> = order.iter().copied().skip(j * chunk).take(chunk).collect();
                let px: Vec<&Vec<f64>> = idx.iter().map(|&i| &xs[i]).collect();
                let py: Vec<f64> = idx.iter().map(|&i| ys[i]).collect();
                if px.len() >= n {
                    least_squares(&px, &py, n).unwrap_or_else(|| global.clone())
                } else {
                    global.clone()
                }
            })
            .collect();
        for _ in 0..cfg.refit_rounds {
            let mut groups: Vec<Vec<usize>> = vec![Vec::new(); m];
            for (i, x) in xs.iter().enumerate() {
                groups[max_affine(&w, x).0].push(i);
            }
            let mut changed = false;
            for (j, grp) in groups.iter().enumerate() {
                if grp.len() < n {
                    continue;
                }
                let px: Vec<&Vec<f64>> = grp.iter().map(|&i| &xs[i]).collect();
                let py: Vec<f64> = grp.iter().map(|&i| ys[i]).collect();
                if let Some(nw) = least_squares(&px, &py, n) {
                    let before = mse(&w, xs, ys);
                    let old = std::mem::replace(&mut w[j], nw);
                    if mse(&w, xs, ys) > before {
                        w[j] = old;
                    } else if w[j] != old {
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let (w, err, epochs) = subgradient(w, xs, ys, cfg, stage)?;
        if best.as_ref().is_none_or(|b| err < b.1) {
            best = Some((w, err, epochs));
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Relative and absolute slack below which an epoch does not count as
/// rising in divergence detection.
const RISE_TOL: f64 = 1e-9;

fn subgradient(
    mut w: Vec<Vec<f64>>,
    xs: &[Vec<f64>],
    ys: &[f64],
    cfg: &RegressionConfig,
    stage: usize,
) -> Result<(Vec<Vec<f64>>, f64, usize)> {
    let mut cur = mse(&w, xs, ys);
    let mut best = (w.clone(), cur);
    let mut rising = 0;
    let mut epochs = 0;
    for epoch in 0..cfg.epochs {
        if best.1 <= 1e-30 {
            break;
        }
        epochs = epoch + 1;
        // Full-batch subgradient of the mean squared error; each sample
        // pulls only on the piece attaining the max.
        let scale = 2.0 / xs.len() as f64;
        let mut grad = vec![vec![0.0; w[0].len()]; w.len()];
        for (x, y) in xs.iter().zip(ys) {
            let (j, f) = max_affine(&w, x);
            let r = f - y;
            for (gi, xi) in grad[j].iter_mut().zip(x) {
                *gi += scale * r * xi;
            }
        }
        for (wj, gj) in w.iter_mut().zip(&grad) {
            for (wi, gi) in wj.iter_mut().zip(gj) {
                *wi -= cfg.learning_rate * gi;
            }
        }
        let next = mse(&w, xs, ys);
        if !next.is_finite() {
            return Err(Error::Divergence {
                stage,
                epochs,
                mse: next,
            });
        }
        if next > cur * (1.0 + RISE_TOL) + RISE_TOL {
            rising += 1;
            if rising >= 10 {
                return Err(Error::Divergence {
                    stage,
                    epochs,
                    mse: next,
                });
            }
        } else {
            rising = 0;
        }
        cur = next;
        if cur < best.1 {
            best = (w.clone(), cur);
        }
    }
    Ok((best.0, best.1, epochs))
}

/// Approximate solver that keeps at most `cfg.pieces` alpha vectors per
/// stage: `samples_per_stage` Dirichlet beliefs are backed up against the
/// fitted next-stage set with the min-max stage program and a max-of-affine
/// model is fitted to the backed-up values.
pub fn solve_regression(g: &OneSidedGame, cfg: &SolverConfig) -> Result<RegressionResult> {
    check_caps_one_sided(g, &cfg.caps)?;
    if cfg.samples_per_stage == 0 {
        return Err(Error::InvalidArgument("regression needs at least one sample per stage".into()));
    }
    let horizon = g.horizon();
    let mut alpha: Vec<Option<AlphaSet>> = vec![None; horizon + 1];
    alpha[horizon] = Some(AlphaSet::zero(horizon, g.states(horizon - 1)));
    let mut stages = Vec::with_capacity(horizon);
    for t in (0..horizon).rev() {
        let next = if t + 1 < horizon { alpha[t + 1].as_ref() } else { None };
        let n = g.states(t);
        let mut xs: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let mut v = vec![0.0; n];
                v[i] = 1.0;
                v
            })
            .collect();
        xs.extend(dirichlet_samples(cfg.seed, t, n, cfg.samples_per_stage));
        let ys = xs
            .par_iter()
            .map(|b| {
                let pi = Belief::over_states(t, b.clone())?;
                one_sided_backup_minmax(&pi, next, g, t)
                    .map(|s| s.value)
                    .map_err(|e| with_context(e, t, b))
            })
            .collect::<Result<Vec<f64>>>()?;
        let (w, err, epochs) = fit_max_affine(&xs, &ys, cfg.pieces, &cfg.regression, cfg.seed, t)?;
        let mut set = AlphaSet::new(t, w)?;
        set.dedup();
        alpha[t] = Some(set);
        stages.push(RegressionStage {
            stage: t,
            mse: err,
            epochs,
            samples: xs.len(),
        });
    }
    stages.reverse();
    Ok(RegressionResult {
        alpha: alpha.into_iter().map(|a| a.expect("every stage filled")).collect(),
        stages,
    })
}

/// Summary of per-stage sample counts, for reports.
pub fn sample_counts(vf: &OneSidedValueFunction) -> BTreeMap<usize, usize> {
    (0..vf.horizon()).map(|t| (t, vf.samples(t).len())).collect()
}
