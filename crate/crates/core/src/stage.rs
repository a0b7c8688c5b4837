//! Stage problems of the dynamic program: expected stage cost, max-of-linear
//! value representations, one-sided stage linear programs and estimators for
//! general stages.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::belief::{all_next_beliefs, Belief, Prescription, ZERO_PROB};
use crate::error::{Error, Result};
use crate::grid::{composition_count, compositions};
use crate::lp::{solve_lp, solve_matrix_game, Bound, LinearProgram, LpStatus};
use crate::model::{GameDefinition, OneSidedGame};
use crate::tensor::Tensor;

/// Default cap on pure prescriptions per player in the terminal matrix game.
pub const PURE_PRESCRIPTION_CAP: usize = 4096;
/// Default cap on prescription-grid pairs evaluated by the stage estimator.
pub const GRID_PAIR_CAP: usize = 4_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaVector {
    pub stage: usize,
    pub values: Vec<f64>,
}

/// Finite set of linear functions over `X_t`; represents `π ↦ max_ℓ ⟨ℓ, π⟩`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaSet {
    stage: usize,
    vectors: Vec<Vec<f64>>,
}

impl AlphaSet {
    pub fn new(stage: usize, vectors: Vec<Vec<f64>>) -> Result<Self> {
        let dim = vectors.first().map_or(0, Vec::len);
        if vectors.is_empty() || dim == 0 {
            return Err(Error::InvalidArgument("alpha set must be nonempty".into()));
        }
        if vectors.iter().any(|v| v.len() != dim || v.iter().any(|x| !x.is_finite())) {
            return Err(Error::shape("alpha vectors must share a length and be finite"));
        }
        Ok(AlphaSet { stage, vectors })
    }

    /// `{0}` over `dim` states.
    pub fn zero(stage: usize, dim: usize) -> Self {
        AlphaSet {
            stage,
            vectors: vec![vec![0.0; dim]],
        }
    }

    pub fn stage(&self) -> usize {
        self.stage
    }

    pub fn dim(&self) -> usize {
        self.vectors[0].len()
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn alpha(&self, i: usize) -> AlphaVector {
        AlphaVector {
            stage: self.stage,
            values: self.vectors[i].clone(),
        }
    }

    /// `max_ℓ ⟨ℓ, v⟩` for a raw vector.
    pub fn eval(&self, v: &[f64]) -> f64 {
        self.vectors
            .iter()
            .map(|l| l.iter().zip(v).map(|(a, b)| a * b).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Index of the first maximizing vector.
    pub fn argmax(&self, v: &[f64]) -> usize {
        let mut best = (0, f64::NEG_INFINITY);
        for (i, l) in self.vectors.iter().enumerate() {
            let s: f64 = l.iter().zip(v).map(|(a, b)| a * b).sum();
            if s > best.1 {
                best = (i, s);
            }
        }
        best.0
    }

    /// Removes bitwise-identical vectors, keeping first occurrences.
    pub fn dedup(&mut self) {
        let mut seen = std::collections::HashSet::new();
        self.vectors
            .retain(|v| seen.insert(v.iter().map(|x| x.to_bits()).collect::<Vec<_>>()));
    }
}

/// `max_ℓ ⟨ℓ, π⟩`, scaled by the belief's mass.
pub fn pwlc_eval(a: &AlphaSet, pi: &Belief) -> Result<f64> {
    if a.stage != pi.stage() {
        return Err(Error::StageMismatch {
            expected: a.stage,
            found: pi.stage(),
        });
    }
    if a.dim() != pi.len() {
        return Err(Error::shape(format!(
            "alpha vectors have length {}, belief has {}",
            a.dim(),
            pi.len()
        )));
    }
    Ok(pi.mass() * a.eval(pi.direction()))
}

/// `Σ π(x,p1,p2) γ1(p1;u1) γ2(p2;u2) c(x,u1,u2)`.
pub fn expected_stage_cost(pi: &Belief, g1: &Prescription, g2: &Prescription, cost: &Tensor<f64>) -> Result<f64> {
    let [nx, np1, np2] = pi.shape();
    let cs = cost.shape();
    if cs.len() != 3
        || cs[0] != nx
        || g1.rows() != np1
        || g2.rows() != np2
        || g1.actions() != cs[1]
        || g2.actions() != cs[2]
    {
        return Err(Error::shape("belief, prescriptions and cost tensor disagree"));
    }
    let mut total = 0.0;
    for x in 0..nx {
        for p1 in 0..np1 {
            for p2 in 0..np2 {
                let w = pi.get(x, p1, p2);
                if w == 0.0 {
                    continue;
                }
                let mut inner = 0.0;
                for u1 in 0..cs[1] {
                    let a = g1.get(p1, u1);
                    if a == 0.0 {
                        continue;
                    }
                    let row = cost.block(&[x, u1]);
                    let s: f64 = (0..cs[2]).map(|u2| g2.get(p2, u2) * row[u2]).sum();
                    inner += a * s;
                }
                total += w * inner;
            }
        }
    }
    Ok(total)
}

/// Solution of the one-sided maximin stage program.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageSolution {
    pub value: f64,
    /// Minimizer recovered from the multipliers of the `(x, u1)` rows; rows
    /// of zero-probability states are uniform.
    pub gamma1: Prescription,
    /// Player 2's action distribution.
    pub q: Vec<f64>,
    /// `lambda[u2][y2][ℓ]`, with `Σ_ℓ lambda[u2][y2][ℓ] = q[u2]`; empty at the
    /// final stage.
    pub lambda: Vec<Vec<Vec<f64>>>,
    /// Supporting vector: `⟨ν, π'⟩` lower-bounds the backup at every `π'`.
    pub nu: Vec<f64>,
    pub lp_iterations: usize,
}

fn check_one_sided_stage(pi: &Belief, next: Option<&AlphaSet>, g: &OneSidedGame, t: usize) -> Result<()> {
    if t >= g.horizon() {
        return Err(Error::InvalidArgument(format!("stage {t} beyond horizon {}", g.horizon())));
    }
    if pi.stage() != t {
        return Err(Error::StageMismatch {
            expected: t,
            found: pi.stage(),
        });
    }
    if pi.shape() != [g.states(t), 1, 1] {
        return Err(Error::shape(format!("belief shape {:?} does not match stage {t}", pi.shape())));
    }
    match (next, t + 1 < g.horizon()) {
        (Some(a), true) => {
            if a.stage() != t + 1 || a.dim() != g.states(t + 1) {
                return Err(Error::shape("next-stage alpha set has the wrong stage or dimension"));
            }
        }
        (None, true) => return Err(Error::InvalidArgument("non-final stage needs a next-stage alpha set".into())),
        (_, false) => {}
    }
    Ok(())
}

/// `W[x][u1][u2][y2][ℓ] = Σ_x' ℓ(x') P[x', y2 | x, u1, u2]`.
fn continuation_weights(next: &AlphaSet, g: &OneSidedGame, t: usize) -> Tensor<f64> {
    let (nx, nu1, nu2, ny) = (g.states(t), g.actions1(t), g.actions2(t), g.observations(t));
    let nl = next.len();
    let mut w = Tensor::zeros(&[nx, nu1, nu2, ny, nl]);
    for x in 0..nx {
        for u1 in 0..nu1 {
            for u2 in 0..nu2 {
                for y in 0..ny {
                    let row = g.joint_row(t, x, u1, u2, y);
                    let out = w.block_mut(&[x, u1, u2, y]);
                    for (l, v) in next.vectors().iter().enumerate() {
                        out[l] = v.iter().zip(row).map(|(a, b)| a * b).sum();
                    }
                }
            }
        }
    }
    w
}

fn lp_error(status: LpStatus, context: String) -> Error {
    Error::Lp { status, context }
}

/// Maximin stage program in compact form: player 2 picks `q` over its
/// actions and, per `(u2, y2)`, a split `λ` of `q(u2)` across next-stage
/// alpha vectors; `ν(x)` is the resulting worst case over player 1's action
/// at state `x`.
pub fn one_sided_backup_maximin(
    pi: &Belief,
    next: Option<&AlphaSet>,
    g: &OneSidedGame,
    t: usize,
) -> Result<StageSolution> {
    check_one_sided_stage(pi, next, g, t)?;
    let (nx, nu1, nu2) = (g.states(t), g.actions1(t), g.actions2(t));
    let cost = g.cost(t);
    let cont = match next {
        Some(a) if t + 1 < g.horizon() => Some((a, g.observations(t), continuation_weights(a, g, t))),
        _ => None,
    };
    let (ny, nl) = cont.as_ref().map_or((0, 0), |(a, ny, _)| (*ny, a.len()));
    let q0 = 0;
    let l0 = nu2;
    let nu0 = l0 + nu2 * ny * nl;
    let nvars = nu0 + nx;
    let lam = |u2: usize, y: usize, l: usize| l0 + (u2 * ny + y) * nl + l;

    let mut lp = LinearProgram::new(nvars);
    let pd = pi.direction();
    for x in 0..nx {
        lp.set_bound(nu0 + x, Bound::Free);
        lp.set_objective(nu0 + x, pd[x]);
    }
    for x in 0..nx {
        for u1 in 0..nu1 {
            let mut row = vec![0.0; nvars];
            row[nu0 + x] = 1.0;
            for u2 in 0..nu2 {
                row[q0 + u2] = -cost.get(&[x, u1, u2]);
            }
            if let Some((_, _, w)) = &cont {
                for u2 in 0..nu2 {
                    for y in 0..ny {
                        let ws = w.block(&[x, u1, u2, y]);
                        for l in 0..nl {
                            row[lam(u2, y, l)] = -ws[l];
                        }
                    }
                }
            }
            lp.add_le_dense(row, 0.0);
        }
    }
    let mut sum_q = vec![0.0; nvars];
    sum_q[q0..q0 + nu2].iter_mut().for_each(|v| *v = 1.0);
    lp.add_eq_dense(sum_q, 1.0);
    for u2 in 0..nu2 {
        for y in 0..ny {
            let mut row = vec![0.0; nvars];
            row[q0 + u2] = -1.0;
            for l in 0..nl {
                row[lam(u2, y, l)] = 1.0;
            }
            lp.add_eq_dense(row, 0.0);
        }
    }
    let sol = solve_lp(&lp)?;
    if !sol.is_optimal() {
        return Err(lp_error(sol.status, format!("maximin backup at stage {t}")));
    }
    let v = &sol.primal;
    let q: Vec<f64> = v[q0..q0 + nu2].iter().map(|x| x.max(0.0)).collect();
    let lambda: Vec<Vec<Vec<f64>>> = (0..if nl > 0 { nu2 } else { 0 })
        .map(|u2| {
            (0..ny)
                .map(|y| (0..nl).map(|l| v[lam(u2, y, l)].max(0.0)).collect())
                .collect()
        })
        .collect();

    // Tighten ν(x) to its largest feasible value for the chosen (q, λ); this
    // keeps feasibility and lifts coordinates of zero-probability states.
    let mut nu = vec![0.0; nx];
    for (x, nux) in nu.iter_mut().enumerate() {
        let mut best = f64::INFINITY;
        for u1 in 0..nu1 {
            let mut r: f64 = (0..nu2).map(|u2| q[u2] * cost.get(&[x, u1, u2])).sum();
            if let Some((_, _, w)) = &cont {
                for u2 in 0..nu2 {
                    for y in 0..ny {
                        let ws = w.block(&[x, u1, u2, y]);
                        r += lambda[u2][y].iter().zip(ws).map(|(a, b)| a * b).sum::<f64>();
                    }
                }
            }
            best = best.min(r);
        }
        *nux = best;
    }
    let value = pi.mass() * nu.iter().zip(pd).map(|(a, b)| a * b).sum::<f64>();

    let rows: Vec<Vec<f64>> = (0..nx)
        .map(|x| (0..nu1).map(|u1| sol.dual[x * nu1 + u1]).collect())
        .collect();
    let gamma1 = Prescription::from_rows_normalized(t, 1, rows)?;
    Ok(StageSolution {
        value,
        gamma1,
        q,
        lambda,
        nu,
        lp_iterations: sol.iterations,
    })
}

/// Solution of the one-sided min-max stage program.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinmaxSolution {
    pub value: f64,
    pub gamma1: Prescription,
    pub lp_iterations: usize,
}

/// Min-max stage program over player 1's prescription with epigraph
/// variables `s(u2, y2) ≥ ⟨ℓ, Q(π, γ1, (y2, u2))⟩` for every next-stage alpha
/// vector and `ν ≥ c̃(π, γ1, u2) + Σ_y2 s(u2, y2)` for every `u2`.
pub fn one_sided_backup_minmax(
    pi: &Belief,
    next: Option<&AlphaSet>,
    g: &OneSidedGame,
    t: usize,
) -> Result<MinmaxSolution> {
    check_one_sided_stage(pi, next, g, t)?;
    let (nx, nu1, nu2) = (g.states(t), g.actions1(t), g.actions2(t));
    let cost = g.cost(t);
    let pd = pi.direction();
    let cont = match next {
        Some(a) if t + 1 < g.horizon() => Some((a, g.observations(t), continuation_weights(a, g, t))),
        _ => None,
    };
    let (ny, nl) = cont.as_ref().map_or((0, 0), |(a, ny, _)| (*ny, a.len()));
    let s0 = nx * nu1;
    let nu_var = s0 + nu2 * ny;
    let nvars = nu_var + 1;
    let gam = |x: usize, u1: usize| x * nu1 + u1;

    let mut lp = LinearProgram::new(nvars);
    for j in s0..nvars {
        lp.set_bound(j, Bound::Free);
    }
    lp.set_objective(nu_var, -1.0);
    if let Some((_, _, w)) = &cont {
        for u2 in 0..nu2 {
            for y in 0..ny {
                for l in 0..nl {
                    let mut row = vec![0.0; nvars];
                    for x in 0..nx {
                        if pd[x] == 0.0 {
                            continue;
                        }
                        for u1 in 0..nu1 {
                            row[gam(x, u1)] = pd[x] * w.get(&[x, u1, u2, y, l]);
                        }
                    }
                    row[s0 + u2 * ny + y] = -1.0;
                    lp.add_le_dense(row, 0.0);
                }
            }
        }
    }
    for u2 in 0..nu2 {
        let mut row = vec![0.0; nvars];
        for x in 0..nx {
            for u1 in 0..nu1 {
                row[gam(x, u1)] = pd[x] * cost.get(&[x, u1, u2]);
            }
        }
        for y in 0..ny {
            row[s0 + u2 * ny + y] = 1.0;
        }
        row[nu_var] = -1.0;
        lp.add_le_dense(row, 0.0);
    }
    for x in 0..nx {
        let mut row = vec![0.0; nvars];
        for u1 in 0..nu1 {
            row[gam(x, u1)] = 1.0;
        }
        lp.add_eq_dense(row, 1.0);
    }
    let sol = solve_lp(&lp)?;
    if !sol.is_optimal() {
        return Err(lp_error(sol.status, format!("min-max backup at stage {t}")));
    }
    let rows: Vec<Vec<f64>> = (0..nx)
        .map(|x| (0..nu1).map(|u1| sol.primal[gam(x, u1)]).collect())
        .collect();
    Ok(MinmaxSolution {
        value: pi.mass() * sol.primal[nu_var],
        gamma1: Prescription::from_rows_normalized(t, 1, rows)?,
        lp_iterations: sol.iterations,
    })
}

/// Value and equilibrium prescriptions of a final-stage game.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TerminalSolution {
    pub value: f64,
    pub gamma1: Prescription,
    pub gamma2: Prescription,
}

fn pure_prescriptions(rows: usize, actions: usize, cap: usize, player: usize) -> Result<Vec<Vec<usize>>> {
    let count = (actions as u128).checked_pow(rows as u32).unwrap_or(u128::MAX);
    if count > cap as u128 {
        return Err(Error::CapExceeded {
            what: if player == 1 {
                "pure prescriptions of player 1"
            } else {
                "pure prescriptions of player 2"
            },
            limit: cap,
            actual: usize::try_from(count).unwrap_or(usize::MAX),
        });
    }
    let count = count as usize;
    Ok((0..count)
        .map(|mut i| {
            let mut c = vec![0; rows];
            for p in (0..rows).rev() {
                c[p] = i % actions;
                i /= actions;
            }
            c
        })
        .collect())
}

/// Exact final-stage game: a matrix game over pure prescriptions of both
/// players, with behavioral prescriptions read off the mixed strategies'
/// per-row marginals.
pub fn general_stage_game_t(pi: &Belief, g: &GameDefinition, t: usize, cap: usize) -> Result<TerminalSolution> {
    if t + 1 != g.horizon() {
        return Err(Error::InvalidArgument(format!(
            "stage {t} is not the final stage {}",
            g.horizon() - 1
        )));
    }
    if pi.stage() != t {
        return Err(Error::StageMismatch {
            expected: t,
            found: pi.stage(),
        });
    }
    let s = g.spaces(t);
    if pi.shape() != [s.states, s.private1, s.private2] {
        return Err(Error::shape("belief shape does not match the final stage"));
    }
    let a1 = pure_prescriptions(s.private1, s.actions1, cap, 1)?;
    let a2 = pure_prescriptions(s.private2, s.actions2, cap, 2)?;
    // C[p1][p2][u1][u2] = Σ_x π(x, p1, p2) c(x, u1, u2)
    let cost = g.cost(t);
    let mut c = Tensor::zeros(&[s.private1, s.private2, s.actions1, s.actions2]);
    for x in 0..s.states {
        for p1 in 0..s.private1 {
            for p2 in 0..s.private2 {
                let w = pi.get(x, p1, p2);
                if w == 0.0 {
                    continue;
                }
                let blk = c.block_mut(&[p1, p2]);
                for (o, cv) in blk.iter_mut().zip(cost.block(&[x])) {
                    *o += w * cv;
                }
            }
        }
    }
    let m: Vec<Vec<f64>> = a1
        .par_iter()
        .map(|r| {
            a2.iter()
                .map(|col| {
                    let mut v = 0.0;
                    for (p1, &u1) in r.iter().enumerate() {
                        for (p2, &u2) in col.iter().enumerate() {
                            v += c.get(&[p1, p2, u1, u2]);
                        }
                    }
                    v
                })
                .collect()
        })
        .collect();
    let mg = solve_matrix_game(&m)?;
    let marginal = |pure: &[Vec<usize>], mix: &[f64], rows: usize, actions: usize| -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; actions]; rows];
        for (a, &w) in pure.iter().zip(mix) {
            for (p, &u) in a.iter().enumerate() {
                out[p][u] += w;
            }
        }
        out
    };
    Ok(TerminalSolution {
        value: mg.value,
        gamma1: Prescription::from_rows_normalized(t, 1, marginal(&a1, &mg.row, s.private1, s.actions1))?,
        gamma2: Prescription::from_rows_normalized(t, 2, marginal(&a2, &mg.col, s.private2, s.actions2))?,
    })
}

/// All prescriptions whose rows lie on the `1/k` grid of the action simplex.
pub fn prescription_grid(t: usize, player: usize, rows: usize, actions: usize, k: u32) -> Vec<Prescription> {
    let pts: Vec<Vec<f64>> = compositions(actions, k)
        .into_iter()
        .map(|c| c.into_iter().map(|v| v as f64 / k as f64).collect())
        .collect();
    let n = pts.len();
    let total = n.pow(rows as u32);
    (0..total)
        .map(|mut i| {
            let mut r = vec![Vec::new(); rows];
            for p in (0..rows).rev() {
                r[p] = pts[i % n].clone();
                i /= n;
            }
            Prescription::from_rows_normalized(t, player, r).expect("grid rows are distributions")
        })
        .collect()
}

/// Grid min-max and max-min of the stage objective.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridBounds {
    pub minmax: f64,
    pub maxmin: f64,
}

/// Evaluates `w(γ1, γ2) = c̃(π, γ1, γ2) + Σ_z P(z) V(F(π, γ1, γ2, z))` on the
/// product of `1/k` prescription grids and returns its grid min-max and
/// max-min. At the final stage the continuation is absent.
pub fn general_stage_bounds(
    pi: &Belief,
    next_value: &(dyn Fn(&Belief) -> f64 + Sync),
    g: &GameDefinition,
    t: usize,
    k: u32,
    cap: usize,
) -> Result<GridBounds> {
    if k < 2 {
        return Err(Error::InvalidArgument("prescription grid resolution must be at least 2".into()));
    }
    if pi.stage() != t {
        return Err(Error::StageMismatch {
            expected: t,
            found: pi.stage(),
        });
    }
    let s = g.spaces(t);
    let count = |rows: usize, actions: usize| -> Option<usize> {
        composition_count(actions, k)?.checked_pow(rows as u32)
    };
    let n1 = count(s.private1, s.actions1).unwrap_or(usize::MAX);
    let n2 = count(s.private2, s.actions2).unwrap_or(usize::MAX);
    let pairs = n1.saturating_mul(n2);
    if pairs > cap {
        return Err(Error::CapExceeded {
            what: "prescription grid pairs",
            limit: cap,
            actual: pairs,
        });
    }
    let grid1 = prescription_grid(t, 1, s.private1, s.actions1, k);
    let grid2 = prescription_grid(t, 2, s.private2, s.actions2, k);
    let last = t + 1 == g.horizon();
    let w: Vec<Vec<f64>> = grid1
        .par_iter()
        .map(|g1| {
            grid2
                .iter()
                .map(|g2| -> Result<f64> {
                    let mut v = expected_stage_cost(pi, g1, g2, g.cost(t))?;
                    if !last {
                        let (m, beliefs) = all_next_beliefs(pi, g1, g2, g)?;
                        for (mz, b) in m.iter().zip(&beliefs) {
                            if *mz > ZERO_PROB {
                                v += mz * next_value(b);
                            }
                        }
                    }
                    Ok(v)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let minmax = w
        .iter()
        .map(|r| r.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .fold(f64::INFINITY, f64::min);
    let maxmin = (0..grid2.len())
        .map(|j| w.iter().map(|r| r[j]).fold(f64::INFINITY, f64::min))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(GridBounds { minmax, maxmin })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pwlc_basics() {
        let a = AlphaSet::new(0, vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let pi = Belief::uniform(0, [2, 1, 1]);
        assert_eq!(pwlc_eval(&a, &pi).unwrap(), 0.5);
        assert_eq!(pwlc_eval(&AlphaSet::zero(0, 2), &pi).unwrap(), 0.0);
    }

    #[test]
    fn dedup_keeps_first() {
        let mut a = AlphaSet::new(0, vec![vec![1.0], vec![2.0], vec![1.0]]).unwrap();
        a.dedup();
        assert_eq!(a.vectors(), &[vec![1.0], vec![2.0]]);
    }

    #[test]
    fn pure_prescription_cap() {
        assert!(matches!(
            pure_prescriptions(13, 2, 4096, 1),
            Err(Error::CapExceeded { .. })
        ));
        assert_eq!(pure_prescriptions(12, 2, 4096, 1).unwrap().len(), 4096);
    }
}
