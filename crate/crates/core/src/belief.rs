//! Common-information beliefs, prescriptions and the belief update.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{GameDefinition, OneSidedGame};
use crate::tensor::Tensor;

/// Below this marginal probability an increment is treated as impossible and
/// the updated belief falls back to uniform.
pub const ZERO_PROB: f64 = 1e-12;

/// Tolerance on the total mass of a proper belief at construction.
pub const MASS_TOL: f64 = 1e-9;

/// Distribution over `X_t × P1_t × P2_t`, flat in `(x, p1, p2)` row-major
/// order.
///
/// A sub-normalized belief is stored as a proper direction and a mass, so
/// scaling is exact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Belief {
    stage: usize,
    shape: [usize; 3],
    direction: Vec<f64>,
    mass: f64,
}

impl Belief {
    /// Proper belief; entries must be non-negative and sum to 1.
    pub fn new(stage: usize, shape: [usize; 3], probs: Vec<f64>) -> Result<Self> {
        if probs.len() != shape.iter().product::<usize>() {
            return Err(Error::shape(format!(
                "belief of shape {shape:?} needs {} entries, got {}",
                shape.iter().product::<usize>(),
                probs.len()
            )));
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::InvalidArgument("belief entries must be finite and non-negative".into()));
        }
        let s: f64 = probs.iter().sum();
        if (s - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidArgument(format!("belief sums to {s}, not 1")));
        }
        Ok(Belief {
            stage,
            shape,
            direction: probs,
            mass: 1.0,
        })
    }

    /// Belief over the states of a one-sided game (trivial private spaces).
    pub fn over_states(stage: usize, probs: Vec<f64>) -> Result<Self> {
        let n = probs.len();
        Self::new(stage, [n, 1, 1], probs)
    }

    /// Normalizes a non-negative measure with positive total.
    pub fn normalized(stage: usize, shape: [usize; 3], measure: Vec<f64>) -> Result<Self> {
        let s: f64 = measure.iter().sum();
        if !(s > 0.0) {
            return Err(Error::InvalidArgument("cannot normalize a zero measure".into()));
        }
        let probs = measure.into_iter().map(|v| v / s).collect();
        Self::new(stage, shape, probs)
    }

    pub fn uniform(stage: usize, shape: [usize; 3]) -> Self {
        let n = shape.iter().product::<usize>();
        Belief {
            stage,
            shape,
            direction: vec![1.0 / n as f64; n],
            mass: 1.0,
        }
    }

    pub fn point(stage: usize, shape: [usize; 3], index: usize) -> Self {
        let mut d = vec![0.0; shape.iter().product()];
        d[index] = 1.0;
        Belief {
            stage,
            shape,
            direction: d,
            mass: 1.0,
        }
    }

    /// Initial common-information belief of a game.
    pub fn initial(g: &GameDefinition) -> Self {
        let s = g.initial().shape();
        Belief {
            stage: 0,
            shape: [s[0], s[1], s[2]],
            direction: g.initial().data().to_vec(),
            mass: 1.0,
        }
    }

    pub fn initial_one_sided(g: &OneSidedGame) -> Self {
        Belief {
            stage: 0,
            shape: [g.states(0), 1, 1],
            direction: g.initial().to_vec(),
            mass: 1.0,
        }
    }

    pub fn stage(&self) -> usize {
        self.stage
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.direction.len()
    }

    pub fn is_empty(&self) -> bool {
        self.direction.is_empty()
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn is_sub_normalized(&self) -> bool {
        self.mass < 1.0
    }

    /// The normalized direction; equals the entries of a proper belief.
    pub fn direction(&self) -> &[f64] {
        &self.direction
    }

    /// Entries `mass · direction`.
    pub fn entries(&self) -> Vec<f64> {
        if self.mass == 1.0 {
            return self.direction.clone();
        }
        self.direction.iter().map(|p| self.mass * p).collect()
    }

    #[inline]
    pub fn index(&self, x: usize, p1: usize, p2: usize) -> usize {
        (x * self.shape[1] + p1) * self.shape[2] + p2
    }

    pub fn get(&self, x: usize, p1: usize, p2: usize) -> f64 {
        self.mass * self.direction[self.index(x, p1, p2)]
    }

    /// Marginal over states.
    pub fn state_marginal(&self) -> Vec<f64> {
        let inner = self.shape[1] * self.shape[2];
        self.direction
            .chunks(inner)
            .map(|c| self.mass * c.iter().sum::<f64>())
            .collect()
    }
}

/// Scales a proper belief to mass `alpha ∈ [0, 1]`.
pub fn scale_belief(pi: &Belief, alpha: f64) -> Result<Belief> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!("scale {alpha} outside [0, 1]")));
    }
    if pi.mass != 1.0 {
        return Err(Error::InvalidArgument("only proper beliefs can be scaled".into()));
    }
    Ok(Belief {
        mass: alpha,
        ..pi.clone()
    })
}

/// Row-stochastic map from a player's private information to a distribution
/// over that player's actions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prescription {
    stage: usize,
    player: usize,
    rows: usize,
    actions: usize,
    data: Vec<f64>,
}

/// Tolerance on prescription row sums.
pub const ROW_TOL: f64 = 1e-12;

impl Prescription {
    pub fn new(stage: usize, player: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        let actions = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || actions == 0 || rows.iter().any(|r| r.len() != actions) {
            return Err(Error::shape("prescription needs a nonempty rectangular table"));
        }
        for (p, r) in rows.iter().enumerate() {
            let s: f64 = r.iter().sum();
            if r.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || (s - 1.0).abs() > ROW_TOL {
                return Err(Error::InvalidArgument(format!(
                    "prescription row {p} is not a distribution (sum {s})"
                )));
            }
        }
        Ok(Prescription {
            stage,
            player,
            rows: rows.len(),
            actions,
            data: rows.concat(),
        })
    }

    /// Clamps negative entries to zero and rescales each row; rows with no
    /// positive mass become uniform. For LP outputs carrying rounding noise.
    pub fn from_rows_normalized(stage: usize, player: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        let fixed = rows
            .into_iter()
            .map(|r| {
                let mut r: Vec<f64> = r.into_iter().map(|v| if v > 0.0 { v } else { 0.0 }).collect();
                let s: f64 = r.iter().sum();
                if s > 0.0 {
                    r.iter_mut().for_each(|v| *v /= s);
                } else {
                    let n = r.len() as f64;
                    r.iter_mut().for_each(|v| *v = 1.0 / n);
                }
                r
            })
            .collect();
        Self::new(stage, player, fixed)
    }

    pub fn uniform(stage: usize, player: usize, rows: usize, actions: usize) -> Self {
        Prescription {
            stage,
            player,
            rows,
            actions,
            data: vec![1.0 / actions as f64; rows * actions],
        }
    }

    /// Pure prescription choosing `choice[p]` at private information `p`.
    pub fn deterministic(stage: usize, player: usize, choice: &[usize], actions: usize) -> Self {
        let mut data = vec![0.0; choice.len() * actions];
        for (p, &u) in choice.iter().enumerate() {
            data[p * actions + u] = 1.0;
        }
        Prescription {
            stage,
            player,
            rows: choice.len(),
            actions,
            data,
        }
    }

    pub fn stage(&self) -> usize {
        self.stage
    }

    pub fn player(&self) -> usize {
        self.player
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    #[inline]
    pub fn get(&self, p: usize, u: usize) -> f64 {
        self.data[p * self.actions + u]
    }

    pub fn row(&self, p: usize) -> &[f64] {
        &self.data[p * self.actions..(p + 1) * self.actions]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.actions).map(<[f64]>::to_vec).collect()
    }
}

fn check_stage(g: &GameDefinition, pi: &Belief, g1: &Prescription, g2: &Prescription) -> Result<()> {
    let t = pi.stage;
    for found in [g1.stage, g2.stage] {
        if found != t {
            return Err(Error::StageMismatch { expected: t, found });
        }
    }
    if t >= g.horizon() {
        return Err(Error::InvalidArgument(format!("stage {t} beyond horizon {}", g.horizon())));
    }
    let s = g.spaces(t);
    if pi.shape != [s.states, s.private1, s.private2] {
        return Err(Error::shape(format!("belief shape {:?} does not match stage {t}", pi.shape)));
    }
    if (g1.rows, g1.actions) != (s.private1, s.actions1) || (g2.rows, g2.actions) != (s.private2, s.actions2) {
        return Err(Error::shape(format!("prescription shapes do not match stage {t}")));
    }
    Ok(())
}

/// Joint measure `[z][x'][p1'][p2']` of the increment and the next state and
/// private informations.
pub fn joint_update(pi: &Belief, g1: &Prescription, g2: &Prescription, g: &GameDefinition) -> Result<Tensor<f64>> {
    check_stage(g, pi, g1, g2)?;
    let t = pi.stage;
    if t + 1 >= g.horizon() {
        return Err(Error::InvalidArgument(format!("stage {t} is final; no update")));
    }
    let s = g.spaces(t);
    let n = g.spaces(t + 1);
    let nz = s.increments;
    let inner = n.states * n.private1 * n.private2;
    let mut out = Tensor::zeros(&[nz, n.states, n.private1, n.private2]);
    let o = out.data_mut();
    for x in 0..s.states {
        for p1 in 0..s.private1 {
            for p2 in 0..s.private2 {
                let w = pi.get(x, p1, p2);
                if w == 0.0 {
                    continue;
                }
                for u1 in 0..s.actions1 {
                    let w1 = w * g1.get(p1, u1);
                    if w1 == 0.0 {
                        continue;
                    }
                    for u2 in 0..s.actions2 {
                        let w2 = w1 * g2.get(p2, u2);
                        if w2 == 0.0 {
                            continue;
                        }
                        // Kernel rows are laid out [x'][p1'][p2'][z].
                        for (flat, &k) in g.kernel_row(t, x, p1, p2, u1, u2).iter().enumerate() {
                            if k != 0.0 {
                                o[(flat % nz) * inner + flat / nz] += w2 * k;
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Marginal distribution of the increment.
pub fn marginal_z(pi: &Belief, g1: &Prescription, g2: &Prescription, g: &GameDefinition) -> Result<Vec<f64>> {
    let j = joint_update(pi, g1, g2, g)?;
    Ok(marginal_of(&j))
}

fn marginal_of(j: &Tensor<f64>) -> Vec<f64> {
    (0..j.shape()[0]).map(|z| j.block(&[z]).iter().sum()).collect()
}

fn next_from_joint(j: &Tensor<f64>, z: usize, stage: usize) -> Belief {
    let sh = j.shape();
    let shape = [sh[1], sh[2], sh[3]];
    let block = j.block(&[z]);
    let m: f64 = block.iter().sum();
    if m > ZERO_PROB {
        Belief {
            stage,
            shape,
            direction: block.iter().map(|v| v / m).collect(),
            mass: 1.0,
        }
    } else {
        Belief::uniform(stage, shape)
    }
}

/// Updated belief after increment `z`; uniform when `z` has (numerically)
/// zero probability.
pub fn next_belief(pi: &Belief, g1: &Prescription, g2: &Prescription, z: usize, g: &GameDefinition) -> Result<Belief> {
    let j = joint_update(pi, g1, g2, g)?;
    if z >= j.shape()[0] {
        return Err(Error::InvalidArgument(format!("increment {z} out of range")));
    }
    Ok(next_from_joint(&j, z, pi.stage + 1))
}

/// Marginal of every increment together with the corresponding updated
/// beliefs.
pub fn all_next_beliefs(
    pi: &Belief,
    g1: &Prescription,
    g2: &Prescription,
    g: &GameDefinition,
) -> Result<(Vec<f64>, Vec<Belief>)> {
    let j = joint_update(pi, g1, g2, g)?;
    let m = marginal_of(&j);
    let b = (0..m.len()).map(|z| next_from_joint(&j, z, pi.stage + 1)).collect();
    Ok((m, b))
}

fn check_one_sided(pi: &Belief, g1: &Prescription, g: &OneSidedGame) -> Result<()> {
    let t = pi.stage;
    if g1.stage != t {
        return Err(Error::StageMismatch {
            expected: t,
            found: g1.stage,
        });
    }
    if t + 1 >= g.horizon() {
        return Err(Error::InvalidArgument(format!("stage {t} is final; no update")));
    }
    if pi.shape != [g.states(t), 1, 1] || g1.rows != g.states(t) || g1.actions != g.actions1(t) {
        return Err(Error::shape(format!("belief or prescription shape does not match stage {t}")));
    }
    Ok(())
}

/// Unnormalized next-state measure `Q(x') = Σ π(x) γ1(x; u1) P[x', y2 | x, u1, u2]`
/// for `z = (y2, u2)`.
pub fn one_sided_q(pi: &Belief, g1: &Prescription, z: usize, g: &OneSidedGame) -> Result<Vec<f64>> {
    check_one_sided(pi, g1, g)?;
    let t = pi.stage;
    if z >= g.increments(t) {
        return Err(Error::InvalidArgument(format!("increment {z} out of range")));
    }
    let (y2, u2) = g.decode_z(t, z);
    let mut q = vec![0.0; g.states(t + 1)];
    for x in 0..g.states(t) {
        let w = pi.get(x, 0, 0);
        if w == 0.0 {
            continue;
        }
        for u1 in 0..g.actions1(t) {
            let w1 = w * g1.get(x, u1);
            if w1 == 0.0 {
                continue;
            }
            for (qx, &p) in q.iter_mut().zip(g.joint_row(t, x, u1, u2, y2)) {
                *qx += w1 * p;
            }
        }
    }
    Ok(q)
}

/// One-sided belief update. Player 2's prescription does not enter.
pub fn one_sided_next_belief(pi: &Belief, g1: &Prescription, z: usize, g: &OneSidedGame) -> Result<Belief> {
    let q = one_sided_q(pi, g1, z, g)?;
    let r: f64 = q.iter().sum();
    let t = pi.stage + 1;
    if r > ZERO_PROB {
        Ok(Belief {
            stage: t,
            shape: [q.len(), 1, 1],
            direction: q.iter().map(|v| v / r).collect(),
            mass: 1.0,
        })
    } else {
        Ok(Belief::uniform(t, [q.len(), 1, 1]))
    }
}
