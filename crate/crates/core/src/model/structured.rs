//! Structured dynamics (transition, per-player observations, private and
//! common update maps) and their assembly into joint stage kernels.

use crate::error::{Error, Result};
use crate::tensor::{for_each_index, Tensor};

use super::{check_shape, stochastic_violations, GameDefinition, Stage, StageLabels, StageSpaces, ViolationKind};

/// Dynamics between stage t and t+1.
#[derive(Clone, Debug, PartialEq)]
pub struct StageDynamics {
    /// `[x][u1][u2][x']`
    pub transition: Tensor<f64>,
    /// `[x'][u1][u2][y1]`
    pub observation1: Tensor<f64>,
    /// `[x'][u1][u2][y2]`
    pub observation2: Tensor<f64>,
    /// `[p1][u1][y1] -> p1'`
    pub xi1: Tensor<usize>,
    /// `[p2][u2][y2] -> p2'`
    pub xi2: Tensor<usize>,
    /// `[p1][p2][u1][u2][y1][y2] -> z`
    pub zeta: Tensor<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StructuredStage {
    pub spaces: StageSpaces,
    pub cost: Tensor<f64>,
    /// Absent at the final stage.
    pub dynamics: Option<StageDynamics>,
    pub labels: Option<StageLabels>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StructuredDynamics {
    pub stages: Vec<StructuredStage>,
}

fn check_index_table(name: &str, t: &Tensor<usize>, shape: &[usize], bound: usize) -> Result<()> {
    if t.shape() != shape {
        return Err(Error::shape(format!(
            "{name} has shape {:?}, expected {:?}",
            t.shape(),
            shape
        )));
    }
    if let Some((flat, &v)) = t.data().iter().enumerate().find(|(_, &v)| v >= bound) {
        return Err(Error::shape(format!(
            "{name}{:?} = {v} is outside the declared range 0..{bound}",
            t.unravel(flat)
        )));
    }
    Ok(())
}

/// Joint kernel `[x][p1][p2][u1][u2][x'][p1'][p2'][z]` obtained by summing the
/// product of transition and both observation probabilities over all
/// observation pairs, routed through the update maps.
pub fn assemble_stage_kernel(d: &StageDynamics, cur: &StageSpaces, next: &StageSpaces) -> Result<Tensor<f64>> {
    let (nx, nu1, nu2) = (cur.states, cur.actions1, cur.actions2);
    check_shape("transition", &d.transition, &[nx, nu1, nu2, next.states])?;
    let ny1 = *d.observation1.shape().last().unwrap_or(&0);
    let ny2 = *d.observation2.shape().last().unwrap_or(&0);
    check_shape("observation1", &d.observation1, &[next.states, nu1, nu2, ny1])?;
    check_shape("observation2", &d.observation2, &[next.states, nu1, nu2, ny2])?;
    check_index_table("xi1", &d.xi1, &[cur.private1, nu1, ny1], next.private1)?;
    check_index_table("xi2", &d.xi2, &[cur.private2, nu2, ny2], next.private2)?;
    check_index_table(
        "zeta",
        &d.zeta,
        &[cur.private1, cur.private2, nu1, nu2, ny1, ny2],
        cur.increments,
    )?;

    let mut violations = Vec::new();
    stochastic_violations("transition", &d.transition, 3, ViolationKind::TransitionSum, &mut violations);
    stochastic_violations("observation1", &d.observation1, 3, ViolationKind::ObservationSum, &mut violations);
    stochastic_violations("observation2", &d.observation2, 3, ViolationKind::ObservationSum, &mut violations);
    if !violations.is_empty() {
        return Err(Error::Invalid(violations));
    }

    let mut k = Tensor::zeros(&[
        nx,
        cur.private1,
        cur.private2,
        nu1,
        nu2,
        next.states,
        next.private1,
        next.private2,
        cur.increments,
    ]);
    for_each_index(&[nx, cur.private1, cur.private2, nu1, nu2], |i| {
        let (x, p1, p2, u1, u2) = (i[0], i[1], i[2], i[3], i[4]);
        for xn in 0..next.states {
            let pt = *d.transition.get(&[x, u1, u2, xn]);
            if pt == 0.0 {
                continue;
            }
            for y1 in 0..ny1 {
                let po1 = *d.observation1.get(&[xn, u1, u2, y1]);
                if po1 == 0.0 {
                    continue;
                }
                let p1n = *d.xi1.get(&[p1, u1, y1]);
                for y2 in 0..ny2 {
                    let po2 = *d.observation2.get(&[xn, u1, u2, y2]);
                    if po2 == 0.0 {
                        continue;
                    }
                    let p2n = *d.xi2.get(&[p2, u2, y2]);
                    let z = *d.zeta.get(&[p1, p2, u1, u2, y1, y2]);
                    let idx = [x, p1, p2, u1, u2, xn, p1n, p2n, z];
                    let cur = *k.get(&idx);
                    k.set(&idx, cur + pt * po1 * po2);
                }
            }
        }
    });
    Ok(k)
}

/// Folds structured dynamics into a [`GameDefinition`].
pub fn assemble_kernel(sd: &StructuredDynamics, initial: Tensor<f64>) -> Result<GameDefinition> {
    let horizon = sd.stages.len();
    let mut stages = Vec::with_capacity(horizon);
    for (t, st) in sd.stages.iter().enumerate() {
        let kernel = match (&st.dynamics, t + 1 < horizon) {
            (Some(d), true) => Some(
                assemble_stage_kernel(d, &st.spaces, &sd.stages[t + 1].spaces)
                    .map_err(|e| Error::shape(format!("stage {t}: {e}")))?,
            ),
            (None, false) => None,
            (Some(_), false) => return Err(Error::shape(format!("final stage {t} must not carry dynamics"))),
            (None, true) => return Err(Error::shape(format!("stage {t}: missing dynamics"))),
        };
        stages.push(Stage {
            spaces: st.spaces,
            kernel,
            cost: st.cost.clone(),
            labels: st.labels.clone(),
        });
    }
    GameDefinition::new(stages, initial)
}
