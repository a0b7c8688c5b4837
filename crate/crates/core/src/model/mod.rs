//! Game definitions: per-stage spaces, joint stage kernels, costs and the
//! initial distribution.

mod io;
mod one_sided;
mod recall;
mod structured;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{for_each_index, Tensor};

pub use io::{game_to_json, load_game, one_sided_to_json, parse_game, GameFile};
pub use one_sided::{lower_one_sided, OneSidedGame};
pub use recall::{with_perfect_recall, RecallMap};
pub use structured::{assemble_kernel, assemble_stage_kernel, StageDynamics, StructuredDynamics, StructuredStage};

/// Tolerance on probability slices and the initial distribution.
pub const STOCHASTIC_TOL: f64 = 1e-12;

/// Sizes of the finite spaces at one stage.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageSpaces {
    pub states: usize,
    pub actions1: usize,
    pub actions2: usize,
    pub private1: usize,
    pub private2: usize,
    /// Size of the common-information increment revealed after this stage;
    /// zero at the final stage.
    pub increments: usize,
}

impl StageSpaces {
    pub fn belief_len(&self) -> usize {
        self.states * self.private1 * self.private2
    }

    pub fn actions(&self, player: usize) -> usize {
        if player == 1 {
            self.actions1
        } else {
            self.actions2
        }
    }

    pub fn private(&self, player: usize) -> usize {
        if player == 1 {
            self.private1
        } else {
            self.private2
        }
    }
}

/// Optional human-readable names for the indices of each space.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageLabels {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub states: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actions1: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actions2: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub private1: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub private2: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub increments: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Stage {
    pub spaces: StageSpaces,
    /// `[x][p1][p2][u1][u2][x'][p1'][p2'][z]`; absent at the final stage.
    pub kernel: Option<Tensor<f64>>,
    /// `[x][u1][u2]`, paid by player 1.
    pub cost: Tensor<f64>,
    pub labels: Option<StageLabels>,
}

/// Finite-horizon zero-sum game in kernel form. Immutable after construction.
#[derive(Clone, Debug, PartialEq)]
pub struct GameDefinition {
    stages: Vec<Stage>,
    initial: Tensor<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ViolationKind {
    NonFinite,
    Negative,
    SliceSum,
    InitialSum,
    ObservationSum,
    TransitionSum,
}

/// One failed invariant: which tensor, where, and by how much.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub tensor: String,
    pub index: Vec<usize>,
    pub kind: ViolationKind,
    pub magnitude: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let what = match self.kind {
            ViolationKind::NonFinite => "non-finite entry",
            ViolationKind::Negative => "negative entry",
            ViolationKind::SliceSum => "conditional slice does not sum to 1",
            ViolationKind::InitialSum => "initial distribution does not sum to 1",
            ViolationKind::ObservationSum => "observation row does not sum to 1",
            ViolationKind::TransitionSum => "transition row does not sum to 1",
        };
        write!(f, "{}{:?}: {} (magnitude {:e})", self.tensor, self.index, what, self.magnitude)
    }
}

pub(crate) fn check_shape(name: &str, t: &Tensor<f64>, expected: &[usize]) -> Result<()> {
    if t.shape() != expected {
        return Err(Error::shape(format!(
            "{name} has shape {:?}, expected {:?}",
            t.shape(),
            expected
        )));
    }
    Ok(())
}

/// Appends violations for non-finite or negative entries and for every block
/// selected by the first `prefix_rank` indices whose sum is not 1.
pub(crate) fn stochastic_violations(
    name: &str,
    t: &Tensor<f64>,
    prefix_rank: usize,
    kind: ViolationKind,
    out: &mut Vec<Violation>,
) {
    for (flat, &v) in t.data().iter().enumerate() {
        if !v.is_finite() {
            out.push(Violation {
                tensor: name.to_string(),
                index: t.unravel(flat),
                kind: ViolationKind::NonFinite,
                magnitude: v,
            });
        } else if v < 0.0 {
            out.push(Violation {
                tensor: name.to_string(),
                index: t.unravel(flat),
                kind: ViolationKind::Negative,
                magnitude: -v,
            });
        }
    }
    for_each_index(&t.shape()[..prefix_rank], |prefix| {
        let s: f64 = t.block(prefix).iter().sum();
        if (s - 1.0).abs() > STOCHASTIC_TOL || !s.is_finite() {
            out.push(Violation {
                tensor: name.to_string(),
                index: prefix.to_vec(),
                kind: kind.clone(),
                magnitude: (s - 1.0).abs(),
            });
        }
    });
}

impl GameDefinition {
    /// Builds a game after checking that every tensor shape agrees with the
    /// declared spaces. Numeric invariants are checked by [`validate_game`].
    pub fn new(stages: Vec<Stage>, initial: Tensor<f64>) -> Result<Self> {
        if stages.is_empty() {
            return Err(Error::shape("horizon must be at least 1"));
        }
        let horizon = stages.len();
        for (t, st) in stages.iter().enumerate() {
            let s = &st.spaces;
            let sizes = [s.states, s.actions1, s.actions2, s.private1, s.private2];
            if sizes.contains(&0) {
                return Err(Error::shape(format!("stage {t}: every space must be nonempty")));
            }
            check_shape(&format!("stage[{t}].cost"), &st.cost, &[s.states, s.actions1, s.actions2])?;
            if t + 1 < horizon {
                let n = &stages[t + 1].spaces;
                if s.increments == 0 {
                    return Err(Error::shape(format!("stage {t}: increment space must be nonempty")));
                }
                let k = st
                    .kernel
                    .as_ref()
                    .ok_or_else(|| Error::shape(format!("stage {t}: missing kernel")))?;
                check_shape(
                    &format!("stage[{t}].kernel"),
                    k,
                    &[
                        s.states, s.private1, s.private2, s.actions1, s.actions2, n.states, n.private1,
                        n.private2, s.increments,
                    ],
                )?;
            } else if st.kernel.is_some() || s.increments != 0 {
                return Err(Error::shape(format!(
                    "final stage {t} must have no kernel and zero increments"
                )));
            }
            if let Some(l) = &st.labels {
                check_labels(t, s, l)?;
            }
        }
        let s0 = &stages[0].spaces;
        check_shape("initial", &initial, &[s0.states, s0.private1, s0.private2])?;
        Ok(GameDefinition { stages, initial })
    }

    /// Like [`GameDefinition::new`] but also rejects numeric violations.
    pub fn new_validated(stages: Vec<Stage>, initial: Tensor<f64>) -> Result<Self> {
        let g = Self::new(stages, initial)?;
        let v = validate_game(&g);
        if v.is_empty() {
            Ok(g)
        } else {
            Err(Error::Invalid(v))
        }
    }

    pub fn horizon(&self) -> usize {
        self.stages.len()
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn stage(&self, t: usize) -> &Stage {
        &self.stages[t]
    }

    pub fn spaces(&self, t: usize) -> &StageSpaces {
        &self.stages[t].spaces
    }

    pub fn cost(&self, t: usize) -> &Tensor<f64> {
        &self.stages[t].cost
    }

    /// Kernel of a non-final stage.
    pub fn kernel(&self, t: usize) -> &Tensor<f64> {
        self.stages[t]
            .kernel
            .as_ref()
            .expect("kernel requested for the final stage")
    }

    /// Distribution over `(x', p1', p2', z)` given the current tuple.
    pub fn kernel_row(&self, t: usize, x: usize, p1: usize, p2: usize, u1: usize, u2: usize) -> &[f64] {
        self.kernel(t).block(&[x, p1, p2, u1, u2])
    }

    /// Initial distribution over `[x][p1][p2]`.
    pub fn initial(&self) -> &Tensor<f64> {
        &self.initial
    }

    pub fn labels(&self, t: usize) -> Option<&StageLabels> {
        self.stages[t].labels.as_ref()
    }

    /// Splits a flat kernel-row position into `(x', p1', p2', z)`.
    pub fn split_target(&self, t: usize, flat: usize) -> (usize, usize, usize, usize) {
        let nz = self.spaces(t).increments;
        let n = self.spaces(t + 1);
        let z = flat % nz;
        let rest = flat / nz;
        let p2 = rest % n.private2;
        let rest = rest / n.private2;
        let p1 = rest % n.private1;
        (rest / n.private1, p1, p2, z)
    }
}

fn check_labels(t: usize, s: &StageSpaces, l: &StageLabels) -> Result<()> {
    let pairs = [
        ("states", &l.states, s.states),
        ("actions1", &l.actions1, s.actions1),
        ("actions2", &l.actions2, s.actions2),
        ("private1", &l.private1, s.private1),
        ("private2", &l.private2, s.private2),
        ("increments", &l.increments, s.increments),
    ];
    for (name, v, n) in pairs {
        if let Some(v) = v {
            if v.len() != n {
                return Err(Error::shape(format!(
                    "stage {t}: {} labels for {name}, space has {n}",
                    v.len()
                )));
            }
        }
    }
    Ok(())
}

/// Lists every numeric invariant violation. Costs may take any finite sign.
pub fn validate_game(g: &GameDefinition) -> Vec<Violation> {
    let mut out = Vec::new();
    for (t, st) in g.stages.iter().enumerate() {
        if let Some(k) = &st.kernel {
            stochastic_violations(&format!("stage[{t}].kernel"), k, 5, ViolationKind::SliceSum, &mut out);
        }
        for (flat, &c) in st.cost.data().iter().enumerate() {
            if !c.is_finite() {
                out.push(Violation {
                    tensor: format!("stage[{t}].cost"),
                    index: st.cost.unravel(flat),
                    kind: ViolationKind::NonFinite,
                    magnitude: c,
                });
            }
        }
    }
    stochastic_violations("initial", &g.initial, 0, ViolationKind::InitialSum, &mut out);
    out
}
