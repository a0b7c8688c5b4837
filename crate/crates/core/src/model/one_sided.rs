//! Games where player 1 observes the state and everything player 2 sees.

use crate::error::{Error, Result};
use crate::tensor::{for_each_index, Tensor};

use super::{check_shape, stochastic_violations, GameDefinition, Stage, StageSpaces, Violation, ViolationKind};

/// One-sided information game. Player 2 observes `y2` after each stage and
/// player 1's actions are not observed directly.
#[derive(Clone, Debug, PartialEq)]
pub struct OneSidedGame {
    transition: Vec<Tensor<f64>>,
    observation: Vec<Tensor<f64>>,
    cost: Vec<Tensor<f64>>,
    initial: Vec<f64>,
    /// `[x][u1][u2][y2][x']` = P[x', y2 | x, u1, u2]
    joint: Vec<Tensor<f64>>,
}

impl OneSidedGame {
    /// `transition[t]` is `[x][u1][u2][x']`, `observation[t]` is
    /// `[x'][u1][u2][y2]`, both for `t < T-1`; `cost[t]` is `[x][u1][u2]`.
    pub fn new(
        transition: Vec<Tensor<f64>>,
        observation: Vec<Tensor<f64>>,
        cost: Vec<Tensor<f64>>,
        initial: Vec<f64>,
    ) -> Result<Self> {
        let horizon = cost.len();
        if horizon == 0 {
            return Err(Error::shape("horizon must be at least 1"));
        }
        if transition.len() + 1 != horizon || observation.len() + 1 != horizon {
            return Err(Error::shape(format!(
                "{} cost stages need {} transitions and observations, got {} and {}",
                horizon,
                horizon - 1,
                transition.len(),
                observation.len()
            )));
        }
        for (t, c) in cost.iter().enumerate() {
            if c.shape().len() != 3 || c.shape().contains(&0) {
                return Err(Error::shape(format!("cost[{t}] must be a nonempty [x][u1][u2] array")));
            }
        }
        if initial.len() != cost[0].shape()[0] {
            return Err(Error::shape(format!(
                "initial has {} entries, stage 0 has {} states",
                initial.len(),
                cost[0].shape()[0]
            )));
        }
        let mut joint = Vec::with_capacity(horizon - 1);
        for t in 0..horizon - 1 {
            let s = cost[t].shape();
            let (nx, nu1, nu2) = (s[0], s[1], s[2]);
            let nxn = cost[t + 1].shape()[0];
            check_shape(&format!("transition[{t}]"), &transition[t], &[nx, nu1, nu2, nxn])?;
            let ny = *observation[t].shape().last().unwrap_or(&0);
            if ny == 0 {
                return Err(Error::shape(format!("observation[{t}] has no outcomes")));
            }
            check_shape(&format!("observation[{t}]"), &observation[t], &[nxn, nu1, nu2, ny])?;
            let mut j = Tensor::zeros(&[nx, nu1, nu2, ny, nxn]);
            for_each_index(&[nx, nu1, nu2, ny, nxn], |i| {
                let v = transition[t].get(&[i[0], i[1], i[2], i[4]]) * observation[t].get(&[i[4], i[1], i[2], i[3]]);
                j.set(i, v);
            });
            joint.push(j);
        }
        Ok(OneSidedGame {
            transition,
            observation,
            cost,
            initial,
            joint,
        })
    }

    pub fn new_validated(
        transition: Vec<Tensor<f64>>,
        observation: Vec<Tensor<f64>>,
        cost: Vec<Tensor<f64>>,
        initial: Vec<f64>,
    ) -> Result<Self> {
        let g = Self::new(transition, observation, cost, initial)?;
        let v = g.validate();
        if v.is_empty() {
            Ok(g)
        } else {
            Err(Error::Invalid(v))
        }
    }

    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for t in 0..self.horizon() - 1 {
            stochastic_violations(
                &format!("transition[{t}]"),
                &self.transition[t],
                3,
                ViolationKind::TransitionSum,
                &mut out,
            );
            stochastic_violations(
                &format!("observation[{t}]"),
                &self.observation[t],
                3,
                ViolationKind::ObservationSum,
                &mut out,
            );
        }
        for (t, c) in self.cost.iter().enumerate() {
            for (flat, &v) in c.data().iter().enumerate() {
                if !v.is_finite() {
                    out.push(Violation {
                        tensor: format!("cost[{t}]"),
                        index: c.unravel(flat),
                        kind: ViolationKind::NonFinite,
                        magnitude: v,
                    });
                }
            }
        }
        let init = Tensor::from_vec(&[self.initial.len()], self.initial.clone()).expect("length matches");
        stochastic_violations("initial", &init, 0, ViolationKind::InitialSum, &mut out);
        out
    }

    pub fn horizon(&self) -> usize {
        self.cost.len()
    }

    pub fn states(&self, t: usize) -> usize {
        self.cost[t].shape()[0]
    }

    pub fn actions1(&self, t: usize) -> usize {
        self.cost[t].shape()[1]
    }

    pub fn actions2(&self, t: usize) -> usize {
        self.cost[t].shape()[2]
    }

    /// Number of player-2 observations revealed after stage `t < T-1`.
    pub fn observations(&self, t: usize) -> usize {
        self.observation[t].shape()[3]
    }

    /// Size of the increment `z = (y2, u2)` revealed after stage `t`.
    pub fn increments(&self, t: usize) -> usize {
        if t + 1 < self.horizon() {
            self.observations(t) * self.actions2(t)
        } else {
            0
        }
    }

    pub fn encode_z(&self, t: usize, y2: usize, u2: usize) -> usize {
        y2 * self.actions2(t) + u2
    }

    pub fn decode_z(&self, t: usize, z: usize) -> (usize, usize) {
        (z / self.actions2(t), z % self.actions2(t))
    }

    pub fn transition(&self, t: usize) -> &Tensor<f64> {
        &self.transition[t]
    }

    pub fn observation(&self, t: usize) -> &Tensor<f64> {
        &self.observation[t]
    }

    pub fn cost(&self, t: usize) -> &Tensor<f64> {
        &self.cost[t]
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    /// `[x][u1][u2][y2][x']` tensor of P[x', y2 | x, u1, u2].
    pub fn joint(&self, t: usize) -> &Tensor<f64> {
        &self.joint[t]
    }

    /// P[·, y2 | x, u1, u2] as a vector over x'.
    pub fn joint_row(&self, t: usize, x: usize, u1: usize, u2: usize, y2: usize) -> &[f64] {
        self.joint[t].block(&[x, u1, u2, y2])
    }
}

/// General-form game with player 1's private information equal to the state,
/// a trivial private space for player 2 and increments `z = (y2, u2)`.
pub fn lower_one_sided(g: &OneSidedGame) -> GameDefinition {
    let horizon = g.horizon();
    let mut stages = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let (nx, nu1, nu2) = (g.states(t), g.actions1(t), g.actions2(t));
        let spaces = StageSpaces {
            states: nx,
            actions1: nu1,
            actions2: nu2,
            private1: nx,
            private2: 1,
            increments: g.increments(t),
        };
        let kernel = (t + 1 < horizon).then(|| {
            let nxn = g.states(t + 1);
            let ny = g.observations(t);
            let nz = g.increments(t);
            let mut k = Tensor::zeros(&[nx, nx, 1, nu1, nu2, nxn, nxn, 1, nz]);
            for_each_index(&[nx, nx, nu1, nu2], |i| {
                let (x, p1, u1, u2) = (i[0], i[1], i[2], i[3]);
                let row = k.block_mut(&[x, p1, 0, u1, u2]);
                for y in 0..ny {
                    let z = y * nu2 + u2;
                    for (xn, &p) in g.joint_row(t, x, u1, u2, y).iter().enumerate() {
                        // layout [x'][p1' = x'][p2' = 0][z]
                        row[(xn * nxn + xn) * nz + z] = p;
                    }
                }
            });
            k
        });
        stages.push(Stage {
            spaces,
            kernel,
            cost: g.cost(t).clone(),
            labels: None,
        });
    }
    let nx = g.states(0);
    let mut initial = Tensor::zeros(&[nx, nx, 1]);
    for (x, &p) in g.initial().iter().enumerate() {
        initial.set(&[x, x, 0], p);
    }
    GameDefinition::new(stages, initial).expect("lowering preserves shapes")
}
