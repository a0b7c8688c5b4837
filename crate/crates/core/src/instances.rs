//! Small named games and seeded random generators used by tests, the
//! acceptance suite and the example corpus.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use crate::model::{
    assemble_kernel, GameDefinition, OneSidedGame, Stage, StageDynamics, StageSpaces, StructuredDynamics, StructuredStage,
};
use crate::tensor::{for_each_index, Tensor};

fn tensor(shape: &[usize], data: Vec<f64>) -> Tensor<f64> {
    Tensor::from_vec(shape, data).expect("shape matches data")
}

fn tensor_fn(shape: &[usize], mut f: impl FnMut(&[usize]) -> f64) -> Tensor<f64> {
    let mut t = Tensor::zeros(shape);
    for_each_index(shape, |i| t.set(i, f(i)));
    t
}

fn index_fn(shape: &[usize], mut f: impl FnMut(&[usize]) -> usize) -> Tensor<usize> {
    let mut t = Tensor::zeros(shape);
    for_each_index(shape, |i| t.set(i, f(i)));
    t
}

/// One state, one stage; player 1 pays 1 when the actions match. Value 1/2.
pub fn matching_pennies() -> OneSidedGame {
    OneSidedGame::new(vec![], vec![], vec![tensor(&[1, 2, 2], vec![1.0, 0.0, 0.0, 1.0])], vec![1.0]).expect("valid")
}

/// Two-stage game with a static state. Player 1 earns `reward` (negative
/// cost) at stage 0 when its action names the state; player 2 sees that
/// action and at stage 1 guesses the state, costing player 1 one unit when
/// right. Player 1's stage-1 action is irrelevant.
pub fn revelation_game(prior: [f64; 2], reward: f64) -> OneSidedGame {
    let transition = tensor_fn(&[2, 2, 1, 2], |i| if i[0] == i[3] { 1.0 } else { 0.0 });
    let observation = tensor_fn(&[2, 2, 1, 2], |i| if i[1] == i[3] { 1.0 } else { 0.0 });
    let c0 = tensor_fn(&[2, 2, 1], |i| if i[0] == i[1] { -reward } else { 0.0 });
    let c1 = tensor_fn(&[2, 1, 2], |i| if i[0] == i[2] { 1.0 } else { 0.0 });
    OneSidedGame::new(vec![transition], vec![observation], vec![c0, c1], prior.to_vec()).expect("valid")
}

/// Revelation game without the stage-0 reward and with a uniform prior.
/// Value 1/2: player 1 can signal nothing.
pub fn guessing_game() -> OneSidedGame {
    revelation_game([0.5, 0.5], 0.0)
}

/// Guessing game in which player 1 has a single stage-0 action, so the
/// observation carries no information. Value 1/2.
pub fn uninformative_guessing_game() -> OneSidedGame {
    let transition = tensor_fn(&[2, 1, 1, 2], |i| if i[0] == i[3] { 1.0 } else { 0.0 });
    let observation = tensor(&[2, 1, 1, 1], vec![1.0, 1.0]);
    let c0 = tensor(&[2, 1, 1], vec![0.0, 0.0]);
    let c1 = tensor_fn(&[2, 1, 2], |i| if i[0] == i[2] { 1.0 } else { 0.0 });
    OneSidedGame::new(vec![transition], vec![observation], vec![c0, c1], vec![0.5, 0.5]).expect("valid")
}

/// One state repeated over `costs.len()` stages; player 2 observes nothing.
pub fn one_state_repeated(costs: &[Vec<Vec<f64>>]) -> OneSidedGame {
    let stage = |m: &Vec<Vec<f64>>| {
        let (n1, n2) = (m.len(), m[0].len());
        tensor(&[1, n1, n2], m.iter().flatten().copied().collect())
    };
    let cost: Vec<Tensor<f64>> = costs.iter().map(stage).collect();
    let mut tr = Vec::new();
    let mut ob = Vec::new();
    for m in &costs[..costs.len() - 1] {
        let (n1, n2) = (m.len(), m[0].len());
        tr.push(tensor(&[1, n1, n2, 1], vec![1.0; n1 * n2]));
        ob.push(tensor(&[1, n1, n2, 1], vec![1.0; n1 * n2]));
    }
    OneSidedGame::new(tr, ob, cost, vec![1.0]).expect("valid")
}

/// Game whose stage cost is the constant `c`.
pub fn constant_cost_game(horizon: usize, states: usize, c: f64) -> OneSidedGame {
    let n = states;
    let tr = (0..horizon - 1).map(|_| tensor(&[n, 2, 2, n], vec![1.0 / n as f64; n * 4 * n])).collect();
    let ob = (0..horizon - 1).map(|_| tensor(&[n, 2, 2, 2], vec![0.5; n * 8])).collect();
    let cost = (0..horizon).map(|_| tensor(&[n, 2, 2], vec![c; n * 4])).collect();
    OneSidedGame::new(tr, ob, cost, vec![1.0 / n as f64; n]).expect("valid")
}

/// Sizes of a random one-sided game.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OneSidedShape {
    pub horizon: usize,
    pub states: usize,
    pub actions1: usize,
    pub actions2: usize,
    pub observations: usize,
}

fn simplex(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

fn stochastic(rng: &mut ChaCha8Rng, prefix: &[usize], n: usize) -> Tensor<f64> {
    let mut shape = prefix.to_vec();
    shape.push(n);
    let rows: usize = prefix.iter().product();
    tensor(&shape, (0..rows).flat_map(|_| simplex(rng, n)).collect())
}

fn costs(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    let n: usize = shape.iter().product();
    tensor(shape, (0..n).map(|_| rng.random::<f64>()).collect())
}

/// Random one-sided game with dense Dirichlet(1) rows and costs in `[0, 1)`.
pub fn random_one_sided(seed: u64, s: OneSidedShape) -> OneSidedGame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (nx, n1, n2, ny) = (s.states, s.actions1, s.actions2, s.observations);
    let mut tr = Vec::new();
    let mut ob = Vec::new();
    for _ in 0..s.horizon - 1 {
        tr.push(stochastic(&mut rng, &[nx, n1, n2], nx));
        ob.push(stochastic(&mut rng, &[nx, n1, n2], ny));
    }
    let cost = (0..s.horizon).map(|_| costs(&mut rng, &[nx, n1, n2])).collect();
    let initial = simplex(&mut rng, nx);
    OneSidedGame::new(tr, ob, cost, initial).expect("valid")
}

/// Two-stage game with two states where both players start with no private
/// information, then each privately observes one noisy bit of the next
/// state; both actions become common. Both players have perfect recall.
pub fn random_two_sided(seed: u64) -> GameDefinition {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s0 = StageSpaces {
        states: 2,
        actions1: 2,
        actions2: 2,
        private1: 1,
        private2: 1,
        increments: 4,
    };
    let s1 = StageSpaces {
        states: 2,
        actions1: 2,
        actions2: 2,
        private1: 2,
        private2: 2,
        increments: 0,
    };
    let dynamics = StageDynamics {
        transition: stochastic(&mut rng, &[2, 2, 2], 2),
        observation1: stochastic(&mut rng, &[2, 2, 2], 2),
        observation2: stochastic(&mut rng, &[2, 2, 2], 2),
        xi1: index_fn(&[1, 2, 2], |i| i[2]),
        xi2: index_fn(&[1, 2, 2], |i| i[2]),
        zeta: index_fn(&[1, 1, 2, 2, 2, 2], |i| i[2] * 2 + i[3]),
    };
    let c0 = costs(&mut rng, &[2, 2, 2]);
    let c1 = costs(&mut rng, &[2, 2, 2]);
    let p = simplex(&mut rng, 2);
    let sd = StructuredDynamics {
        stages: vec![
            StructuredStage {
                spaces: s0,
                cost: c0,
                dynamics: Some(dynamics),
                labels: None,
            },
            StructuredStage {
                spaces: s1,
                cost: c1,
                dynamics: None,
                labels: None,
            },
        ],
    };
    assemble_kernel(&sd, tensor(&[2, 1, 1], p)).expect("valid")
}

/// Player 1 privately sees the state at stage 0, its action becomes
/// common, and its private information is then reset: at stage 1 it no
/// longer knows what it saw.
pub fn delayed_sharing_forgetful() -> GameDefinition {
    let s0 = StageSpaces {
        states: 2,
        actions1: 2,
        actions2: 2,
        private1: 2,
        private2: 1,
        increments: 2,
    };
    let s1 = StageSpaces {
        states: 2,
        actions1: 2,
        actions2: 2,
        private1: 1,
        private2: 1,
        increments: 0,
    };
    // [x][p1][p2][u1][u2][x'][p1'][p2'][z]
    let k = tensor_fn(&[2, 2, 1, 2, 2, 2, 1, 1, 2], |i| if i[5] == i[0] && i[8] == i[3] { 1.0 } else { 0.0 });
    let cost = |rng: &mut ChaCha8Rng| costs(rng, &[2, 2, 2]);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let initial = tensor(&[2, 2, 1], vec![0.5, 0.0, 0.0, 0.5]);
    GameDefinition::new(
        vec![
            Stage {
                spaces: s0,
                kernel: Some(k),
                cost: cost(&mut rng),
                labels: None,
            },
            Stage {
                spaces: s1,
                kernel: None,
                cost: cost(&mut rng),
                labels: None,
            },
        ],
        initial,
    )
    .expect("valid")
}

/// Both players see the state; actions and states are common. Random costs and
/// transitions.
pub fn full_information(seed: u64, horizon: usize) -> GameDefinition {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stages = Vec::new();
    for t in 0..horizon {
        let last = t + 1 == horizon;
        let spaces = StageSpaces {
            states: 2,
            actions1: 2,
            actions2: 2,
            private1: 2,
            private2: 2,
            increments: if last { 0 } else { 16 },
        };
        let kernel = (!last).then(|| {
            let tr = stochastic(&mut rng, &[2, 2, 2], 2);
            tensor_fn(&[2, 2, 2, 2, 2, 2, 2, 2, 16], |i| {
                let (x, u1, u2, xn, p1n, p2n, z) = (i[0], i[3], i[4], i[5], i[6], i[7], i[8]);
                if p1n == xn && p2n == xn && z == ((x * 2 + u1) * 2 + u2) * 2 + xn {
                    *tr.get(&[x, u1, u2, xn])
                } else {
                    0.0
                }
            })
        });
        stages.push(Stage {
            spaces,
            kernel,
            cost: costs(&mut rng, &[2, 2, 2]),
            labels: None,
        });
    }
    let p = simplex(&mut rng, 2);
    let initial = tensor(&[2, 2, 2], vec![p[0], 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, p[1]]);
    GameDefinition::new(stages, initial).expect("valid")
}

/// Named one-sided corpus used for oracle comparisons. Ten games with at
/// most three states, horizon at most three and at most three observations.
pub fn one_sided_corpus() -> Vec<(String, OneSidedGame)> {
    let shape = |horizon, states, actions1, actions2, observations| OneSidedShape {
        horizon,
        states,
        actions1,
        actions2,
        observations,
    };
    vec![
        ("revelation".into(), revelation_game([0.7, 0.3], 0.4)),
        ("guessing".into(), guessing_game()),
        ("uninformative".into(), uninformative_guessing_game()),
        (
            "one-state".into(),
            one_state_repeated(&[
                vec![vec![1.0, 0.0], vec![0.0, 1.0]],
                vec![vec![2.0, -1.0], vec![0.0, 0.5]],
                vec![vec![0.3, 0.9, 0.1], vec![0.6, 0.2, 0.8]],
            ]),
        ),
        ("random-a".into(), random_one_sided(101, shape(1, 3, 3, 3, 1))),
        ("random-b".into(), random_one_sided(102, shape(2, 3, 2, 2, 3))),
        ("random-c".into(), random_one_sided(103, shape(2, 2, 2, 2, 2))),
        ("random-d".into(), random_one_sided(104, shape(2, 3, 3, 2, 2))),
        ("random-e".into(), random_one_sided(105, shape(3, 2, 2, 2, 2))),
        ("random-f".into(), random_one_sided(106, shape(3, 2, 2, 2, 2))),
    ]
}
