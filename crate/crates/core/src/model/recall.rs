//! Perfect-recall closure: augments one player's private information with
//! that player's full history of private information and own actions.

use crate::error::{Error, Result};
use crate::tensor::{for_each_index, Tensor};

use super::{GameDefinition, Stage, StageSpaces};

/// Largest kernel tensor the closure will allocate.
pub const RECALL_KERNEL_CAP: usize = 20_000_000;

/// Decodes augmented private indices back into histories.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RecallMap {
    pub player: usize,
    /// Per stage, per augmented index: `(parent index, own action, base private index)`.
    /// The parent and action are meaningless at stage 0.
    entries: Vec<Vec<(usize, usize, usize)>>,
}

impl RecallMap {
    pub fn sizes(&self) -> Vec<usize> {
        self.entries.iter().map(Vec::len).collect()
    }

    pub fn base(&self, t: usize, a: usize) -> usize {
        self.entries[t][a].2
    }

    /// Base private indices `p_0..=p_t` and own actions `u_0..u_{t-1}`.
    pub fn history(&self, t: usize, a: usize) -> (Vec<usize>, Vec<usize>) {
        let mut privs = vec![0; t + 1];
        let mut acts = vec![0; t];
        let mut cur = a;
        for s in (0..=t).rev() {
            let (parent, action, base) = self.entries[s][cur];
            privs[s] = base;
            if s > 0 {
                acts[s - 1] = action;
                cur = parent;
            }
        }
        (privs, acts)
    }

    /// Inverse of [`RecallMap::history`].
    pub fn encode(&self, privs: &[usize], acts: &[usize], sizes: &[(usize, usize)]) -> usize {
        let mut a = privs[0];
        for s in 1..privs.len() {
            let (nu, np) = sizes[s];
            a = (a * nu + acts[s - 1]) * np + privs[s];
        }
        a
    }
}

/// Returns a game in which `player`'s private information at stage t is the
/// tuple `(p_0, u_0, p_1, ..., u_{t-1}, p_t)` of its own base private
/// information and actions. Dynamics and costs are unchanged.
pub fn with_perfect_recall(g: &GameDefinition, player: usize) -> Result<(GameDefinition, RecallMap)> {
    if player != 1 && player != 2 {
        return Err(Error::InvalidArgument(format!("player must be 1 or 2, got {player}")));
    }
    let horizon = g.horizon();
    let mut entries: Vec<Vec<(usize, usize, usize)>> = Vec::with_capacity(horizon);
    entries.push((0..g.spaces(0).private(player)).map(|p| (0, 0, p)).collect());
    for t in 1..horizon {
        let prev = entries[t - 1].len();
        let nu = g.spaces(t - 1).actions(player);
        let np = g.spaces(t).private(player);
        let n = prev * nu * np;
        if n > RECALL_KERNEL_CAP {
            return Err(Error::CapExceeded {
                what: "augmented private space",
                limit: RECALL_KERNEL_CAP,
                actual: n,
            });
        }
        let mut e = Vec::with_capacity(n);
        for a in 0..prev {
            for u in 0..nu {
                for p in 0..np {
                    e.push((a, u, p));
                }
            }
        }
        entries.push(e);
    }

    let mut stages = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let base = g.spaces(t);
        let mut spaces = *base;
        if player == 1 {
            spaces.private1 = entries[t].len();
        } else {
            spaces.private2 = entries[t].len();
        }
        let kernel = if t + 1 < horizon {
            let nb = g.spaces(t + 1);
            let mut next = *nb;
            if player == 1 {
                next.private1 = entries[t + 1].len();
            } else {
                next.private2 = entries[t + 1].len();
            }
            let shape = [
                spaces.states,
                spaces.private1,
                spaces.private2,
                spaces.actions1,
                spaces.actions2,
                next.states,
                next.private1,
                next.private2,
                spaces.increments,
            ];
            let total: usize = shape.iter().product();
            if total > RECALL_KERNEL_CAP {
                return Err(Error::CapExceeded {
                    what: "augmented kernel entries",
                    limit: RECALL_KERNEL_CAP,
                    actual: total,
                });
            }
            Some(augment_kernel(g, t, player, &spaces, &next, shape))
        } else {
            None
        };
        stages.push(Stage {
            spaces,
            kernel,
            cost: g.cost(t).clone(),
            labels: None,
        });
    }
    let recall = RecallMap { player, entries };
    // Stage-0 augmented indices coincide with base indices.
    let augmented = GameDefinition::new(stages, g.initial().clone())?;
    Ok((augmented, recall))
}

fn augment_kernel(
    g: &GameDefinition,
    t: usize,
    player: usize,
    cur: &StageSpaces,
    next: &StageSpaces,
    shape: [usize; 9],
) -> Tensor<f64> {
    let mut k = Tensor::zeros(&shape);
    let base_next = g.spaces(t + 1);
    let nz = cur.increments;
    let nu_own = cur.actions(player);
    let np_own_next = base_next.private(player);
    let base_of = |a: usize| -> usize {
        // Base private index is the last component of the augmented tuple.
        if t == 0 {
            a
        } else {
            a % g.spaces(t).private(player)
        }
    };
    for_each_index(&shape[..5], |i| {
        let (x, a1, a2, u1, u2) = (i[0], i[1], i[2], i[3], i[4]);
        let (b1, b2) = if player == 1 { (base_of(a1), a2) } else { (a1, base_of(a2)) };
        let src = g.kernel_row(t, x, b1, b2, u1, u2);
        let own_a = if player == 1 { a1 } else { a2 };
        let own_u = if player == 1 { u1 } else { u2 };
        let mut dst = vec![0.0; k.block(i).len()];
        for (flat, &p) in src.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let (xn, p1n, p2n, z) = g.split_target(t, flat);
            let own_next = if player == 1 { p1n } else { p2n };
            let aug = (own_a * nu_own + own_u) * np_own_next + own_next;
            let (q1, q2) = if player == 1 { (aug, p2n) } else { (p1n, aug) };
            dst[((xn * next.private1 + q1) * next.private2 + q2) * nz + z] = p;
        }
        k.block_mut(i).copy_from_slice(&dst);
    });
    k
}
