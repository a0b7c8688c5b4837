//! Strategies over information histories, projection of prescription-history
//! strategies, player 1's belief-based strategy, best responses, strategy
//! reduction and simulation.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::belief::{one_sided_next_belief, Belief, Prescription};
use crate::error::{Error, Result};
use crate::model::{lower_one_sided, GameDefinition, OneSidedGame};
use crate::solver::OneSidedValueFunction;
use crate::stage::{one_sided_backup_maximin, one_sided_backup_minmax, AlphaSet};

/// Default cap on enumerated `(common history, state, private)` tuples.
pub const HISTORY_CAP: usize = 1_000_000;

/// Canonical key of a common history, `c=z0.z1...`.
pub fn common_key(common: &[usize]) -> String {
    let c: Vec<String> = common.iter().map(usize::to_string).collect();
    format!("c={}", c.join("."))
}

/// Canonical key of an information realization `(c_t, p_t)`.
pub fn history_key(common: &[usize], private: usize) -> String {
    format!("{}|p={private}", common_key(common))
}

/// Anything that maps an information realization to an action distribution.
pub trait Policy: Sync {
    fn action_dist(&self, t: usize, common: &[usize], private: usize) -> Result<Vec<f64>>;
}

/// Behavioral strategy given by tables keyed by [`history_key`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistoryStrategy {
    pub player: usize,
    pub stages: Vec<BTreeMap<String, Vec<f64>>>,
}

impl HistoryStrategy {
    pub fn row(&self, t: usize, common: &[usize], private: usize) -> Result<&[f64]> {
        let key = history_key(common, private);
        self.stages
            .get(t)
            .and_then(|s| s.get(&key))
            .map(Vec::as_slice)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "strategy of player {} has no entry {key} at stage {t}",
                    self.player
                ))
            })
    }

    /// Table over all reachable information realizations of `player`.
    pub fn from_fn(
        g: &GameDefinition,
        player: usize,
        cap: usize,
        mut f: impl FnMut(usize, &[usize], usize) -> Vec<f64>,
    ) -> Result<Self> {
        let support = support_layers(g, cap)?;
        let stages = support
            .iter()
            .enumerate()
            .map(|(t, layer)| {
                let mut m = BTreeMap::new();
                for (c, tuples) in layer {
                    let ps: BTreeSet<usize> = tuples.iter().map(|&(_, p1, p2)| if player == 1 { p1 } else { p2 }).collect();
                    for p in ps {
                        m.insert(history_key(c, p), f(t, c, p));
                    }
                }
                m
            })
            .collect();
        Ok(HistoryStrategy { player, stages })
    }

    pub fn uniform(g: &GameDefinition, player: usize, cap: usize) -> Result<Self> {
        Self::from_fn(g, player, cap, |t, _, _| {
            let n = g.spaces(t).actions(player);
            vec![1.0 / n as f64; n]
        })
    }

    /// Largest deviation of any row from a probability vector.
    pub fn row_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for s in &self.stages {
            for r in s.values() {
                let sum: f64 = r.iter().sum();
                worst = worst.max((sum - 1.0).abs());
                for &v in r {
                    worst = worst.max(-v);
                    if !v.is_finite() {
                        return f64::INFINITY;
                    }
                }
            }
        }
        worst
    }

    pub fn validate(&self) -> Result<()> {
        let e = self.row_error();
        if e > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "strategy rows deviate from distributions by {e:e}"
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("strategy serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: HistoryStrategy = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }
}

impl Policy for HistoryStrategy {
    fn action_dist(&self, t: usize, common: &[usize], private: usize) -> Result<Vec<f64>> {
        self.row(t, common, private).map(<[f64]>::to_vec)
    }
}

/// Per stage, the common histories reachable under the kernel's support
/// with every action possible, and the `(x, p1, p2)` tuples each allows.
pub type SupportLayers = Vec<BTreeMap<Vec<usize>, BTreeSet<(usize, usize, usize)>>>;

pub fn support_layers(g: &GameDefinition, cap: usize) -> Result<SupportLayers> {
    let sh = g.initial().shape().to_vec();
    let mut first = BTreeMap::new();
    let mut count = 0;
    for (flat, &p) in g.initial().data().iter().enumerate() {
        if p > 0.0 {
            first
                .entry(Vec::new())
                .or_insert_with(BTreeSet::new)
                .insert((flat / (sh[1] * sh[2]), (flat / sh[2]) % sh[1], flat % sh[2]));
            count += 1;
        }
    }
    let mut layers = vec![first];
    for t in 0..g.horizon() - 1 {
        let s = *g.spaces(t);
        let mut next: BTreeMap<Vec<usize>, BTreeSet<(usize, usize, usize)>> = BTreeMap::new();
        for (c, tuples) in &layers[t] {
            for &(x, p1, p2) in tuples {
                for u1 in 0..s.actions1 {
                    for u2 in 0..s.actions2 {
                        for (flat, &k) in g.kernel_row(t, x, p1, p2, u1, u2).iter().enumerate() {
                            if k > 0.0 {
                                let (xn, p1n, p2n, z) = g.split_target(t, flat);
                                let mut cn = c.clone();
                                cn.push(z);
                                if next.entry(cn).or_default().insert((xn, p1n, p2n)) {
                                    count += 1;
                                    if count > cap {
                                        return Err(Error::CapExceeded {
                                            what: "enumerated histories",
                                            limit: cap,
                                            actual: count,
                                        });
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        layers.push(next);
    }
    Ok(layers)
}

/// Play key: `(common history, x, p1, p2, u1, u2)`.
pub type PlayKey = (Vec<usize>, usize, usize, usize, usize, usize);
/// Per stage, the probability of every play key.
pub type PlayDistribution = Vec<BTreeMap<PlayKey, f64>>;

fn initial_layer(g: &GameDefinition) -> BTreeMap<(Vec<usize>, usize, usize, usize), f64> {
    let sh = g.initial().shape().to_vec();
    g.initial()
        .data()
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(flat, &p)| ((Vec::new(), flat / (sh[1] * sh[2]), (flat / sh[2]) % sh[1], flat % sh[2]), p))
        .collect()
}

/// Exact distribution of play under a behavioral profile.
pub fn play_distribution(g: &GameDefinition, s1: &dyn Policy, s2: &dyn Policy, cap: usize) -> Result<PlayDistribution> {
    let mut layer = initial_layer(g);
    let mut out = Vec::with_capacity(g.horizon());
    for t in 0..g.horizon() {
        let s = *g.spaces(t);
        let last = t + 1 == g.horizon();
        let mut play = BTreeMap::new();
        let mut next: BTreeMap<(Vec<usize>, usize, usize, usize), f64> = BTreeMap::new();
        for ((c, x, p1, p2), w) in &layer {
            let d1 = s1.action_dist(t, c, *p1)?;
            let d2 = s2.action_dist(t, c, *p2)?;
            for u1 in 0..s.actions1 {
                for u2 in 0..s.actions2 {
                    let a = w * d1[u1] * d2[u2];
                    if a == 0.0 {
                        continue;
                    }
                    *play.entry((c.clone(), *x, *p1, *p2, u1, u2)).or_insert(0.0) += a;
                    if last {
                        continue;
                    }
                    for (flat, &k) in g.kernel_row(t, *x, *p1, *p2, u1, u2).iter().enumerate() {
                        if k > 0.0 {
                            let (xn, p1n, p2n, z) = g.split_target(t, flat);
                            let mut cn = c.clone();
                            cn.push(z);
                            *next.entry((cn, xn, p1n, p2n)).or_insert(0.0) += a * k;
                        }
                    }
                }
            }
        }
        if next.len() > cap {
            return Err(Error::CapExceeded {
                what: "enumerated histories",
                limit: cap,
                actual: next.len(),
            });
        }
        out.push(play);
        layer = next;
    }
    Ok(out)
}

/// Exact expected total cost of a behavioral profile.
pub fn evaluate_profile(g: &GameDefinition, s1: &dyn Policy, s2: &dyn Policy, cap: usize) -> Result<f64> {
    let play = play_distribution(g, s1, s2, cap)?;
    Ok(play
        .iter()
        .enumerate()
        .map(|(t, m)| {
            m.iter()
                .map(|((_, x, _, _, u1, u2), p)| p * g.cost(t).get(&[*x, *u1, *u2]))
                .sum::<f64>()
        })
        .sum())
}

/// Strategy that selects a prescription from the common history and the
/// prescriptions of both players at earlier stages.
pub trait ExpandedStrategy {
    fn player(&self) -> usize;
    fn prescription(
        &self,
        t: usize,
        common: &[usize],
        past: &[(Prescription, Prescription)],
        rows: usize,
        actions: usize,
    ) -> Result<Prescription>;
}

impl ExpandedStrategy for HistoryStrategy {
    fn player(&self) -> usize {
        self.player
    }

    /// Ignores the prescription history. Private values missing from the
    /// table get uniform rows.
    fn prescription(
        &self,
        t: usize,
        common: &[usize],
        _past: &[(Prescription, Prescription)],
        rows: usize,
        actions: usize,
    ) -> Result<Prescription> {
        let r = (0..rows)
            .map(|p| {
                self.row(t, common, p)
                    .map(<[f64]>::to_vec)
                    .unwrap_or_else(|_| vec![1.0 / actions as f64; actions])
            })
            .collect();
        Prescription::new(t, self.player, r)
    }
}

type Path = Vec<(Prescription, Prescription)>;

fn stage_prescriptions(
    e1: &dyn ExpandedStrategy,
    e2: &dyn ExpandedStrategy,
    g: &GameDefinition,
    t: usize,
    c: &[usize],
    past: &[(Prescription, Prescription)],
) -> Result<(Prescription, Prescription)> {
    let s = g.spaces(t);
    Ok((
        e1.prescription(t, c, past, s.private1, s.actions1)?,
        e2.prescription(t, c, past, s.private2, s.actions2)?,
    ))
}

/// Replaces the prescription history by its value along each common
/// history: `γ_s = χ_s(c_s, γ_{0:s-1})` by forward substitution. The result
/// depends on the common history only.
pub fn rho_project(
    e1: &dyn ExpandedStrategy,
    e2: &dyn ExpandedStrategy,
    g: &GameDefinition,
    cap: usize,
) -> Result<(HistoryStrategy, HistoryStrategy)> {
    let support = support_layers(g, cap)?;
    let mut out1 = HistoryStrategy {
        player: 1,
        stages: Vec::new(),
    };
    let mut out2 = HistoryStrategy {
        player: 2,
        stages: Vec::new(),
    };
    let mut paths: BTreeMap<Vec<usize>, Path> = BTreeMap::from([(Vec::new(), Vec::new())]);
    for (t, layer) in support.iter().enumerate() {
        let mut t1 = BTreeMap::new();
        let mut t2 = BTreeMap::new();
        let mut next_paths = BTreeMap::new();
        for (c, tuples) in layer {
            let past = &paths[c];
            let (g1, g2) = stage_prescriptions(e1, e2, g, t, c, past)?;
            for &(_, p1, p2) in tuples {
                t1.insert(history_key(c, p1), g1.row(p1).to_vec());
                t2.insert(history_key(c, p2), g2.row(p2).to_vec());
            }
            if let Some(nl) = support.get(t + 1) {
                for cn in nl.keys().filter(|cn| cn[..t] == c[..]) {
                    let mut p = past.clone();
                    p.push((g1.clone(), g2.clone()));
                    next_paths.insert(cn.clone(), p);
                }
            }
        }
        out1.stages.push(t1);
        out2.stages.push(t2);
        paths = next_paths;
    }
    Ok((out1, out2))
}

/// Distribution of play when the expanded strategies are run directly,
/// carrying the realized prescription history alongside every node.
pub fn expanded_play_distribution(
    e1: &dyn ExpandedStrategy,
    e2: &dyn ExpandedStrategy,
    g: &GameDefinition,
    cap: usize,
) -> Result<PlayDistribution> {
    let mut layer: Vec<(Vec<usize>, Path, usize, usize, usize, f64)> = initial_layer(g)
        .into_iter()
        .map(|((c, x, p1, p2), w)| (c, Vec::new(), x, p1, p2, w))
        .collect();
    let mut out = Vec::with_capacity(g.horizon());
    for t in 0..g.horizon() {
        let s = *g.spaces(t);
        let last = t + 1 == g.horizon();
        let mut play = BTreeMap::new();
        let mut next = Vec::new();
        for (c, path, x, p1, p2, w) in &layer {
            let (g1, g2) = stage_prescriptions(e1, e2, g, t, c, path)?;
            for u1 in 0..s.actions1 {
                for u2 in 0..s.actions2 {
                    let a = w * g1.get(*p1, u1) * g2.get(*p2, u2);
                    if a == 0.0 {
                        continue;
                    }
                    *play.entry((c.clone(), *x, *p1, *p2, u1, u2)).or_insert(0.0) += a;
                    if last {
                        continue;
                    }
                    for (flat, &k) in g.kernel_row(t, *x, *p1, *p2, u1, u2).iter().enumerate() {
                        if k > 0.0 {
                            let (xn, p1n, p2n, z) = g.split_target(t, flat);
                            let mut cn = c.clone();
                            cn.push(z);
                            let mut pn = path.clone();
                            pn.push((g1.clone(), g2.clone()));
                            next.push((cn, pn, xn, p1n, p2n, a * k));
                        }
                    }
                }
            }
        }
        if next.len() > cap {
            return Err(Error::CapExceeded {
                what: "enumerated histories",
                limit: cap,
                actual: next.len(),
            });
        }
        out.push(play);
        layer = next;
    }
    Ok(out)
}

/// Player 1's strategy that solves the min-max stage program at the current
/// common-information belief.
#[derive(Clone, Debug, PartialEq)]
pub struct CIBStrategy {
    game: OneSidedGame,
    alpha: Vec<AlphaSet>,
}

pub fn extract_cib_strategy(vf: &OneSidedValueFunction, g: &OneSidedGame) -> CIBStrategy {
    CIBStrategy {
        game: g.clone(),
        alpha: (0..=vf.horizon()).map(|t| vf.alpha(t).clone()).collect(),
    }
}

/// Unrolled belief-based strategy with the beliefs it visited.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnrolledCib {
    pub strategy: HistoryStrategy,
    /// Per stage, common history key `c=...` to belief over states.
    pub beliefs: Vec<BTreeMap<String, Vec<f64>>>,
}

impl CIBStrategy {
    pub fn horizon(&self) -> usize {
        self.game.horizon()
    }

    fn next(&self, t: usize) -> Option<&AlphaSet> {
        (t + 1 < self.horizon()).then(|| &self.alpha[t + 1])
    }

    pub fn prescription(&self, t: usize, pi: &Belief) -> Result<Prescription> {
        Ok(one_sided_backup_minmax(pi, self.next(t), &self.game, t)?.gamma1)
    }

    /// Action distribution at state `x`.
    pub fn action(&self, t: usize, pi: &Belief, x: usize) -> Result<Vec<f64>> {
        Ok(self.prescription(t, pi)?.row(x).to_vec())
    }

    /// Player 2's maximin action distribution at `π`. Heuristic play only.
    pub fn heuristic_player2(&self, t: usize, pi: &Belief) -> Result<Vec<f64>> {
        let q = one_sided_backup_maximin(pi, self.next(t), &self.game, t)?.q;
        let s: f64 = q.iter().map(|v| v.max(0.0)).sum();
        Ok(if s > 0.0 {
            q.iter().map(|v| v.max(0.0) / s).collect()
        } else {
            vec![1.0 / q.len() as f64; q.len()]
        })
    }

    /// Walks every reachable common history of the kernel-form game,
    /// tracking the belief, and tabulates both the strategy and the beliefs.
    pub fn unroll(&self, cap: usize) -> Result<UnrolledCib> {
        self.unroll_with(cap, |t, pi| self.prescription(t, pi).map(|p| (0..p.rows()).map(|x| p.row(x).to_vec()).collect()))
            .map(|(strategy, beliefs)| UnrolledCib { strategy, beliefs })
    }

    /// Player 2's heuristic maximin play along the same histories.
    pub fn unroll_player2(&self, cap: usize) -> Result<HistoryStrategy> {
        let g = &self.game;
        let lowered = lower_one_sided(g);
        let support = support_layers(&lowered, cap)?;
        let mut stages = Vec::with_capacity(support.len());
        let mut beliefs: BTreeMap<Vec<usize>, Belief> = BTreeMap::from([(Vec::new(), Belief::initial_one_sided(g))]);
        for (t, layer) in support.iter().enumerate() {
            let mut table = BTreeMap::new();
            let mut next = BTreeMap::new();
            for c in layer.keys() {
                let pi = &beliefs[c];
                table.insert(history_key(c, 0), self.heuristic_player2(t, pi)?);
                if t + 1 < g.horizon() {
                    let g1 = self.prescription(t, pi)?;
                    for cn in support[t + 1].keys().filter(|cn| cn[..t] == c[..]) {
                        next.insert(cn.clone(), one_sided_next_belief(pi, &g1, cn[t], g)?);
                    }
                }
            }
            stages.push(table);
            beliefs = next;
        }
        Ok(HistoryStrategy { player: 2, stages })
    }

    fn unroll_with(
        &self,
        cap: usize,
        rows_at: impl Fn(usize, &Belief) -> Result<Vec<Vec<f64>>>,
    ) -> Result<(HistoryStrategy, Vec<BTreeMap<String, Vec<f64>>>)> {
        let g = &self.game;
        let lowered = lower_one_sided(g);
        let support = support_layers(&lowered, cap)?;
        let mut stages = Vec::with_capacity(support.len());
        let mut belief_tables = Vec::with_capacity(support.len());
        let mut beliefs: BTreeMap<Vec<usize>, Belief> = BTreeMap::from([(Vec::new(), Belief::initial_one_sided(g))]);
        for (t, layer) in support.iter().enumerate() {
            let mut table = BTreeMap::new();
            let mut btable = BTreeMap::new();
            let mut next = BTreeMap::new();
            for (c, tuples) in layer {
                let pi = &beliefs[c];
                let rows = rows_at(t, pi)?;
                for &(x, _, _) in tuples {
                    table.insert(history_key(c, x), rows[x].clone());
                }
                btable.insert(common_key(c), pi.direction().to_vec());
                if t + 1 < g.horizon() {
                    let g1 = Prescription::new(t, 1, rows)?;
                    for cn in support[t + 1].keys().filter(|cn| cn[..t] == c[..]) {
                        next.insert(cn.clone(), one_sided_next_belief(pi, &g1, cn[t], g)?);
                    }
                }
            }
            stages.push(table);
            belief_tables.push(btable);
            beliefs = next;
        }
        Ok((HistoryStrategy { player: 1, stages }, belief_tables))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BestResponse {
    pub value: f64,
    pub strategy: HistoryStrategy,
}

type InfoKey = (Vec<usize>, usize);

/// Player 2's best-response value against a fixed player-1 strategy, by
/// backward induction over player 2's information sets. Measures are
/// propagated with player 2's actions left open, so every successor
/// information set hangs below exactly one `(information set, action)` pair
/// when player 2 has perfect recall; otherwise the call is refused. The
/// maximum over actions is attained by a pure choice (lowest index on ties).
pub fn best_response_value(g: &GameDefinition, s1: &dyn Policy, cap: usize) -> Result<BestResponse> {
    let horizon = g.horizon();
    let mut measures: Vec<BTreeMap<InfoKey, BTreeMap<(usize, usize), f64>>> = Vec::with_capacity(horizon);
    let mut first: BTreeMap<InfoKey, BTreeMap<(usize, usize), f64>> = BTreeMap::new();
    for ((c, x, p1, p2), w) in initial_layer(g) {
        *first.entry((c, p2)).or_default().entry((x, p1)).or_insert(0.0) += w;
    }
    measures.push(first);
    let mut immediate: Vec<BTreeMap<InfoKey, Vec<f64>>> = Vec::with_capacity(horizon);
    let mut children: Vec<BTreeMap<(InfoKey, usize), Vec<InfoKey>>> = Vec::with_capacity(horizon);
    let mut total = 0;
    for t in 0..horizon {
        let s = *g.spaces(t);
        let last = t + 1 == horizon;
        let mut imm = BTreeMap::new();
        let mut kids: BTreeMap<(InfoKey, usize), Vec<InfoKey>> = BTreeMap::new();
        let mut parent: BTreeMap<InfoKey, (InfoKey, usize)> = BTreeMap::new();
        let mut next: BTreeMap<InfoKey, BTreeMap<(usize, usize), f64>> = BTreeMap::new();
        for (info, nodes) in &measures[t] {
            let (c, _p2) = info;
            let mut costs = vec![0.0; s.actions2];
            for (&(x, p1), &w) in nodes {
                let d1 = s1.action_dist(t, c, p1)?;
                for u1 in 0..s.actions1 {
                    let a = w * d1[u1];
                    if a == 0.0 {
                        continue;
                    }
                    for (u2, cost) in costs.iter_mut().enumerate() {
                        *cost += a * g.cost(t).get(&[x, u1, u2]);
                        if last {
                            continue;
                        }
                        for (flat, &k) in g.kernel_row(t, x, p1, info.1, u1, u2).iter().enumerate() {
                            if k == 0.0 {
                                continue;
                            }
                            let (xn, p1n, p2n, z) = g.split_target(t, flat);
                            let mut cn = c.clone();
                            cn.push(z);
                            let child = (cn, p2n);
                            match parent.get(&child) {
                                None => {
                                    parent.insert(child.clone(), (info.clone(), u2));
                                    kids.entry((info.clone(), u2)).or_default().push(child.clone());
                                }
                                Some((pi, pu)) if *pi == *info && *pu == u2 => {}
                                Some((pi, pu)) => {
                                    return Err(Error::ImperfectRecall {
                                        player: 2,
                                        first: format!("{} then action {pu}", history_key(&pi.0, pi.1)),
                                        second: format!("{} then action {u2}", history_key(&info.0, info.1)),
                                    });
                                }
                            }
                            *next.entry(child).or_default().entry((xn, p1n)).or_insert(0.0) += a * k;
                        }
                    }
                }
            }
            imm.insert(info.clone(), costs);
        }
        total += next.len();
        if total > cap {
            return Err(Error::CapExceeded {
                what: "player-2 information sets",
                limit: cap,
                actual: total,
            });
        }
        immediate.push(imm);
        children.push(kids);
        if !last {
            measures.push(next);
        }
    }

    let mut values: BTreeMap<InfoKey, f64> = BTreeMap::new();
    let mut choice: Vec<BTreeMap<InfoKey, usize>> = vec![BTreeMap::new(); horizon];
    for t in (0..horizon).rev() {
        let mut stage_values = BTreeMap::new();
        for (info, costs) in &immediate[t] {
            let mut best = (0, f64::NEG_INFINITY);
            for (u2, c) in costs.iter().enumerate() {
                let cont: f64 = children[t]
                    .get(&(info.clone(), u2))
                    .map_or(0.0, |js| js.iter().map(|j| values[j]).sum());
                let v = c + cont;
                if v > best.1 {
                    best = (u2, v);
                }
            }
            stage_values.insert(info.clone(), best.1);
            choice[t].insert(info.clone(), best.0);
        }
        values = stage_values;
    }
    let value = values.values().sum();
    let strategy = HistoryStrategy::from_fn(g, 2, cap, |t, c, p| {
        let n = g.spaces(t).actions2;
        let a = choice[t].get(&(c.to_vec(), p)).copied().unwrap_or(0);
        (0..n).map(|u| if u == a { 1.0 } else { 0.0 }).collect()
    })?;
    Ok(BestResponse { value, strategy })
}

/// Replaces a player-1 strategy of the perfect-recall game `full` (private
/// information = own history) by one that depends only on the current state
/// and the common history, as a strategy of the kernel-form game `reduced`
/// in which player 1's private information is the state.
///
/// The conditional law of player 1's history given the common history is
/// computed by filtering with player 2's actions read from the common
/// history; rows of state/history pairs with zero mass are uniform.
pub fn reduce_strategy(s1: &HistoryStrategy, full: &GameDefinition, reduced: &GameDefinition, cap: usize) -> Result<HistoryStrategy> {
    if full.horizon() != reduced.horizon() {
        return Err(Error::InvalidArgument("games have different horizons".into()));
    }
    let horizon = full.horizon();
    let mut layer: BTreeMap<Vec<usize>, BTreeMap<(usize, usize), f64>> = BTreeMap::new();
    for ((c, x, a, _), w) in initial_layer(full) {
        *layer.entry(c).or_default().entry((x, a)).or_insert(0.0) += w;
    }
    let mut stages = Vec::with_capacity(horizon);
    let support = support_layers(reduced, cap)?;
    for t in 0..horizon {
        let s = *full.spaces(t);
        let nu1 = s.actions1;
        // Σ_a μ(c, x, a) g1(c, a) and Σ_a μ(c, x, a), per (c, x).
        let mut num: BTreeMap<(Vec<usize>, usize), Vec<f64>> = BTreeMap::new();
        let mut den: BTreeMap<(Vec<usize>, usize), f64> = BTreeMap::new();
        let mut next: BTreeMap<Vec<usize>, BTreeMap<(usize, usize), f64>> = BTreeMap::new();
        for (c, nodes) in &layer {
            for (&(x, a), &w) in nodes {
                let d = s1.row(t, c, a)?;
                let e = num.entry((c.clone(), x)).or_insert_with(|| vec![0.0; nu1]);
                for (u1, v) in e.iter_mut().enumerate() {
                    *v += w * d[u1];
                }
                *den.entry((c.clone(), x)).or_insert(0.0) += w;
                if t + 1 == horizon {
                    continue;
                }
                for u1 in 0..nu1 {
                    let b = w * d[u1];
                    if b == 0.0 {
                        continue;
                    }
                    for u2 in 0..s.actions2 {
                        for (flat, &k) in full.kernel_row(t, x, a, 0, u1, u2).iter().enumerate() {
                            if k > 0.0 {
                                let (xn, an, _, z) = full.split_target(t, flat);
                                let mut cn = c.clone();
                                cn.push(z);
                                *next.entry(cn).or_default().entry((xn, an)).or_insert(0.0) += b * k;
                            }
                        }
                    }
                }
            }
        }
        if next.values().map(BTreeMap::len).sum::<usize>() > cap {
            return Err(Error::CapExceeded {
                what: "enumerated histories",
                limit: cap,
                actual: next.values().map(BTreeMap::len).sum(),
            });
        }
        let mut table = BTreeMap::new();
        for (c, tuples) in &support[t] {
            for &(x, p1, _) in tuples {
                let key = (c.clone(), x);
                let row = match (num.get(&key), den.get(&key)) {
                    (Some(n), Some(&d)) if d != 0.0 => n.iter().map(|v| v / d).collect(),
                    _ => vec![1.0 / nu1 as f64; nu1],
                };
                table.insert(history_key(c, p1), row);
            }
        }
        stages.push(table);
        layer = next;
    }
    Ok(HistoryStrategy { player: 1, stages })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub episodes: usize,
    pub mean: f64,
    pub std_error: f64,
}

fn draw(rng: &mut ChaCha8Rng, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

/// Monte-Carlo estimate of the expected total cost by inverse-CDF sampling.
/// Episode `i` uses stream `i` of a generator seeded with `seed`.
pub fn simulate(g: &GameDefinition, s1: &dyn Policy, s2: &dyn Policy, seed: u64, episodes: usize) -> Result<SimulationReport> {
    if episodes == 0 {
        return Err(Error::InvalidArgument("at least one episode is required".into()));
    }
    let sh = g.initial().shape().to_vec();
    let costs = (0..episodes)
        .into_par_iter()
        .map(|ep| -> Result<f64> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(ep as u64);
            let flat = draw(&mut rng, g.initial().data());
            let (mut x, mut p1, mut p2) = (flat / (sh[1] * sh[2]), (flat / sh[2]) % sh[1], flat % sh[2]);
            let mut c = Vec::with_capacity(g.horizon());
            let mut total = 0.0;
            for t in 0..g.horizon() {
                let u1 = draw(&mut rng, &s1.action_dist(t, &c, p1)?);
                let u2 = draw(&mut rng, &s2.action_dist(t, &c, p2)?);
                total += g.cost(t).get(&[x, u1, u2]);
                if t + 1 < g.horizon() {
                    let k = draw(&mut rng, g.kernel_row(t, x, p1, p2, u1, u2));
                    let (xn, p1n, p2n, z) = g.split_target(t, k);
                    (x, p1, p2) = (xn, p1n, p2n);
                    c.push(z);
                }
            }
            Ok(total)
        })
        .collect::<Result<Vec<f64>>>()?;
    let n = episodes as f64;
    let mean = costs.iter().sum::<f64>() / n;
    let var = if episodes > 1 {
        costs.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Ok(SimulationReport {
        episodes,
        mean,
        std_error: (var / n).sqrt(),
    })
}
