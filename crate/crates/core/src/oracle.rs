//! Extensive-form tree of a game and its exact value via the sequence-form
//! linear program. Independent of the belief-based machinery.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{solve_lp_with, solve_matrix_game, Bound, LinearProgram, SolveOptions};
use crate::model::{lower_one_sided, with_perfect_recall, GameDefinition, OneSidedGame};

/// Default cap on tree nodes.
pub const NODE_CAP: usize = 1_000_000;
/// Default cap on pure strategies per player in the normal-form cross-check.
pub const NORMAL_FORM_CAP: usize = 64;

#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Chance { outcomes: Vec<(f64, usize)> },
    /// `player` is 1 or 2; one child per action.
    Decision { player: usize, infoset: usize, children: Vec<usize> },
    Terminal { payoff: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct InfoSet {
    /// Canonical `(t, c_t, p_t)` key.
    pub key: String,
    pub actions: usize,
    pub nodes: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeStats {
    pub nodes: usize,
    pub chance: usize,
    pub decisions1: usize,
    pub decisions2: usize,
    pub terminals: usize,
    pub infosets1: usize,
    pub infosets2: usize,
}

/// Game tree with payoffs paid by player 1 (the minimizer).
#[derive(Clone, Debug, PartialEq)]
pub struct ExtensiveForm {
    nodes: Vec<Node>,
    /// `infosets[0]` for player 1, `infosets[1]` for player 2.
    infosets: [Vec<InfoSet>; 2],
    root: usize,
}

fn info_key(t: usize, common: &[usize], private: usize) -> String {
    let c: Vec<String> = common.iter().map(usize::to_string).collect();
    format!("t={t}|c={}|p={private}", c.join("."))
}

struct Builder<'a> {
    g: &'a GameDefinition,
    nodes: Vec<Node>,
    infosets: [Vec<InfoSet>; 2],
    index: [HashMap<String, usize>; 2],
    cap: usize,
}

impl Builder<'_> {
    fn push(&mut self, n: Node) -> Result<usize> {
        if self.nodes.len() >= self.cap {
            return Err(Error::CapExceeded {
                what: "extensive-form nodes",
                limit: self.cap,
                actual: self.nodes.len() + 1,
            });
        }
        self.nodes.push(n);
        Ok(self.nodes.len() - 1)
    }

    fn infoset(&mut self, player: usize, key: String, actions: usize, node: usize) -> usize {
        let i = player - 1;
        let id = *self.index[i].entry(key.clone()).or_insert_with(|| {
            self.infosets[i].push(InfoSet {
                key,
                actions,
                nodes: Vec::new(),
            });
            self.infosets[i].len() - 1
        });
        self.infosets[i][id].nodes.push(node);
        id
    }

    fn decision(&mut self, t: usize, x: usize, p1: usize, p2: usize, common: &mut Vec<usize>, acc: f64) -> Result<usize> {
        let s = *self.g.spaces(t);
        let last = t + 1 == self.g.horizon();
        let n1 = self.push(Node::Terminal { payoff: 0.0 })?;
        let h1 = self.infoset(1, info_key(t, common, p1), s.actions1, n1);
        let mut kids1 = Vec::with_capacity(s.actions1);
        for u1 in 0..s.actions1 {
            let n2 = self.push(Node::Terminal { payoff: 0.0 })?;
            let h2 = self.infoset(2, info_key(t, common, p2), s.actions2, n2);
            let mut kids2 = Vec::with_capacity(s.actions2);
            for u2 in 0..s.actions2 {
                let total = acc + self.g.cost(t).get(&[x, u1, u2]);
                let child = if last {
                    self.push(Node::Terminal { payoff: total })?
                } else {
                    let cn = self.push(Node::Terminal { payoff: 0.0 })?;
                    let mut outcomes = Vec::new();
                    let row: Vec<(usize, f64)> = self
                        .g
                        .kernel_row(t, x, p1, p2, u1, u2)
                        .iter()
                        .enumerate()
                        .filter(|(_, &p)| p > 0.0)
                        .map(|(i, &p)| (i, p))
                        .collect();
                    for (flat, p) in row {
                        let (xn, p1n, p2n, z) = self.g.split_target(t, flat);
                        common.push(z);
                        let next = self.decision(t + 1, xn, p1n, p2n, common, total);
                        common.pop();
                        outcomes.push((p, next?));
                    }
                    self.nodes[cn] = Node::Chance { outcomes };
                    cn
                };
                kids2.push(child);
            }
            self.nodes[n2] = Node::Decision {
                player: 2,
                infoset: h2,
                children: kids2,
            };
            kids1.push(n2);
        }
        self.nodes[n1] = Node::Decision {
            player: 1,
            infoset: h1,
            children: kids1,
        };
        Ok(n1)
    }
}

/// Builds the tree: a chance root over the initial distribution, then per
/// stage a player-1 decision, a player-2 decision that does not observe it,
/// and a chance node over the kernel's positive outcomes.
pub fn build_extensive_form(g: &GameDefinition) -> Result<ExtensiveForm> {
    build_extensive_form_capped(g, NODE_CAP)
}

pub fn build_extensive_form_capped(g: &GameDefinition, cap: usize) -> Result<ExtensiveForm> {
    let mut b = Builder {
        g,
        nodes: Vec::new(),
        infosets: [Vec::new(), Vec::new()],
        index: [HashMap::new(), HashMap::new()],
        cap,
    };
    let root = b.push(Node::Terminal { payoff: 0.0 })?;
    let init = g.initial();
    let sh = init.shape().to_vec();
    let mut outcomes = Vec::new();
    for (flat, &p) in init.data().iter().enumerate() {
        if p > 0.0 {
            let x = flat / (sh[1] * sh[2]);
            let p1 = (flat / sh[2]) % sh[1];
            let p2 = flat % sh[2];
            let child = b.decision(0, x, p1, p2, &mut Vec::new(), 0.0)?;
            outcomes.push((p, child));
        }
    }
    b.nodes[root] = Node::Chance { outcomes };
    Ok(ExtensiveForm {
        nodes: b.nodes,
        infosets: b.infosets,
        root,
    })
}

/// Game in kernel form with player 1's private information extended to its
/// full history, so the tree has perfect recall for player 1.
pub fn one_sided_oracle_game(g: &OneSidedGame) -> Result<GameDefinition> {
    Ok(with_perfect_recall(&lower_one_sided(g), 1)?.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecallCheck {
    pub perfect: bool,
    /// Player and two conflicting own histories reaching one information set.
    pub witness: Option<(usize, String, String)>,
}

/// Per-player sequence bookkeeping derived under perfect recall.
#[derive(Clone, Debug, PartialEq)]
struct Sequences {
    /// Sequence id of `(infoset, action)`; id 0 is the empty sequence.
    of: [Vec<Vec<usize>>; 2],
    /// Own last sequence before each infoset.
    parent: [Vec<usize>; 2],
    count: [usize; 2],
}

impl ExtensiveForm {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn infosets(&self, player: usize) -> &[InfoSet] {
        &self.infosets[player - 1]
    }

    pub fn stats(&self) -> TreeStats {
        let mut s = TreeStats {
            nodes: self.nodes.len(),
            chance: 0,
            decisions1: 0,
            decisions2: 0,
            terminals: 0,
            infosets1: self.infosets[0].len(),
            infosets2: self.infosets[1].len(),
        };
        for n in &self.nodes {
            match n {
                Node::Chance { .. } => s.chance += 1,
                Node::Decision { player: 1, .. } => s.decisions1 += 1,
                Node::Decision { .. } => s.decisions2 += 1,
                Node::Terminal { .. } => s.terminals += 1,
            }
        }
        s
    }

    /// Own `(infoset, action)` history of `player` at every node.
    fn own_histories(&self, player: usize) -> Vec<Vec<(usize, usize)>> {
        let mut out = vec![Vec::new(); self.nodes.len()];
        let mut stack = vec![(self.root, Vec::new())];
        while let Some((n, hist)) = stack.pop() {
            match &self.nodes[n] {
                Node::Chance { outcomes } => {
                    for &(_, c) in outcomes {
                        stack.push((c, hist.clone()));
                    }
                }
                Node::Decision {
                    player: p,
                    infoset,
                    children,
                } => {
                    for (a, &c) in children.iter().enumerate() {
                        let mut h = hist.clone();
                        if *p == player {
                            h.push((*infoset, a));
                        }
                        stack.push((c, h));
                    }
                }
                Node::Terminal { .. } => {}
            }
            out[n] = hist;
        }
        out
    }

    fn describe(&self, player: usize, hist: &[(usize, usize)]) -> String {
        let parts: Vec<String> = hist
            .iter()
            .map(|&(h, a)| format!("({} -> {a})", self.infosets[player - 1][h].key))
            .collect();
        format!("[{}]", parts.join(", "))
    }

    /// Perfect recall holds when all nodes of every information set share the
    /// owner's history of information sets visited and actions taken.
    pub fn check_perfect_recall(&self) -> RecallCheck {
        for player in [1, 2] {
            let hist = self.own_histories(player);
            for h in &self.infosets[player - 1] {
                let first = &hist[h.nodes[0]];
                if let Some(&other) = h.nodes.iter().find(|&&n| hist[n] != *first) {
                    return RecallCheck {
                        perfect: false,
                        witness: Some((
                            player,
                            format!("{} at {}", self.describe(player, first), h.key),
                            format!("{} at {}", self.describe(player, &hist[other]), h.key),
                        )),
                    };
                }
            }
        }
        RecallCheck {
            perfect: true,
            witness: None,
        }
    }

    fn sequences(&self) -> Result<Sequences> {
        let rc = self.check_perfect_recall();
        if let Some((player, first, second)) = rc.witness {
            return Err(Error::ImperfectRecall { player, first, second });
        }
        let mut of: [Vec<Vec<usize>>; 2] = [Vec::new(), Vec::new()];
        let mut parent: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
        let mut count = [1usize, 1];
        for i in 0..2 {
            for h in &self.infosets[i] {
                of[i].push((count[i]..count[i] + h.actions).collect());
                count[i] += h.actions;
            }
            let hist = self.own_histories(i + 1);
            parent[i] = self.infosets[i]
                .iter()
                .map(|h| hist[h.nodes[0]].last().map_or(0, |&(hh, a)| of[i][hh][a]))
                .collect();
        }
        Ok(Sequences { of, parent, count })
    }

    /// Visits every leaf with its chance probability, payoff and last
    /// sequences of both players.
    fn leaves(&self, seqs: &Sequences, mut f: impl FnMut(f64, f64, usize, usize)) {
        let mut stack = vec![(self.root, 1.0, 0usize, 0usize)];
        while let Some((n, p, s1, s2)) = stack.pop() {
            match &self.nodes[n] {
                Node::Chance { outcomes } => {
                    for &(q, c) in outcomes {
                        stack.push((c, p * q, s1, s2));
                    }
                }
                Node::Decision {
                    player,
                    infoset,
                    children,
                } => {
                    for (a, &c) in children.iter().enumerate() {
                        if *player == 1 {
                            stack.push((c, p, seqs.of[0][*infoset][a], s2));
                        } else {
                            stack.push((c, p, s1, seqs.of[1][*infoset][a]));
                        }
                    }
                }
                Node::Terminal { payoff } => f(p, *payoff, s1, s2),
            }
        }
    }

    /// Same tree with players exchanged and payoffs negated.
    pub fn swap_players(&self) -> ExtensiveForm {
        let nodes = self
            .nodes
            .iter()
            .map(|n| match n {
                Node::Decision {
                    player,
                    infoset,
                    children,
                } => Node::Decision {
                    player: 3 - player,
                    infoset: *infoset,
                    children: children.clone(),
                },
                Node::Terminal { payoff } => Node::Terminal { payoff: -payoff },
                c => c.clone(),
            })
            .collect();
        ExtensiveForm {
            nodes,
            infosets: [self.infosets[1].clone(), self.infosets[0].clone()],
            root: self.root,
        }
    }

    /// Graphviz rendering of at most `max_nodes` nodes.
    pub fn to_dot(&self, max_nodes: usize) -> String {
        let mut s = String::from("digraph game {\n  node [fontsize=10];\n");
        for (i, n) in self.nodes.iter().enumerate().take(max_nodes) {
            match n {
                Node::Chance { outcomes } => {
                    let _ = writeln!(s, "  n{i} [shape=circle,label=\"C\"];");
                    for (p, c) in outcomes {
                        if *c < max_nodes {
                            let _ = writeln!(s, "  n{i} -> n{c} [label=\"{p:.4}\"];");
                        }
                    }
                }
                Node::Decision {
                    player,
                    infoset,
                    children,
                } => {
                    let key = &self.infosets[player - 1][*infoset].key;
                    let _ = writeln!(s, "  n{i} [shape=box,label=\"P{player} {key}\"];");
                    for (a, c) in children.iter().enumerate() {
                        if *c < max_nodes {
                            let _ = writeln!(s, "  n{i} -> n{c} [label=\"{a}\"];");
                        }
                    }
                }
                Node::Terminal { payoff } => {
                    let _ = writeln!(s, "  n{i} [shape=plaintext,label=\"{payoff:.4}\"];");
                }
            }
        }
        s.push_str("}\n");
        s
    }
}

/// Realization plan of one player: weight of every sequence, id 0 empty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealizationPlan {
    pub weights: Vec<f64>,
    /// Parent sequence of every information set.
    pub parents: Vec<usize>,
    /// Sequence ids of every information set's actions.
    pub sequences: Vec<Vec<usize>>,
}

impl RealizationPlan {
    /// Largest violation of the flow constraints and non-negativity.
    pub fn flow_residual(&self) -> f64 {
        let mut worst = (self.weights[0] - 1.0).abs();
        for (h, seqs) in self.sequences.iter().enumerate() {
            let s: f64 = seqs.iter().map(|&q| self.weights[q]).sum();
            worst = worst.max((s - self.weights[self.parents[h]]).abs());
        }
        for &w in &self.weights {
            worst = worst.max(-w);
        }
        worst
    }

    /// Behavioral strategy: per information set, action probabilities
    /// proportional to sequence weights (uniform where the parent has no weight).
    pub fn behavioral(&self) -> Vec<Vec<f64>> {
        self.sequences
            .iter()
            .enumerate()
            .map(|(h, seqs)| {
                let par = self.weights[self.parents[h]];
                let s: f64 = seqs.iter().map(|&q| self.weights[q].max(0.0)).sum();
                if par > 0.0 && s > 0.0 {
                    seqs.iter().map(|&q| self.weights[q].max(0.0) / s).collect()
                } else {
                    vec![1.0 / seqs.len() as f64; seqs.len()]
                }
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceFormSolution {
    pub value: f64,
    pub plan1: RealizationPlan,
    pub plan2: RealizationPlan,
    pub lp_iterations: usize,
}

/// Exact value of a perfect-recall tree. Player 1's realization plan is the
/// primal solution; player 2's comes from the multipliers of the
/// best-response rows.
pub fn sequence_form_value(ef: &ExtensiveForm) -> Result<SequenceFormSolution> {
    sequence_form_value_with(ef, &SolveOptions::default())
}

pub fn sequence_form_value_with(ef: &ExtensiveForm, opts: &SolveOptions) -> Result<SequenceFormSolution> {
    let seqs = ef.sequences()?;
    let (n1, n2) = (seqs.count[0], seqs.count[1]);
    let h1 = ef.infosets[0].len();
    let h2 = ef.infosets[1].len();

    // Payoff matrix by player-2 sequence: column σ2 holds (σ1, weight) terms.
    let mut a: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n2];
    ef.leaves(&seqs, |p, payoff, s1, s2| {
        if p * payoff != 0.0 {
            *a[s2].entry(s1).or_insert(0.0) += p * payoff;
        }
    });

    // Variables: x (n1, ≥ 0) then v (1 + h2, free). maximize −v_0.
    let nv = n1 + 1 + h2;
    let mut lp = LinearProgram::new(nv);
    for j in n1..nv {
        lp.set_bound(j, Bound::Free);
    }
    lp.set_objective(n1, -1.0);
    // Row σ2: Σ_σ1 A[σ1][σ2] x_σ1 − Σ_rows F[row][σ2] v_row ≤ 0.
    // F row 0 is y_∅ = 1; row 1 + h is Σ_a y_(h,a) − y_parent(h) = 0.
    let mut f_cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n2];
    f_cols[0].push((0, 1.0));
    for h in 0..h2 {
        f_cols[seqs.parent[1][h]].push((1 + h, -1.0));
        for &q in &seqs.of[1][h] {
            f_cols[q].push((1 + h, 1.0));
        }
    }
    for s2 in 0..n2 {
        let mut terms: Vec<(usize, f64)> = a[s2].iter().map(|(&s1, &w)| (s1, w)).collect();
        for &(row, c) in &f_cols[s2] {
            terms.push((n1 + row, -c));
        }
        lp.add_le(&terms, 0.0);
    }
    lp.add_eq(&[(0, 1.0)], 1.0);
    for h in 0..h1 {
        let mut terms: Vec<(usize, f64)> = seqs.of[0][h].iter().map(|&q| (q, 1.0)).collect();
        terms.push((seqs.parent[0][h], -1.0));
        lp.add_eq(&terms, 0.0);
    }
    let sol = solve_lp_with(&lp, opts)?;
    if !sol.is_optimal() {
        return Err(Error::Lp {
            status: sol.status,
            context: "sequence-form program".into(),
        });
    }
    let x: Vec<f64> = sol.primal[..n1].to_vec();
    let y: Vec<f64> = sol.dual[..n2].to_vec();
    Ok(SequenceFormSolution {
        value: sol.primal[n1],
        plan1: RealizationPlan {
            weights: x,
            parents: seqs.parent[0].clone(),
            sequences: seqs.of[0].clone(),
        },
        plan2: RealizationPlan {
            weights: y,
            parents: seqs.parent[1].clone(),
            sequences: seqs.of[1].clone(),
        },
        lp_iterations: sol.iterations,
    })
}

/// Distribution over leaves (by node id) when both players follow
/// behavioral strategies given per information set.
pub fn leaf_distribution(ef: &ExtensiveForm, b1: &[Vec<f64>], b2: &[Vec<f64>]) -> BTreeMap<usize, f64> {
    let mut out = BTreeMap::new();
    let mut stack = vec![(ef.root, 1.0)];
    while let Some((n, p)) = stack.pop() {
        match &ef.nodes[n] {
            Node::Chance { outcomes } => {
                for &(q, c) in outcomes {
                    stack.push((c, p * q));
                }
            }
            Node::Decision {
                player,
                infoset,
                children,
            } => {
                let b = if *player == 1 { &b1[*infoset] } else { &b2[*infoset] };
                for (a, &c) in children.iter().enumerate() {
                    stack.push((c, p * b[a]));
                }
            }
            Node::Terminal { .. } => {
                out.insert(n, p);
            }
        }
    }
    out
}

/// Distribution over leaves induced by realization plans: chance probability
/// times both players' weights on the sequences leading to the leaf.
pub fn plan_leaf_distribution(ef: &ExtensiveForm, x: &RealizationPlan, y: &RealizationPlan) -> Result<BTreeMap<usize, f64>> {
    let seqs = ef.sequences()?;
    let mut out = BTreeMap::new();
    let mut stack = vec![(ef.root, 1.0, 0usize, 0usize)];
    while let Some((n, p, s1, s2)) = stack.pop() {
        match &ef.nodes[n] {
            Node::Chance { outcomes } => {
                for &(q, c) in outcomes {
                    stack.push((c, p * q, s1, s2));
                }
            }
            Node::Decision {
                player,
                infoset,
                children,
            } => {
                for (a, &c) in children.iter().enumerate() {
                    if *player == 1 {
                        stack.push((c, p, seqs.of[0][*infoset][a], s2));
                    } else {
                        stack.push((c, p, s1, seqs.of[1][*infoset][a]));
                    }
                }
            }
            Node::Terminal { .. } => {
                out.insert(n, p * x.weights[s1] * y.weights[s2]);
            }
        }
    }
    Ok(out)
}

/// Game value from the full normal form (pure strategy = one action per
/// information set). Refuses when either player has more than `cap` pure
/// strategies.
pub fn normal_form_value(ef: &ExtensiveForm, cap: usize) -> Result<f64> {
    let pure = |player: usize| -> Result<Vec<Vec<usize>>> {
        let sets = &ef.infosets[player - 1];
        let mut count: usize = 1;
        for h in sets {
            count = count.saturating_mul(h.actions);
            if count > cap {
                return Err(Error::CapExceeded {
                    what: "pure strategies",
                    limit: cap,
                    actual: count,
                });
            }
        }
        Ok((0..count)
            .map(|mut i| {
                sets.iter()
                    .map(|h| {
                        let a = i % h.actions;
                        i /= h.actions;
                        a
                    })
                    .collect()
            })
            .collect())
    };
    let s1 = pure(1)?;
    let s2 = pure(2)?;
    let onehot = |s: &[usize], sets: &[InfoSet]| -> Vec<Vec<f64>> {
        s.iter()
            .zip(sets)
            .map(|(&a, h)| (0..h.actions).map(|b| if a == b { 1.0 } else { 0.0 }).collect())
            .collect()
    };
    let m: Vec<Vec<f64>> = s1
        .iter()
        .map(|a| {
            let b1 = onehot(a, &ef.infosets[0]);
            s2.iter()
                .map(|b| {
                    let b2 = onehot(b, &ef.infosets[1]);
                    expected_payoff(ef, &b1, &b2)
                })
                .collect()
        })
        .collect();
    Ok(solve_matrix_game(&m)?.value)
}

/// Expected payoff under behavioral strategies.
pub fn expected_payoff(ef: &ExtensiveForm, b1: &[Vec<f64>], b2: &[Vec<f64>]) -> f64 {
    leaf_distribution(ef, b1, b2)
        .into_iter()
        .map(|(n, p)| match ef.nodes[n] {
            Node::Terminal { payoff } => p * payoff,
            _ => 0.0,
        })
        .sum()
}
