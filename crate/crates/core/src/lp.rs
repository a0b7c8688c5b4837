//! Dense two-phase primal simplex and zero-sum matrix games.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Entries of a pivot column below this magnitude are never pivoted on.
pub const PIVOT_TOL: f64 = 1e-10;
/// Primal feasibility tolerance (phase-one residual, right-hand sides).
pub const FEAS_TOL: f64 = 1e-9;
/// Reduced costs above `-OPT_TOL` are treated as non-improving.
pub const OPT_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Bound {
    NonNegative,
    Free,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PivotRule {
    /// Lowest-index entering variable throughout.
    Bland,
    /// Most negative reduced cost, switching to Bland's rule after
    /// [`DEGENERATE_SWITCH`] consecutive degenerate pivots.
    DantzigThenBland,
}

/// Consecutive degenerate pivots after which Dantzig's rule gives way to
/// Bland's rule.
pub const DEGENERATE_SWITCH: usize = 1000;

#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub rule: PivotRule,
    pub max_iterations: usize,
    /// Print the tableau to stderr after every pivot.
    pub trace: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            rule: PivotRule::DantzigThenBland,
            max_iterations: 200_000,
            trace: false,
        }
    }
}

/// maximize `c·v` subject to `A v ≤ b`, `E v = f`, per-variable bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram {
    n: usize,
    objective: Vec<f64>,
    ineq: Vec<Vec<f64>>,
    ineq_rhs: Vec<f64>,
    eq: Vec<Vec<f64>>,
    eq_rhs: Vec<f64>,
    bounds: Vec<Bound>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    pub value: f64,
    pub primal: Vec<f64>,
    /// One multiplier per row: inequality rows first, then equality rows.
    /// Inequality multipliers are non-negative at optimality.
    pub dual: Vec<f64>,
    pub iterations: usize,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

impl LinearProgram {
    /// `n` non-negative variables with zero objective and no constraints.
    pub fn new(n: usize) -> Self {
        LinearProgram {
            n,
            objective: vec![0.0; n],
            ineq: Vec::new(),
            ineq_rhs: Vec::new(),
            eq: Vec::new(),
            eq_rhs: Vec::new(),
            bounds: vec![Bound::NonNegative; n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    pub fn num_ineq(&self) -> usize {
        self.ineq.len()
    }

    pub fn num_eq(&self) -> usize {
        self.eq.len()
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn set_objective(&mut self, j: usize, c: f64) {
        self.objective[j] = c;
    }

    pub fn set_bound(&mut self, j: usize, b: Bound) {
        self.bounds[j] = b;
    }

    pub fn bounds(&self) -> &[Bound] {
        &self.bounds
    }

    /// Adds `Σ coef·v ≤ rhs` from sparse `(index, coefficient)` terms;
    /// repeated indices accumulate.
    pub fn add_le(&mut self, terms: &[(usize, f64)], rhs: f64) {
        let row = self.dense_row(terms);
        self.ineq.push(row);
        self.ineq_rhs.push(rhs);
    }

    pub fn add_eq(&mut self, terms: &[(usize, f64)], rhs: f64) {
        let row = self.dense_row(terms);
        self.eq.push(row);
        self.eq_rhs.push(rhs);
    }

    pub fn add_le_dense(&mut self, row: Vec<f64>, rhs: f64) {
        assert_eq!(row.len(), self.n, "row length must equal the variable count");
        self.ineq.push(row);
        self.ineq_rhs.push(rhs);
    }

    pub fn add_eq_dense(&mut self, row: Vec<f64>, rhs: f64) {
        assert_eq!(row.len(), self.n, "row length must equal the variable count");
        self.eq.push(row);
        self.eq_rhs.push(rhs);
    }

    fn dense_row(&self, terms: &[(usize, f64)]) -> Vec<f64> {
        let mut row = vec![0.0; self.n];
        for &(j, c) in terms {
            row[j] += c;
        }
        row
    }

    pub fn ineq_row(&self, i: usize) -> (&[f64], f64) {
        (&self.ineq[i], self.ineq_rhs[i])
    }

    pub fn eq_row(&self, i: usize) -> (&[f64], f64) {
        (&self.eq[i], self.eq_rhs[i])
    }

    /// Checks dimensions and finiteness.
    pub fn check(&self) -> Result<()> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        if self.objective.len() != self.n || self.bounds.len() != self.n {
            return Err(Error::shape("objective or bounds length differs from variable count"));
        }
        for r in self.ineq.iter().chain(&self.eq) {
            if r.len() != self.n || !finite(r) {
                return Err(Error::shape("constraint row has wrong length or non-finite entries"));
            }
        }
        if !finite(&self.objective) || !finite(&self.ineq_rhs) || !finite(&self.eq_rhs) {
            return Err(Error::shape("non-finite objective or right-hand side"));
        }
        Ok(())
    }

    /// Largest violation of any constraint or bound at `v`.
    pub fn primal_residual(&self, v: &[f64]) -> f64 {
        let dot = |r: &[f64]| r.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
        let mut worst: f64 = 0.0;
        for (r, &b) in self.ineq.iter().zip(&self.ineq_rhs) {
            worst = worst.max(dot(r) - b);
        }
        for (r, &f) in self.eq.iter().zip(&self.eq_rhs) {
            worst = worst.max((dot(r) - f).abs());
        }
        for (x, b) in v.iter().zip(&self.bounds) {
            if *b == Bound::NonNegative {
                worst = worst.max(-x);
            }
        }
        worst
    }

    /// Objective of the dual `min b·y + f·w` at the given multipliers.
    pub fn dual_value(&self, dual: &[f64]) -> f64 {
        let rhs = self.ineq_rhs.iter().chain(&self.eq_rhs);
        rhs.zip(dual).map(|(a, b)| a * b).sum()
    }

    /// Largest violation of dual feasibility: `y ≥ 0` on inequality rows and
    /// `Aᵀy + Eᵀw ≥ c` (with equality on free variables).
    pub fn dual_residual(&self, dual: &[f64]) -> f64 {
        let mi = self.ineq.len();
        let mut worst: f64 = 0.0;
        for &y in &dual[..mi] {
            worst = worst.max(-y);
        }
        for j in 0..self.n {
            let mut s = -self.objective[j];
            for (i, r) in self.ineq.iter().enumerate() {
                s += r[j] * dual[i];
            }
            for (i, r) in self.eq.iter().enumerate() {
                s += r[j] * dual[mi + i];
            }
            worst = match self.bounds[j] {
                Bound::NonNegative => worst.max(-s),
                Bound::Free => worst.max(s.abs()),
            };
        }
        worst
    }

    /// Largest `|y_i·(b_i − A_i v)|` over inequality rows.
    pub fn complementary_slackness(&self, v: &[f64], dual: &[f64]) -> f64 {
        let dot = |r: &[f64]| r.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
        self.ineq
            .iter()
            .zip(&self.ineq_rhs)
            .zip(dual)
            .map(|((r, &b), &y)| (y * (b - dot(r))).abs())
            .fold(0.0, f64::max)
    }
}

struct Tableau {
    m: usize,
    width: usize,
    t: Vec<f64>,
    obj: Vec<f64>,
    basis: Vec<usize>,
    iterations: usize,
}

enum PivotOutcome {
    Optimal,
    Unbounded,
    IterationLimit,
}

impl Tableau {
    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * self.width + j]
    }

    #[inline]
    fn rhs(&self, i: usize) -> f64 {
        self.t[i * self.width + self.width - 1]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.width;
        let p = self.t[r * w + c];
        {
            let row = &mut self.t[r * w..(r + 1) * w];
            for v in row.iter_mut() {
                *v /= p;
            }
            row[c] = 1.0;
        }
        let prow: Vec<f64> = self.t[r * w..(r + 1) * w].to_vec();
        let nz: Vec<usize> = (0..w).filter(|&j| prow[j] != 0.0).collect();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.t[i * w + c];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.t[i * w..(i + 1) * w];
            for &j in &nz {
                row[j] -= f * prow[j];
            }
            row[c] = 0.0;
        }
        let f = self.obj[c];
        if f != 0.0 {
            for &j in &nz {
                self.obj[j] -= f * prow[j];
            }
            self.obj[c] = 0.0;
        }
        self.basis[r] = c;
        self.iterations += 1;
    }

    fn dump(&self, label: &str) {
        eprintln!("-- tableau {label} (iteration {}) basis {:?}", self.iterations, self.basis);
        for i in 0..self.m {
            let row: Vec<String> = (0..self.width).map(|j| format!("{:9.4}", self.at(i, j))).collect();
            eprintln!("{}", row.join(" "));
        }
        let row: Vec<String> = self.obj.iter().map(|v| format!("{v:9.4}")).collect();
        eprintln!("{}", row.join(" "));
    }

    /// Runs simplex pivots over columns `< eligible`.
    fn run(&mut self, eligible: usize, opts: &SolveOptions) -> PivotOutcome {
        let mut degenerate_run = 0usize;
        loop {
            if self.iterations >= opts.max_iterations {
                return PivotOutcome::IterationLimit;
            }
            let use_bland = opts.rule == PivotRule::Bland || degenerate_run >= DEGENERATE_SWITCH;
            let entering = if use_bland {
                (0..eligible).find(|&j| self.obj[j] < -OPT_TOL)
            } else {
                let mut best = None;
                let mut best_v = -OPT_TOL;
                for j in 0..eligible {
                    if self.obj[j] < best_v {
                        best_v = self.obj[j];
                        best = Some(j);
                    }
                }
                best
            };
            let Some(c) = entering else {
                return PivotOutcome::Optimal;
            };
            // Two-pass ratio test: the first pass bounds the step with a
            // small feasibility allowance, the second picks the largest
            // pivot among rows within that bound (lowest basic index when
            // Bland's rule is active and pivots are comparable).
            let mut bound = f64::INFINITY;
            for i in 0..self.m {
                let a = self.at(i, c);
                if a > PIVOT_TOL {
                    bound = bound.min((self.rhs(i).max(0.0) + FEAS_TOL) / a);
                }
            }
            let mut leave: Option<(usize, f64)> = None;
            let mut best_a = 0.0;
            for i in 0..self.m {
                let a = self.at(i, c);
                if a > PIVOT_TOL && self.rhs(i).max(0.0) / a <= bound {
                    best_a = f64::max(best_a, a);
                }
            }
            for i in 0..self.m {
                let a = self.at(i, c);
                if a <= PIVOT_TOL {
                    continue;
                }
                let ratio = self.rhs(i).max(0.0) / a;
                if ratio > bound {
                    continue;
                }
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((bi, br)) => {
                        let ba = self.at(bi, c);
                        let better = if use_bland {
                            let comparable = a >= 0.1 * best_a;
                            let b_comparable = ba >= 0.1 * best_a;
                            (comparable && !b_comparable) || (comparable == b_comparable && self.basis[i] < self.basis[bi])
                        } else {
                            a > ba || (a == ba && self.basis[i] < self.basis[bi])
                        };
                        if better {
                            Some((i, ratio))
                        } else {
                            Some((bi, br))
                        }
                    }
                };
            }
            let Some((r, ratio)) = leave else {
                return PivotOutcome::Unbounded;
            };
            if ratio <= 1e-12 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.pivot(r, c);
            if opts.trace {
                self.dump("pivot");
            }
        }
    }
}

pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution> {
    solve_lp_with(lp, &SolveOptions::default())
}

pub fn solve_lp_with(lp: &LinearProgram, opts: &SolveOptions) -> Result<LpSolution> {
    lp.check()?;
    let mi = lp.ineq.len();
    let m = mi + lp.eq.len();
    let n = lp.n;

    // Standard-form columns: one per variable, a second (negated) one per
    // free variable, then one slack per inequality row.
    let mut col_of_neg = vec![usize::MAX; n];
    let mut next = n;
    for j in 0..n {
        if lp.bounds[j] == Bound::Free {
            col_of_neg[j] = next;
            next += 1;
        }
    }
    let slack0 = next;
    let ncols = slack0 + mi;
    let width = ncols + m + 1;

    let mut std = vec![0.0; m * ncols];
    let mut rhs = vec![0.0; m];
    let mut sign = vec![1.0; m];
    for i in 0..m {
        let (row, b) = if i < mi {
            (&lp.ineq[i], lp.ineq_rhs[i])
        } else {
            (&lp.eq[i - mi], lp.eq_rhs[i - mi])
        };
        let s = if b < 0.0 { -1.0 } else { 1.0 };
        sign[i] = s;
        rhs[i] = s * b;
        for j in 0..n {
            let a = s * row[j];
            std[i * ncols + j] = a;
            if col_of_neg[j] != usize::MAX {
                std[i * ncols + col_of_neg[j]] = -a;
            }
        }
        if i < mi {
            std[i * ncols + slack0 + i] = s;
        }
    }
    let mut cost = vec![0.0; ncols];
    for j in 0..n {
        cost[j] = lp.objective[j];
        if col_of_neg[j] != usize::MAX {
            cost[col_of_neg[j]] = -lp.objective[j];
        }
    }

    let mut t = vec![0.0; m * width];
    for i in 0..m {
        t[i * width..i * width + ncols].copy_from_slice(&std[i * ncols..(i + 1) * ncols]);
        t[i * width + ncols + i] = 1.0;
        t[i * width + width - 1] = rhs[i];
    }
    let mut tab = Tableau {
        m,
        width,
        t,
        obj: vec![0.0; width],
        basis: (0..m).map(|i| ncols + i).collect(),
        iterations: 0,
    };

    // Phase one: maximize −Σ artificials.
    for j in 0..width {
        if j >= ncols && j < ncols + m {
            continue;
        }
        tab.obj[j] = -(0..m).map(|i| tab.at(i, j)).sum::<f64>();
    }
    if opts.trace {
        tab.dump("phase one start");
    }
    let outcome = tab.run(ncols, opts);
    let fail = |status: LpStatus, iterations: usize| LpSolution {
        status,
        value: f64::NAN,
        primal: vec![],
        dual: vec![],
        iterations,
    };
    match outcome {
        PivotOutcome::IterationLimit => return Ok(fail(LpStatus::IterationLimit, tab.iterations)),
        PivotOutcome::Unbounded => unreachable!("phase one objective is bounded"),
        PivotOutcome::Optimal => {}
    }
    let infeas: f64 = (0..m).filter(|&i| tab.basis[i] >= ncols).map(|i| tab.rhs(i)).sum();
    if infeas > FEAS_TOL * (1.0 + rhs.iter().fold(0.0f64, |a, b| a.max(b.abs()))) {
        return Ok(fail(LpStatus::Infeasible, tab.iterations));
    }
    // Drive zero-level artificials out of the basis where possible.
    for i in 0..m {
        if tab.basis[i] < ncols {
            continue;
        }
        let mut best: Option<(usize, f64)> = None;
        for j in 0..ncols {
            let a = tab.at(i, j).abs();
            if a > PIVOT_TOL && best.is_none_or(|(_, b)| a > b) {
                best = Some((j, a));
            }
        }
        if let Some((j, _)) = best {
            tab.pivot(i, j);
        }
    }

    // Phase two.
    for j in 0..width {
        let mut z = 0.0;
        for i in 0..m {
            let b = tab.basis[i];
            let cb = if b < ncols { cost[b] } else { 0.0 };
            if cb != 0.0 {
                z += cb * tab.at(i, j);
            }
        }
        let cj = if j < ncols { cost[j] } else { 0.0 };
        tab.obj[j] = z - cj;
    }
    for i in 0..m {
        tab.obj[tab.basis[i]] = 0.0;
    }
    if opts.trace {
        tab.dump("phase two start");
    }
    match tab.run(ncols, opts) {
        PivotOutcome::IterationLimit => return Ok(fail(LpStatus::IterationLimit, tab.iterations)),
        PivotOutcome::Unbounded => return Ok(fail(LpStatus::Unbounded, tab.iterations)),
        PivotOutcome::Optimal => {}
    }

    // Basic values and simplex multipliers from the final tableau.
    let mut xs = vec![0.0; ncols + m];
    for i in 0..m {
        xs[tab.basis[i]] = tab.rhs(i).max(0.0);
    }
    let mut y: Vec<f64> = (0..m).map(|i| tab.obj[ncols + i]).collect();
    refine(&std, &rhs, &cost, ncols, &tab.basis, &mut xs, &mut y);

    let mut primal = vec![0.0; n];
    for j in 0..n {
        primal[j] = xs[j];
        if col_of_neg[j] != usize::MAX {
            primal[j] -= xs[col_of_neg[j]];
        }
    }
    let dual: Vec<f64> = (0..m).map(|i| sign[i] * y[i]).collect();
    let value = lp.objective.iter().zip(&primal).map(|(a, b)| a * b).sum();
    Ok(LpSolution {
        status: LpStatus::Optimal,
        value,
        primal,
        dual,
        iterations: tab.iterations,
    })
}

/// Recomputes basic values and multipliers by an LU solve with the final
/// basis, which removes error accumulated over many tableau updates. Keeps the
/// tableau values when the refined point is not feasible.
fn refine(std: &[f64], rhs: &[f64], cost: &[f64], ncols: usize, basis: &[usize], xs: &mut [f64], y: &mut [f64]) {
    let m = basis.len();
    if m == 0 || m > 2000 {
        return;
    }
    let b = DMatrix::from_fn(m, m, |i, k| {
        let c = basis[k];
        if c < ncols {
            std[i * ncols + c]
        } else if c - ncols == i {
            1.0
        } else {
            0.0
        }
    });
    let lu = b.clone().lu();
    let Some(xb) = lu.solve(&DVector::from_column_slice(rhs)) else {
        return;
    };
    if xb.iter().any(|v| *v < -FEAS_TOL || !v.is_finite()) {
        return;
    }
    let cb = DVector::from_fn(m, |k, _| if basis[k] < ncols { cost[basis[k]] } else { 0.0 });
    let Some(yy) = b.transpose().lu().solve(&cb) else {
        return;
    };
    if yy.iter().any(|v| !v.is_finite()) {
        return;
    }
    for k in 0..m {
        xs[basis[k]] = xb[k].max(0.0);
    }
    for i in 0..m {
        y[i] = yy[i];
    }
}

/// Value and optimal mixed strategies of the zero-sum game with cost matrix
/// `m` (rows minimize, columns maximize).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixGameSolution {
    pub value: f64,
    pub row: Vec<f64>,
    pub col: Vec<f64>,
}

fn project_simplex(v: &mut [f64]) {
    for x in v.iter_mut() {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        for x in v.iter_mut() {
            *x /= s;
        }
    } else {
        let n = v.len() as f64;
        v.iter_mut().for_each(|x| *x = 1.0 / n);
    }
}

/// Solves `min_p max_q pᵀ M q`; the column strategy comes from the LP duals.
pub fn solve_matrix_game(m: &[Vec<f64>]) -> Result<MatrixGameSolution> {
    let rows = m.len();
    let cols = m.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidArgument("empty payoff matrix".into()));
    }
    if m.iter().any(|r| r.len() != cols) {
        return Err(Error::shape("ragged payoff matrix"));
    }
    // Variables p_0..p_{rows-1}, ν (free); maximize −ν.
    let mut lp = LinearProgram::new(rows + 1);
    lp.set_bound(rows, Bound::Free);
    lp.set_objective(rows, -1.0);
    for j in 0..cols {
        let mut row: Vec<f64> = (0..rows).map(|i| m[i][j]).collect();
        row.push(-1.0);
        lp.add_le_dense(row, 0.0);
    }
    let mut ones = vec![1.0; rows];
    ones.push(0.0);
    lp.add_eq_dense(ones, 1.0);
    let sol = solve_lp(&lp)?;
    if !sol.is_optimal() {
        return Err(Error::Lp {
            status: sol.status,
            context: "matrix game".into(),
        });
    }
    let mut row = sol.primal[..rows].to_vec();
    let mut col = sol.dual[..cols].to_vec();
    project_simplex(&mut row);
    project_simplex(&mut col);
    Ok(MatrixGameSolution {
        value: sol.primal[rows],
        row,
        col,
    })
}

/// Worst-case payoffs of a strategy pair: `(max_j (pᵀM)_j, min_i (Mq)_i)`.
pub fn strategy_bounds(m: &[Vec<f64>], p: &[f64], q: &[f64]) -> (f64, f64) {
    let cols = m[0].len();
    let upper = (0..cols)
        .map(|j| (0..m.len()).map(|i| p[i] * m[i][j]).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max);
    let lower = m
        .iter()
        .map(|r| r.iter().zip(q).map(|(a, b)| a * b).sum::<f64>())
        .fold(f64::INFINITY, f64::min);
    (upper, lower)
}
