//! Exact rational linear programming.
//!
//! The solver is a two-phase revised simplex with an explicit basis inverse.
//! Entering columns are chosen by Dantzig's rule; after a run of degenerate
//! pivots it switches to Bland's rule until the objective moves again, which
//! rules out cycling. Tall programs (many more rows than columns) are solved
//! through their dual, which keeps the basis small.
//!
//! Every optimal answer is checked before it is returned: primal feasibility,
//! dual feasibility and equal objectives, all in exact arithmetic.
//!
//! Larger programs are first solved in floating point, together with their
//! dual; both solutions are snapped to nearby rationals with small
//! denominators and kept only if they form an exact optimality certificate.
//! Otherwise the exact simplex runs.

use crate::error::{Error, Result};
use crate::rational::{ExtRational, Rational};

/// Consecutive degenerate pivots tolerated before switching to Bland's rule.
const DEGENERATE_LIMIT: usize = 50;

/// Smallest `rows * vars` for which the floating-point guess is tried.
const GUIDED_MIN_SIZE: usize = 400;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Maximize,
    Minimize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Variable {
    pub name: String,
    pub nonneg: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Row {
    /// Sparse coefficients `(variable, value)`; repeated variables are summed.
    pub coeffs: Vec<(usize, Rational)>,
    pub rel: Relation,
    pub rhs: Rational,
}

/// A linear program over named variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinearProgram {
    pub sense: Sense,
    pub vars: Vec<Variable>,
    pub rows: Vec<Row>,
    /// Sparse objective coefficients.
    pub objective: Vec<(usize, Rational)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Which formulation the simplex runs on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Route {
    /// Floating-point guess with an exact certificate for larger programs,
    /// else the exact simplex on the dual when rows outnumber columns more
    /// than twofold, else on the primal.
    #[default]
    Auto,
    Primal,
    Dual,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LpOutcome {
    pub status: Status,
    /// Optimal value; `+inf` for an unbounded maximization; `None` when
    /// infeasible or when a minimization is unbounded below.
    pub objective: Option<ExtRational>,
    /// One value per variable, present iff optimal.
    pub assignment: Option<Vec<Rational>>,
    /// One multiplier per row, present iff optimal, with
    /// `objective = sum(rhs * dual)`.
    pub duals: Option<Vec<Rational>>,
}

impl LpOutcome {
    pub fn optimum(&self) -> Option<&Rational> {
        self.objective.as_ref().and_then(|o| o.finite())
    }

    pub fn value(&self, var: usize) -> Option<&Rational> {
        self.assignment.as_ref().map(|a| &a[var])
    }
}

impl LinearProgram {
    pub fn new(sense: Sense) -> Self {
        LinearProgram { sense, vars: Vec::new(), rows: Vec::new(), objective: Vec::new() }
    }

    pub fn add_var(&mut self, name: impl Into<String>) -> usize {
        self.vars.push(Variable { name: name.into(), nonneg: true });
        self.vars.len() - 1
    }

    pub fn add_free_var(&mut self, name: impl Into<String>) -> usize {
        self.vars.push(Variable { name: name.into(), nonneg: false });
        self.vars.len() - 1
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn set_objective(&mut self, var: usize, coeff: Rational) {
        self.objective.retain(|(v, _)| *v != var);
        self.objective.push((var, coeff));
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, Rational)>, rel: Relation, rhs: Rational) -> usize {
        self.rows.push(Row { coeffs, rel, rhs });
        self.rows.len() - 1
    }

    /// Adds a row given densely; its length must equal the variable count.
    pub fn add_dense_row(&mut self, coeffs: Vec<Rational>, rel: Relation, rhs: Rational) -> Result<usize> {
        if coeffs.len() != self.vars.len() {
            return Err(Error::Structural(format!(
                "row has {} coefficients for {} variables",
                coeffs.len(),
                self.vars.len()
            )));
        }
        let sparse = coeffs.into_iter().enumerate().filter(|(_, a)| !a.is_zero()).collect();
        Ok(self.add_row(sparse, rel, rhs))
    }

    fn validate(&self) -> Result<()> {
        let nv = self.vars.len();
        let bad = |v: usize| v >= nv;
        if let Some((v, _)) = self.objective.iter().find(|(v, _)| bad(*v)) {
            return Err(Error::Structural(format!("objective references variable {v} of {nv}")));
        }
        for (i, row) in self.rows.iter().enumerate() {
            if let Some((v, _)) = row.coeffs.iter().find(|(v, _)| bad(*v)) {
                return Err(Error::Structural(format!("row {i} references variable {v} of {nv}")));
            }
        }
        Ok(())
    }

    /// Left-hand side of row `i` at `x`.
    pub fn activity(&self, i: usize, x: &[Rational]) -> Rational {
        self.rows[i].coeffs.iter().map(|(v, a)| a * &x[*v]).sum()
    }

    pub fn objective_value(&self, x: &[Rational]) -> Rational {
        self.objective.iter().map(|(v, a)| a * &x[*v]).sum()
    }

    /// Whether `x` satisfies every row and sign restriction exactly.
    pub fn is_feasible(&self, x: &[Rational]) -> bool {
        x.len() == self.vars.len()
            && self.vars.iter().zip(x).all(|(var, val)| !var.nonneg || !val.is_negative())
            && (0..self.rows.len()).all(|i| holds(&self.activity(i, x), self.rows[i].rel, &self.rows[i].rhs))
    }
}

fn holds(lhs: &Rational, rel: Relation, rhs: &Rational) -> bool {
    match rel {
        Relation::Le => lhs <= rhs,
        Relation::Eq => lhs == rhs,
        Relation::Ge => lhs >= rhs,
    }
}

pub fn solve(lp: &LinearProgram) -> Result<LpOutcome> {
    solve_with(lp, Route::Auto)
}

pub fn solve_with(lp: &LinearProgram, route: Route) -> Result<LpOutcome> {
    lp.validate()?;
    let std = Standard::from_lp(lp);
    if std.trivially_infeasible {
        return Ok(infeasible());
    }
    if route == Route::Auto && lp.rows.len() * lp.vars.len() >= GUIDED_MIN_SIZE {
        if let Some(out) = guided::solve(lp) {
            return Ok(out);
        }
    }
    let use_dual = match route {
        Route::Primal => false,
        Route::Dual => true,
        Route::Auto => std.m() > 2 * std.ncols,
    };
    let result = if use_dual { std.solve_via_dual() } else { std.solve_primal() };
    match result {
        Core::Infeasible => Ok(infeasible()),
        Core::Unbounded => Ok(LpOutcome {
            status: Status::Unbounded,
            objective: (lp.sense == Sense::Maximize).then_some(ExtRational::Infinite),
            assignment: None,
            duals: None,
        }),
        Core::Optimal { x, y } => std.finish(lp, &x, &y),
    }
}

fn infeasible() -> LpOutcome {
    LpOutcome { status: Status::Infeasible, objective: None, assignment: None, duals: None }
}

enum Core {
    Optimal { x: Vec<Rational>, y: Vec<Rational> },
    Infeasible,
    Unbounded,
}

/// `min c.x` subject to `A x (rel) b`, `x >= 0`, with free variables split
/// and all-zero rows removed.
struct Standard {
    ncols: usize,
    cols: Vec<Vec<(usize, Rational)>>,
    rel: Vec<Relation>,
    b: Vec<Rational>,
    c: Vec<Rational>,
    /// Original row index of each kept row.
    kept_rows: Vec<usize>,
    /// Positive and optional negative column of each original variable.
    var_cols: Vec<(usize, Option<usize>)>,
    trivially_infeasible: bool,
}

impl Standard {
    fn from_lp(lp: &LinearProgram) -> Self {
        let mut var_cols = Vec::with_capacity(lp.vars.len());
        let mut ncols = 0;
        for var in &lp.vars {
            let pos = ncols;
            ncols += 1;
            let neg = (!var.nonneg).then(|| {
                ncols += 1;
                ncols - 1
            });
            var_cols.push((pos, neg));
        }
        let mut c = vec![Rational::zero(); ncols];
        for (v, a) in &lp.objective {
            let a = if lp.sense == Sense::Maximize { -a } else { a.clone() };
            let (pos, neg) = var_cols[*v];
            c[pos] += &a;
            if let Some(neg) = neg {
                c[neg] -= &a;
            }
        }
        let mut cols = vec![Vec::new(); ncols];
        let mut rel = Vec::new();
        let mut b = Vec::new();
        let mut kept_rows = Vec::new();
        let mut trivially_infeasible = false;
        let mut dense = vec![Rational::zero(); lp.vars.len()];
        for (i, row) in lp.rows.iter().enumerate() {
            let mut touched = Vec::new();
            for (v, a) in &row.coeffs {
                if dense[*v].is_zero() {
                    touched.push(*v);
                }
                dense[*v] += a;
            }
            touched.sort_unstable();
            touched.dedup();
            let entries: Vec<(usize, Rational)> = touched
                .into_iter()
                .filter_map(|v| {
                    let a = std::mem::take(&mut dense[v]);
                    (!a.is_zero()).then_some((v, a))
                })
                .collect();
            if entries.is_empty() {
                if !holds(&Rational::zero(), row.rel, &row.rhs) {
                    trivially_infeasible = true;
                }
                continue;
            }
            let r = kept_rows.len();
            for (v, a) in entries {
                let (pos, neg) = var_cols[v];
                if let Some(neg) = neg {
                    cols[neg].push((r, -&a));
                }
                cols[pos].push((r, a));
            }
            rel.push(row.rel);
            b.push(row.rhs.clone());
            kept_rows.push(i);
        }
        Standard { ncols, cols, rel, b, c, kept_rows, var_cols, trivially_infeasible }
    }

    fn m(&self) -> usize {
        self.b.len()
    }

    fn solve_primal(&self) -> Core {
        simplex_min(self.m(), &self.cols, &self.rel, &self.b, &self.c)
    }

    /// Solves the dual `max b.y, A^T y <= c` with sign-restricted `y`, and
    /// reads the primal solution off the dual's multipliers.
    fn solve_via_dual(&self) -> Core {
        let m = self.m();
        // Dual columns: one per primal row, two for equality rows.
        // (primal row, sign of y in terms of the column variable)
        let mut dual_vars: Vec<(usize, bool)> = Vec::new();
        for (i, rel) in self.rel.iter().enumerate() {
            match rel {
                Relation::Ge => dual_vars.push((i, true)),
                Relation::Le => dual_vars.push((i, false)),
                Relation::Eq => {
                    dual_vars.push((i, true));
                    dual_vars.push((i, false));
                }
            }
        }
        let mut row_entries: Vec<Vec<(usize, Rational)>> = vec![Vec::new(); m];
        for (j, col) in self.cols.iter().enumerate() {
            for (r, a) in col {
                row_entries[*r].push((j, a.clone()));
            }
        }
        let mut dcols = Vec::with_capacity(dual_vars.len());
        let mut dcost = Vec::with_capacity(dual_vars.len());
        for &(i, positive) in &dual_vars {
            let col: Vec<(usize, Rational)> = row_entries[i]
                .iter()
                .map(|(j, a)| (*j, if positive { a.clone() } else { -a }))
                .collect();
            dcols.push(col);
            dcost.push(if positive { -&self.b[i] } else { self.b[i].clone() });
        }
        let drel = vec![Relation::Le; self.ncols];
        match simplex_min(self.ncols, &dcols, &drel, &self.c, &dcost) {
            Core::Optimal { x: yv, y: w } => {
                let x: Vec<Rational> = w.iter().map(|v| -v).collect();
                let mut y = vec![Rational::zero(); m];
                for (&(i, positive), val) in dual_vars.iter().zip(&yv) {
                    if positive {
                        y[i] += val;
                    } else {
                        y[i] -= val;
                    }
                }
                Core::Optimal { x, y }
            }
            Core::Unbounded => Core::Infeasible,
            // The primal is unbounded or infeasible; the primal route decides.
            Core::Infeasible => self.solve_primal(),
        }
    }

    fn finish(&self, lp: &LinearProgram, x: &[Rational], y: &[Rational]) -> Result<LpOutcome> {
        let assignment: Vec<Rational> = self
            .var_cols
            .iter()
            .map(|&(pos, neg)| match neg {
                Some(neg) => &x[pos] - &x[neg],
                None => x[pos].clone(),
            })
            .collect();
        let mut duals = vec![Rational::zero(); lp.rows.len()];
        for (r, &i) in self.kept_rows.iter().enumerate() {
            duals[i] = if lp.sense == Sense::Maximize { -&y[r] } else { y[r].clone() };
        }
        let value = lp.objective_value(&assignment);
        check_certificate(lp, &assignment, &duals, &value)?;
        Ok(LpOutcome {
            status: Status::Optimal,
            objective: Some(ExtRational::Finite(value)),
            assignment: Some(assignment),
            duals: Some(duals),
        })
    }
}

/// Primal feasibility, dual feasibility and zero duality gap.
fn check_certificate(lp: &LinearProgram, x: &[Rational], duals: &[Rational], value: &Rational) -> Result<()> {
    if !lp.is_feasible(x) {
        return Err(Error::Internal("simplex returned an infeasible assignment".into()));
    }
    let maximize = lp.sense == Sense::Maximize;
    // Work in the minimization form: y_min = duals (min) or -duals (max).
    let y_min: Vec<Rational> = duals.iter().map(|d| if maximize { -d } else { d.clone() }).collect();
    for (row, y) in lp.rows.iter().zip(&y_min) {
        let ok = match row.rel {
            Relation::Ge => !y.is_negative(),
            Relation::Le => !y.is_positive(),
            Relation::Eq => true,
        };
        if !ok {
            return Err(Error::Internal("simplex returned a dual of the wrong sign".into()));
        }
    }
    let mut reduced = vec![Rational::zero(); lp.vars.len()];
    for (v, a) in &lp.objective {
        reduced[*v] += if maximize { -a } else { a.clone() };
    }
    for (row, y) in lp.rows.iter().zip(&y_min) {
        if y.is_zero() {
            continue;
        }
        for (v, a) in &row.coeffs {
            reduced[*v] -= a * y;
        }
    }
    for (var, r) in lp.vars.iter().zip(&reduced) {
        if r.is_negative() || (!var.nonneg && !r.is_zero()) {
            return Err(Error::Internal("simplex returned an infeasible dual".into()));
        }
    }
    let dual_value: Rational = lp.rows.iter().zip(duals).map(|(row, d)| &row.rhs * d).sum();
    if &dual_value != value {
        return Err(Error::Internal(format!("duality gap: primal {value}, dual {dual_value}")));
    }
    Ok(())
}

/// Two-phase revised simplex for `min c.x, A x (rel) b, x >= 0` where `cols`
/// holds the sparse columns of `A`. Returns the primal solution and the row
/// multipliers `y` (`b.y = c.x`).
fn simplex_min(m: usize, cols: &[Vec<(usize, Rational)>], rel: &[Relation], b: &[Rational], c: &[Rational]) -> Core {
    let n = cols.len();
    // Row signs so that every right-hand side is nonnegative; `>= 0` rows are
    // flipped to `<= 0` so that their slack can start in the basis.
    let mut sign = vec![false; m];
    let mut nrel = rel.to_vec();
    let mut nb = b.to_vec();
    for i in 0..m {
        let flip = b[i].is_negative() || (b[i].is_zero() && rel[i] == Relation::Ge);
        if flip {
            sign[i] = true;
            nb[i] = -&nb[i];
            nrel[i] = match rel[i] {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
        }
    }
    let mut all: Vec<Vec<(usize, Rational)>> = cols
        .iter()
        .map(|col| col.iter().map(|(r, a)| (*r, if sign[*r] { -a } else { a.clone() })).collect())
        .collect();
    let mut basis = vec![usize::MAX; m];
    let mut artificial = Vec::new();
    for i in 0..m {
        match nrel[i] {
            Relation::Le => {
                all.push(vec![(i, Rational::one())]);
                basis[i] = all.len() - 1;
            }
            Relation::Ge => all.push(vec![(i, -Rational::one())]),
            Relation::Eq => {}
        }
    }
    let n_real = all.len();
    for i in 0..m {
        if nrel[i] != Relation::Le {
            all.push(vec![(i, Rational::one())]);
            basis[i] = all.len() - 1;
            artificial.push(all.len() - 1);
        }
    }
    let total = all.len();
    let mut state = Revised::new(&all, basis, nb);

    if !artificial.is_empty() {
        let mut cost1 = vec![Rational::zero(); total];
        for &a in &artificial {
            cost1[a] = Rational::one();
        }
        let enterable: Vec<bool> = (0..total).map(|_| true).collect();
        let bounded = state.optimize(&cost1, &enterable);
        debug_assert!(bounded, "phase one is bounded below");
        let infeas: Rational = (0..m)
            .filter(|&i| state.basis[i] >= n_real)
            .map(|i| state.xb[i].clone())
            .sum();
        if infeas.is_positive() {
            return Core::Infeasible;
        }
        state.drive_out_artificials(n_real);
    }

    let mut cost2 = vec![Rational::zero(); total];
    cost2[..n].clone_from_slice(c);
    let enterable: Vec<bool> = (0..total).map(|j| j < n_real).collect();
    if !state.optimize(&cost2, &enterable) {
        return Core::Unbounded;
    }
    let mut x = vec![Rational::zero(); n];
    for (i, &j) in state.basis.iter().enumerate() {
        if j < n {
            x[j] = state.xb[i].clone();
        }
    }
    let y_norm = state.prices(&cost2);
    let y = y_norm
        .into_iter()
        .zip(&sign)
        .map(|(v, &s)| if s { -v } else { v })
        .collect();
    Core::Optimal { x, y }
}

struct Revised<'a> {
    cols: &'a [Vec<(usize, Rational)>],
    m: usize,
    basis: Vec<usize>,
    in_basis: Vec<bool>,
    /// Dense basis inverse, row-major.
    binv: Vec<Vec<Rational>>,
    xb: Vec<Rational>,
}

impl<'a> Revised<'a> {
    fn new(cols: &'a [Vec<(usize, Rational)>], basis: Vec<usize>, xb: Vec<Rational>) -> Self {
        let m = basis.len();
        let mut in_basis = vec![false; cols.len()];
        for &j in &basis {
            in_basis[j] = true;
        }
        // Every starting basis column is a +1 unit vector.
        let binv = (0..m)
            .map(|i| (0..m).map(|j| if i == j { Rational::one() } else { Rational::zero() }).collect())
            .collect();
        Revised { cols, m, basis, in_basis, binv, xb }
    }

    /// Simplex multipliers `y = c_B B^-1`.
    fn prices(&self, cost: &[Rational]) -> Vec<Rational> {
        let mut y = vec![Rational::zero(); self.m];
        for (i, &j) in self.basis.iter().enumerate() {
            let cb = &cost[j];
            if cb.is_zero() {
                continue;
            }
            for (yk, bk) in y.iter_mut().zip(&self.binv[i]) {
                if !bk.is_zero() {
                    *yk += cb * bk;
                }
            }
        }
        y
    }

    /// `B^-1 a_j`.
    fn ftran(&self, j: usize) -> Vec<Rational> {
        let col = &self.cols[j];
        self.binv
            .iter()
            .map(|row| {
                col.iter()
                    .filter(|(r, _)| !row[*r].is_zero())
                    .map(|(r, a)| &row[*r] * a)
                    .sum()
            })
            .collect()
    }

    fn pivot(&mut self, p: usize, q: usize, u: &[Rational]) {
        let piv = u[p].clone();
        let theta = &self.xb[p] / &piv;
        let prow: Vec<Rational> = self.binv[p].iter().map(|v| v / &piv).collect();
        let nz: Vec<usize> = (0..self.m).filter(|&k| !prow[k].is_zero()).collect();
        for i in 0..self.m {
            if i == p || u[i].is_zero() {
                continue;
            }
            let factor = &u[i];
            let row = &mut self.binv[i];
            for &k in &nz {
                row[k] -= factor * &prow[k];
            }
            if !theta.is_zero() {
                self.xb[i] -= factor * &theta;
            }
        }
        self.binv[p] = prow;
        self.xb[p] = theta;
        self.in_basis[self.basis[p]] = false;
        self.in_basis[q] = true;
        self.basis[p] = q;
    }

    /// Runs simplex iterations; returns `false` if unbounded.
    fn optimize(&mut self, cost: &[Rational], enterable: &[bool]) -> bool {
        let mut degenerate_run = 0usize;
        loop {
            let y = self.prices(cost);
            let bland = degenerate_run >= DEGENERATE_LIMIT;
            let mut entering: Option<(usize, Rational)> = None;
            for (j, col) in self.cols.iter().enumerate() {
                if self.in_basis[j] || !enterable[j] {
                    continue;
                }
                let mut d = cost[j].clone();
                for (r, a) in col {
                    if !y[*r].is_zero() {
                        d -= &y[*r] * a;
                    }
                }
                if d.is_negative() {
                    match &entering {
                        Some((_, best)) if &d >= best => {}
                        _ => entering = Some((j, d)),
                    }
                    if bland {
                        break;
                    }
                }
            }
            let Some((q, _)) = entering else { return true };
            let u = self.ftran(q);
            let mut leave: Option<(usize, Rational)> = None;
            for i in 0..self.m {
                if !u[i].is_positive() {
                    continue;
                }
                let ratio = &self.xb[i] / &u[i];
                let better = match &leave {
                    None => true,
                    Some((p, best)) => ratio < *best || (ratio == *best && self.basis[i] < self.basis[*p]),
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
            let Some((p, theta)) = leave else { return false };
            if theta.is_zero() {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.pivot(p, q, &u);
        }
    }

    /// Pivots zero-valued artificial variables out of the basis where a real
    /// column can replace them; the rest sit on redundant rows and stay zero.
    fn drive_out_artificials(&mut self, n_real: usize) {
        for p in 0..self.m {
            if self.basis[p] < n_real {
                continue;
            }
            let row = &self.binv[p];
            let replacement = (0..n_real).find(|&j| {
                !self.in_basis[j] && !self.cols[j].iter().map(|(r, a)| &row[*r] * a).sum::<Rational>().is_zero()
            });
            if let Some(q) = replacement {
                let u = self.ftran(q);
                self.pivot(p, q, &u);
            }
        }
    }
}

mod guided {
    use std::collections::BTreeMap;
    use std::time::Duration;

    use microlp::{ComparisonOp, OptimizationDirection, Problem};

    use super::{check_certificate, LinearProgram, LpOutcome, Relation, Sense, Status};
    use crate::rational::{ExtRational, Rational};

    const MAX_DENOM: i64 = 1 << 20;

    fn op(rel: Relation) -> ComparisonOp {
        match rel {
            Relation::Le => ComparisonOp::Le,
            Relation::Eq => ComparisonOp::Eq,
            Relation::Ge => ComparisonOp::Ge,
        }
    }

    fn bounds(nonneg: bool) -> (f64, f64) {
        (if nonneg { 0.0 } else { f64::NEG_INFINITY }, f64::INFINITY)
    }

    /// Closest fraction with denominator at most [`MAX_DENOM`], by continued
    /// fractions; `None` when it is not within rounding distance.
    pub(super) fn snap(v: f64) -> Option<Rational> {
        if !v.is_finite() || v.abs() > 1e12 {
            return None;
        }
        let (mut p0, mut q0, mut p1, mut q1) = (0i64, 1i64, 1i64, 0i64);
        let mut x = v.abs();
        let mut best = Rational::zero();
        for _ in 0..64 {
            let a = x.floor();
            if a > 1e12 {
                break;
            }
            let a = a as i64;
            let (p2, q2) = (a.checked_mul(p1)?.checked_add(p0)?, a.checked_mul(q1)?.checked_add(q0)?);
            if q2 > MAX_DENOM {
                break;
            }
            best = Rational::new(p2, q2);
            (p0, q0, p1, q1) = (p1, q1, p2, q2);
            let frac = x - a as f64;
            if frac < 1e-12 {
                break;
            }
            x = 1.0 / frac;
        }
        let best = if v < 0.0 { -best } else { best };
        ((best.to_f64() - v).abs() <= 1e-7 * v.abs().max(1.0)).then_some(best)
    }

    /// The float solver can cycle on degenerate programs, so each attempt
    /// gets a deadline that grows with the program size.
    fn time_limit(lp: &LinearProgram) -> Duration {
        Duration::from_millis(500 + (lp.rows.len() * lp.vars.len() / 40) as u64)
    }

    fn float_solve(p: &Problem, vars: &[microlp::Variable]) -> Option<Vec<f64>> {
        let sol = p.solve().ok()?.into_solution().ok()?;
        Some(vars.iter().map(|v| sol.var_value(*v)).collect())
    }

    /// `coeffs (rel) rhs`.
    type ExactRow = (Vec<(usize, Rational)>, Relation, Rational);

    /// An exact system over variables that are either free or bounded on
    /// one side by zero.
    struct System {
        rows: Vec<ExactRow>,
        free: Vec<bool>,
    }

    impl System {
        fn tight(&self, row: usize, approx: &[f64]) -> bool {
            let (coeffs, rel, rhs) = &self.rows[row];
            if *rel == Relation::Eq {
                return true;
            }
            let lhs: f64 = coeffs.iter().map(|(v, a)| a.to_f64() * approx[*v]).sum();
            let rhs = rhs.to_f64();
            (lhs - rhs).abs() <= 1e-7 * rhs.abs().max(1.0)
        }

        /// The exact point of the vertex that `approx` approximates: bounded
        /// variables near zero are fixed at zero and the rows tight at
        /// `approx` are solved exactly. Variables the tight rows leave
        /// undetermined keep their snapped value.
        fn crossover(&self, approx: &[f64]) -> Option<Vec<Rational>> {
            let fixed: Vec<bool> = approx.iter().zip(&self.free).map(|(x, free)| !free && x.abs() <= 1e-9).collect();
            // Reduced echelon rows: pivot variable, other coefficients, rhs.
            let mut pivots: Vec<(usize, BTreeMap<usize, Rational>, Rational)> = Vec::new();
            let mut pivot_of: BTreeMap<usize, usize> = BTreeMap::new();
            for r in (0..self.rows.len()).filter(|&r| self.tight(r, approx)) {
                let (coeffs, _, rhs) = &self.rows[r];
                let mut eq: BTreeMap<usize, Rational> = BTreeMap::new();
                for (v, a) in coeffs.iter().filter(|(v, _)| !fixed[*v]) {
                    *eq.entry(*v).or_insert_with(Rational::zero) += a;
                }
                let mut rhs = rhs.clone();
                let hits: Vec<usize> = eq.keys().filter_map(|v| pivot_of.get(v).copied()).collect();
                for k in hits {
                    let (pv, prow, prhs) = &pivots[k];
                    let Some(f) = eq.remove(pv) else { continue };
                    for (v, a) in prow {
                        *eq.entry(*v).or_insert_with(Rational::zero) -= &f * a;
                    }
                    rhs -= &f * prhs;
                }
                eq.retain(|_, a| !a.is_zero());
                // Prefer the variable farthest from its bound as the pivot.
                let Some(pv) = eq.keys().copied().max_by(|x, y| approx[*x].abs().total_cmp(&approx[*y].abs())) else {
                    // Dependent row; a nonzero residue means it was not tight after all.
                    continue;
                };
                let inv = eq.remove(&pv).expect("pivot is present").recip();
                for a in eq.values_mut() {
                    *a *= &inv;
                }
                rhs *= &inv;
                for (_, prow, prhs) in pivots.iter_mut() {
                    let Some(f) = prow.remove(&pv) else { continue };
                    for (v, a) in &eq {
                        let e = prow.entry(*v).or_insert_with(Rational::zero);
                        *e -= &f * a;
                    }
                    prow.retain(|_, a| !a.is_zero());
                    *prhs -= &f * &rhs;
                }
                pivot_of.insert(pv, pivots.len());
                pivots.push((pv, eq, rhs));
            }
            let mut x: Vec<Option<Rational>> =
                fixed.iter().map(|f| if *f { Some(Rational::zero()) } else { None }).collect();
            for v in 0..x.len() {
                if x[v].is_none() && !pivot_of.contains_key(&v) {
                    x[v] = Some(snap(approx[v])?);
                }
            }
            for (pv, prow, prhs) in &pivots {
                let mut val = prhs.clone();
                for (v, a) in prow {
                    val -= a * x[*v].as_ref().expect("non-pivot values are set");
                }
                x[*pv] = Some(val);
            }
            x.into_iter().collect()
        }
    }

    fn snap_all(approx: &[f64]) -> Option<Vec<Rational>> {
        approx.iter().map(|v| snap(*v)).collect()
    }

    /// Returns an exactly certified optimum, or `None` to defer to the exact
    /// simplex.
    pub(super) fn solve(lp: &LinearProgram) -> Option<LpOutcome> {
        let maximize = lp.sense == Sense::Maximize;
        let dir = if maximize { OptimizationDirection::Maximize } else { OptimizationDirection::Minimize };
        let mut obj = vec![Rational::zero(); lp.vars.len()];
        for (v, a) in &lp.objective {
            obj[*v] += a;
        }
        let primal_sys = System {
            rows: lp
                .rows
                .iter()
                .map(|row| {
                    let mut merged: BTreeMap<usize, Rational> = BTreeMap::new();
                    for (v, a) in &row.coeffs {
                        *merged.entry(*v).or_insert_with(Rational::zero) += a;
                    }
                    (merged.into_iter().filter(|(_, a)| !a.is_zero()).collect(), row.rel, row.rhs.clone())
                })
                .collect(),
            free: lp.vars.iter().map(|v| !v.nonneg).collect(),
        };
        let mut primal = Problem::new(dir);
        primal.set_time_limit(time_limit(lp));
        let xs: Vec<_> = lp.vars.iter().zip(&obj).map(|(var, c)| primal.add_var(c.to_f64(), bounds(var.nonneg))).collect();
        for (coeffs, rel, rhs) in &primal_sys.rows {
            let expr: Vec<_> = coeffs.iter().map(|(v, a)| (xs[*v], a.to_f64())).collect();
            primal.add_constraint(expr.as_slice(), op(*rel), rhs.to_f64());
        }
        let x = float_solve(&primal, &xs)?;

        // Dual in minimization form: max b.y with A^T y (<= or =) c, where
        // y >= 0 on >= rows, y <= 0 on <= rows.
        let sign = if maximize { -Rational::one() } else { Rational::one() };
        let mut dual_rows: Vec<ExactRow> = lp
            .vars
            .iter()
            .zip(&obj)
            .map(|(var, c)| (Vec::new(), if var.nonneg { Relation::Le } else { Relation::Eq }, &sign * c))
            .collect();
        for (r, (coeffs, _, _)) in primal_sys.rows.iter().enumerate() {
            for (v, a) in coeffs {
                dual_rows[*v].0.push((r, a.clone()));
            }
        }
        let dual_sys = System { rows: dual_rows, free: lp.rows.iter().map(|row| row.rel == Relation::Eq).collect() };
        let mut dual = Problem::new(OptimizationDirection::Maximize);
        dual.set_time_limit(time_limit(lp));
        let ys: Vec<_> = lp
            .rows
            .iter()
            .map(|row| {
                let b = match row.rel {
                    Relation::Ge => (0.0, f64::INFINITY),
                    Relation::Le => (f64::NEG_INFINITY, 0.0),
                    Relation::Eq => (f64::NEG_INFINITY, f64::INFINITY),
                };
                dual.add_var(row.rhs.to_f64(), b)
            })
            .collect();
        for (coeffs, rel, rhs) in &dual_sys.rows {
            let expr: Vec<_> = coeffs.iter().map(|(r, a)| (ys[*r], a.to_f64())).collect();
            dual.add_constraint(expr.as_slice(), op(*rel), rhs.to_f64());
        }
        let y = float_solve(&dual, &ys)?;

        let certify = |assignment: Vec<Rational>, y_min: Vec<Rational>| -> Option<LpOutcome> {
            let duals: Vec<Rational> = y_min.into_iter().map(|d| if maximize { -d } else { d }).collect();
            let value = lp.objective_value(&assignment);
            check_certificate(lp, &assignment, &duals, &value).ok()?;
            Some(LpOutcome {
                status: Status::Optimal,
                objective: Some(ExtRational::Finite(value)),
                assignment: Some(assignment),
                duals: Some(duals),
            })
        };
        if let (Some(a), Some(d)) = (snap_all(&x), snap_all(&y)) {
            if let Some(out) = certify(a, d) {
                return Some(out);
            }
        }
        certify(primal_sys.crossover(&x)?, dual_sys.crossover(&y)?)
    }
}
