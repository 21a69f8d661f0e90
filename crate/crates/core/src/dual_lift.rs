//! Lifting a flow solution to a feasible solution of the exponential dual
//! program over the subset lattice.
//!
//! The dual has a capacity `delta_j` per constraint (flow `X_j -> Y_j`), a
//! variable `mu_{X,Y}` per pair `X ⊊ Y` (flow `Y -> X`) and a variable
//! `sigma_{I,J}` per incomparable pair (flow from `I` and `J` into `I ∩ J`
//! and `I ∪ J`). It is feasible when the excess is at least 1 at the full
//! set, at least -1 at the empty set, and nonnegative elsewhere.
//!
//! The lift walks the variables in order. Iteration `i` lifts every flow path
//! of sink `i+1` to the levels `[i]` and `[i+1]` (the path with `[i]` joined
//! to every vertex), moving one unit of excess from `[i]` to `[i+1]`.
//!
//! Readings where the pseudocode is loose:
//! - In the cleanup of a constraint with `i+1 ∉ Y_j`, the `sigma` increase
//!   alone leaves excess `-eps` at `X_j ∪ [i+1]` and `+eps` at
//!   `Y_j ∪ [i+1]`; `mu_{X_j ∪ [i+1], Y_j ∪ [i+1]}` is also raised by `eps`,
//!   which balances both and restores the level invariant.
//! - Constraints with `i+1 ∈ X_j` are skipped in the cleanup: their lifted
//!   pair does not move between levels and the update would cancel out.
//! - The backward-loop increase of `mu_{B ∪ [i], B ∪ [i+1]}` is skipped when
//!   the two sets coincide.
//! - When several constraints lift to the same pair, the level invariant
//!   holds for their summed capacities.

use std::collections::{BTreeMap, BTreeSet};

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::flow::{EdgeRef, FlowSolution, PathDecomposition};
use crate::model::{check_permutation, Instance, VarSet};
use crate::rational::Rational;

/// A solution of the exponential dual, stored sparsely.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct DualWitness {
    pub delta: Vec<Rational>,
    /// Keyed by the unordered pair, smaller set first.
    pub sigma: BTreeMap<(VarSet, VarSet), Rational>,
    /// Keyed `(lower, upper)`.
    pub mu: BTreeMap<(VarSet, VarSet), Rational>,
}

impl DualWitness {
    pub fn sigma_key(a: VarSet, b: VarSet) -> (VarSet, VarSet) {
        if a <= b {
            (a, b)
        } else {
            (b, a)
        }
    }

    pub fn objective(&self, inst: &Instance) -> Rational {
        inst.constraints().iter().zip(&self.delta).map(|(dc, d)| &dc.c * d).sum()
    }

    /// Excess at every set touched by a nonzero variable.
    pub fn excess_map(&self, inst: &Instance) -> BTreeMap<VarSet, Rational> {
        let mut ex: BTreeMap<VarSet, Rational> = BTreeMap::new();
        let mut add = |z: VarSet, v: &Rational, positive: bool| {
            let e = ex.entry(z).or_insert_with(Rational::zero);
            if positive {
                *e += v;
            } else {
                *e -= v;
            }
        };
        for (dc, d) in inst.constraints().iter().zip(&self.delta) {
            add(dc.y, d, true);
            add(dc.x, d, false);
        }
        for ((lower, upper), v) in &self.mu {
            add(*upper, v, false);
            add(*lower, v, true);
        }
        for ((a, b), v) in &self.sigma {
            add(*a, v, false);
            add(*b, v, false);
            add(a.intersection(*b), v, true);
            add(a.union(*b), v, true);
        }
        ex
    }

    pub fn to_json(&self, inst: &Instance) -> Value {
        let fmt = |s: VarSet| inst.fmt_set(s);
        json!({
            "delta": self.delta.iter().map(|d| d.to_string()).collect::<Vec<_>>(),
            "mu": self.mu.iter().filter(|(_, v)| !v.is_zero())
                .map(|((x, y), v)| json!({"X": fmt(*x), "Y": fmt(*y), "value": v.to_string()}))
                .collect::<Vec<_>>(),
            "sigma": self.sigma.iter().filter(|(_, v)| !v.is_zero())
                .map(|((a, b), v)| json!({"I": fmt(*a), "J": fmt(*b), "value": v.to_string()}))
                .collect::<Vec<_>>(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DualVerdict {
    pub accepted: bool,
    pub objective: Rational,
    /// Nonzero excesses, plus the empty and the full set.
    pub excess: BTreeMap<VarSet, Rational>,
    pub violations: Vec<String>,
}

/// Recomputes every excess from scratch and checks dual feasibility.
pub fn verify_dual_witness(inst: &Instance, w: &DualWitness) -> DualVerdict {
    let n = inst.n();
    let mut violations = Vec::new();
    if w.delta.len() != inst.k() {
        violations.push(format!("{} capacities for {} constraints", w.delta.len(), inst.k()));
    }
    for (j, d) in w.delta.iter().enumerate() {
        if d.is_negative() {
            violations.push(format!("delta_{} = {d} is negative", j + 1));
        }
    }
    for ((x, y), v) in &w.mu {
        if x.universe() != n || y.universe() != n || !x.is_proper_subset(*y) {
            violations.push(format!("mu_{},{} is not indexed by a proper pair", inst.fmt_set(*x), inst.fmt_set(*y)));
        }
        if v.is_negative() {
            violations.push(format!("mu_{},{} = {v} is negative", inst.fmt_set(*x), inst.fmt_set(*y)));
        }
    }
    for ((a, b), v) in &w.sigma {
        if a.universe() != n || b.universe() != n || !a.incomparable(*b) {
            violations.push(format!("sigma_{},{} is not indexed by an incomparable pair", inst.fmt_set(*a), inst.fmt_set(*b)));
        }
        if v.is_negative() {
            violations.push(format!("sigma_{},{} = {v} is negative", inst.fmt_set(*a), inst.fmt_set(*b)));
        }
    }
    let mut excess = if w.delta.len() == inst.k() { w.excess_map(inst) } else { BTreeMap::new() };
    excess.retain(|_, v| !v.is_zero());
    let (empty, full) = (VarSet::empty(n), VarSet::full(n));
    excess.entry(empty).or_insert_with(Rational::zero);
    excess.entry(full).or_insert_with(Rational::zero);
    for (z, e) in &excess {
        let need = if *z == full {
            Rational::one()
        } else if *z == empty {
            -Rational::one()
        } else {
            Rational::zero()
        };
        if *e < need {
            violations.push(format!("excess at {} is {e}, needs at least {need}", inst.fmt_set(*z)));
        }
    }
    DualVerdict { accepted: violations.is_empty(), objective: w.objective(inst), excess, violations }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Phase {
    Forward,
    Backward,
    Cleanup,
}

/// One lifted update, in the order both the lift and the proof generator
/// apply it. Sets named `*0` are at level `[i]`, `*1` at level `[i+1]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum Action {
    /// Upward edge at level `[i]`: `mu_{a,b} -= eps`.
    ForwardUp { a: VarSet, b: VarSet },
    /// Downward edge at level `[i]`: `mu_{b,a} += eps`.
    ForwardDown { a: VarSet, b: VarSet },
    /// Upward edge at level `[i+1]`: `mu_{a1,b1} += eps`.
    BackwardUp { a1: VarSet, b1: VarSet },
    /// Downward edge whose tail contains the new variable.
    BackwardFold { a0: VarSet, b0: VarSet, b1: VarSet },
    /// Downward edge whose tail misses the new variable.
    BackwardSubmod { a0: VarSet, b0: VarSet, a1: VarSet, b1: VarSet },
    /// Cleanup of a constraint whose head contains the new variable.
    CleanupMono { x0: VarSet, x1: VarSet, y0: VarSet },
    /// Cleanup of a constraint whose head misses the new variable.
    CleanupSubmod { x0: VarSet, y0: VarSet, x1: VarSet, y1: VarSet },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct WalkStep {
    pub iteration: usize,
    pub phase: Phase,
    /// Index of the path within its sink, for forward and backward steps.
    pub path: Option<usize>,
    /// Constraint index, for cleanup steps.
    pub constraint: Option<usize>,
    pub eps: Rational,
    pub action: Action,
}

/// The shared update schedule. `order[i]` is the variable added at
/// iteration `i`.
pub(crate) fn walk(inst: &Instance, delta: &[Rational], paths: &PathDecomposition, order: &[usize]) -> Result<Vec<WalkStep>> {
    let n = inst.n();
    check_permutation(n, order)?;
    if paths.paths.len() != n || delta.len() != inst.k() {
        return Err(Error::Structural("paths and capacities do not match the instance".into()));
    }
    let mut steps = Vec::new();
    let mut level0 = VarSet::empty(n);
    for (i, &t) in order.iter().enumerate() {
        let level1 = level0.with(t);
        let sink_paths = &paths.paths[t];
        for (p, path) in sink_paths.iter().enumerate() {
            for e in &path.edges {
                let (a, b) = e.endpoints(inst);
                let (a0, b0) = (a.union(level0), b.union(level0));
                let action = if a0.is_proper_subset(b0) {
                    Action::ForwardUp { a: a0, b: b0 }
                } else if b0.is_proper_subset(a0) {
                    Action::ForwardDown { a: a0, b: b0 }
                } else {
                    continue;
                };
                steps.push(WalkStep {
                    iteration: i,
                    phase: Phase::Forward,
                    path: Some(p),
                    constraint: None,
                    eps: path.value.clone(),
                    action,
                });
            }
        }
        for (p, path) in sink_paths.iter().enumerate() {
            for e in path.edges.iter().rev() {
                let (a, b) = e.endpoints(inst);
                let (a0, b0) = (a.union(level0), b.union(level0));
                let (a1, b1) = (a.union(level1), b.union(level1));
                let action = if a1.is_proper_subset(b1) {
                    Action::BackwardUp { a1, b1 }
                } else if b1.is_proper_subset(a1) {
                    if a.contains(t) {
                        Action::BackwardFold { a0, b0, b1 }
                    } else {
                        Action::BackwardSubmod { a0, b0, a1, b1 }
                    }
                } else {
                    continue;
                };
                steps.push(WalkStep {
                    iteration: i,
                    phase: Phase::Backward,
                    path: Some(p),
                    constraint: None,
                    eps: path.value.clone(),
                    action,
                });
            }
        }
        for (j, dc) in inst.constraints().iter().enumerate() {
            let (x1, y1) = (dc.x.union(level1), dc.y.union(level1));
            if !x1.is_proper_subset(y1) || dc.x.contains(t) {
                continue;
            }
            let eps = &delta[j] - &paths.degree_flow(j, t);
            if eps.is_negative() {
                return Err(Error::Witness(format!(
                    "paths of sink {} route more than delta_{} through constraint {}",
                    inst.var_name(t),
                    j + 1,
                    j + 1
                )));
            }
            if eps.is_zero() {
                continue;
            }
            let (x0, y0) = (dc.x.union(level0), dc.y.union(level0));
            let action = if dc.y.contains(t) {
                Action::CleanupMono { x0, x1, y0 }
            } else {
                Action::CleanupSubmod { x0, y0, x1, y1 }
            };
            steps.push(WalkStep { iteration: i, phase: Phase::Cleanup, path: None, constraint: Some(j), eps, action });
        }
        level0 = level1;
    }
    Ok(steps)
}

/// A single change to a dual variable, recorded for audit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LiftEvent {
    pub iteration: usize,
    pub phase: Phase,
    pub var: DualVar,
    /// Signed change.
    pub change: Rational,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum DualVar {
    /// `(lower, upper)`
    Mu(VarSet, VarSet),
    Sigma(VarSet, VarSet),
}

#[derive(Clone, Debug)]
pub struct LiftOptions {
    /// Variable order; identity when `None`.
    pub order: Option<Vec<usize>>,
    /// Check the per-path and per-iteration invariants.
    pub check_invariants: bool,
    pub trace: bool,
}

impl Default for LiftOptions {
    fn default() -> Self {
        LiftOptions { order: None, check_invariants: cfg!(debug_assertions), trace: false }
    }
}

#[derive(Clone, Debug)]
pub struct LiftOutput {
    pub witness: DualWitness,
    pub trace: Vec<LiftEvent>,
}

/// Mutable lift state with incrementally maintained excesses.
pub(crate) struct LiftState<'a> {
    inst: &'a Instance,
    pub witness: DualWitness,
    pub excess: BTreeMap<VarSet, Rational>,
    pub trace: Option<Vec<LiftEvent>>,
}

impl<'a> LiftState<'a> {
    pub fn new(inst: &'a Instance, delta: &[Rational], trace: bool) -> Self {
        let mut witness = DualWitness { delta: delta.to_vec(), ..Default::default() };
        for (dc, d) in inst.constraints().iter().zip(delta) {
            if !d.is_zero() {
                *witness.mu.entry((dc.x, dc.y)).or_insert_with(Rational::zero) += d;
            }
        }
        let excess = witness.excess_map(inst);
        LiftState { inst, witness, excess, trace: trace.then(Vec::new) }
    }

    pub fn excess_at(&self, z: VarSet) -> Rational {
        self.excess.get(&z).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn mu(&self, lower: VarSet, upper: VarSet) -> Rational {
        self.witness.mu.get(&(lower, upper)).cloned().unwrap_or_else(Rational::zero)
    }

    fn bump_excess(&mut self, z: VarSet, v: &Rational) {
        let e = self.excess.entry(z).or_insert_with(Rational::zero);
        *e += v;
        if e.is_zero() {
            self.excess.remove(&z);
        }
    }

    fn change_mu(&mut self, lower: VarSet, upper: VarSet, change: Rational, step: &WalkStep) -> Result<()> {
        debug_assert!(lower.is_proper_subset(upper));
        let entry = self.witness.mu.entry((lower, upper)).or_insert_with(Rational::zero);
        *entry += &change;
        if entry.is_negative() {
            return Err(Error::Internal(format!(
                "iteration {}, {:?} loop: mu_{},{} became {}",
                step.iteration,
                step.phase,
                self.inst.fmt_set(lower),
                self.inst.fmt_set(upper),
                entry
            )));
        }
        if entry.is_zero() {
            self.witness.mu.remove(&(lower, upper));
        }
        self.bump_excess(upper, &-&change);
        self.bump_excess(lower, &change);
        if let Some(trace) = &mut self.trace {
            trace.push(LiftEvent { iteration: step.iteration, phase: step.phase, var: DualVar::Mu(lower, upper), change });
        }
        Ok(())
    }

    fn raise_sigma(&mut self, a: VarSet, b: VarSet, eps: &Rational, step: &WalkStep) {
        debug_assert!(a.incomparable(b));
        let key = DualWitness::sigma_key(a, b);
        *self.witness.sigma.entry(key).or_insert_with(Rational::zero) += eps;
        let neg = -eps;
        self.bump_excess(a, &neg);
        self.bump_excess(b, &neg);
        self.bump_excess(a.intersection(b), eps);
        self.bump_excess(a.union(b), eps);
        if let Some(trace) = &mut self.trace {
            trace.push(LiftEvent {
                iteration: step.iteration,
                phase: step.phase,
                var: DualVar::Sigma(key.0, key.1),
                change: eps.clone(),
            });
        }
    }

    pub fn apply(&mut self, step: &WalkStep) -> Result<()> {
        let eps = step.eps.clone();
        let neg = -&eps;
        match step.action {
            Action::ForwardUp { a, b } => self.change_mu(a, b, neg, step),
            Action::ForwardDown { a, b } => self.change_mu(b, a, eps, step),
            Action::BackwardUp { a1, b1 } => self.change_mu(a1, b1, eps, step),
            Action::BackwardFold { a0, b0, b1 } => {
                self.change_mu(b0, a0, neg, step)?;
                if b0 != b1 {
                    self.change_mu(b0, b1, eps, step)?;
                }
                Ok(())
            }
            Action::BackwardSubmod { a0, b0, b1, .. } => {
                self.change_mu(b0, a0, neg, step)?;
                self.raise_sigma(a0, b1, &eps, step);
                Ok(())
            }
            Action::CleanupMono { x0, x1, y0 } => {
                self.change_mu(x0, y0, neg, step)?;
                self.change_mu(x0, x1, eps.clone(), step)?;
                self.change_mu(x1, y0, eps, step)
            }
            Action::CleanupSubmod { x0, y0, x1, y1 } => {
                self.change_mu(x0, y0, neg, step)?;
                self.raise_sigma(x1, y0, &eps, step);
                self.change_mu(x1, y1, eps, step)
            }
        }
    }

    /// Excess 1 at `level`, zero elsewhere except the empty set, and every
    /// lifted constraint pair holding the summed capacity.
    fn check_level(&self, iteration: usize, level: VarSet) -> Result<()> {
        let inst = self.inst;
        for (z, e) in &self.excess {
            let want = if *z == level {
                Rational::one()
            } else if z.is_empty() {
                -Rational::one()
            } else {
                Rational::zero()
            };
            if *e != want {
                return Err(Error::Internal(format!(
                    "iteration {iteration}, end of iteration: excess at {} is {e}, expected {want}",
                    inst.fmt_set(*z)
                )));
            }
        }
        if self.excess_at(level) != Rational::one() {
            return Err(Error::Internal(format!(
                "iteration {iteration}, end of iteration: excess at {} is not 1",
                inst.fmt_set(level)
            )));
        }
        let mut want: BTreeMap<(VarSet, VarSet), Rational> = BTreeMap::new();
        for (dc, d) in inst.constraints().iter().zip(&self.witness.delta) {
            let (x, y) = (dc.x.union(level), dc.y.union(level));
            if x.is_proper_subset(y) {
                *want.entry((x, y)).or_insert_with(Rational::zero) += d;
            }
        }
        for ((x, y), d) in want {
            let got = self.mu(x, y);
            if got != d {
                return Err(Error::Internal(format!(
                    "iteration {iteration}, end of iteration: mu_{},{} is {got}, expected {d}",
                    inst.fmt_set(x),
                    inst.fmt_set(y)
                )));
            }
        }
        Ok(())
    }
}

fn identity(n: usize) -> Vec<usize> {
    (0..n).collect()
}

fn check_inputs(inst: &Instance, sol: &FlowSolution, paths: &PathDecomposition) -> Result<()> {
    crate::flow::require_simple(inst)?;
    if sol.delta.len() != inst.k() || paths.paths.len() != inst.n() {
        return Err(Error::Structural("flow solution does not match the instance".into()));
    }
    for (t, list) in paths.paths.iter().enumerate() {
        let total: Rational = list.iter().map(|p| &p.value).sum();
        if total != Rational::one() {
            return Err(Error::Witness(format!("paths of sink {} carry {total}, not 1", inst.var_name(t))));
        }
        for p in list {
            for e in &p.edges {
                if let EdgeRef::Degree(j) = e {
                    if *j >= inst.k() {
                        return Err(Error::Witness(format!("path uses unknown constraint {}", j + 1)));
                    }
                }
            }
        }
    }
    Ok(())
}

/// Extends the capacities of a flow solution to a feasible dual solution.
pub fn lift(inst: &Instance, sol: &FlowSolution, paths: &PathDecomposition) -> Result<DualWitness> {
    lift_with(inst, sol, paths, &LiftOptions::default()).map(|out| out.witness)
}

pub fn lift_with(inst: &Instance, sol: &FlowSolution, paths: &PathDecomposition, opts: &LiftOptions) -> Result<LiftOutput> {
    check_inputs(inst, sol, paths)?;
    let order = opts.order.clone().unwrap_or_else(|| identity(inst.n()));
    let steps = walk(inst, &sol.delta, paths, &order)?;
    let mut state = LiftState::new(inst, &sol.delta, opts.trace);
    let mut level = VarSet::empty(inst.n());
    let mut pos = 0;
    for (i, &t) in order.iter().enumerate() {
        let next = level.with(t);
        while pos < steps.len() && steps[pos].iteration == i {
            let step = &steps[pos];
            if opts.check_invariants && step.phase == Phase::Forward {
                // Claim: one path moves exactly its value from [i] to [i+1].
                let path = step.path.expect("forward steps carry a path");
                let before = state.excess.clone();
                while pos < steps.len() && steps[pos].iteration == i && steps[pos].phase == Phase::Forward && steps[pos].path == Some(path) {
                    state.apply(&steps[pos])?;
                    pos += 1;
                }
                check_path_effect(inst, &before, &state.excess, level, next, &step.eps, i)?;
                continue;
            }
            state.apply(step)?;
            pos += 1;
        }
        if opts.check_invariants {
            state.check_level(i, next)?;
        }
        level = next;
    }
    Ok(LiftOutput { witness: state.witness, trace: state.trace.unwrap_or_default() })
}

fn check_path_effect(
    inst: &Instance,
    before: &BTreeMap<VarSet, Rational>,
    after: &BTreeMap<VarSet, Rational>,
    level0: VarSet,
    level1: VarSet,
    eps: &Rational,
    iteration: usize,
) -> Result<()> {
    let keys: BTreeSet<VarSet> = before.keys().chain(after.keys()).copied().collect();
    for z in keys {
        if z.is_empty() {
            continue;
        }
        let get = |m: &BTreeMap<VarSet, Rational>| m.get(&z).cloned().unwrap_or_else(Rational::zero);
        let diff = get(after) - get(before);
        let mut want = Rational::zero();
        if z == level0 {
            want -= eps;
        }
        if z == level1 {
            want += eps;
        }
        if diff != want {
            return Err(Error::Internal(format!(
                "iteration {iteration}, Forward loop: excess at {} moved by {diff}, expected {want}",
                inst.fmt_set(z)
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{build_aux_graph, decompose_flows};
    use crate::rational::q;

    fn s(vars: &[usize]) -> VarSet {
        VarSet::from_vars(4, vars.iter().copied())
    }

    fn run4() -> Instance {
        Instance::from_triples(
            4,
            &[
                (&[], &[0, 1], q(1, 1)),
                (&[], &[1, 2], q(2, 1)),
                (&[], &[0, 2], q(1, 1)),
                (&[0], &[0, 3], q(1, 1)),
            ],
        )
        .unwrap()
    }

    #[test]
    fn figure_witness_is_feasible() {
        let inst = run4();
        let mut w = DualWitness { delta: vec![q(1, 1), q(0, 1), q(1, 1), q(1, 1)], ..Default::default() };
        w.sigma.insert(DualWitness::sigma_key(s(&[0, 1]), s(&[0, 2])), q(1, 1));
        w.sigma.insert(DualWitness::sigma_key(s(&[0, 1, 2]), s(&[0, 3])), q(1, 1));
        w.mu.insert((s(&[]), s(&[0])), q(1, 1));
        let v = verify_dual_witness(&inst, &w);
        assert!(v.accepted, "{:?}", v.violations);
        assert_eq!(v.objective, q(3, 1));
        assert_eq!(v.excess[&s(&[])], q(-1, 1));
        assert_eq!(v.excess[&s(&[0, 1, 2, 3])], q(1, 1));
    }

    #[test]
    fn lift_of_solver_output_verifies() {
        let inst = run4();
        let sol = crate::flow::solve_flow_lp(&inst).unwrap().solution.unwrap();
        let g = build_aux_graph(&inst).unwrap();
        let paths = decompose_flows(&inst, &sol, &g).unwrap();
        let opts = LiftOptions { check_invariants: true, ..Default::default() };
        let w = lift_with(&inst, &sol, &paths, &opts).unwrap().witness;
        let v = verify_dual_witness(&inst, &w);
        assert!(v.accepted, "{:?}", v.violations);
        assert_eq!(v.objective, q(3, 1));
    }

    #[test]
    fn negative_mu_is_rejected() {
        let inst = run4();
        let mut w = DualWitness { delta: vec![q(1, 1), q(0, 1), q(1, 1), q(1, 1)], ..Default::default() };
        w.mu.insert((s(&[]), s(&[0])), q(-1, 1));
        let v = verify_dual_witness(&inst, &w);
        assert!(!v.accepted);
        assert!(v.violations.iter().any(|m| m.contains("mu_{},{1}") && m.contains("negative")));
    }
}
