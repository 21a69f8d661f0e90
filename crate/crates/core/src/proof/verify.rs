//! Checks a proof sequence by replaying it on a bag of weighted terms.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{Instance, VarSet};
use crate::proof::{ProofSequence, ProofStep, Term};
use crate::rational::Rational;

/// Nonnegative weights on conditional terms. Trivial terms `h(S|S)` are
/// never stored and may be consumed freely.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TermBag {
    terms: BTreeMap<Term, Rational>,
}

impl TermBag {
    pub fn new() -> Self {
        Self::default()
    }

    /// `sum_j delta_j * h(Y_j | X_j)`.
    pub fn initial(inst: &Instance, delta: &[Rational]) -> Self {
        let mut bag = TermBag::new();
        for (dc, d) in inst.constraints().iter().zip(delta) {
            bag.add(Term::new(dc.x, dc.y), d);
        }
        bag
    }

    pub fn get(&self, t: Term) -> Rational {
        self.terms.get(&t).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Term, &Rational)> {
        self.terms.iter()
    }

    pub fn add(&mut self, t: Term, w: &Rational) {
        if t.is_trivial() || w.is_zero() {
            return;
        }
        let e = self.terms.entry(t).or_insert_with(Rational::zero);
        *e += w;
        if e.is_zero() {
            self.terms.remove(&t);
        }
    }

    fn take(&mut self, t: Term, w: &Rational) -> std::result::Result<(), String> {
        if t.is_trivial() {
            return Ok(());
        }
        let have = self.get(t);
        if have < *w {
            return Err(format!("needs {w} of {t} but only {have} is available"));
        }
        self.add(t, &-w);
        Ok(())
    }

    /// Applies one step, assuming its shape was already validated. Returns
    /// the reason when a coefficient would go negative; the bag is left
    /// unchanged in that case.
    pub fn apply(&mut self, step: &ProofStep) -> std::result::Result<(), String> {
        let before = self.clone();
        let res = self.apply_inner(step);
        if res.is_err() {
            *self = before;
        }
        res
    }

    fn apply_inner(&mut self, step: &ProofStep) -> std::result::Result<(), String> {
        match step {
            ProofStep::Decompose { w, x, z, y } => {
                self.take(Term::new(*x, *y), w)?;
                self.add(Term::new(*x, *z), w);
                self.add(Term::new(*z, *y), w);
            }
            ProofStep::Compose { w, x, z, y } => {
                self.take(Term::new(*x, *z), w)?;
                self.take(Term::new(*z, *y), w)?;
                self.add(Term::new(*x, *y), w);
            }
            ProofStep::Monotonicity { w, x, y } => self.take(Term::new(*x, *y), w)?,
            ProofStep::Submodularity { w, i, j } => {
                self.take(Term::new(i.intersection(*j), *i), w)?;
                self.add(Term::new(*j, i.union(*j)), w);
            }
        }
        Ok(())
    }
}

/// Shape checks that do not depend on the bag.
pub fn check_step_shape(n: usize, step: &ProofStep) -> std::result::Result<(), String> {
    let in_universe = |s: &VarSet| s.universe() == n;
    if !step.weight().is_positive() {
        return Err(format!("weight {} is not positive", step.weight()));
    }
    match step {
        ProofStep::Decompose { x, z, y, .. } | ProofStep::Compose { x, z, y, .. } => {
            if ![x, z, y].iter().all(|s| in_universe(s)) {
                return Err("set outside the universe".into());
            }
            if !(x.is_subset(*z) && z.is_subset(*y) && x.is_proper_subset(*y)) {
                return Err(format!("needs X ⊆ Z ⊆ Y with X ≠ Y, got X={x} Z={z} Y={y}"));
            }
        }
        ProofStep::Monotonicity { x, y, .. } => {
            if !(in_universe(x) && in_universe(y)) {
                return Err("set outside the universe".into());
            }
            if !x.is_subset(*y) {
                return Err(format!("needs X ⊆ Y, got X={x} Y={y}"));
            }
        }
        ProofStep::Submodularity { i, j, .. } => {
            if !(in_universe(i) && in_universe(j)) {
                return Err("set outside the universe".into());
            }
            if !i.incomparable(*j) {
                return Err(format!("needs incomparable sets, got I={i} J={j}"));
            }
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProofVerdict {
    pub accepted: bool,
    /// 0-based index of the first step that would make a weight negative.
    pub failed_step: Option<usize>,
    pub reason: Option<String>,
    /// Weight of `h([n] | ∅)` after the last applied step.
    pub final_coefficient: Rational,
    /// `sum_j c_j * delta_j`.
    pub bound: Rational,
}

/// Replays `seq` from the weighted constraint terms of `inst`.
///
/// Malformed steps are errors; a step that overdraws a term, or a final
/// weight of `h([n] | ∅)` below 1, gives a rejecting verdict.
pub fn verify_proof(inst: &Instance, seq: &ProofSequence) -> Result<ProofVerdict> {
    let n = inst.n();
    if seq.n != n {
        return Err(Error::ProofStructure { step: 0, reason: format!("proof targets {} variables, instance has {n}", seq.n) });
    }
    if seq.delta.len() != inst.k() {
        return Err(Error::ProofStructure {
            step: 0,
            reason: format!("proof has {} capacities, instance has {} constraints", seq.delta.len(), inst.k()),
        });
    }
    if let Some(d) = seq.delta.iter().find(|d| d.is_negative()) {
        return Err(Error::ProofStructure { step: 0, reason: format!("negative capacity {d}") });
    }
    for (idx, step) in seq.steps.iter().enumerate() {
        check_step_shape(n, step).map_err(|reason| Error::ProofStructure { step: idx + 1, reason })?;
    }
    let bound: Rational = inst.constraints().iter().zip(&seq.delta).map(|(dc, d)| &dc.c * d).sum();
    let target = Term::new(VarSet::empty(n), VarSet::full(n));
    let mut bag = TermBag::initial(inst, &seq.delta);
    for (idx, step) in seq.steps.iter().enumerate() {
        if let Err(reason) = bag.apply(step) {
            return Ok(ProofVerdict {
                accepted: false,
                failed_step: Some(idx),
                reason: Some(format!("step {} ({}): {reason}", idx + 1, step.kind())),
                final_coefficient: bag.get(target),
                bound,
            });
        }
    }
    let fin = bag.get(target);
    let accepted = fin >= Rational::one();
    Ok(ProofVerdict {
        accepted,
        failed_step: None,
        reason: (!accepted).then(|| format!("final weight of h([n]) is {fin}, below 1")),
        final_coefficient: fin,
        bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    fn s(v: &[usize]) -> VarSet {
        VarSet::from_vars(2, v.iter().copied())
    }

    fn inst() -> Instance {
        Instance::from_triples(2, &[(&[], &[0], q(1, 1)), (&[0], &[0, 1], q(2, 1))]).unwrap()
    }

    #[test]
    fn compose_two_terms() {
        let seq = ProofSequence {
            n: 2,
            delta: vec![q(1, 1), q(1, 1)],
            steps: vec![ProofStep::Compose { w: q(1, 1), x: s(&[]), z: s(&[0]), y: s(&[0, 1]) }],
        };
        let v = verify_proof(&inst(), &seq).unwrap();
        assert!(v.accepted);
        assert_eq!(v.bound, q(3, 1));
    }

    #[test]
    fn overdraw_is_rejected_at_the_step() {
        let seq = ProofSequence {
            n: 2,
            delta: vec![q(1, 2), q(1, 1)],
            steps: vec![ProofStep::Compose { w: q(1, 1), x: s(&[]), z: s(&[0]), y: s(&[0, 1]) }],
        };
        let v = verify_proof(&inst(), &seq).unwrap();
        assert!(!v.accepted);
        assert_eq!(v.failed_step, Some(0));
    }

    #[test]
    fn shape_errors() {
        let bad = [
            ProofStep::Decompose { w: q(1, 1), x: s(&[0]), z: s(&[]), y: s(&[0, 1]) },
            ProofStep::Monotonicity { w: q(0, 1), x: s(&[]), y: s(&[0]) },
            ProofStep::Submodularity { w: q(1, 1), i: s(&[0]), j: s(&[0, 1]) },
        ];
        for step in bad {
            let seq = ProofSequence { n: 2, delta: vec![q(1, 1), q(1, 1)], steps: vec![step] };
            assert!(matches!(verify_proof(&inst(), &seq), Err(Error::ProofStructure { step: 1, .. })));
        }
    }
}
