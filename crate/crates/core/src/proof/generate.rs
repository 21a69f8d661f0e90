//! Emits the proof sequence that mirrors the dual lift, step for step.

use std::collections::BTreeMap;

use crate::dual_lift::{walk, Action, WalkStep};
use crate::error::{Error, Result};
use crate::flow::{require_simple, FlowSolution, PathDecomposition};
use crate::model::{Instance, VarSet};
use crate::proof::{ProofSequence, ProofStep, Term};
use crate::rational::Rational;

/// The proof steps for one lifted update.
pub(crate) fn steps_for(n: usize, ws: &WalkStep) -> Vec<ProofStep> {
    let w = ws.eps.clone();
    let none = VarSet::empty(n);
    match ws.action {
        Action::ForwardUp { a, b } => vec![ProofStep::Compose { w, x: none, z: a, y: b }],
        Action::ForwardDown { a, b } => vec![ProofStep::Decompose { w, x: none, z: b, y: a }],
        Action::BackwardUp { a1, b1 } => vec![ProofStep::Decompose { w, x: none, z: a1, y: b1 }],
        Action::BackwardFold { a0, b0, b1 } => {
            let mut out = Vec::with_capacity(2);
            if b0 != b1 {
                out.push(ProofStep::Decompose { w: w.clone(), x: none, z: b0, y: b1 });
            }
            out.push(ProofStep::Compose { w, x: none, z: b0, y: a0 });
            out
        }
        Action::BackwardSubmod { a0, a1, b1, .. } => vec![
            ProofStep::Submodularity { w: w.clone(), i: a0, j: b1 },
            ProofStep::Compose { w, x: none, z: b1, y: a1 },
        ],
        Action::CleanupMono { x0, x1, y0 } => vec![
            ProofStep::Decompose { w: w.clone(), x: x0, z: x1, y: y0 },
            ProofStep::Monotonicity { w, x: x0, y: x1 },
        ],
        Action::CleanupSubmod { y0, x1, .. } => vec![ProofStep::Submodularity { w, i: y0, j: x1 }],
    }
}

/// Running weights kept by the generator to catch a faulty schedule early.
struct Ledger(BTreeMap<Term, Rational>);

impl Ledger {
    fn shift(&mut self, t: Term, w: &Rational, idx: usize) -> Result<()> {
        if t.is_trivial() {
            return Ok(());
        }
        let e = self.0.entry(t).or_insert_with(Rational::zero);
        *e += w;
        if e.is_negative() {
            return Err(Error::Generation { step: idx, reason: format!("weight of {t} became {e}") });
        }
        Ok(())
    }

    fn record(&mut self, step: &ProofStep, idx: usize) -> Result<()> {
        let neg = |w: &Rational| -w;
        match step {
            ProofStep::Decompose { w, x, z, y } => {
                self.shift(Term::new(*x, *y), &neg(w), idx)?;
                self.shift(Term::new(*x, *z), w, idx)?;
                self.shift(Term::new(*z, *y), w, idx)
            }
            ProofStep::Compose { w, x, z, y } => {
                self.shift(Term::new(*x, *z), &neg(w), idx)?;
                self.shift(Term::new(*z, *y), &neg(w), idx)?;
                self.shift(Term::new(*x, *y), w, idx)
            }
            ProofStep::Monotonicity { w, x, y } => self.shift(Term::new(*x, *y), &neg(w), idx),
            ProofStep::Submodularity { w, i, j } => {
                self.shift(Term::new(i.intersection(*j), *i), &neg(w), idx)?;
                self.shift(Term::new(*j, i.union(*j)), w, idx)
            }
        }
    }
}

/// Regression cap on the number of steps: `16 (k + n) k n^2`.
pub fn length_cap(n: usize, k: usize) -> usize {
    16 * (k + n) * k * n * n
}

pub fn generate_proof(inst: &Instance, sol: &FlowSolution, paths: &PathDecomposition) -> Result<ProofSequence> {
    generate_proof_with_order(inst, sol, paths, &(0..inst.n()).collect::<Vec<_>>())
}

/// Same as [`generate_proof`] with the variables added in `order`.
pub fn generate_proof_with_order(
    inst: &Instance,
    sol: &FlowSolution,
    paths: &PathDecomposition,
    order: &[usize],
) -> Result<ProofSequence> {
    require_simple(inst)?;
    let n = inst.n();
    let schedule = walk(inst, &sol.delta, paths, order)?;
    let mut ledger = Ledger(BTreeMap::new());
    for (dc, d) in inst.constraints().iter().zip(&sol.delta) {
        ledger.shift(Term::new(dc.x, dc.y), d, 0)?;
    }
    let mut steps = Vec::new();
    for ws in &schedule {
        for step in steps_for(n, ws) {
            ledger.record(&step, steps.len() + 1)?;
            steps.push(step);
        }
    }
    let cap = length_cap(n, inst.k());
    if steps.len() > cap {
        return Err(Error::Generation { step: steps.len(), reason: format!("{} steps exceed the bound {cap}", steps.len()) });
    }
    let target = Term::new(VarSet::empty(n), VarSet::full(n));
    let fin = ledger.0.get(&target).cloned().unwrap_or_else(Rational::zero);
    if fin < Rational::one() {
        return Err(Error::Generation { step: steps.len(), reason: format!("final weight of h([n]) is {fin}") });
    }
    Ok(ProofSequence { n, delta: sol.delta.clone(), steps })
}
