//! Runs the lift and the proof generator side by side and checks that the
//! term weights track the dual variables after every update.
//!
//! With `M_{X,Y}` the total weight discarded by monotonicity steps on
//! `h(Y|X)`, the tracked identity is
//! - weight of `h(Y|∅)` = excess at `Y` + `mu_{∅,Y}` - `M_{∅,Y}`,
//! - weight of `h(Y|X)` = `mu_{X,Y}` - `M_{X,Y}` for nonempty `X`.

use std::collections::{BTreeMap, BTreeSet};

use crate::dual_lift::{walk, LiftState};
use crate::error::{Error, Result};
use crate::flow::{require_simple, FlowSolution, PathDecomposition};
use crate::model::Instance;
use crate::proof::generate::steps_for;
use crate::proof::verify::TermBag;
use crate::proof::{ProofStep, Term};
use crate::rational::Rational;

/// Returns the number of lifted updates checked.
pub fn check_lockstep(inst: &Instance, sol: &FlowSolution, paths: &PathDecomposition, order: &[usize]) -> Result<usize> {
    require_simple(inst)?;
    let schedule = walk(inst, &sol.delta, paths, order)?;
    let mut state = LiftState::new(inst, &sol.delta, false);
    let mut bag = TermBag::initial(inst, &sol.delta);
    let mut dropped: BTreeMap<Term, Rational> = BTreeMap::new();
    compare(inst, &state, &bag, &dropped, 0)?;
    for (idx, ws) in schedule.iter().enumerate() {
        state.apply(ws)?;
        for step in steps_for(inst.n(), ws) {
            bag.apply(&step).map_err(|reason| Error::Internal(format!("update {}: {reason}", idx + 1)))?;
            if let ProofStep::Monotonicity { w, x, y } = &step {
                *dropped.entry(Term::new(*x, *y)).or_insert_with(Rational::zero) += w;
            }
        }
        compare(inst, &state, &bag, &dropped, idx + 1)?;
    }
    Ok(schedule.len())
}

fn compare(inst: &Instance, state: &LiftState, bag: &TermBag, dropped: &BTreeMap<Term, Rational>, idx: usize) -> Result<()> {
    let n = inst.n();
    let mut terms: BTreeSet<Term> = bag.iter().map(|(t, _)| *t).collect();
    terms.extend(state.witness.mu.keys().map(|(x, y)| Term::new(*x, *y)));
    terms.extend(state.excess.keys().filter(|z| !z.is_empty()).map(|z| Term::new(crate::model::VarSet::empty(n), *z)));
    terms.extend(dropped.keys().copied());
    for t in terms {
        let mut want = state.mu(t.lower, t.upper);
        if t.lower.is_empty() {
            want += state.excess_at(t.upper);
        }
        if let Some(d) = dropped.get(&t) {
            want -= d;
        }
        let got = bag.get(t);
        if got != want {
            return Err(Error::Internal(format!(
                "after update {idx}: weight of {t} is {got}, dual variables give {want}"
            )));
        }
    }
    Ok(())
}
