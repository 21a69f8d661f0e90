//! Bound-preserving rewrites of an instance into restricted shapes.
//!
//! - [`reduce_acyclic_plus_simple`]: every variable is split into two copies
//!   tied by functional dependencies, and each constraint reads from the
//!   first copies and writes to the second ones.
//! - [`reduce_two_three`]: pairs of variables are merged into fresh ones
//!   until every constraint has `|X| <= 2` and `|Y| <= 3`.
//! - [`reduce_simple_plus_fd`]: pairs inside guards are merged until every
//!   constraint is simple or a functional dependency.
//!
//! A merged variable `m` of `p` and `q` is tied to them by the functional
//! dependencies that make `h(m) = h(pq)` for every admissible function.

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::model::{DegreeConstraint, Instance, VarSet, MAX_VARS};
use crate::rational::Rational;

/// Where a variable of the reduced instance comes from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum VarOrigin {
    /// Same variable as in the original instance.
    Original(usize),
    /// First copy of an original variable.
    CopyX(usize),
    /// Second copy of an original variable.
    CopyY(usize),
    /// Fresh variable standing for the pair, as reduced-universe indices.
    Merged(usize, usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReductionTrace {
    pub original: Instance,
    pub reduced: Instance,
    /// One entry per reduced variable.
    pub variable_map: Vec<VarOrigin>,
    /// Indices in `reduced` of the functional dependencies added for
    /// consistency.
    pub added_consistency: Vec<usize>,
    pub iterations: usize,
}

impl ReductionTrace {
    pub fn to_json(&self) -> Value {
        let r = &self.reduced;
        let map: Vec<Value> = self
            .variable_map
            .iter()
            .enumerate()
            .map(|(v, o)| {
                let (kind, of) = match o {
                    VarOrigin::Original(u) => ("original", vec![self.original.var_name(*u)]),
                    VarOrigin::CopyX(u) => ("copy-x", vec![self.original.var_name(*u)]),
                    VarOrigin::CopyY(u) => ("copy-y", vec![self.original.var_name(*u)]),
                    VarOrigin::Merged(a, b) => ("merged", vec![r.var_name(*a), r.var_name(*b)]),
                };
                json!({"var": r.var_name(v), "kind": kind, "of": of})
            })
            .collect();
        let added: Vec<Value> = self
            .added_consistency
            .iter()
            .map(|&i| {
                let dc = &r.constraints()[i];
                json!({"index": i + 1, "X": r.fmt_set(dc.x), "Y": r.fmt_set(dc.y), "c": dc.c.to_string()})
            })
            .collect();
        json!({
            "original": self.original.to_json_value(),
            "reduced": r.to_json_value(),
            "variable_map": map,
            "added_consistency": added,
            "iterations": self.iterations,
        })
    }
}

/// Constraints over a growing universe, as raw bit masks.
#[derive(Clone)]
struct Work {
    names: Vec<String>,
    origin: Vec<VarOrigin>,
    /// `(X, Y, c, added for consistency)`
    cs: Vec<(u64, u64, Rational, bool)>,
}

impl Work {
    fn from_instance(inst: &Instance) -> Self {
        Work {
            names: base_names(inst),
            origin: (0..inst.n()).map(VarOrigin::Original).collect(),
            cs: inst.constraints().iter().map(|dc| (dc.x.bits(), dc.y.bits(), dc.c.clone(), false)).collect(),
        }
    }

    fn fresh(&mut self, p: usize, q: usize, counter: &mut usize) -> Result<usize> {
        let m = self.names.len();
        if m >= MAX_VARS {
            return Err(Error::Size { n: m + 1, cap: MAX_VARS });
        }
        *counter += 1;
        let mut name = format!("m{counter}");
        while self.names.contains(&name) {
            name.push('_');
        }
        self.names.push(name);
        self.origin.push(VarOrigin::Merged(p, q));
        Ok(m)
    }

    fn fd(&mut self, x: u64, y: u64) {
        self.cs.push((x, x | y, Rational::zero(), true));
    }

    fn finish(self, original: &Instance, iterations: usize) -> Result<ReductionTrace> {
        let n = self.names.len();
        let mut added = Vec::new();
        let mut cs = Vec::new();
        for (i, (x, y, c, extra)) in self.cs.into_iter().enumerate() {
            if extra {
                added.push(i);
            }
            cs.push(DegreeConstraint::new(VarSet::from_bits(n, x), VarSet::from_bits(n, y), c)?);
        }
        let reduced = Instance::new(n, cs)?.with_names(self.names)?;
        Ok(ReductionTrace { original: original.clone(), reduced, variable_map: self.origin, added_consistency: added, iterations })
    }
}

fn base_names(inst: &Instance) -> Vec<String> {
    match inst.names() {
        Some(names) => names.to_vec(),
        None => (1..=inst.n()).map(|v| format!("v{v}")).collect(),
    }
}

fn lowest_pair(bits: u64) -> (usize, usize) {
    let p = bits.trailing_zeros() as usize;
    let q = (bits & !(1u64 << p)).trailing_zeros() as usize;
    (p, q)
}

fn replace_pair(bits: u64, p: usize, q: usize, m: usize) -> u64 {
    (bits & !(1u64 << p) & !(1u64 << q)) | (1u64 << m)
}

fn count(bits: u64) -> usize {
    bits.count_ones() as usize
}

/// Splits each variable `v` into `x_v` and `y_v` with `x_v <-> y_v`
/// functional dependencies; a constraint `(A, B, c)` becomes
/// `(x_A, x_A ∪ y_{B-A}, c)`. The rewritten constraints only point from
/// first copies to second copies, so they are acyclic.
pub fn reduce_acyclic_plus_simple(inst: &Instance) -> Result<ReductionTrace> {
    let n = inst.n();
    let nn = 2 * n;
    if nn > MAX_VARS {
        return Err(Error::Size { n: nn, cap: MAX_VARS });
    }
    let names: Vec<String> = (0..n)
        .map(|v| format!("x_{}", inst.var_name(v)))
        .chain((0..n).map(|v| format!("y_{}", inst.var_name(v))))
        .collect();
    let origin: Vec<VarOrigin> = (0..n).map(VarOrigin::CopyX).chain((0..n).map(VarOrigin::CopyY)).collect();
    let mut cs = Vec::new();
    for dc in inst.constraints() {
        let a = dc.x.bits();
        let b = dc.y.bits() & !a;
        cs.push((a, a | (b << n), dc.c.clone(), false));
    }
    let mut w = Work { names, origin, cs };
    for v in 0..n {
        let (xv, yv) = (1u64 << v, 1u64 << (v + n));
        w.fd(xv, yv);
        w.fd(yv, xv);
    }
    w.finish(inst, n)
}

/// Merges pairs until every constraint has `|X| <= 2` and `|Y| <= 3`, with
/// `|Y| = 3` only for functional dependencies with `|X| = 2` and `|Y| = 2`
/// only with `|X| = 1`. Pairs are picked lowest-numbered first.
pub fn reduce_two_three(inst: &Instance) -> Result<ReductionTrace> {
    let mut w = Work::from_instance(inst);
    let budget = 2 * inst.n() * inst.k() + inst.k();
    let mut counter = 0;
    let mut iterations = 0;
    loop {
        let found = w.cs.iter().enumerate().find_map(|(i, (x, y, c, _))| {
            let rest = y & !x;
            if count(*x) > 2 {
                Some((i, *x, true))
            } else if count(rest) >= 2 {
                Some((i, rest, false))
            } else if count(*x) == 2 && !c.is_zero() {
                Some((i, *x, true))
            } else {
                None
            }
        });
        let Some((i, pool, in_x)) = found else { break };
        iterations += 1;
        if iterations > budget {
            return Err(Error::Internal(format!("merging did not settle within {budget} rounds")));
        }
        let (p, q) = lowest_pair(pool);
        let m = w.fresh(p, q, &mut counter)?;
        let (x, y, _, _) = &mut w.cs[i];
        if in_x {
            *x = replace_pair(*x, p, q, m);
        }
        *y = replace_pair(*y, p, q, m);
        let (bp, bq, bm) = (1u64 << p, 1u64 << q, 1u64 << m);
        w.fd(bp | bq, bm);
        w.fd(bm, bp);
        w.fd(bm, bq);
    }
    w.finish(inst, iterations)
}

/// Merges the lowest pair in the guard of the first non-FD constraint with
/// `|X| >= 2`, rewriting every non-FD constraint whose guard holds the pair,
/// until all non-FD constraints are simple.
pub fn reduce_simple_plus_fd(inst: &Instance) -> Result<ReductionTrace> {
    let mut w = Work::from_instance(inst);
    let budget = inst.n() * inst.k() + 1;
    let mut counter = 0;
    let mut iterations = 0;
    while let Some(i) = w.cs.iter().position(|(x, _, c, _)| !c.is_zero() && count(*x) >= 2) {
        iterations += 1;
        if iterations > budget {
            return Err(Error::Internal(format!("merging did not settle within {budget} rounds")));
        }
        let (p, q) = lowest_pair(w.cs[i].0);
        let m = w.fresh(p, q, &mut counter)?;
        let pair = (1u64 << p) | (1u64 << q);
        for (x, y, c, _) in w.cs.iter_mut() {
            if !c.is_zero() && *x & pair == pair {
                *x = replace_pair(*x, p, q, m);
                *y = replace_pair(*y, p, q, m);
            }
        }
        let bm = 1u64 << m;
        w.fd(pair, bm);
        w.fd(bm, pair);
    }
    w.finish(inst, iterations)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::classify;
    use crate::oracle::polymatroid_bound_value;
    use crate::rational::{q, ExtRational};

    fn run4() -> Instance {
        Instance::from_triples(
            4,
            &[(&[], &[0, 1], q(1, 1)), (&[], &[1, 2], q(2, 1)), (&[], &[0, 2], q(1, 1)), (&[0], &[0, 3], q(1, 1))],
        )
        .unwrap()
    }

    #[test]
    fn copies_preserve_running_example() {
        let t = reduce_acyclic_plus_simple(&run4()).unwrap();
        assert_eq!(t.reduced.n(), 8);
        assert_eq!(t.added_consistency.len(), 8);
        assert_eq!(polymatroid_bound_value(&t.reduced).unwrap(), ExtRational::Finite(q(3, 1)));
    }

    #[test]
    fn tiny_copy_instance() {
        let inst = Instance::from_triples(1, &[(&[], &[0], q(3, 2))]).unwrap();
        let t = reduce_acyclic_plus_simple(&inst).unwrap();
        assert_eq!((t.reduced.n(), t.reduced.k()), (2, 3));
        assert_eq!(polymatroid_bound_value(&t.reduced).unwrap(), ExtRational::Finite(q(3, 2)));
    }

    #[test]
    fn two_three_on_wide_cardinality() {
        let inst = Instance::from_triples(4, &[(&[], &[0, 1, 2, 3], q(2, 1))]).unwrap();
        let t = reduce_two_three(&inst).unwrap();
        assert!(t.iterations > 0);
        for dc in t.reduced.constraints() {
            assert!(dc.x.len() <= 2 && dc.y.len() <= 3);
        }
        assert_eq!(polymatroid_bound_value(&t.reduced).unwrap(), ExtRational::Finite(q(2, 1)));
    }

    #[test]
    fn conforming_instance_is_untouched() {
        let inst = Instance::from_triples(3, &[(&[0], &[0, 1], q(1, 1)), (&[], &[2], q(1, 1))]).unwrap();
        let t = reduce_two_three(&inst).unwrap();
        assert_eq!(t.iterations, 0);
        assert_eq!(t.reduced.constraints(), inst.constraints());
    }

    #[test]
    fn simple_fd_chains_merges() {
        let inst = Instance::from_triples(4, &[(&[0, 1, 2], &[0, 1, 2, 3], q(1, 1)), (&[], &[0, 1, 2], q(1, 1))]).unwrap();
        let t = reduce_simple_plus_fd(&inst).unwrap();
        assert_eq!(t.iterations, 2);
        assert_eq!(t.variable_map[5], VarOrigin::Merged(2, 4));
        let c = classify(&t.reduced);
        assert!(c.constraints.iter().all(|tag| tag.simple || tag.fd));
        assert_eq!(polymatroid_bound_value(&t.reduced).unwrap(), polymatroid_bound_value(&inst).unwrap());
    }
}
