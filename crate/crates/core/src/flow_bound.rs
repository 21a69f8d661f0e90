//! Flow bound for general instances.
//!
//! Simple constraints are kept as they are and routed as in the simple flow
//! program. Every other constraint is trimmed along a permutation, like the
//! chain bound, and pays for demand directly: its capacity lowers the demand
//! of each sink in its trimmed head. The value lies between the polymatroid
//! bound and the chain bound for the same permutation.
//!
//! The free edges use the same orientation as the simple flow program.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::Result;
use crate::flow::{graph_of_simple, AuxGraph};
use crate::lp::{solve, LinearProgram, Relation, Sense, Status};
use crate::model::{check_permutation, classify, topological_permutation, DegreeConstraint, Instance, VarSet};
use crate::oracle::chain_head;
use crate::rational::{ExtRational, Rational};

/// The constraint set the flow bound works on: simple constraints first,
/// verbatim, then the trimmed non-simple ones.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelaxedInstance {
    pub base: Instance,
    pub pi: Vec<usize>,
    /// Number of simple constraints; they occupy indices `0..k_s`.
    pub k_s: usize,
    pub relaxed: Instance,
    /// Index in `base` of each relaxed constraint.
    pub origin: Vec<usize>,
}

impl RelaxedInstance {
    pub fn new(inst: &Instance, pi: &[usize]) -> Result<Self> {
        check_permutation(inst.n(), pi)?;
        let mut pos = vec![0; inst.n()];
        for (p, &v) in pi.iter().enumerate() {
            pos[v] = p;
        }
        let mut cs = Vec::new();
        let mut origin = Vec::new();
        for (i, dc) in inst.constraints().iter().enumerate() {
            if dc.is_simple() {
                cs.push(dc.clone());
                origin.push(i);
            }
        }
        let k_s = cs.len();
        for (i, dc) in inst.constraints().iter().enumerate() {
            if dc.is_simple() {
                continue;
            }
            let y = chain_head(dc, &pos);
            if y != dc.x {
                cs.push(DegreeConstraint::new(dc.x, y, dc.c.clone())?);
                origin.push(i);
            }
        }
        let mut relaxed = Instance::new_allow_empty(inst.n(), cs)?;
        if let Some(names) = inst.names() {
            relaxed = relaxed.with_names(names.to_vec())?;
        }
        Ok(RelaxedInstance { base: inst.clone(), pi: pi.to_vec(), k_s, relaxed, origin })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FlowBoundOptions {
    /// Let sink `t` also draw flow from the singletons placed before `t`.
    pub multi_source: bool,
    /// Forbid a simple constraint from carrying flow of a sink in its own
    /// head, `f_{i,t} = 0` for `t ∈ Y_i - X_i`. Off by default: with it on,
    /// the value on simple instances can exceed the simple flow program.
    pub forbid_own_head: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlowBoundResult {
    pub bound: ExtRational,
    pub relaxed: RelaxedInstance,
    /// Optimal capacities indexed like the base instance.
    pub delta: Option<Vec<Rational>>,
}

pub fn flow_bound(inst: &Instance, pi: &[usize], multi_source: bool) -> Result<ExtRational> {
    let opts = FlowBoundOptions { multi_source, ..Default::default() };
    flow_bound_with(inst, pi, &opts).map(|r| r.bound)
}

pub fn flow_bound_with(inst: &Instance, pi: &[usize], opts: &FlowBoundOptions) -> Result<FlowBoundResult> {
    let rel = RelaxedInstance::new(inst, pi)?;
    let graph = graph_of_simple(&rel.relaxed, &(0..rel.k_s).collect::<Vec<_>>());
    let lp = program(&rel, &graph, opts);
    let out = solve(&lp)?;
    match out.status {
        Status::Optimal => {}
        Status::Infeasible => return Ok(FlowBoundResult { bound: ExtRational::Infinite, relaxed: rel, delta: None }),
        Status::Unbounded => {
            return Err(crate::error::Error::Internal("flow bound program is unbounded below".into()));
        }
    }
    let x = out.assignment.expect("optimal outcome has an assignment");
    let mut delta = vec![Rational::zero(); inst.k()];
    for (j, &i) in rel.origin.iter().enumerate() {
        delta[i] = x[j].clone();
    }
    let bound = out.objective.expect("optimal outcome has an objective");
    Ok(FlowBoundResult { bound, relaxed: rel, delta: Some(delta) })
}

fn program(rel: &RelaxedInstance, graph: &AuxGraph, opts: &FlowBoundOptions) -> LinearProgram {
    let r = &rel.relaxed;
    let (n, k, k_s) = (r.n(), r.k(), rel.k_s);
    let one = Rational::one;
    let mut lp = LinearProgram::new(Sense::Minimize);
    for (i, dc) in r.constraints().iter().enumerate() {
        let v = lp.add_var(format!("delta{}", i + 1));
        lp.set_objective(v, dc.c.clone());
    }
    let f = |i: usize, t: usize| k + i * n + t;
    for i in 0..k_s {
        for t in 0..n {
            lp.add_var(format!("f{},{}", i + 1, t + 1));
        }
    }
    let mu_base = k + k_s * n;
    for (upper, lower) in &graph.mu_edges {
        for t in 0..n {
            lp.add_var(format!("mu{}{},{}", lower, upper, t + 1));
        }
    }
    for i in 0..k_s {
        for t in 0..n {
            lp.add_row(vec![(f(i, t), one()), (i, -one())], Relation::Le, Rational::zero());
        }
    }
    if opts.forbid_own_head {
        for (i, dc) in r.constraints()[..k_s].iter().enumerate() {
            for t in dc.y.difference(dc.x).iter() {
                lp.add_row(vec![(f(i, t), one())], Relation::Le, Rational::zero());
            }
        }
    }
    let mut pos = vec![0; n];
    for (p, &v) in rel.pi.iter().enumerate() {
        pos[v] = p;
    }
    let index: BTreeMap<VarSet, usize> = graph.vertices.iter().enumerate().map(|(p, v)| (*v, p)).collect();
    for t in 0..n {
        let mut rows: Vec<Vec<(usize, Rational)>> = vec![Vec::new(); graph.vertices.len()];
        for (i, dc) in r.constraints()[..k_s].iter().enumerate() {
            rows[index[&dc.y]].push((f(i, t), one()));
            rows[index[&dc.x]].push((f(i, t), -one()));
        }
        for (e, (upper, lower)) in graph.mu_edges.iter().enumerate() {
            rows[index[lower]].push((mu_base + e * n + t, one()));
            rows[index[upper]].push((mu_base + e * n + t, -one()));
        }
        let sink = VarSet::singleton(n, t);
        for (i, dc) in r.constraints().iter().enumerate().skip(k_s) {
            if dc.y.difference(dc.x).contains(t) {
                rows[index[&sink]].push((i, one()));
            }
        }
        let mut sources = vec![VarSet::empty(n)];
        if opts.multi_source {
            sources.extend((0..n).filter(|&v| pos[v] < pos[t]).map(|v| VarSet::singleton(n, v)));
        }
        let mut supply = Vec::new();
        for s in sources {
            let v = lp.add_var(format!("src{},{}", s, t + 1));
            rows[index[&s]].push((v, one()));
            supply.push((v, one()));
        }
        lp.add_row(supply, Relation::Le, one());
        for (p, coeffs) in rows.into_iter().enumerate() {
            let rhs = if graph.vertices[p] == sink { one() } else { Rational::zero() };
            lp.add_row(coeffs, Relation::Ge, rhs);
        }
    }
    lp
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PermutationReason {
    SimpleAny,
    AcyclicTopological,
    HeuristicIdentity,
}

impl PermutationReason {
    pub fn as_str(self) -> &'static str {
        match self {
            PermutationReason::SimpleAny => "simple-any",
            PermutationReason::AcyclicTopological => "acyclic-topological",
            PermutationReason::HeuristicIdentity => "heuristic-identity",
        }
    }
}

/// A permutation for which the flow bound is exact when the instance is
/// simple or acyclic. Acyclic instances get a topological order, which also
/// makes the chain bound exact.
pub fn suggest_permutation(inst: &Instance) -> (Vec<usize>, PermutationReason) {
    if let Some(pi) = topological_permutation(inst) {
        return (pi, PermutationReason::AcyclicTopological);
    }
    let identity: Vec<usize> = (0..inst.n()).collect();
    if classify(inst).is_simple {
        (identity, PermutationReason::SimpleAny)
    } else {
        (identity, PermutationReason::HeuristicIdentity)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{chain_bound, polymatroid_bound_value};
    use crate::rational::q;

    fn gap2() -> Instance {
        Instance::from_triples(2, &[(&[], &[1], q(1, 1)), (&[1], &[0, 1], q(1, 1))]).unwrap()
    }

    #[test]
    fn gap_instance_separates_from_chain() {
        let inst = gap2();
        assert_eq!(flow_bound(&inst, &[0, 1], false).unwrap(), ExtRational::Finite(q(2, 1)));
        assert_eq!(chain_bound(&inst, &[0, 1]).unwrap(), ExtRational::Infinite);
    }

    #[test]
    fn acyclic_suggestion() {
        let inst = Instance::from_triples(3, &[(&[0, 1], &[0, 1, 2], q(1, 1)), (&[], &[0, 1], q(1, 1))]).unwrap();
        let (pi, why) = suggest_permutation(&inst);
        assert_eq!(why, PermutationReason::AcyclicTopological);
        assert_eq!(pi[2], 2);
        let fb = flow_bound(&inst, &pi, false).unwrap();
        assert_eq!(fb, polymatroid_bound_value(&inst).unwrap());
        assert_eq!(fb, ExtRational::Finite(q(2, 1)));
    }

    #[test]
    fn cyclic_suggestion_is_heuristic() {
        let inst = Instance::from_triples(
            3,
            &[(&[0, 1], &[0, 1, 2], q(1, 1)), (&[1, 2], &[0, 1, 2], q(1, 1)), (&[], &[1], q(1, 1))],
        )
        .unwrap();
        assert_eq!(suggest_permutation(&inst), ((0..3).collect(), PermutationReason::HeuristicIdentity));
    }

    #[test]
    fn relaxed_keeps_simple_first() {
        let inst = Instance::from_triples(3, &[(&[0, 1], &[0, 1, 2], q(1, 1)), (&[], &[0, 1], q(1, 1))]).unwrap();
        let rel = RelaxedInstance::new(&inst, &[2, 0, 1]).unwrap();
        assert_eq!(rel.k_s, 1);
        assert_eq!(rel.origin, vec![1]);
        assert_eq!(rel.relaxed.k(), 1);
    }

    #[test]
    fn invalid_permutation() {
        assert!(flow_bound(&gap2(), &[0, 0], false).is_err());
    }
}
