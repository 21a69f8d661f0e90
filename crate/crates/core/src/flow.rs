//! Flow formulation of the polymatroid bound for simple instances.
//!
//! The auxiliary graph has the empty set, every singleton and every
//! constraint head as vertices. Degree edges `X_i -> Y_i` carry capacity
//! `delta_i` at cost `c_i`; free edges run from every vertex to each of its
//! proper subsets. The bound is the cheapest capacity purchase that routes a
//! unit of flow from the empty set to every singleton.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::lp::{solve, LinearProgram, Relation, Sense, Status};
use crate::model::{Instance, VarSet};
use crate::rational::{ExtRational, Rational};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DegreeEdge {
    pub index: usize,
    pub from: VarSet,
    pub to: VarSet,
    pub cost: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AuxGraph {
    pub n: usize,
    /// Sorted by the crate-wide set order.
    pub vertices: Vec<VarSet>,
    pub degree_edges: Vec<DegreeEdge>,
    /// Free edges `(upper, lower)` with `lower ⊊ upper`, flow running downward.
    pub mu_edges: Vec<(VarSet, VarSet)>,
}

impl AuxGraph {
    pub fn contains(&self, v: VarSet) -> bool {
        self.vertices.binary_search(&v).is_ok()
    }

    /// Vertices reachable from the empty set, optionally ignoring some
    /// degree edges.
    pub fn reachable_from_empty(&self, skip: &[usize]) -> BTreeSet<VarSet> {
        let mut seen = BTreeSet::from([VarSet::empty(self.n)]);
        let mut queue = VecDeque::from([VarSet::empty(self.n)]);
        while let Some(v) = queue.pop_front() {
            let ups = self
                .degree_edges
                .iter()
                .filter(|e| e.from == v && !skip.contains(&e.index))
                .map(|e| e.to);
            let downs = self.mu_edges.iter().filter(|(u, _)| *u == v).map(|(_, l)| *l);
            for w in ups.chain(downs).collect::<Vec<_>>() {
                if seen.insert(w) {
                    queue.push_back(w);
                }
            }
        }
        seen
    }
}

pub(crate) fn require_simple(inst: &Instance) -> Result<()> {
    match inst.constraints().iter().position(|dc| !dc.is_simple()) {
        Some(i) => Err(Error::Classification(format!(
            "instance is not simple: constraint {} has |X| = {}",
            i + 1,
            inst.constraints()[i].x.len()
        ))),
        None => Ok(()),
    }
}

pub fn build_aux_graph(inst: &Instance) -> Result<AuxGraph> {
    require_simple(inst)?;
    Ok(graph_of_simple(inst, &(0..inst.k()).collect::<Vec<_>>()))
}

/// Graph over the listed constraints, which must all be simple.
pub(crate) fn graph_of_simple(inst: &Instance, indices: &[usize]) -> AuxGraph {
    let n = inst.n();
    let mut vertices = BTreeSet::from([VarSet::empty(n)]);
    vertices.extend((0..n).map(|v| VarSet::singleton(n, v)));
    let degree_edges: Vec<DegreeEdge> = indices
        .iter()
        .map(|&i| {
            let dc = &inst.constraints()[i];
            vertices.insert(dc.y);
            DegreeEdge { index: i, from: dc.x, to: dc.y, cost: dc.c.clone() }
        })
        .collect();
    let vertices: Vec<VarSet> = vertices.into_iter().collect();
    let mut mu_edges = Vec::new();
    for &upper in &vertices {
        for &lower in &vertices {
            if lower.is_proper_subset(upper) {
                mu_edges.push((upper, lower));
            }
        }
    }
    AuxGraph { n, vertices, degree_edges, mu_edges }
}

/// An edge of the auxiliary graph: a degree edge by constraint index, or a
/// free edge from a set down to a subset.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EdgeRef {
    Degree(usize),
    Mu { from: VarSet, to: VarSet },
}

impl EdgeRef {
    pub fn endpoints(&self, inst: &Instance) -> (VarSet, VarSet) {
        match *self {
            EdgeRef::Degree(i) => (inst.constraints()[i].x, inst.constraints()[i].y),
            EdgeRef::Mu { from, to } => (from, to),
        }
    }

    pub fn label(&self, inst: &Instance) -> String {
        match self {
            EdgeRef::Degree(i) => {
                let (a, b) = self.endpoints(inst);
                format!("d{}:{}->{}", i + 1, inst.fmt_set(a), inst.fmt_set(b))
            }
            EdgeRef::Mu { from, to } => format!("mu:{}->{}", inst.fmt_set(*from), inst.fmt_set(*to)),
        }
    }
}

/// A feasible point of the flow program: capacities `delta`, per-sink
/// degree-edge flows `f[i][t]` and per-sink free-edge flows.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlowSolution {
    pub delta: Vec<Rational>,
    pub f: Vec<Vec<Rational>>,
    /// Per sink, nonzero free-edge flows keyed `(lower, upper)`.
    pub mu: Vec<BTreeMap<(VarSet, VarSet), Rational>>,
    pub objective: Rational,
}

impl FlowSolution {
    /// Net inflow at `z` in the flow problem for sink `t`.
    pub fn excess(&self, inst: &Instance, t: usize, z: VarSet) -> Rational {
        let mut e = Rational::zero();
        for (i, dc) in inst.constraints().iter().enumerate() {
            if dc.y == z {
                e += &self.f[i][t];
            }
            if dc.x == z {
                e -= &self.f[i][t];
            }
        }
        for ((lower, upper), v) in &self.mu[t] {
            if *upper == z {
                e -= v;
            }
            if *lower == z {
                e += v;
            }
        }
        e
    }

    /// Re-checks every constraint of the flow program from scratch.
    pub fn check(&self, inst: &Instance, graph: &AuxGraph) -> Result<()> {
        let (n, k) = (inst.n(), inst.k());
        if self.delta.len() != k || self.f.len() != k || self.mu.len() != n {
            return Err(Error::Witness("flow solution has the wrong shape".into()));
        }
        for i in 0..k {
            if self.delta[i].is_negative() {
                return Err(Error::Witness(format!("delta_{} is negative", i + 1)));
            }
            if self.f[i].len() != n {
                return Err(Error::Witness("flow solution has the wrong shape".into()));
            }
            for t in 0..n {
                if self.f[i][t].is_negative() || self.f[i][t] > self.delta[i] {
                    return Err(Error::Witness(format!(
                        "f_{},{} = {} outside [0, delta]",
                        i + 1,
                        inst.var_name(t),
                        self.f[i][t]
                    )));
                }
            }
        }
        let mu_edges: BTreeSet<(VarSet, VarSet)> = graph.mu_edges.iter().map(|(u, l)| (*l, *u)).collect();
        for t in 0..n {
            for (key, v) in &self.mu[t] {
                if !mu_edges.contains(key) {
                    return Err(Error::Witness(format!(
                        "free edge {}->{} is not in the graph",
                        inst.fmt_set(key.1),
                        inst.fmt_set(key.0)
                    )));
                }
                if v.is_negative() {
                    return Err(Error::Witness(format!(
                        "free edge {}->{} carries negative flow for sink {}",
                        inst.fmt_set(key.1),
                        inst.fmt_set(key.0),
                        inst.var_name(t)
                    )));
                }
            }
            let sink = VarSet::singleton(n, t);
            for &z in &graph.vertices {
                let want = if z == sink {
                    Rational::one()
                } else if z.is_empty() {
                    -Rational::one()
                } else {
                    Rational::zero()
                };
                let got = self.excess(inst, t, z);
                if got != want {
                    return Err(Error::Witness(format!(
                        "sink {}: excess at {} is {got}, expected {want}",
                        inst.var_name(t),
                        inst.fmt_set(z)
                    )));
                }
            }
        }
        let cost: Rational = inst.constraints().iter().zip(&self.delta).map(|(dc, d)| &dc.c * d).sum();
        if cost != self.objective {
            return Err(Error::Witness(format!("objective {} differs from cost {cost}", self.objective)));
        }
        Ok(())
    }

    /// Positive per-edge flows for sink `t`.
    pub fn sink_flows(&self, t: usize) -> BTreeMap<EdgeRef, Rational> {
        let mut out = BTreeMap::new();
        for (i, row) in self.f.iter().enumerate() {
            if row[t].is_positive() {
                out.insert(EdgeRef::Degree(i), row[t].clone());
            }
        }
        for ((lower, upper), v) in &self.mu[t] {
            if v.is_positive() {
                out.insert(EdgeRef::Mu { from: *upper, to: *lower }, v.clone());
            }
        }
        out
    }

    /// Builds a solution from explicit paths per sink, each a vertex
    /// sequence with a value. Upward steps use the lowest-indexed matching
    /// degree edge.
    pub fn from_paths(inst: &Instance, delta: Vec<Rational>, paths: &[Vec<(Vec<VarSet>, Rational)>]) -> Result<Self> {
        let (n, k) = (inst.n(), inst.k());
        if paths.len() != n || delta.len() != k {
            return Err(Error::Structural("need one path list per sink and one delta per constraint".into()));
        }
        let mut f = vec![vec![Rational::zero(); n]; k];
        let mut mu = vec![BTreeMap::new(); n];
        for (t, list) in paths.iter().enumerate() {
            for (verts, value) in list {
                for w in verts.windows(2) {
                    let (a, b) = (w[0], w[1]);
                    if a.is_proper_subset(b) {
                        let i = inst
                            .constraints()
                            .iter()
                            .position(|dc| dc.x == a && dc.y == b)
                            .ok_or_else(|| Error::Structural(format!("no degree edge {a}->{b}")))?;
                        f[i][t] += value;
                    } else if b.is_proper_subset(a) {
                        *mu[t].entry((b, a)).or_insert_with(Rational::zero) += value;
                    } else {
                        return Err(Error::Structural(format!("{a}->{b} is not an edge")));
                    }
                }
            }
        }
        let objective = inst.constraints().iter().zip(&delta).map(|(dc, d)| &dc.c * d).sum();
        Ok(FlowSolution { delta, f, mu, objective })
    }

    /// `{"delta": {...}, "flows": {t: {edge: value}}, "objective": "p/q"}`.
    pub fn to_json(&self, inst: &Instance) -> Value {
        let delta: Map<String, Value> = self
            .delta
            .iter()
            .enumerate()
            .map(|(i, d)| ((i + 1).to_string(), Value::String(d.to_string())))
            .collect();
        let flows: Map<String, Value> = (0..inst.n())
            .map(|t| {
                let edges: Map<String, Value> = self
                    .sink_flows(t)
                    .into_iter()
                    .map(|(e, v)| (e.label(inst), Value::String(v.to_string())))
                    .collect();
                (inst.var_name(t), Value::Object(edges))
            })
            .collect();
        json!({"delta": delta, "flows": flows, "objective": self.objective.to_string()})
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlowResult {
    pub bound: ExtRational,
    pub solution: Option<FlowSolution>,
}

/// Solves the flow program for a simple instance.
pub fn solve_flow_lp(inst: &Instance) -> Result<FlowResult> {
    solve_flow_lp_excluding(inst, &[])
}

/// Like [`solve_flow_lp`] with `delta_i = 0` forced for every listed index.
pub fn solve_flow_lp_excluding(inst: &Instance, excluded: &[usize]) -> Result<FlowResult> {
    let graph = build_aux_graph(inst)?;
    let (n, k) = (inst.n(), inst.k());
    let reach = graph.reachable_from_empty(excluded);
    if (0..n).any(|t| !reach.contains(&VarSet::singleton(n, t))) {
        return Ok(FlowResult { bound: ExtRational::Infinite, solution: None });
    }
    let lp = flow_lp(inst, &graph, excluded);
    let out = solve(&lp)?;
    if out.status != Status::Optimal {
        return Err(Error::Internal(format!("flow program reported {:?} despite reachability", out.status)));
    }
    let x = out.assignment.expect("optimal outcome has an assignment");
    let f_base = k;
    let mu_base = k + k * n;
    let delta = x[..k].to_vec();
    let f = (0..k).map(|i| x[f_base + i * n..f_base + (i + 1) * n].to_vec()).collect();
    let mut mu = vec![BTreeMap::new(); n];
    for (e, (upper, lower)) in graph.mu_edges.iter().enumerate() {
        for (t, m) in mu.iter_mut().enumerate() {
            let v = &x[mu_base + e * n + t];
            if !v.is_zero() {
                m.insert((*lower, *upper), v.clone());
            }
        }
    }
    let objective = out.objective.and_then(|o| o.into_finite()).expect("finite optimum");
    let sol = FlowSolution { delta, f, mu, objective: objective.clone() };
    sol.check(inst, &graph)?;
    Ok(FlowResult { bound: ExtRational::Finite(objective), solution: Some(sol) })
}

fn flow_lp(inst: &Instance, graph: &AuxGraph, excluded: &[usize]) -> LinearProgram {
    let (n, k) = (inst.n(), inst.k());
    let mut lp = LinearProgram::new(Sense::Minimize);
    for (i, dc) in inst.constraints().iter().enumerate() {
        let v = lp.add_var(format!("delta{}", i + 1));
        lp.set_objective(v, dc.c.clone());
    }
    for i in 0..k {
        for t in 0..n {
            lp.add_var(format!("f{},{}", i + 1, t + 1));
        }
    }
    for (upper, lower) in &graph.mu_edges {
        for t in 0..n {
            lp.add_var(format!("mu{}{},{}", lower, upper, t + 1));
        }
    }
    let one = Rational::one;
    for i in 0..k {
        for t in 0..n {
            lp.add_row(vec![(k + i * n + t, one()), (i, -one())], Relation::Le, Rational::zero());
        }
    }
    for &i in excluded {
        lp.add_row(vec![(i, one())], Relation::Le, Rational::zero());
    }
    let index: BTreeMap<VarSet, usize> = graph.vertices.iter().enumerate().map(|(p, v)| (*v, p)).collect();
    let mu_base = k + k * n;
    for t in 0..n {
        let mut rows: Vec<Vec<(usize, Rational)>> = vec![Vec::new(); graph.vertices.len()];
        for (i, dc) in inst.constraints().iter().enumerate() {
            rows[index[&dc.y]].push((k + i * n + t, one()));
            rows[index[&dc.x]].push((k + i * n + t, -one()));
        }
        for (e, (upper, lower)) in graph.mu_edges.iter().enumerate() {
            rows[index[lower]].push((mu_base + e * n + t, one()));
            rows[index[upper]].push((mu_base + e * n + t, -one()));
        }
        let sink = VarSet::singleton(n, t);
        for (p, coeffs) in rows.into_iter().enumerate() {
            let z = graph.vertices[p];
            let rhs = if z == sink {
                one()
            } else if z.is_empty() {
                -one()
            } else {
                Rational::zero()
            };
            // The excesses of one sink sum to zero, so these inequalities
            // hold with equality at every feasible point.
            lp.add_row(coeffs, Relation::Ge, rhs);
        }
    }
    lp
}

/// A unit flow path from the empty set to a sink.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlowPath {
    pub vertices: Vec<VarSet>,
    pub edges: Vec<EdgeRef>,
    pub value: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PathDecomposition {
    /// Per sink, paths in extraction order.
    pub paths: Vec<Vec<FlowPath>>,
    /// Per sink, the flow left after cancelling cycles.
    pub cancelled: Vec<BTreeMap<EdgeRef, Rational>>,
}

impl PathDecomposition {
    /// Total value on degree edge `i` over the paths of sink `t`.
    pub fn degree_flow(&self, i: usize, t: usize) -> Rational {
        self.paths[t]
            .iter()
            .filter(|p| p.edges.contains(&EdgeRef::Degree(i)))
            .map(|p| &p.value)
            .sum()
    }

    /// Edge-wise sum of path values for sink `t`.
    pub fn recompose(&self, t: usize) -> BTreeMap<EdgeRef, Rational> {
        let mut out: BTreeMap<EdgeRef, Rational> = BTreeMap::new();
        for p in &self.paths[t] {
            for e in &p.edges {
                *out.entry(*e).or_insert_with(Rational::zero) += &p.value;
            }
        }
        out
    }
}

/// Splits each sink's flow into simple paths after cancelling cycles.
/// Paths are extracted greedily along the smallest next vertex.
pub fn decompose_flows(inst: &Instance, sol: &FlowSolution, graph: &AuxGraph) -> Result<PathDecomposition> {
    sol.check(inst, graph)?;
    let n = inst.n();
    let mut paths = Vec::with_capacity(n);
    let mut cancelled = Vec::with_capacity(n);
    for t in 0..n {
        let mut flows = sol.sink_flows(t);
        cancel_cycles(inst, &mut flows);
        cancelled.push(flows.clone());
        paths.push(extract_paths(inst, t, &mut flows)?);
    }
    Ok(PathDecomposition { paths, cancelled })
}

fn out_edges(inst: &Instance, flows: &BTreeMap<EdgeRef, Rational>, v: VarSet) -> Vec<(VarSet, EdgeRef)> {
    let mut out: Vec<(VarSet, EdgeRef)> = flows
        .iter()
        .filter(|(_, val)| val.is_positive())
        .filter_map(|(e, _)| {
            let (a, b) = e.endpoints(inst);
            (a == v).then_some((b, *e))
        })
        .collect();
    out.sort();
    out
}

fn cancel_cycles(inst: &Instance, flows: &mut BTreeMap<EdgeRef, Rational>) {
    while let Some(cycle) = find_cycle(inst, flows) {
        let bottleneck = cycle.iter().map(|e| flows[e].clone()).min().expect("non-empty cycle");
        for e in &cycle {
            let v = flows.get_mut(e).expect("cycle edge");
            *v -= &bottleneck;
            if v.is_zero() {
                flows.remove(e);
            }
        }
    }
}

fn find_cycle(inst: &Instance, flows: &BTreeMap<EdgeRef, Rational>) -> Option<Vec<EdgeRef>> {
    let mut verts: BTreeSet<VarSet> = BTreeSet::new();
    for e in flows.keys() {
        let (a, b) = e.endpoints(inst);
        verts.insert(a);
        verts.insert(b);
    }
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut state: BTreeMap<VarSet, u8> = verts.iter().map(|v| (*v, 0)).collect();
    for &root in &verts {
        if state[&root] != 0 {
            continue;
        }
        let mut stack: Vec<(VarSet, Vec<(VarSet, EdgeRef)>, usize)> =
            vec![(root, out_edges(inst, flows, root), 0)];
        let mut trail: Vec<EdgeRef> = Vec::new();
        state.insert(root, 1);
        while let Some((v, succ, pos)) = stack.last_mut() {
            if *pos == succ.len() {
                state.insert(*v, 2);
                stack.pop();
                trail.pop();
                continue;
            }
            let (w, e) = succ[*pos];
            *pos += 1;
            match state[&w] {
                0 => {
                    state.insert(w, 1);
                    trail.push(e);
                    let next = out_edges(inst, flows, w);
                    stack.push((w, next, 0));
                }
                1 => {
                    let start = stack.iter().position(|(u, _, _)| *u == w).expect("vertex on stack");
                    let mut cycle: Vec<EdgeRef> = trail[start..].to_vec();
                    cycle.push(e);
                    return Some(cycle);
                }
                _ => {}
            }
        }
    }
    None
}

fn extract_paths(inst: &Instance, t: usize, flows: &mut BTreeMap<EdgeRef, Rational>) -> Result<Vec<FlowPath>> {
    let n = inst.n();
    let source = VarSet::empty(n);
    let sink = VarSet::singleton(n, t);
    let mut paths = Vec::new();
    let mut remaining = Rational::one();
    while remaining.is_positive() {
        let mut vertices = vec![source];
        let mut edges = Vec::new();
        let mut v = source;
        while v != sink {
            let &(w, e) = out_edges(inst, flows, v).first().ok_or_else(|| {
                Error::Witness(format!("sink {}: flow stops at {}", inst.var_name(t), inst.fmt_set(v)))
            })?;
            if vertices.contains(&w) {
                return Err(Error::Internal("cycle survived cancellation".into()));
            }
            vertices.push(w);
            edges.push(e);
            v = w;
        }
        let value = edges.iter().map(|e| flows[e].clone()).min().expect("non-empty path");
        for e in &edges {
            let f = flows.get_mut(e).expect("path edge");
            *f -= &value;
            if f.is_zero() {
                flows.remove(e);
            }
        }
        remaining -= &value;
        paths.push(FlowPath { vertices, edges, value });
    }
    if remaining.is_negative() || !flows.is_empty() {
        return Err(Error::Internal(format!("sink {}: flow left after path extraction", inst.var_name(t))));
    }
    Ok(paths)
}

/// Outcome of the max-flow check for one sink.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SinkVerdict {
    Feasible,
    /// `cut` is the set of variables whose singletons lie on the source side
    /// of a minimum cut; `row_sum` is the total capacity of the constraints
    /// `(X, Y)` with `X ⊆ cut` and `Y ⊄ cut`, which is below one.
    Violated { cut: VarSet, max_flow: Rational, row_sum: Rational },
}

/// Capacity of the cut constraints `X ⊆ v`, `Y ⊄ v`.
pub fn cut_row_sum(inst: &Instance, delta: &[Rational], v: VarSet) -> Rational {
    inst.constraints()
        .iter()
        .zip(delta)
        .filter(|(dc, _)| dc.x.is_subset(v) && !dc.y.is_subset(v))
        .map(|(_, d)| d)
        .sum()
}

/// Per sink, checks whether capacities `delta` admit a unit flow; otherwise
/// returns the cut certifying that they do not.
pub fn min_cut_certificate(inst: &Instance, delta: &[Rational]) -> Result<Vec<SinkVerdict>> {
    let graph = build_aux_graph(inst)?;
    if delta.len() != inst.k() || delta.iter().any(|d| d.is_negative()) {
        return Err(Error::Structural("delta must be nonnegative with one entry per constraint".into()));
    }
    let nv = graph.vertices.len();
    let index: BTreeMap<VarSet, usize> = graph.vertices.iter().enumerate().map(|(p, v)| (*v, p)).collect();
    // None stands for infinite capacity.
    let mut cap: Vec<Vec<Option<Rational>>> = vec![vec![Some(Rational::zero()); nv]; nv];
    for e in &graph.degree_edges {
        let (a, b) = (index[&e.from], index[&e.to]);
        if let Some(c) = &mut cap[a][b] {
            *c += &delta[e.index];
        }
    }
    for (upper, lower) in &graph.mu_edges {
        cap[index[upper]][index[lower]] = None;
    }
    let source = index[&VarSet::empty(inst.n())];
    let mut verdicts = Vec::with_capacity(inst.n());
    for t in 0..inst.n() {
        let sink = index[&VarSet::singleton(inst.n(), t)];
        let (value, side) = max_flow_up_to_one(&cap, source, sink);
        if value >= Rational::one() {
            verdicts.push(SinkVerdict::Feasible);
        } else {
            let cut = side
                .iter()
                .enumerate()
                .filter(|(p, inside)| **inside && graph.vertices[*p].len() == 1)
                .fold(VarSet::empty(inst.n()), |acc, (p, _)| acc.union(graph.vertices[p]));
            let row_sum = cut_row_sum(inst, delta, cut);
            verdicts.push(SinkVerdict::Violated { cut, max_flow: value, row_sum });
        }
    }
    Ok(verdicts)
}

/// Edmonds-Karp, stopping once one unit is routed. Returns the flow value
/// and the residual-reachable side of the source.
fn max_flow_up_to_one(cap: &[Vec<Option<Rational>>], s: usize, t: usize) -> (Rational, Vec<bool>) {
    let nv = cap.len();
    let mut flow = vec![vec![Rational::zero(); nv]; nv];
    let mut total = Rational::zero();
    let residual = |flow: &Vec<Vec<Rational>>, u: usize, v: usize| -> Option<Option<Rational>> {
        // Some(None) = infinite residual, Some(Some(r)) = finite positive.
        let forward = match &cap[u][v] {
            None => return Some(None),
            Some(c) => c - &flow[u][v],
        };
        let r = forward + &flow[v][u];
        r.is_positive().then_some(Some(r))
    };
    loop {
        let mut parent = vec![usize::MAX; nv];
        let mut seen = vec![false; nv];
        seen[s] = true;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for v in 0..nv {
                if !seen[v] && residual(&flow, u, v).is_some() {
                    seen[v] = true;
                    parent[v] = u;
                    queue.push_back(v);
                }
            }
        }
        if !seen[t] || total >= Rational::one() {
            return (total, seen);
        }
        let mut push = Rational::one() - &total;
        let mut v = t;
        while v != s {
            let u = parent[v];
            if let Some(Some(r)) = residual(&flow, u, v) {
                push = push.min(r);
            }
            v = u;
        }
        let mut v = t;
        while v != s {
            let u = parent[v];
            // Cancel reverse flow first, then push forward.
            let back = flow[v][u].clone().min(push.clone());
            flow[v][u] -= &back;
            flow[u][v] += &(&push - &back);
            v = u;
        }
        total += &push;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

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

    fn s(vars: &[usize]) -> VarSet {
        VarSet::from_vars(4, vars.iter().copied())
    }

    #[test]
    fn graph_of_running_example() {
        let g = build_aux_graph(&run4()).unwrap();
        let expected: Vec<VarSet> = vec![
            s(&[]),
            s(&[0]),
            s(&[1]),
            s(&[2]),
            s(&[3]),
            s(&[0, 1]),
            s(&[0, 2]),
            s(&[1, 2]),
            s(&[0, 3]),
        ];
        assert_eq!(g.vertices, expected);
        assert_eq!(g.degree_edges.len(), 4);
        assert!(g.mu_edges.contains(&(s(&[0, 1]), s(&[0]))));
        assert!(g.mu_edges.iter().all(|(u, l)| l.is_proper_subset(*u)));
    }

    #[test]
    fn running_example_bound() {
        let r = solve_flow_lp(&run4()).unwrap();
        assert_eq!(r.bound, ExtRational::Finite(q(3, 1)));
        let sol = r.solution.unwrap();
        let g = build_aux_graph(&run4()).unwrap();
        let d = decompose_flows(&run4(), &sol, &g).unwrap();
        for t in 0..4 {
            let total: Rational = d.paths[t].iter().map(|p| &p.value).sum();
            assert_eq!(total, Rational::one());
            assert_eq!(d.recompose(t), d.cancelled[t]);
        }
        assert!(min_cut_certificate(&run4(), &sol.delta)
            .unwrap()
            .iter()
            .all(|v| *v == SinkVerdict::Feasible));
    }

    #[test]
    fn cycles_are_cancelled() {
        let inst = run4();
        let paths = vec![
            vec![(vec![s(&[]), s(&[0, 1]), s(&[0])], q(1, 1))],
            vec![(vec![s(&[]), s(&[0, 1]), s(&[1])], q(1, 1))],
            vec![(vec![s(&[]), s(&[0, 2]), s(&[2])], q(1, 1))],
            vec![(vec![s(&[]), s(&[0, 1]), s(&[0]), s(&[0, 3]), s(&[3])], q(1, 1))],
        ];
        let mut sol = FlowSolution::from_paths(&inst, vec![q(1, 1), q(0, 1), q(1, 1), q(1, 1)], &paths).unwrap();
        // Add a circulation {a} -> {a,d} -> {a} for sink a.
        sol.f[3][0] += q(1, 2);
        *sol.mu[0].entry((s(&[0]), s(&[0, 3]))).or_insert_with(Rational::zero) += q(1, 2);
        let g = build_aux_graph(&inst).unwrap();
        let d = decompose_flows(&inst, &sol, &g).unwrap();
        assert_eq!(d.paths[0].len(), 1);
        assert_eq!(d.paths[0][0].vertices, vec![s(&[]), s(&[0, 1]), s(&[0])]);
        assert_eq!(d.paths[3][0].vertices.len(), 5);
    }

    #[test]
    fn broken_conservation_names_vertex() {
        let inst = run4();
        let g = build_aux_graph(&inst).unwrap();
        let mut sol = solve_flow_lp(&inst).unwrap().solution.unwrap();
        sol.mu[2].clear();
        let err = decompose_flows(&inst, &sol, &g).unwrap_err();
        assert!(matches!(err, Error::Witness(ref m) if m.contains("excess at")), "{err}");
    }

    #[test]
    fn unreachable_sink_is_unbounded() {
        let inst = Instance::from_triples(2, &[(&[], &[0], q(1, 1))]).unwrap();
        assert_eq!(solve_flow_lp(&inst).unwrap().bound, ExtRational::Infinite);
    }

    #[test]
    fn zero_capacity_cut_is_empty_set() {
        let verdicts = min_cut_certificate(&run4(), &vec![q(0, 1); 4]).unwrap();
        for v in verdicts {
            match v {
                SinkVerdict::Violated { cut, row_sum, .. } => {
                    assert!(cut.is_empty());
                    assert_eq!(row_sum, Rational::zero());
                }
                SinkVerdict::Feasible => panic!("zero capacity cannot be feasible"),
            }
        }
    }

    #[test]
    fn non_simple_rejected() {
        let inst = Instance::from_triples(3, &[(&[0, 1], &[0, 1, 2], q(1, 1))]).unwrap();
        assert!(matches!(build_aux_graph(&inst), Err(Error::Classification(_))));
    }
}
