//! Exponential-size ground-truth bounds for small universes.
//!
//! The polymatroid bound maximizes `h([n]) - h(empty)` over set functions
//! satisfying the elemental Shannon inequalities and the degree constraints.
//! The normal and modular bounds restrict `h` to nonnegative combinations of
//! step functions and to additive functions respectively.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lp::{solve, LinearProgram, Relation, Sense, Status};
use crate::model::{check_permutation, DegreeConstraint, Instance, VarSet};
use crate::rational::{ExtRational, Rational};

/// Default largest universe accepted by the exponential oracles.
pub const DEFAULT_ORACLE_CAP: usize = 14;

/// Environment variable overriding [`DEFAULT_ORACLE_CAP`].
pub const ORACLE_CAP_ENV: &str = "POLYBOUND_ORACLE_CAP";

pub fn oracle_cap() -> usize {
    std::env::var(ORACLE_CAP_ENV)
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or(DEFAULT_ORACLE_CAP)
}

pub fn check_oracle_size(n: usize) -> Result<()> {
    let cap = oracle_cap().min(crate::model::MAX_VARS);
    if n > cap {
        return Err(Error::Size { n, cap });
    }
    Ok(())
}

/// Values `h(S)` for every subset `S`, indexed by bit mask.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SetFunctionTable {
    n: usize,
    values: Vec<Rational>,
}

impl SetFunctionTable {
    pub fn new(n: usize, values: Vec<Rational>) -> Result<Self> {
        if values.len() != 1 << n {
            return Err(Error::Structural(format!("expected {} values, got {}", 1usize << n, values.len())));
        }
        Ok(SetFunctionTable { n, values })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, s: VarSet) -> &Rational {
        &self.values[s.bits() as usize]
    }

    /// Checks nonnegativity, `h(empty) = 0`, monotonicity on every pair
    /// `X ⊆ Y`, and submodularity on every pair of subsets.
    pub fn check_polymatroid(&self) -> std::result::Result<(), String> {
        let n = self.n;
        if !self.get(VarSet::empty(n)).is_zero() {
            return Err("h(empty) is not zero".into());
        }
        for x in VarSet::all(n) {
            let hx = self.get(x);
            if hx.is_negative() {
                return Err(format!("h({x}) is negative"));
            }
            for y in VarSet::all(n) {
                let hy = self.get(y);
                if x.is_subset(y) && hy < hx {
                    return Err(format!("not monotone on {x} ⊆ {y}"));
                }
                if x.bits() < y.bits() {
                    let lhs = self.get(x.union(y)) + self.get(x.intersection(y));
                    if lhs > hx + hy {
                        return Err(format!("not submodular on {x}, {y}"));
                    }
                }
            }
        }
        Ok(())
    }

    /// Whether `h(Y) - h(X) <= c` holds for every constraint.
    pub fn satisfies(&self, inst: &Instance) -> bool {
        inst.constraints().iter().all(|dc| self.get(dc.y) - self.get(dc.x) <= dc.c)
    }

    /// `{"{1,2}": "3/2", ...}` keyed by 1-based subsets.
    pub fn to_json(&self) -> serde_json::Value {
        let map: serde_json::Map<String, serde_json::Value> = VarSet::all(self.n)
            .map(|s| (s.display_indices(), serde_json::Value::String(self.get(s).to_string())))
            .collect();
        serde_json::Value::Object(map)
    }
}

/// Smallest set containing the empty set and closed under the constraints:
/// whenever `X` is inside, so is `Y`. The polymatroid, normal and chain
/// bounds are finite exactly when this closure is the whole universe.
pub fn closure(inst: &Instance) -> VarSet {
    let mut s = VarSet::empty(inst.n());
    loop {
        let next = inst
            .constraints()
            .iter()
            .filter(|dc| dc.x.is_subset(s))
            .fold(s, |acc, dc| acc.union(dc.y));
        if next == s {
            return s;
        }
        s = next;
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PolymatroidBound {
    pub bound: ExtRational,
    /// An optimal polymatroid with `h(empty) = 0`, present when finite.
    pub witness: Option<SetFunctionTable>,
}

/// The polymatroid bound, solved over the elemental Shannon inequalities.
pub fn polymatroid_bound(inst: &Instance) -> Result<PolymatroidBound> {
    check_oracle_size(inst.n())?;
    let n = inst.n();
    if !closure(inst).is_full() {
        return Ok(PolymatroidBound { bound: ExtRational::Infinite, witness: None });
    }
    let values = solve_by_row_generation(inst)?;
    let witness = SetFunctionTable::new(n, values)?;
    let bound = witness.get(VarSet::full(n)).clone();
    Ok(PolymatroidBound { bound: ExtRational::Finite(bound), witness: Some(witness) })
}

/// The sets a feasible function has to be specified on. Functional
/// dependencies force `h(S) = h(S+)` for the closure `S+` under them, so
/// only closed sets carry variables; without dependencies every set is
/// closed.
struct Lattice {
    n: usize,
    fds: Vec<(u64, u64)>,
    closed: Vec<u64>,
    index: BTreeMap<u64, usize>,
}

impl Lattice {
    fn new(inst: &Instance) -> Self {
        let n = inst.n();
        let fds: Vec<(u64, u64)> =
            inst.constraints().iter().filter(|dc| dc.is_fd()).map(|dc| (dc.x.bits(), dc.y.bits())).collect();
        let mut lat = Lattice { n, fds, closed: Vec::new(), index: BTreeMap::new() };
        let mut closed: Vec<u64> = (0..1u64 << n).map(|s| lat.close(s)).collect();
        closed.sort_unstable();
        closed.dedup();
        lat.index = closed.iter().enumerate().map(|(i, s)| (*s, i)).collect();
        lat.closed = closed;
        lat
    }

    fn close(&self, mut s: u64) -> u64 {
        loop {
            let next = self.fds.iter().filter(|(x, _)| x & !s == 0).fold(s, |acc, (_, y)| acc | y);
            if next == s {
                return s;
            }
            s = next;
        }
    }

    fn at(&self, s: u64) -> usize {
        self.index[&self.close(s)]
    }

    /// Every inequality of the program, as `(closed-set index, coefficient)`
    /// lists read `sum >= 0`: the elemental inequalities with each set
    /// replaced by its closure. Rows that cancel out are dropped.
    fn inequalities(&self) -> Vec<Vec<(usize, i64)>> {
        let n = self.n;
        let full = (1u64 << n) - 1;
        let mut raw: Vec<[(u64, i64); 4]> = Vec::new();
        for s in 0..1u64 << n {
            for i in (0..n).filter(|&i| s >> i & 1 == 0) {
                for j in (i + 1..n).filter(|&j| s >> j & 1 == 0) {
                    let (si, sj) = (s | 1 << i, s | 1 << j);
                    raw.push([(si, 1), (sj, 1), (si | sj, -1), (s, -1)]);
                }
            }
        }
        for i in 0..n {
            raw.push([(full, 1), (full & !(1 << i), -1), (0, 0), (0, 0)]);
        }
        let mut out: Vec<Vec<(usize, i64)>> = raw
            .into_iter()
            .filter_map(|terms| {
                let mut merged: BTreeMap<usize, i64> = BTreeMap::new();
                for (s, c) in terms.into_iter().filter(|(_, c)| *c != 0) {
                    *merged.entry(self.at(s)).or_insert(0) += c;
                }
                merged.retain(|_, c| *c != 0);
                (!merged.is_empty()).then(|| merged.into_iter().collect())
            })
            .collect();
        out.sort();
        out.dedup();
        out
    }
}

fn slack(row: &[(usize, i64)], g: &[Rational]) -> Rational {
    row.iter().map(|(m, c)| if *c > 0 { g[*m].clone() } else { -&g[*m] }).sum()
}

/// Solves the polymatroid program over the closed sets, adding violated
/// inequalities lazily. The caps `h(S) <= sum c` are valid once the closure
/// is full and keep every relaxation bounded; `h(empty)` is pinned to zero.
/// Returns `h` on every subset.
fn solve_by_row_generation(inst: &Instance) -> Result<Vec<Rational>> {
    let n = inst.n();
    let lat = Lattice::new(inst);
    let bottom = lat.at(0);
    let top = lat.at((1u64 << n) - 1);
    if top == bottom {
        return Ok(vec![Rational::zero(); 1 << n]);
    }
    let family = lat.inequalities();
    let batch = lat.closed.len().div_ceil(4).max(16);
    let mut active: Vec<usize> = Vec::new();
    let mut previous: Option<Rational> = None;
    loop {
        let mut cols: BTreeMap<usize, usize> = BTreeMap::new();
        let mut lp = LinearProgram::new(Sense::Maximize);
        let mut col = |lp: &mut LinearProgram, m: usize| -> Option<usize> {
            if m == bottom {
                return None;
            }
            Some(*cols.entry(m).or_insert_with(|| lp.add_var(format!("h{}", VarSet::from_bits(n, lat.closed[m])))))
        };
        let t = col(&mut lp, top).expect("top differs from bottom when the closure is full");
        lp.set_objective(t, Rational::one());
        for dc in inst.constraints().iter().filter(|dc| !dc.is_fd()) {
            let mut coeffs = Vec::new();
            if let Some(y) = col(&mut lp, lat.at(dc.y.bits())) {
                coeffs.push((y, Rational::one()));
            }
            if let Some(x) = col(&mut lp, lat.at(dc.x.bits())) {
                coeffs.push((x, -Rational::one()));
            }
            lp.add_row(coeffs, Relation::Le, dc.c.clone());
        }
        let first_active = lp.rows.len();
        for &r in &active {
            let coeffs = family[r].iter().filter_map(|&(m, c)| col(&mut lp, m).map(|v| (v, Rational::from(c)))).collect();
            lp.add_row(coeffs, Relation::Ge, Rational::zero());
        }
        // Monotonicity bounds every value by h([n]) <= sum c; stating it per
        // variable keeps the float solver away from spurious rays.
        for &v in cols.values() {
            lp.add_row(vec![(v, Rational::one())], Relation::Le, inst.sum_c());
        }
        let out = solve(&lp)?;
        if out.status != Status::Optimal {
            return Err(Error::Internal(format!("polymatroid relaxation reported {:?}", out.status)));
        }
        let x = out.assignment.expect("optimal outcome has an assignment");
        let mut g = vec![Rational::zero(); lat.closed.len()];
        for (m, c) in &cols {
            g[*m] = x[*c].clone();
        }
        let mut violated: Vec<(Rational, usize)> = family
            .iter()
            .enumerate()
            .filter_map(|(r, row)| {
                let s = slack(row, &g);
                s.is_negative().then_some((s, r))
            })
            .collect();
        if violated.is_empty() {
            return Ok((0..1u64 << n).map(|s| g[lat.at(s)].clone()).collect());
        }
        // Rows with a zero multiplier leave the current optimum optimal.
        // Dropping them only after a strict decrease rules out cycling.
        let value = x[t].clone();
        if previous.as_ref().is_some_and(|p| &value < p) {
            let duals = out.duals.expect("optimal outcome has duals");
            active = active.iter().zip(&duals[first_active..]).filter(|(_, y)| !y.is_zero()).map(|(r, _)| *r).collect();
        }
        previous = Some(value);
        violated.sort();
        active.extend(violated.into_iter().take(batch).map(|(_, r)| r));
    }
}

/// The optimal value only.
pub fn polymatroid_bound_value(inst: &Instance) -> Result<ExtRational> {
    polymatroid_bound(inst).map(|b| b.bound)
}

/// The full program with every elemental inequality, for cross-checks.
pub fn polymatroid_lp(inst: &Instance) -> LinearProgram {
    let n = inst.n();
    let mut lp = LinearProgram::new(Sense::Maximize);
    for s in VarSet::all(n) {
        lp.add_var(format!("h{}", s.display_indices()));
    }
    let full = (1usize << n) - 1;
    lp.set_objective(full, Rational::one());
    lp.set_objective(0, -Rational::one());
    let one = Rational::one;
    for s in 0..1usize << n {
        for i in 0..n {
            if s >> i & 1 == 1 {
                continue;
            }
            for j in i + 1..n {
                if s >> j & 1 == 1 {
                    continue;
                }
                let (si, sj, sij) = (s | 1 << i, s | 1 << j, s | 1 << i | 1 << j);
                lp.add_row(
                    vec![(si, one()), (sj, one()), (sij, -one()), (s, -one())],
                    Relation::Ge,
                    Rational::zero(),
                );
            }
        }
    }
    for i in 0..n {
        lp.add_row(vec![(full, one()), (full & !(1 << i), -one())], Relation::Ge, Rational::zero());
    }
    for dc in inst.constraints() {
        lp.add_row(
            vec![(dc.y.bits() as usize, one()), (dc.x.bits() as usize, -one())],
            Relation::Le,
            dc.c.clone(),
        );
    }
    lp
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NormalBound {
    pub bound: ExtRational,
    /// Nonzero step-function weights `lambda_V` of an optimal solution.
    pub weights: BTreeMap<VarSet, Rational>,
}

/// The normal bound: `max sum lambda_V` over proper subsets `V` subject to
/// `sum_{V: X ⊆ V, Y ⊄ V} lambda_V <= c` per constraint.
pub fn normal_bound(inst: &Instance) -> Result<NormalBound> {
    check_oracle_size(inst.n())?;
    let n = inst.n();
    if !closure(inst).is_full() {
        return Ok(NormalBound { bound: ExtRational::Infinite, weights: BTreeMap::new() });
    }
    let proper: Vec<VarSet> = VarSet::all(n).filter(|v| !v.is_full()).collect();
    let mut lp = LinearProgram::new(Sense::Maximize);
    for v in &proper {
        let var = lp.add_var(format!("lambda{}", v.display_indices()));
        lp.set_objective(var, Rational::one());
    }
    for dc in inst.constraints() {
        let coeffs = proper
            .iter()
            .enumerate()
            .filter(|(_, v)| dc.x.is_subset(**v) && !dc.y.is_subset(**v))
            .map(|(idx, _)| (idx, Rational::one()))
            .collect();
        lp.add_row(coeffs, Relation::Le, dc.c.clone());
    }
    let out = solve(&lp)?;
    match out.status {
        Status::Optimal => {
            let x = out.assignment.expect("optimal outcome has an assignment");
            let weights = proper
                .iter()
                .zip(x)
                .filter(|(_, w)| !w.is_zero())
                .map(|(v, w)| (*v, w))
                .collect();
            Ok(NormalBound { bound: out.objective.expect("optimal value"), weights })
        }
        Status::Unbounded => Ok(NormalBound { bound: ExtRational::Infinite, weights: BTreeMap::new() }),
        Status::Infeasible => Err(Error::Internal("normal program reported infeasible".into())),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ModularBound {
    pub bound: ExtRational,
    /// Optimal per-variable weights when finite.
    pub weights: Option<Vec<Rational>>,
}

/// The modular bound: `max sum w_i` subject to `sum_{i in Y-X} w_i <= c`.
/// Polynomial size, so no universe cap applies.
pub fn modular_bound(inst: &Instance) -> Result<ModularBound> {
    let n = inst.n();
    let mut lp = LinearProgram::new(Sense::Maximize);
    for v in 0..n {
        lp.add_var(format!("w{}", v + 1));
        lp.set_objective(v, Rational::one());
    }
    for dc in inst.constraints() {
        let coeffs = dc.y.difference(dc.x).iter().map(|v| (v, Rational::one())).collect();
        lp.add_row(coeffs, Relation::Le, dc.c.clone());
    }
    let out = solve(&lp)?;
    match out.status {
        Status::Optimal => Ok(ModularBound {
            bound: out.objective.clone().expect("optimal value"),
            weights: out.assignment,
        }),
        Status::Unbounded => Ok(ModularBound { bound: ExtRational::Infinite, weights: None }),
        Status::Infeasible => Err(Error::Internal("modular program reported infeasible".into())),
    }
}

/// Trims each constraint's head to the variables that follow all of `X`
/// in `pi`; constraints whose head becomes `X` are dropped.
pub fn chain_relax(inst: &Instance, pi: &[usize]) -> Result<Instance> {
    check_permutation(inst.n(), pi)?;
    let mut pos = vec![0usize; inst.n()];
    for (p, &v) in pi.iter().enumerate() {
        pos[v] = p;
    }
    let constraints: Vec<DegreeConstraint> = inst
        .constraints()
        .iter()
        .filter_map(|dc| {
            let y = chain_head(dc, &pos);
            (y != dc.x).then(|| DegreeConstraint { x: dc.x, y, c: dc.c.clone() })
        })
        .collect();
    let relaxed = Instance::new_allow_empty(inst.n(), constraints)?;
    match inst.names() {
        Some(names) => relaxed.with_names(names.to_vec()),
        None => Ok(relaxed),
    }
}

/// `X ∪ {v ∈ Y : v after every element of X}` given positions in the order.
pub(crate) fn chain_head(dc: &DegreeConstraint, pos: &[usize]) -> VarSet {
    let last = dc.x.iter().map(|v| pos[v]).max();
    dc.y.iter()
        .filter(|&v| dc.x.contains(v) || last.is_none_or(|l| pos[v] > l))
        .fold(dc.x, |s, v| s.with(v))
}

/// Polymatroid bound of the chain relaxation under `pi`.
pub fn chain_bound(inst: &Instance, pi: &[usize]) -> Result<ExtRational> {
    check_oracle_size(inst.n())?;
    polymatroid_bound_value(&chain_relax(inst, pi)?)
}
