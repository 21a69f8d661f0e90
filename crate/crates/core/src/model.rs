//! Variables, subsets, degree constraints and instances.
//!
//! Variables are 0-based internally and 1-based in every external format.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::Rational;

/// Largest universe a [`VarSet`] can hold.
pub const MAX_VARS: usize = 62;

/// A subset of the universe `{0, .., n-1}` stored as a bit mask.
///
/// Sets order by cardinality first and then by mask, which is the vertex
/// order used for deterministic tie-breaking throughout the crate.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct VarSet {
    bits: u64,
    n: u8,
}

impl VarSet {
    pub fn empty(n: usize) -> Self {
        assert!(n <= MAX_VARS, "universe too large");
        VarSet { bits: 0, n: n as u8 }
    }

    pub fn full(n: usize) -> Self {
        assert!(n <= MAX_VARS, "universe too large");
        VarSet { bits: (1u64 << n) - 1, n: n as u8 }
    }

    pub fn singleton(n: usize, v: usize) -> Self {
        assert!(v < n, "variable {v} outside universe of {n}");
        VarSet { bits: 1 << v, n: n as u8 }
    }

    /// The first `i` variables, `{0, .., i-1}`.
    pub fn prefix(n: usize, i: usize) -> Self {
        assert!(i <= n);
        VarSet { bits: (1u64 << i) - 1, n: n as u8 }
    }

    pub fn from_bits(n: usize, bits: u64) -> Self {
        assert!(n <= MAX_VARS && bits >> n == 0, "mask outside universe");
        VarSet { bits, n: n as u8 }
    }

    pub fn from_vars(n: usize, vars: impl IntoIterator<Item = usize>) -> Self {
        vars.into_iter()
            .fold(VarSet::empty(n), |s, v| s.with(v))
    }

    pub fn bits(self) -> u64 {
        self.bits
    }

    pub fn universe(self) -> usize {
        self.n as usize
    }

    pub fn len(self) -> usize {
        self.bits.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.bits == 0
    }

    pub fn is_full(self) -> bool {
        self.bits == (1u64 << self.n) - 1
    }

    pub fn contains(self, v: usize) -> bool {
        v < 64 && self.bits >> v & 1 == 1
    }

    pub fn with(self, v: usize) -> Self {
        assert!(v < self.n as usize, "variable {v} outside universe of {}", self.n);
        VarSet { bits: self.bits | 1 << v, n: self.n }
    }

    pub fn without(self, v: usize) -> Self {
        VarSet { bits: self.bits & !(1u64 << v), n: self.n }
    }

    pub fn union(self, other: Self) -> Self {
        debug_assert_eq!(self.n, other.n);
        VarSet { bits: self.bits | other.bits, n: self.n }
    }

    pub fn intersection(self, other: Self) -> Self {
        debug_assert_eq!(self.n, other.n);
        VarSet { bits: self.bits & other.bits, n: self.n }
    }

    pub fn difference(self, other: Self) -> Self {
        debug_assert_eq!(self.n, other.n);
        VarSet { bits: self.bits & !other.bits, n: self.n }
    }

    pub fn complement(self) -> Self {
        VarSet::full(self.n as usize).difference(self)
    }

    pub fn is_subset(self, other: Self) -> bool {
        self.bits & !other.bits == 0
    }

    pub fn is_proper_subset(self, other: Self) -> bool {
        self.is_subset(other) && self.bits != other.bits
    }

    /// Neither set contains the other.
    pub fn incomparable(self, other: Self) -> bool {
        !self.is_subset(other) && !other.is_subset(self)
    }

    /// Members in increasing order.
    pub fn iter(self) -> impl Iterator<Item = usize> {
        let bits = self.bits;
        (0..64).filter(move |v| bits >> v & 1 == 1)
    }

    pub fn min_var(self) -> Option<usize> {
        (self.bits != 0).then(|| self.bits.trailing_zeros() as usize)
    }

    /// All subsets of the universe `{0, .., n-1}` in mask order.
    pub fn all(n: usize) -> impl Iterator<Item = VarSet> {
        assert!(n <= 30, "enumeration over 2^{n} subsets");
        (0u64..1 << n).map(move |bits| VarSet { bits, n: n as u8 })
    }

    /// Renders as `{1,3}` with 1-based indices.
    pub fn display_indices(self) -> String {
        let parts: Vec<String> = self.iter().map(|v| (v + 1).to_string()).collect();
        format!("{{{}}}", parts.join(","))
    }
}

impl Ord for VarSet {
    fn cmp(&self, other: &Self) -> Ordering {
        self.len()
            .cmp(&other.len())
            .then(self.bits.cmp(&other.bits))
            .then(self.n.cmp(&other.n))
    }
}

impl PartialOrd for VarSet {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for VarSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.display_indices())
    }
}

impl fmt::Display for VarSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.display_indices())
    }
}

/// `(X, Y, c)`: every binding of `X` extends to at most `2^c` bindings of `Y`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DegreeConstraint {
    pub x: VarSet,
    pub y: VarSet,
    pub c: Rational,
}

impl DegreeConstraint {
    pub fn new(x: VarSet, y: VarSet, c: Rational) -> Result<Self> {
        if !x.is_proper_subset(y) {
            return Err(Error::Structural(format!(
                "constraint requires X a proper subset of Y, got X={x} Y={y}"
            )));
        }
        if c.is_negative() {
            return Err(Error::Structural(format!("negative degree bound {c}")));
        }
        Ok(DegreeConstraint { x, y, c })
    }

    pub fn is_simple(&self) -> bool {
        self.x.len() <= 1
    }

    pub fn is_cardinality(&self) -> bool {
        self.x.is_empty()
    }

    pub fn is_fd(&self) -> bool {
        self.c.is_zero()
    }
}

/// A query's variable universe together with its degree constraints.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    n: usize,
    names: Option<Vec<String>>,
    constraints: Vec<DegreeConstraint>,
}

impl Instance {
    pub fn new(n: usize, constraints: Vec<DegreeConstraint>) -> Result<Self> {
        if constraints.is_empty() {
            return Err(Error::Structural("an instance needs at least one constraint".into()));
        }
        Self::new_allow_empty(n, constraints)
    }

    /// Like [`Instance::new`] but accepts `k = 0`; relaxations can drop
    /// every constraint.
    pub(crate) fn new_allow_empty(n: usize, constraints: Vec<DegreeConstraint>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Structural("an instance needs at least one variable".into()));
        }
        if n > MAX_VARS {
            return Err(Error::Size { n, cap: MAX_VARS });
        }
        for (i, dc) in constraints.iter().enumerate() {
            if dc.x.universe() != n || dc.y.universe() != n {
                return Err(Error::Structural(format!(
                    "constraint {} is over a universe of {} variables, expected {n}",
                    i + 1,
                    dc.y.universe()
                )));
            }
            if !dc.x.is_proper_subset(dc.y) || dc.c.is_negative() {
                return Err(Error::Structural(format!("constraint {} is malformed", i + 1)));
            }
        }
        Ok(Instance { n, names: None, constraints })
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.n {
            return Err(Error::Structural(format!(
                "{} names given for {} variables",
                names.len(),
                self.n
            )));
        }
        let distinct: BTreeSet<&String> = names.iter().collect();
        if distinct.len() != names.len() {
            return Err(Error::Structural("duplicate variable names".into()));
        }
        if let Some(bad) = names.iter().find(|s| s.is_empty() || s.parse::<u64>().is_ok()) {
            return Err(Error::Structural(format!(
                "variable name `{bad}` must be non-empty and not an integer"
            )));
        }
        self.names = Some(names);
        Ok(self)
    }

    /// Builds an instance from `(X, Y, c)` triples given as 0-based variable lists.
    pub fn from_triples(n: usize, triples: &[(&[usize], &[usize], Rational)]) -> Result<Self> {
        let constraints = triples
            .iter()
            .map(|(x, y, c)| {
                let xs = checked_set(n, x)?;
                let ys = checked_set(n, y)?.union(xs);
                DegreeConstraint::new(xs, ys, c.clone())
            })
            .collect::<Result<Vec<_>>>()?;
        Instance::new(n, constraints)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.constraints.len()
    }

    pub fn constraints(&self) -> &[DegreeConstraint] {
        &self.constraints
    }

    pub fn names(&self) -> Option<&[String]> {
        self.names.as_deref()
    }

    pub fn var_name(&self, v: usize) -> String {
        match &self.names {
            Some(names) => names[v].clone(),
            None => (v + 1).to_string(),
        }
    }

    /// Renders a set with variable names when available.
    pub fn fmt_set(&self, s: VarSet) -> String {
        let parts: Vec<String> = s.iter().map(|v| self.var_name(v)).collect();
        format!("{{{}}}", parts.join(","))
    }

    /// Resolves a variable given by name or 1-based index.
    pub fn resolve_var(&self, token: &str) -> Result<usize> {
        let token = token.trim();
        if let Some(names) = &self.names {
            if let Some(pos) = names.iter().position(|s| s == token) {
                return Ok(pos);
            }
        }
        match token.parse::<usize>() {
            Ok(i) if (1..=self.n).contains(&i) => Ok(i - 1),
            _ => Err(Error::Parse(format!("unknown variable `{token}`"))),
        }
    }

    /// Parses a comma-separated permutation of names or 1-based indices.
    pub fn parse_permutation(&self, text: &str) -> Result<Vec<usize>> {
        let pi = text
            .split(',')
            .map(|tok| self.resolve_var(tok))
            .collect::<Result<Vec<_>>>()?;
        check_permutation(self.n, &pi)?;
        Ok(pi)
    }

    pub fn sum_c(&self) -> Rational {
        self.constraints.iter().map(|dc| &dc.c).sum()
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serializes")
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("instance serializes")
    }
}

fn checked_set(n: usize, vars: &[usize]) -> Result<VarSet> {
    if let Some(v) = vars.iter().find(|&&v| v >= n) {
        return Err(Error::Structural(format!("variable index {v} outside universe of {n}")));
    }
    Ok(VarSet::from_vars(n, vars.iter().copied()))
}

/// Checks that `pi` lists every variable of `{0, .., n-1}` exactly once.
pub fn check_permutation(n: usize, pi: &[usize]) -> Result<()> {
    let mut seen = vec![false; n];
    for &v in pi {
        if v >= n || seen[v] {
            return Err(Error::Structural(format!("not a permutation of {n} variables: {pi:?}")));
        }
        seen[v] = true;
    }
    if pi.len() != n {
        return Err(Error::Structural(format!("not a permutation of {n} variables: {pi:?}")));
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum VarRef {
    Index(u64),
    Name(String),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum CoefText {
    Text(String),
    Number(serde_json::Number),
}

#[derive(Serialize, Deserialize)]
struct ConstraintFile {
    #[serde(rename = "X")]
    x: Vec<VarRef>,
    #[serde(rename = "Y")]
    y: Vec<VarRef>,
    c: CoefText,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    vars: Option<Vec<String>>,
    constraints: Vec<ConstraintFile>,
}

impl TryFrom<InstanceFile> for Instance {
    type Error = Error;

    fn try_from(file: InstanceFile) -> Result<Self> {
        let n = file.n;
        if n == 0 || n > MAX_VARS {
            return Err(Error::Size { n, cap: MAX_VARS });
        }
        let lookup: HashMap<String, usize> = file
            .vars
            .iter()
            .flatten()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        let resolve = |r: &VarRef| -> Result<usize> {
            match r {
                VarRef::Index(i) if (1..=n as u64).contains(i) => Ok(*i as usize - 1),
                VarRef::Index(i) => Err(Error::Parse(format!("variable index {i} outside 1..{n}"))),
                VarRef::Name(s) => lookup.get(s).copied().ok_or_else(|| {
                    Error::Parse(format!("unknown variable `{s}`"))
                }),
            }
        };
        let mut constraints = Vec::with_capacity(file.constraints.len());
        for (i, cf) in file.constraints.iter().enumerate() {
            let x = VarSet::from_vars(n, cf.x.iter().map(resolve).collect::<Result<Vec<_>>>()?);
            let y = VarSet::from_vars(n, cf.y.iter().map(resolve).collect::<Result<Vec<_>>>()?);
            let c: Rational = match &cf.c {
                CoefText::Text(s) => s.parse()?,
                CoefText::Number(num) => num.to_string().parse()?,
            };
            if !x.is_subset(y) {
                return Err(Error::Parse(format!("constraint {}: X is not a subset of Y", i + 1)));
            }
            if x == y {
                return Err(Error::Parse(format!("constraint {}: X = Y is vacuous", i + 1)));
            }
            if c.is_negative() {
                return Err(Error::Parse(format!("constraint {}: negative c", i + 1)));
            }
            constraints.push(DegreeConstraint { x, y, c });
        }
        let inst = Instance::new(n, constraints)?;
        match file.vars {
            Some(names) => inst.with_names(names),
            None => Ok(inst),
        }
    }
}

impl From<&Instance> for InstanceFile {
    fn from(inst: &Instance) -> Self {
        let refs = |s: VarSet| -> Vec<VarRef> {
            s.iter()
                .map(|v| match &inst.names {
                    Some(names) => VarRef::Name(names[v].clone()),
                    None => VarRef::Index(v as u64 + 1),
                })
                .collect()
        };
        InstanceFile {
            n: inst.n,
            vars: inst.names.clone(),
            constraints: inst
                .constraints
                .iter()
                .map(|dc| ConstraintFile {
                    x: refs(dc.x),
                    y: refs(dc.y),
                    c: CoefText::Text(dc.c.to_string()),
                })
                .collect(),
        }
    }
}

impl Serialize for Instance {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        InstanceFile::from(self).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Instance {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let file = InstanceFile::deserialize(deserializer)?;
        Instance::try_from(file).map_err(serde::de::Error::custom)
    }
}

/// Per-constraint classification tags.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ConstraintTags {
    pub simple: bool,
    pub cardinality: bool,
    pub fd: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Classification {
    pub is_simple: bool,
    pub is_cardinality_only: bool,
    pub is_acyclic: bool,
    pub constraints: Vec<ConstraintTags>,
}

pub fn classify(inst: &Instance) -> Classification {
    let constraints: Vec<ConstraintTags> = inst
        .constraints()
        .iter()
        .map(|dc| ConstraintTags {
            simple: dc.is_simple(),
            cardinality: dc.is_cardinality(),
            fd: dc.is_fd(),
        })
        .collect();
    Classification {
        is_simple: constraints.iter().all(|t| t.simple),
        is_cardinality_only: constraints.iter().all(|t| t.cardinality),
        is_acyclic: topological_permutation(inst).is_some(),
        constraints,
    }
}

/// Digraph on variables with an edge `u -> v` whenever some constraint has
/// `u` in `X` and `v` in `Y - X`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DependencyGraph {
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
}

impl DependencyGraph {
    pub fn of(inst: &Instance) -> Self {
        let mut edges = BTreeSet::new();
        for dc in inst.constraints() {
            for u in dc.x.iter() {
                for v in dc.y.difference(dc.x).iter() {
                    edges.insert((u, v));
                }
            }
        }
        DependencyGraph { n: inst.n(), edges: edges.into_iter().collect() }
    }

    /// Kahn's algorithm, smallest available vertex first; `None` on a cycle.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let mut indegree = vec![0usize; self.n];
        let mut out: Vec<Vec<usize>> = vec![Vec::new(); self.n];
        for &(u, v) in &self.edges {
            indegree[v] += 1;
            out[u].push(v);
        }
        let mut ready: BTreeSet<usize> = (0..self.n).filter(|&v| indegree[v] == 0).collect();
        let mut order = Vec::with_capacity(self.n);
        while let Some(u) = ready.pop_first() {
            order.push(u);
            for &v in &out[u] {
                indegree[v] -= 1;
                if indegree[v] == 0 {
                    ready.insert(v);
                }
            }
        }
        (order.len() == self.n).then_some(order)
    }
}

/// A topological order of the dependency graph, or `None` if it has a cycle.
pub fn topological_permutation(inst: &Instance) -> Option<Vec<usize>> {
    DependencyGraph::of(inst).topological_order()
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

    #[test]
    fn varset_order_is_cardinality_first() {
        let a = VarSet::from_vars(4, [3]);
        let b = VarSet::from_vars(4, [0, 1]);
        assert!(a < b);
        assert_eq!(VarSet::prefix(4, 2), b);
        assert_eq!(b.display_indices(), "{1,2}");
    }

    #[test]
    fn classify_running_example() {
        let c = classify(&run4());
        assert!(c.is_simple && c.is_acyclic && !c.is_cardinality_only);
        assert_eq!(DependencyGraph::of(&run4()).edges, vec![(0, 3)]);
    }

    #[test]
    fn cyclic_pair_has_no_order() {
        let inst =
            Instance::from_triples(2, &[(&[0], &[0, 1], q(1, 1)), (&[1], &[0, 1], q(1, 1))]).unwrap();
        assert!(!classify(&inst).is_acyclic);
        assert_eq!(topological_permutation(&inst), None);
    }

    #[test]
    fn json_round_trip_with_names() {
        let text = r#"{"n":2,"vars":["a","b"],"constraints":[{"X":["a"],"Y":["a",2],"c":1.5}]}"#;
        let inst = Instance::from_json_str(text).unwrap();
        assert_eq!(inst.constraints()[0].c, q(3, 2));
        let again = Instance::from_json_str(&inst.to_json_string()).unwrap();
        assert_eq!(inst, again);
    }

    #[test]
    fn json_rejects_vacuous_and_empty() {
        assert!(Instance::from_json_str(r#"{"n":2,"constraints":[{"X":[1],"Y":[1],"c":"1"}]}"#).is_err());
        assert!(Instance::from_json_str(r#"{"n":2,"constraints":[]}"#).is_err());
        assert!(Instance::from_json_str(r#"{"n":2,"constraints":[{"X":[],"Y":[3],"c":"1"}]}"#).is_err());
        assert!(Instance::from_json_str(r#"{"n":2,"constraints":[{"X":[],"Y":[1],"c":"-1"}]}"#).is_err());
    }
}
