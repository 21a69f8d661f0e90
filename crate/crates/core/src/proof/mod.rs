//! Proof sequences: chains of Shannon-inequality steps that turn the
//! weighted constraint terms into `h([n] | ∅)`.
//!
//! Text format, one step per line after a header:
//!
//! ```text
//! target={1,2,3} k=3 delta=1/2,1/2,1/2
//! decompose w=1/2 X={} Z={1} Y={1,2}
//! submodularity w=1/2 I={1,3} J={1,2}
//! ```
//!
//! Indices are 1-based. Blank lines and lines starting with `#` are ignored.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::VarSet;
use crate::rational::Rational;

pub mod generate;
pub mod lockstep;
pub mod verify;

pub use generate::{generate_proof, generate_proof_with_order, length_cap};
pub use lockstep::check_lockstep;
pub use verify::{verify_proof, ProofVerdict, TermBag};

/// The conditional entropy term `h(upper | lower)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Term {
    pub lower: VarSet,
    pub upper: VarSet,
}

impl Term {
    pub fn new(lower: VarSet, upper: VarSet) -> Self {
        Term { lower, upper }
    }

    pub fn is_trivial(&self) -> bool {
        self.lower == self.upper
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.lower.is_empty() {
            write!(f, "h({})", self.upper)
        } else {
            write!(f, "h({}|{})", self.upper, self.lower)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ProofStep {
    /// `h(Y|X) -> h(Z|X) + h(Y|Z)`
    Decompose { w: Rational, x: VarSet, z: VarSet, y: VarSet },
    /// `h(Z|X) + h(Y|Z) -> h(Y|X)`
    Compose { w: Rational, x: VarSet, z: VarSet, y: VarSet },
    /// Drops `h(Y|X)`.
    Monotonicity { w: Rational, x: VarSet, y: VarSet },
    /// `h(I | I∩J) -> h(I∪J | J)`
    Submodularity { w: Rational, i: VarSet, j: VarSet },
}

impl ProofStep {
    pub fn weight(&self) -> &Rational {
        match self {
            ProofStep::Decompose { w, .. }
            | ProofStep::Compose { w, .. }
            | ProofStep::Monotonicity { w, .. }
            | ProofStep::Submodularity { w, .. } => w,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ProofStep::Decompose { .. } => "decompose",
            ProofStep::Compose { .. } => "compose",
            ProofStep::Monotonicity { .. } => "monotonicity",
            ProofStep::Submodularity { .. } => "submodularity",
        }
    }
}

impl fmt::Display for ProofStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProofStep::Decompose { w, x, z, y } | ProofStep::Compose { w, x, z, y } => {
                write!(f, "{} w={w} X={x} Z={z} Y={y}", self.kind())
            }
            ProofStep::Monotonicity { w, x, y } => write!(f, "monotonicity w={w} X={x} Y={y}"),
            ProofStep::Submodularity { w, i, j } => write!(f, "submodularity w={w} I={i} J={j}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProofSequence {
    pub n: usize,
    pub delta: Vec<Rational>,
    pub steps: Vec<ProofStep>,
}

impl ProofSequence {
    /// The bound the sequence certifies: `sum_j c_j * delta_j`.
    pub fn bound(&self, inst: &crate::model::Instance) -> Rational {
        inst.constraints().iter().zip(&self.delta).map(|(dc, d)| &dc.c * d).sum()
    }
}

impl fmt::Display for ProofSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let delta: Vec<String> = self.delta.iter().map(|d| d.to_string()).collect();
        writeln!(f, "target={} k={} delta={}", VarSet::full(self.n), self.delta.len(), delta.join(","))?;
        for s in &self.steps {
            writeln!(f, "{s}")?;
        }
        Ok(())
    }
}

fn parse_set(n: usize, text: &str, line: usize) -> Result<VarSet> {
    let inner = text
        .strip_prefix('{')
        .and_then(|t| t.strip_suffix('}'))
        .ok_or_else(|| Error::Parse(format!("line {line}: expected a set like {{1,2}}, got `{text}`")))?;
    let mut set = VarSet::empty(n);
    if inner.trim().is_empty() {
        return Ok(set);
    }
    for tok in inner.split(',') {
        let v: usize = tok
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("line {line}: bad index `{tok}`")))?;
        if v == 0 || v > n {
            return Err(Error::Parse(format!("line {line}: index {v} outside 1..={n}")));
        }
        set = set.with(v - 1);
    }
    Ok(set)
}

fn fields(line_no: usize, toks: &[&str], keys: &[&str]) -> Result<Vec<String>> {
    if toks.len() != keys.len() {
        return Err(Error::Parse(format!("line {line_no}: expected fields {}", keys.join(" "))));
    }
    toks.iter()
        .zip(keys)
        .map(|(tok, key)| {
            tok.strip_prefix(key)
                .and_then(|t| t.strip_prefix('='))
                .map(str::to_string)
                .ok_or_else(|| Error::Parse(format!("line {line_no}: expected `{key}=`, got `{tok}`")))
        })
        .collect()
}

fn parse_rational(text: &str, line: usize) -> Result<Rational> {
    text.parse().map_err(|_| Error::Parse(format!("line {line}: bad number `{text}`")))
}

impl FromStr for ProofSequence {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (hno, header) = lines.next().ok_or_else(|| Error::Parse("empty proof".into()))?;
        let toks: Vec<&str> = header.split_whitespace().collect();
        let vals = fields(hno, &toks, &["target", "k", "delta"])?;
        let target = vals[0]
            .strip_prefix('{')
            .and_then(|t| t.strip_suffix('}'))
            .ok_or_else(|| Error::Parse(format!("line {hno}: bad target")))?;
        let n = if target.is_empty() { 0 } else { target.split(',').count() };
        if n == 0 || n > crate::model::MAX_VARS {
            return Err(Error::Parse(format!("line {hno}: bad target size")));
        }
        if parse_set(n, &vals[0], hno)? != VarSet::full(n) {
            return Err(Error::Parse(format!("line {hno}: target must be {{1,...,n}}")));
        }
        let k: usize = vals[1].parse().map_err(|_| Error::Parse(format!("line {hno}: bad k")))?;
        let delta: Vec<Rational> = if vals[2].is_empty() {
            Vec::new()
        } else {
            vals[2].split(',').map(|d| parse_rational(d, hno)).collect::<Result<_>>()?
        };
        if delta.len() != k {
            return Err(Error::Parse(format!("line {hno}: k={k} but {} capacities", delta.len())));
        }
        let mut steps = Vec::new();
        for (no, line) in lines {
            let toks: Vec<&str> = line.split_whitespace().collect();
            let (kind, rest) = toks.split_first().expect("nonempty line");
            let step = match *kind {
                "decompose" | "compose" => {
                    let v = fields(no, rest, &["w", "X", "Z", "Y"])?;
                    let (w, x, z, y) = (parse_rational(&v[0], no)?, parse_set(n, &v[1], no)?, parse_set(n, &v[2], no)?, parse_set(n, &v[3], no)?);
                    if *kind == "decompose" {
                        ProofStep::Decompose { w, x, z, y }
                    } else {
                        ProofStep::Compose { w, x, z, y }
                    }
                }
                "monotonicity" => {
                    let v = fields(no, rest, &["w", "X", "Y"])?;
                    ProofStep::Monotonicity { w: parse_rational(&v[0], no)?, x: parse_set(n, &v[1], no)?, y: parse_set(n, &v[2], no)? }
                }
                "submodularity" => {
                    let v = fields(no, rest, &["w", "I", "J"])?;
                    ProofStep::Submodularity { w: parse_rational(&v[0], no)?, i: parse_set(n, &v[1], no)?, j: parse_set(n, &v[2], no)? }
                }
                other => return Err(Error::Parse(format!("line {no}: unknown step kind `{other}`"))),
            };
            steps.push(step);
        }
        Ok(ProofSequence { n, delta, steps })
    }
}
