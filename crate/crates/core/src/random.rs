//! Seeded random instance generators for tests and benchmarks.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::model::{DegreeConstraint, Instance, VarSet};
use crate::rational::Rational;

#[derive(Clone, Debug)]
pub struct GenConfig {
    pub n: usize,
    pub k: usize,
    /// Coefficients are drawn from `{0, 1/2, 1, ..., max_c}`.
    pub max_c: i64,
    /// Largest `|X|`; 1 gives simple instances, 0 cardinality-only ones.
    pub max_x: usize,
    /// Add a cardinality constraint on a random superset of each uncovered
    /// variable so the bound is finite.
    pub cover: bool,
}

impl GenConfig {
    pub fn simple(n: usize, k: usize) -> Self {
        GenConfig { n, k, max_c: 4, max_x: 1, cover: false }
    }

    pub fn general(n: usize, k: usize) -> Self {
        GenConfig { n, k, max_c: 4, max_x: n.saturating_sub(1), cover: false }
    }

    pub fn cardinality(n: usize, k: usize) -> Self {
        GenConfig { n, k, max_c: 4, max_x: 0, cover: true }
    }
}

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

fn random_subset<R: Rng>(rng: &mut R, n: usize) -> VarSet {
    VarSet::from_bits(n, rng.random_range(0..(1u64 << n)))
}

fn coefficient<R: Rng>(rng: &mut R, max_c: i64) -> Rational {
    Rational::new(rng.random_range(0..=2 * max_c), 2)
}

/// A random constraint with `|X| <= max_x` and `X ⊊ Y`.
pub fn random_constraint<R: Rng>(rng: &mut R, n: usize, max_x: usize, max_c: i64) -> DegreeConstraint {
    loop {
        let mut x = random_subset(rng, n);
        while x.len() > max_x {
            let drop = x.iter().nth(rng.random_range(0..x.len())).expect("nonempty");
            x = x.without(drop);
        }
        if x.is_full() {
            continue;
        }
        let y = x.union(random_subset(rng, n));
        if y == x {
            let outside: Vec<usize> = x.complement().iter().collect();
            let v = outside[rng.random_range(0..outside.len())];
            return DegreeConstraint::new(x, x.with(v), coefficient(rng, max_c)).expect("valid constraint");
        }
        return DegreeConstraint::new(x, y, coefficient(rng, max_c)).expect("valid constraint");
    }
}

pub fn random_instance<R: Rng>(rng: &mut R, cfg: &GenConfig) -> Instance {
    let n = cfg.n;
    let mut cs: Vec<DegreeConstraint> = (0..cfg.k.max(1)).map(|_| random_constraint(rng, n, cfg.max_x, cfg.max_c)).collect();
    if cfg.cover {
        let mut covered = VarSet::empty(n);
        for dc in &cs {
            if dc.x.is_empty() {
                covered = covered.union(dc.y);
            }
        }
        for v in covered.complement().iter() {
            let y = random_subset(rng, n).with(v);
            cs.push(DegreeConstraint::new(VarSet::empty(n), y, coefficient(rng, cfg.max_c)).expect("valid constraint"));
        }
    }
    Instance::new(n, cs).expect("generated instance is valid")
}

/// A random permutation of `0..n`.
pub fn random_permutation<R: Rng>(rng: &mut R, n: usize) -> Vec<usize> {
    let mut pi: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        pi.swap(i, rng.random_range(0..=i));
    }
    pi
}

/// A random instance whose dependency graph is acyclic: every constraint
/// has `X` before `Y - X` in a hidden random order.
pub fn random_acyclic_instance<R: Rng>(rng: &mut R, cfg: &GenConfig) -> Instance {
    let n = cfg.n;
    let order = random_permutation(rng, n);
    let cs = (0..cfg.k.max(1))
        .map(|_| {
            let cut = rng.random_range(0..n);
            let before = VarSet::from_vars(n, order[..cut].iter().copied());
            let after = VarSet::from_vars(n, order[cut..].iter().copied());
            let mut x = before.intersection(random_subset(rng, n));
            while x.len() > cfg.max_x {
                x = x.without(x.min_var().expect("nonempty"));
            }
            let mut head = after.intersection(random_subset(rng, n));
            if head.is_empty() {
                head = VarSet::singleton(n, order[cut]);
            }
            DegreeConstraint::new(x, x.union(head), coefficient(rng, cfg.max_c)).expect("valid constraint")
        })
        .collect();
    Instance::new(n, cs).expect("generated instance is valid")
}
