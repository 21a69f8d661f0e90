//! Fixed instance suites shared by the benchmarks.

use polybound::random::{random_acyclic_instance, random_instance, rng, GenConfig};
use polybound::Instance;

/// Simple instances with every variable covered, `count` per size.
pub fn simple_suite(n: usize, k: usize, count: usize, seed: u64) -> Vec<Instance> {
    let mut r = rng(seed);
    let cfg = GenConfig { cover: true, ..GenConfig::simple(n, k) };
    (0..count).map(|_| random_instance(&mut r, &cfg)).collect()
}

pub fn general_suite(n: usize, k: usize, count: usize, seed: u64) -> Vec<Instance> {
    let mut r = rng(seed);
    let cfg = GenConfig { cover: true, ..GenConfig::general(n, k) };
    (0..count).map(|_| random_instance(&mut r, &cfg)).collect()
}

pub fn acyclic_suite(n: usize, k: usize, count: usize, seed: u64) -> Vec<Instance> {
    let mut r = rng(seed);
    let cfg = GenConfig { cover: true, ..GenConfig::general(n, k) };
    (0..count).map(|_| random_acyclic_instance(&mut r, &cfg)).collect()
}
