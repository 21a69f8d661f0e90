use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use polybound::flow::{build_aux_graph, decompose_flows, solve_flow_lp};
use polybound::flow_bound::{flow_bound, suggest_permutation};
use polybound::oracle::polymatroid_bound_value;
use polybound::proof::generate_proof;
use polybound_bench::{acyclic_suite, general_suite, simple_suite};

fn flow_program(c: &mut Criterion) {
    let mut g = c.benchmark_group("flow_lp");
    g.sample_size(10);
    for n in [4, 8, 12] {
        let suite = simple_suite(n, 2 * n, 8, 7);
        g.bench_with_input(BenchmarkId::from_parameter(n), &suite, |b, suite| {
            b.iter(|| suite.iter().map(|i| solve_flow_lp(black_box(i)).unwrap().bound).collect::<Vec<_>>())
        });
    }
    g.finish();
}

fn oracle(c: &mut Criterion) {
    let mut g = c.benchmark_group("oracle");
    g.sample_size(10);
    for n in [4, 6, 7] {
        let suite = general_suite(n, n, 2, 11);
        g.bench_with_input(BenchmarkId::from_parameter(n), &suite, |b, suite| {
            b.iter(|| suite.iter().map(|i| polymatroid_bound_value(black_box(i)).unwrap()).collect::<Vec<_>>())
        });
    }
    g.finish();
}

fn proofs(c: &mut Criterion) {
    let mut g = c.benchmark_group("proof");
    for n in [4, 8] {
        let prepared: Vec<_> = simple_suite(n, 2 * n, 8, 13)
            .into_iter()
            .filter_map(|inst| {
                let sol = solve_flow_lp(&inst).unwrap().solution?;
                let graph = build_aux_graph(&inst).unwrap();
                let paths = decompose_flows(&inst, &sol, &graph).unwrap();
                Some((inst, sol, paths))
            })
            .collect();
        g.bench_with_input(BenchmarkId::from_parameter(n), &prepared, |b, prepared| {
            b.iter(|| prepared.iter().map(|(i, s, p)| generate_proof(i, s, p).unwrap()).collect::<Vec<_>>())
        });
    }
    g.finish();
}

fn flow_bounds(c: &mut Criterion) {
    let mut g = c.benchmark_group("flow_bound");
    g.sample_size(10);
    for n in [4, 8] {
        let suite: Vec<_> = acyclic_suite(n, n, 8, 17)
            .into_iter()
            .map(|i| {
                let pi = suggest_permutation(&i).0;
                (i, pi)
            })
            .collect();
        g.bench_with_input(BenchmarkId::from_parameter(n), &suite, |b, suite| {
            b.iter(|| suite.iter().map(|(i, pi)| flow_bound(black_box(i), pi, false).unwrap()).collect::<Vec<_>>())
        });
    }
    g.finish();
}

criterion_group!(benches, flow_program, oracle, proofs, flow_bounds);
criterion_main!(benches);
