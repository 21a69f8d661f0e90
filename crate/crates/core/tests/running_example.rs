mod common;

use common::{gap2, run4, run4_golden, set, tri3};
use polybound::dual_lift::{lift_with, verify_dual_witness, DualVar, LiftOptions, Phase};
use polybound::flow::{solve_flow_lp, solve_flow_lp_excluding};
use polybound::oracle::{chain_bound, modular_bound, normal_bound, polymatroid_bound};
use polybound::proof::{check_lockstep, generate_proof, verify_proof, ProofSequence};
use polybound::rational::q;
use polybound::ExtRational;

const GOLDEN: &str = include_str!("data/run4.proof");

fn three() -> ExtRational {
    ExtRational::Finite(q(3, 1))
}

#[test]
fn every_engine_gives_three() {
    let inst = run4();
    assert_eq!(solve_flow_lp(&inst).unwrap().bound, three());
    assert_eq!(polymatroid_bound(&inst).unwrap().bound, three());
    assert_eq!(normal_bound(&inst).unwrap().bound, three());
    assert_eq!(modular_bound(&inst).unwrap().bound, three());
}

#[test]
fn second_constraint_is_not_needed() {
    let res = solve_flow_lp_excluding(&run4(), &[1]).unwrap();
    assert_eq!(res.bound, three());
    assert!(res.solution.unwrap().delta[1].is_zero());
}

#[test]
fn golden_paths_reproduce_the_golden_proof() {
    let (inst, sol, paths) = run4_golden();
    let seq = generate_proof(&inst, &sol, &paths).unwrap();
    assert_eq!(seq.to_string(), GOLDEN);
    assert_eq!(seq.steps.len(), 12);
}

#[test]
fn golden_proof_verifies() {
    let seq: ProofSequence = GOLDEN.parse().unwrap();
    let v = verify_proof(&run4(), &seq).unwrap();
    assert!(v.accepted, "{:?}", v.reason);
    assert_eq!(v.bound, q(3, 1));
    assert_eq!(v.final_coefficient, q(1, 1));
}

#[test]
fn solver_proof_certifies_three() {
    let inst = run4();
    let sol = solve_flow_lp(&inst).unwrap().solution.unwrap();
    let graph = polybound::flow::build_aux_graph(&inst).unwrap();
    let paths = polybound::flow::decompose_flows(&inst, &sol, &graph).unwrap();
    let seq = generate_proof(&inst, &sol, &paths).unwrap();
    let v = verify_proof(&inst, &seq).unwrap();
    assert!(v.accepted);
    assert_eq!(v.bound, q(3, 1));
}

#[test]
fn golden_lift_trace() {
    let (inst, sol, paths) = run4_golden();
    let opts = LiftOptions { check_invariants: true, trace: true, ..Default::default() };
    let out = lift_with(&inst, &sol, &paths, &opts).unwrap();
    let v = verify_dual_witness(&inst, &out.witness);
    assert!(v.accepted, "{:?}", v.violations);
    assert_eq!(v.objective, q(3, 1));
    let s = |v: &[usize]| set(4, v);
    // The first iteration only moves flow along the path to `a`.
    assert_eq!(out.trace.len(), 19);
    let first: Vec<_> = out.trace.iter().filter(|e| e.iteration == 0).collect();
    assert_eq!(first.len(), 7);
    assert_eq!(first[0].phase, Phase::Forward);
    assert_eq!(first[0].var, DualVar::Mu(s(&[]), s(&[0, 1])));
    assert_eq!(first[0].change, q(-1, 1));
    assert_eq!(first[5].var, DualVar::Mu(s(&[]), s(&[0])));
    let last = out.trace.last().unwrap();
    assert_eq!((last.iteration, last.var), (3, DualVar::Mu(s(&[0, 1, 2]), s(&[0, 1, 2, 3]))));
    // Submodularity shows up exactly where the proof has it.
    let sigmas: Vec<_> = out.trace.iter().filter(|e| matches!(e.var, DualVar::Sigma(..)) && e.change.is_positive()).collect();
    assert_eq!(sigmas.len(), 3);
    // Eleven lifted updates expand to the twelve proof steps.
    assert_eq!(check_lockstep(&inst, &sol, &paths, &[0, 1, 2, 3]).unwrap(), 11);
}

#[test]
fn gap_and_triangle() {
    assert_eq!(chain_bound(&gap2(), &[0, 1]).unwrap(), ExtRational::Infinite);
    assert_eq!(polybound::flow_bound::flow_bound(&gap2(), &[0, 1], false).unwrap(), ExtRational::Finite(q(2, 1)));
    let t = tri3();
    let half3 = ExtRational::Finite(q(3, 2));
    assert_eq!(modular_bound(&t).unwrap().bound, half3);
    assert_eq!(normal_bound(&t).unwrap().bound, half3);
    assert_eq!(polymatroid_bound(&t).unwrap().bound, half3);
    assert_eq!(solve_flow_lp(&t).unwrap().bound, half3);
}
