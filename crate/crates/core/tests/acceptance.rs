//! Acceptance run: one line per criterion, nonzero exit if any fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::{copy_shape, fractional_edge_cover, gap2, run4, run4_golden, set, simple_fd_shape, two_three_shape};
use polybound::dual_lift::{lift_with, verify_dual_witness, DualWitness, LiftOptions};
use polybound::flow::{build_aux_graph, cut_row_sum, decompose_flows, min_cut_certificate, solve_flow_lp, solve_flow_lp_excluding, SinkVerdict};
use polybound::flow_bound::{flow_bound, suggest_permutation};
use polybound::oracle::{chain_bound, modular_bound, normal_bound, polymatroid_bound, polymatroid_bound_value};
use polybound::proof::{generate_proof, length_cap, verify_proof, ProofSequence, ProofStep};
use polybound::random::{random_acyclic_instance, random_instance, random_permutation, rng, GenConfig};
use polybound::rational::q;
use polybound::reductions::{reduce_acyclic_plus_simple, reduce_simple_plus_fd, reduce_two_three, ReductionTrace};
use polybound::{classify, Error, ExtRational, Instance, Rational};
use rand::Rng;

const GOLDEN: &str = include_str!("data/run4.proof");

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn three() -> ExtRational {
    ExtRational::Finite(q(3, 1))
}

/// The random simple suite shared by several criteria.
fn simple_suite() -> Vec<Instance> {
    let mut r = rng(2024);
    (0..1000)
        .map(|i| {
            let n = 1 + i % 6;
            let k = r.random_range(1..=6);
            // Most instances cover every variable; the rest exercise the
            // unbounded case.
            random_instance(&mut r, &GenConfig { cover: i % 4 != 0, ..GenConfig::simple(n, k) })
        })
        .collect()
}

fn running_example() -> Outcome {
    let inst = run4();
    let flow = solve_flow_lp(&inst).map_err(|e| e.to_string())?;
    ensure!(flow.bound == three(), "flow program gave {}", flow.bound);
    let oracle = polymatroid_bound(&inst).map_err(|e| e.to_string())?.bound;
    ensure!(oracle == three(), "oracle gave {oracle}");
    let normal = normal_bound(&inst).map_err(|e| e.to_string())?.bound;
    ensure!(normal == three(), "normal gave {normal}");
    let modular = modular_bound(&inst).map_err(|e| e.to_string())?.bound;
    ensure!(modular == three(), "modular gave {modular}");
    let sol = flow.solution.expect("finite bound has a solution");
    let paths = decompose_flows(&inst, &sol, &build_aux_graph(&inst).unwrap()).map_err(|e| e.to_string())?;
    let seq = generate_proof(&inst, &sol, &paths).map_err(|e| e.to_string())?;
    let v = verify_proof(&inst, &seq).map_err(|e| e.to_string())?;
    ensure!(v.accepted && v.bound == q(3, 1), "proof certified {} (accepted {})", v.bound, v.accepted);
    let fixed = solve_flow_lp_excluding(&inst, &[1]).map_err(|e| e.to_string())?;
    ensure!(fixed.bound == three(), "with the second capacity fixed to 0 the optimum is {}", fixed.bound);
    let delta = fixed.solution.expect("finite").delta;
    let support: Vec<usize> = (0..4).filter(|&i| !delta[i].is_zero()).map(|i| i + 1).collect();
    Ok(format!("all five values are 3; support with the second capacity at 0: {support:?}"))
}

fn oracle_equivalence(suite: &[Instance]) -> Outcome {
    let start = Instant::now();
    let mut infinite = 0;
    for (i, inst) in suite.iter().enumerate() {
        let flow = solve_flow_lp(inst).map_err(|e| e.to_string())?.bound;
        let oracle = polymatroid_bound(inst).map_err(|e| e.to_string())?.bound;
        ensure!(flow == oracle, "instance {i}: flow {flow} vs oracle {oracle}");
        if !flow.is_finite() {
            infinite += 1;
        }
    }
    let took = start.elapsed();
    ensure!(took < Duration::from_secs(60), "took {took:?}");
    Ok(format!("{} instances, {infinite} unbounded, {:.2?}", suite.len(), took))
}

fn proof_sequences(suite: &[Instance]) -> Outcome {
    let mut checked = 0;
    let mut longest = 0.0f64;
    for (i, inst) in suite.iter().enumerate() {
        let res = solve_flow_lp(inst).map_err(|e| e.to_string())?;
        let ExtRational::Finite(opt) = res.bound else { continue };
        let sol = res.solution.expect("finite");
        let paths = decompose_flows(inst, &sol, &build_aux_graph(inst).unwrap()).map_err(|e| e.to_string())?;
        let seq = generate_proof(inst, &sol, &paths).map_err(|e| format!("instance {i}: {e}"))?;
        let cap = length_cap(inst.n(), inst.k());
        ensure!(seq.steps.len() <= cap, "instance {i}: {} steps over {cap}", seq.steps.len());
        longest = longest.max(seq.steps.len() as f64 / cap as f64);
        let v = verify_proof(inst, &seq).map_err(|e| format!("instance {i}: {e}"))?;
        ensure!(v.accepted, "instance {i}: rejected at {:?}: {:?}", v.failed_step, v.reason);
        ensure!(v.bound == opt, "instance {i}: certified {} vs optimum {opt}", v.bound);
        checked += 1;
    }
    let golden: ProofSequence = GOLDEN.parse().map_err(|e: Error| e.to_string())?;
    let v = verify_proof(&run4(), &golden).map_err(|e| e.to_string())?;
    ensure!(v.accepted && v.bound == q(3, 1) && golden.steps.len() == 12, "golden proof rejected");
    ensure!(golden.to_string() == GOLDEN, "golden proof does not round-trip");
    Ok(format!("{checked} proofs verified, largest length/cap ratio {longest:.3}; 12-step golden proof verifies"))
}

fn dual_lift(suite: &[Instance]) -> Outcome {
    let opts = LiftOptions { check_invariants: true, ..Default::default() };
    let mut checked = 0;
    for (i, inst) in suite.iter().enumerate() {
        let res = solve_flow_lp(inst).map_err(|e| e.to_string())?;
        let ExtRational::Finite(opt) = res.bound else { continue };
        let sol = res.solution.expect("finite");
        let paths = decompose_flows(inst, &sol, &build_aux_graph(inst).unwrap()).map_err(|e| e.to_string())?;
        let w = lift_with(inst, &sol, &paths, &opts).map_err(|e| format!("instance {i}: {e}"))?.witness;
        let v = verify_dual_witness(inst, &w);
        ensure!(v.accepted, "instance {i}: {:?}", v.violations);
        ensure!(v.objective == opt, "instance {i}: objective {} vs {opt}", v.objective);
        checked += 1;
    }
    let s = |v: &[usize]| set(4, v);
    let mut fig = DualWitness { delta: vec![q(1, 1), q(0, 1), q(1, 1), q(1, 1)], ..Default::default() };
    fig.sigma.insert(DualWitness::sigma_key(s(&[0, 1]), s(&[0, 2])), q(1, 1));
    fig.sigma.insert(DualWitness::sigma_key(s(&[0, 1, 2]), s(&[0, 3])), q(1, 1));
    fig.mu.insert((s(&[]), s(&[0])), q(1, 1));
    let v = verify_dual_witness(&run4(), &fig);
    ensure!(v.accepted && v.objective == q(3, 1), "hand witness: {:?}, objective {}", v.violations, v.objective);
    let (inst, sol, paths) = run4_golden();
    lift_with(&inst, &sol, &paths, &opts).map_err(|e| e.to_string())?;
    Ok(format!("{checked} lifted witnesses verified with per-iteration level checks; hand witness has objective 3"))
}

fn normal_equals_polymatroid(suite: &[Instance]) -> Outcome {
    for (i, inst) in suite.iter().enumerate() {
        let normal = normal_bound(inst).map_err(|e| e.to_string())?.bound;
        let poly = polymatroid_bound(inst).map_err(|e| e.to_string())?.bound;
        ensure!(normal == poly, "instance {i}: normal {normal} vs polymatroid {poly}");
    }
    Ok(format!("{} instances", suite.len()))
}

fn hierarchy() -> Outcome {
    let mut r = rng(77);
    let count = 300;
    for i in 0..count {
        let n = 1 + i % 6;
        let k = r.random_range(1..=5);
        let cover = r.random_bool(0.5);
        let inst = random_instance(&mut r, &GenConfig { cover, ..GenConfig::general(n, k) });
        let modular = modular_bound(&inst).map_err(|e| e.to_string())?.bound;
        let normal = normal_bound(&inst).map_err(|e| e.to_string())?.bound;
        let poly = polymatroid_bound(&inst).map_err(|e| e.to_string())?.bound;
        ensure!(modular <= normal && normal <= poly, "instance {i}: {modular} / {normal} / {poly}");
        for _ in 0..5 {
            let pi = random_permutation(&mut r, n);
            let chain = chain_bound(&inst, &pi).map_err(|e| e.to_string())?;
            ensure!(poly <= chain, "instance {i}, order {pi:?}: polymatroid {poly} > chain {chain}");
        }
    }
    Ok(format!("{count} instances with n <= 6, 5 orders each"))
}

fn flow_bound_sandwich(suite: &[Instance]) -> Outcome {
    let mut r = rng(5);
    let general = 250;
    for i in 0..general {
        let n = 1 + i % 6;
        let k = r.random_range(1..=5);
        let inst = random_instance(&mut r, &GenConfig { cover: true, ..GenConfig::general(n, k) });
        let pi = random_permutation(&mut r, n);
        let poly = polymatroid_bound_value(&inst).map_err(|e| e.to_string())?;
        let fb = flow_bound(&inst, &pi, false).map_err(|e| e.to_string())?;
        let chain = chain_bound(&inst, &pi).map_err(|e| e.to_string())?;
        ensure!(poly <= fb && fb <= chain, "instance {i}: {poly} / {fb} / {chain}");
    }
    for (i, inst) in suite.iter().enumerate() {
        let (pi, _) = suggest_permutation(inst);
        let fb = flow_bound(inst, &pi, false).map_err(|e| e.to_string())?;
        ensure!(fb == polymatroid_bound_value(inst).unwrap(), "simple instance {i}: flow bound {fb}");
    }
    let acyclic = 300;
    for i in 0..acyclic {
        let n = 1 + i % 6;
        let k = r.random_range(1..=5);
        let inst = random_acyclic_instance(&mut r, &GenConfig::general(n, k));
        ensure!(classify(&inst).is_acyclic, "generator produced a cyclic instance");
        let (pi, _) = suggest_permutation(&inst);
        let fb = flow_bound(&inst, &pi, false).map_err(|e| e.to_string())?;
        ensure!(fb == polymatroid_bound_value(&inst).unwrap(), "acyclic instance {i}: flow bound {fb}");
    }
    let chain = chain_bound(&gap2(), &[0, 1]).map_err(|e| e.to_string())?;
    let fb = flow_bound(&gap2(), &[0, 1], false).map_err(|e| e.to_string())?;
    ensure!(chain == ExtRational::Infinite && fb == ExtRational::Finite(q(2, 1)), "gap instance: chain {chain}, flow bound {fb}");
    Ok(format!(
        "sandwich on {general} general instances; exact on {} simple and {acyclic} acyclic; gap instance chain inf, flow bound 2",
        suite.len()
    ))
}

fn reductions() -> Outcome {
    type Reduce = fn(&Instance) -> polybound::Result<ReductionTrace>;
    let modes: [(&str, Reduce, fn(&ReductionTrace) -> bool, usize); 3] = [
        ("acyclic-simple", reduce_acyclic_plus_simple, copy_shape, 5),
        ("two-three", reduce_two_three, two_three_shape, 4),
        ("simple-fd", reduce_simple_plus_fd, simple_fd_shape, 6),
    ];
    let mut report = Vec::new();
    for (name, reduce, shape, max_n) in modes {
        let mut r = rng(31);
        let (mut kept, mut tried, mut changed) = (0, 0, 0);
        while kept < 120 {
            tried += 1;
            ensure!(tried < 20_000, "{name}: only {kept} instances with a small enough reduction");
            let n = r.random_range(1..=max_n);
            let k = r.random_range(1..=4);
            let inst = random_instance(&mut r, &GenConfig { cover: true, ..GenConfig::general(n, k) });
            let t = reduce(&inst).map_err(|e| format!("{name}: {e}"))?;
            if t.reduced.n() > 10 {
                continue;
            }
            kept += 1;
            if t.iterations > 0 || t.reduced.n() != n {
                changed += 1;
            }
            ensure!(shape(&t), "{name}: shape violated on {}", inst.to_json_string());
            let before = polymatroid_bound_value(&inst).map_err(|e| e.to_string())?;
            let after = polymatroid_bound_value(&t.reduced).map_err(|e| e.to_string())?;
            ensure!(before == after, "{name}: {before} became {after} on {}", inst.to_json_string());
        }
        report.push(format!("{name} {kept} ({changed} rewritten)"));
    }
    Ok(report.join(", "))
}

fn agm() -> Outcome {
    let mut r = rng(9);
    let count = 150;
    for i in 0..count {
        let n = 1 + i % 5;
        let k = r.random_range(1..=4);
        let inst = random_instance(&mut r, &GenConfig::cardinality(n, k));
        ensure!(classify(&inst).is_cardinality_only, "generator produced a guarded constraint");
        let poly = polymatroid_bound(&inst).map_err(|e| e.to_string())?.bound;
        let cover = fractional_edge_cover(&inst);
        ensure!(poly == ExtRational::Finite(cover.clone()), "instance {i}: oracle {poly} vs edge cover {cover}");
    }
    Ok(format!("{count} cardinality-only instances match the edge cover program"))
}

fn scale(step: &mut ProofStep, f: &Rational) {
    match step {
        ProofStep::Decompose { w, .. }
        | ProofStep::Compose { w, .. }
        | ProofStep::Monotonicity { w, .. }
        | ProofStep::Submodularity { w, .. } => *w = &*w * f,
    }
}

fn rejected(inst: &Instance, seq: &ProofSequence) -> bool {
    match verify_proof(inst, seq) {
        Ok(v) => !v.accepted,
        Err(Error::ProofStructure { .. }) => true,
        Err(_) => false,
    }
}

fn fault_injection(suite: &[Instance]) -> Outcome {
    let inst = run4();
    let golden: ProofSequence = GOLDEN.parse().map_err(|e: Error| e.to_string())?;
    for i in 0..golden.steps.len() {
        let mut seq = golden.clone();
        scale(&mut seq.steps[i], &q(2, 1));
        ensure!(rejected(&inst, &seq), "doubled weight at step {} accepted", i + 1);
    }
    // The first step only touches h({}|{}) and stays valid when swapped.
    for i in 1..golden.steps.len() {
        let mut seq = golden.clone();
        seq.steps[i] = match seq.steps[i].clone() {
            ProofStep::Compose { w, x, z, y } => ProofStep::Decompose { w, x, z, y },
            ProofStep::Decompose { w, x, z, y } => ProofStep::Compose { w, x, z, y },
            ProofStep::Submodularity { w, i, j } => ProofStep::Submodularity { w, i: j, j: i },
            ProofStep::Monotonicity { w, x, y } => ProofStep::Monotonicity { w, x: y, y: x },
        };
        ensure!(rejected(&inst, &seq), "swapped step {} accepted", i + 1);
    }
    let s = |v: &[usize]| set(4, v);
    let mut seq = golden.clone();
    seq.steps[1] = ProofStep::Decompose { w: q(1, 1), x: s(&[]), z: s(&[2]), y: s(&[0, 1]) };
    ensure!(rejected(&inst, &seq), "decompose with Z outside Y accepted");

    let mut w = DualWitness { delta: vec![q(1, 1), q(0, 1), q(1, 1), q(1, 1)], ..Default::default() };
    w.sigma.insert(DualWitness::sigma_key(s(&[0, 1]), s(&[0, 2])), q(1, 1));
    w.sigma.insert(DualWitness::sigma_key(s(&[0, 1, 2]), s(&[0, 3])), q(1, 1));
    w.mu.insert((s(&[]), s(&[0])), q(1, 1));
    w.mu.insert((s(&[1]), s(&[1, 2])), q(-1, 2));
    ensure!(!verify_dual_witness(&inst, &w).accepted, "negative mu accepted");

    let mut cuts = 0;
    for (i, inst) in suite.iter().enumerate() {
        let res = solve_flow_lp(inst).map_err(|e| e.to_string())?;
        let ExtRational::Finite(opt) = res.bound else { continue };
        if !opt.is_positive() {
            continue;
        }
        let delta: Vec<Rational> = res.solution.expect("finite").delta.iter().map(|d| d * &q(9, 10)).collect();
        let verdicts = min_cut_certificate(inst, &delta).map_err(|e| e.to_string())?;
        let mut found = false;
        for v in verdicts {
            if let SinkVerdict::Violated { cut, row_sum, .. } = v {
                ensure!(row_sum < q(1, 1), "instance {i}: cut {cut} has row sum {row_sum}");
                ensure!(row_sum == cut_row_sum(inst, &delta, cut), "instance {i}: row sum mismatch at {cut}");
                found = true;
            }
        }
        ensure!(found, "instance {i}: scaled capacities still feasible");
        cuts += 1;
    }
    Ok(format!("weight, kind and subset tampering rejected; negative mu rejected; {cuts} scaled optima leave a cut below 1"))
}

fn main() {
    let suite = simple_suite();
    let criteria: Vec<(&str, Box<dyn FnOnce() -> Outcome + '_>)> = vec![
        ("running example", Box::new(running_example)),
        ("flow program equals polymatroid bound", Box::new(|| oracle_equivalence(&suite))),
        ("proof sequences", Box::new(|| proof_sequences(&suite))),
        ("dual witness lift", Box::new(|| dual_lift(&suite))),
        ("normal equals polymatroid on simple", Box::new(|| normal_equals_polymatroid(&suite))),
        ("bound hierarchy", Box::new(hierarchy)),
        ("flow bound", Box::new(|| flow_bound_sandwich(&suite))),
        ("reductions", Box::new(reductions)),
        ("edge cover agreement", Box::new(agm)),
        ("fault injection", Box::new(|| fault_injection(&suite))),
    ];
    let mut failed = 0;
    for (idx, (name, run)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let took = start.elapsed();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail} [{took:.2?}]", idx + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail} [{took:.2?}]", idx + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all criteria passed");
}
