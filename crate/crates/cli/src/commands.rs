use std::fs;
use std::path::Path;
use std::time::Instant;

use polybound::flow::{build_aux_graph, decompose_flows, solve_flow_lp};
use polybound::flow_bound::{flow_bound_with, suggest_permutation, FlowBoundOptions, PermutationReason};
use polybound::model::DependencyGraph;
use polybound::oracle::{chain_bound, modular_bound, normal_bound, oracle_cap, polymatroid_bound, polymatroid_bound_value};
use polybound::proof::{generate_proof, length_cap, verify_proof, ProofSequence};
use polybound::reductions::{reduce_acyclic_plus_simple, reduce_simple_plus_fd, reduce_two_three};
use polybound::{classify as classify_instance, Error, ExtRational, Instance};
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::{BoundKind, Failure, ReduceMode, Report};

/// Largest universe for `--all-pi`.
const ALL_PI_MAX: usize = 7;

pub struct BoundArgs {
    pub kind: BoundKind,
    pub pi: Option<String>,
    pub all_pi: bool,
    pub multi_source: bool,
}

fn load(path: &Path) -> Result<Instance, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    Instance::from_json_str(&text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn digest(inst: &Instance) -> Value {
    json!({"n": inst.n(), "k": inst.k(), "classification": classify_instance(inst)})
}

fn names(inst: &Instance, pi: &[usize]) -> Vec<String> {
    pi.iter().map(|&v| inst.var_name(v)).collect()
}

fn value(v: &ExtRational) -> Value {
    Value::String(v.to_string())
}

fn permutation(inst: &Instance, text: Option<&str>) -> Result<(Vec<usize>, &'static str), Failure> {
    match text {
        Some(t) => {
            let pi = inst.parse_permutation(t).map_err(|e| Failure::Precondition(format!("--pi: {e}")))?;
            Ok((pi, "given"))
        }
        None => {
            let (pi, why) = suggest_permutation(inst);
            Ok((pi, why.as_str()))
        }
    }
}

fn permuted_value(inst: &Instance, kind: BoundKind, pi: &[usize], multi_source: bool) -> polybound::Result<ExtRational> {
    match kind {
        BoundKind::Chain => chain_bound(inst, pi),
        _ => {
            let opts = FlowBoundOptions { multi_source, ..Default::default() };
            flow_bound_with(inst, pi, &opts).map(|r| r.bound)
        }
    }
}

fn all_permutations(n: usize) -> Vec<Vec<usize>> {
    fn extend(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for v in 0..used.len() {
            if !used[v] {
                used[v] = true;
                prefix.push(v);
                extend(prefix, used, out);
                prefix.pop();
                used[v] = false;
            }
        }
    }
    let mut out = Vec::new();
    extend(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

fn bound_report(inst: &Instance, args: &BoundArgs) -> Result<Value, Failure> {
    let start = Instant::now();
    let kind = args.kind;
    if !kind.uses_permutation() && (args.pi.is_some() || args.all_pi) {
        return Err(Failure::Precondition(format!("--pi and --all-pi apply to chain and flow, not {}", kind.as_str())));
    }
    if args.multi_source && kind != BoundKind::Flow {
        return Err(Failure::Precondition("--multi-source applies to the flow kind only".into()));
    }
    let mut out = Map::new();
    out.insert("command".into(), json!("bound"));
    out.insert("instance".into(), digest(inst));
    out.insert("kind".into(), json!(kind.as_str()));
    let bound = match kind {
        BoundKind::FlowSimple => {
            let res = solve_flow_lp(inst)?;
            if let Some(sol) = &res.solution {
                out.insert("solution".into(), sol.to_json(inst));
            }
            res.bound
        }
        BoundKind::Oracle => {
            let res = polymatroid_bound(inst)?;
            if let Some(w) = &res.witness {
                out.insert("witness".into(), w.to_json());
            }
            res.bound
        }
        BoundKind::Normal => {
            let res = normal_bound(inst)?;
            let weights: Map<String, Value> =
                res.weights.iter().map(|(s, w)| (inst.fmt_set(*s), json!(w.to_string()))).collect();
            out.insert("weights".into(), Value::Object(weights));
            res.bound
        }
        BoundKind::Modular => {
            let res = modular_bound(inst)?;
            if let Some(w) = &res.weights {
                let weights: Map<String, Value> =
                    w.iter().enumerate().map(|(v, x)| (inst.var_name(v), json!(x.to_string()))).collect();
                out.insert("weights".into(), Value::Object(weights));
            }
            res.bound
        }
        BoundKind::Chain | BoundKind::Flow if args.all_pi => {
            if inst.n() > ALL_PI_MAX {
                return Err(Failure::Precondition(format!("--all-pi needs n <= {ALL_PI_MAX}, got {}", inst.n())));
            }
            let perms = all_permutations(inst.n());
            let values: Vec<ExtRational> = perms
                .par_iter()
                .map(|pi| permuted_value(inst, kind, pi, args.multi_source))
                .collect::<polybound::Result<_>>()?;
            let best = (0..perms.len()).min_by(|&a, &b| values[a].cmp(&values[b])).expect("n >= 1");
            let worst = values.iter().max().expect("n >= 1");
            out.insert("pi".into(), json!(names(inst, &perms[best])));
            out.insert("evaluated".into(), json!(perms.len()));
            out.insert("worst".into(), value(worst));
            values[best].clone()
        }
        BoundKind::Chain | BoundKind::Flow => {
            let (pi, why) = permutation(inst, args.pi.as_deref())?;
            out.insert("pi".into(), json!(names(inst, &pi)));
            out.insert("pi_source".into(), json!(why));
            if kind == BoundKind::Flow {
                let opts = FlowBoundOptions { multi_source: args.multi_source, ..Default::default() };
                let res = flow_bound_with(inst, &pi, &opts)?;
                if let Some(delta) = &res.delta {
                    out.insert("delta".into(), json!(delta.iter().map(|d| d.to_string()).collect::<Vec<_>>()));
                }
                res.bound
            } else {
                chain_bound(inst, &pi)?
            }
        }
    };
    out.insert("value".into(), value(&bound));
    out.insert("elapsed_ms".into(), json!(start.elapsed().as_secs_f64() * 1e3));
    Ok(Value::Object(out))
}

pub fn bound(file: &Path, args: &BoundArgs) -> Result<Report, Failure> {
    let inst = load(file)?;
    Ok(Report { json: bound_report(&inst, args)?, ok: true })
}

/// Runs `bound` on every `.json` file of a directory; failures are reported
/// per file.
pub fn bound_dir(dir: &Path, args: &BoundArgs) -> Result<Report, Failure> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .map_err(|e| Failure::Input(format!("{}: {e}", dir.display())))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    let results: Vec<(Value, bool)> = files
        .par_iter()
        .map(|path| {
            let file = path.display().to_string();
            match load(path).and_then(|inst| bound_report(&inst, args)) {
                Ok(report) => (json!({"file": file, "report": report}), true),
                Err(f) => (json!({"file": file, "error": f.message(), "exit_code": f.code()}), false),
            }
        })
        .collect();
    let ok = results.iter().all(|(_, ok)| *ok);
    let results: Vec<Value> = results.into_iter().map(|(v, _)| v).collect();
    Ok(Report { json: json!({"command": "bound", "kind": args.kind.as_str(), "results": results}), ok })
}

pub fn proof(file: &Path, output: Option<&Path>) -> Result<Report, Failure> {
    let start = Instant::now();
    let inst = load(file)?;
    let res = solve_flow_lp(&inst)?;
    let Some(sol) = res.solution else {
        return Err(Failure::Precondition("the bound is unbounded, so there is nothing to prove".into()));
    };
    let graph = build_aux_graph(&inst)?;
    let paths = decompose_flows(&inst, &sol, &graph)?;
    let seq = generate_proof(&inst, &sol, &paths)?;
    let verdict = verify_proof(&inst, &seq)?;
    if !verdict.accepted {
        return Err(Failure::Internal(format!("generated proof fails at step {:?}: {:?}", verdict.failed_step, verdict.reason)));
    }
    let text = seq.to_string();
    let mut out = json!({
        "command": "proof",
        "instance": digest(&inst),
        "value": value(&res.bound),
        "length": seq.steps.len(),
        "length_cap": length_cap(inst.n(), inst.k()),
        "verified": true,
    });
    match output {
        Some(path) => {
            fs::write(path, &text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
            out["output"] = json!(path.display().to_string());
        }
        None => out["proof"] = json!(text),
    }
    out["elapsed_ms"] = json!(start.elapsed().as_secs_f64() * 1e3);
    Ok(Report { json: out, ok: true })
}

pub fn verify(file: &Path, proof: &Path) -> Result<Report, Failure> {
    let inst = load(file)?;
    let text = fs::read_to_string(proof).map_err(|e| Failure::Input(format!("{}: {e}", proof.display())))?;
    let seq: ProofSequence = text.parse().map_err(|e: Error| Failure::Input(format!("{}: {e}", proof.display())))?;
    let mut out = json!({"command": "verify", "instance": digest(&inst), "steps": seq.steps.len()});
    let accepted = match verify_proof(&inst, &seq) {
        Ok(v) => {
            out["accepted"] = json!(v.accepted);
            out["failed_step"] = json!(v.failed_step.map(|s| s + 1));
            out["reason"] = json!(v.reason);
            out["final_coefficient"] = json!(v.final_coefficient.to_string());
            out["certified_value"] = json!(v.bound.to_string());
            v.accepted
        }
        Err(Error::ProofStructure { step, reason }) => {
            out["accepted"] = json!(false);
            out["failed_step"] = if step == 0 { Value::Null } else { json!(step) };
            out["reason"] = json!(reason);
            false
        }
        Err(e) => return Err(e.into()),
    };
    Ok(Report { json: out, ok: accepted })
}

pub fn compare(file: &Path, pi: Option<&str>) -> Result<Report, Failure> {
    let start = Instant::now();
    let inst = load(file)?;
    let (pi, why) = permutation(&inst, pi)?;
    let modular = modular_bound(&inst)?.bound;
    let normal = normal_bound(&inst)?.bound;
    let poly = polymatroid_bound_value(&inst)?;
    let simple = classify_instance(&inst).is_simple;
    let flow_simple = if simple { Some(solve_flow_lp(&inst)?.bound) } else { None };
    let chain = chain_bound(&inst, &pi)?;
    let fb = flow_bound_with(&inst, &pi, &FlowBoundOptions::default())?.bound;

    let mut checks = vec![
        ("modular <= normal", modular <= normal),
        ("normal <= polymatroid", normal <= poly),
        ("polymatroid <= flow-bound", poly <= fb),
        ("flow-bound <= chain", fb <= chain),
        ("polymatroid <= chain", poly <= chain),
    ];
    if let Some(fs) = &flow_simple {
        checks.push(("flow-simple == polymatroid", *fs == poly));
    }
    if simple || why == PermutationReason::AcyclicTopological.as_str() {
        checks.push(("flow-bound == polymatroid", fb == poly));
    }
    let sandwich = checks.iter().all(|(_, ok)| *ok);
    let mut flags = Vec::new();
    if chain == ExtRational::Infinite && fb.is_finite() {
        flags.push("unbounded-gap");
    }
    let out = json!({
        "command": "compare",
        "instance": digest(&inst),
        "pi": names(&inst, &pi),
        "pi_source": why,
        "values": {
            "modular": value(&modular),
            "normal": value(&normal),
            "polymatroid": value(&poly),
            "flow-simple": flow_simple.as_ref().map(value),
            "chain": value(&chain),
            "flow-bound": value(&fb),
        },
        "checks": checks.iter().map(|(r, ok)| json!({"relation": r, "holds": ok})).collect::<Vec<_>>(),
        "sandwich": if sandwich { "pass" } else { "fail" },
        "flags": flags,
        "elapsed_ms": start.elapsed().as_secs_f64() * 1e3,
    });
    Ok(Report { json: out, ok: sandwich })
}

pub fn reduce(file: &Path, mode: ReduceMode, check: bool, output: Option<&Path>) -> Result<Report, Failure> {
    let inst = load(file)?;
    let trace = match mode {
        ReduceMode::AcyclicSimple => reduce_acyclic_plus_simple(&inst)?,
        ReduceMode::TwoThree => reduce_two_three(&inst)?,
        ReduceMode::SimpleFd => reduce_simple_plus_fd(&inst)?,
    };
    if let Some(path) = output {
        fs::write(path, trace.reduced.to_json_string()).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    }
    let mut out = json!({"command": "reduce", "mode": mode.as_str(), "reduced_n": trace.reduced.n()});
    if let Value::Object(fields) = trace.to_json() {
        for (key, v) in fields {
            out[key] = v;
        }
    }
    let mut ok = true;
    if check {
        let cap = oracle_cap();
        let big = trace.reduced.n().max(inst.n());
        out["check"] = if big > cap {
            eprintln!("polybound: check refused, reduced universe of {big} exceeds the oracle cap of {cap}");
            json!({"status": "refused", "reason": format!("universe of {big} exceeds the oracle cap of {cap}")})
        } else {
            let before = polymatroid_bound_value(&inst)?;
            let after = polymatroid_bound_value(&trace.reduced)?;
            ok = before == after;
            json!({"status": if ok { "equal" } else { "mismatch" }, "original": value(&before), "reduced": value(&after)})
        };
    }
    Ok(Report { json: out, ok })
}

pub fn classify(file: &Path) -> Result<Report, Failure> {
    let inst = load(file)?;
    let graph = DependencyGraph::of(&inst);
    let edges: Vec<[String; 2]> = graph.edges.iter().map(|&(u, v)| [inst.var_name(u), inst.var_name(v)]).collect();
    let topo = graph.topological_order().map(|pi| names(&inst, &pi));
    let (pi, why) = suggest_permutation(&inst);
    let out = json!({
        "command": "classify",
        "instance": digest(&inst),
        "dependency_edges": edges,
        "topological_order": topo,
        "suggested_pi": names(&inst, &pi),
        "suggested_pi_reason": why.as_str(),
    });
    Ok(Report { json: out, ok: true })
}
