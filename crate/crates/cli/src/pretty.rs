//! Plain-text rendering of reports for `--pretty`.

use std::fmt::Write;

use serde_json::Value;

/// Bulky artifacts left out of the table view.
const SKIPPED: &[&str] = &["witness", "solution", "weights", "proof", "original", "reduced", "variable_map", "added_consistency"];

fn scalar(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => "-".into(),
        Value::Array(items) => items.iter().map(scalar).collect::<Vec<_>>().join(","),
        other => other.to_string(),
    }
}

fn table(out: &mut String, rows: &[(String, String)]) {
    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    for (k, v) in rows {
        let _ = writeln!(out, "  {k:<width$}  {v}");
    }
}

pub fn render(report: &Value) -> String {
    let mut out = String::new();
    let Value::Object(fields) = report else {
        return format!("{report}\n");
    };
    if let Some(Value::Array(results)) = fields.get("results") {
        for r in results {
            let _ = writeln!(out, "== {}", scalar(&r["file"]));
            if let Some(e) = r.get("error") {
                let _ = writeln!(out, "  error: {}", scalar(e));
            } else {
                out.push_str(&render(&r["report"]));
            }
        }
        return out;
    }
    let mut rows = Vec::new();
    for (key, v) in fields {
        match key.as_str() {
            k if SKIPPED.contains(&k) => {}
            "instance" => {
                let c = &v["classification"];
                rows.push(("instance".into(), format!(
                    "n={} k={} simple={} cardinality-only={} acyclic={}",
                    v["n"], v["k"], c["is_simple"], c["is_cardinality_only"], c["is_acyclic"]
                )));
            }
            "values" | "checks" | "check" => {}
            "elapsed_ms" => rows.push((key.clone(), format!("{:.2}", v.as_f64().unwrap_or(0.0)))),
            _ => rows.push((key.clone(), scalar(v))),
        }
    }
    table(&mut out, &rows);
    if let Some(Value::Object(values)) = fields.get("values") {
        let _ = writeln!(out, "bounds:");
        let rows: Vec<(String, String)> = values.iter().map(|(k, v)| (k.clone(), scalar(v))).collect();
        table(&mut out, &rows);
    }
    if let Some(Value::Array(checks)) = fields.get("checks") {
        let _ = writeln!(out, "checks:");
        let rows: Vec<(String, String)> = checks
            .iter()
            .map(|c| (scalar(&c["relation"]), if c["holds"] == Value::Bool(true) { "ok".into() } else { "FAILS".into() }))
            .collect();
        table(&mut out, &rows);
    }
    if let Some(Value::Object(check)) = fields.get("check") {
        let _ = writeln!(out, "check:");
        let rows: Vec<(String, String)> = check.iter().map(|(k, v)| (k.clone(), scalar(v))).collect();
        table(&mut out, &rows);
    }
    out
}
