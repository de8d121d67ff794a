//! Machine-readable reports: a fixed schema tag, sorted keys and floats with
//! 17 significant digits so equal runs give equal bytes.

use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::error::{GdError, Result};
use crate::gditer::StabilizationReport;

pub const SCHEMA: &str = "gdlab/1";

/// Common header of every report.
pub fn envelope(command: &str, input: &str, n: usize, seed: u64) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("schema".into(), json!(SCHEMA));
    m.insert("command".into(), json!(command));
    m.insert("input".into(), json!(input));
    m.insert("n".into(), json!(n));
    m.insert("seed".into(), json!(seed));
    m
}

pub fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    serde_json::to_value(v).map_err(|e| GdError::Format(e.to_string()))
}

/// Report of an iteration; `timings_ms` is null unless `timings` is set.
pub fn stabilization_value(report: &StabilizationReport, input: &str, timings: bool) -> Result<Value> {
    let mut m = envelope("iterate", input, report.n, report.seed);
    m.insert("max_degree".into(), json!(report.max_degree));
    m.insert("chain".into(), to_value(&report.chain)?);
    m.insert(
        "stabilized_at".into(),
        match report.stabilized_at {
            Some(d) => json!(d),
            None => json!("not detected within max_degree"),
        },
    );
    m.insert("m0".into(), json!(report.m0));
    m.insert("theorem_bound".into(), json!(report.theorem_bound));
    m.insert("refined_bound".into(), json!(report.refined_bound));
    m.insert("bound_satisfied".into(), json!(report.bound_satisfied));
    m.insert("params".into(), to_value(&report.params)?);
    m.insert("diagnostics".into(), to_value(&report.diagnostics)?);
    m.insert("timings_ms".into(), if timings { to_value(&report.step_ms)? } else { Value::Null });
    Ok(Value::Object(m))
}

fn number(x: f64) -> String {
    if !x.is_finite() {
        return "null".into();
    }
    format!("{x:.16e}")
}

fn write(v: &Value, indent: usize, out: &mut String) {
    let pad = |k: usize| "  ".repeat(k);
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(x) => match (x.as_u64(), x.as_i64(), x.as_f64()) {
            (Some(u), _, _) => out.push_str(&u.to_string()),
            (_, Some(i), _) => out.push_str(&i.to_string()),
            (_, _, Some(f)) => out.push_str(&number(f)),
            _ => out.push_str("null"),
        },
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) if items.is_empty() => out.push_str("[]"),
        Value::Array(items) => {
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                write(item, indent + 1, out);
                out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push(']');
        }
        Value::Object(map) if map.is_empty() => out.push_str("{}"),
        Value::Object(map) => {
            out.push_str("{\n");
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            for (i, k) in keys.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                out.push_str(&Value::String((*k).clone()).to_string());
                out.push_str(": ");
                write(&map[*k], indent + 1, out);
                out.push_str(if i + 1 < keys.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push('}');
        }
    }
}

/// Canonical text of a report, newline terminated.
pub fn canonical_json(v: &Value) -> String {
    let mut out = String::new();
    write(v, 0, &mut out);
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_keep_seventeen_digits() {
        let v = json!({"b": 0.1, "a": [1, -2, 2.5e-300, f64::MAX], "c": {"z": true, "y": null}, "d": 3.0});
        let s = canonical_json(&v);
        assert!(s.contains("1.0000000000000001e-1"));
        assert!(s.contains("2.5000000000000000e-300"));
        assert!(s.contains("\"d\": 3.0000000000000000e0"));
        assert!(s.find("\"a\"").unwrap() < s.find("\"b\"").unwrap());
        let back: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["b"].as_f64(), Some(0.1));
        assert_eq!(back["a"][3].as_f64(), Some(f64::MAX));
    }

    #[test]
    fn nonfinite_becomes_null() {
        assert_eq!(number(f64::INFINITY), "null");
        assert_eq!(number(f64::NAN), "null");
    }
}
