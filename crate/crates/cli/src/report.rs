//! Report envelope and the table rendering of JSON reports.

use crate::Format;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Verdict::Pass => 0,
            Verdict::Fail => 1,
        }
    }
}

pub struct Output {
    pub text: String,
    pub code: u8,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Wraps a command report with the engine version and input hash.
pub fn envelope(command: &str, input: &[u8], verdict: &str, body: Value) -> Value {
    json!({
        "command": command,
        "schema_version": SCHEMA_VERSION,
        "engine_version": dirac_core::ENGINE_VERSION,
        "input_sha256": sha256_hex(input),
        "verdict": verdict,
        "report": body,
    })
}

pub fn render(v: &Value, format: Format) -> String {
    match format {
        Format::Json | Format::Csv => {
            let mut s = serde_json::to_string_pretty(v).expect("reports serialize");
            s.push('\n');
            s
        }
        Format::Table => {
            let mut rows = Vec::new();
            flatten("", v, &mut rows);
            let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
            rows.iter().map(|(k, val)| format!("{k:<width$}  {val}\n")).collect()
        }
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    let join = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(map) => {
            for (k, x) in map {
                flatten(&join(k), x, out);
            }
        }
        Value::Array(items) if items.iter().any(|x| x.is_object() || x.is_array()) => {
            for (i, x) in items.iter().enumerate() {
                flatten(&join(&i.to_string()), x, out);
            }
        }
        Value::Array(items) => {
            let parts: Vec<String> = items.iter().map(scalar).collect();
            out.push((prefix.to_string(), format!("[{}]", parts.join(", "))));
        }
        _ => out.push((prefix.to_string(), scalar(v))),
    }
}

fn scalar(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}
