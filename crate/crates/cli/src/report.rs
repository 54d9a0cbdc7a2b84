use std::fmt::Write as _;

use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

pub const TOOL: &str = "nonsig";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// What every command hands back: a JSON body and the rows of its table view.
pub struct Report {
    pub command: &'static str,
    pub body: Value,
    pub rows: Vec<(String, String)>,
}

impl Report {
    pub fn new(command: &'static str, body: Value) -> Self {
        Self { command, body, rows: Vec::new() }
    }

    pub fn row(mut self, key: impl Into<String>, value: impl ToString) -> Self {
        self.rows.push((key.into(), value.to_string()));
        self
    }
}

pub fn digest(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    format!("sha256:{}", hex::encode(h.finalize()))
}

/// Rounds every float to 12 significant digits so reruns compare bytewise.
pub fn round_floats(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().unwrap();
            let r: f64 = format!("{x:.11e}").parse().unwrap_or(x);
            *v = serde_json::Number::from_f64(r).map_or(Value::Null, Value::Number);
        }
        Value::Array(items) => items.iter_mut().for_each(round_floats),
        Value::Object(map) => map.values_mut().for_each(round_floats),
        _ => {}
    }
}

pub fn render_json(report: &Report, input_digest: &str, pretty: bool) -> String {
    let mut body = match report.body.clone() {
        Value::Object(map) => map,
        other => {
            let mut m = Map::new();
            m.insert("result".into(), other);
            m
        }
    };
    body.insert("command".into(), Value::from(report.command));
    body.insert("tool".into(), Value::from(TOOL));
    body.insert("tool_version".into(), Value::from(VERSION));
    body.insert("input_digest".into(), Value::from(input_digest));
    let mut body = Value::Object(body);
    round_floats(&mut body);
    let mut s = if pretty { serde_json::to_string_pretty(&body) } else { serde_json::to_string(&body) }
        .expect("a JSON value always serializes");
    s.push('\n');
    s
}

pub fn render_table(report: &Report, input_digest: &str) -> String {
    let mut rows = report.rows.clone();
    rows.push(("tool".into(), format!("{TOOL} {VERSION}")));
    rows.push(("input digest".into(), input_digest.into()));
    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let mut out = String::new();
    for (k, v) in rows {
        let _ = writeln!(out, "{k:<width$}  {v}");
    }
    out
}

pub fn fmt_num(x: f64) -> String {
    format!("{x:.8}")
}

pub fn fmt_matrix(m: &[Vec<f64>]) -> String {
    let rows: Vec<String> =
        m.iter().map(|r| r.iter().map(|v| format!("{v:.6}")).collect::<Vec<_>>().join(" ")).collect();
    format!("[{}]", rows.join("; "))
}
