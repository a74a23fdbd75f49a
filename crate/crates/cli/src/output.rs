//! CSV and JSON emission. Numbers carry 12 significant digits.

use qpt_core::analysis::{ScalingResult, SweepResult};
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::config::RunConfig;
use crate::error::CliError;

pub const SCHEMA_VERSION: &str = "1";

/// `printf("%.12g")`, with `NaN`, `inf` and `-inf` spelled out.
pub fn fmt_g(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    if (-4..12).contains(&exp) {
        let decimals = (11 - exp) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Rounds every float in `v` to 12 significant digits.
pub fn round_numbers(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().unwrap();
            let r: f64 = fmt_g(x).parse().unwrap_or(x);
            if let Some(m) = serde_json::Number::from_f64(r) {
                *n = m;
            }
        }
        Value::Array(a) => a.iter_mut().for_each(round_numbers),
        Value::Object(o) => o.values_mut().for_each(round_numbers),
        _ => {}
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum Payload {
    Sweep(Box<SweepResult>),
    Scaling(ScalingResult),
    Other(Value),
}

impl Payload {
    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("payload serializes")
    }
}

fn cell(x: f64) -> String {
    fmt_g(x)
}

pub fn csv_header(sweep: &SweepResult) -> Vec<String> {
    let k = sweep.solver.levels;
    let mut h = vec!["g".to_string()];
    h.extend((0..k).map(|i| format!("E{i}")));
    h.extend((0..k).map(|i| format!("S_{i}")));
    h.extend((0..k).map(|i| format!("parity_{i}")));
    for p in &sweep.pairs {
        let l = p.label();
        h.extend([format!("cxx_{l}"), format!("cyy_{l}"), format!("czz_{l}")]);
    }
    for p in &sweep.pairs {
        let l = p.label();
        h.extend([format!("C_raw_{l}"), format!("C_{l}")]);
    }
    h.push("flag".into());
    h
}

/// One header row and one row per grid point, LF-terminated.
pub fn emit_csv(payload: &Payload) -> Result<Vec<u8>, CliError> {
    let Payload::Sweep(sweep) = payload else {
        return Err(CliError::Config("csv output needs a sweep payload".into()));
    };
    let header = csv_header(sweep);
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(&header).map_err(io)?;
    for p in &sweep.points {
        let mut row = vec![cell(p.g)];
        row.extend(p.energies.iter().map(|&e| cell(e)));
        row.extend(
            p.labels
                .iter()
                .map(|l| l.total_spin.and_then(|s| s.value()).map(cell).unwrap_or_default()),
        );
        row.extend(
            p.labels
                .iter()
                .map(|l| l.parity.and_then(|q| q.sign()).map(|s| s.to_string()).unwrap_or_default()),
        );
        for r in &p.pairs {
            row.extend([cell(r.cxx), cell(r.cyy), cell(r.czz)]);
        }
        for r in &p.pairs {
            row.extend([cell(r.concurrence_raw), cell(r.concurrence)]);
        }
        row.push(p.flag.clone().unwrap_or_default());
        debug_assert_eq!(row.len(), header.len());
        w.write_record(&row).map_err(io)?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.to_string()))
}

pub struct Envelope<'a> {
    pub command: &'a str,
    pub config: &'a RunConfig,
    pub wall_time_s: Option<f64>,
    pub flagged_records: usize,
    pub payload: &'a Payload,
}

/// The JSON document: schema version, toolkit, version, command, config
/// echo, wall time (unless disabled), warnings, payload. Key order is fixed.
pub fn emit_json(env: &Envelope) -> Vec<u8> {
    let mut doc = Map::new();
    doc.insert("schema_version".into(), json!(SCHEMA_VERSION));
    doc.insert("toolkit".into(), json!("qpt"));
    doc.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    doc.insert("command".into(), json!(env.command));
    doc.insert("config".into(), serde_json::to_value(env.config).expect("config serializes"));
    if let Some(t) = env.wall_time_s {
        doc.insert("wall_time_s".into(), json!(t));
    }
    doc.insert("warnings".into(), json!({ "flagged_records": env.flagged_records }));
    doc.insert("payload".into(), env.payload.to_value());
    let mut doc = Value::Object(doc);
    round_numbers(&mut doc);
    let mut out = serde_json::to_vec_pretty(&doc).expect("json serializes");
    out.push(b'\n');
    out
}
