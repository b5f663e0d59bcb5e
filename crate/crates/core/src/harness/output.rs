//! CSV and JSON result files.
//!
//! Summary CSV: `step,time_s,metric,value,runs`, long format. Metrics are
//! `ospa`, `ospa_se`, `ospa_loc`, `ospa_card`, `cardinality`, `existence`,
//! `hypotheses`, `rms_pos` and `rms_vel`; steps where a metric is undefined
//! have no row.
//!
//! Per-run CSV: `step,time_s,kind,id,x_m,y_m,vx_mps,vy_mps,value` with kinds
//! `observer`, `truth`, `measurement` (value = bearing in degrees),
//! `estimate` (value = existence), `existence`, `cardinality` and
//! `hypotheses`. States are absolute.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::harness::run::{RunFailure, RunRecord, SummaryRow};
use crate::harness::scenario::ScenarioConfig;
use crate::models::BearingsModel;

pub const SUMMARY_HEADER: [&str; 5] = ["step", "time_s", "metric", "value", "runs"];
pub const RUN_HEADER: [&str; 9] = ["step", "time_s", "kind", "id", "x_m", "y_m", "vx_mps", "vy_mps", "value"];

pub fn write_summary<W: Write>(w: W, rows: &[SummaryRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(SUMMARY_HEADER)?;
    for r in rows {
        out.write_record([r.step.to_string(), r.time_s.to_string(), r.metric.clone(), r.value.to_string(), r.runs.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Deserialize)]
struct SummaryCsvRow {
    step: usize,
    time_s: f64,
    metric: String,
    value: f64,
    runs: usize,
}

pub fn read_summary<R: Read>(r: R) -> Result<Vec<SummaryRow>> {
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != SUMMARY_HEADER {
        return Err(Error::invalid(format!("summary header must be {}", SUMMARY_HEADER.join(","))));
    }
    rdr.deserialize::<SummaryCsvRow>()
        .map(|row| {
            let r = row?;
            Ok(SummaryRow { step: r.step, time_s: r.time_s, metric: r.metric, value: r.value, runs: r.runs })
        })
        .collect()
}

/// Measurements per step (radians) from a per-run CSV.
pub fn read_scans<R: Read>(r: R) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != RUN_HEADER {
        return Err(Error::invalid(format!("run header must be {}", RUN_HEADER.join(","))));
    }
    let mut scans: Vec<Vec<f64>> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let step: usize = rec[0].parse().map_err(|_| Error::invalid(format!("bad step '{}'", &rec[0])))?;
        if scans.len() <= step {
            scans.resize(step + 1, Vec::new());
        }
        if &rec[2] == "measurement" {
            let deg: f64 = rec[8].parse().map_err(|_| Error::invalid(format!("bad bearing '{}'", &rec[8])))?;
            scans[step].push(deg.to_radians());
        }
    }
    Ok(scans)
}

fn label_id(label: &Option<crate::filters::Label>) -> String {
    label.map_or_else(String::new, |l| format!("{}.{}", l.birth_step, l.index))
}

pub fn write_run<W: Write>(w: W, cfg: &ScenarioConfig, model: &BearingsModel, record: &RunRecord) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(RUN_HEADER)?;
    let f = |v: f64| v.to_string();
    for k in 0..record.simulation.scans.len() {
        let (step, t) = (k.to_string(), f(cfg.time(k)));
        let o = model.observer_state(k);
        out.write_record([&step, &t, "observer", "", &f(o[0]), &f(o[1]), &f(o[2]), &f(o[3]), ""])?;
        for (i, s) in &record.simulation.truth[k] {
            let [x, y, vx, vy] = s.0;
            out.write_record([&step, &t, "truth", &i.to_string(), &f(x), &f(y), &f(vx), &f(vy), ""])?;
        }
        for z in &record.simulation.scans[k] {
            out.write_record([&step, &t, "measurement", "", "", "", "", "", &f(z.to_degrees())])?;
        }
        if let Some(est) = record.estimates.get(k) {
            for e in est {
                let [x, y, vx, vy] = e.state.0;
                out.write_record([&step, &t, "estimate", &label_id(&e.label), &f(x), &f(y), &f(vx), &f(vy), &f(e.existence)])?;
            }
        }
        if let Some(d) = record.diagnostics.get(k) {
            if let Some(r) = d.existence {
                out.write_record([&step, &t, "existence", "", "", "", "", "", &f(r)])?;
            }
            out.write_record([&step, &t, "cardinality", "", "", "", "", "", &f(d.cardinality)])?;
            if let Some(h) = d.hypotheses {
                out.write_record([&step, &t, "hypotheses", "", "", "", "", "", &h.to_string()])?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// SHA-256 of the compact JSON encoding. Object keys are sorted, so equal
/// configurations hash equally.
pub fn config_hash(config: &Value) -> String {
    let text = serde_json::to_string(config).expect("json values always serialize");
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sidecar {
    pub version: String,
    pub config_hash: String,
    pub filter: String,
    pub runs: usize,
    pub base_seed: u64,
    pub failures: Vec<RunFailure>,
    pub config: Value,
}

pub fn write_sidecar<W: Write>(mut w: W, sidecar: &Sidecar) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, sidecar)?;
    writeln!(w)?;
    Ok(())
}

/// Sets `a.b.c = value` in a JSON document. The key must already exist.
/// The value is parsed as JSON when possible and kept as a string otherwise.
pub fn apply_override(doc: &mut Value, key: &str, raw: &str) -> Result<()> {
    let mut node = doc;
    for part in key.split('.') {
        node = match node {
            Value::Object(map) => map.get_mut(part).ok_or_else(|| Error::invalid(format!("unknown key '{key}'")))?,
            Value::Array(items) => {
                let i: usize = part.parse().map_err(|_| Error::invalid(format!("'{part}' in '{key}' is not an index")))?;
                items.get_mut(i).ok_or_else(|| Error::invalid(format!("index {i} out of range in '{key}'")))?
            }
            _ => return Err(Error::invalid(format!("'{key}' goes below a scalar"))),
        };
    }
    *node = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    Ok(())
}

/// Joins summaries into one wide table keyed by step. Columns are
/// `<name>.<metric>` in input order; missing values are empty.
pub fn merge_summaries(inputs: &[(String, Vec<SummaryRow>)]) -> (Vec<String>, Vec<Vec<String>>) {
    let mut columns: Vec<String> = Vec::new();
    let mut cells: BTreeMap<usize, (f64, BTreeMap<String, f64>)> = BTreeMap::new();
    for (name, rows) in inputs {
        for r in rows {
            let col = format!("{name}.{}", r.metric);
            if !columns.contains(&col) {
                columns.push(col.clone());
            }
            cells.entry(r.step).or_insert_with(|| (r.time_s, BTreeMap::new())).1.insert(col, r.value);
        }
    }
    let mut header = vec!["step".to_string(), "time_s".to_string()];
    header.extend(columns.iter().cloned());
    let rows = cells
        .into_iter()
        .map(|(step, (t, vals))| {
            let mut row = vec![step.to_string(), t.to_string()];
            row.extend(columns.iter().map(|c| vals.get(c).map_or_else(String::new, |v| v.to_string())));
            row
        })
        .collect();
    (header, rows)
}
