//! File emission: per-quantity CSV time series, an events JSONL stream and a
//! consolidated JSON report.
//!
//! CSV layout: header row, time column first, values as 17-significant-digit
//! decimals so logs round-trip bit-exactly.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::Path;

use super::log::{chattering_metric, envelope_audit, SimLog};

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn channel_headers(prefix: &str, agents: usize, dim: usize) -> Vec<String> {
    let mut names = Vec::with_capacity(agents * dim);
    for a in 1..=agents {
        for k in 1..=dim {
            if dim == 1 {
                names.push(format!("{prefix}{a}"));
            } else {
                names.push(format!("{prefix}{a}_{k}"));
            }
        }
    }
    names
}

fn write_csv(
    path: &Path,
    headers: &[String],
    rows: impl Iterator<Item = (f64, Vec<f64>)>,
) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "t,{}", headers.join(","))?;
    for (t, values) in rows {
        write!(w, "{}", fmt(t))?;
        for v in values {
            write!(w, ",{}", fmt(v))?;
        }
        writeln!(w)?;
    }
    w.flush()
}

/// Writes `states.csv`, `controls.csv`, `errors.csv`, `epsilon.csv`,
/// `weights.csv`, `events.jsonl` and `report.json` into `dir`.
pub fn write_outputs(log: &SimLog, dir: &Path) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    let agents = log.meta.agents;
    let dim = log.meta.node_dim;

    write_csv(
        &dir.join("states.csv"),
        &channel_headers("x", agents, dim),
        log.rows.iter().map(|r| (r.t, r.states.clone())),
    )?;
    write_csv(
        &dir.join("controls.csv"),
        &channel_headers("u", agents, dim),
        log.rows.iter().map(|r| (r.t, r.controls.clone())),
    )?;
    write_csv(
        &dir.join("errors.csv"),
        &channel_headers("e", agents, dim),
        log.rows.iter().map(|r| (r.t, r.errors.clone())),
    )?;
    write_csv(
        &dir.join("epsilon.csv"),
        &channel_headers("eps", agents, dim),
        log.rows.iter().map(|r| (r.t, r.eps.clone())),
    )?;
    write_csv(
        &dir.join("weights.csv"),
        &(1..=agents).map(|a| format!("w{a}")).collect::<Vec<_>>(),
        log.rows.iter().map(|r| (r.t, r.weight_norms.clone())),
    )?;

    let mut events = BufWriter::new(File::create(dir.join("events.jsonl"))?);
    for event in &log.events {
        serde_json::to_writer(&mut events, event)?;
        writeln!(events)?;
    }
    events.flush()?;

    let report = serde_json::json!({
        "scenario": log.meta.scenario,
        "transform_variant": log.meta.variant,
        "step": log.meta.step,
        "decimate": log.meta.decimate,
        "seed": log.meta.seed,
        "gain_report": log.gain_report,
        "summary": log.summary,
        "audit": envelope_audit(log),
        "chattering": { "control_total_variation_rows": chattering_metric(log) },
    });
    let mut f = BufWriter::new(File::create(dir.join("report.json"))?);
    serde_json::to_writer_pretty(&mut f, &report)?;
    writeln!(f)?;
    f.flush()
}
