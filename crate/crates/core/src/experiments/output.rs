//! CSV and JSON manifest formats.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use super::{RunConfig, RunOutcome, SweepResult};
use crate::error::{Error, Result};
use crate::liouvillian::{DissipationMode, VariantId};

pub const TRAJECTORY_HEADER: &str = "kappa_t,P_pq,trace_err,herm_err,min_eig";
pub const SWEEP_HEADER: &str = "axis,value,coherence_time_kappa_t,variant,mode";

/// Twelve significant digits.
fn num(x: f64) -> String {
    format!("{x:.11e}")
}

fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRow {
    pub kappa_t: f64,
    pub p_pq: f64,
    pub trace_err: f64,
    pub herm_err: f64,
    /// Running minimum eigenvalue; empty when no sample has been checked yet.
    pub min_eig: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub axis: String,
    pub value: f64,
    pub coherence_time_kappa_t: Option<f64>,
    pub variant: VariantId,
    pub mode: DissipationMode,
}

fn trajectory_rows(outcome: &RunOutcome) -> Vec<TrajectoryRow> {
    let mut low: Option<f64> = None;
    outcome
        .kappa_t
        .iter()
        .zip(&outcome.coherence)
        .zip(&outcome.diagnostics)
        .map(|((&t, &p), d)| {
            if let Some(e) = d.min_eig {
                low = Some(low.map_or(e, |l| l.min(e)));
            }
            TrajectoryRow {
                kappa_t: t,
                p_pq: p,
                trace_err: d.trace_err,
                herm_err: d.herm_err,
                min_eig: low,
            }
        })
        .collect()
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)?)
}

pub fn write_trajectory_csv(path: &Path, rows: &[TrajectoryRow]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(TRAJECTORY_HEADER.split(','))?;
    for r in rows {
        w.write_record([
            num(r.kappa_t),
            num(r.p_pq),
            num(r.trace_err),
            num(r.herm_err),
            opt_num(r.min_eig),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(SWEEP_HEADER.split(','))?;
    for r in rows {
        w.write_record([
            r.axis.clone(),
            num(r.value),
            opt_num(r.coherence_time_kappa_t),
            r.variant.to_string(),
            r.mode.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        file: path.display().to_string(),
        line,
        message: message.into(),
    }
}

fn read_table(path: &Path, header: &str) -> Result<Vec<(usize, csv::StringRecord)>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).from_path(path)?;
    let mut records = reader.records();
    let line_of = |e: &csv::Error| e.position().map_or(1, |p| p.line() as usize);
    match records.next() {
        None => return Err(parse_error(path, 1, "empty file")),
        Some(Err(e)) => return Err(parse_error(path, line_of(&e), e.to_string())),
        Some(Ok(h)) if h.iter().ne(header.split(',')) => {
            let found: Vec<&str> = h.iter().collect();
            return Err(parse_error(
                path,
                1,
                format!("expected header `{header}`, found `{}`", found.join(",")),
            ));
        }
        Some(Ok(_)) => {}
    }
    records
        .map(|r| match r {
            Ok(rec) => Ok((rec.position().map_or(0, |p| p.line() as usize), rec)),
            Err(e) => Err(parse_error(path, line_of(&e), e.to_string())),
        })
        .collect()
}

fn parse_f64(path: &Path, line: usize, cell: &str) -> Result<f64> {
    cell.parse()
        .map_err(|_| parse_error(path, line, format!("`{cell}` is not a number")))
}

fn parse_opt(path: &Path, line: usize, cell: &str) -> Result<Option<f64>> {
    if cell.is_empty() {
        Ok(None)
    } else {
        parse_f64(path, line, cell).map(Some)
    }
}

pub fn read_trajectory_csv(path: &Path) -> Result<Vec<TrajectoryRow>> {
    let rows = read_table(path, TRAJECTORY_HEADER)?;
    if rows.is_empty() {
        return Err(parse_error(path, 2, "no samples"));
    }
    rows.into_iter()
        .map(|(line, c)| {
            Ok(TrajectoryRow {
                kappa_t: parse_f64(path, line, &c[0])?,
                p_pq: parse_f64(path, line, &c[1])?,
                trace_err: parse_f64(path, line, &c[2])?,
                herm_err: parse_f64(path, line, &c[3])?,
                min_eig: parse_opt(path, line, &c[4])?,
            })
        })
        .collect()
}

pub fn read_sweep_csv(path: &Path) -> Result<Vec<SweepRow>> {
    read_table(path, SWEEP_HEADER)?
        .into_iter()
        .map(|(line, c)| {
            Ok(SweepRow {
                axis: c[0].to_string(),
                value: parse_f64(path, line, &c[1])?,
                coherence_time_kappa_t: parse_opt(path, line, &c[2])?,
                variant: c[3].parse().map_err(|e: Error| parse_error(path, line, e.to_string()))?,
                mode: c[4].parse().map_err(|e: Error| parse_error(path, line, e.to_string()))?,
            })
        })
        .collect()
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("plain data serializes")
}

fn config_block(config: &RunConfig) -> Value {
    json!({
        "config": to_value(config),
        "truncations": {
            "dim_cavity": config.space.dim_cavity,
            "dim_mech": config.space.dim_mech,
            "hilbert_dim": config.space.dim(),
        },
        "tolerances": to_value(&config.integrator),
    })
}

pub fn run_manifest(outcome: &RunOutcome) -> Value {
    let mut m = config_block(&outcome.config);
    let extra = json!({
        "kind": "run",
        "superoperator_nnz": outcome.nnz,
        "rates": to_value(&outcome.rates),
        "diagnostics": {
            "samples": outcome.kappa_t.len(),
            "completed": outcome.completed,
            "max_trace_err": outcome.max_trace_err(),
            "max_herm_err": outcome.max_herm_err(),
            "min_eig_watermark": outcome.min_eig(),
            "steps": to_value(&outcome.stats),
        },
        "coherence_time_kappa_t": outcome.coherence_time,
        "flags": outcome.flags,
        "wall_time_s": outcome.wall_time,
    });
    merge(&mut m, extra);
    m
}

pub fn sweep_manifest(result: &SweepResult) -> Value {
    let mut m = config_block(&result.grid.base);
    let points: Vec<Value> = result
        .points
        .iter()
        .map(|p| {
            json!({
                "value": p.value,
                "coherence_time_kappa_t": p.outcome.coherence_time,
                "max_trace_err": p.outcome.max_trace_err(),
                "max_herm_err": p.outcome.max_herm_err(),
                "min_eig_watermark": p.outcome.min_eig(),
                "rates": to_value(&p.outcome.rates),
                "flags": p.outcome.flags,
                "wall_time_s": p.outcome.wall_time,
            })
        })
        .collect();
    merge(
        &mut m,
        json!({
            "kind": "sweep",
            "axis": result.grid.axis.name(),
            "values": result.grid.values,
            "points": points,
            "wall_time_s": result.wall_time,
        }),
    );
    m
}

/// Manifest written when a run fails before producing samples.
pub fn failure_manifest(config: &RunConfig, error: &Error) -> Value {
    let mut m = config_block(config);
    merge(&mut m, json!({ "kind": "run", "error": error.to_string() }));
    m
}

fn merge(into: &mut Value, from: Value) {
    if let (Value::Object(a), Value::Object(b)) = (into, from) {
        a.extend(b);
    }
}

pub fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Writes `<stem>.csv` and `<stem>.json` under `dir`.
pub fn write_run(dir: &Path, stem: &str, outcome: &RunOutcome) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir)?;
    let csv = dir.join(format!("{stem}.csv"));
    let manifest = dir.join(format!("{stem}.json"));
    write_trajectory_csv(&csv, &trajectory_rows(outcome))?;
    write_json(&manifest, &run_manifest(outcome))?;
    Ok((csv, manifest))
}

pub fn write_sweep(dir: &Path, stem: &str, result: &SweepResult) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir)?;
    let csv = dir.join(format!("{stem}.csv"));
    let manifest = dir.join(format!("{stem}.json"));
    write_sweep_csv(&csv, &result.rows())?;
    write_json(&manifest, &sweep_manifest(result))?;
    Ok((csv, manifest))
}
