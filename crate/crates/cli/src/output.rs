use std::fs;
use std::io::{self, Write};
use std::path::Path;

use misspec_krige::diagnostics::{AssumptionReport, NystromEigen};
use misspec_krige::harness::{Scenario, ScenarioRun};
use misspec_krige::ratios::{LevelFailure, LevelInfo, TableMetadata, RATIO_NAMES};
use serde::Serialize;
use tempfile::NamedTempFile;

pub const RATIOS_FILE: &str = "ratios.csv";
pub const MEAN_TERMS_FILE: &str = "mean_terms.csv";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.json";
pub const EIGEN_FILE: &str = "eigenvalues.csv";

pub const RATIO_COLUMNS: [&str; 7] = ["scenario", "n", "target_id", "ratio_name", "value", "limit", "abs_dev"];
pub const MEAN_TERM_COLUMNS: [&str; 4] = ["scenario", "n", "target_id", "mean_term"];
pub const EIGEN_COLUMNS: [&str; 2] = ["index", "eigenvalue"];

/// 17 significant digits, round-trips through `f64::from_str`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn ratios_csv(runs: &[ScenarioRun]) -> io::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(RATIO_COLUMNS)?;
    for run in runs {
        for r in &run.table.records {
            let n = r.n.to_string();
            for (k, name) in RATIO_NAMES.iter().enumerate() {
                w.write_record([
                    run.scenario.as_str(),
                    &n,
                    &r.target_id,
                    name,
                    &fmt_f64(r.values[k]),
                    &fmt_opt(r.limits[k]),
                    &fmt_opt(r.abs_dev[k]),
                ])?;
            }
        }
    }
    w.into_inner().map_err(|e| e.into_error())
}

pub fn mean_terms_csv(runs: &[ScenarioRun]) -> io::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(MEAN_TERM_COLUMNS)?;
    for run in runs {
        for m in &run.mean_terms {
            w.write_record([run.scenario.as_str(), &m.n.to_string(), &m.target_id, &fmt_f64(m.value)])?;
        }
    }
    w.into_inner().map_err(|e| e.into_error())
}

pub fn eigen_csv(eig: &NystromEigen) -> io::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(EIGEN_COLUMNS)?;
    for (j, g) in eig.eigenvalues.iter().enumerate() {
        w.write_record([j.to_string(), fmt_f64(*g)])?;
    }
    w.into_inner().map_err(|e| e.into_error())
}

#[derive(Serialize)]
struct ScenarioDiagnostics<'a> {
    scenario: &'a Scenario,
    complete: bool,
    metadata: &'a TableMetadata,
    levels: &'a [LevelInfo],
    #[serde(skip_serializing_if = "Option::is_none")]
    failure: Option<&'a LevelFailure>,
    report: Option<&'a AssumptionReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    report_error: Option<&'a str>,
    invariant_violation: f64,
    design_note: &'a str,
}

#[derive(Serialize)]
struct Diagnostics<'a> {
    schema: u32,
    version: &'a str,
    scenarios: Vec<ScenarioDiagnostics<'a>>,
}

pub fn diagnostics_json(scenarios: &[Scenario], runs: &[ScenarioRun]) -> serde_json::Result<Vec<u8>> {
    let doc = Diagnostics {
        schema: crate::config::SCHEMA_VERSION,
        version: env!("CARGO_PKG_VERSION"),
        scenarios: scenarios
            .iter()
            .zip(runs)
            .map(|(s, r)| ScenarioDiagnostics {
                scenario: s,
                complete: r.is_complete(),
                metadata: &r.table.metadata,
                levels: &r.table.levels,
                failure: r.table.failure.as_ref(),
                report: r.report.as_ref(),
                report_error: r.report_error.as_deref(),
                invariant_violation: r.invariant_violation,
                design_note: &r.design_note,
            })
            .collect(),
    };
    let mut out = serde_json::to_vec_pretty(&doc)?;
    out.push(b'\n');
    Ok(out)
}

/// Writes every file to a temporary sibling first and renames them into
/// place only once all writes succeeded.
pub fn write_atomic(dir: &Path, files: &[(&str, Vec<u8>)]) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    let mut staged = Vec::with_capacity(files.len());
    for (name, bytes) in files {
        let mut tmp = NamedTempFile::new_in(dir)?;
        tmp.write_all(bytes)?;
        tmp.as_file().sync_all()?;
        staged.push((tmp, dir.join(name)));
    }
    for (tmp, path) in staged {
        tmp.persist(&path).map_err(|e| e.error)?;
    }
    Ok(())
}
