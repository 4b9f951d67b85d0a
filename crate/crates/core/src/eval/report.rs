use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{ExperimentReport, Result, SweepReport};

/// One line of the per-ratio accuracy table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CsvRow<'a> {
    pub step: usize,
    pub class_name: &'a str,
    pub ratio: f64,
    pub top1: f64,
}

/// `experiment-seed<seed>.csv` and `.json` inside `dir`.
pub fn report_paths(dir: &Path, seed: u64) -> (PathBuf, PathBuf) {
    (
        dir.join(format!("experiment-seed{seed}.csv")),
        dir.join(format!("experiment-seed{seed}.json")),
    )
}

pub fn csv_bytes(report: &ExperimentReport) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for s in &report.steps {
        for p in &s.incremental.points {
            w.serialize(CsvRow { step: s.step, class_name: &s.class_name, ratio: p.ratio, top1: p.top1 })?;
        }
    }
    if report.steps.is_empty() {
        w.write_record(["step", "class_name", "ratio", "top1"])?;
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

/// Writes the CSV table and the pretty-printed JSON report; returns both paths.
pub fn write_report(report: &ExperimentReport, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir)?;
    let (csv_path, json_path) = report_paths(dir, report.seed());
    fs::write(&csv_path, csv_bytes(report)?)?;
    let mut json = serde_json::to_vec_pretty(report)?;
    json.push(b'\n');
    fs::write(&json_path, json)?;
    Ok((csv_path, json_path))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCsvRow<'a> {
    pub class_name: &'a str,
    pub ratio: f64,
    pub top1: f64,
}

pub fn sweep_csv_bytes(report: &SweepReport) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for p in &report.points {
        w.serialize(SweepCsvRow { class_name: &report.class_name, ratio: p.ratio, top1: p.top1 })?;
    }
    if report.points.is_empty() {
        w.write_record(["class_name", "ratio", "top1"])?;
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

/// Writes `sweep-seed<seed>.csv` and `.json` inside `dir`; returns both paths.
pub fn write_sweep(report: &SweepReport, seed: u64, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir)?;
    let csv_path = dir.join(format!("sweep-seed{seed}.csv"));
    let json_path = dir.join(format!("sweep-seed{seed}.json"));
    fs::write(&csv_path, sweep_csv_bytes(report)?)?;
    let mut json = serde_json::to_vec_pretty(report)?;
    json.push(b'\n');
    fs::write(&json_path, json)?;
    Ok((csv_path, json_path))
}
