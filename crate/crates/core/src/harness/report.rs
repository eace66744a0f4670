//! CSV and JSON output of experiment reports.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use super::experiment::{ExperimentReport, ExperimentRow};
use crate::error::{Error, Result};

/// CSV columns, in order.
pub const CSV_COLUMNS: [&str; 12] = [
    "ell",
    "t_random_s",
    "t_approx_s",
    "speedup_time",
    "matvecs_random",
    "matvecs_approx",
    "speedup_matvec",
    "filtered_random",
    "filtered_approx",
    "inner_loops_random",
    "inner_loops_approx",
    "median_angle",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::InvalidConfig(format!("unknown report format `{other}`"))),
        }
    }
}

#[derive(Serialize)]
struct CsvRow {
    ell: usize,
    t_random_s: f64,
    t_approx_s: f64,
    speedup_time: f64,
    matvecs_random: usize,
    matvecs_approx: usize,
    speedup_matvec: f64,
    filtered_random: usize,
    filtered_approx: usize,
    inner_loops_random: usize,
    inner_loops_approx: usize,
    median_angle: f64,
}

impl From<&ExperimentRow> for CsvRow {
    fn from(r: &ExperimentRow) -> Self {
        Self {
            ell: r.ell,
            t_random_s: r.t_random_s,
            t_approx_s: r.t_approx_s,
            speedup_time: r.speedup_time,
            matvecs_random: r.matvecs_random,
            matvecs_approx: r.matvecs_approx,
            speedup_matvec: r.speedup_matvec,
            filtered_random: r.filtered_random,
            filtered_approx: r.filtered_approx,
            inner_loops_random: r.inner_loops_random,
            inner_loops_approx: r.inner_loops_approx,
            median_angle: r.median_angle,
        }
    }
}

/// Serializes the report; the header is written even when there are no rows.
pub fn render_report(report: &ExperimentReport, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Csv => {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
            w.write_record(CSV_COLUMNS)?;
            for row in &report.rows {
                w.serialize(CsvRow::from(row))?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
            Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
        }
        ReportFormat::Json => Ok(serde_json::to_string_pretty(report)? + "\n"),
    }
}

/// Writes the report to `path`, or to stdout when `path` is `None`.
pub fn emit_report(report: &ExperimentReport, format: ReportFormat, path: Option<&Path>) -> Result<()> {
    let text = render_report(report, format)?;
    match path {
        Some(p) => fs::write(p, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}
