//! CSV export of a [`BacktestReport`].
//!
//! - `reliability.csv`: `month,method,pinc,picp,ace`
//! - `qscore.csv`: `month,method,mean,sd,cells,query_crossings`, one row per
//!   month and method plus an `All` row per method
//! - `fanchart_<YYYY-MM>.csv`: `timestamp,observed,q<tau_1>,...,q<tau_M>`, one
//!   row per hour of the month, for CSVQR (or the first method if CSVQR was
//!   not run). Missing observations are left empty.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::{BacktestReport, Method};
use crate::dataset::{YearMonth, TIMESTAMP_FORMAT};
use crate::Result;

pub const RELIABILITY_FILE: &str = "reliability.csv";
pub const QSCORE_FILE: &str = "qscore.csv";
pub const FANCHART_PREFIX: &str = "fanchart_";

pub fn fanchart_file_name(month: YearMonth) -> String {
    format!("{FANCHART_PREFIX}{month}.csv")
}

/// Write the report files into `dir`, creating it if needed. Returns the
/// paths written, in a fixed order.
pub fn export_report(report: &BacktestReport, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    let path = dir.join(RELIABILITY_FILE);
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["month", "method", "pinc", "picp", "ace"])?;
    for r in &report.reliability {
        w.write_record([
            r.month.to_string(),
            r.method.to_string(),
            format!("{:.0}", r.pinc),
            r.picp.to_string(),
            r.ace.to_string(),
        ])?;
    }
    w.flush()?;
    written.push(path);

    let path = dir.join(QSCORE_FILE);
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["month", "method", "mean", "sd", "cells", "query_crossings"])?;
    for r in &report.qscore {
        w.write_record([
            r.month_label(),
            r.method.to_string(),
            r.mean.to_string(),
            r.sd.to_string(),
            r.cells.to_string(),
            r.query_crossings.to_string(),
        ])?;
    }
    w.flush()?;
    written.push(path);

    let mut header = vec!["timestamp".to_string(), "observed".to_string()];
    header.extend(report.levels.as_slice().iter().map(|t| format!("q{t}")));
    for month in &report.months {
        let Some(f) = month
            .forecasts
            .iter()
            .find(|f| f.method == Method::Csvqr)
            .or_else(|| month.forecasts.first())
        else {
            continue;
        };
        let path = dir.join(fanchart_file_name(month.split.test_month));
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(&header)?;
        for (i, ts) in f.timestamps.iter().enumerate() {
            let mut row = vec![
                ts.format(TIMESTAMP_FORMAT).to_string(),
                f.observed[i].map(|v| v.to_string()).unwrap_or_default(),
            ];
            row.extend(f.quantiles.row(i).iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        written.push(path);
    }
    Ok(written)
}

/// Human-readable summary: per-month ACE per PINC and mean Q-score.
pub fn summary(report: &BacktestReport) -> String {
    let mut out = Vec::new();
    for q in &report.qscore {
        let aces: Vec<String> = report
            .reliability
            .iter()
            .filter(|r| Some(r.month) == q.month && r.method == q.method)
            .map(|r| format!("{:.0}%:{:.2}", r.pinc, r.ace))
            .collect();
        let mut line = Vec::new();
        write!(
            &mut line,
            "{:<8} {:<12} qscore {:.4} (sd {:.4})",
            q.month_label(),
            q.method.name(),
            q.mean,
            q.sd
        )
        .expect("write to Vec");
        if !aces.is_empty() {
            write!(&mut line, "  ACE {}", aces.join(" ")).expect("write to Vec");
        }
        out.push(String::from_utf8(line).expect("utf8"));
    }
    out.join("\n")
}
