//! Side-by-side error metrics of two completed runs.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use pinn_core::problems::{MetricsSummary, SummaryError};
use thiserror::Error;

use crate::run::METRICS_FILE;

#[derive(Debug, Error)]
pub enum CompareError {
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parsing {path}: {source}")]
    Parse { path: PathBuf, source: SummaryError },
    #[error("runs solve different problems: {a} vs {b}")]
    MismatchedProblems { a: String, b: String },
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompareRow {
    pub region: String,
    pub metric: &'static str,
    pub a: f64,
    pub b: f64,
}

impl CompareRow {
    /// `b - a`.
    pub fn delta(&self) -> f64 {
        self.b - self.a
    }
}

pub fn read_summary(dir: &Path) -> Result<MetricsSummary, CompareError> {
    let path = dir.join(METRICS_FILE);
    let text = fs::read_to_string(&path).map_err(|source| CompareError::Io {
        path: path.clone(),
        source,
    })?;
    MetricsSummary::from_text(&text).map_err(|source| CompareError::Parse { path, source })
}

/// Rows for every region present in both runs.
pub fn compare_summaries(a: &MetricsSummary, b: &MetricsSummary) -> Result<Vec<CompareRow>, CompareError> {
    if a.problem != b.problem {
        return Err(CompareError::MismatchedProblems {
            a: a.problem.clone(),
            b: b.problem.clone(),
        });
    }
    let mut rows = Vec::new();
    for (region, ma) in &a.regions {
        let Some(mb) = b.region(region) else { continue };
        rows.push(CompareRow {
            region: region.clone(),
            metric: "rel_l2",
            a: ma.rel_l2,
            b: mb.rel_l2,
        });
        rows.push(CompareRow {
            region: region.clone(),
            metric: "max_abs",
            a: ma.max_abs,
            b: mb.max_abs,
        });
    }
    Ok(rows)
}

pub fn compare_dirs(a: &Path, b: &Path) -> Result<Vec<CompareRow>, CompareError> {
    compare_summaries(&read_summary(a)?, &read_summary(b)?)
}

pub fn to_table(rows: &[CompareRow]) -> String {
    let mut s = format!(
        "{:<16} {:<8} {:>14} {:>14} {:>14}\n",
        "region", "metric", "A", "B", "B-A"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:<16} {:<8} {:>14.6e} {:>14.6e} {:>14.6e}",
            r.region,
            r.metric,
            r.a,
            r.b,
            r.delta()
        );
    }
    s
}

pub fn to_csv(rows: &[CompareRow]) -> String {
    let mut s = String::from("region,metric,a,b,delta\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{:?},{:?},{:?}", r.region, r.metric, r.a, r.b, r.delta());
    }
    s
}
