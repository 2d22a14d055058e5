//! Error metrics and run summaries.

use std::fmt::Write as _;

use thiserror::Error;

use crate::optimizer::TrainReport;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorMetrics {
    pub rel_l2: f64,
    pub max_abs: f64,
}

/// `||pred - exact||_2 / ||exact||_2` and the largest pointwise deviation.
/// An all-zero reference gives a relative error of 0 for an exact match and
/// infinity otherwise.
pub fn error_metrics(pred: &[f64], exact: &[f64]) -> ErrorMetrics {
    assert_eq!(pred.len(), exact.len(), "prediction and reference lengths differ");
    let mut num = 0.0;
    let mut den = 0.0;
    let mut max_abs: f64 = 0.0;
    for (p, e) in pred.iter().zip(exact) {
        let d = p - e;
        num += d * d;
        den += e * e;
        max_abs = max_abs.max(d.abs());
    }
    let rel_l2 = if den > 0.0 {
        (num / den).sqrt()
    } else if num == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    ErrorMetrics { rel_l2, max_abs }
}

#[derive(Debug, Error, PartialEq)]
pub enum SummaryError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("missing key `{0}`")]
    Missing(&'static str),
}

/// The deterministic outcome of a run: everything except timing.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsSummary {
    pub problem: String,
    pub mode: String,
    pub seed: u64,
    pub status: String,
    pub epochs_run: usize,
    pub final_loss: f64,
    /// Error metrics per named evaluation region.
    pub regions: Vec<(String, ErrorMetrics)>,
    /// Learned (or fixed) physical scalars.
    pub physical: Vec<(String, f64)>,
    /// Named model coefficients worth reporting (regression fits).
    pub coefficients: Vec<(String, f64)>,
}

impl MetricsSummary {
    pub fn region(&self, name: &str) -> Option<ErrorMetrics> {
        self.regions.iter().find(|(n, _)| n == name).map(|&(_, m)| m)
    }

    pub fn physical_value(&self, name: &str) -> Option<f64> {
        self.physical.iter().find(|(n, _)| n == name).map(|&(_, v)| v)
    }

    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.coefficients.iter().find(|(n, _)| n == name).map(|&(_, v)| v)
    }

    /// `key=value` lines; floats are written so they parse back bit-exactly.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "problem={}", self.problem);
        let _ = writeln!(s, "mode={}", self.mode);
        let _ = writeln!(s, "seed={}", self.seed);
        let _ = writeln!(s, "status={}", self.status);
        let _ = writeln!(s, "epochs_run={}", self.epochs_run);
        let _ = writeln!(s, "final_loss={:?}", self.final_loss);
        for (name, m) in &self.regions {
            let _ = writeln!(s, "{name}.rel_l2={:?}", m.rel_l2);
            let _ = writeln!(s, "{name}.max_abs={:?}", m.max_abs);
        }
        for (name, v) in &self.physical {
            let _ = writeln!(s, "physical.{name}={v:?}");
        }
        for (name, v) in &self.coefficients {
            let _ = writeln!(s, "coefficient.{name}={v:?}");
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, SummaryError> {
        let mut problem = None;
        let mut mode = None;
        let mut seed = None;
        let mut status = None;
        let mut epochs_run = None;
        let mut final_loss = None;
        let mut regions: Vec<(String, ErrorMetrics)> = Vec::new();
        let mut physical = Vec::new();
        let mut coefficients = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            let bad = |reason: String| SummaryError::Parse { line: i + 1, reason };
            let (key, value) = line.split_once('=').ok_or_else(|| bad("expected key=value".into()))?;
            let float = || value.parse::<f64>().map_err(|e| bad(format!("`{value}`: {e}")));
            match key {
                "problem" => problem = Some(value.to_string()),
                "mode" => mode = Some(value.to_string()),
                "status" => status = Some(value.to_string()),
                "seed" => seed = Some(value.parse().map_err(|e| bad(format!("seed: {e}")))?),
                "epochs_run" => epochs_run = Some(value.parse().map_err(|e| bad(format!("epochs_run: {e}")))?),
                "final_loss" => final_loss = Some(float()?),
                _ => {
                    if let Some(name) = key.strip_prefix("physical.") {
                        physical.push((name.to_string(), float()?));
                    } else if let Some(name) = key.strip_prefix("coefficient.") {
                        coefficients.push((name.to_string(), float()?));
                    } else if let Some((region, metric)) = key.rsplit_once('.') {
                        let v = float()?;
                        let idx = match regions.iter().position(|(n, _)| n == region) {
                            Some(idx) => idx,
                            None => {
                                regions.push((
                                    region.to_string(),
                                    ErrorMetrics {
                                        rel_l2: f64::NAN,
                                        max_abs: f64::NAN,
                                    },
                                ));
                                regions.len() - 1
                            }
                        };
                        match metric {
                            "rel_l2" => regions[idx].1.rel_l2 = v,
                            "max_abs" => regions[idx].1.max_abs = v,
                            _ => return Err(bad(format!("unknown metric `{metric}`"))),
                        }
                    } else {
                        return Err(bad(format!("unknown key `{key}`")));
                    }
                }
            }
        }
        Ok(Self {
            problem: problem.ok_or(SummaryError::Missing("problem"))?,
            mode: mode.ok_or(SummaryError::Missing("mode"))?,
            seed: seed.ok_or(SummaryError::Missing("seed"))?,
            status: status.ok_or(SummaryError::Missing("status"))?,
            epochs_run: epochs_run.ok_or(SummaryError::Missing("epochs_run"))?,
            final_loss: final_loss.ok_or(SummaryError::Missing("final_loss"))?,
            regions,
            physical,
            coefficients,
        })
    }
}

/// One evaluated point: coordinates, prediction and reference.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub coords: Vec<f64>,
    pub predicted: f64,
    pub exact: f64,
}

/// Header `names..., u_pred, u_exact, abs_err` and one row per point.
pub fn results_csv(names: &[String], rows: &[ResultRow]) -> String {
    let mut s = names.join(",");
    s.push_str(",u_pred,u_exact,abs_err\n");
    for r in rows {
        for c in &r.coords {
            let _ = write!(s, "{c:?},");
        }
        let _ = writeln!(s, "{:?},{:?},{:?}", r.predicted, r.exact, (r.predicted - r.exact).abs());
    }
    s
}

/// Parses [`results_csv`] output back into rows.
pub fn parse_results_csv(text: &str) -> Result<(Vec<String>, Vec<ResultRow>), SummaryError> {
    let mut lines = text.lines();
    let header = lines.next().ok_or(SummaryError::Missing("header"))?;
    let cols: Vec<String> = header.split(',').map(str::to_string).collect();
    if cols.len() < 3 || cols[cols.len() - 3..] != ["u_pred", "u_exact", "abs_err"] {
        return Err(SummaryError::Parse {
            line: 1,
            reason: "expected trailing columns u_pred,u_exact,abs_err".into(),
        });
    }
    let n_coords = cols.len() - 3;
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| SummaryError::Parse {
                line: i + 2,
                reason: e.to_string(),
            })?;
        if vals.len() != cols.len() {
            return Err(SummaryError::Parse {
                line: i + 2,
                reason: format!("expected {} fields, got {}", cols.len(), vals.len()),
            });
        }
        rows.push(ResultRow {
            coords: vals[..n_coords].to_vec(),
            predicted: vals[n_coords],
            exact: vals[n_coords + 1],
        });
    }
    Ok((cols[..n_coords].to_vec(), rows))
}

/// `epoch, <physical names...>` per logged epoch.
pub fn inversion_history_csv(report: &TrainReport) -> String {
    let mut s = String::from("epoch");
    for n in &report.physical_names {
        s.push(',');
        s.push_str(n);
    }
    s.push('\n');
    for rec in &report.history {
        let _ = write!(s, "{}", rec.epoch);
        for v in &rec.physical {
            let _ = write!(s, ",{v:?}");
        }
        s.push('\n');
    }
    s
}

/// Parses [`inversion_history_csv`] output into `(names, rows)` where each
/// row is `(epoch, values)`.
/// Parameter names and `(epoch, values)` rows of an inversion history.
pub type InversionHistory = (Vec<String>, Vec<(usize, Vec<f64>)>);

pub fn parse_inversion_history(text: &str) -> Result<InversionHistory, SummaryError> {
    let mut lines = text.lines();
    let header = lines.next().ok_or(SummaryError::Missing("header"))?;
    let names: Vec<String> = header.split(',').skip(1).map(str::to_string).collect();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: String| SummaryError::Parse { line: i + 2, reason };
        let mut fields = line.split(',');
        let epoch = fields
            .next()
            .unwrap_or_default()
            .parse::<usize>()
            .map_err(|e| bad(e.to_string()))?;
        let values = fields
            .map(|v| v.parse::<f64>().map_err(|e| bad(e.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        if values.len() != names.len() {
            return Err(bad(format!("expected {} values, got {}", names.len(), values.len())));
        }
        rows.push((epoch, values));
    }
    Ok((names, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metric_examples() {
        let exact = [0.6, 0.8];
        assert_eq!(
            error_metrics(&exact, &exact),
            ErrorMetrics {
                rel_l2: 0.0,
                max_abs: 0.0
            }
        );
        let shifted: Vec<f64> = exact.iter().map(|v| v + 0.1).collect();
        assert!((error_metrics(&shifted, &exact).max_abs - 0.1).abs() < 1e-15);
        assert_eq!(error_metrics(&[0.0, 0.0], &exact).rel_l2, 1.0);
    }

    #[test]
    fn summary_round_trip() {
        let s = MetricsSummary {
            problem: "membrane".into(),
            mode: "inverse".into(),
            seed: 7,
            status: "EpochsExhausted".into(),
            epochs_run: 12,
            final_loss: 1.0 / 3.0,
            regions: vec![(
                "slice".into(),
                ErrorMetrics {
                    rel_l2: 0.1,
                    max_abs: 2e-17,
                },
            )],
            physical: vec![("c".into(), 0.987_654_321)],
            coefficients: vec![("W1".into(), -1.0)],
        };
        assert_eq!(MetricsSummary::from_text(&s.to_text()).unwrap(), s);
    }

    #[test]
    fn results_round_trip() {
        let rows = vec![
            ResultRow {
                coords: vec![0.1, 0.2],
                predicted: 1.0,
                exact: 1.5,
            },
            ResultRow {
                coords: vec![0.3, 0.4],
                predicted: -2.0,
                exact: 0.1,
            },
        ];
        let names = vec!["x".to_string(), "y".to_string()];
        let text = results_csv(&names, &rows);
        assert!(text.starts_with("x,y,u_pred,u_exact,abs_err\n"));
        assert_eq!(parse_results_csv(&text).unwrap(), (names, rows));
    }
}
