//! Executes a run and writes its artifacts.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use log::info;
use pinn_core::optimizer::TrainStatus;
use pinn_core::problems::{
    inversion_history_csv, results_csv, solve, MetricsSummary, Mode, ProblemKind, ResultRow, Solution,
};

use crate::config::{serialize_config, PlotFormat, RunConfig};
use crate::plot;

pub const CONFIG_FILE: &str = "config.txt";
pub const TRAIN_LOG_FILE: &str = "train_log.csv";
pub const RESULTS_FILE: &str = "results.csv";
pub const METRICS_FILE: &str = "metrics.txt";
pub const PARAMS_FILE: &str = "params.txt";
pub const HISTORY_FILE: &str = "inversion_history.csv";

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub status: TrainStatus,
    pub summary: MetricsSummary,
}

/// Default run directory below `root`.
pub fn default_dir(root: &Path, config: &RunConfig) -> PathBuf {
    let def = &config.problem;
    root.join(format!("{}-{}-seed{}", def.kind, def.mode, def.train.seed))
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

/// Trains the configured problem and writes all artifacts into `dir`.
pub fn execute(config: &RunConfig, dir: &Path) -> Result<RunOutcome> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    write(dir, CONFIG_FILE, &serialize_config(config))?;
    let def = &config.problem;
    info!("running {} {} into {}", def.kind, def.mode, dir.display());
    let sol = solve(def)?;

    write(dir, TRAIN_LOG_FILE, &sol.report.training_log_csv())?;
    let names = def.input_names();
    for (k, (region, _, rows)) in sol.regions.iter().enumerate() {
        let file = if k == 0 {
            RESULTS_FILE.to_string()
        } else {
            format!("results_{region}.csv")
        };
        write(dir, &file, &results_csv(&names, rows))?;
    }
    write(dir, METRICS_FILE, &sol.summary.to_text())?;
    write(dir, PARAMS_FILE, &sol.store.to_text())?;
    if def.mode == Mode::Inverse {
        write(dir, HISTORY_FILE, &inversion_history_csv(&sol.report))?;
    }
    if config.output.plots {
        match config.output.plot_format {
            PlotFormat::Png => draw_plots(&sol, def.kind, def.mode, dir)?,
            PlotFormat::Script => write(dir, "plot.py", plot::SCRIPT)?,
        }
    }
    for (name, m) in &sol.summary.regions {
        info!("{name}: rel-L2 {:.3e}, max-abs {:.3e}", m.rel_l2, m.max_abs);
    }
    for (name, v) in &sol.summary.physical {
        info!("{name} = {v}");
    }
    Ok(RunOutcome {
        dir: dir.to_path_buf(),
        status: sol.report.status,
        summary: sol.summary,
    })
}

fn save(img: &image::RgbImage, dir: &Path, name: &str) -> Result<()> {
    let path = dir.join(name);
    plot::save(img, &path).with_context(|| format!("writing {}", path.display()))
}

// Rows on a square spatial grid (x slowest), as produced for slices.
fn side(rows: &[ResultRow]) -> usize {
    (rows.len() as f64).sqrt().round() as usize
}

fn draw_plots(sol: &Solution, kind: ProblemKind, mode: Mode, dir: &Path) -> Result<()> {
    let region = |name: &str| sol.regions.iter().find(|(n, _, _)| n == name).map(|(_, _, rows)| rows);
    match kind {
        ProblemKind::Membrane | ProblemKind::Plate | ProblemKind::Laplace => {
            let rows = if kind == ProblemKind::Laplace {
                region("window")
            } else {
                region("slice")
            }
            .context("missing plot region")?;
            let n = side(rows);
            let field = |f: &dyn Fn(&ResultRow) -> f64| rows.iter().map(f).collect::<Vec<f64>>();
            let pred = field(&|r| r.predicted);
            let exact = field(&|r| r.exact);
            let err = field(&|r| (r.predicted - r.exact).abs());
            save(&plot::heatmap(&pred, n, n, 8, true), dir, "predicted.png")?;
            save(&plot::heatmap(&exact, n, n, 8, true), dir, "exact.png")?;
            save(&plot::heatmap(&err, n, n, 8, false), dir, "abs_error.png")?;
        }
        _ => {
            let mut rows: Vec<&ResultRow> = Vec::new();
            for (_, _, r) in &sol.regions {
                rows.extend(r.iter());
            }
            let pred: Vec<(f64, f64)> = rows.iter().map(|r| (r.coords[0], r.predicted)).collect();
            let exact: Vec<(f64, f64)> = rows.iter().map(|r| (r.coords[0], r.exact)).collect();
            save(&plot::line_plot(&[&pred, &exact], 800, 400), dir, "prediction.png")?;
        }
    }
    if mode == Mode::Inverse {
        let series: Vec<Vec<(f64, f64)>> = (0..sol.report.physical_names.len())
            .map(|k| {
                sol.report
                    .history
                    .iter()
                    .map(|rec| (rec.epoch as f64, rec.physical[k]))
                    .collect()
            })
            .collect();
        let refs: Vec<&[(f64, f64)]> = series.iter().map(Vec::as_slice).collect();
        save(&plot::line_plot(&refs, 800, 400), dir, "inversion_history.png")?;
    }
    Ok(())
}
