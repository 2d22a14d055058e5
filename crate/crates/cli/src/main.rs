use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use log::{error, info};

use pinn_cli::compare::{compare_dirs, to_csv, to_table};
use pinn_cli::config::{parse_config, RunConfig};
use pinn_cli::presets::{preset, PRESET_NAMES};
use pinn_cli::run::{default_dir, execute, RunOutcome};
use pinn_cli::{exit_code, OUTPUT_ROOT_VAR};

#[derive(Parser)]
#[command(
    name = "pinn",
    version,
    about = "Physics-informed neural networks for vibration problems"
)]
struct Cli {
    /// Override the training seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the problem described by a config file.
    Run { config: PathBuf },
    /// Run a named experiment preset.
    Reproduce {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(PRESET_NAMES))]
        preset: String,
    },
    /// Compare the metrics of two finished runs.
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// Directory for comparison.txt and comparison.csv (default: output root).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_VAR).map_or_else(|| PathBuf::from("runs"), PathBuf::from)
}

fn apply_seed(config: &mut RunConfig, seed: Option<u64>) {
    if let Some(s) = seed {
        config.problem.train.seed = s;
    }
}

fn write_comparison(a: &Path, b: &Path, out: &Path) -> Result<()> {
    let rows = compare_dirs(a, b)?;
    let table = to_table(&rows);
    print!("{table}");
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    fs::write(out.join("comparison.txt"), &table).context("writing comparison.txt")?;
    fs::write(out.join("comparison.csv"), to_csv(&rows)).context("writing comparison.csv")?;
    Ok(())
}

fn report(outcome: &RunOutcome) {
    info!("{}: {}", outcome.dir.display(), outcome.summary.status);
}

fn dispatch(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Run { config } => {
            let text = fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
            let mut cfg = parse_config(&text).with_context(|| format!("in {}", config.display()))?;
            apply_seed(&mut cfg, cli.seed);
            let dir = cfg
                .output
                .dir
                .clone()
                .unwrap_or_else(|| default_dir(&output_root(), &cfg));
            let outcome = execute(&cfg, &dir)?;
            report(&outcome);
            Ok(exit_code(outcome.status))
        }
        Command::Reproduce { preset: name } => {
            let p = preset(&name).context("unknown preset")?;
            let base = output_root().join(p.name);
            let mut code = 0;
            let mut dirs = Vec::new();
            for (sub, mut cfg) in p.runs {
                apply_seed(&mut cfg, cli.seed);
                let dir = if sub.is_empty() { base.clone() } else { base.join(sub) };
                let outcome = execute(&cfg, &dir)?;
                report(&outcome);
                code = code.max(exit_code(outcome.status));
                dirs.push(dir);
            }
            if let Some((i, j)) = p.compare {
                write_comparison(&dirs[i], &dirs[j], &base)?;
            }
            Ok(code)
        }
        Command::Compare { a, b, out } => {
            write_comparison(&a, &b, &out.unwrap_or_else(output_root))?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            error!("{e:#}");
            ExitCode::from(1)
        }
    }
}
