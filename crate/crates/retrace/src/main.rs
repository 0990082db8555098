//! Command-line front end for the pipeline.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use retrace::config::RunConfig;
use retrace::driver::{self, Paths};
use retrace::error::PipelineError;

#[derive(Parser)]
#[command(
    name = "retrace",
    version,
    about = "Self-improvement data pipeline for step-by-step reasoning tasks"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the full pipeline described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the output directory from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Resume an interrupted run directory.
    Resume { dir: PathBuf },
    /// Generate task instances and evaluate the untrained student.
    Gen {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Collect edited trajectories for one iteration.
    Edit {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        iteration: u32,
    },
    /// Split, filter, rebalance, and emit the dataset for one iteration.
    Postprocess {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        iteration: u32,
    },
    /// Apply the training update for one iteration.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        iteration: u32,
    },
    /// Evaluate the student after an iteration (0 = untrained baseline).
    Metrics {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        iteration: u32,
    },
    /// Run the pipeline once per improvement-share target and collect a CSV.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated share targets, e.g. 0.05,0.2,0.43.
        #[arg(long, value_delimiter = ',')]
        targets: Vec<f64>,
    },
}

fn load_cfg(config: &Path, out: Option<PathBuf>) -> retrace::Result<RunConfig> {
    let mut cfg = RunConfig::load(config)?;
    if let Some(o) = out {
        cfg.out_dir = o;
    }
    Ok(cfg)
}

fn check_iteration(cfg: &RunConfig, t: u32, floor: u32) -> retrace::Result<()> {
    if t < floor || t > cfg.iterations {
        return Err(PipelineError::Parameter(format!(
            "iteration {t} is outside {floor}..={}",
            cfg.iterations
        )));
    }
    Ok(())
}

fn print_report(dir: &Path, t: u32) {
    if let Ok(text) = std::fs::read_to_string(Paths::new(dir).report_txt(t)) {
        println!("{text}");
    }
}

fn real_main() -> retrace::Result<()> {
    match Cli::parse().cmd {
        Cmd::Run { config, out } => {
            let cfg = load_cfg(&config, out)?;
            let outcome = driver::run(&cfg)?;
            print_report(&cfg.out_dir, outcome.last_eval);
            println!("run complete through eval_{}; artifacts in {}", outcome.last_eval, cfg.out_dir.display());
        }
        Cmd::Resume { dir } => {
            let outcome = driver::resume(&dir)?;
            print_report(&dir, outcome.last_eval);
            println!("run complete through eval_{}; artifacts in {}", outcome.last_eval, dir.display());
        }
        Cmd::Gen { config, out } => {
            let cfg = load_cfg(&config, out)?;
            driver::run_until(&cfg, Some("eval_0"))?;
            print_report(&cfg.out_dir, 0);
            println!("instances and baseline written to {}", cfg.out_dir.display());
        }
        Cmd::Edit { config, out, iteration } => {
            let cfg = load_cfg(&config, out)?;
            check_iteration(&cfg, iteration, 1)?;
            driver::run_until(&cfg, Some(&format!("traj_{iteration}")))?;
            println!("trajectories written to {}", Paths::new(&cfg.out_dir).trajectories(iteration).display());
        }
        Cmd::Postprocess { config, out, iteration } => {
            let cfg = load_cfg(&config, out)?;
            check_iteration(&cfg, iteration, 1)?;
            driver::run_until(&cfg, Some(&format!("post_{iteration}")))?;
            println!("dataset written to {}", Paths::new(&cfg.out_dir).dataset(iteration).display());
        }
        Cmd::Train { config, out, iteration } => {
            let cfg = load_cfg(&config, out)?;
            check_iteration(&cfg, iteration, 1)?;
            driver::run_until(&cfg, Some(&format!("train_{iteration}")))?;
            println!("profile written to {}", Paths::new(&cfg.out_dir).profile(iteration).display());
        }
        Cmd::Metrics { config, out, iteration } => {
            let cfg = load_cfg(&config, out)?;
            check_iteration(&cfg, iteration, 0)?;
            driver::run_until(&cfg, Some(&format!("eval_{iteration}")))?;
            print_report(&cfg.out_dir, iteration);
        }
        Cmd::Sweep { config, out, targets } => {
            let cfg = load_cfg(&config, out)?;
            if targets.is_empty() {
                return Err(PipelineError::Parameter("sweep needs at least one target".into()));
            }
            driver::sweep(&cfg, &targets)?;
            println!("sweep results in {}", cfg.out_dir.join("sweep.csv").display());
        }
    }
    Ok(())
}

fn main() {
    if let Err(e) = real_main() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
