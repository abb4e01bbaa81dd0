use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use anyhow::Context;
use clap::{Parser, Subcommand};
use sfista_cli::config::{load_config, output_root};
use sfista_cli::experiment::{prepare, run_experiment, run_points, RunContext};

#[derive(Parser)]
#[command(name = "sfista", version, about = "Inexact scaled FISTA for Poisson deblurring")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Stop each run after this many seconds of wall-clock time.
    #[arg(long, global = true, value_name = "SECONDS")]
    time_budget: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the single configuration of the [solver] block.
    Run { config: PathBuf },
    /// Compute (or load from cache) the reference solution.
    Reference { config: PathBuf },
    /// Run every point of the [sweep] block.
    Sweep { config: PathBuf },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> anyhow::Result<ExitCode> {
    let cli = Cli::parse();
    let time_budget = match cli.time_budget {
        Some(s) if s > 0.0 && s.is_finite() => Some(Duration::from_secs_f64(s)),
        Some(s) => anyhow::bail!("--time-budget must be positive, got {s}"),
        None => None,
    };
    let path = match &cli.command {
        Command::Run { config } | Command::Reference { config } | Command::Sweep { config } => config,
    };
    let cfg = load_config(path).with_context(|| format!("loading {}", path.display()))?;
    let ctx = RunContext {
        root: output_root(path),
        time_budget,
    };

    let report = match cli.command {
        Command::Reference { .. } => {
            let (_, reference) = prepare(&cfg, &ctx)?;
            println!("F(x*) = {:e}", reference.objective);
            return Ok(ExitCode::SUCCESS);
        }
        Command::Run { .. } => run_points(&cfg, &ctx, &[cfg.single_point()])?,
        Command::Sweep { .. } => run_experiment(&cfg, &ctx)?,
    };

    for r in &report.runs {
        match &r.result {
            Ok((trace, _)) => println!(
                "{:<24} rel_error {:.3e}  {}",
                r.point.label(),
                trace.final_rel_error().unwrap_or(f64::NAN),
                r.csv.display()
            ),
            Err(e) => println!("{:<24} FAILED {e}", r.point.label()),
        }
    }
    println!("manifest: {}", report.manifest.display());
    Ok(if report.failures() == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}
