use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand, ValueEnum};
use setobs_cli::{batch, batch_configs, batch_status, run, run_status, verify, verify_status};
use setobs_cli::{FileConfig, Overrides, RunConfig, Status};

#[derive(Parser)]
#[command(
    name = "setobs",
    version,
    about = "Adaptive set observers for LPV systems with fault indicators"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum OnOff {
    On,
    Off,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write trace.csv, report.json/.txt and plots.
    Run {
        #[arg(long)]
        scenario: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        noise: Option<OnOff>,
        #[arg(long)]
        step: Option<f64>,
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write SVG plots next to the trace.
        #[arg(long)]
        plots: bool,
        /// Simulate even when Assumption 2 fails.
        #[arg(long)]
        force: bool,
    },
    /// Check Assumption 2 and summarize the scenario without simulating.
    Verify {
        #[arg(long)]
        scenario: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Print JSON instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Run every *.toml in a directory, one output subdirectory each.
    Batch {
        #[arg(long)]
        configs: PathBuf,
        #[arg(long, default_value = "batch-out")]
        out: PathBuf,
        /// Concurrent runs; defaults to the available parallelism.
        #[arg(long)]
        jobs: Option<usize>,
    },
}

fn load(config: Option<&PathBuf>) -> Result<FileConfig> {
    config
        .map(|p| FileConfig::load(p))
        .transpose()
        .map(Option::unwrap_or_default)
}

fn execute(cli: Cli) -> Result<Status> {
    match cli.command {
        Command::Run {
            scenario,
            config,
            seed,
            noise,
            step,
            horizon,
            out,
            plots,
            force,
        } => {
            let overrides = Overrides {
                scenario,
                seed,
                noise: noise.map(|n| matches!(n, OnOff::On)),
                step,
                horizon,
                out,
                plots,
                force,
            };
            let cfg = RunConfig::resolve(load(config.as_ref())?, overrides)?;
            let output = run(&cfg)?;
            println!("{}", output.report);
            println!("trace: {}", output.trace.display());
            for p in &output.plots {
                println!("plot: {}", p.display());
            }
            Ok(run_status(&output.report))
        }
        Command::Verify {
            scenario,
            config,
            json,
        } => {
            let cfg = RunConfig::resolve(
                load(config.as_ref())?,
                Overrides {
                    scenario,
                    ..Overrides::default()
                },
            )?;
            let report = verify(&cfg)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                println!("{report}");
            }
            Ok(verify_status(&report))
        }
        Command::Batch { configs, out, jobs } => {
            let paths = batch_configs(&configs)?;
            let workers =
                jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            let entries = batch(&paths, &out, workers);
            for e in &entries {
                match &e.result {
                    Ok(r) => println!(
                        "{}: {} ({:.2} s)",
                        e.config.display(),
                        if r.report.passed() {
                            "pass"
                        } else {
                            "checks failed"
                        },
                        r.report.wall_clock_s
                    ),
                    Err(err) => println!("{}: error: {err:#}", e.config.display()),
                }
            }
            batch_status(&entries)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(status) => ExitCode::from(status.exit_code()),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}
