use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use spinlight_cli::inspect::{self, KernelQuery};
use spinlight_cli::run::{self, RunOptions};
use spinlight_cli::{plot, Failure};

#[derive(Parser)]
#[command(name = "spinlight", version, about = "Stokes-fluctuation / collective-spin coupling in forward scattering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario file and print a JSON report.
    Validate { config: PathBuf },
    /// Run the variance sweeps of a scenario file.
    Run {
        config: PathBuf,
        /// Output directory (overrides the config).
        #[arg(long)]
        output: Option<PathBuf>,
        /// Worker threads.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Render SVG plots for every curve in a run directory.
    Plot { dir: PathBuf },
    /// Kernel evaluation.
    Kernels {
        #[command(subcommand)]
        command: KernelsCommand,
    },
    /// Coupling constants.
    Couplings {
        #[command(subcommand)]
        command: CouplingsCommand,
    },
}

#[derive(Subcommand)]
enum KernelsCommand {
    /// Print M, N, F, G at the given positions and times as JSON.
    Eval {
        config: PathBuf,
        /// Positions, e.g. `5mm`; repeatable.
        #[arg(long, required = true, num_args = 1..)]
        z: Vec<String>,
        /// Times, e.g. `0.2ms`; repeatable.
        #[arg(long, required = true, num_args = 1..)]
        t: Vec<String>,
        /// Restrict to one scenario (file stem of its curve).
        #[arg(long)]
        scenario: Option<String>,
        #[arg(long, default_value_t = 1.0)]
        beta_j: f64,
        /// Kernels integrated over the incident pulse.
        #[arg(long)]
        integrated: bool,
    },
}

#[derive(Subcommand)]
enum CouplingsCommand {
    /// Print the couplings of every scenario as JSON.
    Show { config: PathBuf },
}

fn print_json<T: serde::Serialize>(v: &T) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable"));
}

fn execute(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Validate { config } => {
            let report = inspect::validate(&config)?;
            print_json(&report);
            Ok(report.valid)
        }
        Command::Run { config, output, jobs } => {
            let m = run::run(&config, &RunOptions { output, jobs })?;
            for s in &m.scenarios {
                for w in &s.warnings {
                    eprintln!("warning: {}: {w}", s.slug);
                }
            }
            print_json(&m.files);
            Ok(true)
        }
        Command::Plot { dir } => {
            let written = plot::plot_dir(&dir).with_context(|| format!("plotting {}", dir.display()))?;
            for p in written {
                println!("{}", p.display());
            }
            Ok(true)
        }
        Command::Kernels {
            command: KernelsCommand::Eval { config, z, t, scenario, beta_j, integrated },
        } => {
            let q = KernelQuery { z, t, scenario, beta_j, integrated };
            print_json(&inspect::kernels(&config, &q)?);
            Ok(true)
        }
        Command::Couplings {
            command: CouplingsCommand::Show { config },
        } => {
            print_json(&inspect::couplings(&config)?);
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<Failure>().map_or(1, Failure::exit_code);
            ExitCode::from(code as u8)
        }
    }
}
