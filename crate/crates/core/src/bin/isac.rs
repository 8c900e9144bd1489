//! Command-line front end for running experiment configs.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use isac::harness::{self, ExperimentKind, RunOverrides};
use isac::Error;

#[derive(Parser)]
#[command(name = "isac", version, about = "Sensing experiments with random communication signals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config and write its outputs and manifest.
    Run {
        config: PathBuf,
        /// Output directory, overriding the config's `output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Root seed, overriding the config's `seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check a config without running it.
    Validate { config: PathBuf },
    /// List the available experiments.
    ListExperiments,
}

const EXIT_FAILURE: u8 = 1;
const EXIT_INVALID_CONFIG: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_NOT_CONVERGED: u8 = 4;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => EXIT_INVALID_CONFIG,
        Error::Infeasible(_) | Error::RateInfeasible { .. } => EXIT_INFEASIBLE,
        Error::NotConverged { .. } => EXIT_NOT_CONVERGED,
        _ => EXIT_FAILURE,
    }
}

fn configure_threads() {
    let Ok(v) = std::env::var("ISAC_THREADS") else { return };
    match v.trim().parse::<usize>() {
        Ok(n) if n > 0 => {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                eprintln!("warning: could not size thread pool: {e}");
            }
        }
        _ => eprintln!("warning: ignoring ISAC_THREADS={v:?} (expected a positive integer)"),
    }
}

fn read(path: &PathBuf) -> Result<String, ExitCode> {
    std::fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", path.display());
        ExitCode::from(EXIT_INVALID_CONFIG)
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads();
    match cli.command {
        Command::ListExperiments => {
            for k in ExperimentKind::ALL {
                println!("{:<14} {}", k.name(), k.summary());
            }
            ExitCode::SUCCESS
        }
        Command::Validate { config } => {
            let text = match read(&config) {
                Ok(t) => t,
                Err(c) => return c,
            };
            let diags = harness::validate(&text);
            if diags.is_empty() {
                println!("ok");
                ExitCode::SUCCESS
            } else {
                for d in &diags {
                    println!("{d}");
                }
                ExitCode::from(EXIT_INVALID_CONFIG)
            }
        }
        Command::Run { config, out, seed } => {
            let text = match read(&config) {
                Ok(t) => t,
                Err(c) => return c,
            };
            match harness::run_text(&text, &RunOverrides { output_dir: out, seed }) {
                Ok(report) => {
                    for o in &report.manifest.outputs {
                        println!("{}", report.output_dir.join(&o.path).display());
                    }
                    if report.manifest.converged {
                        ExitCode::SUCCESS
                    } else {
                        eprintln!("warning: an iterative solver stopped at its iteration limit");
                        ExitCode::from(EXIT_NOT_CONVERGED)
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(exit_code(&e))
                }
            }
        }
    }
}
