//! Command-line front end for declarative experiment files.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use causim::config::Profile;
use causim::runner::{explain_file, run_file, validate_file, Overrides};

#[derive(Parser)]
#[command(
    name = "causim",
    version,
    about = "Plan and run simulation experiments as causal interventions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment file (TOML, schema version 1)
    file: PathBuf,
    /// full = as configured; fast = replications capped at 500
    #[arg(long, value_parser = parse_profile)]
    profile: Option<Profile>,
    /// Override the run seed
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: the file's run.out, else ./results)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (results are invariant to this)
    #[arg(long)]
    threads: Option<usize>,
}

fn parse_profile(s: &str) -> Result<Profile, String> {
    match s {
        "full" => Ok(Profile::Full),
        "fast" => Ok(Profile::Fast),
        other => Err(format!("unknown profile {other} (expected full or fast)")),
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check a file against the schema and all feasibility constraints
    Validate { file: PathBuf },
    /// Validate, execute, and write CSV/JSON results plus a summary table
    Run(RunArgs),
    /// Alias for run, for files whose workload is parameter sweeps
    Sweep(RunArgs),
    /// Print treatment-to-outcome path classifications and blocking sets
    Explain {
        file: PathBuf,
        /// Inspect one diagram node instead of the file's arms
        #[arg(long)]
        node: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Validate { file } => match validate_file(&file) {
            Ok(Ok(_)) => {
                println!("ok: {} validates clean", file.display());
                ExitCode::SUCCESS
            }
            Ok(Err(diags)) => {
                for d in diags {
                    eprintln!("error: {d}");
                }
                ExitCode::FAILURE
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::FAILURE
            }
        },
        Command::Run(args) | Command::Sweep(args) => {
            let overrides = Overrides {
                seed: args.seed,
                out: args.out,
                profile: args.profile,
                threads: args.threads,
            };
            match run_file(&args.file, &overrides) {
                Ok(artifacts) => {
                    print!("{}", artifacts.summary);
                    println!(
                        "wrote {} file(s) to {}",
                        artifacts.files.len(),
                        artifacts.out_dir.display()
                    );
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::FAILURE
                }
            }
        }
        Command::Explain { file, node } => match explain_file(&file, node.as_deref()) {
            Ok(text) => {
                print!("{text}");
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::FAILURE
            }
        },
    }
}
