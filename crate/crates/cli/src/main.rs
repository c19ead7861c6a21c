//! `gpdi`: batch pipeline from survey responses to diversity indices,
//! distribution tests, clusterings and regression ladders.

mod config;
mod error;
mod output;
mod panels;
mod stages;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{Flags, RunConfig};
use error::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "gpdi", version, about = "Personality diversity analytics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Per-group similarity digests and diversity indices.
    Gpdi(Flags),
    /// Pairwise two-sample KS tests between group similarity distributions.
    Ks(Flags),
    /// Cross-country and in-country hierarchical clustering.
    Cluster(Flags),
    /// Regression ladder of covariates on the per-country index.
    Regress(Flags),
    /// Consolidated JSON bundle of all stages.
    Report(Flags),
    /// Check config and inputs, and verify manifests of existing stages.
    Validate(Flags),
}

fn execute(cmd: Command) -> CliResult<()> {
    let (flags, stage): (&Flags, fn(&RunConfig) -> CliResult<std::path::PathBuf>) = match &cmd {
        Command::Gpdi(f) => (f, stages::gpdi::run),
        Command::Ks(f) => (f, stages::ks::run),
        Command::Cluster(f) => (f, stages::cluster::run),
        Command::Regress(f) => (f, stages::regress::run),
        Command::Report(f) => (f, stages::report::run),
        Command::Validate(f) => {
            let cfg = RunConfig::resolve(f)?;
            let summary = stages::validate::run(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
            return Ok(());
        }
    };
    let cfg = RunConfig::resolve(flags)?;
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Io(e.to_string()))?;
    }
    let dir = stage(&cfg)?;
    println!("{}", dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
