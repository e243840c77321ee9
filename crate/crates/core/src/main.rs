use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use junction_lab::cli;

/// Batch front end of the thick-junction Signorini laboratory.
#[derive(Parser)]
#[command(name = "junction-lab", version, about)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the junction problem for the configured rod count.
    SolveEps {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides run.output_dir).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve the homogenized limit problem.
    SolveLimit {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep the rod count and write the convergence report.
    Converge {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the rod-side integral identity for the configured fields.
    IdentityCheck {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the 2D limit solve against the 1D transmission oracle.
    OracleCompare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let args = Args::parse();
    let code = match &args.command {
        Command::SolveEps { config, out } => cli::cmd_solve_eps(config, out.as_deref()),
        Command::SolveLimit { config, out } => cli::cmd_solve_limit(config, out.as_deref()),
        Command::Converge { config, out } => cli::cmd_converge(config, out.as_deref()),
        Command::IdentityCheck { config, out } => cli::cmd_identity_check(config, out.as_deref()),
        Command::OracleCompare { config, out } => cli::cmd_oracle_compare(config, out.as_deref()),
    };
    ExitCode::from(code as u8)
}
