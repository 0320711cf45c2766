//! `bnnpn`: generate, simulate, verify, compare and analyze BNN training nets.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

mod commands;

/// Exit codes shared by every verb.
pub mod exit {
    pub const OK: u8 = 0;
    pub const FAILED: u8 = 1;
    pub const INCONCLUSIVE: u8 = 2;
    pub const INPUT: u8 = 3;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Native,
    Pnml,
    Dot,
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TierArg {
    Segment,
    Component,
    System,
}

#[derive(Debug, Parser)]
#[command(name = "bnnpn", version, about = "Binarized neural network training as a 1-safe Petri net")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, clap::Args)]
pub struct Common {
    /// TOML configuration; the built-in XOR setup when omitted.
    pub config: Option<PathBuf>,
    /// Override the run seed(s) with a single seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the number of epochs.
    #[arg(long)]
    pub epochs: Option<u32>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Output file or directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the composed training net.
    Generate(Common),
    /// Run the net and write per-cycle metrics (CSV and JSON).
    Simulate(Common),
    /// Run a verification tier, or check a native net file under a closed
    /// environment.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "segment")]
        tier: TierArg,
    },
    /// Replay the net against the reference trainer, cycle by cycle.
    Compare(Common),
    /// Size tables and complexity estimates.
    Analyze {
        #[command(flatten)]
        common: Common,
        /// Extra architecture as `NAME:INPUTS:L1,L2,...`.
        #[arg(long = "arch")]
        archs: Vec<String>,
    },
    /// Convert a native net file to another format.
    Export {
        /// Native net file.
        net: PathBuf,
        #[arg(long, value_enum, default_value = "pnml")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::error_code(&e))
        }
    }
}
