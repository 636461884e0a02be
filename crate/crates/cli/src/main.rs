//! `cuedr`: run the authentication service, author and check portfolio
//! packs, and run attack simulations.

mod attack;
mod output;
mod pack;
mod report;
mod serve;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "cuedr",
    version,
    about = "Cued-recognition authentication service and tools"
)]
struct Cli {
    /// Write machine-readable JSON to stdout instead of tables.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP service.
    Serve {
        /// TOML configuration file; defaults to $CUEDR_CONFIG when set.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Check a pack directory; exits 1 if anything is wrong.
    Validate(pack::ValidateArgs),
    /// Password-space size and online-guess odds for (k, m).
    EntropyReport(report::EntropyArgs),
    /// Time the key-derivation function.
    KdfBench(report::BenchArgs),
    /// Write a synthetic pack with placeholder cues.
    GenerateFixture(pack::FixtureArgs),
    /// Validate a pack locally, then upload it to a running service.
    Import(pack::ImportArgs),
    /// Attack simulations.
    Attack {
        #[command(subcommand)]
        command: attack::AttackCommand,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = output::Output { json: cli.json };
    let result = match cli.command {
        Command::Serve { config } => serve::run(config, cli.json),
        Command::Validate(args) => pack::validate(args, &out),
        Command::EntropyReport(args) => report::entropy(args, &out),
        Command::KdfBench(args) => report::kdf_bench(args, &out),
        Command::GenerateFixture(args) => pack::generate_fixture(args, &out),
        Command::Import(args) => pack::import(args, &out),
        Command::Attack { command } => attack::run(command, &out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

pub(crate) type CmdResult = Result<ExitCode, Box<dyn std::error::Error>>;
