use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rsplab_cli::{cmd_curve, cmd_map, cmd_qkd, cmd_verify, emit, exit_code, CliError, ConfigFile, RunConfig};

#[derive(Parser)]
#[command(name = "rsplab", version, about = "Remote state preparation with weak coherent pulses")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// CSV destination; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Fock cutoff for oracle runs (verify, qkd).
    #[arg(long, global = true)]
    cutoff: Option<usize>,
    /// Seed for randomized verification tuples.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 0 picks one per core.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Fidelity and rate of each protocol along an |alpha|^2 grid.
    Curve,
    /// Best protocol per cell of a two-parameter grid.
    Map,
    /// Oracle against closed forms on seeded random parameters.
    Verify,
    /// Purified key-distribution chains.
    Qkd,
}

fn run(cli: &Cli) -> Result<i32, CliError> {
    let file = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let run = RunConfig { file, out: cli.out.clone(), cutoff: cli.cutoff, seed: cli.seed, jobs: cli.jobs };
    let report = match cli.command {
        Command::Curve => cmd_curve(&run)?,
        Command::Map => cmd_map(&run)?,
        Command::Verify => cmd_verify(&run)?,
        Command::Qkd => cmd_qkd(&run)?,
    };
    emit(&report, run.out.as_deref())?;
    eprintln!("{}", report.summary);
    Ok(exit_code(&report))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("rsplab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
