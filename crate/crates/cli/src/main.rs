//! `qinstrument`: validate, dilate and simulate quantum instruments from JSON files.
//!
//! The report goes to stdout as JSON, a short summary to stderr. Exit codes:
//! 0 when every check passes, 1 on a semantic failure, 2 on an I/O or parse
//! failure.

mod commands;
mod input;
mod report;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use report::{Exit, Failure, Report};

#[derive(Parser)]
#[command(name = "qinstrument", version, about = "Check, dilate and simulate quantum instruments")]
struct Cli {
    /// Numerical tolerance for every check.
    #[arg(long, global = true, default_value_t = 1e-9)]
    tol: f64,

    /// Seed for sampling and randomized checks.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Number of simulated runs (simulate).
    #[arg(long, global = true, default_value_t = 10_000)]
    shots: usize,

    /// Number of random mixtures tried (mlpd).
    #[arg(long, global = true, default_value_t = 100)]
    trials: usize,

    /// Output file for the constructed object (povm, dilate).
    #[arg(short = 'o', global = true)]
    output: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate any supported file: instrument, apparatus, observable, POVM, state family, model or state.
    Check { file: PathBuf },
    /// Extract the POVM of an instrument.
    Povm { instrument: PathBuf },
    /// Build an indirect measurement model realizing a CP instrument.
    Dilate { instrument: PathBuf },
    /// Sample successive measurements and compare with the exact joint distribution.
    Simulate {
        #[arg(required = true)]
        instruments: Vec<PathBuf>,
        #[arg(long)]
        state: PathBuf,
    },
    /// Exact joint outcome distribution of successive measurements.
    Joint {
        #[arg(required = true)]
        instruments: Vec<PathBuf>,
        #[arg(long)]
        state: PathBuf,
    },
    /// Test the mixing law on random mixtures of input states.
    Mlpd {
        #[arg(required = true)]
        instruments: Vec<PathBuf>,
    },
}

fn run(cli: &Cli) -> Result<Report, Failure> {
    if !(cli.tol.is_finite() && cli.tol >= 0.0) {
        return Err(Failure::semantic(format!("--tol must be a nonnegative number, got {}", cli.tol)));
    }
    let out = cli.output.as_deref();
    match &cli.command {
        Command::Check { file } => commands::check(file, cli.tol, cli.seed),
        Command::Povm { instrument } => commands::povm(instrument, out, cli.tol),
        Command::Dilate { instrument } => commands::dilate_cmd(instrument, out, cli.tol),
        Command::Simulate { instruments, state } => commands::simulate(instruments, state, cli.shots, cli.seed),
        Command::Joint { instruments, state } => commands::joint(instruments, state, cli.tol),
        Command::Mlpd { instruments } => commands::mlpd(instruments, cli.trials, cli.seed, cli.tol),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            let code = if e.use_stderr() { Exit::Input } else { Exit::Pass };
            return ExitCode::from(code as u8);
        }
    };
    let mut stderr = std::io::stderr();
    let exit = match run(&cli) {
        Ok(report) => {
            let mut stdout = std::io::stdout().lock();
            if stdout.write_all(report.to_json().as_bytes()).and_then(|_| stdout.flush()).is_err() {
                return ExitCode::from(Exit::Input as u8);
            }
            report.summarize(&mut stderr);
            if let Some(msg) = report.payload.as_ref().and_then(|p| p.get("error")).and_then(|e| e.as_str()) {
                let _ = writeln!(stderr, "error: {msg}");
            }
            report.exit()
        }
        Err(failure) => {
            let _ = writeln!(stderr, "error: {failure}");
            failure.exit
        }
    };
    ExitCode::from(exit as u8)
}
