use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cascade_cli::config::Overrides;
use cascade_cli::{run, CliError, Command, Invocation};

#[derive(Parser)]
#[command(name = "cascade", version, about = "Cascade wave-system experiments")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Integrate the free system and write the energy ledger.
    Simulate(Common),
    /// Record an observation of the free system.
    Observe(Common),
    /// Monte Carlo estimate of observability constants over horizons.
    #[command(name = "sweep-T")]
    SweepT(Common),
    /// Synthesize a control by the Hilbert Uniqueness Method.
    Hum(Common),
    /// Assemble the dense Gramian and report its spectrum.
    Gramian(Common),
    /// Check coefficient compatibility and truncation stability.
    CheckCoeff(Common),
    /// Simultaneous control of three parallel equations.
    Simultaneous(Common),
    /// Insensitizing control for a local energy functional.
    Insensitize(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; all cores by default.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    modes: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, common) = match cli.command {
        Sub::Simulate(c) => (Command::Simulate, c),
        Sub::Observe(c) => (Command::Observe, c),
        Sub::SweepT(c) => (Command::SweepT, c),
        Sub::Hum(c) => (Command::Hum, c),
        Sub::Gramian(c) => (Command::Gramian, c),
        Sub::CheckCoeff(c) => (Command::CheckCoeff, c),
        Sub::Simultaneous(c) => (Command::Simultaneous, c),
        Sub::Insensitize(c) => (Command::Insensitize, c),
    };
    if common.threads == Some(0) {
        return fail(CliError::Input("--threads must be positive".into()));
    }
    let inv = Invocation {
        command,
        config: common.config,
        out: common.out,
        threads: common.threads,
        overrides: Overrides { seed: common.seed, dt: common.dt, modes: common.modes },
    };
    match run(&inv) {
        Ok(o) if o.success => ExitCode::SUCCESS,
        Ok(_) => {
            eprintln!("error: numerical failure, see {}", inv.out.join("manifest.json").display());
            ExitCode::from(3)
        }
        Err(e) => fail(e),
    }
}

fn fail(e: CliError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}
