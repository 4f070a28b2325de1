use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tdqas::config::load_config;
use tdqas::runner::{execute, Command, RunError};

#[derive(Parser)]
#[command(name = "tdqas", version, about = "Quantum-assisted simulation of time-dependent Hamiltonians")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evolve the hybrid ansatz and write observable traces.
    Simulate(Common),
    /// Run the ansatz alongside exact, Trotter and VQS baselines.
    Compare(Common),
    /// Report the operator closure and basis growth.
    Closure(Common),
    /// Evolve an open system under the configured jump operators.
    Lindblad(Common),
    /// Dump the overlap matrices.
    Overlaps(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overriding `output.path`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn run(command: Command, args: &Common) -> Result<(), RunError> {
    let mut spec = load_config(&args.config)?;
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let out = args.out.clone().unwrap_or_else(|| PathBuf::from(&spec.output.path));
    let outcome = execute(command, &spec, &out)?;
    for f in &outcome.files {
        println!("{}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match &cli.command {
        Cmd::Simulate(a) => (Command::Simulate, a),
        Cmd::Compare(a) => (Command::Compare, a),
        Cmd::Closure(a) => (Command::Closure, a),
        Cmd::Lindblad(a) => (Command::Lindblad, a),
        Cmd::Overlaps(a) => (Command::Overlaps, a),
    };
    match run(command, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
