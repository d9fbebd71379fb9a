use clap::{Parser, Subcommand};
use flockcert_cli::commands::{
    cmd_certify, cmd_ic_gen, cmd_simulate, cmd_sweep, CertifyArgs, IcGenArgs, SimulateArgs,
    SweepArgs,
};

/// Controlled Cucker-Smale flocking: simulations, consensus certificates and
/// consensus-probability sweeps.
///
/// Exit codes: 0 success or certificate holds, 1 certificate fails,
/// 2 usage or configuration error, 3 numerical failure.
#[derive(Debug, Parser)]
#[command(name = "flockcert", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate one configuration and write its trajectory.
    Simulate(SimulateArgs),
    /// Evaluate the consensus certificate for one (X0, V0) query.
    Certify(CertifyArgs),
    /// Monte-Carlo consensus probabilities over an (X0, V0) grid.
    Sweep(SweepArgs),
    /// Emit a seeded, optionally rescaled initial condition as CSV.
    IcGen(IcGenArgs),
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Certify(a) => cmd_certify(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::IcGen(a) => cmd_ic_gen(a),
    };
    match result {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("flockcert: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
