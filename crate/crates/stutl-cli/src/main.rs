use clap::{Parser, Subcommand};
use stutl_cli::commands::{
    run_compare, run_estimate, run_law, run_simulate, CompareArgs, EstimateArgs, LawArgs,
    SimulateArgs,
};

/// Student-t Levy regression models: increment-law tables, engine
/// comparison, path simulation and two-step quasi-likelihood estimation.
#[derive(Parser)]
#[command(name = "stutl", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate the increment law (density and CDF) as CSV.
    Law(LawArgs),
    /// Compare the three inversion engines against a closed form.
    CompareCdf(CompareArgs),
    /// Simulate covariate and response sample paths from a model config.
    Simulate(SimulateArgs),
    /// Fit (mu, sigma, nu) to a data CSV by the two-step estimator.
    Estimate(EstimateArgs),
}

fn main() {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Law(args) => run_law(args),
        Command::CompareCdf(args) => run_compare(args),
        Command::Simulate(args) => run_simulate(args),
        Command::Estimate(args) => run_estimate(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code);
    }
}
