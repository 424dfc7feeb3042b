//! `powerborrow`: power-prior analysis from the command line.
//!
//! Exit codes: 0 success, 1 failed check, 2 invalid input, 3 I/O error.

mod commands;
mod error;
mod input;

use clap::{Parser, Subcommand};

use commands::{
    BernoulliArgs, DeltaPosteriorArgs, FeasibleArgs, OracleArgs, PosteriorArgs, ProfileArgs, SelectArgs,
    Study,
};

#[derive(Debug, Parser)]
#[command(name = "powerborrow", version, about = "Power priors for normal linear models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the feasible set of δ as JSON.
    Feasible(FeasibleArgs),
    /// Select δ and summarize the posterior there.
    Select(SelectArgs),
    /// Tabulate a selection criterion over δ.
    Profile(ProfileArgs),
    /// Conjugate posterior at a fixed δ.
    Posterior(PosteriorArgs),
    /// Posterior of δ under the normalized power prior with a uniform prior on δ.
    DeltaPosterior(DeltaPosteriorArgs),
    /// Run a simulation study and write CSV and JSON results.
    #[command(subcommand)]
    Simulate(Study),
    /// Compare the closed forms with brute-force oracles.
    OracleCheck(OracleArgs),
    /// Likelihood-principle table for the Bernoulli example.
    BernoulliDemo(BernoulliArgs),
}

fn main() {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Feasible(a) => commands::feasible(a),
        Command::Select(a) => commands::select(a),
        Command::Profile(a) => commands::profile(a),
        Command::Posterior(a) => commands::posterior_cmd(a),
        Command::DeltaPosterior(a) => commands::delta_posterior(a),
        Command::Simulate(s) => commands::simulate(s),
        Command::OracleCheck(a) => commands::oracle_check(a),
        Command::BernoulliDemo(a) => commands::bernoulli_demo(a),
    };
    if let Err(e) = result {
        eprintln!("powerborrow: {e}");
        std::process::exit(e.exit_code());
    }
}
