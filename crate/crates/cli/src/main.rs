//! Command line front end: generate datasets, run clusterings, compare
//! them, check planted structure and benchmark against the baseline.
//!
//! Log verbosity comes from `RUST_LOG` (default `warn`).

mod bench;
mod cluster;
mod eval;
mod gen;
mod verify;

use clap::{Parser, Subcommand};

/// Exit code for a run that finished but declined to output a clustering.
/// Distinct from 1 so scripts can tell "no answer" from failure.
pub const EXIT_NO_CLUSTER: i32 = 2;

#[derive(Parser)]
#[command(
    name = "lmclust",
    version,
    about = "Clustering with a small budget of one-versus-all distance queries"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset with known labels
    Gen(gen::GenArgs),
    /// Cluster an input file and write the assignment
    Cluster(cluster::ClusterArgs),
    /// Compare a predicted clustering against a reference one
    Eval(eval::EvalArgs),
    /// Check the core/outlier structure of a small dataset exhaustively
    Verify(verify::VerifyArgs),
    /// Run paired landmark-versus-baseline trials and print CSV
    Bench(bench::BenchArgs),
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Gen(args) => gen::run(args),
        Command::Cluster(args) => cluster::run(args),
        Command::Eval(args) => eval::run(args),
        Command::Verify(args) => verify::run(args),
        Command::Bench(args) => bench::run(args),
    };
    match outcome {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(1);
        }
    }
}
