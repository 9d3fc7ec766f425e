use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, ValueEnum};
use lmclust::metrics::{check_fmeasure_bound, clustering_dist, f_measure};
use lmclust::model::Clustering;

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Measure {
    Dist,
    Fmeasure,
    Both,
}

#[derive(Args)]
pub struct EvalArgs {
    /// Predicted clustering file
    #[arg(long)]
    pred: PathBuf,
    /// Reference clustering file
    #[arg(long)]
    truth: PathBuf,
    #[arg(long, value_enum, default_value = "both")]
    measure: Measure,
}

pub fn run(args: EvalArgs) -> anyhow::Result<i32> {
    let pred = Clustering::read_file(&args.pred, None)
        .with_context(|| format!("reading {}", args.pred.display()))?;
    let truth = Clustering::read_file(&args.truth, None)
        .with_context(|| format!("reading {}", args.truth.display()))?;
    match args.measure {
        Measure::Dist => {
            let result = clustering_dist(&pred, &truth)?;
            println!("dist={}", result.dist);
            Ok(0)
        }
        Measure::Fmeasure => {
            let f = f_measure(&pred, &truth)?;
            println!("fmeasure={f}");
            Ok(0)
        }
        Measure::Both => {
            // The f-measure is bounded below by 1 - 3*dist/2; a violation
            // means one of the two computations is broken, so it flips the
            // exit code.
            let check = check_fmeasure_bound(&pred, &truth)?;
            let verdict = if check.holds { "ok" } else { "VIOLATION" };
            println!(
                "dist={} fmeasure={} bound={verdict}",
                check.dist, check.fmeasure
            );
            Ok(if check.holds { 0 } else { 1 })
        }
    }
}
