use std::time::Instant;

use clap::Args;
use lmclust::baseline::baseline_cluster;
use lmclust::metrics::{clustering_dist, f_measure};
use lmclust::model::{Clustering, QueryLedger};
use lmclust::pipeline::{landmark_cluster_heuristic, landmark_cluster_theory, HeuristicOptions};
use lmclust::synth::generate;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::gen::{spec_for, Preset};

#[derive(Args)]
pub struct BenchArgs {
    #[arg(long, value_enum)]
    preset: Preset,
    /// Paired trials; the summary reports per-algorithm medians
    #[arg(long, default_value_t = 11)]
    trials: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Median of the finite values; NaN when none are finite.
fn median(values: &[f64]) -> f64 {
    let mut finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.is_empty() {
        return f64::NAN;
    }
    finite.sort_by(f64::total_cmp);
    let mid = finite.len() / 2;
    if finite.len() % 2 == 1 {
        finite[mid]
    } else {
        (finite[mid - 1] + finite[mid]) / 2.0
    }
}

fn scores(found: &Clustering, truth: &Clustering) -> anyhow::Result<(f64, f64)> {
    Ok((
        clustering_dist(found, truth)?.dist,
        f_measure(found, truth)?,
    ))
}

/// Runs the landmark pipeline and the embedding baseline on the same fresh
/// instance per trial, giving the baseline the landmark run's exact query
/// budget. Emits one CSV row per run and a median summary as trailing
/// comment lines.
pub fn run(args: BenchArgs) -> anyhow::Result<i32> {
    println!("trial,algo,dist,fmeasure,queries,wall_ms");
    let mut master = ChaCha8Rng::seed_from_u64(args.seed);
    let mut landmark_stats: Vec<(f64, f64)> = Vec::new();
    let mut baseline_stats: Vec<(f64, f64)> = Vec::new();
    for trial in 0..args.trials {
        let gen_seed: u64 = master.random();
        let run_seed: u64 = master.random();
        let baseline_seed: u64 = master.random();
        let spec = spec_for(args.preset, gen_seed);
        let ds = generate(&spec)?;
        let oracle = ds.to_oracle();
        let truth = ds.truth();

        let ledger = QueryLedger::new();
        let result = match spec.theory_target {
            Some(target) => {
                landmark_cluster_theory(
                    &oracle,
                    &ledger,
                    ds.k(),
                    target.alpha,
                    target.epsilon,
                    0.1,
                    run_seed,
                    false,
                )?
                .1
            }
            None => landmark_cluster_heuristic(
                &oracle,
                &ledger,
                ds.k(),
                &HeuristicOptions::default(),
                run_seed,
                false,
            )?,
        };
        let (dist, fm) = match result.clustering() {
            Some(c) => scores(c, &truth)?,
            None => (f64::NAN, f64::NAN),
        };
        landmark_stats.push((dist, fm));
        println!(
            "{trial},landmark,{dist},{fm},{},{}",
            result.report.queries, result.report.wall_ms
        );

        // Same budget, spent on embedding dimensions instead.
        let budget = result.report.queries as usize;
        let bledger = QueryLedger::new();
        let started = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(baseline_seed);
        let found = baseline_cluster(&oracle, &bledger, ds.k(), budget, &mut rng)?;
        let wall_ms = started.elapsed().as_millis();
        let (bdist, bfm) = scores(&found, &truth)?;
        baseline_stats.push((bdist, bfm));
        println!(
            "{trial},baseline,{bdist},{bfm},{},{wall_ms}",
            bledger.count()
        );
    }
    for (name, stats) in [("landmark", &landmark_stats), ("baseline", &baseline_stats)] {
        let dists: Vec<f64> = stats.iter().map(|s| s.0).collect();
        let fms: Vec<f64> = stats.iter().map(|s| s.1).collect();
        println!(
            "# median {name}: dist={} fmeasure={}",
            median(&dists),
            median(&fms)
        );
    }
    Ok(0)
}
