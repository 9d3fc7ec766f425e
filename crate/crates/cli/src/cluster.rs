use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, ValueEnum};
use lmclust::baseline::baseline_cluster;
use lmclust::model::QueryLedger;
use lmclust::oracle::{load_matrix_file, load_points_file, DistanceOracle};
use lmclust::pipeline::{
    landmark_cluster_heuristic, landmark_cluster_theory, HeuristicOptions, PipelineOutcome,
    PipelineResult, RunReport,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::EXIT_NO_CLUSTER;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Algo {
    Landmark,
    Baseline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Derive all run parameters from --alpha/--epsilon/--delta.
    Theory,
    /// Rule-of-thumb parameters, overridable individually.
    Heuristic,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum InputFormat {
    /// "n dim" header, then n coordinate rows.
    Points,
    /// "n" header, then an n-by-n distance matrix ("inf" allowed).
    Matrix,
}

#[derive(Args)]
pub struct ClusterArgs {
    #[arg(long, value_enum, default_value = "landmark")]
    algo: Algo,
    #[arg(long, value_enum, default_value = "heuristic")]
    mode: Mode,
    /// Number of clusters to produce
    #[arg(long)]
    k: usize,
    /// Guarantee scale factor (theory mode; default 1.0)
    #[arg(long)]
    alpha: Option<f64>,
    /// Guarantee closeness target (theory mode; required there)
    #[arg(long)]
    epsilon: Option<f64>,
    /// Guarantee failure probability (theory mode; default 0.1)
    #[arg(long)]
    delta: Option<f64>,
    /// Landmark budget (heuristic mode) or embedding size (baseline)
    #[arg(long)]
    landmarks: Option<usize>,
    /// Candidate pool size (heuristic mode)
    #[arg(long)]
    q: Option<usize>,
    /// Minimum ball size (heuristic mode)
    #[arg(long)]
    smin: Option<usize>,
    /// Coverage target in points (heuristic mode)
    #[arg(long)]
    nprime: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Input dataset
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "points")]
    input_format: InputFormat,
    /// Where to write the clustering; skipped when no clustering is found
    #[arg(long)]
    out: Option<PathBuf>,
    /// Where to write the one-line JSON run report
    #[arg(long)]
    report: Option<PathBuf>,
}

fn load_oracle(args: &ClusterArgs) -> anyhow::Result<Box<dyn DistanceOracle>> {
    let path = &args.input;
    let oracle: Box<dyn DistanceOracle> = match args.input_format {
        InputFormat::Points => Box::new(
            load_points_file(path).with_context(|| format!("reading {}", path.display()))?,
        ),
        InputFormat::Matrix => Box::new(
            load_matrix_file(path).with_context(|| format!("reading {}", path.display()))?,
        ),
    };
    Ok(oracle)
}

fn write_report(path: Option<&Path>, report: &RunReport) -> anyhow::Result<()> {
    if let Some(path) = path {
        let line = serde_json::to_string(report)?;
        std::fs::write(path, line + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn forbid(set: bool, flag: &str, reason: &str) -> anyhow::Result<()> {
    if set {
        bail!("{flag} conflicts with {reason}");
    }
    Ok(())
}

pub fn run(args: ClusterArgs) -> anyhow::Result<i32> {
    let oracle = load_oracle(&args)?;
    match args.algo {
        Algo::Landmark => run_landmark(&args, &*oracle),
        Algo::Baseline => run_baseline(&args, &*oracle),
    }
}

fn run_landmark(args: &ClusterArgs, oracle: &dyn DistanceOracle) -> anyhow::Result<i32> {
    let ledger = QueryLedger::new();
    let result: PipelineResult = match args.mode {
        Mode::Theory => {
            forbid(args.landmarks.is_some(), "--landmarks", "theory mode")?;
            forbid(args.q.is_some(), "--q", "theory mode")?;
            forbid(args.smin.is_some(), "--smin", "theory mode")?;
            forbid(args.nprime.is_some(), "--nprime", "theory mode")?;
            let epsilon = args
                .epsilon
                .context("theory mode needs --epsilon (the closeness target)")?;
            let alpha = args.alpha.unwrap_or(1.0);
            let delta = args.delta.unwrap_or(0.1);
            landmark_cluster_theory(oracle, &ledger, args.k, alpha, epsilon, delta, args.seed, false)?
                .1
        }
        Mode::Heuristic => {
            forbid(args.alpha.is_some(), "--alpha", "heuristic mode")?;
            forbid(args.epsilon.is_some(), "--epsilon", "heuristic mode")?;
            forbid(args.delta.is_some(), "--delta", "heuristic mode")?;
            let options = HeuristicOptions {
                landmark_budget: args.landmarks,
                q: args.q,
                s_min: args.smin,
                n_prime: args.nprime,
            };
            landmark_cluster_heuristic(oracle, &ledger, args.k, &options, args.seed, false)?
        }
    };
    write_report(args.report.as_deref(), &result.report)?;
    match &result.outcome {
        PipelineOutcome::Clustered(solution) => {
            if let Some(out) = &args.out {
                solution
                    .clustering
                    .write_file(out)
                    .with_context(|| format!("writing {}", out.display()))?;
            }
            println!(
                "clustered n={} into k={} at radius {} with {} queries",
                result.report.n, result.report.k, solution.radius, result.report.queries
            );
            Ok(0)
        }
        PipelineOutcome::NoCluster {
            components,
            clustered,
        } => {
            println!(
                "no clustering: sweep ended at {components} components covering \
                 {clustered} points ({} queries)",
                result.report.queries
            );
            Ok(EXIT_NO_CLUSTER)
        }
    }
}

fn run_baseline(args: &ClusterArgs, oracle: &dyn DistanceOracle) -> anyhow::Result<i32> {
    forbid(args.mode == Mode::Theory, "--mode theory", "the baseline")?;
    forbid(args.alpha.is_some(), "--alpha", "the baseline")?;
    forbid(args.epsilon.is_some(), "--epsilon", "the baseline")?;
    forbid(args.delta.is_some(), "--delta", "the baseline")?;
    forbid(args.q.is_some(), "--q", "the baseline")?;
    forbid(args.smin.is_some(), "--smin", "the baseline")?;
    forbid(args.nprime.is_some(), "--nprime", "the baseline")?;
    let n = oracle.len();
    let dims = args.landmarks.unwrap_or_else(|| (40 * args.k).min(n));
    let ledger = QueryLedger::new();
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let clustering = baseline_cluster(oracle, &ledger, args.k, dims, &mut rng)?;
    let report = RunReport {
        algo: "baseline".to_owned(),
        mode: "embed".to_owned(),
        n,
        k: args.k,
        seed: args.seed,
        rng: "chacha8".to_owned(),
        queries: ledger.count(),
        landmarks: dims,
        no_cluster: false,
        radius: None,
        components: None,
        clustered: None,
        wall_ms: started.elapsed().as_millis() as u64,
    };
    write_report(args.report.as_deref(), &report)?;
    if let Some(out) = &args.out {
        clustering
            .write_file(out)
            .with_context(|| format!("writing {}", out.display()))?;
    }
    println!(
        "clustered n={} into k={} with {} queries (baseline)",
        n, args.k, report.queries
    );
    Ok(0)
}
