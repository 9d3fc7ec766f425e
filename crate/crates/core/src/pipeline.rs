//! End-to-end clustering runs: select landmarks, expand balls, then hand
//! every point to the nearest cluster representative. Two entry points
//! cover the two ways to pick run parameters: derived from the guarantee
//! inputs, or heuristic defaults with overrides.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::expand::{
    expand_landmarks_traced, ExpandError, ExpandOutcome, PartialClustering, TraceRow,
};
use crate::model::{Clustering, ParamError, QueryLedger, TheoryParams};
use crate::oracle::DistanceOracle;
use crate::selection::{select_landmarks, LandmarkSet, SelectionError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(
        "landmark budget {budget} is below the cluster count {k}; fewer \
         landmarks than clusters cannot produce k components"
    )]
    BudgetBelowK { budget: usize, k: usize },
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error(transparent)]
    Expand(#[from] ExpandError),
}

/// Machine-readable summary of one run. `wall_ms` is the only field that
/// varies between identical runs; comparisons for reproducibility should
/// skip it.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub algo: String,
    pub mode: String,
    pub n: usize,
    pub k: usize,
    pub seed: u64,
    pub rng: String,
    pub queries: u64,
    pub landmarks: usize,
    pub no_cluster: bool,
    pub radius: Option<f64>,
    pub components: Option<usize>,
    pub clustered: Option<usize>,
    pub wall_ms: u64,
}

#[derive(Debug)]
pub struct ClusterSolution {
    /// Every point assigned to its nearest representative.
    pub clustering: Clustering,
    /// One landmark per cluster: the member with the lowest point index.
    pub representatives: Vec<usize>,
    /// Ball radius at which the expansion terminated.
    pub radius: f64,
}

#[derive(Debug)]
pub enum PipelineOutcome {
    Clustered(ClusterSolution),
    /// No radius produced k components with enough coverage.
    NoCluster { components: usize, clustered: usize },
}

#[derive(Debug)]
pub struct PipelineResult {
    pub outcome: PipelineOutcome,
    pub landmarks: Vec<usize>,
    pub report: RunReport,
    /// Per-step expansion trace; empty unless requested.
    pub trace: Vec<TraceRow>,
}

impl PipelineResult {
    pub fn clustering(&self) -> Option<&Clustering> {
        match &self.outcome {
            PipelineOutcome::Clustered(s) => Some(&s.clustering),
            PipelineOutcome::NoCluster { .. } => None,
        }
    }
}

/// Explicit run parameters shared by both entry points.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub k: usize,
    pub q: usize,
    pub iter: usize,
    pub s_min: usize,
    pub n_prime: usize,
    pub seed: u64,
    pub trace: bool,
}

/// Optional overrides for [`landmark_cluster_heuristic`]; `None` picks a
/// default scaled from n and k.
#[derive(Debug, Clone, Default)]
pub struct HeuristicOptions {
    pub landmark_budget: Option<usize>,
    pub q: Option<usize>,
    pub s_min: Option<usize>,
    pub n_prime: Option<usize>,
}

/// Derives all run parameters from the guarantee inputs, then runs. The
/// derivation happens before any query is spent, so bad parameters cost
/// nothing.
pub fn landmark_cluster_theory(
    oracle: &(impl DistanceOracle + ?Sized),
    ledger: &QueryLedger,
    k: usize,
    alpha: f64,
    epsilon: f64,
    delta: f64,
    seed: u64,
    trace: bool,
) -> Result<(TheoryParams, PipelineResult), PipelineError> {
    let params = TheoryParams::derive(oracle.len(), k, alpha, epsilon, delta)?;
    log::info!(
        "derived parameters: b={} q={} iter={} s_min={} n_prime={}",
        params.b,
        params.q,
        params.iter,
        params.s_min,
        params.n_prime
    );
    let config = RunConfig {
        k,
        q: params.q,
        iter: params.iter,
        s_min: params.s_min,
        n_prime: params.n_prime,
        seed,
        trace,
    };
    let result = run(oracle, ledger, &config, "theory")?;
    Ok((params, result))
}

/// Runs with rule-of-thumb parameters: a candidate pool of 2n/k, balls of
/// at least n/(20k) points, half the points covered, and 40 landmarks per
/// cluster. Any of these can be overridden.
pub fn landmark_cluster_heuristic(
    oracle: &(impl DistanceOracle + ?Sized),
    ledger: &QueryLedger,
    k: usize,
    options: &HeuristicOptions,
    seed: u64,
    trace: bool,
) -> Result<PipelineResult, PipelineError> {
    let n = oracle.len();
    let budget = options.landmark_budget.unwrap_or_else(|| (40 * k).min(n));
    if budget < k {
        return Err(PipelineError::BudgetBelowK { budget, k });
    }
    let iter = if budget > n {
        log::warn!("landmark budget {budget} exceeds n = {n}; clamping");
        n
    } else {
        budget
    };
    let config = RunConfig {
        k,
        q: options.q.unwrap_or_else(|| (2 * n / k.max(1)).clamp(1, n)),
        iter,
        s_min: options.s_min.unwrap_or_else(|| (n / (20 * k)).max(1)),
        n_prime: options.n_prime.unwrap_or(n / 2),
        seed,
        trace,
    };
    log::info!(
        "heuristic parameters: q={} iter={} s_min={} n_prime={}",
        config.q,
        config.iter,
        config.s_min,
        config.n_prime
    );
    run(oracle, ledger, &config, "heuristic")
}

fn run(
    oracle: &(impl DistanceOracle + ?Sized),
    ledger: &QueryLedger,
    config: &RunConfig,
    mode: &str,
) -> Result<PipelineResult, PipelineError> {
    let started = Instant::now();
    let n = oracle.len();
    let queries_before = ledger.count();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let set = select_landmarks(oracle, ledger, config.q, config.iter, &mut rng)?;
    let mut trace = Vec::new();
    let outcome = expand_landmarks_traced(
        set.rows(),
        n,
        config.s_min,
        config.n_prime,
        config.k,
        config.trace.then_some(&mut trace),
    )?;
    let queries = ledger.count() - queries_before;

    let mut report = RunReport {
        algo: "landmark".to_owned(),
        mode: mode.to_owned(),
        n,
        k: config.k,
        seed: config.seed,
        rng: "chacha8".to_owned(),
        queries,
        landmarks: set.len(),
        no_cluster: false,
        radius: None,
        components: None,
        clustered: None,
        wall_ms: 0,
    };
    let outcome = match outcome {
        ExpandOutcome::Clustered(partial) => {
            let covered = n - partial.clustering.unassigned_count();
            let (clustering, representatives) = assign_to_landmarks(&set, &partial);
            report.radius = Some(partial.radius);
            report.components = Some(config.k);
            report.clustered = Some(covered);
            PipelineOutcome::Clustered(ClusterSolution {
                clustering,
                representatives,
                radius: partial.radius,
            })
        }
        ExpandOutcome::NoCluster {
            components,
            clustered,
        } => {
            report.no_cluster = true;
            report.components = Some(components);
            report.clustered = Some(clustered);
            PipelineOutcome::NoCluster {
                components,
                clustered,
            }
        }
    };
    report.wall_ms = started.elapsed().as_millis() as u64;
    Ok(PipelineResult {
        outcome,
        landmarks: set.landmarks().to_vec(),
        report,
        trace,
    })
}

/// Extends a partial clustering of ball members to every point: each
/// cluster is represented by its lowest-index landmark, and each point
/// joins the nearest representative (ties to the lower cluster id). Reuses
/// the landmark rows, so this step costs no queries.
pub fn assign_to_landmarks(
    set: &LandmarkSet,
    partial: &PartialClustering,
) -> (Clustering, Vec<usize>) {
    let k = partial.cluster_slots.len();
    let n = set.d_min().len();
    let mut rep_slots = Vec::with_capacity(k);
    let mut representatives = Vec::with_capacity(k);
    for slots in &partial.cluster_slots {
        let &slot = slots
            .iter()
            .min_by_key(|&&s| set.landmarks()[s])
            .expect("every cluster contains a landmark slot");
        rep_slots.push(slot);
        representatives.push(set.landmarks()[slot]);
    }
    let mut labels = vec![0usize; n];
    let mut unreachable = 0usize;
    for x in 0..n {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (c, &slot) in rep_slots.iter().enumerate() {
            let d = set.rows()[slot][x];
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        if best_d.is_infinite() {
            unreachable += 1;
        }
        labels[x] = best;
    }
    if unreachable > 0 {
        log::warn!(
            "{unreachable} points are infinitely far from every representative; \
             they default to cluster 0"
        );
    }
    (Clustering::from_labels(&labels, k), representatives)
}
