//! Slow, independent reference computations used to check the fast path:
//! exhaustive k-median, good/bad point classification, an exhaustive check
//! of the cost-vs-distance property, brute-force matching distance, and a
//! Monte Carlo estimate of landmark coverage.
//!
//! Everything here prefers clarity over speed and is capped at sizes where
//! exhaustive search stays cheap.

use itertools::Itertools;
use thiserror::Error;

use crate::metrics::{clustering_dist, MetricsError};
use crate::model::{ceil_tol, Clustering, ModelError, ParamError, QueryLedger, TheoryParams};
use crate::oracle::{DistanceOracle, MatrixOracle};
use crate::selection::{select_landmarks, SelectionError};
use crate::synth::LabeledDataset;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Largest n for which every center subset is enumerated.
pub const EXACT_KMEDIAN_CAP: usize = 25;
/// Largest n for which every partition is enumerated.
pub const PARTITION_CAP: usize = 12;
/// Largest cluster count for which every matching permutation is tried.
pub const MATCHING_CAP: usize = 8;

#[derive(Debug, Error)]
pub enum ReferenceError {
    #[error("exhaustive search handles at most {cap} points, got {n}")]
    TooLarge { n: usize, cap: usize },
    #[error("cluster count k = {k} must lie in 1..={n}")]
    BadClusterCount { k: usize, n: usize },
    #[error("scale factor alpha must be positive and finite, got {0}")]
    BadScale(f64),
    #[error("tolerance epsilon must lie in (0, 1), got {0}")]
    BadTolerance(f64),
    #[error("approximation factor c must be at least 1, got {0}")]
    BadApproximation(f64),
    #[error("dataset has {got} points but the derived parameters expect {expected}")]
    SizeMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Selection(#[from] SelectionError),
}

/// An optimal k-median solution over the points themselves.
#[derive(Debug, Clone)]
pub struct KMedianSolution {
    pub value: f64,
    /// Chosen center point indices, ascending. Among equally good center
    /// sets the lexicographically first one wins.
    pub centers: Vec<usize>,
    pub clustering: Clustering,
}

/// Exhaustive k-median: tries every k-subset of points as centers and
/// assigns each point to its nearest center (ties to the earlier center).
pub fn exact_kmedian(m: &MatrixOracle, k: usize) -> Result<KMedianSolution, ReferenceError> {
    let n = m.len();
    if n > EXACT_KMEDIAN_CAP {
        return Err(ReferenceError::TooLarge {
            n,
            cap: EXACT_KMEDIAN_CAP,
        });
    }
    if k == 0 || k > n {
        return Err(ReferenceError::BadClusterCount { k, n });
    }
    let mut best_value = f64::INFINITY;
    let mut best_centers: Option<Vec<usize>> = None;
    for centers in (0..n).combinations(k) {
        let mut value = 0.0;
        for x in 0..n {
            let w = centers
                .iter()
                .map(|&c| m.distance(x, c))
                .fold(f64::INFINITY, f64::min);
            value += w;
        }
        if value < best_value {
            best_value = value;
            best_centers = Some(centers);
        }
    }
    let centers = best_centers.expect("at least one center subset exists");
    let labels: Vec<usize> = (0..n)
        .map(|x| nearest_position(centers.iter().map(|&c| m.distance(x, c))))
        .collect();
    Ok(KMedianSolution {
        value: best_value,
        centers,
        clustering: Clustering::from_labels(&labels, k),
    })
}

/// Position of the smallest value, first winner on ties.
fn nearest_position(dists: impl Iterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, d) in dists.enumerate() {
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

/// Nearest and second-nearest distance plus the position of the nearest.
fn two_nearest(dists: impl Iterator<Item = f64>) -> (f64, f64, usize) {
    let mut w = f64::INFINITY;
    let mut w2 = f64::INFINITY;
    let mut owner = 0;
    for (i, d) in dists.enumerate() {
        if d < w {
            w2 = w;
            w = d;
            owner = i;
        } else if d < w2 {
            w2 = d;
        }
    }
    (w, w2, owner)
}

/// Points split into per-center well-determined ("good") sets and the
/// leftover ambiguous ("bad") points, relative to a set of centers.
#[derive(Debug, Clone)]
pub struct StructureReport {
    /// Sum of distances to nearest center.
    pub value: f64,
    /// Distance scale separating good from bad: alpha * mean / (17 epsilon).
    pub d_crit: f64,
    pub good_sets: Vec<Vec<usize>>,
    pub bad_points: Vec<usize>,
    /// How many bad points the margin argument tolerates.
    pub bad_bound: usize,
}

fn classify(
    weights: &[(f64, f64, usize)],
    k: usize,
    value: f64,
    alpha: f64,
    epsilon: f64,
) -> StructureReport {
    let n = weights.len();
    let mean = value / n as f64;
    let d_crit = alpha * mean / (17.0 * epsilon);
    let mut good_sets = vec![Vec::new(); k];
    let mut bad_points = Vec::new();
    for (x, &(w, w2, owner)) in weights.iter().enumerate() {
        // With every point on a center the scale collapses; a point is
        // well determined exactly when one center sits on it and no
        // second one does.
        let good = if value == 0.0 {
            w == 0.0 && w2 > 0.0
        } else {
            w < d_crit && w2 - w >= 17.0 * d_crit
        };
        if good {
            good_sets[owner].push(x);
        } else {
            bad_points.push(x);
        }
    }
    StructureReport {
        value,
        d_crit,
        good_sets,
        bad_points,
        bad_bound: ceil_tol((1.0 + 17.0 / alpha) * epsilon * n as f64),
    }
}

fn check_scales(alpha: f64, epsilon: f64) -> Result<(), ReferenceError> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(ReferenceError::BadScale(alpha));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(ReferenceError::BadTolerance(epsilon));
    }
    Ok(())
}

/// Classifies points against an exhaustively optimal k-median solution.
pub fn classify_good_bad(
    m: &MatrixOracle,
    k: usize,
    alpha: f64,
    epsilon: f64,
) -> Result<(KMedianSolution, StructureReport), ReferenceError> {
    check_scales(alpha, epsilon)?;
    let solution = exact_kmedian(m, k)?;
    let weights: Vec<(f64, f64, usize)> = (0..m.len())
        .map(|x| two_nearest(solution.centers.iter().map(|&c| m.distance(x, c))))
        .collect();
    let report = classify(&weights, k, solution.value, alpha, epsilon);
    Ok((solution, report))
}

/// Classifies points against the planted centers of a generated dataset,
/// sidestepping exhaustive search so large instances work too.
pub fn planted_structure(
    ds: &LabeledDataset,
    alpha: f64,
    epsilon: f64,
) -> Result<StructureReport, ReferenceError> {
    check_scales(alpha, epsilon)?;
    let k = ds.k();
    let dist_to_center = |x: usize, c: usize| -> f64 {
        ds.point(x)
            .iter()
            .zip(ds.center(c))
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    };
    let weights: Vec<(f64, f64, usize)> = (0..ds.n())
        .map(|x| two_nearest((0..k).map(|c| dist_to_center(x, c))))
        .collect();
    let value: f64 = weights.iter().map(|&(w, _, _)| w).sum();
    Ok(classify(&weights, k, value, alpha, epsilon))
}

/// Outcome of the exhaustive cost-vs-distance check.
#[derive(Debug, Clone)]
pub struct CeCheck {
    /// True when every partition within factor c of the optimum cost lies
    /// within distance epsilon of the target.
    pub holds: bool,
    pub opt_value: f64,
    /// Number of partitions whose cost qualified.
    pub qualifying: u64,
    /// A qualifying partition that landed too far away, if any.
    pub violation: Option<Vec<usize>>,
}

/// Enumerates every partition of {0..n} into at most `max_parts` parts as
/// restricted growth strings (part labels appear in first-use order).
fn for_each_partition(n: usize, max_parts: usize, f: &mut impl FnMut(&[usize], usize)) {
    fn rec(
        a: &mut Vec<usize>,
        i: usize,
        used: usize,
        max_parts: usize,
        f: &mut impl FnMut(&[usize], usize),
    ) {
        if i == a.len() {
            f(a, used);
            return;
        }
        for part in 0..used {
            a[i] = part;
            rec(a, i + 1, used, max_parts, f);
        }
        if used < max_parts {
            a[i] = used;
            rec(a, i + 1, used + 1, max_parts, f);
        }
    }
    let mut a = vec![0usize; n];
    rec(&mut a, 0, 0, max_parts, f);
}

/// Sum over parts of the best single-member median cost.
fn partition_cost(m: &MatrixOracle, labels: &[usize], parts: usize) -> f64 {
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); parts];
    for (x, &l) in labels.iter().enumerate() {
        members[l].push(x);
    }
    members
        .iter()
        .filter(|part| !part.is_empty())
        .map(|part| {
            part.iter()
                .map(|&y| part.iter().map(|&x| m.distance(x, y)).sum::<f64>())
                .fold(f64::INFINITY, f64::min)
        })
        .sum()
}

/// Exhaustively decides whether cost-approximation implies label-closeness
/// on this instance: every partition into at most k parts with cost within
/// factor `c` of optimal must have matching distance below `epsilon` from
/// `target`. Note the strict inequality: epsilon = 0 never holds because
/// even the target misses `dist < 0`.
pub fn verify_ce_property(
    m: &MatrixOracle,
    k: usize,
    c: f64,
    epsilon: f64,
    target: &Clustering,
) -> Result<CeCheck, ReferenceError> {
    let n = m.len();
    if n > PARTITION_CAP {
        return Err(ReferenceError::TooLarge {
            n,
            cap: PARTITION_CAP,
        });
    }
    if k == 0 || k > n {
        return Err(ReferenceError::BadClusterCount { k, n });
    }
    if !(c >= 1.0) || !c.is_finite() {
        return Err(ReferenceError::BadApproximation(c));
    }
    target.validate(n, crate::model::Coverage::Complete)?;

    let mut opt = f64::INFINITY;
    for_each_partition(n, k, &mut |labels, parts| {
        let cost = partition_cost(m, labels, parts);
        if cost < opt {
            opt = cost;
        }
    });

    let mut qualifying = 0u64;
    let mut violation: Option<Vec<usize>> = None;
    let mut error: Option<MetricsError> = None;
    for_each_partition(n, k, &mut |labels, parts| {
        if violation.is_some() || error.is_some() {
            return;
        }
        let cost = partition_cost(m, labels, parts);
        if cost > c * opt {
            return;
        }
        qualifying += 1;
        let candidate = Clustering::from_labels(labels, parts.max(1));
        match clustering_dist(&candidate, target) {
            Ok(result) => {
                if result.dist >= epsilon {
                    violation = Some(labels.to_vec());
                }
            }
            Err(e) => error = Some(e),
        }
    });
    if let Some(e) = error {
        return Err(e.into());
    }
    Ok(CeCheck {
        holds: violation.is_none(),
        opt_value: opt,
        qualifying,
        violation,
    })
}

/// Matching distance by trying every cluster permutation. Cross-checks the
/// assignment-problem solver in `metrics`.
pub fn brute_force_dist(a: &Clustering, b: &Clustering) -> Result<f64, ReferenceError> {
    let n = a.len();
    if b.len() != n {
        return Err(MetricsError::LengthMismatch { a: n, b: b.len() }.into());
    }
    if n == 0 {
        return Err(MetricsError::Empty.into());
    }
    let k = a.k().max(b.k());
    if k > MATCHING_CAP {
        return Err(ReferenceError::TooLarge {
            n: k,
            cap: MATCHING_CAP,
        });
    }
    let mut counts = vec![vec![0i64; k]; k];
    let mut size_a = vec![0i64; k];
    for x in 0..n {
        let (la, lb) = match (a.get(x), b.get(x)) {
            (Some(la), Some(lb)) => (la, lb),
            _ => {
                let err = crate::model::ModelError::Unassigned { point: x };
                return Err(MetricsError::Incomplete(err).into());
            }
        };
        counts[la][lb] += 1;
        size_a[la] += 1;
    }
    let mut best = i64::MAX;
    for perm in (0..k).permutations(k) {
        let moved: i64 = (0..k).map(|i| size_a[i] - counts[i][perm[i]]).sum();
        best = best.min(moved);
    }
    Ok(best as f64 / n as f64)
}

#[derive(Debug, Clone, Copy)]
pub struct CoverageEstimate {
    pub fraction: f64,
    pub covered: u32,
    pub trials: u32,
}

/// Runs `trials` independent landmark selections and reports the fraction
/// in which every nonempty good set came within twice the critical
/// distance of some landmark.
pub fn estimate_coverage_probability(
    ds: &LabeledDataset,
    params: &TheoryParams,
    trials: u32,
    seed: u64,
) -> Result<CoverageEstimate, ReferenceError> {
    if ds.n() != params.n {
        return Err(ReferenceError::SizeMismatch {
            expected: params.n,
            got: ds.n(),
        });
    }
    let structure = planted_structure(ds, params.alpha, params.epsilon)?;
    if structure.good_sets.iter().any(|s| s.is_empty()) {
        log::warn!(
            "some cluster has no well-determined points; landmark coverage cannot hold"
        );
        return Ok(CoverageEstimate {
            fraction: 0.0,
            covered: 0,
            trials,
        });
    }
    let threshold = 2.0 * structure.d_crit;
    let oracle = ds.to_oracle();
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let mut covered = 0u32;
    for _ in 0..trials {
        let trial_seed: u64 = master.random();
        let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
        let ledger = QueryLedger::new();
        let set = select_landmarks(&oracle, &ledger, params.q, params.iter, &mut rng)?;
        let d_min = set.d_min();
        let ok = structure
            .good_sets
            .iter()
            .all(|xs| xs.iter().any(|&x| d_min[x] < threshold));
        if ok {
            covered += 1;
        }
    }
    Ok(CoverageEstimate {
        fraction: f64::from(covered) / f64::from(trials.max(1)),
        covered,
        trials,
    })
}
