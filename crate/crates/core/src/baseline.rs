//! Baseline clustering that spends queries freely: embed every point by
//! its distances to a handful of random reference points, then run k-means
//! on the embedding. Serves as the comparison partner for the
//! landmark pipeline in benchmarks.

use rand::Rng;
use thiserror::Error;

use crate::model::{Clustering, QueryLedger};
use crate::oracle::{query_one_vs_all, DistanceOracle, OracleError};

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("embedding dimension d = {d} must lie in 1..={n}")]
    BadEmbedDims { d: usize, n: usize },
    #[error("cluster count k = {k} must lie in 1..={n}")]
    BadClusterCount { k: usize, n: usize },
    #[error("data buffer holds {got} values, expected n * dim = {expected}")]
    BadShape { expected: usize, got: usize },
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// Embeds each point as its distance vector to `dims` reference points
/// drawn uniformly without replacement. Costs exactly `dims` ledger
/// queries. Unreachable pairs (infinite distance) are capped at twice the
/// largest finite value so k-means has something to work with.
pub fn lipschitz_embed(
    oracle: &(impl DistanceOracle + ?Sized),
    ledger: &QueryLedger,
    dims: usize,
    rng: &mut impl Rng,
) -> Result<(Vec<f64>, Vec<usize>), BaselineError> {
    let n = oracle.len();
    if dims == 0 || dims > n {
        return Err(BaselineError::BadEmbedDims { d: dims, n });
    }
    let refs: Vec<usize> = rand::seq::index::sample(rng, n, dims).into_vec();
    let mut embed = vec![0.0f64; n * dims];
    let mut max_finite = 0.0f64;
    let mut infinite = 0usize;
    for (j, &r) in refs.iter().enumerate() {
        let row = query_one_vs_all(oracle, r, ledger)?;
        for x in 0..n {
            let d = row[x];
            if d.is_finite() {
                max_finite = max_finite.max(d);
            } else {
                infinite += 1;
            }
            embed[x * dims + j] = d;
        }
    }
    if infinite > 0 {
        let cap = 2.0 * max_finite;
        log::warn!("capping {infinite} infinite embedding entries at {cap}");
        for v in &mut embed {
            if !v.is_finite() {
                *v = cap;
            }
        }
    }
    Ok((embed, refs))
}

#[derive(Debug, Clone)]
pub struct KMeansResult {
    pub labels: Vec<usize>,
    /// Flat k * dim center coordinates.
    pub centers: Vec<f64>,
    /// Sum of squared distances to assigned centers.
    pub objective: f64,
    pub iterations: usize,
}

fn squared_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Seeding by squared-distance weighting: each new center is drawn with
/// probability proportional to the squared distance from the centers
/// chosen so far. Collapses to a uniform draw when every remaining
/// distance is zero.
fn seed_centers(data: &[f64], n: usize, dim: usize, k: usize, rng: &mut impl Rng) -> Vec<f64> {
    let point = |i: usize| &data[i * dim..(i + 1) * dim];
    let mut centers = Vec::with_capacity(k * dim);
    let first = rng.random_range(0..n);
    centers.extend_from_slice(point(first));
    let mut d2: Vec<f64> = (0..n).map(|x| squared_dist(point(x), point(first))).collect();
    for _ in 1..k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (x, &w) in d2.iter().enumerate() {
                if u < w {
                    chosen = x;
                    break;
                }
                u -= w;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centers.extend_from_slice(point(next));
        let c = centers.len() - dim;
        for x in 0..n {
            let d = squared_dist(point(x), &centers[c..]);
            if d < d2[x] {
                d2[x] = d;
            }
        }
    }
    centers
}

/// Lloyd iterations with the seeding above. Ties go to the lower center
/// index; a center that loses all its points restarts at the point
/// currently farthest from its assignment.
pub fn kmeans(
    data: &[f64],
    n: usize,
    dim: usize,
    k: usize,
    max_iter: usize,
    rng: &mut impl Rng,
) -> Result<KMeansResult, BaselineError> {
    if data.len() != n * dim {
        return Err(BaselineError::BadShape {
            expected: n * dim,
            got: data.len(),
        });
    }
    if k == 0 || k > n {
        return Err(BaselineError::BadClusterCount { k, n });
    }
    let point = |i: usize| &data[i * dim..(i + 1) * dim];
    let mut centers = seed_centers(data, n, dim, k, rng);
    let mut labels = vec![0usize; n];
    let mut objective = f64::INFINITY;
    let mut iterations = 0;
    for iter in 0..max_iter.max(1) {
        iterations = iter + 1;
        let mut new_objective = 0.0;
        for x in 0..n {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for c in 0..k {
                let d = squared_dist(point(x), &centers[c * dim..(c + 1) * dim]);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            labels[x] = best;
            new_objective += best_d;
        }
        debug_assert!(
            new_objective <= objective * (1.0 + 1e-9) + 1e-9,
            "objective rose from {objective} to {new_objective}"
        );
        let done = objective.is_finite()
            && (objective - new_objective).abs() <= 1e-9 * objective.max(1.0);
        objective = new_objective;
        if done {
            break;
        }

        let mut sums = vec![0.0f64; k * dim];
        let mut sizes = vec![0usize; k];
        for x in 0..n {
            let l = labels[x];
            sizes[l] += 1;
            for d in 0..dim {
                sums[l * dim + d] += point(x)[d];
            }
        }
        let mut reseeded: Vec<usize> = Vec::new();
        for c in 0..k {
            if sizes[c] == 0 {
                // Restart this center on the point farthest from its
                // current assignment, skipping points already used.
                let far = (0..n)
                    .filter(|x| !reseeded.contains(x))
                    .max_by(|&a, &b| {
                        let da = squared_dist(point(a), &centers[labels[a] * dim..][..dim]);
                        let db = squared_dist(point(b), &centers[labels[b] * dim..][..dim]);
                        da.total_cmp(&db)
                    })
                    .expect("k <= n leaves a point to reseed from");
                reseeded.push(far);
                centers[c * dim..(c + 1) * dim].copy_from_slice(point(far));
            } else {
                for d in 0..dim {
                    centers[c * dim + d] = sums[c * dim + d] / sizes[c] as f64;
                }
            }
        }
    }
    Ok(KMeansResult {
        labels,
        centers,
        objective,
        iterations,
    })
}

/// The full baseline: embed with `dims` reference queries, cluster the
/// embedding into k groups.
pub fn baseline_cluster(
    oracle: &(impl DistanceOracle + ?Sized),
    ledger: &QueryLedger,
    k: usize,
    dims: usize,
    rng: &mut impl Rng,
) -> Result<Clustering, BaselineError> {
    let n = oracle.len();
    if k == 0 || k > n {
        return Err(BaselineError::BadClusterCount { k, n });
    }
    let (embed, _) = lipschitz_embed(oracle, ledger, dims, rng)?;
    let result = kmeans(&embed, n, dims, k, 100, rng)?;
    Ok(Clustering::from_labels(&result.labels, k))
}
