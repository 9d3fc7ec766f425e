//! Quality measures between clusterings: the misclassification distance
//! (fraction of points that must move, minimized over cluster matchings),
//! the F-measure, and the inequality tying the two together. Also a cheap
//! triangle-inequality spot check for distance matrices.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::{Clustering, Coverage, ModelError};
use crate::oracle::{DistanceOracle, MatrixOracle};

/// Relative slack when checking the triangle inequality on floats.
pub const TRIANGLE_SLACK: f64 = 1e-9;

/// Absolute slack when checking `fmeasure >= 1 - 3*dist/2`. The inequality
/// holds exactly on rationals; the slack only absorbs float rounding.
pub const FMEASURE_BOUND_SLACK: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("clusterings have {a} and {b} points, cannot compare")]
    LengthMismatch { a: usize, b: usize },
    #[error("cannot compare empty clusterings")]
    Empty,
    #[error("clustering is not complete: {0}")]
    Incomplete(#[source] ModelError),
}

fn check_comparable(a: &Clustering, b: &Clustering) -> Result<(), MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::LengthMismatch {
            a: a.len(),
            b: b.len(),
        });
    }
    if a.is_empty() {
        return Err(MetricsError::Empty);
    }
    for c in [a, b] {
        c.validate(c.len(), Coverage::Partial)
            .and_then(|_| {
                if let Some(point) = c.assignment().iter().position(|x| x.is_none()) {
                    Err(ModelError::Unassigned { point })
                } else {
                    Ok(())
                }
            })
            .map_err(MetricsError::Incomplete)?;
    }
    Ok(())
}

/// Intersection counts `|A_i ∩ B_j|` and the cluster sizes of both sides.
fn overlap_counts(a: &Clustering, b: &Clustering) -> (Vec<Vec<i64>>, Vec<i64>, Vec<i64>) {
    let (ka, kb) = (a.k(), b.k());
    let mut counts = vec![vec![0i64; kb]; ka];
    let mut size_a = vec![0i64; ka];
    let mut size_b = vec![0i64; kb];
    for point in 0..a.len() {
        let i = a.get(point).expect("checked complete");
        let j = b.get(point).expect("checked complete");
        counts[i][j] += 1;
        size_a[i] += 1;
        size_b[j] += 1;
    }
    (counts, size_a, size_b)
}

/// An optimal matching between cluster ids and the distance it realizes.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchingResult {
    /// Fraction of points outside the matched clusters, in `[0, 1]`.
    pub dist: f64,
    /// `matching[i]` is the cluster of the second clustering matched to
    /// cluster `i` of the first, after padding both sides with empty
    /// clusters to a common count.
    pub matching: Vec<usize>,
}

/// Misclassification distance: the minimum over cluster matchings of the
/// fraction of points in a cluster of `a` that fall outside the matched
/// cluster of `b`. Sides with fewer clusters are padded with empty ones.
pub fn clustering_dist(a: &Clustering, b: &Clustering) -> Result<MatchingResult, MetricsError> {
    check_comparable(a, b)?;
    let (counts, size_a, _) = overlap_counts(a, b);
    let k = a.k().max(b.k());
    let mut cost = vec![vec![0i64; k]; k];
    for i in 0..k {
        for j in 0..k {
            if i < a.k() {
                let inter = if j < b.k() { counts[i][j] } else { 0 };
                cost[i][j] = size_a[i] - inter;
            }
            // Padded rows of `a` are empty clusters and cost nothing.
        }
    }
    let (total, matching) = hungarian_min(&cost);
    Ok(MatchingResult {
        dist: total as f64 / a.len() as f64,
        matching,
    })
}

/// F-measure of `a` against `b`: each cluster of `a` picks its best-matching
/// cluster of `b` by harmonic overlap, weighted by cluster size. Not
/// symmetric in its arguments.
pub fn f_measure(a: &Clustering, b: &Clustering) -> Result<f64, MetricsError> {
    check_comparable(a, b)?;
    let (counts, size_a, size_b) = overlap_counts(a, b);
    let mut sum = 0.0;
    for i in 0..a.k() {
        if size_a[i] == 0 {
            continue;
        }
        let mut best = 0.0f64;
        for j in 0..b.k() {
            let denom = size_a[i] + size_b[j];
            if denom > 0 {
                best = best.max(2.0 * counts[i][j] as f64 / denom as f64);
            }
        }
        sum += size_a[i] as f64 * best;
    }
    Ok(sum / a.len() as f64)
}

/// The distance / F-measure inequality for one pair of clusterings.
#[derive(Debug, Clone, PartialEq)]
pub struct FMeasureBound {
    pub dist: f64,
    pub fmeasure: f64,
    /// `1 - 3*dist/2`, the guaranteed floor for the F-measure.
    pub bound: f64,
    pub holds: bool,
}

/// Evaluates `fmeasure >= 1 - 3*dist/2`. This holds for every pair of
/// complete clusterings; a `holds == false` result signals a bug in one of
/// the two measures.
pub fn check_fmeasure_bound(a: &Clustering, b: &Clustering) -> Result<FMeasureBound, MetricsError> {
    let dist = clustering_dist(a, b)?.dist;
    let fmeasure = f_measure(a, b)?;
    let bound = 1.0 - 1.5 * dist;
    Ok(FMeasureBound {
        dist,
        fmeasure,
        bound,
        holds: fmeasure + FMEASURE_BOUND_SLACK >= bound,
    })
}

/// Result of a triangle-inequality spot check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriangleCheck {
    /// Fraction of checked triples violating the triangle inequality.
    pub rate: f64,
    /// Triples with all three distances finite that were actually checked.
    pub checked: usize,
}

fn triple_violates(a: f64, b: f64, c: f64) -> bool {
    let max = a.max(b).max(c);
    let rest = a + b + c - max;
    max > rest * (1.0 + TRIANGLE_SLACK)
}

/// Estimates how often the triangle inequality fails among point triples
/// with all pairwise distances finite. Exhaustive when the triple count is
/// small, sampled otherwise. An empty population yields rate 0.
pub fn triangle_violation_rate(
    matrix: &MatrixOracle,
    num_triples: usize,
    seed: u64,
) -> TriangleCheck {
    let n = matrix.len();
    if n < 3 || num_triples == 0 {
        log::warn!("triangle check needs at least 3 points and a positive sample size");
        return TriangleCheck { rate: 0.0, checked: 0 };
    }
    let total = n * (n - 1) * (n - 2) / 6;
    let mut checked = 0usize;
    let mut violations = 0usize;
    let mut tally = |i: usize, j: usize, l: usize| {
        let (dij, djl, dil) = (
            matrix.distance(i, j),
            matrix.distance(j, l),
            matrix.distance(i, l),
        );
        if dij.is_finite() && djl.is_finite() && dil.is_finite() {
            checked += 1;
            if triple_violates(dij, djl, dil) {
                violations += 1;
            }
        }
    };
    if total <= num_triples {
        for i in 0..n {
            for j in (i + 1)..n {
                for l in (j + 1)..n {
                    tally(i, j, l);
                }
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let budget = num_triples.saturating_mul(50);
        let mut drawn = 0usize;
        let mut attempts = 0usize;
        while drawn < num_triples && attempts < budget {
            attempts += 1;
            let i = rng.random_range(0..n);
            let j = rng.random_range(0..n);
            let l = rng.random_range(0..n);
            if i == j || j == l || i == l {
                continue;
            }
            drawn += 1;
            tally(i, j, l);
        }
    }
    if checked == 0 {
        log::warn!("no point triple has all three distances finite; reporting rate 0");
        return TriangleCheck { rate: 0.0, checked: 0 };
    }
    TriangleCheck {
        rate: violations as f64 / checked as f64,
        checked,
    }
}

/// Minimum-cost perfect matching on a square cost matrix via potentials and
/// shortest augmenting paths. Exact on integer costs. Returns the total
/// cost and, per row, the matched column.
pub(crate) fn hungarian_min(cost: &[Vec<i64>]) -> (i64, Vec<usize>) {
    let n = cost.len();
    if n == 0 {
        return (0, Vec::new());
    }
    let inf = i64::MAX / 4;
    // One-based arrays; index 0 is the virtual unmatched column.
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut matched_row = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        matched_row[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        // Walk the augmenting path backwards, flipping matches.
        while j0 != 0 {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
        }
    }
    let mut matching = vec![0usize; n];
    let mut total = 0i64;
    for j in 1..=n {
        if matched_row[j] > 0 {
            matching[matched_row[j] - 1] = j - 1;
            total += cost[matched_row[j] - 1][j - 1];
        }
    }
    (total, matching)
}
