//! Shared domain types: clusterings, derived run parameters and the query
//! ledger that meters access to the distance oracle.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use thiserror::Error;

/// Sentinel used in clustering files for points that no cluster claimed.
pub const UNASSIGNED: i64 = -1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("clustering has {got} entries, expected {expected}")]
    WrongLength { expected: usize, got: usize },
    #[error("point {point} has cluster id {label}, valid ids are 0..{k}")]
    LabelOutOfRange { point: usize, label: usize, k: usize },
    #[error("cluster {label} is empty but a higher cluster id is in use")]
    EmptyLabel { label: usize },
    #[error("point {point} is unassigned but a complete clustering was required")]
    Unassigned { point: usize },
    #[error("cluster count must be at least 1")]
    NoClusters,
    #[error("line {line}: expected an integer cluster id, got {token:?}")]
    BadLabelToken { line: usize, token: String },
    #[error("label {label} on line {line} is negative; only -1 marks unassigned")]
    NegativeLabel { line: usize, label: i64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// How strictly [`Clustering::validate`] treats unassigned points.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coverage {
    /// Every point must carry a cluster id and every id below `k` must occur.
    Complete,
    /// Unassigned points are allowed and empty ids are not checked.
    Partial,
}

/// An assignment of points to `k` clusters. Entry `i` is the cluster id of
/// point `i`, or `None` where no cluster claimed the point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clustering {
    assignment: Vec<Option<usize>>,
    k: usize,
}

impl Clustering {
    pub fn new(assignment: Vec<Option<usize>>, k: usize) -> Self {
        Clustering { assignment, k }
    }

    /// Builds a complete clustering from plain labels.
    pub fn from_labels(labels: &[usize], k: usize) -> Self {
        Clustering {
            assignment: labels.iter().map(|&l| Some(l)).collect(),
            k,
        }
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, point: usize) -> Option<usize> {
        self.assignment[point]
    }

    pub fn assignment(&self) -> &[Option<usize>] {
        &self.assignment
    }

    pub fn is_complete(&self) -> bool {
        self.assignment.iter().all(|a| a.is_some())
    }

    pub fn unassigned_count(&self) -> usize {
        self.assignment.iter().filter(|a| a.is_none()).count()
    }

    /// Member lists per cluster id, each in ascending point order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k];
        for (point, label) in self.assignment.iter().enumerate() {
            if let Some(l) = *label {
                if l < self.k {
                    out[l].push(point);
                }
            }
        }
        out
    }

    /// Checks the structural invariants against an expected point count.
    ///
    /// Ids must lie in `0..k`. Under [`Coverage::Complete`] every point must
    /// be assigned and the used ids must leave no gaps below `k`.
    pub fn validate(&self, n: usize, coverage: Coverage) -> Result<(), ModelError> {
        if self.k == 0 {
            return Err(ModelError::NoClusters);
        }
        if self.assignment.len() != n {
            return Err(ModelError::WrongLength {
                expected: n,
                got: self.assignment.len(),
            });
        }
        let mut seen = vec![false; self.k];
        for (point, label) in self.assignment.iter().enumerate() {
            match *label {
                Some(l) => {
                    if l >= self.k {
                        return Err(ModelError::LabelOutOfRange {
                            point,
                            label: l,
                            k: self.k,
                        });
                    }
                    seen[l] = true;
                }
                None => {
                    if coverage == Coverage::Complete {
                        return Err(ModelError::Unassigned { point });
                    }
                }
            }
        }
        if coverage == Coverage::Complete {
            if let Some(label) = seen.iter().position(|s| !s) {
                return Err(ModelError::EmptyLabel { label });
            }
        }
        Ok(())
    }

    /// Reads the one-integer-per-line format. `-1` marks unassigned points;
    /// blank lines and `#` comments are skipped. `k` is taken as one more
    /// than the largest id present unless a larger `k_hint` is given.
    pub fn read_file(path: &Path, k_hint: Option<usize>) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path)?;
        let mut assignment = Vec::new();
        let mut max_label = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let value: i64 = line.parse().map_err(|_| ModelError::BadLabelToken {
                line: idx + 1,
                token: line.to_string(),
            })?;
            if value == UNASSIGNED {
                assignment.push(None);
            } else if value < 0 {
                return Err(ModelError::NegativeLabel {
                    line: idx + 1,
                    label: value,
                });
            } else {
                let label = value as usize;
                max_label = Some(max_label.map_or(label, |m: usize| m.max(label)));
                assignment.push(Some(label));
            }
        }
        let k = max_label.map_or(0, |m| m + 1).max(k_hint.unwrap_or(1)).max(1);
        Ok(Clustering { assignment, k })
    }

    pub fn write_file(&self, path: &Path) -> Result<(), ModelError> {
        let mut out = String::new();
        for label in &self.assignment {
            match label {
                Some(l) => writeln!(out, "{l}").expect("string write"),
                None => writeln!(out, "{UNASSIGNED}").expect("string write"),
            }
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum ParamError {
    #[error("n must be at least 2, got {0}")]
    TooFewPoints(usize),
    #[error("k must be at least 1, got 0")]
    ZeroClusters,
    #[error("alpha must be positive, got {0}")]
    BadAlpha(f64),
    #[error("epsilon must lie in (0, 1), got {0}")]
    BadEpsilon(f64),
    #[error("delta must lie in (0, 1), got {0}")]
    BadDelta(f64),
    #[error(
        "derived bad-point bound b = {b} reaches n/2 (n = {n}); \
         the candidate pool q = 2b would not fit"
    )]
    BadPointBoundTooLarge { b: usize, n: usize },
}

/// Ceiling that forgives the tiny upward drift of decimal fractions in
/// binary floating point, so e.g. 18 * 0.01 * 1000 still lands on 180.
pub(crate) fn ceil_tol(x: f64) -> usize {
    let c = (x - 1e-9).ceil();
    if c < 0.0 {
        0
    } else {
        c as usize
    }
}

/// Run parameters derived from the instance size and the stability margins.
///
/// * `b`: bound on points whose cluster attachment is too weak to detect,
///   `ceil((1 + 17/alpha) * epsilon * n)`
/// * `q`: candidate pool size for landmark selection, `2b`
/// * `iter`: number of landmarks, `ceil(4k + 16 ln(1/delta))`
/// * `s_min`: minimum ball size for activation, `b + 1`
/// * `n_prime`: points that must be covered before stopping, `n - b`
#[derive(Debug, Clone, PartialEq)]
pub struct TheoryParams {
    pub n: usize,
    pub k: usize,
    pub alpha: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub b: usize,
    pub q: usize,
    pub iter: usize,
    pub s_min: usize,
    pub n_prime: usize,
}

impl TheoryParams {
    pub fn derive(
        n: usize,
        k: usize,
        alpha: f64,
        epsilon: f64,
        delta: f64,
    ) -> Result<Self, ParamError> {
        if n < 2 {
            return Err(ParamError::TooFewPoints(n));
        }
        if k == 0 {
            return Err(ParamError::ZeroClusters);
        }
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(ParamError::BadAlpha(alpha));
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(ParamError::BadEpsilon(epsilon));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(ParamError::BadDelta(delta));
        }
        let b = ceil_tol((1.0 + 17.0 / alpha) * epsilon * n as f64);
        if 2 * b >= n {
            return Err(ParamError::BadPointBoundTooLarge { b, n });
        }
        let iter = ceil_tol(4.0 * k as f64 + 16.0 * (1.0 / delta).ln());
        Ok(TheoryParams {
            n,
            k,
            alpha,
            epsilon,
            delta,
            b,
            q: 2 * b,
            iter,
            s_min: b + 1,
            n_prime: n - b,
        })
    }
}

/// Meters one-versus-all distance queries and caches the returned rows.
///
/// The count goes up by exactly one per distinct point queried; re-reading a
/// cached row is free. The counter is atomic and the cache is behind a lock,
/// so concurrent queries stay consistent.
pub struct QueryLedger {
    count: AtomicU64,
    cache: Option<Mutex<HashMap<usize, Arc<[f64]>>>>,
}

impl QueryLedger {
    pub fn new() -> Self {
        QueryLedger {
            count: AtomicU64::new(0),
            cache: Some(Mutex::new(HashMap::new())),
        }
    }

    /// A ledger that never caches. Every query recomputes and counts; the
    /// rows handed back are identical to the cached variant's.
    pub fn uncached() -> Self {
        QueryLedger {
            count: AtomicU64::new(0),
            cache: None,
        }
    }

    pub fn count(&self) -> u64 {
        self.count.load(Ordering::SeqCst)
    }

    /// Looks up the row for `point` or computes, counts and stores it.
    pub(crate) fn fetch_row(
        &self,
        point: usize,
        compute: impl FnOnce() -> Arc<[f64]>,
    ) -> Arc<[f64]> {
        match &self.cache {
            Some(cache) => {
                let mut cache = cache.lock().expect("query cache poisoned");
                if let Some(row) = cache.get(&point) {
                    return Arc::clone(row);
                }
                let row = compute();
                self.count.fetch_add(1, Ordering::SeqCst);
                cache.insert(point, Arc::clone(&row));
                row
            }
            None => {
                let row = compute();
                self.count.fetch_add(1, Ordering::SeqCst);
                row
            }
        }
    }
}

impl Default for QueryLedger {
    fn default() -> Self {
        QueryLedger::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derive_matches_worked_example() {
        // n=1000, k=4, alpha=1, epsilon=0.01, delta=0.05
        let p = TheoryParams::derive(1000, 4, 1.0, 0.01, 0.05).unwrap();
        assert_eq!(p.b, 180);
        assert_eq!(p.q, 360);
        assert_eq!(p.iter, 64);
        assert_eq!(p.s_min, 181);
        assert_eq!(p.n_prime, 820);
    }

    #[test]
    fn derive_rejects_large_bad_point_bound() {
        // b = ceil(2 * 0.25 * 100) = 50 reaches n/2.
        let err = TheoryParams::derive(100, 2, 17.0, 0.25, 0.05).unwrap_err();
        assert!(matches!(
            err,
            ParamError::BadPointBoundTooLarge { b: 50, n: 100 }
        ));
    }

    #[test]
    fn derive_rejects_bad_margins() {
        assert!(TheoryParams::derive(100, 2, 0.0, 0.1, 0.1).is_err());
        assert!(TheoryParams::derive(100, 2, 1.0, 0.0, 0.1).is_err());
        assert!(TheoryParams::derive(100, 2, 1.0, 1.0, 0.1).is_err());
        assert!(TheoryParams::derive(100, 2, 1.0, 0.001, 0.0).is_err());
        assert!(TheoryParams::derive(100, 2, 1.0, 0.001, 1.0).is_err());
        assert!(TheoryParams::derive(1, 1, 1.0, 0.001, 0.5).is_err());
        assert!(TheoryParams::derive(100, 0, 1.0, 0.001, 0.5).is_err());
    }

    #[test]
    fn ceil_tol_handles_decimal_drift() {
        assert_eq!(ceil_tol(18.0 * 0.01 * 1000.0), 180);
        assert_eq!(ceil_tol(179.5), 180);
        assert_eq!(ceil_tol(180.0), 180);
        assert_eq!(ceil_tol(0.0), 0);
    }

    #[test]
    fn validate_complete_and_partial() {
        let c = Clustering::new(vec![Some(0), Some(0), None], 1);
        assert!(c.validate(3, Coverage::Partial).is_ok());
        assert!(matches!(
            c.validate(3, Coverage::Complete),
            Err(ModelError::Unassigned { point: 2 })
        ));
        assert!(matches!(
            c.validate(4, Coverage::Partial),
            Err(ModelError::WrongLength { .. })
        ));

        let gap = Clustering::from_labels(&[0, 2, 2], 3);
        assert!(matches!(
            gap.validate(3, Coverage::Complete),
            Err(ModelError::EmptyLabel { label: 1 })
        ));
        // Partial coverage does not check for empty ids.
        assert!(gap.validate(3, Coverage::Partial).is_ok());

        let out_of_range = Clustering::from_labels(&[0, 3], 2);
        assert!(matches!(
            out_of_range.validate(2, Coverage::Partial),
            Err(ModelError::LabelOutOfRange { point: 1, label: 3, k: 2 })
        ));
    }

    #[test]
    fn clustering_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("labels.txt");
        let c = Clustering::new(vec![Some(1), None, Some(0), Some(1)], 2);
        c.write_file(&path).unwrap();
        let back = Clustering::read_file(&path, Some(2)).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn clustering_file_rejects_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("labels.txt");
        std::fs::write(&path, "0\nx\n").unwrap();
        assert!(matches!(
            Clustering::read_file(&path, None),
            Err(ModelError::BadLabelToken { line: 2, .. })
        ));
        std::fs::write(&path, "0\n-2\n").unwrap();
        assert!(matches!(
            Clustering::read_file(&path, None),
            Err(ModelError::NegativeLabel { line: 2, label: -2 })
        ));
    }

    #[test]
    fn clustering_file_skips_comments() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("labels.txt");
        std::fs::write(&path, "# truth labels\n0\n\n1\n-1\n").unwrap();
        let c = Clustering::read_file(&path, None).unwrap();
        assert_eq!(c.assignment(), &[Some(0), Some(1), None]);
        assert_eq!(c.k(), 2);
    }

    #[test]
    fn ledger_counts_distinct_queries_once() {
        let ledger = QueryLedger::new();
        let make = || Arc::from(vec![0.0, 1.0].into_boxed_slice());
        ledger.fetch_row(0, make);
        ledger.fetch_row(0, make);
        ledger.fetch_row(1, make);
        assert_eq!(ledger.count(), 2);

        let raw = QueryLedger::uncached();
        raw.fetch_row(0, make);
        raw.fetch_row(0, make);
        assert_eq!(raw.count(), 2);
    }
}
