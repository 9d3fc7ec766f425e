//! Distance access. All clustering code sees the data only through
//! one-versus-all queries: give a point index, get the full row of distances
//! from that point to every point. Rows are metered by a [`QueryLedger`].

use std::fmt::Write as _;
use std::ops::Deref;
use std::path::Path;
use std::sync::Arc;

use thiserror::Error;

use crate::model::QueryLedger;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("point index {index} out of range for {n} points")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("{path}: file is empty, expected a header line")]
    MissingHeader { path: String },
    #[error("{path}: malformed header {header:?}, expected {expected}")]
    MalformedHeader {
        path: String,
        header: String,
        expected: &'static str,
    },
    #[error("{path} line {line}: expected {expected} values, got {got}")]
    RowLength {
        path: String,
        line: usize,
        expected: usize,
        got: usize,
    },
    #[error("{path} line {line}: {token:?} is not a finite number or \"inf\"")]
    BadToken {
        path: String,
        line: usize,
        token: String,
    },
    #[error("{path}: expected {expected} data rows, got {got}")]
    RowCount {
        path: String,
        expected: usize,
        got: usize,
    },
    #[error("matrix entry ({i}, {j}) is negative: {value}")]
    NegativeDistance { i: usize, j: usize, value: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One row of distances `d(p, .)`, shared cheaply between the ledger cache
/// and whoever holds the query result. Entry `p` is zero and no entry is
/// negative or NaN; `+inf` marks unreachable pairs.
#[derive(Debug, Clone)]
pub struct DistanceRow(Arc<[f64]>);

impl DistanceRow {
    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

impl Deref for DistanceRow {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Anything that can answer one-versus-all distance queries.
///
/// `row` is the raw, unmetered computation; algorithm code should go through
/// [`query_one_vs_all`] so the ledger sees every access. Diagnostics and
/// reference oracles may call `row` directly.
pub trait DistanceOracle: Send + Sync {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn row(&self, p: usize) -> DistanceRow;
}

/// Fetches `d(p, .)` through the ledger. Cache hits do not count.
pub fn query_one_vs_all(
    oracle: &(impl DistanceOracle + ?Sized),
    p: usize,
    ledger: &QueryLedger,
) -> Result<DistanceRow, OracleError> {
    if p >= oracle.len() {
        return Err(OracleError::IndexOutOfRange {
            index: p,
            n: oracle.len(),
        });
    }
    Ok(DistanceRow(ledger.fetch_row(p, || oracle.row(p).0)))
}

/// Points in d-dimensional Euclidean space; rows are computed on demand.
pub struct EuclideanOracle {
    coords: Vec<f64>,
    n: usize,
    dim: usize,
}

impl EuclideanOracle {
    pub fn new(coords: Vec<f64>, n: usize, dim: usize) -> Self {
        assert_eq!(coords.len(), n * dim, "coordinate buffer has wrong size");
        EuclideanOracle { coords, n, dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let a = self.point(i);
        let b = self.point(j);
        let mut sum = 0.0;
        for d in 0..self.dim {
            let diff = a[d] - b[d];
            sum += diff * diff;
        }
        sum.sqrt()
    }
}

impl DistanceOracle for EuclideanOracle {
    fn len(&self) -> usize {
        self.n
    }

    fn row(&self, p: usize) -> DistanceRow {
        let mut row = Vec::with_capacity(self.n);
        for j in 0..self.n {
            row.push(self.distance(p, j));
        }
        row[p] = 0.0;
        DistanceRow(row.into())
    }
}

/// An explicit n-by-n distance matrix held in memory.
pub struct MatrixOracle {
    entries: Vec<f64>,
    n: usize,
}

impl MatrixOracle {
    /// Validates and normalizes raw rows: negative entries are rejected, the
    /// diagonal is forced to zero, and asymmetric pairs are replaced by the
    /// smaller of the two values (with a warning).
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, OracleError> {
        let n = rows.len();
        let mut entries = vec![0.0; n * n];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(OracleError::RowLength {
                    path: "<memory>".into(),
                    line: i + 1,
                    expected: n,
                    got: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                if v < 0.0 || v.is_nan() {
                    return Err(OracleError::NegativeDistance { i, j, value: v });
                }
                entries[i * n + j] = v;
            }
        }
        let mut asymmetric = 0usize;
        for i in 0..n {
            entries[i * n + i] = 0.0;
            for j in (i + 1)..n {
                let a = entries[i * n + j];
                let b = entries[j * n + i];
                if a != b {
                    asymmetric += 1;
                    let m = a.min(b);
                    entries[i * n + j] = m;
                    entries[j * n + i] = m;
                }
            }
        }
        if asymmetric > 0 {
            log::warn!("symmetrized {asymmetric} asymmetric matrix pairs by taking the minimum");
        }
        Ok(MatrixOracle { entries, n })
    }

    /// Materializes any oracle as a full matrix. Intended for small
    /// instances; this performs `n` raw row computations.
    pub fn from_oracle(oracle: &(impl DistanceOracle + ?Sized)) -> Self {
        let n = oracle.len();
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            entries.extend_from_slice(&oracle.row(i));
        }
        MatrixOracle { entries, n }
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }
}

impl DistanceOracle for MatrixOracle {
    fn len(&self) -> usize {
        self.n
    }

    fn row(&self, p: usize) -> DistanceRow {
        DistanceRow(self.entries[p * self.n..(p + 1) * self.n].into())
    }
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_value(path: &str, line: usize, token: &str) -> Result<f64, OracleError> {
    let bad = || OracleError::BadToken {
        path: path.to_string(),
        line,
        token: token.to_string(),
    };
    let v: f64 = token.parse().map_err(|_| bad())?;
    if v.is_nan() {
        return Err(bad());
    }
    Ok(v)
}

/// Loads the points format: a `n dim` header, then n rows of dim
/// whitespace-separated reals. `#` comments and blank lines are skipped.
pub fn load_points_file(path: &Path) -> Result<EuclideanOracle, OracleError> {
    let name = path.display().to_string();
    let text = std::fs::read_to_string(path)?;
    let mut lines = data_lines(&text);
    let (_, header) = lines.next().ok_or_else(|| OracleError::MissingHeader {
        path: name.clone(),
    })?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let header_err = || OracleError::MalformedHeader {
        path: name.clone(),
        header: header.to_string(),
        expected: "\"n dim\" with positive integers",
    };
    if fields.len() != 2 {
        return Err(header_err());
    }
    let n: usize = fields[0].parse().map_err(|_| header_err())?;
    let dim: usize = fields[1].parse().map_err(|_| header_err())?;
    if n == 0 || dim == 0 {
        return Err(header_err());
    }

    let mut coords = Vec::with_capacity(n * dim);
    let mut rows = 0usize;
    for (line, row) in lines {
        let tokens: Vec<&str> = row.split_whitespace().collect();
        if tokens.len() != dim {
            return Err(OracleError::RowLength {
                path: name,
                line,
                expected: dim,
                got: tokens.len(),
            });
        }
        for token in tokens {
            let v = parse_value(&name, line, token)?;
            if !v.is_finite() {
                return Err(OracleError::BadToken {
                    path: name,
                    line,
                    token: token.to_string(),
                });
            }
            coords.push(v);
        }
        rows += 1;
    }
    if rows != n {
        return Err(OracleError::RowCount {
            path: name,
            expected: n,
            got: rows,
        });
    }
    Ok(EuclideanOracle::new(coords, n, dim))
}

/// Writes the points format with enough digits to round-trip exactly.
pub fn write_points_file(
    path: &Path,
    points: impl ExactSizeIterator<Item = Vec<f64>>,
    dim: usize,
    comments: &[String],
) -> Result<(), OracleError> {
    let mut out = String::new();
    for c in comments {
        writeln!(out, "# {c}").expect("string write");
    }
    writeln!(out, "{} {}", points.len(), dim).expect("string write");
    for p in points {
        debug_assert_eq!(p.len(), dim);
        for (d, v) in p.iter().enumerate() {
            if d > 0 {
                out.push(' ');
            }
            write!(out, "{v:.16e}").expect("string write");
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Loads the matrix format: a `n` header, then n rows of n entries where
/// `inf` marks an unknown or unreachable pair. The result is validated and
/// symmetrized by [`MatrixOracle::from_rows`].
pub fn load_matrix_file(path: &Path) -> Result<MatrixOracle, OracleError> {
    let name = path.display().to_string();
    let text = std::fs::read_to_string(path)?;
    let mut lines = data_lines(&text);
    let (_, header) = lines.next().ok_or_else(|| OracleError::MissingHeader {
        path: name.clone(),
    })?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let header_err = || OracleError::MalformedHeader {
        path: name.clone(),
        header: header.to_string(),
        expected: "a single positive integer n",
    };
    if fields.len() != 1 {
        return Err(header_err());
    }
    let n: usize = fields[0].parse().map_err(|_| header_err())?;
    if n == 0 {
        return Err(header_err());
    }

    let mut rows = Vec::with_capacity(n);
    for (line, row) in lines {
        let tokens: Vec<&str> = row.split_whitespace().collect();
        if tokens.len() != n {
            return Err(OracleError::RowLength {
                path: name,
                line,
                expected: n,
                got: tokens.len(),
            });
        }
        let mut values = Vec::with_capacity(n);
        for token in tokens {
            values.push(parse_value(&name, line, token)?);
        }
        rows.push(values);
    }
    if rows.len() != n {
        return Err(OracleError::RowCount {
            path: name,
            expected: n,
            got: rows.len(),
        });
    }
    MatrixOracle::from_rows(rows)
}
