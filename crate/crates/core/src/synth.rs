//! Synthetic datasets with known structure: well-separated uniform balls
//! plus a sprinkling of outliers, labeled by nearest planted center. A
//! single-blob variant provides a negative control with no real clusters.

use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::model::{ceil_tol, Clustering};
use crate::oracle::{write_points_file, EuclideanOracle, OracleError};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("dataset needs at least one point, one cluster and one dimension")]
    EmptyShape,
    #[error("core radius must be positive and finite, got {0}")]
    BadRadius(f64),
    #[error("center separation must be positive and finite, got {0}")]
    BadSeparation(f64),
    #[error("size weights must be {expected} positive finite values")]
    BadWeights { expected: usize },
    #[error("outlier fraction must lie in [0, 1), got {0}")]
    BadOutlierFraction(f64),
    #[error("outlier spread must satisfy 0 < lo <= hi, got ({0}, {1})")]
    BadOutlierSpread(f64, f64),
    #[error("cluster {cluster} would receive no points; raise n or rebalance the weights")]
    EmptyCluster { cluster: usize },
    #[error(
        "smallest planted cluster holds {min_size} points but the declared \
         margins need at least {required}"
    )]
    TheoryTargetViolated { min_size: usize, required: usize },
    #[error(
        "could not place {k} centers at pairwise separation {separation} \
         after {placed} succeeded; enlarge the placement box or lower the separation"
    )]
    CenterPlacement {
        placed: usize,
        k: usize,
        separation: f64,
    },
    #[error(transparent)]
    Io(#[from] OracleError),
}

/// Margins a planted instance is designed to satisfy, used to gate the
/// smallest cluster size at generation time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryTarget {
    pub alpha: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    /// k uniform balls with pairwise-separated centers plus outliers.
    PlantedBalls,
    /// One Gaussian blob with round-robin labels; no real cluster structure.
    Blob,
}

#[derive(Debug, Clone)]
pub struct GeneratorSpec {
    pub kind: DatasetKind,
    pub n: usize,
    pub k: usize,
    pub dim: usize,
    /// Core ball radius (or the Gaussian sigma for [`DatasetKind::Blob`]).
    pub core_radius: f64,
    /// Minimum pairwise distance between planted centers.
    pub separation: f64,
    /// Relative cluster sizes; empty means equal.
    pub size_weights: Vec<f64>,
    /// Fraction of points placed outside the cores.
    pub outlier_fraction: f64,
    /// Outlier distance from its host center, as a uniform multiple of the
    /// core radius in this range.
    pub outlier_spread: (f64, f64),
    pub seed: u64,
    pub theory_target: Option<TheoryTarget>,
}

impl GeneratorSpec {
    /// Well-separated instance sized so the full parameter derivation
    /// (alpha = 1, epsilon = 0.002, any delta) is satisfiable at n = 2000.
    pub fn theory(seed: u64) -> Self {
        GeneratorSpec {
            kind: DatasetKind::PlantedBalls,
            n: 2000,
            k: 8,
            dim: 4,
            core_radius: 1.0,
            separation: 600.0,
            size_weights: Vec::new(),
            outlier_fraction: 0.02,
            outlier_spread: (2.5, 5.0),
            seed,
            theory_target: Some(TheoryTarget {
                alpha: 1.0,
                epsilon: 0.002,
            }),
        }
    }

    /// Large instance with cluster sizes spread over one order of
    /// magnitude, after the larger protein-family benchmark shape.
    pub fn pfam_like(seed: u64) -> Self {
        GeneratorSpec {
            kind: DatasetKind::PlantedBalls,
            n: 8000,
            k: 8,
            dim: 4,
            core_radius: 1.0,
            separation: 60.0,
            size_weights: geometric_weights(8, 10.0),
            outlier_fraction: 0.02,
            outlier_spread: (2.5, 5.0),
            seed,
            theory_target: None,
        }
    }

    /// Small instance with cluster sizes spread over one order of
    /// magnitude, after the smaller protein-structure benchmark shape.
    pub fn scop_like(seed: u64) -> Self {
        GeneratorSpec {
            kind: DatasetKind::PlantedBalls,
            n: 800,
            k: 8,
            dim: 4,
            core_radius: 1.0,
            separation: 60.0,
            size_weights: geometric_weights(8, 10.0),
            outlier_fraction: 0.02,
            outlier_spread: (2.5, 5.0),
            seed,
            theory_target: None,
        }
    }

    /// Negative control: one blob, arbitrary labels.
    pub fn blob(n: usize, k: usize, dim: usize, seed: u64) -> Self {
        GeneratorSpec {
            kind: DatasetKind::Blob,
            n,
            k,
            dim,
            core_radius: 1.0,
            separation: 0.0,
            size_weights: Vec::new(),
            outlier_fraction: 0.0,
            outlier_spread: (2.5, 5.0),
            seed,
            theory_target: None,
        }
    }
}

/// Weights 1, r, r^2, ... scaled so the largest is `ratio` times the
/// smallest.
pub fn geometric_weights(k: usize, ratio: f64) -> Vec<f64> {
    if k <= 1 {
        return vec![1.0; k];
    }
    let step = ratio.powf(1.0 / (k - 1) as f64);
    (0..k).map(|i| step.powi(i as i32)).collect()
}

/// A generated dataset: coordinates, truth labels and the planted centers
/// the labels refer to.
#[derive(Debug, Clone)]
pub struct LabeledDataset {
    pub spec: GeneratorSpec,
    points: Vec<f64>,
    labels: Vec<usize>,
    centers: Vec<f64>,
}

impl LabeledDataset {
    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    pub fn k(&self) -> usize {
        self.spec.k
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.spec.dim..(i + 1) * self.spec.dim]
    }

    pub fn center(&self, i: usize) -> &[f64] {
        &self.centers[i * self.spec.dim..(i + 1) * self.spec.dim]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn truth(&self) -> Clustering {
        Clustering::from_labels(&self.labels, self.spec.k)
    }

    pub fn to_oracle(&self) -> EuclideanOracle {
        EuclideanOracle::new(self.points.clone(), self.n(), self.spec.dim)
    }

    /// Returns a copy with every coordinate multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> LabeledDataset {
        let mut out = self.clone();
        for v in &mut out.points {
            *v *= factor;
        }
        for v in &mut out.centers {
            *v *= factor;
        }
        out
    }
}

fn unit_direction(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Uniform draw from the ball of the given radius around a center.
fn ball_point(rng: &mut impl Rng, center: &[f64], radius: f64) -> Vec<f64> {
    let dim = center.len();
    let dir = unit_direction(rng, dim);
    let r = radius * rng.random::<f64>().powf(1.0 / dim as f64);
    center.iter().zip(dir).map(|(c, d)| c + r * d).collect()
}

fn nearest_center(centers: &[f64], dim: usize, k: usize, p: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for i in 0..k {
        let c = &centers[i * dim..(i + 1) * dim];
        let d: f64 = c
            .iter()
            .zip(p)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>();
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

/// Splits `total` into `k` parts proportional to `weights`, distributing
/// the remainder by largest fractional share (ties to the lower index).
fn apportion(total: usize, weights: &[f64]) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    let raw: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
    let mut sizes: Vec<usize> = raw.iter().map(|r| r.floor() as usize).collect();
    let mut remainder = total - sizes.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = raw[a] - raw[a].floor();
        let fb = raw[b] - raw[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in &order {
        if remainder == 0 {
            break;
        }
        sizes[i] += 1;
        remainder -= 1;
    }
    sizes
}

fn validate(spec: &GeneratorSpec) -> Result<(), SynthError> {
    if spec.n == 0 || spec.k == 0 || spec.dim == 0 {
        return Err(SynthError::EmptyShape);
    }
    if !(spec.core_radius > 0.0) || !spec.core_radius.is_finite() {
        return Err(SynthError::BadRadius(spec.core_radius));
    }
    if spec.kind == DatasetKind::PlantedBalls {
        if spec.k > 1 && (!(spec.separation > 0.0) || !spec.separation.is_finite()) {
            return Err(SynthError::BadSeparation(spec.separation));
        }
        if !spec.size_weights.is_empty()
            && (spec.size_weights.len() != spec.k
                || spec.size_weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()))
        {
            return Err(SynthError::BadWeights { expected: spec.k });
        }
        if !(0.0..1.0).contains(&spec.outlier_fraction) {
            return Err(SynthError::BadOutlierFraction(spec.outlier_fraction));
        }
        let (lo, hi) = spec.outlier_spread;
        if !(lo > 0.0) || lo > hi || !hi.is_finite() {
            return Err(SynthError::BadOutlierSpread(lo, hi));
        }
    }
    Ok(())
}

pub fn generate(spec: &GeneratorSpec) -> Result<LabeledDataset, SynthError> {
    validate(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    match spec.kind {
        DatasetKind::Blob => generate_blob(spec, &mut rng),
        DatasetKind::PlantedBalls => generate_planted(spec, &mut rng),
    }
}

fn generate_blob(spec: &GeneratorSpec, rng: &mut impl Rng) -> Result<LabeledDataset, SynthError> {
    let mut points = Vec::with_capacity(spec.n * spec.dim);
    for _ in 0..spec.n * spec.dim {
        let z: f64 = rng.sample(StandardNormal);
        points.push(z * spec.core_radius);
    }
    let labels = (0..spec.n).map(|i| i % spec.k).collect();
    Ok(LabeledDataset {
        spec: spec.clone(),
        points,
        labels,
        centers: vec![0.0; spec.k * spec.dim],
    })
}

fn generate_planted(
    spec: &GeneratorSpec,
    rng: &mut impl Rng,
) -> Result<LabeledDataset, SynthError> {
    let equal = vec![1.0; spec.k];
    let weights = if spec.size_weights.is_empty() {
        &equal
    } else {
        &spec.size_weights
    };
    let outliers = (spec.outlier_fraction * spec.n as f64).round() as usize;
    let core_total = spec.n - outliers;
    let sizes = apportion(core_total, weights);
    if let Some(cluster) = sizes.iter().position(|&s| s == 0) {
        return Err(SynthError::EmptyCluster { cluster });
    }
    if let Some(target) = spec.theory_target {
        let required = ceil_tol((4.0 + 51.0 / target.alpha) * target.epsilon * spec.n as f64);
        let min_size = *sizes.iter().min().expect("k >= 1");
        if min_size < required {
            return Err(SynthError::TheoryTargetViolated { min_size, required });
        }
    }

    // Centers by rejection sampling in a box that comfortably fits k balls
    // of the required separation.
    let side = spec.separation.max(spec.core_radius)
        * 2.0
        * (spec.k as f64).powf(1.0 / spec.dim as f64);
    let mut centers: Vec<f64> = Vec::with_capacity(spec.k * spec.dim);
    for placed in 0..spec.k {
        let mut ok = false;
        for _attempt in 0..500 {
            let candidate: Vec<f64> = (0..spec.dim).map(|_| rng.random::<f64>() * side).collect();
            let fits = (0..placed).all(|j| {
                let c = &centers[j * spec.dim..(j + 1) * spec.dim];
                let d2: f64 = c
                    .iter()
                    .zip(&candidate)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                d2.sqrt() >= spec.separation
            });
            if fits {
                centers.extend_from_slice(&candidate);
                ok = true;
                break;
            }
        }
        if !ok {
            return Err(SynthError::CenterPlacement {
                placed,
                k: spec.k,
                separation: spec.separation,
            });
        }
    }

    let mut points = Vec::with_capacity(spec.n * spec.dim);
    let mut labels = Vec::with_capacity(spec.n);
    for (cluster, &size) in sizes.iter().enumerate() {
        let center = centers[cluster * spec.dim..(cluster + 1) * spec.dim].to_vec();
        for _ in 0..size {
            points.extend(ball_point(rng, &center, spec.core_radius));
            labels.push(cluster);
        }
    }
    let (lo, hi) = spec.outlier_spread;
    for _ in 0..outliers {
        let host = rng.random_range(0..spec.k);
        let center = &centers[host * spec.dim..(host + 1) * spec.dim];
        let radius = spec.core_radius * (lo + (hi - lo) * rng.random::<f64>());
        let dir = unit_direction(rng, spec.dim);
        let p: Vec<f64> = center.iter().zip(dir).map(|(c, d)| c + radius * d).collect();
        labels.push(nearest_center(&centers, spec.dim, spec.k, &p));
        points.extend(p);
    }

    Ok(LabeledDataset {
        spec: spec.clone(),
        points,
        labels,
        centers,
    })
}

/// Writes the points and truth labels, each with a provenance comment
/// header that the loaders skip.
pub fn write_dataset(
    ds: &LabeledDataset,
    points_path: &Path,
    labels_path: &Path,
) -> Result<(), SynthError> {
    let spec = &ds.spec;
    let kind = match spec.kind {
        DatasetKind::PlantedBalls => "planted-balls",
        DatasetKind::Blob => "blob",
    };
    let comments = vec![
        format!(
            "generated: kind={kind} n={} k={} dim={} seed={}",
            spec.n, spec.k, spec.dim, spec.seed
        ),
        format!(
            "shape: core_radius={} separation={} outlier_fraction={} outlier_spread={}..{}",
            spec.core_radius,
            spec.separation,
            spec.outlier_fraction,
            spec.outlier_spread.0,
            spec.outlier_spread.1
        ),
    ];
    let n = ds.n();
    write_points_file(
        points_path,
        (0..n).map(|i| ds.point(i).to_vec()),
        ds.dim(),
        &comments,
    )?;

    let mut out = format!("# truth labels: k={} seed={}\n", spec.k, spec.seed);
    for &l in ds.labels() {
        out.push_str(&format!("{l}\n"));
    }
    std::fs::write(labels_path, out).map_err(OracleError::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn planted_centers_respect_separation() {
        let ds = generate(&GeneratorSpec::theory(3)).unwrap();
        let k = ds.k();
        for i in 0..k {
            for j in (i + 1)..k {
                let d: f64 = ds
                    .center(i)
                    .iter()
                    .zip(ds.center(j))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                assert!(d >= 600.0, "centers {i},{j} at distance {d}");
            }
        }
    }

    #[test]
    fn core_points_sit_inside_their_ball_and_label() {
        let ds = generate(&GeneratorSpec::theory(4)).unwrap();
        let outliers = (0.02 * 2000.0_f64).round() as usize;
        for i in 0..(ds.n() - outliers) {
            let l = ds.labels()[i];
            let d: f64 = ds
                .point(i)
                .iter()
                .zip(ds.center(l))
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            assert!(d <= 1.0 + 1e-9, "core point {i} at distance {d}");
        }
        // Outliers are labeled by their nearest center.
        for i in (ds.n() - outliers)..ds.n() {
            let want = nearest_center(
                &ds.centers,
                ds.dim(),
                ds.k(),
                ds.point(i),
            );
            assert_eq!(ds.labels()[i], want);
        }
    }

    #[test]
    fn sizes_follow_weights() {
        let mut spec = GeneratorSpec::scop_like(1);
        spec.n = 800;
        let ds = generate(&spec).unwrap();
        let truth = ds.truth();
        let members = truth.members();
        let sizes: Vec<usize> = members.iter().map(|m| m.len()).collect();
        // Geometric weights over one order of magnitude: the largest
        // cluster is several times the smallest.
        let (min, max) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
        assert!(*min >= 10, "smallest cluster {min}");
        assert!(*max >= 6 * *min, "sizes {sizes:?}");
        assert_eq!(sizes.iter().sum::<usize>(), 800);
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate(&GeneratorSpec::theory(9)).unwrap();
        let b = generate(&GeneratorSpec::theory(9)).unwrap();
        assert_eq!(a.points, b.points);
        assert_eq!(a.labels, b.labels);
        let c = generate(&GeneratorSpec::theory(10)).unwrap();
        assert_ne!(a.points, c.points);
    }

    #[test]
    fn blob_has_round_robin_labels() {
        let ds = generate(&GeneratorSpec::blob(10, 3, 2, 0)).unwrap();
        assert_eq!(ds.labels(), &[0, 1, 2, 0, 1, 2, 0, 1, 2, 0]);
        assert_eq!(ds.n(), 10);
    }

    #[test]
    fn theory_gate_rejects_undersized_clusters() {
        let mut spec = GeneratorSpec::theory(0);
        // Margins that demand clusters larger than n/k can provide.
        spec.theory_target = Some(TheoryTarget {
            alpha: 1.0,
            epsilon: 0.02,
        });
        let err = generate(&spec).unwrap_err();
        assert!(matches!(
            err,
            SynthError::TheoryTargetViolated { required: 2200, .. }
        ));
    }

    #[test]
    fn spec_validation_catches_nonsense() {
        let mut spec = GeneratorSpec::theory(0);
        spec.outlier_fraction = 1.0;
        assert!(matches!(
            generate(&spec),
            Err(SynthError::BadOutlierFraction(_))
        ));
        let mut spec = GeneratorSpec::theory(0);
        spec.core_radius = 0.0;
        assert!(matches!(generate(&spec), Err(SynthError::BadRadius(_))));
        let mut spec = GeneratorSpec::theory(0);
        spec.size_weights = vec![1.0; 3];
        assert!(matches!(
            generate(&spec),
            Err(SynthError::BadWeights { expected: 8 })
        ));
        let mut spec = GeneratorSpec::theory(0);
        spec.n = 0;
        assert!(matches!(generate(&spec), Err(SynthError::EmptyShape)));
    }

    #[test]
    fn starved_cluster_is_an_error() {
        let mut spec = GeneratorSpec::theory(0);
        spec.n = 10;
        spec.k = 3;
        spec.size_weights = vec![1.0, 1.0, 1000.0];
        spec.outlier_fraction = 0.0;
        spec.theory_target = None;
        let err = generate(&spec).unwrap_err();
        assert!(matches!(err, SynthError::EmptyCluster { cluster: 0 }));
    }

    #[test]
    fn apportion_distributes_remainders_deterministically() {
        assert_eq!(apportion(10, &[1.0, 1.0, 1.0]), vec![4, 3, 3]);
        assert_eq!(apportion(7, &[1.0, 2.0, 4.0]), vec![1, 2, 4]);
        assert_eq!(apportion(0, &[1.0, 1.0]), vec![0, 0]);
    }

    #[test]
    fn dataset_files_round_trip() {
        use crate::oracle::{load_points_file, DistanceOracle};
        let dir = tempfile::tempdir().unwrap();
        let points = dir.path().join("points.txt");
        let labels = dir.path().join("labels.txt");
        let mut spec = GeneratorSpec::scop_like(5);
        spec.n = 100;
        let ds = generate(&spec).unwrap();
        write_dataset(&ds, &points, &labels).unwrap();
        let oracle = load_points_file(&points).unwrap();
        assert_eq!(oracle.len(), 100);
        assert_eq!(oracle.point(7), ds.point(7));
        let truth = Clustering::read_file(&labels, Some(ds.k())).unwrap();
        assert_eq!(truth, ds.truth());
    }
}
