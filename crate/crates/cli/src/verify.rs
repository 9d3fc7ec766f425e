use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use lmclust::oracle::{load_points_file, MatrixOracle};
use lmclust::reference::classify_good_bad;

#[derive(Args)]
pub struct VerifyArgs {
    /// Points file to check (small; exhaustive search inside)
    #[arg(long)]
    input: PathBuf,
    /// Number of clusters the structure should form
    #[arg(long)]
    k: usize,
    /// Scale factor of the margin conditions
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Closeness target of the margin conditions
    #[arg(long)]
    epsilon: f64,
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

/// Checks that the well-determined cores of an exhaustively optimal
/// solution are tight (diameter below 2 critical distances), mutually far
/// (above 16), and that few points fall outside them. Exit 0 only when
/// all three hold.
pub fn run(args: VerifyArgs) -> anyhow::Result<i32> {
    let points = load_points_file(&args.input)
        .with_context(|| format!("reading {}", args.input.display()))?;
    let matrix = MatrixOracle::from_oracle(&points);
    let (solution, report) = classify_good_bad(&matrix, args.k, args.alpha, args.epsilon)?;
    let d_crit = report.d_crit;

    let mut diameter = 0.0f64;
    for set in &report.good_sets {
        for (i, &a) in set.iter().enumerate() {
            for &b in &set[i + 1..] {
                diameter = diameter.max(matrix.distance(a, b));
            }
        }
    }
    let mut separation = f64::INFINITY;
    for (i, left) in report.good_sets.iter().enumerate() {
        for right in &report.good_sets[i + 1..] {
            for &a in left {
                for &b in right {
                    separation = separation.min(matrix.distance(a, b));
                }
            }
        }
    }

    let tight = diameter < 2.0 * d_crit;
    let far = separation > 16.0 * d_crit;
    let sparse = report.bad_points.len() <= report.bad_bound;
    println!(
        "optimal value {} with centers {:?}; d_crit={}",
        solution.value, solution.centers, d_crit
    );
    println!(
        "core diameter < 2*d_crit: {} ({diameter} vs {})",
        verdict(tight),
        2.0 * d_crit
    );
    println!(
        "core separation > 16*d_crit: {} ({separation} vs {})",
        verdict(far),
        16.0 * d_crit
    );
    println!(
        "outliers <= {}: {} ({} outside the cores)",
        report.bad_bound,
        verdict(sparse),
        report.bad_points.len()
    );
    Ok(if tight && far && sparse { 0 } else { 1 })
}
