use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, ValueEnum};
use lmclust::synth::{generate, geometric_weights, write_dataset, GeneratorSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// Well-separated instance sized for the full parameter derivation.
    Theory,
    /// Large instance, cluster sizes spread over one order of magnitude.
    PfamLike,
    /// Small instance with the same size spread.
    ScopLike,
    /// One Gaussian blob with arbitrary labels; negative control.
    Blob,
}

pub fn spec_for(preset: Preset, seed: u64) -> GeneratorSpec {
    match preset {
        Preset::Theory => GeneratorSpec::theory(seed),
        Preset::PfamLike => GeneratorSpec::pfam_like(seed),
        Preset::ScopLike => GeneratorSpec::scop_like(seed),
        Preset::Blob => GeneratorSpec::blob(2000, 8, 4, seed),
    }
}

#[derive(Args)]
pub struct GenArgs {
    /// Instance family to draw from
    #[arg(long, value_enum)]
    preset: Preset,
    /// Override the preset's point count
    #[arg(long)]
    n: Option<usize>,
    /// Override the preset's cluster count (resets size weights to the
    /// preset's shape at the new count)
    #[arg(long)]
    k: Option<usize>,
    /// Override the preset's dimension
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path for the points file
    #[arg(long)]
    points: PathBuf,
    /// Output path for the truth labels
    #[arg(long)]
    labels: PathBuf,
}

pub fn run(args: GenArgs) -> anyhow::Result<i32> {
    let mut spec = spec_for(args.preset, args.seed);
    if let Some(n) = args.n {
        spec.n = n;
    }
    if let Some(k) = args.k {
        spec.k = k;
        if !spec.size_weights.is_empty() {
            spec.size_weights = geometric_weights(k, 10.0);
        }
    }
    if let Some(dim) = args.dim {
        spec.dim = dim;
    }
    let ds = generate(&spec).context("generating the dataset")?;
    write_dataset(&ds, &args.points, &args.labels).with_context(|| {
        format!(
            "writing {} and {}",
            args.points.display(),
            args.labels.display()
        )
    })?;
    println!(
        "wrote n={} dim={} k={} seed={} to {} and {}",
        ds.n(),
        ds.dim(),
        ds.k(),
        args.seed,
        args.points.display(),
        args.labels.display()
    );
    Ok(0)
}
