//! Argument parsing and subcommand handlers for the `netfusion` binary.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;
use netfusion_core::diffusion::{estimate_atlas, AtlasParams, KernelMode};
use netfusion_core::discrimination::{run_cv, CvParams, DEFAULT_C, DEFAULT_EPOCHS};
use netfusion_core::evaluation::compare_variants;
use netfusion_core::manifest::DatasetManifest;
use netfusion_core::mkl::Bandwidth;
use netfusion_core::synth::{generate, write_synth, SynthSpec};
use netfusion_core::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "netfusion", version, about = "Class-specific brain network atlases and discriminative edges")]
pub struct Cli {
    /// Worker threads for data-parallel sections.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    pub threads: u16,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the atlas of one class.
    Estimate(EstimateArgs),
    /// Cross-validated discriminative-edge classification.
    Classify(ClassifyArgs),
    /// Centeredness of atlases across kernel modes and seeds.
    Compare(CompareArgs),
    /// Write a synthetic two-class dataset.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Args)]
pub struct PipelineArgs {
    /// Diffusion rounds.
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u32).range(1..))]
    pub n_star: u32,
    /// Neighbors kept in each local kernel.
    #[arg(long, default_value_t = 25, value_parser = clap::value_parser!(u32).range(1..))]
    pub knn: u32,
    /// k-means clusters used to supervise the kernel weights.
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u32).range(1..))]
    pub clusters: u32,
    #[arg(long, default_value_t = 0.1, value_parser = non_negative)]
    pub lambda: f64,
    /// RBF bandwidth, a positive number or `auto`.
    #[arg(long, default_value = "auto")]
    pub sigma: Bandwidth,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl PipelineArgs {
    pub fn atlas_params(&self) -> AtlasParams {
        AtlasParams {
            n_star: self.n_star as usize,
            knn: self.knn as usize,
            n_clusters: self.clusters as usize,
            lambda: self.lambda,
            sigma: self.sigma,
            seed: self.seed,
        }
    }
}

fn non_negative(s: &str) -> std::result::Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("expected a non-negative number, got {s:?}")),
    }
}

fn positive(s: &str) -> std::result::Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("expected a positive number, got {s:?}")),
    }
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Class label as written in the manifest.
    #[arg(long)]
    pub class: String,
    #[arg(long, default_value = "multi")]
    pub mode: KernelMode,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Number of top residual edges used as features.
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u32).range(1..))]
    pub nf: u32,
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u32).range(2..))]
    pub folds: u32,
    #[arg(long, default_value = "multi")]
    pub mode: KernelMode,
    /// Positive class label; defaults to the first label in sorted order.
    #[arg(long)]
    pub positive: Option<String>,
    /// SVM regularization.
    #[arg(long = "c", default_value_t = DEFAULT_C, value_parser = positive)]
    pub c_reg: f64,
    #[arg(long, default_value_t = DEFAULT_EPOCHS as u32, value_parser = clap::value_parser!(u32).range(1..))]
    pub epochs: u32,
    /// Report path (JSON).
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the selected edges of every fold as CSV.
    #[arg(long)]
    pub edges_csv: Option<PathBuf>,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "multi,degree")]
    pub modes: Vec<KernelMode>,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub seeds: Vec<u64>,
    /// Output directory for `variants.json` and `variants.csv`.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// JSON file holding a full synthetic spec.
    #[arg(long, conflicts_with_all = ["r", "n_per_class", "n_c", "n_disc", "delta", "noise", "seed"])]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub r: Option<usize>,
    #[arg(long)]
    pub n_per_class: Option<usize>,
    #[arg(long = "clusters")]
    pub n_c: Option<usize>,
    #[arg(long)]
    pub n_disc: Option<usize>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

impl SynthArgs {
    pub fn resolve(&self) -> Result<SynthSpec> {
        if let Some(path) = &self.spec {
            let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
            return Ok(serde_json::from_str(&text)?);
        }
        let d = SynthSpec::default();
        Ok(SynthSpec {
            r: self.r.unwrap_or(d.r),
            n_per_class: self.n_per_class.unwrap_or(d.n_per_class),
            n_c: self.n_c.unwrap_or(d.n_c),
            n_disc: self.n_disc.unwrap_or(d.n_disc),
            delta: self.delta.unwrap_or(d.delta),
            noise: self.noise.unwrap_or(d.noise),
            seed: self.seed.unwrap_or(d.seed),
        })
    }
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io { path: path.to_path_buf(), source }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| io_error(parent, e))?;
    }
    fs::write(path, text).map_err(|e| io_error(path, e))
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn cmd_estimate(args: &EstimateArgs) -> Result<()> {
    let manifest = DatasetManifest::load(&args.manifest)?;
    let mut populations = manifest.load_populations()?;
    let population = populations
        .remove(&args.class)
        .ok_or_else(|| Error::Manifest(format!("class {:?} not in manifest", args.class)))?;
    info!("estimating {} atlas for class {} ({} subjects)", args.mode, args.class, population.len());
    let atlas = estimate_atlas(&population, args.mode, &args.pipeline.atlas_params())?;
    let stem = format!("atlas_{}_{}", args.class, args.mode);
    let (csv, json) = atlas.write(&args.out, &stem, Some(&manifest.digest()?))?;
    info!("wrote {} and {}", csv.display(), json.display());
    Ok(())
}

pub fn cmd_classify(args: &ClassifyArgs) -> Result<()> {
    let manifest = DatasetManifest::load(&args.manifest)?;
    let atlas = args.pipeline.atlas_params();
    let params = CvParams {
        mode: args.mode,
        atlas,
        n_folds: args.folds as usize,
        n_f: args.nf as usize,
        c_reg: args.c_reg,
        epochs: args.epochs as usize,
        seed: args.pipeline.seed,
    };
    let report = run_cv(&manifest, &params, args.positive.as_deref())?;
    info!(
        "mean accuracy {:.4}, sensitivity {:.4}, specificity {:.4}",
        report.mean.accuracy, report.mean.sensitivity, report.mean.specificity
    );
    write_text(&args.out, &to_json(&report)?)?;
    if let Some(path) = &args.edges_csv {
        write_text(path, &report.edges_csv())?;
    }
    Ok(())
}

pub fn cmd_compare(args: &CompareArgs) -> Result<()> {
    let manifest = DatasetManifest::load(&args.manifest)?;
    let report = compare_variants(&manifest, &args.pipeline.atlas_params(), &args.modes, &args.seeds)?;
    for w in &report.win_rates {
        info!("multi vs {}: {}/{} cells at least as centered", w.ablation, w.wins, w.cells);
    }
    write_text(&args.out.join("variants.json"), &report.to_json()?)?;
    write_text(&args.out.join("variants.csv"), &report.to_csv())?;
    Ok(())
}

pub fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let spec = args.resolve()?;
    let data = generate(&spec)?;
    let manifest = write_synth(&args.out, &spec, &data)?;
    info!("wrote {} subjects under {}", manifest.entries.len(), args.out.display());
    Ok(())
}

/// Runs a parsed command inside a pool of `cli.threads` workers.
pub fn run(cli: &Cli) -> Result<()> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads as usize)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Estimate(a) => cmd_estimate(a),
        Command::Classify(a) => cmd_classify(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Synth(a) => cmd_synth(a),
    })
}
