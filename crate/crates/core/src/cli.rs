//! The `emofad` command line.
//!
//! Exit codes: 0 on success, 1 on a domain error (reported on stderr as
//! `ERROR <code>: <detail>`), 2 on a usage error. Files given with `-o` are
//! written to a temporary file in the target directory and renamed into
//! place.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;
use serde::Serialize;
use tempfile::NamedTempFile;

use crate::conditioning::{condition_music, ConditioningWeights, EmotionCondition, MusicEmbedding};
use crate::error::Error;
use crate::frechet::{frechet_distance_with, FadConfig};
use crate::io::{load_embeddings, load_manifest, npy, DatasetManifest, EmbeddingSet};
use crate::metrics::probe::{cross_validate_classification, cross_validate_regression, CvConfig, SoftmaxConfig};
use crate::metrics::ProbeMetric;
use crate::partition::{partition, va_to_quadrant, GroupBy, Quadrant, QuadrantConvention};
use crate::report::{
    compare_sources, pairwise_fad, render_comparison, render_report, FadReport, PairwiseConfig, ReportFormat,
};
use crate::stats::{CovarianceMode, GaussianStats};
use crate::synth::run_oracle_suite;

#[derive(Debug, Parser)]
#[command(
    name = "emofad",
    version,
    about = "Frechet audio distance between emotion groups of music embeddings"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit mean and covariance to an embedding file.
    Stats(StatsArgs),
    /// FAD between two embedding files or stats files.
    Fad(FadArgs),
    /// FAD between every pair of groups in a dataset, for every encoder.
    Pairwise(PairwiseArgs),
    /// Compare candidate pairwise reports against a reference report.
    Compare(CompareArgs),
    /// Cross-validated linear probe on embeddings.
    Probe(ProbeArgs),
    /// Emotion-conditioned cross-attention over music tokens.
    Condition(ConditionArgs),
    /// Run the synthetic oracle checks.
    SynthCheck(SynthCheckArgs),
}

#[derive(Debug, Args)]
struct StatsArgs {
    /// Embedding file (.npy, or headerless .csv).
    #[arg(long)]
    embeddings: PathBuf,
    /// Encoder id to record [default: file stem].
    #[arg(long)]
    encoder: Option<String>,
    #[arg(long, default_value_t = CovarianceMode::Sample)]
    covariance: CovarianceMode,
    /// Output path [default: stdout].
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FadArgs {
    /// First set: .npy, .csv, or a stats .json.
    #[arg(long)]
    a: PathBuf,
    /// Second set: .npy, .csv, or a stats .json.
    #[arg(long)]
    b: PathBuf,
    /// Diagonal loading, relative to the mean variance.
    #[arg(long, default_value_t = 0.0)]
    eps: f64,
    #[arg(long, default_value_t = CovarianceMode::Sample)]
    covariance: CovarianceMode,
}

#[derive(Debug, Args)]
struct PairwiseArgs {
    /// CSV with columns clip_id, valence, arousal, label.
    #[arg(long)]
    manifest: PathBuf,
    /// Directory of embedding files, one per encoder (id = file stem).
    #[arg(long)]
    embeddings_dir: PathBuf,
    #[arg(long, default_value = "quadrant")]
    group_by: GroupBy,
    #[arg(long, default_value_t = QuadrantConvention::EmoMusic)]
    convention: QuadrantConvention,
    /// Dataset name for the report [default: manifest file stem].
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    jobs: u32,
    #[arg(long, default_value = "json")]
    format: ReportFormat,
    /// Min-max normalize each encoder's scores before averaging.
    #[arg(long)]
    normalize: bool,
    #[arg(long, default_value_t = 0.0)]
    eps: f64,
    #[arg(long, default_value_t = CovarianceMode::Sample)]
    covariance: CovarianceMode,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CompareArgs {
    /// Pairwise JSON report of the reference source.
    #[arg(long)]
    reference: PathBuf,
    /// Pairwise JSON reports of candidate sources.
    #[arg(long, required = true, num_args = 1..)]
    candidate: Vec<PathBuf>,
    #[arg(long, default_value = "markdown")]
    format: ReportFormat,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum ProbeTask {
    Valence,
    Arousal,
    Quadrant,
    /// Manifest label column.
    Cluster,
}

#[derive(Debug, Args)]
struct ProbeArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long, value_enum)]
    task: ProbeTask,
    /// r2 for valence/arousal; wa, ua or f1 for quadrant/cluster
    /// [default: r2 or wa].
    #[arg(long)]
    metric: Option<ProbeMetric>,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Ridge penalty.
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Softmax training epochs.
    #[arg(long, default_value_t = 500)]
    epochs: usize,
    /// Softmax initial step size.
    #[arg(long, default_value_t = 0.5)]
    lr: f64,
    #[arg(long, default_value_t = QuadrantConvention::EmoMusic)]
    convention: QuadrantConvention,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ConditionArgs {
    #[arg(long)]
    quadrant: Quadrant,
    #[arg(long, allow_hyphen_values = true)]
    valence: f64,
    #[arg(long, allow_hyphen_values = true)]
    arousal: f64,
    #[arg(long, default_value_t = 0.5)]
    wgt_q: f64,
    /// JSON file with the embedding tables and attention projections.
    #[arg(long)]
    weights: PathBuf,
    /// Music tokens, one row per token (.npy).
    #[arg(long)]
    music: PathBuf,
    #[arg(long, default_value_t = QuadrantConvention::Russell)]
    convention: QuadrantConvention,
    /// Attention output (.npy, 1 x d_v).
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct SynthCheckArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

enum Failure {
    Usage(String),
    Domain(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Domain(e)
    }
}

type CliResult = std::result::Result<(), Failure>;

/// Parses `args` (program name first) and runs the subcommand. Returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let outcome = match cli.command {
        Command::Stats(a) => cmd_stats(a),
        Command::Fad(a) => cmd_fad(a),
        Command::Pairwise(a) => cmd_pairwise(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Probe(a) => cmd_probe(a),
        Command::Condition(a) => cmd_condition(a),
        Command::SynthCheck(a) => return cmd_synth_check(a),
    };
    match outcome {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(Failure::Domain(e)) => {
            eprintln!("ERROR {}: {}", e.code(), e);
            1
        }
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), Error> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

fn emit(output: Option<&Path>, text: &str) -> Result<(), Error> {
    match output {
        Some(path) => write_atomic(path, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn to_json_line<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("serializable output");
    text.push('\n');
    text
}

fn cmd_stats(args: StatsArgs) -> CliResult {
    let encoder = args.encoder.unwrap_or_else(|| file_stem(&args.embeddings));
    let set = load_embeddings(&args.embeddings, &encoder)?;
    let stats = GaussianStats::from_embeddings(&set, args.covariance)?;
    let mut text = stats.to_json();
    text.push('\n');
    emit(args.output.as_deref(), &text)?;
    Ok(())
}

fn load_stats(path: &Path, mode: CovarianceMode) -> Result<GaussianStats, Error> {
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        GaussianStats::from_json(&text)
    } else {
        GaussianStats::from_embeddings(&load_embeddings(path, &file_stem(path))?, mode)
    }
}

fn cmd_fad(args: FadArgs) -> CliResult {
    if args.eps.is_nan() || args.eps < 0.0 {
        return Err(Failure::Usage(format!("--eps must be non-negative, got {}", args.eps)));
    }
    let a = load_stats(&args.a, args.covariance)?;
    let b = load_stats(&args.b, args.covariance)?;
    let config = FadConfig {
        eps: args.eps,
        ..FadConfig::default()
    };
    let score = frechet_distance_with(&a, &b, &config)?;
    println!("{}", serde_json::to_string(&score.value).map_err(Error::from)?);
    Ok(())
}

/// Every `.npy` / `.csv` file in `dir`, keyed by file stem.
fn load_encoder_dir(dir: &Path, manifest: &DatasetManifest) -> Result<BTreeMap<String, EmbeddingSet>, Error> {
    let mut paths = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let ext = path.extension().map(|e| e.to_string_lossy().to_ascii_lowercase());
        if path.is_file() && matches!(ext.as_deref(), Some("npy") | Some("csv")) {
            paths.push(path);
        }
    }
    if paths.is_empty() {
        return Err(Error::EmptyInput);
    }
    paths.sort();
    let mut sets = BTreeMap::new();
    for path in paths {
        let encoder = file_stem(&path);
        let set = load_embeddings(&path, &encoder)?.align_to_manifest(manifest)?;
        if sets.insert(encoder.clone(), set).is_some() {
            return Err(Error::InvalidArgument(format!(
                "two embedding files for encoder {encoder:?}"
            )));
        }
    }
    Ok(sets)
}

fn cmd_pairwise(args: PairwiseArgs) -> CliResult {
    if args.eps.is_nan() || args.eps < 0.0 {
        return Err(Failure::Usage(format!("--eps must be non-negative, got {}", args.eps)));
    }
    let manifest = load_manifest(&args.manifest)?;
    let groups = partition(&manifest, args.group_by, args.convention)?;
    let sets = load_encoder_dir(&args.embeddings_dir, &manifest)?;
    let config = PairwiseConfig {
        dataset_id: args.dataset.unwrap_or_else(|| file_stem(&args.manifest)),
        covariance_mode: args.covariance,
        fad: FadConfig {
            eps: args.eps,
            ..FadConfig::default()
        },
        jobs: args.jobs as usize,
        normalize: args.normalize,
    };
    let report = pairwise_fad(&groups, &sets, &config)?;
    emit(args.output.as_deref(), &render_report(&report, args.format))?;
    Ok(())
}

fn read_report(path: &Path) -> Result<FadReport, Error> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    FadReport::from_json(&text)
}

fn cmd_compare(args: CompareArgs) -> CliResult {
    let reference = read_report(&args.reference)?;
    let candidates = args
        .candidate
        .iter()
        .map(|p| read_report(p))
        .collect::<Result<Vec<_>, _>>()?;
    let comparison = compare_sources(&reference, &candidates)?;
    emit(args.output.as_deref(), &render_comparison(&comparison, args.format))?;
    Ok(())
}

#[derive(Serialize)]
struct ProbeOutput {
    task: &'static str,
    metric: &'static str,
    folds: usize,
    seed: u64,
    n: usize,
    fold_scores: Vec<f64>,
    mean: f64,
}

fn cmd_probe(args: ProbeArgs) -> CliResult {
    let regression = matches!(args.task, ProbeTask::Valence | ProbeTask::Arousal);
    let metric = args
        .metric
        .unwrap_or(if regression { ProbeMetric::R2 } else { ProbeMetric::Wa });
    if metric.is_regression() != regression {
        return Err(Failure::Usage(format!(
            "metric {} does not apply to task {:?}",
            metric.as_str(),
            args.task
        )));
    }
    if args.folds < 2 {
        return Err(Failure::Usage("--folds must be at least 2".into()));
    }

    let manifest = load_manifest(&args.manifest)?;
    let set = load_embeddings(&args.embeddings, &file_stem(&args.embeddings))?.align_to_manifest(&manifest)?;

    // Clips lacking the target field are left out of the probe.
    let mut ids = Vec::new();
    let mut targets = Vec::new();
    let mut classes = Vec::new();
    for record in &manifest.records {
        match args.task {
            ProbeTask::Valence | ProbeTask::Arousal => {
                if let Some((v, a)) = record.va() {
                    ids.push(record.clip_id.as_str());
                    targets.push(if args.task == ProbeTask::Valence { v } else { a });
                }
            }
            ProbeTask::Quadrant => {
                if let Some((v, a)) = record.va() {
                    ids.push(record.clip_id.as_str());
                    classes.push(va_to_quadrant(v, a, args.convention)?.to_string());
                }
            }
            ProbeTask::Cluster => {
                if let Some(label) = &record.label {
                    ids.push(record.clip_id.as_str());
                    classes.push(label.clone());
                }
            }
        }
    }
    if ids.is_empty() {
        return Err(Error::EmptyInput.into());
    }
    let x: DMatrix<f64> = set.select_rows(&ids)?.vectors().clone();

    let config = CvConfig {
        folds: args.folds,
        seed: args.seed,
        lambda: args.lambda,
        softmax: SoftmaxConfig {
            epochs: args.epochs,
            learning_rate: args.lr,
        },
    };
    let result = if regression {
        cross_validate_regression(&x, &targets, &config)?
    } else {
        let mut names: Vec<&String> = classes.iter().collect();
        names.sort();
        names.dedup();
        let labels: Vec<usize> = classes
            .iter()
            .map(|c| names.binary_search(&c).expect("class listed"))
            .collect();
        cross_validate_classification(&x, &labels, metric, &config)?
    };
    let out = ProbeOutput {
        task: match args.task {
            ProbeTask::Valence => "valence",
            ProbeTask::Arousal => "arousal",
            ProbeTask::Quadrant => "quadrant",
            ProbeTask::Cluster => "cluster",
        },
        metric: metric.as_str(),
        folds: args.folds,
        seed: args.seed,
        n: ids.len(),
        fold_scores: result.fold_scores,
        mean: result.mean,
    };
    emit(args.output.as_deref(), &to_json_line(&out))?;
    Ok(())
}

fn cmd_condition(args: ConditionArgs) -> CliResult {
    let weights = ConditioningWeights::load(&args.weights)?;
    let bytes = fs::read(&args.music).map_err(|e| Error::io(&args.music, e))?;
    let array = npy::read_npy(&bytes)?;
    if array.shape.len() != 2 {
        return Err(Error::Shape(format!("expected 2-D music tokens, found {}-D", array.shape.len())).into());
    }
    let tokens = DMatrix::from_row_slice(array.shape[0], array.shape[1], &array.data);
    let music = MusicEmbedding::new(tokens)?;
    let cond = EmotionCondition::new(args.quadrant, args.valence, args.arousal, args.wgt_q, args.convention)?;
    let out = condition_music(&cond, &music, &weights)?.output;

    let mut buf = Vec::new();
    npy::write_npy_f64(&mut buf, &[out.nrows(), out.ncols()], out.transpose().as_slice())
        .map_err(|e| Error::io(&args.output, e))?;
    write_atomic(&args.output, &buf)?;
    Ok(())
}

fn cmd_synth_check(args: SynthCheckArgs) -> i32 {
    let checks = run_oracle_suite(args.seed);
    let mut failed = 0;
    for check in &checks {
        let tag = if check.passed { "PASS" } else { "FAIL" };
        println!("[{tag}] {}: {}", check.name, check.detail);
        failed += usize::from(!check.passed);
    }
    println!("{} checks, {} failed", checks.len(), failed);
    i32::from(failed > 0)
}
