//! Command-line front end. Exit codes: 0 success, 1 internal failure,
//! 2 user or input error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{config_hash, RunConfigFile};
use crate::error::{Error, Result};
use crate::gradcheck::{run_gradcheck, GradcheckConfig};
use crate::nn::{load_checkpoint, save_checkpoint};
use crate::pipeline::{
    compute_embeddings, embeddings_csv, error_histogram, eval_report_csv, evaluate, finetune_fewshot, histogram_csv,
    sample_errors_csv, sweep, sweep_csv, train_log_csv, train_with, write_bytes, ClassFilter, CsvMeta, EvalOptions,
    TrainOptions,
};
use crate::synthdata::{generate_dataset, Dataset, Split};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_USER: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "posecontrast", version, about = "Pose-aware contrastive viewpoint estimation on synthetic data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset file.
    Generate(GenerateArgs),
    /// Train a model from scratch or resume from a checkpoint.
    Train(TrainArgs),
    /// Evaluate a checkpoint and export metrics, histograms and embeddings.
    Eval(EvalArgs),
    /// Few-shot fine-tuning on novel classes.
    Finetune(FinetuneArgs),
    /// Finite-difference check of every analytic gradient.
    Gradcheck(GradcheckArgs),
    /// Train and evaluate once per value of one hyperparameter.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out_checkpoint: PathBuf,
    /// Continue from this checkpoint.
    #[arg(long)]
    resume: Option<PathBuf>,
    /// Training log CSV (default: `<out-checkpoint>.log.csv`).
    #[arg(long)]
    log: Option<PathBuf>,
    /// Stop once this many epochs in total are complete.
    #[arg(long)]
    stop_after_epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "val")]
    split: Split,
    /// `all`, `seen`, `unseen` or a comma-separated list of class ids.
    #[arg(long, default_value = "all")]
    classes: ClassFilter,
    /// Report CSV (per-class, mean and global metrics).
    #[arg(long)]
    report: Option<PathBuf>,
    /// Per-class azimuth error histogram CSV.
    #[arg(long)]
    histogram: Option<PathBuf>,
    /// Embedding CSV for every sample of the split.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Per-sample geodesic errors CSV.
    #[arg(long)]
    errors: Option<PathBuf>,
    /// Count only errors strictly below 30 degrees as correct.
    #[arg(long)]
    strict: bool,
}

#[derive(Debug, Args)]
struct FinetuneArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Labelled samples per novel class.
    #[arg(long)]
    shots: usize,
    /// Comma-separated novel class ids (default: the dataset's unseen classes).
    #[arg(long, value_delimiter = ',')]
    classes: Option<Vec<usize>>,
    #[arg(long)]
    out: PathBuf,
    /// Overrides the configuration stored in the checkpoint.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random instances per check.
    #[arg(long, default_value_t = 100)]
    instances: usize,
    /// Negate every analytic gradient (tests that failures are detected).
    #[arg(long)]
    inject_sign_flip: bool,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// One of tau, kappa, lambda, weight_mode.
    #[arg(long)]
    param: String,
    /// Comma-separated values.
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<String>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
}

/// Parses `args` (including the program name) and runs the command.
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
    let result = match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Finetune(a) => cmd_finetune(a),
        Command::Gradcheck(a) => cmd_gradcheck(a),
        Command::Sweep(a) => cmd_sweep(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_user_error() {
                EXIT_USER
            } else {
                EXIT_INTERNAL
            }
        }
    }
}

fn load_config(path: Option<&Path>, seed: Option<u64>) -> Result<RunConfigFile> {
    let mut cfg = RunConfigFile::load_or_default(path)?;
    if let Some(s) = seed {
        cfg.set_seed(s);
    }
    Ok(cfg)
}

fn warn_all(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

fn cmd_generate(a: GenerateArgs) -> Result<i32> {
    let cfg = load_config(a.config.as_deref(), a.seed)?;
    let dataset = generate_dataset(&cfg.renderer, &cfg.split)?;
    warn_all(&dataset.header.warnings);
    dataset.write(&a.out)?;
    println!("wrote {} records to {}", dataset.records.len(), a.out.display());
    Ok(EXIT_OK)
}

/// The stored configuration of a checkpoint written by this tool.
fn stored_config(hyper: &serde_json::Value) -> Result<RunConfigFile> {
    serde_json::from_value(hyper.clone())
        .map_err(|e| Error::Format(format!("checkpoint does not carry a run configuration: {e}")))
}

fn cmd_train(a: TrainArgs) -> Result<i32> {
    let cfg = load_config(a.config.as_deref(), a.seed)?;
    let train_cfg = cfg.train_config();
    train_cfg.validate()?;
    let dataset = Dataset::read(&a.data)?;
    let resume = match &a.resume {
        Some(path) => Some(load_checkpoint(path, Some(&train_cfg.arch))?.0),
        None => None,
    };
    let outcome = train_with(&dataset, &train_cfg, TrainOptions { resume, stop_after_epochs: a.stop_after_epochs })?;
    let hyper = serde_json::to_value(&cfg).map_err(|e| Error::Format(e.to_string()))?;
    save_checkpoint(&outcome.params, hyper, &a.out_checkpoint)?;
    let meta = CsvMeta { seed: train_cfg.seed, config_hash: cfg.hash() };
    let log_path = a.log.unwrap_or_else(|| suffixed(&a.out_checkpoint, ".log.csv"));
    write_bytes(&log_path, &train_log_csv(&outcome.log, Some(&meta))?)?;
    for e in &outcome.log {
        println!(
            "epoch {:>3}: angle={:.6} contrastive={:.6} total={:.6} lr={:e}",
            e.epoch, e.angle_loss, e.contrastive_loss, e.total_loss, e.learning_rate
        );
    }
    println!("checkpoint: {}  log: {}", a.out_checkpoint.display(), log_path.display());
    Ok(EXIT_OK)
}

fn suffixed(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn cmd_eval(a: EvalArgs) -> Result<i32> {
    let (params, header) = load_checkpoint(&a.checkpoint, None)?;
    let dataset = Dataset::read(&a.data)?;
    let meta = CsvMeta { seed: params.seed, config_hash: config_hash(&header.hyperparameters) };
    let options = EvalOptions { strict_acc30: a.strict };
    let report = evaluate(&params, &dataset, a.split, &a.classes, options)?;
    print!("{}", report.summary());
    if let Some(p) = &a.report {
        write_bytes(p, &eval_report_csv(&report, Some(&meta))?)?;
    }
    if let Some(p) = &a.errors {
        write_bytes(p, &sample_errors_csv(&report.errors, Some(&meta))?)?;
    }
    if let Some(p) = &a.histogram {
        let hists = error_histogram(&params, &dataset, a.split, &a.classes)?;
        write_bytes(p, &histogram_csv(&hists, Some(&meta))?)?;
    }
    if let Some(p) = &a.embeddings {
        let rows = compute_embeddings(&params, &dataset, a.split)?;
        write_bytes(p, &embeddings_csv(&rows, Some(&meta))?)?;
    }
    Ok(EXIT_OK)
}

fn cmd_finetune(a: FinetuneArgs) -> Result<i32> {
    let (params, header) = load_checkpoint(&a.checkpoint, None)?;
    let dataset = Dataset::read(&a.data)?;
    let mut cfg = match &a.config {
        Some(path) => RunConfigFile::load(path)?,
        None => stored_config(&header.hyperparameters)?,
    };
    if let Some(s) = a.seed {
        cfg.set_seed(s);
    }
    let classes = a.classes.clone().unwrap_or_else(|| dataset.header.split.unseen_classes.clone());
    if a.shots == 0 {
        eprintln!("warning: --shots 0 requested; writing the checkpoint unchanged");
        std::fs::copy(&a.checkpoint, &a.out).map_err(|e| Error::io(&a.out, e))?;
        return Ok(EXIT_OK);
    }
    let outcome = finetune_fewshot(&params, &dataset, a.shots, &classes, &cfg.train_config())?;
    let hyper = serde_json::to_value(&cfg).map_err(|e| Error::Format(e.to_string()))?;
    save_checkpoint(&outcome.params, hyper, &a.out)?;
    if let Some(p) = &a.log {
        let meta = CsvMeta { seed: cfg.train.seed, config_hash: cfg.hash() };
        write_bytes(p, &train_log_csv(&outcome.log, Some(&meta))?)?;
    }
    println!(
        "fine-tuned on {} shots from classes {:?} for {} epochs: {}",
        outcome.shot_ids.len(),
        classes,
        outcome.log.len(),
        a.out.display()
    );
    Ok(EXIT_OK)
}

fn cmd_gradcheck(a: GradcheckArgs) -> Result<i32> {
    let cfg = GradcheckConfig { seed: a.seed, instances: a.instances, inject_sign_flip: a.inject_sign_flip, ..Default::default() };
    let report = run_gradcheck(&cfg)?;
    println!("{report}");
    Ok(if report.passed() { EXIT_OK } else { EXIT_INTERNAL })
}

fn cmd_sweep(a: SweepArgs) -> Result<i32> {
    let cfg = load_config(a.config.as_deref(), a.seed)?;
    let dataset = Dataset::read(&a.data)?;
    let rows = sweep(&dataset, &a.param, &a.values, &cfg.train_config(), cfg.eval)?;
    for r in &rows {
        println!(
            "{}={}: val Acc30={:.4} MedErr={:.2}°{}",
            r.param,
            r.value,
            r.all.mean_acc30,
            r.all.mean_mederr_deg,
            r.unseen.as_ref().map_or(String::new(), |u| format!(
                "  unseen Acc30={:.4} MedErr={:.2}°",
                u.mean_acc30, u.mean_mederr_deg
            ))
        );
    }
    let meta = CsvMeta { seed: cfg.train.seed, config_hash: cfg.hash() };
    write_bytes(&a.out, &sweep_csv(&rows, Some(&meta))?)?;
    Ok(EXIT_OK)
}
