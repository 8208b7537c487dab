//! `facade`: extract facade records, evaluate them, synthesize test corpora.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 partial data
//! failure (some inputs were skipped or could not be scored).

mod config;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use facade_core::pipeline::{self, PipelineConfig, PipelineError};
use facade_core::synth::CorpusSpec;

use crate::config::{resolve_thresholds, FileConfig};

#[derive(Parser, Debug)]
#[command(name = "facade", version, about = "Facade information extraction")]
struct Cli {
    /// TOML file with paths, workers and thresholds.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Extract one facade record per detected elevation.
    Extract(ExtractArgs),
    /// Score detections (and optionally facade records) against ground truth.
    Eval(EvalArgs),
    /// Render a synthetic corpus with exact ground truth.
    Synth(SynthArgs),
}

#[derive(Args, Debug)]
struct Thresholds {
    /// Fraction of a window's area that must lie inside an elevation.
    #[arg(long)]
    containment: Option<f64>,
    /// Curtain-wall slack, as a fraction of the elevation area.
    #[arg(long)]
    curtain_tolerance: Option<f64>,
    /// IoU needed for a detection to count as a match.
    #[arg(long)]
    iou: Option<f64>,
}

#[derive(Args, Debug)]
struct ExtractArgs {
    /// Directory of PNG images.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Directory of detection files, or a single detection file.
    #[arg(long)]
    detections: Option<PathBuf>,
    /// Records file to write (one JSON object per line); `-` for stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    /// Palette file of `name r g b` lines.
    #[arg(long)]
    palette: Option<PathBuf>,
    #[command(flatten)]
    thresholds: Thresholds,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Ground-truth annotation file.
    #[arg(long)]
    ground: PathBuf,
    /// Directory of detection files, or a single detection file.
    #[arg(long)]
    detections: Option<PathBuf>,
    /// Ground-truth facade records, paired with --records.
    #[arg(long, requires = "records")]
    ground_records: Option<PathBuf>,
    /// Extracted facade records, paired with --ground-records.
    #[arg(long, requires = "ground_records")]
    records: Option<PathBuf>,
    /// JSON report to write; the table always goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    thresholds: Thresholds,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Corpus description (TOML).
    #[arg(long)]
    spec: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the seed in the spec.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
}

/// Failure classes that map onto exit codes.
enum Failure {
    Usage(anyhow::Error),
    Data(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Usage(e)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let file = match &cli.config {
        Some(p) => {
            let base = p.parent().unwrap_or(Path::new("."));
            FileConfig::load(p)?.rebase(base)
        }
        None => FileConfig::default(),
    };
    match cli.command {
        Command::Extract(a) => extract(a, file),
        Command::Eval(a) => eval(a, file),
        Command::Synth(a) => synth(a, file),
    }
}

fn required(flag: Option<PathBuf>, file: Option<PathBuf>, name: &str) -> Result<PathBuf> {
    match flag.or(file) {
        Some(p) => Ok(p),
        None => bail!("--{name} is required (flag or config file)"),
    }
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn write_output(path: &Path, bytes: &[u8]) -> Result<()> {
    if path == Path::new("-") {
        io::stdout().write_all(bytes)?;
        return Ok(());
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

/// Setup problems (missing directories, bad palette) are usage errors;
/// everything else comes from the data.
fn classify_pipeline_error(e: PipelineError) -> Failure {
    match e {
        PipelineError::Io { .. } | PipelineError::Palette { .. } | PipelineError::Workers => {
            Failure::Usage(e.into())
        }
        _ => Failure::Data(e.into()),
    }
}

fn extract(a: ExtractArgs, file: FileConfig) -> Result<(), Failure> {
    let t = resolve_thresholds(
        &file.thresholds,
        a.thresholds.containment,
        a.thresholds.curtain_tolerance,
        a.thresholds.iou,
    )?;
    let cfg = PipelineConfig {
        input_dir: required(a.input, file.input, "input")?,
        detections_path: required(a.detections, file.detections, "detections")?,
        output_path: required(a.out, file.out, "out")?,
        association: t.association,
        classify: t.classify,
        match_cfg: t.match_cfg,
        palette_path: a.palette.or(file.palette),
        workers: a.workers.or(file.workers).unwrap_or_else(default_workers),
    };
    if !cfg.detections_path.exists() {
        return Err(Failure::Usage(anyhow::anyhow!(
            "{}: no such file or directory",
            cfg.detections_path.display()
        )));
    }

    let report = pipeline::run_extract(&cfg).map_err(classify_pipeline_error)?;
    let mut buf = Vec::new();
    pipeline::write_records(&report.records, &mut buf).context("serializing records")?;
    write_output(&cfg.output_path, &buf)?;

    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    for e in &report.errors {
        eprintln!("error: {e}");
    }
    eprintln!(
        "{} image(s), {} record(s), {} error(s), {} warning(s)",
        report.images,
        report.records.len(),
        report.errors.len(),
        report.warnings.len()
    );
    if report.is_partial() {
        return Err(Failure::Data(anyhow::anyhow!(
            "{} input file(s) skipped",
            report.errors.len()
        )));
    }
    Ok(())
}

fn eval(a: EvalArgs, file: FileConfig) -> Result<(), Failure> {
    let t = resolve_thresholds(
        &file.thresholds,
        a.thresholds.containment,
        a.thresholds.curtain_tolerance,
        a.thresholds.iou,
    )?;
    let detections = required(a.detections, file.detections, "detections")?;
    let records = a.ground_records.as_deref().zip(a.records.as_deref());
    let out = pipeline::run_eval(&a.ground, &detections, &t.match_cfg, records)
        .map_err(classify_pipeline_error)?;
    print!("{out}");
    if let Some(path) = a.out.or(file.out) {
        let mut json = serde_json::to_string_pretty(&out).context("serializing report")?;
        json.push('\n');
        write_output(&path, json.as_bytes())?;
    }
    Ok(())
}

fn synth(a: SynthArgs, file: FileConfig) -> Result<(), Failure> {
    let text =
        fs::read_to_string(&a.spec).with_context(|| format!("reading {}", a.spec.display()))?;
    let mut spec: CorpusSpec =
        toml::from_str(&text).with_context(|| format!("parsing {}", a.spec.display()))?;
    if let Some(seed) = a.seed {
        spec.seed = seed;
    }
    let out = required(a.out, file.out, "out")?;
    let workers = a.workers.or(file.workers).unwrap_or_else(default_workers);
    let summary = pipeline::run_synth(&spec, &out, workers).map_err(|e| match e {
        PipelineError::Synth(_) | PipelineError::Workers => Failure::Usage(e.into()),
        other => Failure::Data(other.into()),
    })?;
    eprintln!("{} image(s) written to {}", summary.images, out.display());
    Ok(())
}
