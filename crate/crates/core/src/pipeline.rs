//! End-to-end runs over directories: extraction, evaluation and corpus
//! synthesis.
//!
//! Per-image work fans out over [`crate::parallel::map_ordered`]; results
//! are merged in filename order so the output does not depend on the worker
//! count.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotation::{
    emit_annotations, emit_detections, parse_annotations, parse_detections, AnnotationError,
    AnnotationSet, Category, DetectionSet,
};
use crate::classify::{build_record, window_ratio, ClassifyConfig, FacadeRecord};
use crate::color::{classify_color, mean_rgb, ColorError, Palette};
use crate::eval::{
    classification_report, detection_accuracy, AccuracyReport, ClassificationReport, EvalError,
    KeyedRecord, MatchConfig,
};
use crate::geometry::{associate_windows, AssociationConfig, BoundingBox};
use crate::parallel::map_ordered;
use crate::raster::{decode, RasterImage};
use crate::synth::{corpus_specs, perturbed_detections, synthesize, CorpusSpec, SynthError};

/// Failures that stop a run outright.
#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {source}")]
    Annotation {
        path: PathBuf,
        #[source]
        source: AnnotationError,
    },
    #[error("{path}: {source}")]
    Palette {
        path: PathBuf,
        #[source]
        source: ColorError,
    },
    #[error("{path}:{line}: {message}")]
    Records {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{0}")]
    Input(FileError),
    #[error("workers must be at least 1")]
    Workers,
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Synth(#[from] SynthError),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Failure confined to one input file; the run carries on without it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileError {
    pub path: PathBuf,
    pub message: String,
}

impl std::fmt::Display for FileError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path.display(), self.message)
    }
}

/// Thresholds and resources shared by every image of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub association: AssociationConfig,
    pub classify: ClassifyConfig,
    pub match_cfg: MatchConfig,
    pub palette: Palette,
    pub workers: usize,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            association: AssociationConfig::default(),
            classify: ClassifyConfig::default(),
            match_cfg: MatchConfig::default(),
            palette: Palette::default(),
            workers: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub input_dir: PathBuf,
    pub detections_path: PathBuf,
    pub output_path: PathBuf,
    pub association: AssociationConfig,
    pub classify: ClassifyConfig,
    pub match_cfg: MatchConfig,
    pub palette_path: Option<PathBuf>,
    pub workers: usize,
}

impl PipelineConfig {
    pub fn new(
        input_dir: impl Into<PathBuf>,
        detections_path: impl Into<PathBuf>,
        output_path: impl Into<PathBuf>,
    ) -> Self {
        Self {
            input_dir: input_dir.into(),
            detections_path: detections_path.into(),
            output_path: output_path.into(),
            association: AssociationConfig::default(),
            classify: ClassifyConfig::default(),
            match_cfg: MatchConfig::default(),
            palette_path: None,
            workers: 1,
        }
    }

    pub fn settings(&self) -> Result<Settings, PipelineError> {
        if self.workers == 0 {
            return Err(PipelineError::Workers);
        }
        let palette = match &self.palette_path {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(io_err(p))?;
                Palette::parse(&text).map_err(|source| PipelineError::Palette {
                    path: p.clone(),
                    source,
                })?
            }
            None => Palette::default(),
        };
        Ok(Settings {
            association: self.association,
            classify: self.classify,
            match_cfg: self.match_cfg,
            palette,
            workers: self.workers,
        })
    }
}

/// Records extracted from one image plus any soft warnings.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageRecords {
    pub records: Vec<FacadeRecord>,
    pub warnings: Vec<String>,
}

/// Runs association, classification and color matching for one decoded
/// image and its detections.
pub fn extract_image(
    image: &RasterImage,
    detections: &DetectionSet,
    settings: &Settings,
) -> ImageRecords {
    let buildings = detections.boxes(Category::Building);
    let windows = detections.boxes(Category::Window);
    let assoc = associate_windows(&buildings, &windows, &settings.association);
    let mut warnings = Vec::new();
    if !assoc.noise.is_empty() {
        warnings.push(format!(
            "{} window(s) outside every elevation dropped",
            assoc.noise.len()
        ));
    }

    let records = assoc
        .buildings
        .iter()
        .map(|a| {
            let building = &buildings[a.building_index];
            let own: Vec<BoundingBox> = a.windows.iter().map(|&w| windows[w]).collect();
            if window_ratio(building, &own).overflowed {
                warnings.push(format!(
                    "building {}: overlapping windows exceed the elevation area; ratio clamped to 100",
                    a.building_index
                ));
            }
            let color = match mean_rgb(image, building, &own) {
                Ok(mean) => Some(classify_color(mean, &settings.palette)),
                Err(e) => {
                    warnings.push(format!("building {}: no wall color: {e}", a.building_index));
                    None
                }
            };
            build_record(a.building_index, building, &own, &settings.classify, color)
        })
        .collect();
    ImageRecords { records, warnings }
}

/// Outcome of an extraction run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExtractReport {
    pub records: Vec<KeyedRecord>,
    pub errors: Vec<FileError>,
    pub warnings: Vec<FileError>,
    pub images: usize,
}

impl ExtractReport {
    pub fn is_partial(&self) -> bool {
        !self.errors.is_empty()
    }
}

fn sorted_files(dir: &Path, ext: &str) -> Result<Vec<PathBuf>, PipelineError> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        let matches = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case(ext));
        if matches && path.is_file() {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

/// Detection files read from disk, with per-file problems.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LoadedDetections {
    pub sets: Vec<DetectionSet>,
    pub errors: Vec<FileError>,
    pub warnings: Vec<FileError>,
}

/// Reads detection files from a directory of `*.json` files or a single
/// file. Unparseable files are reported, not fatal.
pub fn load_detections(path: &Path) -> Result<LoadedDetections, PipelineError> {
    let files = if path.is_dir() {
        sorted_files(path, "json")?
    } else {
        vec![path.to_path_buf()]
    };
    let mut sets = Vec::new();
    let mut errors = Vec::new();
    let mut warnings = Vec::new();
    for f in files {
        let text = match fs::read_to_string(&f) {
            Ok(t) => t,
            Err(e) if f == path => return Err(io_err(path)(e)),
            Err(e) => {
                errors.push(FileError {
                    path: f,
                    message: e.to_string(),
                });
                continue;
            }
        };
        match parse_detections(&text) {
            Ok(p) => {
                if p.warnings() > 0 {
                    warnings.push(FileError {
                        path: f.clone(),
                        message: format!(
                            "{} box(es) clamped to the image, {} outside it dropped",
                            p.clamped, p.discarded
                        ),
                    });
                }
                sets.push(p.set);
            }
            Err(e) => errors.push(FileError {
                path: f,
                message: e.to_string(),
            }),
        }
    }
    Ok(LoadedDetections {
        sets,
        errors,
        warnings,
    })
}

enum ImageResult {
    Done(Vec<KeyedRecord>, Vec<String>),
    Failed(String),
}

/// Extracts facade records for every PNG in `cfg.input_dir`.
///
/// Records come back sorted by filename, then building index. Files that
/// cannot be read, decoded or matched to detections are listed in
/// `errors` and skipped.
pub fn run_extract(cfg: &PipelineConfig) -> Result<ExtractReport, PipelineError> {
    let settings = cfg.settings()?;
    let images = sorted_files(&cfg.input_dir, "png")?;
    let LoadedDetections {
        sets,
        mut errors,
        mut warnings,
    } = load_detections(&cfg.detections_path)?;

    let mut by_name: BTreeMap<String, DetectionSet> = BTreeMap::new();
    for s in sets {
        let name = s.filename.clone();
        if by_name.insert(name.clone(), s).is_some() {
            errors.push(FileError {
                path: cfg.detections_path.clone(),
                message: format!("more than one detection file for '{name}'"),
            });
        }
    }

    let results = map_ordered(&images, settings.workers, |path| {
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let Some(dets) = by_name.get(&name) else {
            return ImageResult::Failed("no detection file for this image".into());
        };
        let bytes = match fs::read(path) {
            Ok(b) => b,
            Err(e) => return ImageResult::Failed(e.to_string()),
        };
        let image = match decode(&bytes) {
            Ok(i) => i,
            Err(e) => return ImageResult::Failed(e.to_string()),
        };
        if (image.width(), image.height()) != (dets.image_width, dets.image_height) {
            return ImageResult::Failed(format!(
                "image is {}x{} but detections declare {}x{}",
                image.width(),
                image.height(),
                dets.image_width,
                dets.image_height
            ));
        }
        let out = extract_image(&image, dets, &settings);
        let keyed = out
            .records
            .into_iter()
            .map(|record| KeyedRecord {
                filename: name.clone(),
                record,
            })
            .collect();
        ImageResult::Done(keyed, out.warnings)
    });

    let mut report = ExtractReport {
        images: images.len(),
        ..Default::default()
    };
    for (path, result) in images.iter().zip(results) {
        match result {
            ImageResult::Done(records, warns) => {
                report.records.extend(records);
                warnings.extend(warns.into_iter().map(|message| FileError {
                    path: path.clone(),
                    message,
                }));
            }
            ImageResult::Failed(message) => errors.push(FileError {
                path: path.clone(),
                message,
            }),
        }
    }
    report.errors = errors;
    report.warnings = warnings;
    Ok(report)
}

/// One JSON object per line.
pub fn write_records<W: Write>(records: &[KeyedRecord], mut out: W) -> io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn read_records(path: &Path) -> Result<Vec<KeyedRecord>, PipelineError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| PipelineError::Records {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn read_annotations(path: &Path) -> Result<AnnotationSet, PipelineError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_annotations(&text).map_err(|source| PipelineError::Annotation {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOutput {
    pub detection: AccuracyReport,
    pub classification: Option<ClassificationReport>,
}

impl std::fmt::Display for EvalOutput {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "detection accuracy")?;
        write!(f, "{}", self.detection)?;
        if let Some(c) = &self.classification {
            writeln!(f)?;
            writeln!(f, "facade type classification")?;
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

/// Scores detections against ground-truth annotations and, when both
/// record files are given, predicted facade records against ground truth.
pub fn run_eval(
    ground: &Path,
    detections: &Path,
    match_cfg: &MatchConfig,
    records: Option<(&Path, &Path)>,
) -> Result<EvalOutput, PipelineError> {
    let truth = read_annotations(ground)?;
    let LoadedDetections { sets, errors, .. } = load_detections(detections)?;
    if let Some(first) = errors.into_iter().next() {
        return Err(PipelineError::Input(first));
    }
    let detection = detection_accuracy(&truth, &sets, match_cfg)?;
    let classification = match records {
        Some((g, p)) => Some(classification_report(&read_records(g)?, &read_records(p)?)?),
        None => None,
    };
    Ok(EvalOutput {
        detection,
        classification,
    })
}

/// File layout of a synthesized corpus under its root directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusLayout {
    pub images: PathBuf,
    pub detections: PathBuf,
    pub annotations: PathBuf,
    pub ground_truth: PathBuf,
}

impl CorpusLayout {
    pub fn new(root: &Path) -> Self {
        Self {
            images: root.join("images"),
            detections: root.join("detections"),
            annotations: root.join("annotations.json"),
            ground_truth: root.join("ground_truth.jsonl"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSummary {
    pub layout: CorpusLayout,
    pub images: usize,
    pub ground_truth: Vec<KeyedRecord>,
}

/// Renders a corpus to disk: PNG images, one detection file per image
/// (jittered if the spec asks for it), the merged annotation file and the
/// ground-truth records.
pub fn run_synth(
    corpus: &CorpusSpec,
    out_dir: &Path,
    workers: usize,
) -> Result<SynthSummary, PipelineError> {
    if workers == 0 {
        return Err(PipelineError::Workers);
    }
    let specs = corpus_specs(corpus)?;
    let rendered = map_ordered(&specs, workers, synthesize)
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;

    let layout = CorpusLayout::new(out_dir);
    for dir in [&layout.images, &layout.detections] {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let mut entries = Vec::with_capacity(rendered.len());
    let mut ground_truth = Vec::new();
    for (spec, img) in specs.iter().zip(rendered) {
        let entry = img.entry().clone();
        let png_path = layout.images.join(&entry.filename);
        fs::write(&png_path, &img.png).map_err(io_err(&png_path))?;
        let dets = perturbed_detections(
            &entry,
            spec.canvas.0,
            spec.canvas.1,
            corpus.jitter_px,
            spec.seed,
        );
        let det_path = layout.detections.join(format!("{}.json", entry.key));
        fs::write(&det_path, emit_detections(&dets)).map_err(io_err(&det_path))?;
        ground_truth.extend(img.records.into_iter().map(|record| KeyedRecord {
            filename: entry.filename.clone(),
            record,
        }));
        entries.push(entry);
    }
    let set = AnnotationSet::new(entries).map_err(|source| PipelineError::Annotation {
        path: layout.annotations.clone(),
        source,
    })?;
    fs::write(&layout.annotations, emit_annotations(&set)).map_err(io_err(&layout.annotations))?;
    let mut buf = Vec::new();
    write_records(&ground_truth, &mut buf).map_err(io_err(&layout.ground_truth))?;
    fs::write(&layout.ground_truth, buf).map_err(io_err(&layout.ground_truth))?;

    Ok(SynthSummary {
        layout,
        images: specs.len(),
        ground_truth,
    })
}
