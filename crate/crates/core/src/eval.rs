//! Detection accuracy and facade-type confusion reporting.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotation::{AnnotationSet, Category, DetectionSet};
use crate::classify::{FacadeRecord, FacadeType};
use crate::geometry::{intersection_area, BoundingBox};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("IoU threshold must lie in (0, 1], got {0}")]
    Threshold(f64),
    #[error("predictions for '{0}' have no ground-truth entry")]
    UnknownImage(String),
    #[error("ground-truth image '{0}' has no predictions")]
    MissingImage(String),
    #[error("more than one prediction set for '{0}'")]
    DuplicateImage(String),
    #[error("record {filename}#{building_index} has no counterpart")]
    Unaligned {
        filename: String,
        building_index: usize,
    },
    #[error("record {filename}#{building_index} appears twice")]
    DuplicateRecord {
        filename: String,
        building_index: usize,
    },
}

pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let inter = intersection_area(a, b);
    let union = a.area() + b.area() - inter;
    inter as f64 / union as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchConfig {
    iou_threshold: f64,
}

impl MatchConfig {
    pub const DEFAULT_THRESHOLD: f64 = 0.5;

    pub fn new(iou_threshold: f64) -> Result<Self, EvalError> {
        if iou_threshold > 0.0 && iou_threshold <= 1.0 {
            Ok(Self { iou_threshold })
        } else {
            Err(EvalError::Threshold(iou_threshold))
        }
    }

    pub fn iou_threshold(&self) -> f64 {
        self.iou_threshold
    }
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            iou_threshold: Self::DEFAULT_THRESHOLD,
        }
    }
}

/// Greedy one-to-one matching. Predictions are visited by descending score
/// (ties in input order); each takes the unmatched ground-truth box with the
/// highest IoU at or above the threshold. Returns `(prediction, ground)`
/// index pairs.
pub fn greedy_match(
    ground: &[BoundingBox],
    predicted: &[(BoundingBox, f64)],
    cfg: &MatchConfig,
) -> Vec<(usize, usize)> {
    let mut order: Vec<usize> = (0..predicted.len()).collect();
    order.sort_by(|&a, &b| predicted[b].1.total_cmp(&predicted[a].1));
    let mut taken = vec![false; ground.len()];
    let mut pairs = Vec::new();
    for p in order {
        let mut best: Option<(usize, f64)> = None;
        for (g, gt) in ground.iter().enumerate() {
            if taken[g] {
                continue;
            }
            let v = iou(&predicted[p].0, gt);
            if v >= cfg.iou_threshold && best.is_none_or(|(_, b)| v > b) {
                best = Some((g, v));
            }
        }
        if let Some((g, _)) = best {
            taken[g] = true;
            pairs.push((p, g));
        }
    }
    pairs
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CategoryAccuracy {
    pub detected: u64,
    pub total: u64,
    pub accuracy: f64,
}

/// Detected over total objects, per category. Categories with no
/// ground-truth objects are left out.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub per_category: BTreeMap<Category, CategoryAccuracy>,
}

impl AccuracyReport {
    pub fn accuracy(&self, category: Category) -> Option<f64> {
        self.per_category.get(&category).map(|c| c.accuracy)
    }
}

impl fmt::Display for AccuracyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<10} {:>9} {:>7} {:>9}",
            "category", "detected", "total", "accuracy"
        )?;
        for (cat, a) in &self.per_category {
            writeln!(
                f,
                "{:<10} {:>9} {:>7} {:>9.4}",
                cat.as_str(),
                a.detected,
                a.total,
                a.accuracy
            )?;
        }
        Ok(())
    }
}

/// Scores every prediction set against the ground truth with the same
/// filename. Both sides must cover the same images.
pub fn detection_accuracy(
    ground: &AnnotationSet,
    predicted: &[DetectionSet],
    cfg: &MatchConfig,
) -> Result<AccuracyReport, EvalError> {
    let mut by_name: HashMap<&str, &DetectionSet> = HashMap::new();
    for p in predicted {
        if ground.by_filename(&p.filename).is_none() {
            return Err(EvalError::UnknownImage(p.filename.clone()));
        }
        if by_name.insert(&p.filename, p).is_some() {
            return Err(EvalError::DuplicateImage(p.filename.clone()));
        }
    }

    let mut counts: BTreeMap<Category, (u64, u64)> = BTreeMap::new();
    for entry in ground.entries() {
        let pred = by_name
            .get(entry.filename.as_str())
            .ok_or_else(|| EvalError::MissingImage(entry.filename.clone()))?;
        for cat in Category::ALL {
            let gt: Vec<BoundingBox> = entry.boxes(cat).collect();
            if gt.is_empty() {
                continue;
            }
            let preds: Vec<(BoundingBox, f64)> = pred
                .detections
                .iter()
                .filter(|d| d.category == cat)
                .map(|d| (d.bbox, d.score))
                .collect();
            let matched = greedy_match(&gt, &preds, cfg).len() as u64;
            let c = counts.entry(cat).or_default();
            c.0 += matched;
            c.1 += gt.len() as u64;
        }
    }

    Ok(AccuracyReport {
        per_category: counts
            .into_iter()
            .map(|(cat, (detected, total))| {
                (
                    cat,
                    CategoryAccuracy {
                        detected,
                        total,
                        accuracy: detected as f64 / total as f64,
                    },
                )
            })
            .collect(),
    })
}

/// A facade record joined to its source image. `(filename, building_index)`
/// is the record's identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyedRecord {
    pub filename: String,
    #[serde(flatten)]
    pub record: FacadeRecord,
}

impl KeyedRecord {
    fn key(&self) -> (&str, usize) {
        (&self.filename, self.record.building_index)
    }
}

/// Rows are ground-truth types, columns predicted types.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<FacadeType>,
    pub counts: Vec<Vec<u64>>,
    /// Per row: predictions that carried no facade type at all.
    pub unclassified: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new() -> Self {
        let n = FacadeType::ALL.len();
        Self {
            labels: FacadeType::ALL.to_vec(),
            counts: vec![vec![0; n]; n],
            unclassified: vec![0; n],
        }
    }

    fn index(&self, t: FacadeType) -> usize {
        self.labels
            .iter()
            .position(|&l| l == t)
            .expect("all types are labelled")
    }

    pub fn record(&mut self, truth: FacadeType, predicted: Option<FacadeType>) {
        let row = self.index(truth);
        match predicted {
            Some(p) => {
                let col = self.index(p);
                self.counts[row][col] += 1;
            }
            None => self.unclassified[row] += 1,
        }
    }

    pub fn row_total(&self, truth: FacadeType) -> u64 {
        let row = self.index(truth);
        self.counts[row].iter().sum::<u64>() + self.unclassified[row]
    }

    pub fn correct(&self, truth: FacadeType) -> u64 {
        let i = self.index(truth);
        self.counts[i][i]
    }
}

impl Default for ConfusionMatrix {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassAccuracy {
    pub facade_type: FacadeType,
    pub correct: u64,
    pub total: u64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Agreement {
    pub agreed: u64,
    pub total: u64,
}

impl Agreement {
    fn add(&mut self, same: bool) {
        self.total += 1;
        self.agreed += u64::from(same);
    }

    pub fn rate(&self) -> Option<f64> {
        (self.total > 0).then(|| self.agreed as f64 / self.total as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub confusion: ConfusionMatrix,
    pub per_class: Vec<ClassAccuracy>,
    /// Ratio-bin agreement over records whose ground truth has windows.
    pub ratio_bin: Agreement,
    pub wall_color: Agreement,
    /// Ground-truth records without windows; they have no facade type.
    pub without_windows: u64,
}

impl ClassificationReport {
    pub fn accuracy(&self, t: FacadeType) -> Option<f64> {
        self.per_class
            .iter()
            .find(|c| c.facade_type == t)
            .map(|c| c.accuracy)
    }
}

impl fmt::Display for ClassificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let w = 24;
        write!(f, "{:<w$}", "truth \\ predicted")?;
        for l in &self.confusion.labels {
            write!(f, " {:>w$}", l.as_str())?;
        }
        writeln!(f, " {:>12}", "unclassified")?;
        for (i, l) in self.confusion.labels.iter().enumerate() {
            write!(f, "{:<w$}", l.as_str())?;
            for c in &self.confusion.counts[i] {
                write!(f, " {c:>w$}")?;
            }
            writeln!(f, " {:>12}", self.confusion.unclassified[i])?;
        }
        writeln!(f)?;
        writeln!(
            f,
            "{:<w$} {:>8} {:>6} {:>9}",
            "class", "correct", "total", "accuracy"
        )?;
        for c in &self.per_class {
            writeln!(
                f,
                "{:<w$} {:>8} {:>6} {:>9.4}",
                c.facade_type.as_str(),
                c.correct,
                c.total,
                c.accuracy
            )?;
        }
        for (name, a) in [
            ("ratio bin", self.ratio_bin),
            ("wall color", self.wall_color),
        ] {
            writeln!(
                f,
                "{name:<w$} {:>8} {:>6} {:>9.4}",
                a.agreed,
                a.total,
                a.rate().unwrap_or(0.0)
            )?;
        }
        Ok(())
    }
}

/// Compares predicted records against ground truth, joined on
/// `(filename, building_index)`. Both sides must hold the same keys.
pub fn classification_report(
    ground: &[KeyedRecord],
    predicted: &[KeyedRecord],
) -> Result<ClassificationReport, EvalError> {
    let index = |records: &[KeyedRecord]| -> Result<HashMap<(String, usize), usize>, EvalError> {
        let mut map = HashMap::new();
        for (i, r) in records.iter().enumerate() {
            let (name, b) = r.key();
            if map.insert((name.to_string(), b), i).is_some() {
                return Err(EvalError::DuplicateRecord {
                    filename: name.to_string(),
                    building_index: b,
                });
            }
        }
        Ok(map)
    };
    let pred_index = index(predicted)?;
    let ground_keys: HashSet<(String, usize)> = index(ground)?.into_keys().collect();
    if let Some((filename, building_index)) = pred_index.keys().find(|k| !ground_keys.contains(*k))
    {
        return Err(EvalError::Unaligned {
            filename: filename.clone(),
            building_index: *building_index,
        });
    }

    let mut confusion = ConfusionMatrix::new();
    let mut ratio_bin = Agreement::default();
    let mut wall_color = Agreement::default();
    let mut without_windows = 0;
    for g in ground {
        let (name, b) = g.key();
        let p = pred_index
            .get(&(name.to_string(), b))
            .map(|&i| &predicted[i].record)
            .ok_or_else(|| EvalError::Unaligned {
                filename: name.to_string(),
                building_index: b,
            })?;
        wall_color.add(g.record.wall_color == p.wall_color);
        match g.record.facade_type {
            Some(truth) => {
                confusion.record(truth, p.facade_type);
                ratio_bin.add(g.record.ratio_bin == p.ratio_bin);
            }
            None => without_windows += 1,
        }
    }

    let per_class = confusion
        .labels
        .iter()
        .filter_map(|&t| {
            let total = confusion.row_total(t);
            (total > 0).then(|| {
                let correct = confusion.correct(t);
                ClassAccuracy {
                    facade_type: t,
                    correct,
                    total,
                    accuracy: correct as f64 / total as f64,
                }
            })
        })
        .collect();

    Ok(ClassificationReport {
        confusion,
        per_class,
        ratio_bin,
        wall_color,
        without_windows,
    })
}
