//! Facade information extraction from building-elevation and window
//! detections.
//!
//! Given one image and the boxes a detector found in it, the pipeline
//!
//! 1. assigns each window box to the elevation that contains most of it
//!    ([`geometry`]),
//! 2. classifies every elevation's window layout and window ratio
//!    ([`classify`]),
//! 3. matches the mean wall color, windows masked out, against a reference
//!    palette ([`color`]),
//!
//! and writes one [`classify::FacadeRecord`] per elevation. [`eval`] scores
//! detections and records against ground truth, and [`synth`] renders
//! facades with exact ground truth for testing.

pub mod annotation;
pub mod classify;
pub mod color;
pub mod eval;
pub mod geometry;
pub mod parallel;
pub mod pipeline;
pub mod raster;
pub mod synth;

pub use annotation::{
    emit_annotations, emit_detections, parse_annotations, parse_detections, AnnotationEntry,
    AnnotationError, AnnotationSet, Category, Detection, DetectionSet, ParsedDetections, Region,
};
pub use classify::{
    bin_ratio, build_record, classify_presence, classify_type, window_ratio, ClassifyConfig,
    FacadeRecord, FacadeType, RatioBin,
};
pub use color::{
    classify_color, mean_rgb, redmean_distance, redmean_distance_sq, ColorName, Palette, Rgb,
    RgbMean,
};
pub use eval::{
    classification_report, detection_accuracy, iou, AccuracyReport, ClassificationReport,
    ConfusionMatrix, KeyedRecord, MatchConfig,
};
pub use geometry::{
    area, associate_windows, intersection_area, Association, AssociationConfig, BoundingBox,
    BuildingAssociation,
};
pub use raster::{decode, RasterImage};
pub use synth::{synthesize, CorpusSpec, SyntheticBuilding, SyntheticSpec};
