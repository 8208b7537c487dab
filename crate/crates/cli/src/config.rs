//! Declarative run configuration, overridable from the command line.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Deserialize;

use facade_core::eval::MatchConfig;
use facade_core::geometry::AssociationConfig;
use facade_core::ClassifyConfig;

/// Contents of a `--config` TOML file. Every field is optional; flags win.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub input: Option<PathBuf>,
    pub detections: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub palette: Option<PathBuf>,
    pub workers: Option<usize>,
    #[serde(default)]
    pub thresholds: Thresholds,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    /// Fraction of a window's area that must fall inside an elevation.
    pub containment: Option<f64>,
    /// Curtain-wall slack as a fraction of the elevation area.
    pub curtain_tolerance: Option<f64>,
    pub iou: Option<f64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Relative paths in the file resolve against the file's directory.
    pub fn rebase(mut self, base: &Path) -> Self {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(path) = p.as_mut() {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        };
        fix(&mut self.input);
        fix(&mut self.detections);
        fix(&mut self.out);
        fix(&mut self.palette);
        self
    }
}

/// Resolved thresholds with defaults filled in and ranges checked.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolvedThresholds {
    pub association: AssociationConfig,
    pub classify: ClassifyConfig,
    pub match_cfg: MatchConfig,
}

pub fn resolve_thresholds(
    file: &Thresholds,
    containment: Option<f64>,
    curtain_tolerance: Option<f64>,
    iou: Option<f64>,
) -> Result<ResolvedThresholds> {
    let containment = containment
        .or(file.containment)
        .unwrap_or(AssociationConfig::DEFAULT_THRESHOLD);
    let tolerance = curtain_tolerance
        .or(file.curtain_tolerance)
        .unwrap_or(ClassifyConfig::DEFAULT_TOLERANCE);
    let iou = iou.or(file.iou).unwrap_or(MatchConfig::DEFAULT_THRESHOLD);
    Ok(ResolvedThresholds {
        association: AssociationConfig::new(containment)?,
        classify: ClassifyConfig::new(tolerance)?,
        match_cfg: MatchConfig::new(iou)?,
    })
}
