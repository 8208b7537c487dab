//! Per-elevation classification: window presence, facade type, window ratio.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::color::ColorName;
use crate::geometry::{intersection_area, BoundingBox};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClassifyError {
    #[error("window ratio {0} is outside (0, 100]")]
    RatioDomain(f64),
    #[error("curtain-wall tolerance must lie in [0, 1), got {0}")]
    Tolerance(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FacadeType {
    FrontCurtainWall,
    RepeatedSingleWindows,
    Other,
}

impl FacadeType {
    pub const ALL: [FacadeType; 3] = [
        FacadeType::FrontCurtainWall,
        FacadeType::RepeatedSingleWindows,
        FacadeType::Other,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            FacadeType::FrontCurtainWall => "front_curtain_wall",
            FacadeType::RepeatedSingleWindows => "repeated_single_windows",
            FacadeType::Other => "other",
        }
    }
}

impl fmt::Display for FacadeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Window-ratio quartile. Each bin is upper-inclusive: `(0, 25]`,
/// `(25, 50]`, `(50, 75]`, `(75, 100]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RatioBin {
    #[serde(rename = "upto_25")]
    Upto25,
    #[serde(rename = "upto_50")]
    Upto50,
    #[serde(rename = "upto_75")]
    Upto75,
    #[serde(rename = "upto_100")]
    Upto100,
}

impl RatioBin {
    pub fn as_str(&self) -> &'static str {
        match self {
            RatioBin::Upto25 => "upto_25",
            RatioBin::Upto50 => "upto_50",
            RatioBin::Upto75 => "upto_75",
            RatioBin::Upto100 => "upto_100",
        }
    }
}

impl fmt::Display for RatioBin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Slack for the curtain-wall test, as a fraction of the elevation area.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifyConfig {
    curtain_wall_area_tolerance: f64,
}

impl ClassifyConfig {
    pub const DEFAULT_TOLERANCE: f64 = 0.10;

    pub fn new(curtain_wall_area_tolerance: f64) -> Result<Self, ClassifyError> {
        if (0.0..1.0).contains(&curtain_wall_area_tolerance) {
            Ok(Self {
                curtain_wall_area_tolerance,
            })
        } else {
            Err(ClassifyError::Tolerance(curtain_wall_area_tolerance))
        }
    }

    pub fn curtain_wall_area_tolerance(&self) -> f64 {
        self.curtain_wall_area_tolerance
    }
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self {
            curtain_wall_area_tolerance: Self::DEFAULT_TOLERANCE,
        }
    }
}

/// Extracted information for one building elevation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FacadeRecord {
    pub building_index: usize,
    pub has_windows: bool,
    pub facade_type: Option<FacadeType>,
    pub window_ratio_percent: f64,
    pub ratio_bin: Option<RatioBin>,
    pub wall_color: Option<ColorName>,
}

impl FacadeRecord {
    /// Checks the record-level invariants.
    pub fn is_consistent(&self) -> bool {
        if !(0.0..=100.0).contains(&self.window_ratio_percent) {
            return false;
        }
        if !self.has_windows {
            return self.facade_type.is_none()
                && self.ratio_bin.is_none()
                && self.window_ratio_percent == 0.0;
        }
        self.facade_type.is_some() && self.ratio_bin == bin_ratio(self.window_ratio_percent).ok()
    }
}

pub fn classify_presence(windows: &[usize]) -> bool {
    !windows.is_empty()
}

/// Facade type of an elevation given its associated windows.
///
/// The curtain-wall test runs first: any single window whose area is within
/// the tolerance of the elevation area wins, whatever the window count.
/// Otherwise two or more windows mean repeated single windows.
pub fn classify_type(
    building: &BoundingBox,
    windows: &[BoundingBox],
    cfg: &ClassifyConfig,
) -> FacadeType {
    let b_area = building.area() as f64;
    let slack = cfg.curtain_wall_area_tolerance * b_area;
    if windows.iter().any(|w| b_area - w.area() as f64 <= slack) {
        FacadeType::FrontCurtainWall
    } else if windows.len() >= 2 {
        FacadeType::RepeatedSingleWindows
    } else {
        FacadeType::Other
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowRatio {
    pub percent: f64,
    /// The summed window area exceeded the elevation and was clamped to 100.
    pub overflowed: bool,
}

/// Percentage of the elevation covered by its windows, each window first
/// clipped to the elevation box.
pub fn window_ratio(building: &BoundingBox, windows: &[BoundingBox]) -> WindowRatio {
    let covered: u64 = windows.iter().map(|w| intersection_area(w, building)).sum();
    let percent = 100.0 * covered as f64 / building.area() as f64;
    if percent > 100.0 {
        WindowRatio {
            percent: 100.0,
            overflowed: true,
        }
    } else {
        WindowRatio {
            percent,
            overflowed: false,
        }
    }
}

pub fn bin_ratio(percent: f64) -> Result<RatioBin, ClassifyError> {
    match percent {
        r if r > 0.0 && r <= 25.0 => Ok(RatioBin::Upto25),
        r if r > 25.0 && r <= 50.0 => Ok(RatioBin::Upto50),
        r if r > 50.0 && r <= 75.0 => Ok(RatioBin::Upto75),
        r if r > 75.0 && r <= 100.0 => Ok(RatioBin::Upto100),
        r => Err(ClassifyError::RatioDomain(r)),
    }
}

/// Assembles the record for one elevation from its associated windows.
pub fn build_record(
    building_index: usize,
    building: &BoundingBox,
    windows: &[BoundingBox],
    cfg: &ClassifyConfig,
    wall_color: Option<ColorName>,
) -> FacadeRecord {
    let ratio = window_ratio(building, windows);
    let ratio_bin = bin_ratio(ratio.percent).ok();
    // A window with no overlap cannot survive association, so a present
    // window set always yields a positive ratio.
    let has_windows = !windows.is_empty() && ratio_bin.is_some();
    if !has_windows {
        return FacadeRecord {
            building_index,
            has_windows: false,
            facade_type: None,
            window_ratio_percent: 0.0,
            ratio_bin: None,
            wall_color,
        };
    }
    FacadeRecord {
        building_index,
        has_windows,
        facade_type: Some(classify_type(building, windows, cfg)),
        window_ratio_percent: ratio.percent,
        ratio_bin,
        wall_color,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wire_names() {
        for b in [
            RatioBin::Upto25,
            RatioBin::Upto50,
            RatioBin::Upto75,
            RatioBin::Upto100,
        ] {
            let json = serde_json::to_string(&b).unwrap();
            assert_eq!(json, format!("\"{}\"", b.as_str()));
            assert_eq!(serde_json::from_str::<RatioBin>(&json).unwrap(), b);
        }
        for t in FacadeType::ALL {
            assert_eq!(
                serde_json::to_string(&t).unwrap(),
                format!("\"{}\"", t.as_str())
            );
        }
    }

    fn bb(x: u32, y: u32, w: u32, h: u32) -> BoundingBox {
        BoundingBox::new(x, y, w, h).unwrap()
    }

    #[test]
    fn presence() {
        assert!(!classify_presence(&[]));
        assert!(classify_presence(&[0]));
    }

    #[test]
    fn curtain_wall() {
        let b = bb(0, 0, 100, 200);
        assert_eq!(
            classify_type(&b, &[b], &ClassifyConfig::default()),
            FacadeType::FrontCurtainWall
        );
        // 96x196 inside 100x200: 18816 of 20000, 5.9 % short.
        assert_eq!(
            classify_type(&b, &[bb(2, 2, 96, 196)], &ClassifyConfig::default()),
            FacadeType::FrontCurtainWall
        );
    }

    #[test]
    fn curtain_wall_wins_over_window_count() {
        let b = bb(0, 0, 100, 100);
        let windows = [bb(0, 0, 100, 95), bb(10, 96, 4, 4)];
        assert_eq!(
            classify_type(&b, &windows, &ClassifyConfig::default()),
            FacadeType::FrontCurtainWall
        );
    }

    #[test]
    fn six_window_grid_is_repeated() {
        let b = bb(0, 0, 90, 60);
        let windows: Vec<_> = (0..2)
            .flat_map(|r| (0..3).map(move |c| bb(5 + 30 * c, 5 + 30 * r, 20, 20)))
            .collect();
        assert_eq!(
            classify_type(&b, &windows, &ClassifyConfig::default()),
            FacadeType::RepeatedSingleWindows
        );
    }

    #[test]
    fn half_height_window_is_other() {
        // |B| - |w| = 20000 - 10000 = 10000 > 0.1 * 20000, and |W| = 1.
        let b = bb(0, 0, 100, 200);
        assert_eq!(
            classify_type(&b, &[bb(0, 100, 100, 100)], &ClassifyConfig::default()),
            FacadeType::Other
        );
        assert_eq!(
            classify_type(&b, &[], &ClassifyConfig::default()),
            FacadeType::Other
        );
    }

    #[test]
    fn ratio_examples() {
        let b = bb(0, 0, 100, 200);
        assert_eq!(window_ratio(&b, &[]).percent, 0.0);
        assert_eq!(window_ratio(&b, &[bb(10, 10, 50, 100)]).percent, 25.0);
        assert_eq!(window_ratio(&b, &[b]).percent, 100.0);
    }

    #[test]
    fn ratio_clips_overhang_and_clamps_overlap() {
        let b = bb(10, 10, 10, 10);
        let r = window_ratio(&b, &[bb(0, 10, 15, 10)]);
        assert_eq!((r.percent, r.overflowed), (50.0, false));
        let r = window_ratio(&b, &[b, bb(10, 10, 5, 5)]);
        assert_eq!((r.percent, r.overflowed), (100.0, true));
    }

    #[test]
    fn bin_boundaries() {
        assert_eq!(bin_ratio(25.0).unwrap(), RatioBin::Upto25);
        assert_eq!(bin_ratio(25.000001).unwrap(), RatioBin::Upto50);
        assert_eq!(bin_ratio(100.0).unwrap(), RatioBin::Upto100);
        assert_eq!(bin_ratio(f64::MIN_POSITIVE).unwrap(), RatioBin::Upto25);
        assert!(bin_ratio(0.0).is_err());
        assert!(bin_ratio(100.000001).is_err());
        assert!(bin_ratio(f64::NAN).is_err());
    }

    #[test]
    fn tolerance_validation() {
        assert!(ClassifyConfig::new(0.0).is_ok());
        assert!(ClassifyConfig::new(1.0).is_err());
        assert!(ClassifyConfig::new(-0.1).is_err());
    }

    #[test]
    fn records() {
        let cfg = ClassifyConfig::default();
        let b = bb(0, 0, 100, 100);
        let r = build_record(0, &b, &[], &cfg, Some(ColorName::Silver));
        assert_eq!(
            r,
            FacadeRecord {
                building_index: 0,
                has_windows: false,
                facade_type: None,
                window_ratio_percent: 0.0,
                ratio_bin: None,
                wall_color: Some(ColorName::Silver),
            }
        );
        assert!(r.is_consistent());

        let r = build_record(1, &b, &[b], &cfg, None);
        assert_eq!(r.facade_type, Some(FacadeType::FrontCurtainWall));
        assert_eq!(r.ratio_bin, Some(RatioBin::Upto100));

        // Six 10x50 windows: 3000 / 10000 = 30 %.
        let windows: Vec<_> = (0..6).map(|i| bb(5 + 15 * i, 20, 10, 50)).collect();
        let r = build_record(2, &b, &windows, &cfg, None);
        assert_eq!(r.window_ratio_percent, 30.0);
        assert_eq!(r.facade_type, Some(FacadeType::RepeatedSingleWindows));
        assert_eq!(r.ratio_bin, Some(RatioBin::Upto50));
        assert!(r.is_consistent());
    }
}
