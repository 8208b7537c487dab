//! Axis-aligned box arithmetic and window-to-elevation association.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("box must have positive width and height (got {width}x{height})")]
    Degenerate { width: u32, height: u32 },
    #[error("box extent overflows the pixel grid")]
    Overflow,
    #[error("containment threshold must lie in (0, 1], got {0}")]
    Threshold(f64),
}

/// Axis-aligned pixel rectangle: top-left corner plus extent.
///
/// A box covers the half-open pixel ranges `[x, x + width)` and
/// `[y, y + height)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct BoundingBox {
    x: u32,
    y: u32,
    width: u32,
    height: u32,
}

impl BoundingBox {
    pub fn new(x: u32, y: u32, width: u32, height: u32) -> Result<Self, GeometryError> {
        if width == 0 || height == 0 {
            return Err(GeometryError::Degenerate { width, height });
        }
        if x.checked_add(width).is_none() || y.checked_add(height).is_none() {
            return Err(GeometryError::Overflow);
        }
        Ok(Self {
            x,
            y,
            width,
            height,
        })
    }

    /// Builds a box from its corners, `min` inclusive and `max` exclusive.
    pub fn from_corners(
        min_x: u32,
        min_y: u32,
        max_x: u32,
        max_y: u32,
    ) -> Result<Self, GeometryError> {
        Self::new(
            min_x,
            min_y,
            max_x.saturating_sub(min_x),
            max_y.saturating_sub(min_y),
        )
    }

    pub fn x(&self) -> u32 {
        self.x
    }

    pub fn y(&self) -> u32 {
        self.y
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn min_x(&self) -> u32 {
        self.x
    }

    pub fn min_y(&self) -> u32 {
        self.y
    }

    pub fn max_x(&self) -> u32 {
        self.x + self.width
    }

    pub fn max_y(&self) -> u32 {
        self.y + self.height
    }

    pub fn area(&self) -> u64 {
        area(self)
    }

    /// Overlapping rectangle, if the boxes share at least one pixel.
    pub fn intersection(&self, other: &BoundingBox) -> Option<BoundingBox> {
        let min_x = self.min_x().max(other.min_x());
        let min_y = self.min_y().max(other.min_y());
        let max_x = self.max_x().min(other.max_x());
        let max_y = self.max_y().min(other.max_y());
        if max_x <= min_x || max_y <= min_y {
            return None;
        }
        Some(BoundingBox {
            x: min_x,
            y: min_y,
            width: max_x - min_x,
            height: max_y - min_y,
        })
    }

    pub fn contains_pixel(&self, px: u32, py: u32) -> bool {
        px >= self.x && px < self.max_x() && py >= self.y && py < self.max_y()
    }

    /// Multiplies every coordinate by `k`.
    pub fn scaled(&self, k: u32) -> Result<BoundingBox, GeometryError> {
        let mul = |v: u32| v.checked_mul(k).ok_or(GeometryError::Overflow);
        BoundingBox::new(
            mul(self.x)?,
            mul(self.y)?,
            mul(self.width)?,
            mul(self.height)?,
        )
    }
}

pub fn area(b: &BoundingBox) -> u64 {
    u64::from(b.width) * u64::from(b.height)
}

pub fn intersection_area(a: &BoundingBox, b: &BoundingBox) -> u64 {
    a.intersection(b).map_or(0, |i| i.area())
}

/// Fraction of a window's area that must overlap an elevation box for the
/// window to be a candidate member of that elevation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssociationConfig {
    containment_threshold: f64,
}

impl AssociationConfig {
    pub const DEFAULT_THRESHOLD: f64 = 0.5;

    pub fn new(containment_threshold: f64) -> Result<Self, GeometryError> {
        if containment_threshold > 0.0 && containment_threshold <= 1.0 {
            Ok(Self {
                containment_threshold,
            })
        } else {
            Err(GeometryError::Threshold(containment_threshold))
        }
    }

    pub fn containment_threshold(&self) -> f64 {
        self.containment_threshold
    }

    /// True when `overlap` is enough of `window_area` to count as contained.
    pub fn admits(&self, overlap: u64, window_area: u64) -> bool {
        overlap > 0 && overlap as f64 >= self.containment_threshold * window_area as f64
    }
}

impl Default for AssociationConfig {
    fn default() -> Self {
        Self {
            containment_threshold: Self::DEFAULT_THRESHOLD,
        }
    }
}

/// Windows (by index into the detection list) assigned to one elevation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildingAssociation {
    pub building_index: usize,
    /// Ascending window indices.
    pub windows: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Association {
    /// One entry per building, in building order.
    pub buildings: Vec<BuildingAssociation>,
    /// Windows that met the containment rule for no building.
    pub noise: Vec<usize>,
}

impl Association {
    pub fn assigned_count(&self) -> usize {
        self.buildings.iter().map(|b| b.windows.len()).sum()
    }
}

/// Assigns each window to at most one elevation.
///
/// A window is a candidate for building `i` when its overlap with the
/// building covers at least the configured fraction of the window's own
/// area. Among candidates the largest overlap wins; ties go to the lowest
/// building index. Windows with no candidate end up in `noise`.
pub fn associate_windows(
    buildings: &[BoundingBox],
    windows: &[BoundingBox],
    cfg: &AssociationConfig,
) -> Association {
    let mut out = Association {
        buildings: (0..buildings.len())
            .map(|building_index| BuildingAssociation {
                building_index,
                windows: Vec::new(),
            })
            .collect(),
        noise: Vec::new(),
    };

    for (wi, window) in windows.iter().enumerate() {
        let window_area = window.area();
        let mut best: Option<(usize, u64)> = None;
        for (bi, building) in buildings.iter().enumerate() {
            let overlap = intersection_area(window, building);
            debug_assert!(overlap <= window_area);
            if !cfg.admits(overlap, window_area) {
                continue;
            }
            if best.is_none_or(|(_, o)| overlap > o) {
                best = Some((bi, overlap));
            }
        }
        match best {
            Some((bi, _)) => out.buildings[bi].windows.push(wi),
            None => out.noise.push(wi),
        }
    }
    out
}
