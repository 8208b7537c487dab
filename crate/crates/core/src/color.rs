//! Wall color: masked mean RGB and nearest-palette matching under the
//! integer "redmean" distance.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::geometry::BoundingBox;
use crate::raster::RasterImage;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ColorError {
    #[error("elevation {0:?} is not inside the image")]
    OutOfBounds(BoundingBox),
    #[error("windows cover the whole elevation; no wall pixels remain")]
    EmptyRegion,
    #[error("palette line {line}: {message}")]
    PaletteSyntax { line: usize, message: String },
    #[error("palette is empty")]
    EmptyPalette,
    #[error("palette lists '{0}' more than once")]
    DuplicateName(ColorName),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Rgb {
    pub r: u8,
    pub g: u8,
    pub b: u8,
}

impl Rgb {
    pub const fn new(r: u8, g: u8, b: u8) -> Self {
        Self { r, g, b }
    }
}

/// Per-channel mean over a pixel region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RgbMean {
    pub r: f64,
    pub g: f64,
    pub b: f64,
}

impl RgbMean {
    /// Rounds each channel half-up into `[0, 255]`.
    pub fn rounded(&self) -> Rgb {
        let q = |v: f64| (v + 0.5).floor().clamp(0.0, 255.0) as u8;
        Rgb::new(q(self.r), q(self.g), q(self.b))
    }
}

impl From<Rgb> for RgbMean {
    fn from(c: Rgb) -> Self {
        Self {
            r: c.r.into(),
            g: c.g.into(),
            b: c.b.into(),
        }
    }
}

/// Palette entry name. The six reference colors have dedicated variants;
/// user palettes may introduce other names.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ColorName {
    Black,
    Maroon,
    Silver,
    Orange,
    Green,
    Blue,
    Custom(String),
}

impl ColorName {
    pub fn as_str(&self) -> &str {
        match self {
            ColorName::Black => "black",
            ColorName::Maroon => "maroon",
            ColorName::Silver => "silver",
            ColorName::Orange => "orange",
            ColorName::Green => "green",
            ColorName::Blue => "blue",
            ColorName::Custom(s) => s,
        }
    }
}

impl fmt::Display for ColorName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ColorName {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "black" => ColorName::Black,
            "maroon" => ColorName::Maroon,
            "silver" => ColorName::Silver,
            "orange" => ColorName::Orange,
            "green" => ColorName::Green,
            "blue" => ColorName::Blue,
            other => ColorName::Custom(other.to_string()),
        })
    }
}

impl Serialize for ColorName {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for ColorName {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(s.parse()
            .unwrap_or_else(|e: std::convert::Infallible| match e {}))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Palette {
    entries: Vec<(ColorName, Rgb)>,
}

impl Palette {
    pub fn new(entries: Vec<(ColorName, Rgb)>) -> Result<Self, ColorError> {
        if entries.is_empty() {
            return Err(ColorError::EmptyPalette);
        }
        for (i, (name, _)) in entries.iter().enumerate() {
            if entries[..i].iter().any(|(n, _)| n == name) {
                return Err(ColorError::DuplicateName(name.clone()));
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[(ColorName, Rgb)] {
        &self.entries
    }

    pub fn get(&self, name: &ColorName) -> Option<Rgb> {
        self.entries
            .iter()
            .find(|(n, _)| n == name)
            .map(|&(_, c)| c)
    }

    /// Parses `name r g b` lines. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self, ColorError> {
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| ColorError::PaletteSyntax {
                line: i + 1,
                message,
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            let [name, r, g, b] = fields[..] else {
                return Err(err(format!("expected 'name r g b', got '{line}'")));
            };
            let channel = |s: &str| {
                s.parse::<u8>()
                    .map_err(|_| err(format!("channel '{s}' is not an integer in [0, 255]")))
            };
            let name: ColorName = name.parse().unwrap_or_else(|e| match e {});
            entries.push((name, Rgb::new(channel(r)?, channel(g)?, channel(b)?)));
        }
        Self::new(entries)
    }
}

impl Default for Palette {
    /// Black, maroon, silver, orange, green, blue.
    fn default() -> Self {
        Self {
            entries: vec![
                (ColorName::Black, Rgb::new(0, 0, 0)),
                (ColorName::Maroon, Rgb::new(90, 0, 0)),
                (ColorName::Silver, Rgb::new(192, 192, 192)),
                (ColorName::Orange, Rgb::new(255, 127, 0)),
                (ColorName::Green, Rgb::new(0, 255, 0)),
                (ColorName::Blue, Rgb::new(0, 0, 255)),
            ],
        }
    }
}

/// Mean color of the elevation pixels not covered by any window.
///
/// A pixel is masked when its center lies inside a window box; with integer
/// boxes that is plain half-open containment.
pub fn mean_rgb(
    image: &RasterImage,
    elevation: &BoundingBox,
    windows: &[BoundingBox],
) -> Result<RgbMean, ColorError> {
    if elevation.max_x() > image.width() || elevation.max_y() > image.height() {
        return Err(ColorError::OutOfBounds(*elevation));
    }
    let x0 = elevation.min_x();
    let width = elevation.width() as usize;
    let mut masked = vec![false; width];
    let (mut sr, mut sg, mut sb, mut n) = (0u64, 0u64, 0u64, 0u64);

    for y in elevation.min_y()..elevation.max_y() {
        masked.fill(false);
        for w in windows {
            if y < w.min_y() || y >= w.max_y() {
                continue;
            }
            let lo = w.min_x().clamp(x0, elevation.max_x()) - x0;
            let hi = w.max_x().clamp(x0, elevation.max_x()) - x0;
            masked[lo as usize..hi as usize].fill(true);
        }
        let row = image.row_span(y, x0, elevation.max_x());
        for (px, _) in row.iter().zip(&masked).filter(|(_, &m)| !m) {
            sr += u64::from(px.r);
            sg += u64::from(px.g);
            sb += u64::from(px.b);
            n += 1;
        }
    }
    if n == 0 {
        return Err(ColorError::EmptyRegion);
    }
    let n = n as f64;
    Ok(RgbMean {
        r: sr as f64 / n,
        g: sg as f64 / n,
        b: sb as f64 / n,
    })
}

/// Squared redmean distance, integer arithmetic throughout.
///
/// `rm` is the floored mean of the two red channels; the red and blue terms
/// are right-shifted by 8 before summation.
pub fn redmean_distance_sq(c1: Rgb, c2: Rgb) -> u32 {
    let rm = (u32::from(c1.r) + u32::from(c2.r)) / 2;
    let dr = u32::from(c1.r.abs_diff(c2.r));
    let dg = u32::from(c1.g.abs_diff(c2.g));
    let db = u32::from(c1.b.abs_diff(c2.b));
    (((512 + rm) * dr * dr) >> 8) + 4 * dg * dg + (((767 - rm) * db * db) >> 8)
}

pub fn redmean_distance(c1: Rgb, c2: Rgb) -> f64 {
    f64::from(redmean_distance_sq(c1, c2)).sqrt()
}

/// Nearest palette entry to the rounded mean. Ties keep palette order.
pub fn classify_color(mean: RgbMean, palette: &Palette) -> ColorName {
    let c = mean.rounded();
    palette
        .entries()
        .iter()
        .min_by_key(|(_, p)| redmean_distance_sq(c, *p))
        .map(|(name, _)| name.clone())
        .expect("palette is never empty")
}
