//! Synthetic facade images with exact ground truth.
//!
//! Each building is a solid wall-colored rectangle with solid window
//! rectangles drawn on it. Windows keep at least [`WALL_MARGIN`] pixels of
//! wall around them so association and masking are unambiguous. The
//! generator emits the image, its annotation entry and the facade records
//! the pipeline should recover from it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotation::{
    AnnotationEntry, AnnotationSet, Category, Detection, DetectionSet, Region,
};
use crate::classify::{build_record, classify_type, ClassifyConfig, FacadeRecord, FacadeType};
use crate::color::{classify_color, ColorName, Palette, Rgb};
use crate::geometry::BoundingBox;
use crate::raster::{RasterError, RasterImage};

pub const WALL_MARGIN: u32 = 2;
/// Largest allowed gap between the requested and the realized window ratio,
/// in percentage points.
pub const RATIO_TOLERANCE: f64 = 2.0;

pub const DEFAULT_BACKGROUND: Rgb = Rgb::new(228, 226, 220);
pub const DEFAULT_WINDOW: Rgb = Rgb::new(38, 52, 70);

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("{name}: building {index} does not fit inside the canvas")]
    OutsideCanvas { name: String, index: usize },
    #[error("{name}: buildings {a} and {b} overlap")]
    Overlap { name: String, a: usize, b: usize },
    #[error("{name}: building {index}: {reason}")]
    Unachievable {
        name: String,
        index: usize,
        reason: String,
    },
    #[error("corpus spec: {0}")]
    Corpus(String),
    #[error(transparent)]
    Raster(#[from] RasterError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticBuilding {
    pub bbox: BoundingBox,
    pub wall_color: Rgb,
    pub facade_type: FacadeType,
    pub target_ratio_percent: f64,
    pub window_color: Rgb,
    /// `(rows, cols)`; used by the repeated-windows layout only.
    pub grid: Option<(u32, u32)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    /// Image file name; the annotation key is its stem.
    pub name: String,
    pub canvas: (u32, u32),
    pub background: Rgb,
    pub buildings: Vec<SyntheticBuilding>,
    /// Drives box perturbation for this image.
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticImage {
    pub image: RasterImage,
    pub png: Vec<u8>,
    pub annotations: AnnotationSet,
    pub records: Vec<FacadeRecord>,
}

impl SyntheticImage {
    pub fn entry(&self) -> &AnnotationEntry {
        &self.annotations.entries()[0]
    }
}

/// Window boxes realizing one building's facade type and ratio.
pub fn layout_windows(b: &SyntheticBuilding) -> Result<Vec<BoundingBox>, String> {
    let bx = &b.bbox;
    let m = WALL_MARGIN;
    if bx.width() <= 2 * m || bx.height() <= 2 * m {
        return Err("building too small for wall margins".into());
    }
    let target = b.target_ratio_percent;
    let windows = match b.facade_type {
        FacadeType::FrontCurtainWall => vec![inset(bx, m)],
        FacadeType::Other => {
            if !(target > 0.0 && target <= 100.0) {
                return Err(format!("target ratio {target} outside (0, 100]"));
            }
            // One full-width horizontal band, vertically centered.
            let ww = bx.width() - 2 * m;
            let want = target / 100.0 * bx.area() as f64 / f64::from(ww);
            let wh = (want.round() as u32).clamp(1, bx.height() - 2 * m);
            let wy = bx.y() + (bx.height() - wh) / 2;
            vec![BoundingBox::new(bx.x() + m, wy, ww, wh).map_err(|e| e.to_string())?]
        }
        FacadeType::RepeatedSingleWindows => {
            let (rows, cols) = b.grid.ok_or("repeated layout needs a grid")?;
            if rows == 0 || cols == 0 || rows * cols < 2 {
                return Err(format!("grid {rows}x{cols} has fewer than two windows"));
            }
            if !(target > 0.0 && target <= 100.0) {
                return Err(format!("target ratio {target} outside (0, 100]"));
            }
            grid_windows(bx, rows, cols, target)?
        }
    };
    let realized = ratio_of(bx, &windows);
    if b.facade_type != FacadeType::FrontCurtainWall && (realized - target).abs() > RATIO_TOLERANCE
    {
        return Err(format!(
            "target ratio {target:.2} % not reachable (best {realized:.2} %)"
        ));
    }
    Ok(windows)
}

fn inset(b: &BoundingBox, m: u32) -> BoundingBox {
    BoundingBox::new(b.x() + m, b.y() + m, b.width() - 2 * m, b.height() - 2 * m)
        .expect("caller checked the margins")
}

fn ratio_of(b: &BoundingBox, windows: &[BoundingBox]) -> f64 {
    100.0 * windows.iter().map(BoundingBox::area).sum::<u64>() as f64 / b.area() as f64
}

/// Equal windows centered in a rows x cols cell grid, sized so that the
/// total window area is as close as possible to `target` percent.
fn grid_windows(
    b: &BoundingBox,
    rows: u32,
    cols: u32,
    target: f64,
) -> Result<Vec<BoundingBox>, String> {
    let (cell_w, cell_h) = (b.width() / cols, b.height() / rows);
    let m = WALL_MARGIN;
    if cell_w <= 2 * m || cell_h <= 2 * m {
        return Err(format!("grid {rows}x{cols} leaves no room for windows"));
    }
    let (max_w, max_h) = (cell_w - 2 * m, cell_h - 2 * m);
    let n = f64::from(rows * cols);
    let want_area = target / 100.0 * b.area() as f64 / n;

    // Scan window heights; keep the closest area, then the shape closest to
    // the cell's aspect.
    let mut best: Option<(u32, u32, f64, f64)> = None;
    for wh in 1..=max_h {
        let ww = ((want_area / f64::from(wh)).round() as u32).clamp(1, max_w);
        let err = (f64::from(ww * wh) - want_area).abs();
        let shape = (f64::from(ww) / f64::from(max_w) - f64::from(wh) / f64::from(max_h)).abs();
        let better = match best {
            None => true,
            Some((_, _, e, s)) => err < e - 1e-9 || ((err - e).abs() <= 1e-9 && shape < s),
        };
        if better {
            best = Some((ww, wh, err, shape));
        }
    }
    let (ww, wh, _, _) = best.expect("max_h >= 1");
    let x0 = b.x() + (b.width() - cell_w * cols) / 2;
    let y0 = b.y() + (b.height() - cell_h * rows) / 2;
    let mut out = Vec::with_capacity((rows * cols) as usize);
    for r in 0..rows {
        for c in 0..cols {
            let x = x0 + c * cell_w + (cell_w - ww) / 2;
            let y = y0 + r * cell_h + (cell_h - wh) / 2;
            out.push(BoundingBox::new(x, y, ww, wh).map_err(|e| e.to_string())?);
        }
    }
    Ok(out)
}

/// Renders a spec and derives its ground truth with the default
/// classification settings and palette.
pub fn synthesize(spec: &SyntheticSpec) -> Result<SyntheticImage, SynthError> {
    let (cw, ch) = spec.canvas;
    let mut image = RasterImage::filled(cw, ch, spec.background)?;
    let canvas = image.bounds();
    let name = || spec.name.clone();

    for (i, a) in spec.buildings.iter().enumerate() {
        if a.bbox.max_x() > canvas.max_x() || a.bbox.max_y() > canvas.max_y() {
            return Err(SynthError::OutsideCanvas {
                name: name(),
                index: i,
            });
        }
        if let Some(j) = spec.buildings[..i]
            .iter()
            .position(|b| b.bbox.intersection(&a.bbox).is_some())
        {
            return Err(SynthError::Overlap {
                name: name(),
                a: j,
                b: i,
            });
        }
    }

    let cfg = ClassifyConfig::default();
    let palette = Palette::default();
    let key = spec
        .name
        .rsplit_once('.')
        .map_or(spec.name.as_str(), |(stem, _)| stem);
    let mut entry = AnnotationEntry::new(key, spec.name.clone(), 0);
    let mut records = Vec::with_capacity(spec.buildings.len());

    for (i, b) in spec.buildings.iter().enumerate() {
        let unachievable = |reason: String| SynthError::Unachievable {
            name: name(),
            index: i,
            reason,
        };
        let windows = layout_windows(b).map_err(unachievable)?;
        let realized = classify_type(&b.bbox, &windows, &cfg);
        if realized != b.facade_type {
            return Err(unachievable(format!(
                "layout classifies as {realized}, not {}",
                b.facade_type
            )));
        }

        image.fill_box(&b.bbox, b.wall_color);
        for w in &windows {
            image.fill_box(w, b.window_color);
        }
        entry.regions.push(Region {
            bbox: b.bbox,
            category: Category::Building,
        });
        entry.regions.extend(windows.iter().map(|&bbox| Region {
            bbox,
            category: Category::Window,
        }));

        let color = classify_color(b.wall_color.into(), &palette);
        records.push(build_record(i, &b.bbox, &windows, &cfg, Some(color)));
    }

    let png = image.encode_png()?;
    entry.size = png.len() as u64;
    let annotations = AnnotationSet::new(vec![entry]).expect("single entry");
    Ok(SyntheticImage {
        image,
        png,
        annotations,
        records,
    })
}

/// Converts an annotation entry into a detection file, moving every box edge
/// by up to `jitter` pixels. The edge offsets come from `seed`; with
/// `jitter == 0` the boxes are copied exactly and all scores are 1.
pub fn perturbed_detections(
    entry: &AnnotationEntry,
    image_width: u32,
    image_height: u32,
    jitter: u32,
    seed: u64,
) -> DetectionSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let j = i64::from(jitter);
    let (w, h) = (i64::from(image_width), i64::from(image_height));
    let detections = entry
        .regions
        .iter()
        .filter_map(|r| {
            if jitter == 0 {
                return Some(Detection {
                    bbox: r.bbox,
                    category: r.category,
                    score: 1.0,
                });
            }
            let mut edge = |v: u32, hi: i64| (i64::from(v) + rng.random_range(-j..=j)).clamp(0, hi);
            let x0 = edge(r.bbox.min_x(), w);
            let y0 = edge(r.bbox.min_y(), h);
            let x1 = edge(r.bbox.max_x(), w);
            let y1 = edge(r.bbox.max_y(), h);
            let score = rng.random_range(0.5..=1.0);
            let bbox =
                BoundingBox::from_corners(x0 as u32, y0 as u32, x1 as u32, y1 as u32).ok()?;
            Some(Detection {
                bbox,
                category: r.category,
                score,
            })
        })
        .collect();
    DetectionSet {
        filename: entry.filename.clone(),
        image_width,
        image_height,
        detections,
    }
}

/// One group of same-type images in a corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSpec {
    pub facade_type: FacadeType,
    pub count: usize,
    /// Fixed ratio; drawn at random when absent.
    #[serde(default)]
    pub target_ratio_percent: Option<f64>,
    /// Fixed `[rows, cols]` for repeated windows; drawn at random when absent.
    #[serde(default)]
    pub grid: Option<(u32, u32)>,
    /// Fixed wall color from the default palette; drawn at random when absent.
    #[serde(default)]
    pub wall_color: Option<ColorName>,
}

/// Declarative description of a synthetic corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSpec {
    pub seed: u64,
    #[serde(default = "CorpusSpec::default_canvas")]
    pub canvas: (u32, u32),
    /// Edge jitter, in pixels, applied to the emitted detection files.
    #[serde(default)]
    pub jitter_px: u32,
    pub groups: Vec<GroupSpec>,
}

impl CorpusSpec {
    fn default_canvas() -> (u32, u32) {
        (320, 256)
    }

    pub fn image_count(&self) -> usize {
        self.groups.iter().map(|g| g.count).sum()
    }

    /// 43 curtain-wall, 31 repeated-window and 38 other facades.
    pub fn reference_split(seed: u64, jitter_px: u32) -> Self {
        let group = |facade_type, count| GroupSpec {
            facade_type,
            count,
            target_ratio_percent: None,
            grid: None,
            wall_color: None,
        };
        Self {
            seed,
            canvas: Self::default_canvas(),
            jitter_px,
            groups: vec![
                group(FacadeType::FrontCurtainWall, 43),
                group(FacadeType::RepeatedSingleWindows, 31),
                group(FacadeType::Other, 38),
            ],
        }
    }
}

const MIN_BUILDING: u32 = 140;
const CANVAS_PAD: u32 = 8;

/// Expands a corpus description into per-image specs. Image `k` draws from
/// its own ChaCha stream, so the result does not depend on evaluation order.
pub fn corpus_specs(corpus: &CorpusSpec) -> Result<Vec<SyntheticSpec>, SynthError> {
    let (cw, ch) = corpus.canvas;
    if cw < MIN_BUILDING + 2 * CANVAS_PAD || ch < MIN_BUILDING + 2 * CANVAS_PAD {
        return Err(SynthError::Corpus(format!(
            "canvas must be at least {0}x{0}",
            MIN_BUILDING + 2 * CANVAS_PAD
        )));
    }
    let palette = Palette::default();
    let mut specs = Vec::with_capacity(corpus.image_count());
    let mut k: u64 = 0;
    for group in &corpus.groups {
        if let Some(c) = &group.wall_color {
            if palette.get(c).is_none() {
                return Err(SynthError::Corpus(format!("unknown wall color '{c}'")));
            }
        }
        for _ in 0..group.count {
            let mut rng = ChaCha8Rng::seed_from_u64(corpus.seed);
            rng.set_stream(k);
            let bw = rng.random_range(MIN_BUILDING..=cw - 2 * CANVAS_PAD);
            let bh = rng.random_range(MIN_BUILDING..=ch - 2 * CANVAS_PAD);
            let bx = rng.random_range(CANVAS_PAD..=cw - CANVAS_PAD - bw);
            let by = rng.random_range(CANVAS_PAD..=ch - CANVAS_PAD - bh);
            let wall_color = match &group.wall_color {
                Some(c) => palette.get(c).expect("checked above"),
                None => palette.entries()[rng.random_range(0..palette.entries().len())].1,
            };
            let (target, grid) = match group.facade_type {
                FacadeType::FrontCurtainWall => (100.0, None),
                FacadeType::RepeatedSingleWindows => {
                    let grid = group
                        .grid
                        .unwrap_or_else(|| (rng.random_range(2..=5), rng.random_range(2..=5)));
                    let t = group
                        .target_ratio_percent
                        .unwrap_or_else(|| rng.random_range(15.0..60.0));
                    (t, Some(grid))
                }
                FacadeType::Other => (
                    group
                        .target_ratio_percent
                        .unwrap_or_else(|| rng.random_range(10.0..70.0)),
                    None,
                ),
            };
            let bbox = BoundingBox::new(bx, by, bw, bh).expect("positive size");
            specs.push(SyntheticSpec {
                name: format!("facade_{k:04}.png"),
                canvas: corpus.canvas,
                background: DEFAULT_BACKGROUND,
                buildings: vec![SyntheticBuilding {
                    bbox,
                    wall_color,
                    facade_type: group.facade_type,
                    target_ratio_percent: target,
                    window_color: DEFAULT_WINDOW,
                    grid,
                }],
                seed: rng.random(),
            });
            k += 1;
        }
    }
    Ok(specs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::RatioBin;
    use crate::color::mean_rgb;

    fn building(
        facade_type: FacadeType,
        target: f64,
        grid: Option<(u32, u32)>,
    ) -> SyntheticBuilding {
        SyntheticBuilding {
            bbox: BoundingBox::new(10, 10, 200, 160).unwrap(),
            wall_color: Rgb::new(192, 192, 192),
            facade_type,
            target_ratio_percent: target,
            window_color: DEFAULT_WINDOW,
            grid,
        }
    }

    fn spec(b: SyntheticBuilding) -> SyntheticSpec {
        SyntheticSpec {
            name: "t.png".into(),
            canvas: (240, 200),
            background: DEFAULT_BACKGROUND,
            buildings: vec![b],
            seed: 1,
        }
    }

    #[test]
    fn curtain_wall() {
        let s = synthesize(&spec(building(FacadeType::FrontCurtainWall, 100.0, None))).unwrap();
        let r = &s.records[0];
        assert_eq!(r.facade_type, Some(FacadeType::FrontCurtainWall));
        assert_eq!(r.ratio_bin, Some(RatioBin::Upto100));
        assert_eq!(s.entry().regions.len(), 2);
    }

    #[test]
    fn repeated_grid_at_thirty_percent() {
        let s = synthesize(&spec(building(
            FacadeType::RepeatedSingleWindows,
            30.0,
            Some((4, 3)),
        )))
        .unwrap();
        let entry = s.entry();
        let windows: Vec<_> = entry.boxes(Category::Window).collect();
        assert_eq!(windows.len(), 12);
        let b = entry.boxes(Category::Building).next().unwrap();
        let covered: u64 = windows.iter().map(|w| w.area()).sum();
        let ratio = 100.0 * covered as f64 / b.area() as f64;
        assert!((ratio - 30.0).abs() <= RATIO_TOLERANCE, "{ratio}");
        assert_eq!(s.records[0].ratio_bin, Some(RatioBin::Upto50));
        assert_eq!(s.records[0].window_ratio_percent, ratio);
    }

    #[test]
    fn silver_wall_reads_back_silver() {
        let s = synthesize(&spec(building(FacadeType::Other, 40.0, None))).unwrap();
        let entry = s.entry();
        let b = entry.boxes(Category::Building).next().unwrap();
        let windows: Vec<_> = entry.boxes(Category::Window).collect();
        let m = mean_rgb(&s.image, &b, &windows).unwrap();
        assert_eq!(classify_color(m, &Palette::default()), ColorName::Silver);
        assert_eq!(s.records[0].wall_color, Some(ColorName::Silver));
    }

    #[test]
    fn windows_keep_wall_margins() {
        for (t, g) in [
            (FacadeType::FrontCurtainWall, None),
            (FacadeType::RepeatedSingleWindows, Some((5, 5))),
            (FacadeType::Other, None),
        ] {
            let b = building(t, 45.0, g);
            for w in layout_windows(&b).unwrap() {
                assert!(w.min_x() >= b.bbox.min_x() + WALL_MARGIN);
                assert!(w.min_y() >= b.bbox.min_y() + WALL_MARGIN);
                assert!(w.max_x() + WALL_MARGIN <= b.bbox.max_x());
                assert!(w.max_y() + WALL_MARGIN <= b.bbox.max_y());
            }
        }
    }

    #[test]
    fn unachievable_specs() {
        let s = spec(building(
            FacadeType::RepeatedSingleWindows,
            99.0,
            Some((4, 3)),
        ));
        assert!(matches!(
            synthesize(&s),
            Err(SynthError::Unachievable { .. })
        ));
        // A 95 % band is a curtain wall by area, not "other".
        let s = spec(building(FacadeType::Other, 95.0, None));
        assert!(matches!(
            synthesize(&s),
            Err(SynthError::Unachievable { .. })
        ));
        let s = spec(building(
            FacadeType::RepeatedSingleWindows,
            30.0,
            Some((1, 1)),
        ));
        assert!(matches!(
            synthesize(&s),
            Err(SynthError::Unachievable { .. })
        ));
        let mut s = spec(building(FacadeType::Other, 30.0, None));
        s.canvas = (100, 100);
        assert!(matches!(
            synthesize(&s),
            Err(SynthError::OutsideCanvas { .. })
        ));
    }

    #[test]
    fn overlapping_buildings_rejected() {
        let mut s = spec(building(FacadeType::Other, 30.0, None));
        s.buildings.push(s.buildings[0]);
        assert!(matches!(synthesize(&s), Err(SynthError::Overlap { .. })));
    }

    #[test]
    fn deterministic() {
        let corpus = CorpusSpec::reference_split(11, 3);
        let a = corpus_specs(&corpus).unwrap();
        let b = corpus_specs(&corpus).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 112);
        let (x, y) = (synthesize(&a[50]).unwrap(), synthesize(&b[50]).unwrap());
        assert_eq!(x.png, y.png);
        let dx = perturbed_detections(x.entry(), 320, 256, 3, a[50].seed);
        let dy = perturbed_detections(y.entry(), 320, 256, 3, b[50].seed);
        assert_eq!(dx, dy);
    }

    #[test]
    fn jitter_is_bounded() {
        let s = synthesize(&spec(building(
            FacadeType::RepeatedSingleWindows,
            30.0,
            Some((3, 3)),
        )))
        .unwrap();
        let d = perturbed_detections(s.entry(), 240, 200, 3, 99);
        assert_eq!(d.detections.len(), s.entry().regions.len());
        for (det, reg) in d.detections.iter().zip(&s.entry().regions) {
            assert_eq!(det.category, reg.category);
            assert!(det.bbox.min_x().abs_diff(reg.bbox.min_x()) <= 3);
            assert!(det.bbox.max_y().abs_diff(reg.bbox.max_y()) <= 3);
        }
        let exact = perturbed_detections(s.entry(), 240, 200, 0, 99);
        assert!(exact
            .detections
            .iter()
            .zip(&s.entry().regions)
            .all(|(d, r)| d.bbox == r.bbox));
    }
}
