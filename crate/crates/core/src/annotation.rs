//! Annotation metadata and detection documents.
//!
//! Two JSON layouts are handled here:
//!
//! * the VIA-style annotation file: a top-level object keyed by a per-image
//!   identifier, each value carrying `filename`, `size`, `regions` and
//!   `file_attributes`. Only `rect` regions are accepted.
//! * the detection file a detector emits for one image:
//!   `{"filename", "image_width", "image_height", "detections": [...]}`.

use std::collections::HashSet;
use std::fmt;

use serde::de::{Deserializer, MapAccess, Visitor};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::geometry::BoundingBox;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnnotationError {
    #[error("malformed document at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("{entry}: region {region} has unsupported shape '{shape}' (only 'rect' is accepted)")]
    UnsupportedShape {
        entry: String,
        region: usize,
        shape: String,
    },
    #[error("{context}: {message}")]
    Schema { context: String, message: String },
    #[error("{context}: invalid box: {message}")]
    Invariant { context: String, message: String },
}

impl AnnotationError {
    fn schema(context: impl Into<String>, message: impl Into<String>) -> Self {
        AnnotationError::Schema {
            context: context.into(),
            message: message.into(),
        }
    }

    fn from_json(text: &str, err: serde_json::Error) -> Self {
        use serde_json::error::Category as C;
        match err.classify() {
            C::Data => AnnotationError::schema("document", strip_position(&err)),
            C::Syntax | C::Eof | C::Io => AnnotationError::Syntax {
                offset: byte_offset(text, err.line(), err.column()),
                message: strip_position(&err),
            },
        }
    }
}

fn strip_position(err: &serde_json::Error) -> String {
    let full = err.to_string();
    match full.rfind(" at line ") {
        Some(i) => full[..i].to_string(),
        None => full,
    }
}

/// Converts serde_json's 1-based line/column into a byte offset.
fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let line_start: usize = text
        .split_inclusive('\n')
        .take(line - 1)
        .map(str::len)
        .sum();
    (line_start + column.saturating_sub(1)).min(text.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Building,
    Window,
}

impl Category {
    pub const ALL: [Category; 2] = [Category::Building, Category::Window];

    pub fn as_str(&self) -> &'static str {
        match self {
            Category::Building => "building",
            Category::Window => "window",
        }
    }

    /// Case-sensitive: only the exact lowercase names are accepted.
    pub fn parse(s: &str) -> Option<Category> {
        match s {
            "building" => Some(Category::Building),
            "window" => Some(Category::Window),
            _ => None,
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Region {
    pub bbox: BoundingBox,
    pub category: Category,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationEntry {
    /// Per-image key of the top-level map.
    pub key: String,
    pub filename: String,
    /// File size in bytes.
    pub size: u64,
    pub regions: Vec<Region>,
    /// Kept verbatim; never interpreted.
    pub file_attributes: Map<String, Value>,
}

impl AnnotationEntry {
    pub fn new(key: impl Into<String>, filename: impl Into<String>, size: u64) -> Self {
        Self {
            key: key.into(),
            filename: filename.into(),
            size,
            regions: Vec::new(),
            file_attributes: Map::new(),
        }
    }

    pub fn boxes(&self, category: Category) -> impl Iterator<Item = BoundingBox> + '_ {
        self.regions
            .iter()
            .filter(move |r| r.category == category)
            .map(|r| r.bbox)
    }
}

/// Ordered set of per-image annotations with unique keys and filenames.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AnnotationSet {
    entries: Vec<AnnotationEntry>,
}

impl AnnotationSet {
    pub fn new(entries: Vec<AnnotationEntry>) -> Result<Self, AnnotationError> {
        let mut keys = HashSet::new();
        let mut names = HashSet::new();
        for e in &entries {
            if !keys.insert(e.key.as_str()) {
                return Err(AnnotationError::schema(&e.key, "duplicate image key"));
            }
            if !names.insert(e.filename.as_str()) {
                return Err(AnnotationError::schema(
                    &e.key,
                    format!("duplicate filename '{}'", e.filename),
                ));
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[AnnotationEntry] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<AnnotationEntry> {
        self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn by_filename(&self, filename: &str) -> Option<&AnnotationEntry> {
        self.entries.iter().find(|e| e.filename == filename)
    }
}

/// Top-level object read as ordered pairs so duplicate keys stay visible.
struct OrderedPairs(Vec<(String, Value)>);

impl<'de> Deserialize<'de> for OrderedPairs {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct PairsVisitor;

        impl<'de> Visitor<'de> for PairsVisitor {
            type Value = OrderedPairs;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an object of image entries")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<OrderedPairs, A::Error> {
                let mut pairs = Vec::new();
                while let Some((k, v)) = map.next_entry::<String, Value>()? {
                    pairs.push((k, v));
                }
                Ok(OrderedPairs(pairs))
            }
        }

        deserializer.deserialize_map(PairsVisitor)
    }
}

pub fn parse_annotations(text: &str) -> Result<AnnotationSet, AnnotationError> {
    let OrderedPairs(pairs) =
        serde_json::from_str(text).map_err(|e| AnnotationError::from_json(text, e))?;
    let entries = pairs
        .into_iter()
        .map(|(key, value)| parse_entry(key, value))
        .collect::<Result<Vec<_>, _>>()?;
    AnnotationSet::new(entries)
}

fn parse_entry(key: String, value: Value) -> Result<AnnotationEntry, AnnotationError> {
    let Value::Object(mut obj) = value else {
        return Err(AnnotationError::schema(
            &key,
            "image entry must be an object",
        ));
    };
    let filename = match obj.remove("filename") {
        Some(Value::String(s)) => s,
        Some(_) => return Err(AnnotationError::schema(&key, "'filename' must be a string")),
        None => return Err(AnnotationError::schema(&key, "missing 'filename'")),
    };
    let size = match obj.remove("size") {
        Some(v) => v.as_u64().filter(|_| !v.is_f64()).ok_or_else(|| {
            AnnotationError::schema(&key, "'size' must be a non-negative integer")
        })?,
        None => return Err(AnnotationError::schema(&key, "missing 'size'")),
    };
    let regions = match obj.remove("regions") {
        Some(Value::Array(items)) => items
            .into_iter()
            .enumerate()
            .map(|(i, r)| parse_region(&key, i, r))
            .collect::<Result<Vec<_>, _>>()?,
        Some(_) => return Err(AnnotationError::schema(&key, "'regions' must be an array")),
        None => return Err(AnnotationError::schema(&key, "missing 'regions'")),
    };
    let file_attributes = match obj.remove("file_attributes") {
        Some(Value::Object(m)) => m,
        None => Map::new(),
        Some(_) => {
            return Err(AnnotationError::schema(
                &key,
                "'file_attributes' must be an object",
            ))
        }
    };
    Ok(AnnotationEntry {
        key,
        filename,
        size,
        regions,
        file_attributes,
    })
}

fn parse_region(entry: &str, index: usize, value: Value) -> Result<Region, AnnotationError> {
    let context = format!("{entry}: region {index}");
    let obj = value
        .as_object()
        .ok_or_else(|| AnnotationError::schema(&context, "region must be an object"))?;
    let shape = obj
        .get("shape_attributes")
        .and_then(Value::as_object)
        .ok_or_else(|| AnnotationError::schema(&context, "missing 'shape_attributes' object"))?;
    let name = shape
        .get("name")
        .and_then(Value::as_str)
        .ok_or_else(|| AnnotationError::schema(&context, "missing shape 'name'"))?;
    if name != "rect" {
        return Err(AnnotationError::UnsupportedShape {
            entry: entry.to_string(),
            region: index,
            shape: name.to_string(),
        });
    }
    let coord = |field: &str| -> Result<u32, AnnotationError> {
        let v = shape
            .get(field)
            .ok_or_else(|| AnnotationError::schema(&context, format!("missing '{field}'")))?;
        let n = v.as_u64().filter(|_| !v.is_f64()).ok_or_else(|| {
            AnnotationError::schema(
                &context,
                format!("'{field}' must be a non-negative integer, got {v}"),
            )
        })?;
        u32::try_from(n)
            .map_err(|_| AnnotationError::schema(&context, format!("'{field}' out of range: {n}")))
    };
    let (x, y, w, h) = (coord("x")?, coord("y")?, coord("width")?, coord("height")?);
    let bbox = BoundingBox::new(x, y, w, h).map_err(|e| AnnotationError::Invariant {
        context: context.clone(),
        message: e.to_string(),
    })?;
    let class = obj
        .get("region_attributes")
        .and_then(Value::as_object)
        .and_then(|a| a.get("class"))
        .and_then(Value::as_str)
        .ok_or_else(|| AnnotationError::schema(&context, "missing region_attributes.class"))?;
    let category = Category::parse(class)
        .ok_or_else(|| AnnotationError::schema(&context, format!("unknown category '{class}'")))?;
    Ok(Region { bbox, category })
}

/// Canonical pretty-printed JSON for an annotation set.
pub fn emit_annotations(set: &AnnotationSet) -> String {
    let mut root = Map::new();
    for e in set.entries() {
        let regions: Vec<Value> = e
            .regions
            .iter()
            .map(|r| {
                json!({
                    "shape_attributes": {
                        "name": "rect",
                        "x": r.bbox.x(),
                        "y": r.bbox.y(),
                        "width": r.bbox.width(),
                        "height": r.bbox.height(),
                    },
                    "region_attributes": { "class": r.category.as_str() },
                })
            })
            .collect();
        root.insert(
            e.key.clone(),
            json!({
                "filename": e.filename,
                "size": e.size,
                "regions": regions,
                "file_attributes": e.file_attributes,
            }),
        );
    }
    let mut out =
        serde_json::to_string_pretty(&Value::Object(root)).expect("a JSON value always serializes");
    out.push('\n');
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub bbox: BoundingBox,
    pub category: Category,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionSet {
    pub filename: String,
    pub image_width: u32,
    pub image_height: u32,
    pub detections: Vec<Detection>,
}

impl DetectionSet {
    pub fn boxes(&self, category: Category) -> Vec<BoundingBox> {
        self.detections
            .iter()
            .filter(|d| d.category == category)
            .map(|d| d.bbox)
            .collect()
    }
}

/// A parsed detection file together with the clamping it needed.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedDetections {
    pub set: DetectionSet,
    /// Boxes that extended past the image and were cut back to it.
    pub clamped: usize,
    /// Boxes lying entirely outside the image, dropped.
    pub discarded: usize,
}

impl ParsedDetections {
    pub fn warnings(&self) -> usize {
        self.clamped + self.discarded
    }
}

#[derive(Deserialize, Serialize)]
struct RawDetectionFile {
    filename: String,
    image_width: Option<u32>,
    image_height: Option<u32>,
    detections: Vec<RawDetection>,
}

#[derive(Deserialize, Serialize)]
struct RawDetection {
    category: Category,
    score: f64,
    x: i64,
    y: i64,
    width: i64,
    height: i64,
}

pub fn parse_detections(text: &str) -> Result<ParsedDetections, AnnotationError> {
    let raw: RawDetectionFile =
        serde_json::from_str(text).map_err(|e| AnnotationError::from_json(text, e))?;
    let ctx = raw.filename.clone();
    let image_width = raw
        .image_width
        .ok_or_else(|| AnnotationError::schema(&ctx, "missing 'image_width'"))?;
    let image_height = raw
        .image_height
        .ok_or_else(|| AnnotationError::schema(&ctx, "missing 'image_height'"))?;
    if image_width == 0 || image_height == 0 {
        return Err(AnnotationError::schema(
            &ctx,
            "image dimensions must be positive",
        ));
    }

    let mut out = ParsedDetections {
        set: DetectionSet {
            filename: raw.filename,
            image_width,
            image_height,
            detections: Vec::with_capacity(raw.detections.len()),
        },
        clamped: 0,
        discarded: 0,
    };
    for (i, d) in raw.detections.into_iter().enumerate() {
        let dctx = format!("{ctx}: detection {i}");
        if !(0.0..=1.0).contains(&d.score) {
            return Err(AnnotationError::schema(
                &dctx,
                format!("score {} outside [0, 1]", d.score),
            ));
        }
        if d.width <= 0 || d.height <= 0 {
            return Err(AnnotationError::Invariant {
                context: dctx,
                message: format!("non-positive extent {}x{}", d.width, d.height),
            });
        }
        let (w, h) = (i64::from(image_width), i64::from(image_height));
        let x0 = d.x.clamp(0, w);
        let y0 = d.y.clamp(0, h);
        let x1 = d.x.saturating_add(d.width).clamp(0, w);
        let y1 = d.y.saturating_add(d.height).clamp(0, h);
        if x1 <= x0 || y1 <= y0 {
            out.discarded += 1;
            continue;
        }
        if (x0, y0, x1, y1) != (d.x, d.y, d.x + d.width, d.y + d.height) {
            out.clamped += 1;
        }
        // Clamped coordinates fit in u32 because the image dimensions do.
        let bbox =
            BoundingBox::from_corners(x0 as u32, y0 as u32, x1 as u32, y1 as u32).map_err(|e| {
                AnnotationError::Invariant {
                    context: dctx,
                    message: e.to_string(),
                }
            })?;
        out.set.detections.push(Detection {
            bbox,
            category: d.category,
            score: d.score,
        });
    }
    Ok(out)
}

pub fn emit_detections(set: &DetectionSet) -> String {
    let raw = RawDetectionFile {
        filename: set.filename.clone(),
        image_width: Some(set.image_width),
        image_height: Some(set.image_height),
        detections: set
            .detections
            .iter()
            .map(|d| RawDetection {
                category: d.category,
                score: d.score,
                x: d.bbox.x().into(),
                y: d.bbox.y().into(),
                width: d.bbox.width().into(),
                height: d.bbox.height().into(),
            })
            .collect(),
    };
    let mut out = serde_json::to_string_pretty(&raw).expect("detection file serializes");
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const VIA_SAMPLE: &str = r#"{
  "image2_info": {
    "filename": "image2.png",
    "size": 390471,
    "regions": [
      { "shape_attributes": { "name": "rect", "x": 125, "y": 213, "width": 259, "height": 471 },
        "region_attributes": { "class": "building" } },
      { "shape_attributes": { "name": "rect", "x": 689, "y": 1048, "width": 290, "height": 454 },
        "region_attributes": { "class": "building" } }
    ],
    "file_attributes": {}
  }
}"#;

    #[test]
    fn via_sample_values() {
        let set = parse_annotations(VIA_SAMPLE).unwrap();
        assert_eq!(set.len(), 1);
        let e = &set.entries()[0];
        assert_eq!(
            (e.key.as_str(), e.filename.as_str(), e.size),
            ("image2_info", "image2.png", 390_471)
        );
        assert_eq!(e.regions.len(), 2);
        let b = e.regions[0].bbox;
        assert_eq!((b.x(), b.y(), b.width(), b.height()), (125, 213, 259, 471));
        assert_eq!(e.regions[0].category, Category::Building);
        let b = e.regions[1].bbox;
        assert_eq!((b.x(), b.y(), b.width(), b.height()), (689, 1048, 290, 454));
    }

    #[test]
    fn round_trip_keeps_region_order() {
        let set = parse_annotations(VIA_SAMPLE).unwrap();
        let text = emit_annotations(&set);
        assert_eq!(parse_annotations(&text).unwrap(), set);
    }

    #[test]
    fn empty_document() {
        let set = parse_annotations("{}").unwrap();
        assert!(set.is_empty());
        assert_eq!(emit_annotations(&set).trim(), "{}");
    }

    #[test]
    fn zero_width_is_invariant_error() {
        let doc = VIA_SAMPLE.replace("\"width\": 259", "\"width\": 0");
        assert!(matches!(
            parse_annotations(&doc),
            Err(AnnotationError::Invariant { .. })
        ));
    }

    #[test]
    fn polygon_rejected_with_region_name() {
        let doc = VIA_SAMPLE.replacen("\"rect\"", "\"polygon\"", 1);
        match parse_annotations(&doc) {
            Err(AnnotationError::UnsupportedShape {
                entry,
                region,
                shape,
            }) => {
                assert_eq!(
                    (entry.as_str(), region, shape.as_str()),
                    ("image2_info", 0, "polygon")
                );
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn category_is_case_sensitive() {
        let doc = VIA_SAMPLE.replacen("\"building\"", "\"Building\"", 1);
        assert!(matches!(
            parse_annotations(&doc),
            Err(AnnotationError::Schema { .. })
        ));
    }

    #[test]
    fn fractional_and_negative_coordinates_rejected() {
        for bad in ["\"x\": 125.5", "\"x\": 125.0", "\"x\": -1"] {
            let doc = VIA_SAMPLE.replacen("\"x\": 125", bad, 1);
            assert!(
                matches!(parse_annotations(&doc), Err(AnnotationError::Schema { .. })),
                "{bad}"
            );
        }
    }

    #[test]
    fn syntax_error_reports_byte_offset() {
        let doc = "{\n  \"a\": {\"filename\": \"x.png\",, }\n}";
        match parse_annotations(doc) {
            Err(AnnotationError::Syntax { offset, .. }) => {
                assert_eq!(&doc[offset..offset + 1], ",");
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_annotations("{\"a\": "),
            Err(AnnotationError::Syntax { .. })
        ));
    }

    #[test]
    fn duplicate_keys_and_filenames() {
        let doc = r#"{"a": {"filename": "x.png", "size": 1, "regions": []},
                      "a": {"filename": "y.png", "size": 1, "regions": []}}"#;
        assert!(matches!(
            parse_annotations(doc),
            Err(AnnotationError::Schema { .. })
        ));
        let doc = r#"{"a": {"filename": "x.png", "size": 1, "regions": []},
                      "b": {"filename": "x.png", "size": 1, "regions": []}}"#;
        assert!(matches!(
            parse_annotations(doc),
            Err(AnnotationError::Schema { .. })
        ));
    }

    #[test]
    fn file_attributes_preserved() {
        let doc = r#"{"a": {"filename": "x.png", "size": 0, "regions": [],
                      "file_attributes": {"camera": {"tilt": 14}}}}"#;
        let set = parse_annotations(doc).unwrap();
        assert_eq!(set.entries()[0].file_attributes["camera"]["tilt"], 14);
        assert_eq!(parse_annotations(&emit_annotations(&set)).unwrap(), set);
    }

    fn det_doc(body: &str) -> String {
        format!(
            r#"{{"filename": "a.png", "image_width": 1920, "image_height": 1080, "detections": [{body}]}}"#
        )
    }

    #[test]
    fn detection_inside_image() {
        let p = parse_detections(&det_doc(
            r#"{"category": "building", "score": 0.98, "x": 100, "y": 100, "width": 500, "height": 600}"#,
        ))
        .unwrap();
        assert_eq!(p.set.detections.len(), 1);
        assert_eq!(p.warnings(), 0);
        assert_eq!(p.set.detections[0].score, 0.98);
    }

    #[test]
    fn detection_clamped_at_right_edge() {
        let p = parse_detections(&det_doc(
            r#"{"category": "window", "score": 0.7, "x": 1880, "y": 10, "width": 50, "height": 20}"#,
        ))
        .unwrap();
        assert_eq!(p.clamped, 1);
        let b = p.set.detections[0].bbox;
        assert_eq!((b.x(), b.max_x(), b.width()), (1880, 1920, 40));
    }

    #[test]
    fn detection_fully_outside_is_discarded() {
        let p = parse_detections(&det_doc(
            r#"{"category": "window", "score": 0.7, "x": -50, "y": 10, "width": 20, "height": 20}"#,
        ))
        .unwrap();
        assert_eq!((p.discarded, p.set.detections.len()), (1, 0));
    }

    #[test]
    fn detection_schema_errors() {
        let bad_score = det_doc(
            r#"{"category": "window", "score": 1.2, "x": 0, "y": 0, "width": 5, "height": 5}"#,
        );
        assert!(matches!(
            parse_detections(&bad_score),
            Err(AnnotationError::Schema { .. })
        ));
        let no_dims = r#"{"filename": "a.png", "image_width": 10, "detections": []}"#;
        assert!(matches!(
            parse_detections(no_dims),
            Err(AnnotationError::Schema { .. })
        ));
        let frac = det_doc(
            r#"{"category": "window", "score": 0.5, "x": 0.5, "y": 0, "width": 5, "height": 5}"#,
        );
        assert!(matches!(
            parse_detections(&frac),
            Err(AnnotationError::Schema { .. })
        ));
        let cat = det_doc(
            r#"{"category": "door", "score": 0.5, "x": 0, "y": 0, "width": 5, "height": 5}"#,
        );
        assert!(matches!(
            parse_detections(&cat),
            Err(AnnotationError::Schema { .. })
        ));
    }

    #[test]
    fn detections_round_trip() {
        let p = parse_detections(&det_doc(
            r#"{"category": "building", "score": 0.25, "x": 1, "y": 2, "width": 3, "height": 4}"#,
        ))
        .unwrap();
        let again = parse_detections(&emit_detections(&p.set)).unwrap();
        assert_eq!(again.set, p.set);
    }
}
