//! RGB pixel grids and PNG I/O.

use std::io::Cursor;

use thiserror::Error;

use crate::color::Rgb;
use crate::geometry::BoundingBox;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("image must be at least 1x1 (got {width}x{height})")]
    Empty { width: u32, height: u32 },
    #[error("pixel buffer holds {actual} pixels, expected {expected}")]
    Length { expected: usize, actual: usize },
    #[error("corrupt PNG stream: {0}")]
    Decode(String),
    #[error("unsupported PNG format: {0}")]
    Unsupported(String),
    #[error("PNG encoding failed: {0}")]
    Encode(String),
}

/// Row-major RGB image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: u32,
    height: u32,
    pixels: Vec<Rgb>,
}

impl RasterImage {
    pub fn from_pixels(width: u32, height: u32, pixels: Vec<Rgb>) -> Result<Self, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::Empty { width, height });
        }
        let expected = width as usize * height as usize;
        if pixels.len() != expected {
            return Err(RasterError::Length {
                expected,
                actual: pixels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: u32, height: u32, color: Rgb) -> Result<Self, RasterError> {
        Self::from_pixels(width, height, vec![color; width as usize * height as usize])
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[Rgb] {
        &self.pixels
    }

    pub fn bounds(&self) -> BoundingBox {
        BoundingBox::new(0, 0, self.width, self.height).expect("image is non-empty")
    }

    fn index(&self, x: u32, y: u32) -> usize {
        assert!(
            x < self.width && y < self.height,
            "pixel ({x}, {y}) out of range"
        );
        y as usize * self.width as usize + x as usize
    }

    pub fn get(&self, x: u32, y: u32) -> Rgb {
        self.pixels[self.index(x, y)]
    }

    pub fn put(&mut self, x: u32, y: u32, c: Rgb) {
        let i = self.index(x, y);
        self.pixels[i] = c;
    }

    /// Pixels `[x0, x1)` of row `y`.
    pub fn row_span(&self, y: u32, x0: u32, x1: u32) -> &[Rgb] {
        let start = self.index(x0, y);
        &self.pixels[start..start + (x1 - x0) as usize]
    }

    /// Paints the part of `b` that falls inside the image.
    pub fn fill_box(&mut self, b: &BoundingBox, c: Rgb) {
        let Some(clip) = b.intersection(&self.bounds()) else {
            return;
        };
        let w = self.width as usize;
        for y in clip.min_y()..clip.max_y() {
            let start = y as usize * w + clip.min_x() as usize;
            self.pixels[start..start + clip.width() as usize].fill(c);
        }
    }

    /// Encodes as an 8-bit RGB PNG.
    pub fn encode_png(&self) -> Result<Vec<u8>, RasterError> {
        let mut out = Vec::new();
        let mut enc = png::Encoder::new(&mut out, self.width, self.height);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc
            .write_header()
            .map_err(|e| RasterError::Encode(e.to_string()))?;
        let data: Vec<u8> = self.pixels.iter().flat_map(|p| [p.r, p.g, p.b]).collect();
        writer
            .write_image_data(&data)
            .map_err(|e| RasterError::Encode(e.to_string()))?;
        writer
            .finish()
            .map_err(|e| RasterError::Encode(e.to_string()))?;
        Ok(out)
    }
}

/// Decodes an 8-bit RGB or RGBA PNG. Alpha is dropped; indexed images are
/// expanded through their palette.
pub fn decode(bytes: &[u8]) -> Result<RasterImage, RasterError> {
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::EXPAND);
    let mut reader = decoder
        .read_info()
        .map_err(|e| RasterError::Decode(e.to_string()))?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| RasterError::Unsupported("image too large".into()))?;
    let mut buf = vec![0; size];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| RasterError::Decode(e.to_string()))?;
    if info.bit_depth != png::BitDepth::Eight {
        return Err(RasterError::Unsupported(format!(
            "bit depth {:?}",
            info.bit_depth
        )));
    }
    let channels = match info.color_type {
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        other => return Err(RasterError::Unsupported(format!("color type {other:?}"))),
    };
    let pixels = buf[..info.buffer_size()]
        .chunks_exact(info.line_size)
        .flat_map(|line| {
            line[..info.width as usize * channels]
                .chunks_exact(channels)
                .map(|p| Rgb::new(p[0], p[1], p[2]))
        })
        .collect();
    RasterImage::from_pixels(info.width, info.height, pixels)
}
