//! Independent oracles and generators shared by the integration tests.
//!
//! Nothing here calls the routines it checks: association is recomputed by
//! counting pixels, color distances in floating point.

#![allow(dead_code)]

use facade_core::{BoundingBox, ColorName, Palette, Rgb};
use rand::Rng;

pub fn random_box<R: Rng>(rng: &mut R, grid: u32) -> BoundingBox {
    let x = rng.random_range(0..grid);
    let y = rng.random_range(0..grid);
    let w = rng.random_range(1..=grid - x);
    let h = rng.random_range(1..=grid - y);
    BoundingBox::new(x, y, w, h).unwrap()
}

fn pixel_in(b: &BoundingBox, px: u32, py: u32) -> bool {
    // Pixel (px, py) covers [px, px+1) x [py, py+1); its center is inside
    // the box iff the box spans that unit cell.
    let (cx, cy) = (px as f64 + 0.5, py as f64 + 0.5);
    cx > b.x() as f64
        && cx < (b.x() + b.width()) as f64
        && cy > b.y() as f64
        && cy < (b.y() + b.height()) as f64
}

/// Per-pixel association: returns, per window, the building it belongs to.
pub fn brute_force_association(
    buildings: &[BoundingBox],
    windows: &[BoundingBox],
    threshold: f64,
    grid: u32,
) -> Vec<Option<usize>> {
    windows
        .iter()
        .map(|w| {
            let mut window_px = 0u64;
            let mut overlap = vec![0u64; buildings.len()];
            for py in 0..grid {
                for px in 0..grid {
                    if !pixel_in(w, px, py) {
                        continue;
                    }
                    window_px += 1;
                    for (i, b) in buildings.iter().enumerate() {
                        if pixel_in(b, px, py) {
                            overlap[i] += 1;
                        }
                    }
                }
            }
            let mut best: Option<(usize, u64)> = None;
            for (i, &o) in overlap.iter().enumerate() {
                let member = o > 0 && o as f64 >= threshold * window_px as f64;
                if member && best.is_none_or(|(_, bo)| o > bo) {
                    best = Some((i, o));
                }
            }
            best.map(|(i, _)| i)
        })
        .collect()
}

/// Redmean distance in floating point, `>> 8` replaced by `/ 256`.
pub fn float_redmean(a: Rgb, b: Rgb) -> f64 {
    let rm = ((a.r as u32 + b.r as u32) / 2) as f64;
    let dr = a.r as f64 - b.r as f64;
    let dg = a.g as f64 - b.g as f64;
    let db = a.b as f64 - b.b as f64;
    ((512.0 + rm) * dr * dr / 256.0 + 4.0 * dg * dg + (767.0 - rm) * db * db / 256.0).sqrt()
}

pub fn float_argmin(c: Rgb, palette: &Palette) -> (ColorName, f64) {
    let mut dists: Vec<(ColorName, f64)> = palette
        .entries()
        .iter()
        .map(|(n, p)| (n.clone(), float_redmean(c, *p)))
        .collect();
    let mut best = 0;
    for i in 1..dists.len() {
        if dists[i].1 < dists[best].1 {
            best = i;
        }
    }
    let (name, d) = dists.swap_remove(best);
    let second = palette
        .entries()
        .iter()
        .filter(|(n, _)| *n != name)
        .map(|(_, p)| float_redmean(c, *p))
        .fold(f64::INFINITY, f64::min);
    (name, second - d)
}

pub fn random_rgb<R: Rng>(rng: &mut R) -> Rgb {
    Rgb::new(rng.random(), rng.random(), rng.random())
}
