//! Colour-based localisation of hyperlink text on screenshots.
//!
//! Pipeline: 3x3 box blur, RGB to HSV, per-pixel HSV distance threshold,
//! square dilation, then connected components. Dilation only groups glyphs
//! into regions; each reported box is the extent of the undilated pixels of
//! one grouped region, so it hugs the painted text.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::Rect;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: u32,
    height: u32,
    pixels: Vec<[u8; 3]>,
}

impl RgbImage {
    /// Returns `None` unless `pixels.len() == width * height`.
    pub fn from_pixels(width: u32, height: u32, pixels: Vec<[u8; 3]>) -> Option<Self> {
        (pixels.len() == width as usize * height as usize).then_some(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: u32, height: u32, color: [u8; 3]) -> Self {
        Self {
            width,
            height,
            pixels: vec![color; width as usize * height as usize],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.pixels
    }

    pub fn get(&self, x: u32, y: u32) -> [u8; 3] {
        self.pixels[(y * self.width + x) as usize]
    }

    pub fn put(&mut self, x: u32, y: u32, c: [u8; 3]) {
        let w = self.width;
        self.pixels[(y * w + x) as usize] = c;
    }

    pub fn bounds(&self) -> Rect {
        Rect::new(0, 0, self.width as i32, self.height as i32)
    }

    /// Paints a rectangle, clipped to the image.
    pub fn fill_rect(&mut self, r: Rect, c: [u8; 3]) {
        if let Some(r) = r.intersection(&self.bounds()) {
            for y in r.y1..r.y2 {
                for x in r.x1..r.x2 {
                    self.put(x as u32, y as u32, c);
                }
            }
        }
    }

    pub fn decode_png(bytes: &[u8]) -> Result<Self, String> {
        let img = ::image::load_from_memory_with_format(bytes, ::image::ImageFormat::Png)
            .map_err(|e| e.to_string())?
            .to_rgb8();
        let (w, h) = img.dimensions();
        let pixels = img.pixels().map(|p| p.0).collect();
        Ok(Self {
            width: w,
            height: h,
            pixels,
        })
    }

    pub fn encode_png(&self) -> Vec<u8> {
        let flat: Vec<u8> = self.pixels.iter().flatten().copied().collect();
        let buf = ::image::RgbImage::from_raw(self.width, self.height, flat)
            .expect("pixel count matches dimensions");
        let mut out = std::io::Cursor::new(Vec::new());
        buf.write_to(&mut out, ::image::ImageFormat::Png)
            .expect("in-memory PNG encoding");
        out.into_inner()
    }
}

/// Hue in degrees `[0, 360)`, saturation and value in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hsv {
    pub h: f64,
    pub s: f64,
    pub v: f64,
}

impl Hsv {
    pub fn from_rgb([r, g, b]: [u8; 3]) -> Self {
        let r = r as f64 / 255.0;
        let g = g as f64 / 255.0;
        let b = b as f64 / 255.0;
        let max = r.max(g).max(b);
        let min = r.min(g).min(b);
        let delta = max - min;
        let h = if delta == 0.0 {
            0.0
        } else if max == r {
            60.0 * ((g - b) / delta).rem_euclid(6.0)
        } else if max == g {
            60.0 * ((b - r) / delta + 2.0)
        } else {
            60.0 * ((r - g) / delta + 4.0)
        };
        let s = if max == 0.0 { 0.0 } else { delta / max };
        Hsv {
            h: h.rem_euclid(360.0),
            s,
            v: max,
        }
    }
}

/// Per-channel tolerance. Hue is compared circularly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HsvTolerance {
    pub hue: f64,
    pub sat: f64,
    pub val: f64,
}

pub fn hue_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    d.min(360.0 - d)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinkDetectionConfig {
    pub target: Hsv,
    pub tolerance: HsvTolerance,
    pub dilation_radius: u32,
    pub min_area: i64,
    pub smooth: bool,
}

impl Default for LinkDetectionConfig {
    /// Typical hyperlink blue: hue 210 +/- 15, saturation and value at least 0.4.
    fn default() -> Self {
        Self {
            target: Hsv { h: 210.0, s: 0.7, v: 0.7 },
            tolerance: HsvTolerance { hue: 15.0, sat: 0.3, val: 0.3 },
            dilation_radius: 3,
            min_area: 50,
            smooth: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width as usize * height as usize],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[(y * self.width + x) as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, v: bool) {
        let w = self.width;
        self.bits[(y * w + x) as usize] = v;
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn fill_rect(&mut self, r: Rect) {
        let bounds = Rect::new(0, 0, self.width as i32, self.height as i32);
        if let Some(r) = r.intersection(&bounds) {
            for y in r.y1..r.y2 {
                for x in r.x1..r.x2 {
                    self.set(x as u32, y as u32, true);
                }
            }
        }
    }
}

/// 3x3 mean filter with edge clamping.
pub fn box_blur(image: &RgbImage) -> RgbImage {
    let (w, h) = (image.width as i64, image.height as i64);
    let mut out = image.clone();
    for y in 0..h {
        for x in 0..w {
            let mut acc = [0u32; 3];
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let sx = (x + dx).clamp(0, w - 1) as u32;
                    let sy = (y + dy).clamp(0, h - 1) as u32;
                    let p = image.get(sx, sy);
                    for c in 0..3 {
                        acc[c] += p[c] as u32;
                    }
                }
            }
            out.put(x as u32, y as u32, acc.map(|s| ((s + 4) / 9) as u8));
        }
    }
    out
}

// 8-bit colours sit at least ~1e-6 apart, so this only absorbs rounding at exact ties.
const TIE_EPSILON: f64 = 1e-9;

/// A pixel is set when each HSV channel lies within tolerance of the target,
/// borders included.
pub fn binarize_by_hsv_distance(image: &RgbImage, target: Hsv, tolerance: HsvTolerance) -> BinaryMask {
    let bits = image
        .pixels
        .iter()
        .map(|&p| {
            let hsv = Hsv::from_rgb(p);
            hue_distance(hsv.h, target.h) <= tolerance.hue + TIE_EPSILON
                && (hsv.s - target.s).abs() <= tolerance.sat + TIE_EPSILON
                && (hsv.v - target.v).abs() <= tolerance.val + TIE_EPSILON
        })
        .collect();
    BinaryMask {
        width: image.width,
        height: image.height,
        bits,
    }
}

/// Dilation with a `(2r+1)` square structuring element, done as two 1-D passes.
pub fn dilate(mask: &BinaryMask, radius: u32) -> BinaryMask {
    if radius == 0 {
        return mask.clone();
    }
    let (w, h) = (mask.width as usize, mask.height as usize);
    let r = radius as usize;
    let mut horiz = vec![false; w * h];
    for y in 0..h {
        let row = &mask.bits[y * w..(y + 1) * w];
        for x in 0..w {
            let lo = x.saturating_sub(r);
            let hi = (x + r).min(w - 1);
            horiz[y * w + x] = row[lo..=hi].iter().any(|b| *b);
        }
    }
    let mut bits = vec![false; w * h];
    for x in 0..w {
        for y in 0..h {
            let lo = y.saturating_sub(r);
            let hi = (y + r).min(h - 1);
            bits[y * w + x] = (lo..=hi).any(|yy| horiz[yy * w + x]);
        }
    }
    BinaryMask {
        width: mask.width,
        height: mask.height,
        bits,
    }
}

/// Labels 8-connected components of `grouping` and returns, per component,
/// the bounding box of the `seed` pixels it contains.
pub(crate) fn grouped_boxes(grouping: &BinaryMask, seed: &BinaryMask) -> Vec<Rect> {
    let (w, h) = (grouping.width as usize, grouping.height as usize);
    let mut visited = vec![false; w * h];
    let mut boxes = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if !grouping.bits[start] || visited[start] {
            continue;
        }
        visited[start] = true;
        queue.push_back(start);
        let mut bbox: Option<Rect> = None;
        while let Some(idx) = queue.pop_front() {
            let (x, y) = ((idx % w) as i32, (idx / w) as i32);
            if seed.bits[idx] {
                let px = Rect::new(x, y, x + 1, y + 1);
                bbox = Some(bbox.map_or(px, |b| b.union(&px)));
            }
            for dy in -1i32..=1 {
                for dx in -1i32..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w as i32 || ny >= h as i32 {
                        continue;
                    }
                    let n = ny as usize * w + nx as usize;
                    if grouping.bits[n] && !visited[n] {
                        visited[n] = true;
                        queue.push_back(n);
                    }
                }
            }
        }
        boxes.extend(bbox);
    }
    boxes
}

/// Unions overlapping boxes until the set is pairwise disjoint.
fn merge_overlapping(mut boxes: Vec<Rect>) -> Vec<Rect> {
    loop {
        let mut merged = false;
        'outer: for i in 0..boxes.len() {
            for j in i + 1..boxes.len() {
                if boxes[i].intersects(&boxes[j]) {
                    let other = boxes.swap_remove(j);
                    boxes[i] = boxes[i].union(&other);
                    merged = true;
                    break 'outer;
                }
            }
        }
        if !merged {
            return boxes;
        }
    }
}

/// Boxes around link-coloured text, in top-left raster order.
pub fn extract_link_regions(image: &RgbImage, config: &LinkDetectionConfig) -> Vec<Rect> {
    if image.is_empty() {
        return Vec::new();
    }
    let smoothed;
    let source = if config.smooth {
        smoothed = box_blur(image);
        &smoothed
    } else {
        image
    };
    let mask = binarize_by_hsv_distance(source, config.target, config.tolerance);
    let grouped = dilate(&mask, config.dilation_radius);
    let mut boxes = merge_overlapping(grouped_boxes(&grouped, &mask));
    boxes.retain(|b| b.area() >= config.min_area);
    boxes.sort_by_key(|b| (b.y1, b.x1));
    boxes
}
