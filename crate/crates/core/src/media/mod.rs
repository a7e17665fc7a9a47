//! Frame acquisition and raster manipulation.
//!
//! Frames are plain RGB8 rasters held in memory. Geometry is carried as
//! real-valued [`Rect`]s and only rasterized when pixels are actually cut
//! out of a frame (see [`Rect::rasterize`]).

mod codec;
mod raster;
mod source;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use codec::{decode_image, encode_image, load_image, ImageFormat};
pub use raster::{crop, crop_pixels, resize};
pub(crate) use source::parse_rational;
pub use source::{sample_frames, sample_indices, FrameSource, SourceKind};

/// A decoded RGB frame.
#[derive(Clone, PartialEq)]
pub struct FrameImage {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
    frame_index: usize,
    timestamp: f64,
}

impl FrameImage {
    /// Builds a frame from a row-major RGB8 buffer.
    pub fn new(
        width: u32,
        height: u32,
        pixels: Vec<u8>,
        frame_index: usize,
        timestamp: f64,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Argument(format!(
                "frame dimensions must be positive, got {width}x{height}"
            )));
        }
        let expected = width as usize * height as usize * 3;
        if pixels.len() != expected {
            return Err(Error::Argument(format!(
                "pixel buffer has {} bytes, expected {expected} for {width}x{height} RGB",
                pixels.len()
            )));
        }
        if !(timestamp.is_finite() && timestamp >= 0.0) {
            return Err(Error::Argument(format!("invalid timestamp {timestamp}")));
        }
        Ok(Self {
            width,
            height,
            pixels,
            frame_index,
            timestamp,
        })
    }

    /// A frame filled with a single colour.
    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Result<Self> {
        let pixels = rgb
            .iter()
            .copied()
            .cycle()
            .take(width as usize * height as usize * 3)
            .collect();
        Self::new(width, height, pixels, 0, 0.0)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dimensions(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    pub fn frame_index(&self) -> usize {
        self.frame_index
    }

    pub fn timestamp(&self) -> f64 {
        self.timestamp
    }

    pub fn with_position(mut self, frame_index: usize, timestamp: f64) -> Self {
        self.frame_index = frame_index;
        self.timestamp = timestamp;
        self
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn put_pixel(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }

    /// Paints an axis-aligned rectangle (rasterized and clamped like a crop).
    pub fn fill_rect(&mut self, rect: &Rect, rgb: [u8; 3]) {
        if let Some(px) = rect.rasterize(self.width, self.height) {
            for y in px.y..px.y + px.height {
                for x in px.x..px.x + px.width {
                    self.put_pixel(x, y, rgb);
                }
            }
        }
    }

    pub fn full_rect(&self) -> Rect {
        Rect::new(0.0, 0.0, self.width as f64, self.height as f64)
            .expect("frame dimensions are positive")
    }
}

impl fmt::Debug for FrameImage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FrameImage")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("frame_index", &self.frame_index)
            .field("timestamp", &self.timestamp)
            .finish_non_exhaustive()
    }
}

/// Axis-aligned rectangle in real-valued pixel coordinates, origin top-left.
///
/// Always satisfies `x0 < x1` and `y0 < y1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rect {
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        let finite = [x0, y0, x1, y1].iter().all(|v| v.is_finite());
        if !finite || x0 >= x1 || y0 >= y1 {
            return Err(Error::DegenerateRegion(format!(
                "rect ({x0}, {y0}, {x1}, {y1}) has no area"
            )));
        }
        Ok(Self { x0, y0, x1, y1 })
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn y0(&self) -> f64 {
        self.y0
    }

    pub fn x1(&self) -> f64 {
        self.x1
    }

    pub fn y1(&self) -> f64 {
        self.y1
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.x0, self.y0, self.x1, self.y1]
    }

    /// True when the two rectangles share a region of positive area.
    /// Touching edges do not count.
    pub fn overlaps(&self, other: &Rect) -> bool {
        self.x0.max(other.x0) < self.x1.min(other.x1)
            && self.y0.max(other.y0) < self.y1.min(other.y1)
    }

    /// True when `other` lies entirely inside `self` (edges inclusive).
    pub fn contains(&self, other: &Rect) -> bool {
        self.x0 <= other.x0 && self.y0 <= other.y0 && other.x1 <= self.x1 && other.y1 <= self.y1
    }

    /// Clips to `[0, width] x [0, height]`; `None` if nothing with positive
    /// area remains.
    pub fn clip(&self, width: f64, height: f64) -> Option<Rect> {
        Rect::new(
            self.x0.max(0.0),
            self.y0.max(0.0),
            self.x1.min(width),
            self.y1.min(height),
        )
        .ok()
    }

    /// Rounds each coordinate half away from zero, then clamps to the frame.
    /// Returns `None` when the result has zero area.
    pub fn rasterize(&self, width: u32, height: u32) -> Option<PixelRect> {
        let clamp = |v: f64, hi: u32| v.round().clamp(0.0, hi as f64) as u32;
        let x0 = clamp(self.x0, width);
        let y0 = clamp(self.y0, height);
        let x1 = clamp(self.x1, width);
        let y1 = clamp(self.y1, height);
        (x1 > x0 && y1 > y0).then_some(PixelRect {
            x: x0,
            y: y0,
            width: x1 - x0,
            height: y1 - y0,
        })
    }
}

impl<'de> Deserialize<'de> for Rect {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            x0: f64,
            y0: f64,
            x1: f64,
            y1: f64,
        }
        let raw = Raw::deserialize(d)?;
        Rect::new(raw.x0, raw.y0, raw.x1, raw.y1).map_err(serde::de::Error::custom)
    }
}

/// Integer pixel rectangle produced by [`Rect::rasterize`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PixelRect {
    pub x: u32,
    pub y: u32,
    pub width: u32,
    pub height: u32,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_rejects_bad_buffer() {
        assert!(FrameImage::new(2, 2, vec![0; 11], 0, 0.0).is_err());
        assert!(FrameImage::new(0, 2, vec![], 0, 0.0).is_err());
        assert!(FrameImage::new(2, 2, vec![0; 12], 0, -1.0).is_err());
        assert!(FrameImage::new(2, 2, vec![0; 12], 0, 0.0).is_ok());
    }

    #[test]
    fn rect_requires_positive_area() {
        assert!(Rect::new(0.0, 0.0, 0.0, 1.0).is_err());
        assert!(Rect::new(0.0, 1.0, 1.0, 1.0).is_err());
        assert!(Rect::new(f64::NAN, 0.0, 1.0, 1.0).is_err());
        assert!(Rect::new(0.0, 0.0, 1.0, 1.0).is_ok());
    }

    #[test]
    fn touching_rects_do_not_overlap() {
        let a = Rect::new(0.0, 0.0, 10.0, 10.0).unwrap();
        let b = Rect::new(10.0, 0.0, 20.0, 10.0).unwrap();
        let c = Rect::new(9.5, 5.0, 20.0, 10.0).unwrap();
        assert!(!a.overlaps(&b));
        assert!(a.overlaps(&c));
        assert!(a.contains(&a));
        assert!(!a.contains(&c));
    }

    #[test]
    fn rasterize_rounds_then_clamps() {
        let r = Rect::new(-10.0, -10.0, 50.4, 50.6).unwrap();
        assert_eq!(
            r.rasterize(100, 100),
            Some(PixelRect { x: 0, y: 0, width: 50, height: 51 })
        );
        // half rounds away from zero
        let r = Rect::new(0.5, 1.5, 2.5, 3.5).unwrap();
        assert_eq!(
            r.rasterize(10, 10),
            Some(PixelRect { x: 1, y: 2, width: 2, height: 2 })
        );
        // collapses after clamping
        let r = Rect::new(100.2, 0.0, 130.0, 10.0).unwrap();
        assert_eq!(r.rasterize(100, 100), None);
    }

    #[test]
    fn rect_deserialize_validates() {
        let ok: Rect = serde_json::from_str(r#"{"x0":0,"y0":0,"x1":1,"y1":2}"#).unwrap();
        assert_eq!(ok.height(), 2.0);
        assert!(serde_json::from_str::<Rect>(r#"{"x0":1,"y0":0,"x1":1,"y1":2}"#).is_err());
    }
}
