use crate::error::{Error, Result};

use super::{FrameImage, PixelRect, Rect};

/// Cuts `rect` out of `frame`. The rect is rasterized (round half away from
/// zero, then clamp) before cropping; the result keeps the frame's index and
/// timestamp.
pub fn crop(frame: &FrameImage, rect: &Rect) -> Result<FrameImage> {
    let px = rect.rasterize(frame.width, frame.height).ok_or_else(|| {
        Error::DegenerateRegion(format!(
            "rect {:?} is empty on a {}x{} frame",
            rect.as_array(),
            frame.width,
            frame.height
        ))
    })?;
    crop_pixels(frame, px)
}

/// Crops an already rasterized region.
pub fn crop_pixels(frame: &FrameImage, px: PixelRect) -> Result<FrameImage> {
    if px.width == 0
        || px.height == 0
        || px.x + px.width > frame.width
        || px.y + px.height > frame.height
    {
        return Err(Error::DegenerateRegion(format!(
            "pixel rect {px:?} outside {}x{} frame",
            frame.width, frame.height
        )));
    }
    let src_stride = frame.width as usize * 3;
    let row_len = px.width as usize * 3;
    let mut pixels = Vec::with_capacity(row_len * px.height as usize);
    for y in px.y..px.y + px.height {
        let start = y as usize * src_stride + px.x as usize * 3;
        pixels.extend_from_slice(&frame.pixels[start..start + row_len]);
    }
    FrameImage::new(px.width, px.height, pixels, frame.frame_index, frame.timestamp)
}

/// Source taps for one output coordinate: two neighbouring indices and the
/// weight of the second one.
#[derive(Clone, Copy)]
struct Tap {
    lo: usize,
    hi: usize,
    frac: f64,
}

// Pixel centres are aligned (half-pixel convention); samples outside the
// source are clamped to the edge.
fn taps(src_len: u32, dst_len: u32) -> Vec<Tap> {
    let scale = src_len as f64 / dst_len as f64;
    let max = (src_len - 1) as f64;
    (0..dst_len)
        .map(|d| {
            let s = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, max);
            let lo = s.floor();
            Tap {
                lo: lo as usize,
                hi: (lo as usize + 1).min(src_len as usize - 1),
                frac: s - lo,
            }
        })
        .collect()
}

/// Bilinear resample to exactly `target_w x target_h`.
pub fn resize(image: &FrameImage, target_w: u32, target_h: u32) -> Result<FrameImage> {
    if target_w == 0 || target_h == 0 {
        return Err(Error::Argument(format!(
            "resize target must be positive, got {target_w}x{target_h}"
        )));
    }
    let xs = taps(image.width, target_w);
    let ys = taps(image.height, target_h);
    let stride = image.width as usize * 3;
    let src = &image.pixels;
    let mut out = Vec::with_capacity(target_w as usize * target_h as usize * 3);

    for ty in &ys {
        let row_a = ty.lo * stride;
        let row_b = ty.hi * stride;
        for tx in &xs {
            for c in 0..3 {
                let p = |row: usize, col: usize| src[row + col * 3 + c] as f64;
                let top = p(row_a, tx.lo) * (1.0 - tx.frac) + p(row_a, tx.hi) * tx.frac;
                let bottom = p(row_b, tx.lo) * (1.0 - tx.frac) + p(row_b, tx.hi) * tx.frac;
                let v = top * (1.0 - ty.frac) + bottom * ty.frac;
                // values are nonnegative, so this is round-half-away-from-zero
                out.push((v + 0.5).floor().clamp(0.0, 255.0) as u8);
            }
        }
    }
    FrameImage::new(target_w, target_h, out, image.frame_index, image.timestamp)
}
