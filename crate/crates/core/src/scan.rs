//! Text-aware windowing of a single frame.
//!
//! Each text-bearing frame gets up to four windows pinned to its corners,
//! initially `alpha` times the frame size. A window that cuts through a text
//! line is grown uniformly (aspect ratio and anchor corner fixed) until every
//! line it touches is fully inside. Windows holding no complete line are
//! dropped; the rest are cropped and resampled to a common size for scoring.
//!
//! Geometry is evaluated in scale space: for a given anchor, a line starts
//! to overlap the window once the scale exceeds its *touch* scale and is
//! fully inside once the scale reaches its *need* scale. Both are closed
//! form, so the growth fixpoint is exact.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::media::{crop, resize, FrameImage, Rect};

pub const MIN_ALPHA: f64 = 0.5;
pub const MAX_ALPHA: f64 = 1.0;

pub fn validate_alpha(alpha: f64) -> Result<()> {
    if (MIN_ALPHA..=MAX_ALPHA).contains(&alpha) {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "alpha must lie in [{MIN_ALPHA}, {MAX_ALPHA}], got {alpha}"
        )))
    }
}

/// Frame corner a window is pinned to. Declaration order is the tie-break
/// order used throughout (TL, TR, BL, BR).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Anchor {
    #[serde(rename = "TL", alias = "top_left")]
    TopLeft,
    #[serde(rename = "TR", alias = "top_right")]
    TopRight,
    #[serde(rename = "BL", alias = "bottom_left")]
    BottomLeft,
    #[serde(rename = "BR", alias = "bottom_right")]
    BottomRight,
}

impl Anchor {
    pub const ALL: [Anchor; 4] = [
        Anchor::TopLeft,
        Anchor::TopRight,
        Anchor::BottomLeft,
        Anchor::BottomRight,
    ];

    pub fn short_name(self) -> &'static str {
        match self {
            Anchor::TopLeft => "TL",
            Anchor::TopRight => "TR",
            Anchor::BottomLeft => "BL",
            Anchor::BottomRight => "BR",
        }
    }

    fn is_right(self) -> bool {
        matches!(self, Anchor::TopRight | Anchor::BottomRight)
    }

    fn is_bottom(self) -> bool {
        matches!(self, Anchor::BottomLeft | Anchor::BottomRight)
    }

    /// The frame corner this anchor pins, in pixel coordinates.
    pub fn corner(self, frame_w: f64, frame_h: f64) -> (f64, f64) {
        (
            if self.is_right() { frame_w } else { 0.0 },
            if self.is_bottom() { frame_h } else { 0.0 },
        )
    }
}

impl std::fmt::Display for Anchor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.short_name())
    }
}

impl std::str::FromStr for Anchor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "TL" | "TOP_LEFT" => Ok(Anchor::TopLeft),
            "TR" | "TOP_RIGHT" => Ok(Anchor::TopRight),
            "BL" | "BOTTOM_LEFT" => Ok(Anchor::BottomLeft),
            "BR" | "BOTTOM_RIGHT" => Ok(Anchor::BottomRight),
            _ => Err(Error::Argument(format!("unknown anchor `{s}`"))),
        }
    }
}

/// One detected text line, reduced to an axis-aligned box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextLineDetection {
    pub bbox: Rect,
    pub confidence: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transcription: Option<String>,
}

impl TextLineDetection {
    /// Clips `bbox` to the frame. Returns `None` if nothing of the box is
    /// left inside the frame.
    pub fn clipped(
        bbox: Rect,
        confidence: f64,
        transcription: Option<String>,
        frame_w: u32,
        frame_h: u32,
    ) -> Result<Option<Self>> {
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::Argument(format!(
                "detection confidence {confidence} outside [0, 1]"
            )));
        }
        Ok(bbox
            .clip(frame_w as f64, frame_h as f64)
            .map(|bbox| Self {
                bbox,
                confidence,
                transcription,
            }))
    }
}

/// Sorts detections by `(y0, x0)`.
pub fn sort_detections(lines: &mut [TextLineDetection]) {
    lines.sort_by(|a, b| {
        a.bbox
            .y0()
            .total_cmp(&b.bbox.y0())
            .then(a.bbox.x0().total_cmp(&b.bbox.x0()))
    });
}

/// A corner-anchored window whose size is `scale` times the frame size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub anchor: Anchor,
    pub rect: Rect,
    pub scale: f64,
    pub frame_index: usize,
}

impl Window {
    pub fn at_scale(anchor: Anchor, scale: f64, frame_w: u32, frame_h: u32) -> Self {
        let (w, h) = (frame_w as f64, frame_h as f64);
        let (ww, wh) = (w * scale, h * scale);
        let x0 = if anchor.is_right() { w - ww } else { 0.0 };
        let y0 = if anchor.is_bottom() { h - wh } else { 0.0 };
        let x1 = if anchor.is_right() { w } else { ww };
        let y1 = if anchor.is_bottom() { h } else { wh };
        Self {
            anchor,
            rect: Rect::new(x0, y0, x1, y1).expect("positive scale gives a positive-area window"),
            scale,
            frame_index: 0,
        }
    }

    pub fn with_frame_index(mut self, frame_index: usize) -> Self {
        self.frame_index = frame_index;
        self
    }

    /// Whether `line` shares positive area with this window.
    pub fn intersects(&self, line: &Rect, frame_w: u32, frame_h: u32) -> bool {
        self.scale > touch_scale(self.anchor, line, frame_w, frame_h)
    }

    /// Whether `line` lies entirely inside this window.
    pub fn contains(&self, line: &Rect, frame_w: u32, frame_h: u32) -> bool {
        self.scale >= need_scale(self.anchor, line, frame_w, frame_h)
    }
}

/// Scale above which a window at `anchor` overlaps `line` with positive area.
pub fn touch_scale(anchor: Anchor, line: &Rect, frame_w: u32, frame_h: u32) -> f64 {
    let (w, h) = (frame_w as f64, frame_h as f64);
    let sx = if anchor.is_right() { (w - line.x1()) / w } else { line.x0() / w };
    let sy = if anchor.is_bottom() { (h - line.y1()) / h } else { line.y0() / h };
    sx.max(sy)
}

/// Smallest scale at which a window at `anchor` fully contains `line`.
pub fn need_scale(anchor: Anchor, line: &Rect, frame_w: u32, frame_h: u32) -> f64 {
    let (w, h) = (frame_w as f64, frame_h as f64);
    let sx = if anchor.is_right() { (w - line.x0()) / w } else { line.x1() / w };
    let sy = if anchor.is_bottom() { (h - line.y0()) / h } else { line.y1() / h };
    sx.max(sy)
}

/// The starting windows for a frame: one per corner at scale `alpha`, with
/// coincident windows (alpha = 1) collapsed onto the first in anchor order.
pub fn initial_windows(frame_w: u32, frame_h: u32, alpha: f64) -> Result<Vec<Window>> {
    validate_alpha(alpha)?;
    if frame_w == 0 || frame_h == 0 {
        return Err(Error::Argument(format!(
            "frame dimensions must be positive, got {frame_w}x{frame_h}"
        )));
    }
    let mut out: Vec<Window> = Vec::with_capacity(4);
    for anchor in Anchor::ALL {
        let win = Window::at_scale(anchor, alpha, frame_w, frame_h);
        if !out.iter().any(|w| w.rect == win.rect) {
            out.push(win);
        }
    }
    Ok(out)
}

/// Grows `window` to the smallest scale at which no line is cut by its edge.
///
/// Each round raises the scale to contain every line currently overlapping
/// the window; growing may pull in new lines, so this repeats until stable.
/// The scale never decreases and is capped by 1 (the full frame).
pub fn adapt_window(
    window: Window,
    lines: &[TextLineDetection],
    frame_w: u32,
    frame_h: u32,
) -> Window {
    let mut scale = window.scale;
    loop {
        let required = lines
            .iter()
            .filter(|l| scale > touch_scale(window.anchor, &l.bbox, frame_w, frame_h))
            .map(|l| need_scale(window.anchor, &l.bbox, frame_w, frame_h))
            .fold(scale, f64::max)
            .min(1.0);
        if required <= scale {
            break;
        }
        scale = required;
    }
    if scale == window.scale {
        return window;
    }
    Window::at_scale(window.anchor, scale, frame_w, frame_h).with_frame_index(window.frame_index)
}

/// A retained window together with its normalized raster.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateRegion {
    pub window: Window,
    /// The adapted crop resampled to `(round(w * alpha), round(h * alpha))`.
    pub normalized_image: FrameImage,
    /// Indices (into the frame's detection list) of lines fully inside.
    pub contained_line_ids: Vec<usize>,
    pub contained_lines: Vec<TextLineDetection>,
}

impl CandidateRegion {
    pub fn anchor(&self) -> Anchor {
        self.window.anchor
    }

    pub fn frame_index(&self) -> usize {
        self.window.frame_index
    }
}

/// Size every candidate is resampled to before scoring.
pub fn normalized_size(frame_w: u32, frame_h: u32, alpha: f64) -> (u32, u32) {
    let w = ((frame_w as f64 * alpha).round() as u32).max(1);
    let h = ((frame_h as f64 * alpha).round() as u32).max(1);
    (w, h)
}

/// Keeps windows that fully contain at least one line and builds their
/// normalized rasters. Anchor order is preserved.
pub fn filter_and_build(
    frame: &FrameImage,
    windows: &[Window],
    lines: &[TextLineDetection],
    alpha: f64,
) -> Result<Vec<CandidateRegion>> {
    let (w, h) = frame.dimensions();
    let (nw, nh) = normalized_size(w, h, alpha);
    let mut out = Vec::new();
    for window in windows {
        let ids: Vec<usize> = lines
            .iter()
            .enumerate()
            .filter(|(_, l)| window.contains(&l.bbox, w, h))
            .map(|(i, _)| i)
            .collect();
        if ids.is_empty() {
            continue;
        }
        let normalized_image = resize(&crop(frame, &window.rect)?, nw, nh)?;
        out.push(CandidateRegion {
            window: *window,
            normalized_image,
            contained_lines: ids.iter().map(|&i| lines[i].clone()).collect(),
            contained_line_ids: ids,
        });
    }
    Ok(out)
}

/// Per-window entry of a [`FrameScanRecord`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowRecord {
    pub anchor: Anchor,
    pub rect: Rect,
    pub scale: f64,
    pub contained_line_ids: Vec<usize>,
    pub retained: bool,
}

/// What the Scan stage did with one frame; used by traces and debug dumps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameScanRecord {
    pub frame_index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discarded: Option<String>,
    pub windows: Vec<WindowRecord>,
}

/// Full Scan stage for one frame: initial windows, adaptation, filtering.
/// Frames without detections produce no candidates.
pub fn scan_frame(
    frame: &FrameImage,
    lines: &[TextLineDetection],
    alpha: f64,
) -> Result<Vec<CandidateRegion>> {
    scan_frame_with_record(frame, lines, alpha).map(|(regions, _)| regions)
}

pub fn scan_frame_with_record(
    frame: &FrameImage,
    lines: &[TextLineDetection],
    alpha: f64,
) -> Result<(Vec<CandidateRegion>, FrameScanRecord)> {
    validate_alpha(alpha)?;
    let frame_index = frame.frame_index();
    if lines.is_empty() {
        return Ok((
            Vec::new(),
            FrameScanRecord {
                frame_index,
                discarded: Some("no text".into()),
                windows: Vec::new(),
            },
        ));
    }
    let (w, h) = frame.dimensions();
    let adapted: Vec<Window> = initial_windows(w, h, alpha)?
        .into_iter()
        .map(|win| adapt_window(win.with_frame_index(frame_index), lines, w, h))
        .collect();
    let regions = filter_and_build(frame, &adapted, lines, alpha)?;
    let windows = adapted
        .iter()
        .map(|win| {
            let ids: Vec<usize> = lines
                .iter()
                .enumerate()
                .filter(|(_, l)| win.contains(&l.bbox, w, h))
                .map(|(i, _)| i)
                .collect();
            WindowRecord {
                anchor: win.anchor,
                rect: win.rect,
                scale: win.scale,
                retained: !ids.is_empty(),
                contained_line_ids: ids,
            }
        })
        .collect();
    Ok((
        regions,
        FrameScanRecord {
            frame_index,
            discarded: None,
            windows,
        },
    ))
}
