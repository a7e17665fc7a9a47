//! Fixture builders shared by the integration tests.
//!
//! The "poster" scenario: six 640x360 frames at 1 fps. Frames 1-3 carry
//! text; on frame 2 the top-left window scores 0.9 and every other window
//! scores at most 0.6, so with tau = 0.7 exactly one key region (frame 2,
//! TL) reaches the answerer, which replies "half price" when it receives a
//! single frame.

#![allow(dead_code)]

use std::path::{Path, PathBuf};

use sfa::backends::{Backends, MockFixtures};
use sfa::media::{FrameImage, FrameSource, Rect};

pub const W: u32 = 640;
pub const H: u32 = 360;
pub const QUESTION: &str = "What discount does the poster advertise?";

/// Text boxes per frame, as `[x0, y0, x1, y1]`.
pub const POSTER_LINES: [(usize, [f64; 4]); 4] = [
    (1, [40.0, 30.0, 200.0, 60.0]),
    (2, [50.0, 40.0, 300.0, 80.0]),
    (2, [400.0, 250.0, 600.0, 300.0]),
    (3, [350.0, 200.0, 500.0, 230.0]),
];

pub fn poster_frames() -> Vec<FrameImage> {
    (0..6)
        .map(|i| {
            let shade = 30 + 35 * i as u8;
            let mut f = FrameImage::filled(W, H, [shade, 255 - shade, 90]).unwrap().with_position(i, i as f64);
            // a gradient stripe so that crops are not flat
            for x in 0..W {
                let v = (x * 255 / W) as u8;
                for y in 150..170 {
                    f.put_pixel(x, y, [v, v / 2, 255 - v]);
                }
            }
            for (frame, b) in POSTER_LINES {
                if frame == i {
                    f.fill_rect(&Rect::new(b[0], b[1], b[2], b[3]).unwrap(), [250, 250, 250]);
                }
            }
            f
        })
        .collect()
}

fn detections_json(lines: &[(usize, [f64; 4])]) -> String {
    let mut by_frame: std::collections::BTreeMap<usize, Vec<String>> = Default::default();
    for (i, (frame, b)) in lines.iter().enumerate() {
        by_frame.entry(*frame).or_default().push(format!(
            r#"{{"bbox": [{}, {}, {}, {}], "confidence": 0.95, "text": "line{i}"}}"#,
            b[0], b[1], b[2], b[3]
        ));
    }
    let parts: Vec<String> = by_frame
        .iter()
        .map(|(f, v)| format!(r#""{f}": [{}]"#, v.join(", ")))
        .collect();
    format!("{{{}}}", parts.join(", "))
}

pub fn poster_fixture_json() -> String {
    format!(
        r#"{{
  "detections": {},
  "scores": {{
    "1": {{"TL": "0.5"}},
    "2": {{"TL": "Relevance: 0.9", "TR": 0.2, "BL": 0.1, "BR": "0.6"}},
    "3": {{"TL": 0.3, "TR": 0.3, "BL": 0.3, "BR": 0.3}}
  }},
  "default_score": "0",
  "answer": {{"default": "no idea", "by_image_count": {{"1": "half price", "3": "sale"}}}}
}}"#,
        detections_json(&POSTER_LINES)
    )
}

/// Same detections, every score below tau: fallback level 1 (frames 1-3).
pub fn below_tau_fixture_json() -> String {
    format!(
        r#"{{
  "detections": {},
  "default_score": "0.5",
  "answer": {{"default": "no idea", "by_image_count": {{"3": "sale"}}}}
}}"#,
        detections_json(&POSTER_LINES)
    )
}

/// No text anywhere: fallback level 2 (all six frames).
pub fn no_text_fixture_json() -> String {
    r#"{"answer": {"default": "no idea", "by_image_count": {"6": "nothing legible"}}}"#.to_string()
}

/// Every frame has one line and every window scores 0.9; with alpha = 1
/// each frame's only window is the full frame.
pub fn full_frame_fixture_json() -> String {
    let lines: Vec<(usize, [f64; 4])> = (0..6).map(|i| (i, [100.0, 100.0, 200.0, 140.0])).collect();
    format!(
        r#"{{"detections": {}, "default_score": "0.9", "answer": "half price"}}"#,
        detections_json(&lines)
    )
}

pub fn fixtures(json: &str) -> MockFixtures {
    MockFixtures::from_json_str(json).unwrap()
}

pub fn backends(json: &str) -> Backends {
    Backends::from_fixtures(fixtures(json))
}

/// Writes the poster frames (with a `frames.meta` sidecar) under `dir`.
pub fn write_poster_frames(dir: &Path) -> FrameSource {
    FrameSource::write_directory(dir, &poster_frames(), 1.0).unwrap()
}

pub fn write_file(path: &Path, text: &str) -> PathBuf {
    if let Some(p) = path.parent() {
        std::fs::create_dir_all(p).unwrap();
    }
    std::fs::write(path, text).unwrap();
    path.to_path_buf()
}

/// Four samples over the poster frames. The pipeline answers "half price"
/// for each; golds are chosen so three of four match exactly.
pub const EVAL_GOLDS: [&str; 4] = ["half price", "HALF PRICE", "Half Price.", "half prize"];

pub fn write_eval_manifest(dir: &Path) -> PathBuf {
    write_poster_frames(&dir.join("frames/poster"));
    let lines: Vec<String> = EVAL_GOLDS
        .iter()
        .enumerate()
        .map(|(i, g)| {
            format!(
                r#"{{"sample_id": "s{i}", "frames_path": "frames/poster", "fps": 1, "question": "{QUESTION}", "answers": ["{g}"]}}"#
            )
        })
        .collect();
    write_file(&dir.join("manifest.jsonl"), &(lines.join("\n") + "\n"))
}

/// Adds a fifth sample whose only frame is not a decodable image.
pub fn add_broken_sample(dir: &Path, manifest: &Path) {
    write_file(&dir.join("frames/broken/000000.png"), "not a png");
    let mut text = std::fs::read_to_string(manifest).unwrap();
    text.push_str(&format!(
        r#"{{"sample_id": "broken", "frames_path": "frames/broken", "fps": 1, "question": "{QUESTION}", "answers": ["half price"]}}"#
    ));
    text.push('\n');
    std::fs::write(manifest, text).unwrap();
}

/// Mock backends with handles kept for call counting.
pub struct Instrumented {
    pub detector: std::sync::Arc<sfa::backends::MockDetector>,
    pub scorer: std::sync::Arc<sfa::backends::MockScorer>,
    pub answerer: std::sync::Arc<sfa::backends::MockAnswerer>,
}

impl Instrumented {
    pub fn new(json: &str) -> Self {
        let f = std::sync::Arc::new(fixtures(json));
        Self {
            detector: std::sync::Arc::new(sfa::backends::MockDetector::new(f.clone())),
            scorer: std::sync::Arc::new(sfa::backends::MockScorer::new(f.clone())),
            answerer: std::sync::Arc::new(sfa::backends::MockAnswerer::new(f)),
        }
    }

    pub fn backends(&self) -> Backends {
        Backends::new(self.detector.clone(), self.scorer.clone(), self.answerer.clone())
    }

    pub fn total_calls(&self) -> usize {
        self.detector.calls() + self.scorer.calls() + self.answerer.calls()
    }
}
