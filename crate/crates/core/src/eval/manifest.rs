//! Line-delimited JSON dataset manifests.
//!
//! One record per line:
//!
//! ```json
//! {"sample_id": "v12_q3", "frames_path": "frames/v12", "fps": 30, "question": "...", "answers": ["..."]}
//! ```
//!
//! `frames_path` is resolved against the manifest's directory when relative.
//! `fps` is the native frame rate of that directory (a number or a
//! `num/den` string). Blank lines and lines starting with `#` are skipped.

use std::collections::HashSet;
use std::path::Path;

use serde::Deserialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::media::FrameSource;

#[derive(Debug, Clone, PartialEq)]
pub struct QaSample {
    pub sample_id: String,
    pub frames: FrameSource,
    pub question: String,
    pub gold_answers: Vec<String>,
}

impl QaSample {
    pub fn new(
        sample_id: impl Into<String>,
        frames: FrameSource,
        question: impl Into<String>,
        gold_answers: Vec<String>,
    ) -> Result<Self> {
        let sample = Self {
            sample_id: sample_id.into(),
            frames,
            question: question.into(),
            gold_answers,
        };
        if sample.question.trim().is_empty() {
            return Err(Error::Argument(format!("sample {}: empty question", sample.sample_id)));
        }
        if sample.gold_answers.is_empty() {
            return Err(Error::Argument(format!("sample {}: no gold answers", sample.sample_id)));
        }
        Ok(sample)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    sample_id: String,
    frames_path: String,
    fps: Value,
    question: String,
    answers: Vec<String>,
}

pub fn load_manifest(path: &Path) -> Result<Vec<QaSample>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Manifest {
        line: 0,
        reason: format!("cannot read {}: {e}", path.display()),
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_manifest(&text, base)
}

pub fn parse_manifest(text: &str, base_dir: &Path) -> Result<Vec<QaSample>> {
    let mut samples = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |reason: String| Error::Manifest {
            line: line_no,
            reason,
        };
        let rec: Record = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
        if rec.sample_id.trim().is_empty() {
            return Err(bad("empty sample_id".into()));
        }
        if !seen.insert(rec.sample_id.clone()) {
            return Err(bad(format!("duplicate sample_id `{}`", rec.sample_id)));
        }
        if rec.question.trim().is_empty() {
            return Err(bad(format!("sample `{}` has an empty question", rec.sample_id)));
        }
        if rec.answers.is_empty() {
            return Err(bad(format!("sample `{}` has no answers", rec.sample_id)));
        }
        let fps = match &rec.fps {
            Value::Number(n) => n.as_f64(),
            Value::String(s) => crate::media::parse_rational(s).ok(),
            _ => None,
        }
        .filter(|f| f.is_finite() && *f > 0.0)
        .ok_or_else(|| bad(format!("sample `{}`: fps must be a positive number", rec.sample_id)))?;

        let frames_path = base_dir.join(&rec.frames_path);
        if !frames_path.is_dir() {
            return Err(Error::source_error(
                &frames_path,
                format!("frames for sample `{}` not found (line {line_no})", rec.sample_id),
            ));
        }
        let frames = FrameSource::manifest_listed(frames_path, fps)?;
        samples.push(QaSample::new(rec.sample_id, frames, rec.question, rec.answers)?);
    }
    if samples.is_empty() {
        return Err(Error::Manifest {
            line: 0,
            reason: "manifest contains no samples".into(),
        });
    }
    Ok(samples)
}
