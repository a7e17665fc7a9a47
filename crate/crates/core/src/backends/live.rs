//! Backends that talk to a chat endpoint.

use std::sync::Arc;

use serde_json::Value;

use crate::error::{Error, Result};
use crate::media::{encode_image, FrameImage, ImageFormat, Rect};
use crate::prompt::PromptTemplate;
use crate::scan::TextLineDetection;

use super::chat::{ChatClient, EncodedImage};
use super::{
    finalize_detections, AnswerRequest, AnswererBackend, DetectorBackend, RawDetection,
    ScoreRequest, ScorerBackend,
};

fn encode_png(frame: &FrameImage) -> Result<EncodedImage> {
    encode_image(frame, ImageFormat::Png).map(EncodedImage::png)
}

/// Detector driven by a vision chat model that replies with one JSON object
/// per text line (see [`parse_detection_reply`]).
#[derive(Debug)]
pub struct ChatDetector {
    client: Arc<ChatClient>,
    prompt: PromptTemplate,
}

impl ChatDetector {
    pub fn new(client: Arc<ChatClient>, prompt: PromptTemplate) -> Self {
        Self { client, prompt }
    }
}

impl DetectorBackend for ChatDetector {
    fn model_name(&self) -> &str {
        &self.client.config().model_name
    }

    fn detect(&self, frame: &FrameImage) -> Result<Vec<TextLineDetection>> {
        let reply = self
            .client
            .chat_vision(&[encode_png(frame)?], self.prompt.text())?;
        let raw = parse_detection_reply(&reply)?;
        finalize_detections(raw, frame.width(), frame.height())
    }
}

#[derive(Debug)]
pub struct ChatScorer {
    client: Arc<ChatClient>,
}

impl ChatScorer {
    pub fn new(client: Arc<ChatClient>) -> Self {
        Self { client }
    }
}

impl ScorerBackend for ChatScorer {
    fn model_name(&self) -> &str {
        &self.client.config().model_name
    }

    fn score(&self, request: &ScoreRequest<'_>) -> Result<String> {
        self.client
            .chat_vision(&[encode_png(request.image)?], request.prompt)
    }
}

#[derive(Debug)]
pub struct ChatAnswerer {
    client: Arc<ChatClient>,
}

impl ChatAnswerer {
    pub fn new(client: Arc<ChatClient>) -> Self {
        Self { client }
    }
}

impl AnswererBackend for ChatAnswerer {
    fn model_name(&self) -> &str {
        &self.client.config().model_name
    }

    fn answer(&self, request: &AnswerRequest<'_>) -> Result<String> {
        let images = request
            .frames
            .iter()
            .map(encode_png)
            .collect::<Result<Vec<_>>>()?;
        self.client.chat_vision(&images, request.prompt)
    }
}

/// Parses a detector reply.
///
/// Accepted forms: one JSON object per line, or a single JSON array of
/// objects, optionally inside a Markdown code fence. Each object carries
/// either `"bbox": [x0, y0, x1, y1]` or `"polygon": [[x, y], ...]` (reduced
/// to its bounding box), plus optional `"confidence"` (default 1) and
/// `"text"`. An empty reply means no text.
pub fn parse_detection_reply(reply: &str) -> Result<Vec<RawDetection>> {
    let body: String = reply
        .lines()
        .filter(|l| !l.trim_start().starts_with("```"))
        .collect::<Vec<_>>()
        .join("\n");
    let body = body.trim();
    if body.is_empty() {
        return Ok(Vec::new());
    }
    let objects: Vec<Value> = if body.starts_with('[') {
        serde_json::from_str(body)
            .map_err(|e| Error::Protocol(format!("detection array does not parse: {e}")))?
    } else {
        body.lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(|l| {
                serde_json::from_str(l.trim_end_matches(','))
                    .map_err(|e| Error::Protocol(format!("detection line `{l}`: {e}")))
            })
            .collect::<Result<_>>()?
    };
    objects
        .iter()
        .enumerate()
        .map(|(i, obj)| detection_from_json(obj).map_err(|e| Error::Protocol(format!("detection {i}: {e}"))))
        .collect()
}

fn detection_from_json(obj: &Value) -> std::result::Result<RawDetection, String> {
    let numbers = |v: &Value| -> Option<Vec<f64>> { v.as_array()?.iter().map(Value::as_f64).collect() };
    let bbox = if let Some(b) = obj.get("bbox") {
        let c = numbers(b).filter(|c| c.len() == 4).ok_or("bbox must be four numbers")?;
        Rect::new(c[0], c[1], c[2], c[3]).map_err(|e| e.to_string())?
    } else if let Some(p) = obj.get("polygon") {
        let points = p
            .as_array()
            .ok_or("polygon must be an array of points")?
            .iter()
            .map(|pt| numbers(pt).filter(|c| c.len() == 2))
            .collect::<Option<Vec<_>>>()
            .ok_or("polygon points must be [x, y] pairs")?;
        if points.len() < 3 {
            return Err("polygon needs at least three points".into());
        }
        let xs = points.iter().map(|p| p[0]);
        let ys = points.iter().map(|p| p[1]);
        Rect::new(
            xs.clone().fold(f64::INFINITY, f64::min),
            ys.clone().fold(f64::INFINITY, f64::min),
            xs.fold(f64::NEG_INFINITY, f64::max),
            ys.fold(f64::NEG_INFINITY, f64::max),
        )
        .map_err(|e| e.to_string())?
    } else {
        return Err("missing `bbox` or `polygon`".into());
    };
    let confidence = match obj.get("confidence") {
        None | Some(Value::Null) => 1.0,
        Some(v) => v.as_f64().ok_or("confidence must be a number")?.clamp(0.0, 1.0),
    };
    let transcription = obj.get("text").and_then(Value::as_str).map(String::from);
    Ok(RawDetection {
        bbox,
        confidence,
        transcription,
    })
}
