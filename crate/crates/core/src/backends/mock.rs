//! Fixture-driven mock backends.
//!
//! A fixture file is JSON with these sections:
//!
//! ```json
//! {
//!   "detections": {
//!     "0": [{"bbox": [100, 200, 400, 240], "confidence": 0.98, "text": "MANCHESTER"}]
//!   },
//!   "scores": {
//!     "3": {"TL": 0.9, "BR": "Score: 0.4"}
//!   },
//!   "default_score": "0",
//!   "answer": "buy one get one"
//! }
//! ```
//!
//! * `detections` maps a sampled frame index to its text lines. Frames
//!   without an entry have no text.
//! * `scores` maps a frame index and anchor (`TL`, `TR`, `BL`, `BR`) to the
//!   scorer's raw reply. Numbers are rendered as their shortest decimal form.
//!   Windows without an entry get `default_score` (default `"0"`).
//! * `answer` is either a string, or `{"default": "...", "by_image_count":
//!   {"3": "..."}}` to vary the reply with the number of frames received.
//! * `models` optionally names the three mock models (these names feed the
//!   cache keys).
//!
//! Every mock is a pure function of fixture and request, and counts its
//! calls so tests can assert on backend traffic.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::media::{FrameImage, Rect};
use crate::scan::{Anchor, TextLineDetection};

use super::{
    finalize_detections, AnswerRequest, AnswererBackend, DetectorBackend, RawDetection,
    ScoreRequest, ScorerBackend,
};

#[derive(Debug, Clone, PartialEq)]
pub struct MockFixtures {
    pub detections: BTreeMap<usize, Vec<RawDetection>>,
    pub scores: BTreeMap<(usize, Anchor), String>,
    pub default_score: String,
    pub answer: MockAnswer,
    pub models: MockModels,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MockAnswer {
    pub default: String,
    pub by_image_count: BTreeMap<usize, String>,
}

impl MockAnswer {
    pub fn for_image_count(&self, count: usize) -> &str {
        self.by_image_count.get(&count).unwrap_or(&self.default)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MockModels {
    pub detector: String,
    pub scorer: String,
    pub answerer: String,
}

impl Default for MockModels {
    fn default() -> Self {
        Self {
            detector: "mock-detector".into(),
            scorer: "mock-scorer".into(),
            answerer: "mock-answerer".into(),
        }
    }
}

impl MockFixtures {
    /// Fixtures with no text anywhere and a fixed answer.
    pub fn with_answer(answer: impl Into<String>) -> Self {
        Self {
            detections: BTreeMap::new(),
            scores: BTreeMap::new(),
            default_score: "0".into(),
            answer: MockAnswer {
                default: answer.into(),
                by_image_count: BTreeMap::new(),
            },
            models: MockModels::default(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::fixture(path.display().to_string(), format!("cannot read: {e}"))
        })?;
        Self::from_json_str(&text)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let root: Value =
            serde_json::from_str(text).map_err(|e| Error::fixture("<root>", e))?;
        let root = root
            .as_object()
            .ok_or_else(|| Error::fixture("<root>", "expected an object"))?;
        for key in root.keys() {
            if !matches!(
                key.as_str(),
                "detections" | "scores" | "default_score" | "answer" | "models"
            ) {
                return Err(Error::fixture(key, "unknown section"));
            }
        }

        let mut fixtures = Self::with_answer("");
        fixtures.answer = parse_answer(
            root.get("answer")
                .ok_or_else(|| Error::fixture("answer", "missing required section"))?,
        )?;
        if let Some(v) = root.get("detections") {
            fixtures.detections = parse_detections(v)?;
        }
        if let Some(v) = root.get("scores") {
            fixtures.scores = parse_scores(v)?;
        }
        if let Some(v) = root.get("default_score") {
            fixtures.default_score = raw_reply(v).ok_or_else(|| {
                Error::fixture("default_score", "expected a number or string")
            })?;
        }
        if let Some(v) = root.get("models") {
            fixtures.models = parse_models(v)?;
        }
        Ok(fixtures)
    }

    pub fn raw_score(&self, frame_index: usize, anchor: Anchor) -> &str {
        self.scores
            .get(&(frame_index, anchor))
            .unwrap_or(&self.default_score)
    }
}

fn object<'a>(v: &'a Value, field: &str) -> Result<&'a Map<String, Value>> {
    v.as_object()
        .ok_or_else(|| Error::fixture(field, "expected an object"))
}

fn frame_key(key: &str, field: &str) -> Result<usize> {
    key.parse()
        .map_err(|_| Error::fixture(format!("{field}.{key}"), "key is not a frame index"))
}

fn raw_reply(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn parse_detections(v: &Value) -> Result<BTreeMap<usize, Vec<RawDetection>>> {
    let mut out = BTreeMap::new();
    for (key, lines) in object(v, "detections")? {
        let frame = frame_key(key, "detections")?;
        let field = format!("detections.{key}");
        let lines = lines
            .as_array()
            .ok_or_else(|| Error::fixture(&field, "expected an array"))?;
        let parsed = lines
            .iter()
            .enumerate()
            .map(|(i, line)| parse_detection(line, &format!("{field}[{i}]")))
            .collect::<Result<Vec<_>>>()?;
        out.insert(frame, parsed);
    }
    Ok(out)
}

fn parse_detection(v: &Value, field: &str) -> Result<RawDetection> {
    let obj = object(v, field)?;
    let bbox = obj
        .get("bbox")
        .and_then(Value::as_array)
        .and_then(|a| a.iter().map(Value::as_f64).collect::<Option<Vec<f64>>>())
        .filter(|c| c.len() == 4)
        .ok_or_else(|| Error::fixture(format!("{field}.bbox"), "expected four numbers"))?;
    let bbox = Rect::new(bbox[0], bbox[1], bbox[2], bbox[3])
        .map_err(|e| Error::fixture(format!("{field}.bbox"), e))?;
    let confidence = match obj.get("confidence") {
        None => 1.0,
        Some(c) => c
            .as_f64()
            .filter(|c| (0.0..=1.0).contains(c))
            .ok_or_else(|| Error::fixture(format!("{field}.confidence"), "expected a number in [0, 1]"))?,
    };
    let transcription = match obj.get("text") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(_) => return Err(Error::fixture(format!("{field}.text"), "expected a string")),
    };
    Ok(RawDetection {
        bbox,
        confidence,
        transcription,
    })
}

fn parse_scores(v: &Value) -> Result<BTreeMap<(usize, Anchor), String>> {
    let mut out = BTreeMap::new();
    for (key, per_anchor) in object(v, "scores")? {
        let frame = frame_key(key, "scores")?;
        for (anchor_key, reply) in object(per_anchor, &format!("scores.{key}"))? {
            let field = format!("scores.{key}.{anchor_key}");
            let anchor: Anchor = anchor_key
                .parse()
                .map_err(|_| Error::fixture(&field, "unknown anchor (use TL, TR, BL, BR)"))?;
            let reply =
                raw_reply(reply).ok_or_else(|| Error::fixture(&field, "expected a number or string"))?;
            out.insert((frame, anchor), reply);
        }
    }
    Ok(out)
}

fn parse_answer(v: &Value) -> Result<MockAnswer> {
    match v {
        Value::String(s) => Ok(MockAnswer {
            default: s.clone(),
            by_image_count: BTreeMap::new(),
        }),
        Value::Object(obj) => {
            let default = obj
                .get("default")
                .and_then(Value::as_str)
                .ok_or_else(|| Error::fixture("answer.default", "expected a string"))?
                .to_string();
            let mut by_image_count = BTreeMap::new();
            if let Some(map) = obj.get("by_image_count") {
                for (k, a) in object(map, "answer.by_image_count")? {
                    let field = format!("answer.by_image_count.{k}");
                    let n: usize = k
                        .parse()
                        .map_err(|_| Error::fixture(&field, "key is not an image count"))?;
                    let a = a.as_str().ok_or_else(|| Error::fixture(&field, "expected a string"))?;
                    by_image_count.insert(n, a.to_string());
                }
            }
            Ok(MockAnswer {
                default,
                by_image_count,
            })
        }
        _ => Err(Error::fixture("answer", "expected a string or object")),
    }
}

fn parse_models(v: &Value) -> Result<MockModels> {
    let obj = object(v, "models")?;
    let mut models = MockModels::default();
    for (key, name) in obj {
        let field = format!("models.{key}");
        let name = name
            .as_str()
            .ok_or_else(|| Error::fixture(&field, "expected a string"))?
            .to_string();
        match key.as_str() {
            "detector" => models.detector = name,
            "scorer" => models.scorer = name,
            "answerer" => models.answerer = name,
            _ => return Err(Error::fixture(field, "unknown model role")),
        }
    }
    Ok(models)
}

/// Content digest of a frame's dimensions and pixels, hex encoded.
pub fn frame_digest(frame: &FrameImage) -> String {
    let mut h = Sha256::new();
    h.update(frame.width().to_le_bytes());
    h.update(frame.height().to_le_bytes());
    h.update(frame.pixels());
    hex::encode(h.finalize())
}

#[derive(Debug)]
pub struct MockDetector {
    fixtures: Arc<MockFixtures>,
    calls: AtomicUsize,
}

impl MockDetector {
    pub fn new(fixtures: Arc<MockFixtures>) -> Self {
        Self {
            fixtures,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl DetectorBackend for MockDetector {
    fn model_name(&self) -> &str {
        &self.fixtures.models.detector
    }

    fn detect(&self, frame: &FrameImage) -> Result<Vec<TextLineDetection>> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let raw = self
            .fixtures
            .detections
            .get(&frame.frame_index())
            .cloned()
            .unwrap_or_default();
        finalize_detections(raw, frame.width(), frame.height())
    }
}

#[derive(Debug)]
pub struct MockScorer {
    fixtures: Arc<MockFixtures>,
    calls: AtomicUsize,
}

impl MockScorer {
    pub fn new(fixtures: Arc<MockFixtures>) -> Self {
        Self {
            fixtures,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl ScorerBackend for MockScorer {
    fn model_name(&self) -> &str {
        &self.fixtures.models.scorer
    }

    fn score(&self, request: &ScoreRequest<'_>) -> Result<String> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        Ok(self
            .fixtures
            .raw_score(request.frame_index, request.anchor)
            .to_string())
    }
}

/// What a [`MockAnswerer`] received in one call.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordedAnswerRequest {
    pub frame_digests: Vec<String>,
    pub frame_sizes: Vec<(u32, u32)>,
    pub prompt: String,
}

#[derive(Debug)]
pub struct MockAnswerer {
    fixtures: Arc<MockFixtures>,
    received: Mutex<Vec<RecordedAnswerRequest>>,
}

impl MockAnswerer {
    pub fn new(fixtures: Arc<MockFixtures>) -> Self {
        Self {
            fixtures,
            received: Mutex::new(Vec::new()),
        }
    }

    pub fn calls(&self) -> usize {
        self.received.lock().expect("mock lock poisoned").len()
    }

    pub fn received(&self) -> Vec<RecordedAnswerRequest> {
        self.received.lock().expect("mock lock poisoned").clone()
    }
}

impl AnswererBackend for MockAnswerer {
    fn model_name(&self) -> &str {
        &self.fixtures.models.answerer
    }

    fn answer(&self, request: &AnswerRequest<'_>) -> Result<String> {
        self.received
            .lock()
            .expect("mock lock poisoned")
            .push(RecordedAnswerRequest {
                frame_digests: request.frames.iter().map(frame_digest).collect(),
                frame_sizes: request.frames.iter().map(FrameImage::dimensions).collect(),
                prompt: request.prompt.to_string(),
            });
        Ok(self
            .fixtures
            .answer
            .for_image_count(request.frames.len())
            .to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIXTURE: &str = r#"{
        "detections": {
            "0": [{"bbox": [100, 200, 400, 240], "confidence": 0.98, "text": "MANCHESTER"}],
            "1": [{"bbox": [600, 10, 700, 30]}],
            "2": [{"bbox": [-20, 5, 30, 15], "confidence": 0.5}]
        },
        "scores": {"3": {"TL": 0.9, "BR": 0.4, "TR": "Score: 0.85"}},
        "answer": "buy one get one"
    }"#;

    fn frame(index: usize) -> FrameImage {
        FrameImage::filled(640, 360, [0, 0, 0]).unwrap().with_position(index, 0.0)
    }

    #[test]
    fn detector_answers_listed_frames_only() {
        let fx = Arc::new(MockFixtures::from_json_str(FIXTURE).unwrap());
        let det = MockDetector::new(fx);
        let d0 = det.detect(&frame(0)).unwrap();
        assert_eq!(d0.len(), 1);
        assert_eq!(d0[0].bbox.as_array(), [100.0, 200.0, 400.0, 240.0]);
        assert_eq!(d0[0].confidence, 0.98);
        assert_eq!(d0[0].transcription.as_deref(), Some("MANCHESTER"));
        // clipped to the 640-wide frame
        assert_eq!(det.detect(&frame(1)).unwrap()[0].bbox.x1(), 640.0);
        assert_eq!(det.detect(&frame(2)).unwrap()[0].bbox.x0(), 0.0);
        assert!(det.detect(&frame(7)).unwrap().is_empty());
        assert_eq!(det.calls(), 4);
    }

    #[test]
    fn scorer_returns_raw_strings() {
        let fx = Arc::new(MockFixtures::from_json_str(FIXTURE).unwrap());
        let sc = MockScorer::new(fx);
        let img = frame(3);
        let ask = |anchor| {
            sc.score(&ScoreRequest { frame_index: 3, anchor, image: &img, prompt: "p" })
                .unwrap()
        };
        assert_eq!(ask(Anchor::TopLeft), "0.9");
        assert_eq!(ask(Anchor::BottomRight), "0.4");
        assert_eq!(ask(Anchor::TopRight), "Score: 0.85");
        assert_eq!(ask(Anchor::BottomLeft), "0");
    }

    #[test]
    fn answerer_is_verbatim_and_records() {
        let fx = Arc::new(MockFixtures::from_json_str(FIXTURE).unwrap());
        let ans = MockAnswerer::new(fx);
        let frames = vec![frame(0), frame(1)];
        let reply = ans.answer(&AnswerRequest { frames: &frames, prompt: "Q" }).unwrap();
        assert_eq!(reply, "buy one get one");
        let rec = ans.received();
        assert_eq!(rec.len(), 1);
        assert_eq!(rec[0].frame_sizes, vec![(640, 360), (640, 360)]);
        assert_eq!(rec[0].prompt, "Q");
    }

    #[test]
    fn answer_by_image_count() {
        let fx = MockFixtures::from_json_str(
            r#"{"answer": {"default": "many", "by_image_count": {"1": "one"}}}"#,
        )
        .unwrap();
        assert_eq!(fx.answer.for_image_count(1), "one");
        assert_eq!(fx.answer.for_image_count(3), "many");
    }

    #[test]
    fn schema_errors_name_the_field() {
        let cases = [
            (r#"{"detections": {}}"#, "answer"),
            (r#"{"answer": "x", "extra": 1}"#, "extra"),
            (r#"{"answer": "x", "detections": {"a": []}}"#, "detections.a"),
            (r#"{"answer": "x", "detections": {"0": [{"bbox": [1, 2]}]}}"#, "detections.0[0].bbox"),
            (r#"{"answer": "x", "detections": {"0": [{"bbox": [1, 2, 3, 4], "confidence": 2}]}}"#, "detections.0[0].confidence"),
            (r#"{"answer": "x", "scores": {"1": {"XX": 0.3}}}"#, "scores.1.XX"),
            (r#"{"answer": "x", "scores": {"1": {"TL": true}}}"#, "scores.1.TL"),
            (r#"{"answer": 3}"#, "answer"),
        ];
        for (text, field) in cases {
            match MockFixtures::from_json_str(text) {
                Err(Error::Fixture { field: f, .. }) => assert_eq!(f, field, "{text}"),
                other => panic!("{text}: expected fixture error, got {other:?}"),
            }
        }
    }
}
