//! Model backends: text detector, window scorer and video answerer.
//!
//! Each role is a trait with a single request method. Two families of
//! implementations ship here: clients for an OpenAI-compatible vision chat
//! endpoint ([`chat`], [`live`]) and deterministic fixture mocks ([`mock`]).

pub mod chat;
pub mod live;
pub mod mock;

use std::sync::Arc;

use crate::error::Result;
use crate::media::{FrameImage, Rect};
use crate::scan::{sort_detections, Anchor, TextLineDetection};

pub use chat::{ChatClient, EndpointConfig, HttpReply, HttpTransport, ReqwestTransport};
pub use live::{parse_detection_reply, ChatAnswerer, ChatDetector, ChatScorer};
pub use mock::{MockAnswerer, MockDetector, MockFixtures, MockScorer};

/// Text line detector.
pub trait DetectorBackend: Send + Sync {
    fn model_name(&self) -> &str;

    /// Detections for one frame, clipped to the frame and sorted by `(y0, x0)`.
    fn detect(&self, frame: &FrameImage) -> Result<Vec<TextLineDetection>>;
}

/// A single window sent for relevance scoring.
#[derive(Debug, Clone, Copy)]
pub struct ScoreRequest<'a> {
    pub frame_index: usize,
    pub anchor: Anchor,
    pub image: &'a FrameImage,
    /// Rendered relevance prompt.
    pub prompt: &'a str,
}

/// Relevance scorer. Returns the model's raw reply; parsing is the caller's job.
pub trait ScorerBackend: Send + Sync {
    fn model_name(&self) -> &str;

    fn score(&self, request: &ScoreRequest<'_>) -> Result<String>;
}

#[derive(Debug, Clone, Copy)]
pub struct AnswerRequest<'a> {
    pub frames: &'a [FrameImage],
    /// Rendered answering prompt.
    pub prompt: &'a str,
}

pub trait AnswererBackend: Send + Sync {
    fn model_name(&self) -> &str;

    fn answer(&self, request: &AnswerRequest<'_>) -> Result<String>;
}

/// The three backends a pipeline run needs.
#[derive(Clone)]
pub struct Backends {
    pub detector: Arc<dyn DetectorBackend>,
    pub scorer: Arc<dyn ScorerBackend>,
    pub answerer: Arc<dyn AnswererBackend>,
}

impl Backends {
    pub fn new(
        detector: Arc<dyn DetectorBackend>,
        scorer: Arc<dyn ScorerBackend>,
        answerer: Arc<dyn AnswererBackend>,
    ) -> Self {
        Self {
            detector,
            scorer,
            answerer,
        }
    }

    /// Mock backends sharing one fixture set.
    pub fn from_fixtures(fixtures: MockFixtures) -> Self {
        let fixtures = Arc::new(fixtures);
        Self {
            detector: Arc::new(MockDetector::new(fixtures.clone())),
            scorer: Arc::new(MockScorer::new(fixtures.clone())),
            answerer: Arc::new(MockAnswerer::new(fixtures)),
        }
    }
}

/// Raw detector output before clipping.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDetection {
    pub bbox: Rect,
    pub confidence: f64,
    pub transcription: Option<String>,
}

/// Clips raw detections to the frame, drops those left without area, and
/// sorts the rest.
pub fn finalize_detections(
    raw: impl IntoIterator<Item = RawDetection>,
    frame_w: u32,
    frame_h: u32,
) -> Result<Vec<TextLineDetection>> {
    let mut out = Vec::new();
    for d in raw {
        if let Some(line) =
            TextLineDetection::clipped(d.bbox, d.confidence, d.transcription, frame_w, frame_h)?
        {
            out.push(line);
        }
    }
    sort_detections(&mut out);
    Ok(out)
}
