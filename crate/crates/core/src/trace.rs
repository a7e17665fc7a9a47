//! Per-run records: what each stage saw and decided.
//!
//! [`RunTrace`] holds only values that follow from the inputs and backend
//! replies, so two runs with the same fixtures produce equal traces. Wall
//! clock timings and call/cache counters live in [`StageTimings`] and
//! [`RunStats`] instead.

use serde::{Deserialize, Serialize};

use crate::amplify::{FallbackPolicy, FrameProvenance};
use crate::focus::{select_index, ParseStatus, ScoredWindow};
use crate::scan::{Anchor, FrameScanRecord, TextLineDetection};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    Sfa,
    Baseline,
}

impl std::fmt::Display for RunMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RunMode::Sfa => "sfa",
            RunMode::Baseline => "baseline",
        })
    }
}

impl std::str::FromStr for RunMode {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "sfa" => Ok(RunMode::Sfa),
            "baseline" => Ok(RunMode::Baseline),
            other => Err(crate::Error::Config(format!("unknown mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigSnapshot {
    pub mode: RunMode,
    pub alpha: f64,
    pub tau: f64,
    pub target_fps: f64,
    pub fallback: FallbackPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledFrame {
    pub frame_index: usize,
    pub timestamp: f64,
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub anchor: Anchor,
    pub value: f64,
    pub raw_response: String,
    pub parse_status: ParseStatus,
    pub attempts: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl From<&ScoredWindow> for ScoreRecord {
    fn from(s: &ScoredWindow) -> Self {
        Self {
            anchor: s.anchor(),
            value: s.score.value,
            raw_response: s.score.raw_response.clone(),
            parse_status: s.score.parse_status,
            attempts: s.attempts,
            error: s.error.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub anchor: Anchor,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameTrace {
    pub frame_index: usize,
    pub detections: Vec<TextLineDetection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detection_error: Option<String>,
    pub scan: FrameScanRecord,
    pub scores: Vec<ScoreRecord>,
    pub selection: Option<Selection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub question: String,
    pub config: ConfigSnapshot,
    pub sampled: Vec<SampledFrame>,
    /// One entry per sampled frame (empty for baseline runs).
    pub frames: Vec<FrameTrace>,
    pub refined: Vec<FrameProvenance>,
    pub fallback_level: Option<u8>,
    pub warnings: Vec<String>,
}

impl RunTrace {
    /// Re-runs key region selection from the recorded scores.
    pub fn recompute_selections(&self, tau: f64) -> Vec<Option<Selection>> {
        self.frames
            .iter()
            .map(|f| {
                let pairs: Vec<(Anchor, f64)> = f.scores.iter().map(|s| (s.anchor, s.value)).collect();
                select_index(&pairs, tau).map(|i| Selection {
                    anchor: pairs[i].0,
                    score: pairs[i].1,
                })
            })
            .collect()
    }
}

/// Wall-clock milliseconds spent per stage.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub sample_ms: f64,
    pub detect_ms: f64,
    pub scan_ms: f64,
    pub focus_ms: f64,
    pub amplify_ms: f64,
    pub answer_ms: f64,
}

/// Backend traffic for one run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunStats {
    pub detector_calls: usize,
    pub scorer_calls: usize,
    pub answerer_calls: usize,
    pub detection_cache_hits: usize,
    pub score_cache_hits: usize,
}
