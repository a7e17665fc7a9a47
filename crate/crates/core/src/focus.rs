//! Relevance scoring of candidate windows and per-frame key region selection.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use tracing::warn;

use crate::backends::{ScoreRequest, ScorerBackend};
use crate::error::{Error, Result};
use crate::prompt::PromptTemplate;
use crate::scan::{Anchor, CandidateRegion};

pub fn validate_tau(tau: f64) -> Result<()> {
    if (0.0..=1.0).contains(&tau) {
        Ok(())
    } else {
        Err(Error::Config(format!("tau must lie in [0, 1], got {tau}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseStatus {
    /// A number in [0, 1] was found.
    Parsed,
    /// A number outside [0, 1] was found and clamped.
    Clamped,
    /// No number (or no reply at all); the score is 0.
    Defaulted,
}

/// A window's relevance to the question, always in [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelevanceScore {
    pub value: f64,
    pub raw_response: String,
    pub parse_status: ParseStatus,
}

impl RelevanceScore {
    fn defaulted(raw_response: String) -> Self {
        Self {
            value: 0.0,
            raw_response,
            parse_status: ParseStatus::Defaulted,
        }
    }
}

fn number_pattern() -> &'static Regex {
    static PATTERN: OnceLock<Regex> = OnceLock::new();
    PATTERN.get_or_init(|| Regex::new(r"-?(?:\d+(?:\.\d*)?|\.\d+)").expect("valid regex"))
}

/// Reads the first decimal number in a scorer reply.
pub fn parse_score(raw: &str) -> RelevanceScore {
    let number = number_pattern()
        .find(raw)
        .and_then(|m| m.as_str().parse::<f64>().ok())
        .filter(|v| v.is_finite());
    match number {
        Some(v) if (0.0..=1.0).contains(&v) => RelevanceScore {
            // normalises -0.0
            value: v.abs(),
            raw_response: raw.to_string(),
            parse_status: ParseStatus::Parsed,
        },
        Some(v) => RelevanceScore {
            value: v.clamp(0.0, 1.0),
            raw_response: raw.to_string(),
            parse_status: ParseStatus::Clamped,
        },
        None => RelevanceScore::defaulted(raw.to_string()),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredWindow {
    pub region: CandidateRegion,
    pub score: RelevanceScore,
    /// Scorer calls made for this window (1, or 2 after a retry).
    pub attempts: u32,
    /// Last scorer failure, if every attempt failed.
    pub error: Option<String>,
}

impl ScoredWindow {
    pub fn anchor(&self) -> Anchor {
        self.region.anchor()
    }
}

/// Asks the scorer how relevant `region` is to `question`.
///
/// A transport failure or a reply with no number is retried once. If the
/// second attempt also fails the window scores 0 (`Defaulted`) and the
/// failure is kept on the result instead of aborting the run.
pub fn score_window(
    region: CandidateRegion,
    question: &str,
    scorer: &dyn ScorerBackend,
    template: &PromptTemplate,
) -> ScoredWindow {
    let prompt = template.render(question);
    let request = ScoreRequest {
        frame_index: region.frame_index(),
        anchor: region.anchor(),
        image: &region.normalized_image,
        prompt: &prompt,
    };
    let mut last_error = None;
    let mut last_reply = String::new();
    for attempt in 1..=2 {
        match scorer.score(&request) {
            Ok(reply) => {
                let score = parse_score(&reply);
                if score.parse_status != ParseStatus::Defaulted {
                    return ScoredWindow {
                        region,
                        score,
                        attempts: attempt,
                        error: None,
                    };
                }
                last_reply = reply;
                last_error = None;
            }
            Err(e) => {
                warn!(
                    frame = request.frame_index,
                    anchor = %request.anchor,
                    attempt,
                    "scorer failed: {e}"
                );
                last_error = Some(e.to_string());
            }
        }
    }
    ScoredWindow {
        region,
        score: RelevanceScore::defaulted(last_reply),
        attempts: 2,
        error: last_error,
    }
}

/// The window kept for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyRegion {
    pub frame_index: usize,
    pub region: CandidateRegion,
    /// Strictly greater than the threshold it was selected with.
    pub score: f64,
}

/// Index of the window to keep among `(anchor, score)` pairs, or `None` when
/// no score is strictly above `tau`. Ties on the best score go to the
/// earliest anchor (TL, TR, BL, BR), independent of input order.
pub fn select_index(scores: &[(Anchor, f64)], tau: f64) -> Option<usize> {
    scores
        .iter()
        .enumerate()
        .filter(|(_, (_, s))| *s > tau)
        .max_by(|(_, (a1, s1)), (_, (a2, s2))| s1.total_cmp(s2).then(a2.cmp(a1)))
        .map(|(i, _)| i)
}

/// Thresholded max-selection over one frame's scored windows.
pub fn select_key_region(scored: &[ScoredWindow], tau: f64) -> Option<KeyRegion> {
    let pairs: Vec<(Anchor, f64)> = scored.iter().map(|s| (s.anchor(), s.score.value)).collect();
    select_index(&pairs, tau).map(|i| KeyRegion {
        frame_index: scored[i].region.frame_index(),
        region: scored[i].region.clone(),
        score: scored[i].score.value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::MockFixtures;
    use crate::backends::MockScorer;
    use crate::media::{FrameImage, Rect};
    use crate::scan::{TextLineDetection, Window};
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    fn region(frame_index: usize, anchor: Anchor) -> CandidateRegion {
        let window = Window::at_scale(anchor, 0.6, 100, 100).with_frame_index(frame_index);
        CandidateRegion {
            window,
            normalized_image: FrameImage::filled(60, 60, [0, 0, 0]).unwrap(),
            contained_line_ids: vec![0],
            contained_lines: vec![TextLineDetection {
                bbox: Rect::new(1.0, 1.0, 2.0, 2.0).unwrap(),
                confidence: 1.0,
                transcription: None,
            }],
        }
    }

    fn scored(anchor: Anchor, value: f64) -> ScoredWindow {
        ScoredWindow {
            region: region(0, anchor),
            score: RelevanceScore {
                value,
                raw_response: value.to_string(),
                parse_status: ParseStatus::Parsed,
            },
            attempts: 1,
            error: None,
        }
    }

    #[test]
    fn parse_plain_number() {
        let s = parse_score("0.7");
        assert_eq!((s.value, s.parse_status), (0.7, ParseStatus::Parsed));
    }

    #[test]
    fn parse_prefixed_number() {
        let s = parse_score("Score: 0.85");
        assert_eq!((s.value, s.parse_status), (0.85, ParseStatus::Parsed));
        assert_eq!(s.raw_response, "Score: 0.85");
    }

    #[test]
    fn parse_out_of_range_is_clamped() {
        let s = parse_score("The relevance is 8 out of 10");
        assert_eq!((s.value, s.parse_status), (1.0, ParseStatus::Clamped));
        let s = parse_score("-0.3");
        assert_eq!((s.value, s.parse_status), (0.0, ParseStatus::Clamped));
    }

    #[test]
    fn parse_without_number_defaults() {
        for raw in ["", "irrelevant", "n/a"] {
            let s = parse_score(raw);
            assert_eq!((s.value, s.parse_status), (0.0, ParseStatus::Defaulted));
        }
        assert_eq!(parse_score(".5").value, 0.5);
        assert_eq!(parse_score("1.").value, 1.0);
    }

    #[test]
    fn fixture_score_passes_through() {
        let fx = MockFixtures::from_json_str(r#"{"answer": "a", "scores": {"3": {"TL": 0.9}}}"#).unwrap();
        let scorer = MockScorer::new(Arc::new(fx));
        let sw = score_window(region(3, Anchor::TopLeft), "q", &scorer, &PromptTemplate::default_relevance());
        assert_eq!(sw.score.value, 0.9);
        assert_eq!(sw.score.parse_status, ParseStatus::Parsed);
        assert_eq!(sw.attempts, 1);
    }

    #[test]
    fn unparsable_reply_defaults_after_retry() {
        let fx = MockFixtures::from_json_str(r#"{"answer": "a", "scores": {"3": {"TL": "irrelevant"}}}"#).unwrap();
        let scorer = MockScorer::new(Arc::new(fx));
        let sw = score_window(region(3, Anchor::TopLeft), "q", &scorer, &PromptTemplate::default_relevance());
        assert_eq!(sw.score.value, 0.0);
        assert_eq!(sw.score.parse_status, ParseStatus::Defaulted);
        assert_eq!(sw.attempts, 2);
        assert_eq!(scorer.calls(), 2);
    }

    struct Flaky {
        calls: AtomicUsize,
        fail_first: usize,
    }

    impl ScorerBackend for Flaky {
        fn model_name(&self) -> &str {
            "flaky"
        }

        fn score(&self, _: &ScoreRequest<'_>) -> Result<String> {
            if self.calls.fetch_add(1, Ordering::SeqCst) < self.fail_first {
                Err(Error::Transport { status: Some(502), body: "bad gateway".into() })
            } else {
                Ok("0.8".into())
            }
        }
    }

    #[test]
    fn transport_failure_retried_once() {
        let t = PromptTemplate::default_relevance();
        let once = Flaky { calls: AtomicUsize::new(0), fail_first: 1 };
        let sw = score_window(region(0, Anchor::TopRight), "q", &once, &t);
        assert_eq!((sw.score.value, sw.attempts), (0.8, 2));
        assert!(sw.error.is_none());

        let always = Flaky { calls: AtomicUsize::new(0), fail_first: usize::MAX };
        let sw = score_window(region(0, Anchor::TopRight), "q", &always, &t);
        assert_eq!(sw.score.parse_status, ParseStatus::Defaulted);
        assert_eq!(sw.score.value, 0.0);
        assert!(sw.error.unwrap().contains("502"));
        assert_eq!(always.calls.load(Ordering::SeqCst), 2);
    }

    #[test]
    fn picks_maximum_above_threshold() {
        let s = [
            scored(Anchor::TopLeft, 0.5),
            scored(Anchor::TopRight, 0.8),
            scored(Anchor::BottomLeft, 0.9),
        ];
        let key = select_key_region(&s, 0.7).unwrap();
        assert_eq!(key.region.anchor(), Anchor::BottomLeft);
        assert_eq!(key.score, 0.9);
    }

    #[test]
    fn nothing_above_threshold() {
        let s = [scored(Anchor::TopLeft, 0.3), scored(Anchor::TopRight, 0.6)];
        assert!(select_key_region(&s, 0.7).is_none());
        assert!(select_key_region(&[], 0.7).is_none());
    }

    #[test]
    fn score_equal_to_threshold_does_not_qualify() {
        let s = [scored(Anchor::TopLeft, 0.7)];
        assert!(select_key_region(&s, 0.7).is_none());
    }

    #[test]
    fn ties_go_to_earliest_anchor() {
        let s = [scored(Anchor::BottomRight, 0.8), scored(Anchor::TopLeft, 0.8)];
        assert_eq!(select_key_region(&s, 0.7).unwrap().region.anchor(), Anchor::TopLeft);
    }

    #[test]
    fn tau_range() {
        assert!(validate_tau(0.0).is_ok() && validate_tau(1.0).is_ok());
        assert!(validate_tau(1.2).is_err() && validate_tau(f64::NAN).is_err());
    }
}
