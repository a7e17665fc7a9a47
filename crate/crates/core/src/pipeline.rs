//! End-to-end orchestration: sample, detect, scan, score, select, amplify,
//! answer. Also the baseline path that skips straight from sampling to the
//! answerer.

use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use tracing::{info, warn};

use crate::amplify::{answer, assemble_refined_video, AnswerResult, FallbackPolicy, RefinedVideo};
use crate::backends::Backends;
use crate::cache::{detection_key, score_key, CacheStage, Lookup, ResultCache};
use crate::error::{Error, Result, Stage};
use crate::focus::{
    score_window, select_key_region, validate_tau, KeyRegion, RelevanceScore,
    ScoredWindow,
};
use crate::media::{sample_frames, FrameImage, FrameSource};
use crate::parallel::ordered_map;
use crate::prompt::PromptTemplate;
use crate::scan::{
    scan_frame_with_record, validate_alpha, CandidateRegion, FrameScanRecord, TextLineDetection,
};
use crate::trace::{
    ConfigSnapshot, FrameTrace, RunMode, RunStats, RunTrace, SampledFrame, ScoreRecord, Selection,
    StageTimings,
};

pub const DEFAULT_ALPHA: f64 = 0.6;
pub const DEFAULT_TAU: f64 = 0.7;
pub const DEFAULT_FPS: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Initial window size as a fraction of the frame, in [0.5, 1].
    pub alpha: f64,
    /// Relevance threshold; a window must score strictly above it.
    pub tau: f64,
    pub target_fps: f64,
    pub fallback: FallbackPolicy,
    pub relevance_prompt: PromptTemplate,
    pub answer_prompt: PromptTemplate,
    /// Bound on concurrent frame/window work within one sample.
    pub max_in_flight: usize,
    /// Bound on samples evaluated at once in batch mode.
    pub max_samples_in_flight: usize,
    pub cache_dir: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            tau: DEFAULT_TAU,
            target_fps: DEFAULT_FPS,
            fallback: FallbackPolicy::default(),
            relevance_prompt: PromptTemplate::default_relevance(),
            answer_prompt: PromptTemplate::default_answer(),
            max_in_flight: 4,
            max_samples_in_flight: 1,
            cache_dir: None,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        validate_alpha(self.alpha)?;
        validate_tau(self.tau)?;
        if !(self.target_fps.is_finite() && self.target_fps > 0.0) {
            return Err(Error::Config(format!(
                "fps must be positive, got {}",
                self.target_fps
            )));
        }
        if self.max_in_flight == 0 || self.max_samples_in_flight == 0 {
            return Err(Error::Config("concurrency limits must be at least 1".into()));
        }
        Ok(())
    }

    pub fn snapshot(&self, mode: RunMode) -> ConfigSnapshot {
        ConfigSnapshot {
            mode,
            alpha: self.alpha,
            tau: self.tau,
            target_fps: self.target_fps,
            fallback: self.fallback,
        }
    }
}

fn ms_since(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

#[derive(Default)]
struct Counters {
    detector_calls: AtomicUsize,
    scorer_calls: AtomicUsize,
    detection_hits: AtomicUsize,
    score_hits: AtomicUsize,
}

/// A configured pipeline bound to a set of backends.
pub struct Pipeline {
    config: PipelineConfig,
    backends: Backends,
    cache: Option<ResultCache>,
}

impl Pipeline {
    pub fn new(config: PipelineConfig, backends: Backends) -> Result<Self> {
        config.validate()?;
        let cache = config.cache_dir.as_ref().map(ResultCache::open).transpose()?;
        Ok(Self {
            config,
            backends,
            cache,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn backends(&self) -> &Backends {
        &self.backends
    }

    pub fn run(&self, mode: RunMode, source: &FrameSource, question: &str) -> Result<AnswerResult> {
        match mode {
            RunMode::Sfa => self.run_sfa(source, question),
            RunMode::Baseline => self.run_baseline(source, question),
        }
    }

    fn sample(&self, source: &FrameSource) -> Result<Vec<FrameImage>> {
        sample_frames(source, self.config.target_fps).map_err(|e| e.at(Stage::Sample))
    }

    pub fn run_sfa(&self, source: &FrameSource, question: &str) -> Result<AnswerResult> {
        let start = Instant::now();
        let frames = self.sample(source)?;
        let sample_ms = ms_since(start);
        let mut result = self.run_sfa_on_frames(&frames, question)?;
        result.timing.sample_ms = sample_ms;
        Ok(result)
    }

    /// The full pipeline over frames already in memory. Frame `i` must have
    /// frame index `i`.
    pub fn run_sfa_on_frames(&self, frames: &[FrameImage], question: &str) -> Result<AnswerResult> {
        if frames.is_empty() {
            return Err(Error::EmptyVideo.at(Stage::Sample));
        }
        if frames.iter().enumerate().any(|(i, f)| f.frame_index() != i) {
            return Err(Error::Argument("frames must be numbered 0, 1, ...".into()).at(Stage::Sample));
        }
        let cfg = &self.config;
        let counters = Counters::default();
        let warnings = Mutex::new(Vec::new());
        let mut timing = StageTimings::default();

        // detect
        let t = Instant::now();
        let detections: Vec<(Vec<TextLineDetection>, Option<String>)> =
            ordered_map(frames, cfg.max_in_flight, |f| self.detect(f, &counters, &warnings));
        timing.detect_ms = ms_since(t);

        // scan
        let t = Instant::now();
        let scanned: Vec<(Vec<CandidateRegion>, FrameScanRecord)> = ordered_map(
            &frames.iter().zip(&detections).collect::<Vec<_>>(),
            cfg.max_in_flight,
            |(frame, (lines, _))| scan_frame_with_record(frame, lines, cfg.alpha),
        )
        .into_iter()
        .collect::<Result<_>>()
        .map_err(|e| e.at(Stage::Scan))?;
        timing.scan_ms = ms_since(t);

        // focus
        let t = Instant::now();
        let candidates: Vec<&CandidateRegion> =
            scanned.iter().flat_map(|(regions, _)| regions).collect();
        let scored_flat: Vec<ScoredWindow> = ordered_map(&candidates, cfg.max_in_flight, |r| {
            self.score((*r).clone(), question, &counters, &warnings)
        });
        let mut scored_iter = scored_flat.into_iter();
        let mut per_frame_scores: Vec<Vec<ScoredWindow>> = Vec::with_capacity(frames.len());
        for (regions, _) in &scanned {
            per_frame_scores.push(scored_iter.by_ref().take(regions.len()).collect());
        }
        let keys: Vec<KeyRegion> = per_frame_scores
            .iter()
            .filter_map(|s| select_key_region(s, cfg.tau))
            .collect();
        timing.focus_ms = ms_since(t);

        // amplify
        let t = Instant::now();
        let text_bearing: Vec<usize> = detections
            .iter()
            .enumerate()
            .filter(|(_, (lines, _))| !lines.is_empty())
            .map(|(i, _)| i)
            .collect();
        let refined =
            assemble_refined_video(&keys, frames, &text_bearing, cfg.fallback, cfg.max_in_flight)
                .map_err(|e| e.at(Stage::Amplify))?;
        timing.amplify_ms = ms_since(t);
        if refined.fallback_used {
            info!(level = ?refined.fallback_level, "no key regions; using fallback frames");
        }

        let frame_traces = frames
            .iter()
            .zip(detections)
            .zip(scanned)
            .zip(&per_frame_scores)
            .map(|(((frame, (lines, detection_error)), (_, scan)), scores)| FrameTrace {
                frame_index: frame.frame_index(),
                detections: lines,
                detection_error,
                scan,
                scores: scores.iter().map(ScoreRecord::from).collect(),
                selection: keys
                    .iter()
                    .find(|k| k.frame_index == frame.frame_index())
                    .map(|k| Selection {
                        anchor: k.region.anchor(),
                        score: k.score,
                    }),
            })
            .collect();
        let trace = self.trace(
            RunMode::Sfa,
            frames,
            question,
            frame_traces,
            &refined,
            warnings.into_inner().expect("warning lock poisoned"),
        );

        let t = Instant::now();
        let mut result = answer(
            refined,
            question,
            self.backends.answerer.as_ref(),
            &cfg.answer_prompt,
            trace,
        )
        .map_err(|e| e.at(Stage::Answer))?;
        timing.answer_ms = ms_since(t);
        result.timing = timing;
        result.stats = RunStats {
            detector_calls: counters.detector_calls.into_inner(),
            scorer_calls: counters.scorer_calls.into_inner(),
            answerer_calls: 1,
            detection_cache_hits: counters.detection_hits.into_inner(),
            score_cache_hits: counters.score_hits.into_inner(),
        };
        Ok(result)
    }

    /// Samples `source` at the configured rate.
    pub fn sample_source(&self, source: &FrameSource) -> Result<Vec<FrameImage>> {
        self.sample(source)
    }

    /// Detection for each frame, through the cache when one is configured.
    /// Failed frames come back empty with the failure message.
    pub fn detect_frames(
        &self,
        frames: &[FrameImage],
    ) -> Vec<(Vec<TextLineDetection>, Option<String>)> {
        let counters = Counters::default();
        let warnings = Mutex::new(Vec::new());
        ordered_map(frames, self.config.max_in_flight, |f| self.detect(f, &counters, &warnings))
    }

    /// Sampled frames go straight to the answerer.
    pub fn run_baseline(&self, source: &FrameSource, question: &str) -> Result<AnswerResult> {
        let start = Instant::now();
        let frames = self.sample(source)?;
        let sample_ms = ms_since(start);
        let mut result = self.run_baseline_on_frames(&frames, question)?;
        result.timing.sample_ms = sample_ms;
        Ok(result)
    }

    pub fn run_baseline_on_frames(&self, frames: &[FrameImage], question: &str) -> Result<AnswerResult> {
        if frames.is_empty() {
            return Err(Error::EmptyVideo.at(Stage::Sample));
        }
        let refined = RefinedVideo {
            frames: frames.to_vec(),
            provenance: frames
                .iter()
                .map(|f| crate::amplify::FrameProvenance {
                    source_frame_index: f.frame_index(),
                    anchor: None,
                    rect: None,
                    score: None,
                })
                .collect(),
            fallback_used: false,
            fallback_level: None,
        };
        let trace = self.trace(RunMode::Baseline, frames, question, Vec::new(), &refined, Vec::new());
        let t = Instant::now();
        let mut result = answer(
            refined,
            question,
            self.backends.answerer.as_ref(),
            &self.config.answer_prompt,
            trace,
        )
        .map_err(|e| e.at(Stage::Answer))?;
        result.timing.answer_ms = ms_since(t);
        result.stats.answerer_calls = 1;
        Ok(result)
    }

    fn trace(
        &self,
        mode: RunMode,
        frames: &[FrameImage],
        question: &str,
        frame_traces: Vec<FrameTrace>,
        refined: &RefinedVideo,
        warnings: Vec<String>,
    ) -> RunTrace {
        RunTrace {
            question: question.to_string(),
            config: self.config.snapshot(mode),
            sampled: frames
                .iter()
                .map(|f| SampledFrame {
                    frame_index: f.frame_index(),
                    timestamp: f.timestamp(),
                    width: f.width(),
                    height: f.height(),
                })
                .collect(),
            frames: frame_traces,
            refined: refined.provenance.clone(),
            fallback_level: refined.fallback_level,
            warnings,
        }
    }

    /// Detections for one frame. Backend failures leave the frame text-free
    /// and are recorded rather than propagated.
    fn detect(
        &self,
        frame: &FrameImage,
        counters: &Counters,
        warnings: &Mutex<Vec<String>>,
    ) -> (Vec<TextLineDetection>, Option<String>) {
        let detector = &self.backends.detector;
        let key = self
            .cache
            .as_ref()
            .map(|_| detection_key(frame, detector.model_name()));
        if let (Some(cache), Some(key)) = (&self.cache, &key) {
            match cache.get::<Vec<TextLineDetection>>(CacheStage::Detections, key) {
                Lookup::Hit(lines) => {
                    counters.detection_hits.fetch_add(1, Ordering::Relaxed);
                    return (lines, None);
                }
                Lookup::Miss => {}
                Lookup::Corrupt(why) => push_warning(
                    warnings,
                    format!("frame {}: corrupt detection cache entry ({why}); recomputing", frame.frame_index()),
                ),
            }
        }
        counters.detector_calls.fetch_add(1, Ordering::Relaxed);
        match detector.detect(frame) {
            Ok(lines) => {
                if let (Some(cache), Some(key)) = (&self.cache, &key) {
                    if let Err(e) = cache.put(CacheStage::Detections, key, &lines) {
                        warn!("cannot write detection cache: {e}");
                    }
                }
                (lines, None)
            }
            Err(e) => {
                let msg = format!("frame {}: detection failed, treating as text-free: {e}", frame.frame_index());
                warn!("{msg}");
                push_warning(warnings, msg);
                (Vec::new(), Some(e.to_string()))
            }
        }
    }

    fn score(
        &self,
        region: CandidateRegion,
        question: &str,
        counters: &Counters,
        warnings: &Mutex<Vec<String>>,
    ) -> ScoredWindow {
        let scorer = &self.backends.scorer;
        let template = &self.config.relevance_prompt;
        let key = self.cache.as_ref().map(|_| {
            score_key(&region.normalized_image, question, scorer.model_name(), template)
        });
        if let (Some(cache), Some(key)) = (&self.cache, &key) {
            match cache.get::<CachedScore>(CacheStage::Scores, key) {
                Lookup::Hit(hit) => {
                    counters.score_hits.fetch_add(1, Ordering::Relaxed);
                    return ScoredWindow {
                        region,
                        score: hit.score,
                        attempts: hit.attempts,
                        error: None,
                    };
                }
                Lookup::Miss => {}
                Lookup::Corrupt(why) => push_warning(
                    warnings,
                    format!(
                        "frame {} {}: corrupt score cache entry ({why}); recomputing",
                        region.frame_index(),
                        region.anchor()
                    ),
                ),
            }
        }
        let counted = CountingScorer {
            inner: scorer.as_ref(),
            calls: &counters.scorer_calls,
        };
        let scored = score_window(region, question, &counted, template);
        // transport failures are not cached so a later run can retry them
        if let (Some(cache), Some(key), None) = (&self.cache, &key, &scored.error) {
            let entry = CachedScore {
                score: scored.score.clone(),
                attempts: scored.attempts,
            };
            if let Err(e) = cache.put(CacheStage::Scores, key, &entry) {
                warn!("cannot write score cache: {e}");
            }
        }
        scored
    }
}

/// Scores are cached together with the attempt count so that a warm run
/// reproduces the cold run's trace exactly.
#[derive(serde::Serialize, serde::Deserialize)]
struct CachedScore {
    score: RelevanceScore,
    attempts: u32,
}

fn push_warning(warnings: &Mutex<Vec<String>>, msg: String) {
    warnings.lock().expect("warning lock poisoned").push(msg);
}

struct CountingScorer<'a> {
    inner: &'a dyn crate::backends::ScorerBackend,
    calls: &'a AtomicUsize,
}

impl crate::backends::ScorerBackend for CountingScorer<'_> {
    fn model_name(&self) -> &str {
        self.inner.model_name()
    }

    fn score(&self, request: &crate::backends::ScoreRequest<'_>) -> Result<String> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.score(request)
    }
}

/// Runs the full scan/focus/amplify pipeline on one video.
pub fn run_sfa(
    source: &FrameSource,
    question: &str,
    config: &PipelineConfig,
    backends: &Backends,
) -> Result<AnswerResult> {
    Pipeline::new(config.clone(), backends.clone())?.run_sfa(source, question)
}

/// Sends sampled frames directly to the answerer.
pub fn run_baseline(
    source: &FrameSource,
    question: &str,
    config: &PipelineConfig,
    backends: &Backends,
) -> Result<AnswerResult> {
    Pipeline::new(config.clone(), backends.clone())?.run_baseline(source, question)
}
