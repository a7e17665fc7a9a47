//! Amplification of key regions to full frame size, and the final answer.

use serde::{Deserialize, Serialize};

use crate::backends::{AnswerRequest, AnswererBackend};
use crate::error::{Error, Result};
use crate::focus::KeyRegion;
use crate::media::{crop, resize, FrameImage, Rect};
use crate::parallel::ordered_map;
use crate::prompt::PromptTemplate;
use crate::scan::Anchor;
use crate::trace::{RunStats, RunTrace, StageTimings};

/// What to send the answerer when no frame yields a key region.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FallbackPolicy {
    /// Text-bearing frames first, then every sampled frame.
    #[default]
    Cascade,
    /// Fail with [`Error::NoKeyRegions`].
    Disabled,
}

impl std::str::FromStr for FallbackPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cascade" => Ok(FallbackPolicy::Cascade),
            "disabled" => Ok(FallbackPolicy::Disabled),
            other => Err(Error::Config(format!("unknown fallback policy `{other}`"))),
        }
    }
}

/// Where a refined frame came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameProvenance {
    pub source_frame_index: usize,
    pub anchor: Option<Anchor>,
    pub rect: Option<Rect>,
    pub score: Option<f64>,
}

impl FrameProvenance {
    fn original(frame_index: usize) -> Self {
        Self {
            source_frame_index: frame_index,
            anchor: None,
            rect: None,
            score: None,
        }
    }
}

/// Frames handed to the answerer, all at the original frame size.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinedVideo {
    pub frames: Vec<FrameImage>,
    pub provenance: Vec<FrameProvenance>,
    pub fallback_used: bool,
    /// 1 = text-bearing frames, 2 = all sampled frames.
    pub fallback_level: Option<u8>,
}

/// Crops the key region's adapted rect from the original frame and resamples
/// it straight to the frame's size (one resample, not via the normalized
/// scoring raster).
pub fn amplify_region(original_frame: &FrameImage, key: &KeyRegion) -> Result<FrameImage> {
    if key.frame_index != original_frame.frame_index() {
        return Err(Error::Argument(format!(
            "key region of frame {} applied to frame {}",
            key.frame_index,
            original_frame.frame_index()
        )));
    }
    let (w, h) = original_frame.dimensions();
    resize(&crop(original_frame, &key.region.window.rect)?, w, h)
}

/// Builds the refined video from the selected key regions, falling back to
/// original frames when there are none.
///
/// `sampled` is indexed by frame index; `text_bearing` lists the indices of
/// frames with at least one detection.
pub fn assemble_refined_video(
    keys: &[KeyRegion],
    sampled: &[FrameImage],
    text_bearing: &[usize],
    fallback: FallbackPolicy,
    max_in_flight: usize,
) -> Result<RefinedVideo> {
    if sampled.is_empty() {
        return Err(Error::EmptyVideo);
    }
    if !keys.windows(2).all(|k| k[0].frame_index < k[1].frame_index) {
        return Err(Error::Argument("key regions must be sorted by frame index".into()));
    }
    let lookup = |i: usize| {
        sampled
            .get(i)
            .filter(|f| f.frame_index() == i)
            .ok_or_else(|| Error::Argument(format!("no sampled frame with index {i}")))
    };

    if !keys.is_empty() {
        let frames = ordered_map(keys, max_in_flight, |k| amplify_region(lookup(k.frame_index)?, k))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        let provenance = keys
            .iter()
            .map(|k| FrameProvenance {
                source_frame_index: k.frame_index,
                anchor: Some(k.region.anchor()),
                rect: Some(k.region.window.rect),
                score: Some(k.score),
            })
            .collect();
        return Ok(RefinedVideo {
            frames,
            provenance,
            fallback_used: false,
            fallback_level: None,
        });
    }

    if fallback == FallbackPolicy::Disabled {
        return Err(Error::NoKeyRegions);
    }
    let (indices, level): (Vec<usize>, u8) = if text_bearing.is_empty() {
        ((0..sampled.len()).collect(), 2)
    } else {
        (text_bearing.to_vec(), 1)
    };
    let frames = indices
        .iter()
        .map(|&i| lookup(i).cloned())
        .collect::<Result<Vec<_>>>()?;
    Ok(RefinedVideo {
        frames,
        provenance: indices.into_iter().map(FrameProvenance::original).collect(),
        fallback_used: true,
        fallback_level: Some(level),
    })
}

/// Result of one pipeline run.
#[derive(Debug, Clone, PartialEq)]
pub struct AnswerResult {
    pub answer: String,
    pub refined: RefinedVideo,
    pub trace: RunTrace,
    pub timing: StageTimings,
    pub stats: RunStats,
}

/// Sends the refined frames and the rendered question to the answerer. The
/// reply is used verbatim apart from trimming surrounding whitespace.
pub fn answer(
    refined: RefinedVideo,
    question: &str,
    answerer: &dyn AnswererBackend,
    template: &PromptTemplate,
    trace: RunTrace,
) -> Result<AnswerResult> {
    if refined.frames.is_empty() {
        return Err(Error::EmptyVideo);
    }
    let prompt = template.render(question);
    let reply = answerer.answer(&AnswerRequest {
        frames: &refined.frames,
        prompt: &prompt,
    })?;
    Ok(AnswerResult {
        answer: reply.trim().to_string(),
        refined,
        trace,
        timing: StageTimings::default(),
        stats: RunStats::default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scan::{CandidateRegion, Window};

    fn checker(w: u32, h: u32, index: usize) -> FrameImage {
        let mut f = FrameImage::filled(w, h, [0, 0, 0]).unwrap().with_position(index, index as f64);
        for y in 0..h {
            for x in 0..w {
                if (x / 25 + y / 25) % 2 == 0 {
                    f.put_pixel(x, y, [255, 255, 255]);
                }
            }
        }
        f
    }

    fn key(frame: &FrameImage, anchor: Anchor, scale: f64, score: f64) -> KeyRegion {
        let (w, h) = frame.dimensions();
        let window = Window::at_scale(anchor, scale, w, h).with_frame_index(frame.frame_index());
        KeyRegion {
            frame_index: frame.frame_index(),
            region: CandidateRegion {
                window,
                normalized_image: frame.clone(),
                contained_line_ids: vec![0],
                contained_lines: vec![],
            },
            score,
        }
    }

    #[test]
    fn full_frame_key_is_identity() {
        let f = checker(100, 60, 0);
        assert_eq!(amplify_region(&f, &key(&f, Anchor::TopLeft, 1.0, 0.9)).unwrap(), f);
    }

    #[test]
    fn amplified_shape_is_frame_shape() {
        let f = FrameImage::filled(1920, 1080, [3, 3, 3]).unwrap();
        let k = key(&f, Anchor::TopLeft, 1300.0 / 1920.0, 0.9);
        assert!((k.region.window.rect.y1() - 731.25).abs() < 1e-9);
        assert_eq!(amplify_region(&f, &k).unwrap().dimensions(), (1920, 1080));
    }

    #[test]
    fn single_resample_matches_crop_then_resize() {
        let f = checker(100, 100, 0);
        let k = key(&f, Anchor::TopLeft, 0.5, 0.9);
        let expected = resize(&crop(&f, &Rect::new(0.0, 0.0, 50.0, 50.0).unwrap()).unwrap(), 100, 100).unwrap();
        assert_eq!(amplify_region(&f, &k).unwrap().pixels(), expected.pixels());
    }

    #[test]
    fn wrong_frame_is_rejected() {
        let f = checker(10, 10, 0);
        let other = checker(10, 10, 1);
        assert!(amplify_region(&other, &key(&f, Anchor::TopLeft, 1.0, 0.9)).is_err());
    }

    fn video(n: usize) -> Vec<FrameImage> {
        (0..n).map(|i| checker(40, 30, i)).collect()
    }

    #[test]
    fn assembles_keys_in_order() {
        let v = video(10);
        let keys: Vec<KeyRegion> = [2, 5, 9].iter().map(|&i| key(&v[i], Anchor::BottomRight, 0.6, 0.8)).collect();
        let r = assemble_refined_video(&keys, &v, &[2, 5, 9], FallbackPolicy::Cascade, 4).unwrap();
        assert!(!r.fallback_used);
        let idx: Vec<usize> = r.provenance.iter().map(|p| p.source_frame_index).collect();
        assert_eq!(idx, vec![2, 5, 9]);
        assert!(r.frames.iter().all(|f| f.dimensions() == (40, 30)));
        assert_eq!(r.provenance[0].anchor, Some(Anchor::BottomRight));
    }

    #[test]
    fn unsorted_keys_rejected() {
        let v = video(10);
        let keys = vec![key(&v[5], Anchor::TopLeft, 0.6, 0.8), key(&v[2], Anchor::TopLeft, 0.6, 0.8)];
        assert!(assemble_refined_video(&keys, &v, &[], FallbackPolicy::Cascade, 1).is_err());
    }

    #[test]
    fn fallback_to_text_frames() {
        let v = video(8);
        let r = assemble_refined_video(&[], &v, &[1, 3, 4, 6], FallbackPolicy::Cascade, 1).unwrap();
        assert!(r.fallback_used);
        assert_eq!(r.fallback_level, Some(1));
        assert_eq!(r.frames, vec![v[1].clone(), v[3].clone(), v[4].clone(), v[6].clone()]);
    }

    #[test]
    fn fallback_to_all_frames() {
        let v = video(5);
        let r = assemble_refined_video(&[], &v, &[], FallbackPolicy::Cascade, 1).unwrap();
        assert_eq!(r.fallback_level, Some(2));
        assert_eq!(r.frames, v);
    }

    #[test]
    fn fallback_disabled_and_empty_video() {
        let v = video(3);
        assert!(matches!(
            assemble_refined_video(&[], &v, &[0], FallbackPolicy::Disabled, 1),
            Err(Error::NoKeyRegions)
        ));
        assert!(matches!(
            assemble_refined_video(&[], &[], &[], FallbackPolicy::Cascade, 1),
            Err(Error::EmptyVideo)
        ));
    }
}
