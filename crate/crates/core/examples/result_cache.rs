//! Cold and warm runs against the on-disk result cache. The warm run makes
//! no detector or scorer calls and reproduces the cold trace exactly.
//!
//! cargo run --example result_cache

use std::sync::Arc;

use sfa::backends::{Backends, MockAnswerer, MockDetector, MockFixtures, MockScorer};
use sfa::media::{FrameImage, Rect};
use sfa::pipeline::{Pipeline, PipelineConfig};

const FIXTURES: &str = r#"{
  "detections": {"0": [{"bbox": [20, 20, 200, 60], "text": "PLATFORM 4"}],
                 "1": [{"bbox": [300, 200, 600, 260], "text": "DEPARTURES"}]},
  "scores": {"0": {"TL": 0.8}},
  "answer": "platform 4"
}"#;

fn main() -> sfa::Result<()> {
    let cache_dir = std::env::temp_dir().join(format!("sfa-cache-{}", std::process::id()));
    let mut frames = Vec::new();
    for i in 0..3 {
        let mut f = FrameImage::filled(640, 360, [10, 10 + 50 * i as u8, 30])?.with_position(i, i as f64);
        f.fill_rect(&Rect::new(20.0, 20.0, 200.0, 60.0)?, [240, 240, 0]);
        frames.push(f);
    }
    let config = PipelineConfig {
        cache_dir: Some(cache_dir.clone()),
        ..PipelineConfig::default()
    };
    let fixtures = Arc::new(MockFixtures::from_json_str(FIXTURES)?);

    let mut traces = Vec::new();
    for label in ["cold", "warm"] {
        let detector = Arc::new(MockDetector::new(fixtures.clone()));
        let scorer = Arc::new(MockScorer::new(fixtures.clone()));
        let backends = Backends::new(detector.clone(), scorer.clone(), Arc::new(MockAnswerer::new(fixtures.clone())));
        let result = Pipeline::new(config.clone(), backends)?.run_sfa_on_frames(&frames, "Which platform?")?;
        println!(
            "{label}: answer {:?}, detector calls {}, scorer calls {}, cache hits {}/{}",
            result.answer,
            detector.calls(),
            scorer.calls(),
            result.stats.detection_cache_hits,
            result.stats.score_cache_hits
        );
        traces.push(result.trace);
    }
    println!("traces identical: {}", traces[0] == traces[1]);
    std::fs::remove_dir_all(&cache_dir)?;
    Ok(())
}
