//! The full pipeline with fixture-driven mock backends, compared with the
//! baseline that sends every sampled frame to the answerer.
//!
//! cargo run --example poster_pipeline

use sfa::backends::{Backends, MockFixtures};
use sfa::media::{FrameImage, Rect};
use sfa::pipeline::{Pipeline, PipelineConfig};

const FIXTURES: &str = r#"{
  "detections": {
    "1": [{"bbox": [40, 30, 200, 60], "confidence": 0.95, "text": "SALE"}],
    "2": [{"bbox": [50, 40, 300, 80], "confidence": 0.97, "text": "HALF PRICE"},
          {"bbox": [400, 250, 600, 300], "confidence": 0.88, "text": "OPEN 9-5"}]
  },
  "scores": {
    "1": {"TL": 0.4},
    "2": {"TL": "Relevance: 0.9", "BR": 0.6}
  },
  "answer": {"default": "I cannot tell", "by_image_count": {"1": "half price"}}
}"#;

fn frames() -> sfa::Result<Vec<FrameImage>> {
    (0..6)
        .map(|i| {
            let mut f = FrameImage::filled(640, 360, [20 + 30 * i as u8, 60, 90])?.with_position(i, i as f64);
            if i == 2 {
                f.fill_rect(&Rect::new(50.0, 40.0, 300.0, 80.0)?, [250, 250, 250]);
            }
            Ok(f)
        })
        .collect()
}

fn main() -> sfa::Result<()> {
    let frames = frames()?;
    let question = "What discount does the poster advertise?";
    let backends = Backends::from_fixtures(MockFixtures::from_json_str(FIXTURES)?);
    let pipeline = Pipeline::new(PipelineConfig::default(), backends)?;

    let sfa_run = pipeline.run_sfa_on_frames(&frames, question)?;
    println!("sfa answer:      {:?}", sfa_run.answer);
    for f in &sfa_run.trace.frames {
        let scores: Vec<String> = f.scores.iter().map(|s| format!("{}={}", s.anchor, s.value)).collect();
        println!(
            "  frame {}: {} lines, scores [{}], selected {:?}",
            f.frame_index,
            f.detections.len(),
            scores.join(", "),
            f.selection.as_ref().map(|s| s.anchor)
        );
    }
    println!("  refined video: {} frame(s) from {:?}", sfa_run.refined.frames.len(),
        sfa_run.refined.provenance.iter().map(|p| p.source_frame_index).collect::<Vec<_>>());

    let baseline = pipeline.run_baseline_on_frames(&frames, question)?;
    println!("baseline answer: {:?} ({} frames)", baseline.answer, baseline.refined.frames.len());
    Ok(())
}
