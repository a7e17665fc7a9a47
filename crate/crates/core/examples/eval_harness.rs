//! Batch evaluation: writes a small frame directory and manifest to a temp
//! dir, evaluates it in both modes with mock backends, and writes reports.
//!
//! cargo run --example eval_harness

use sfa::backends::{Backends, MockFixtures};
use sfa::eval::{evaluate, load_manifest, summary_line, write_report};
use sfa::media::{FrameImage, FrameSource};
use sfa::pipeline::PipelineConfig;
use sfa::trace::RunMode;

const FIXTURES: &str = r#"{
  "detections": {"0": [{"bbox": [10, 10, 150, 40], "text": "EXIT 12"}]},
  "scores": {"0": {"TL": 0.95}},
  "answer": {"default": "exit 21", "by_image_count": {"1": "exit 12"}}
}"#;

fn main() -> sfa::Result<()> {
    let dir = std::env::temp_dir().join(format!("sfa-eval-{}", std::process::id()));
    let frames: Vec<FrameImage> = (0..4)
        .map(|i| FrameImage::filled(320, 180, [i as u8 * 40, 90, 120]).map(|f| f.with_position(i, i as f64)))
        .collect::<sfa::Result<_>>()?;
    FrameSource::write_directory(dir.join("frames/road"), &frames, 2.0)?;
    let manifest = dir.join("manifest.jsonl");
    std::fs::write(
        &manifest,
        [
            r#"{"sample_id": "road_q1", "frames_path": "frames/road", "fps": 2, "question": "Which exit is signposted?", "answers": ["Exit 12", "12"]}"#,
            r#"{"sample_id": "road_q2", "frames_path": "frames/road", "fps": 2, "question": "Which exit is next?", "answers": ["exit 21"]}"#,
        ]
        .join("\n"),
    )?;

    let samples = load_manifest(&manifest)?;
    let backends = Backends::from_fixtures(MockFixtures::from_json_str(FIXTURES)?);
    for mode in [RunMode::Baseline, RunMode::Sfa] {
        let report = evaluate(&samples, &PipelineConfig::default(), &backends, mode)?;
        let files = write_report(&report, &dir.join(format!("report-{mode}")))?;
        println!("{mode:<8} {}  -> {}", summary_line(&report), files.samples.display());
        for row in &report.per_sample {
            println!("  {:<8} {:?} acc={} anls={:.3}", row.sample_id, row.prediction, row.accuracy_hit, row.anls);
        }
    }
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
