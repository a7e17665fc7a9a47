mod common;

use common::*;
use sfa::eval::{evaluate, load_manifest, summary_line, write_report};
use sfa::pipeline::PipelineConfig;
use sfa::trace::RunMode;
use sfa::Error;

/// The pipeline answers "half price" for every sample. Against the golds:
/// "half price" exact (1, 1), "HALF PRICE" case-folded (1, 1),
/// "Half Price." matches once the period is stripped for accuracy but ANLS
/// sees one edit in eleven (1, 10/11), "half prize" is one edit in ten
/// (0, 9/10).
const EXPECTED_ACC: f64 = 75.0;
const EXPECTED_ANLS: f64 = 100.0 * (1.0 + 1.0 + 10.0 / 11.0 + 9.0 / 10.0) / 4.0;

#[test]
fn four_sample_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_eval_manifest(dir.path());
    let samples = load_manifest(&manifest).unwrap();
    let report = evaluate(&samples, &PipelineConfig::default(), &backends(&poster_fixture_json()), RunMode::Sfa).unwrap();
    assert!((report.aggregate.accuracy - EXPECTED_ACC).abs() < 1e-9);
    assert!((report.aggregate.anls - EXPECTED_ANLS).abs() < 1e-9);
    assert_eq!(summary_line(&report), "ACC: 75.00 ANLS: 95.23");
    let hits: Vec<u8> = report.per_sample.iter().map(|r| r.accuracy_hit).collect();
    assert_eq!(hits, vec![1, 1, 1, 0]);
    assert_eq!(report.config.mode, RunMode::Sfa);
    assert_eq!(report.config.target_fps, 1.0);
}

#[test]
fn failed_sample_is_isolated() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_eval_manifest(dir.path());
    add_broken_sample(dir.path(), &manifest);
    let samples = load_manifest(&manifest).unwrap();
    let report = evaluate(&samples, &PipelineConfig::default(), &backends(&poster_fixture_json()), RunMode::Sfa).unwrap();
    assert_eq!(report.per_sample.len(), 5);
    assert_eq!(report.aggregate.evaluated, 4);
    assert_eq!(report.aggregate.errored, 1);
    let broken = &report.per_sample[4];
    assert!(broken.error.as_deref().unwrap().contains("sample"), "{:?}", broken.error);
    assert!((report.aggregate.accuracy - EXPECTED_ACC).abs() < 1e-9);
    assert!((report.aggregate.anls - EXPECTED_ANLS).abs() < 1e-9);

    let out = dir.path().join("report");
    let files = write_report(&report, &out).unwrap();
    assert_eq!(files.traces.len(), 4);
    let csv = std::fs::read_to_string(&files.samples).unwrap();
    assert!(csv.starts_with("sample_id,prediction,gold,acc,anls,fallback,error\n"));
    assert_eq!(csv.lines().count(), 6);
}

#[test]
fn all_failed_is_an_evaluation_error() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_eval_manifest(dir.path());
    let samples = load_manifest(&manifest).unwrap();
    std::fs::remove_dir_all(dir.path().join("frames/poster")).unwrap();
    let err = evaluate(&samples, &PipelineConfig::default(), &backends(&poster_fixture_json()), RunMode::Sfa).unwrap_err();
    assert!(matches!(err, Error::Evaluation(_)), "{err}");
    assert_eq!(err.exit_code(), 10);
}

#[test]
fn baseline_and_sfa_agree_on_full_frame_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_eval_manifest(dir.path());
    let samples = load_manifest(&manifest).unwrap();
    let cfg = PipelineConfig {
        alpha: 1.0,
        ..PipelineConfig::default()
    };
    let fixture = full_frame_fixture_json();
    let a = evaluate(&samples, &cfg, &backends(&fixture), RunMode::Sfa).unwrap();
    let b = evaluate(&samples, &cfg, &backends(&fixture), RunMode::Baseline).unwrap();
    assert_eq!(a.aggregate, b.aggregate);
    assert_eq!(summary_line(&a), summary_line(&b));
}

#[test]
fn sample_concurrency_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_eval_manifest(dir.path());
    let samples = load_manifest(&manifest).unwrap();
    let serial = evaluate(&samples, &PipelineConfig::default(), &backends(&poster_fixture_json()), RunMode::Sfa).unwrap();
    let cfg = PipelineConfig {
        max_samples_in_flight: 4,
        ..PipelineConfig::default()
    };
    let parallel = evaluate(&samples, &cfg, &backends(&poster_fixture_json()), RunMode::Sfa).unwrap();
    assert_eq!(serial.per_sample, parallel.per_sample);
    assert_eq!(serial.traces, parallel.traces);
}
