//! Batch evaluation over a manifest of question/answer samples.

mod manifest;
mod metrics;
mod report;

pub use manifest::{load_manifest, parse_manifest, QaSample};
pub use metrics::{
    accuracy_match, anls_score, levenshtein, normalize_answer, normalized_levenshtein,
    ANLS_THRESHOLD,
};
pub use report::{summary_line, write_report, ReportFiles};

use serde::{Deserialize, Serialize};

use crate::backends::Backends;
use crate::error::{Error, Result};
use crate::parallel::ordered_map;
use crate::pipeline::{Pipeline, PipelineConfig};
use crate::trace::{ConfigSnapshot, RunMode, RunTrace};

/// One evaluated sample. Errored samples carry `error` and are excluded
/// from the aggregate metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    pub sample_id: String,
    pub question: String,
    pub prediction: Option<String>,
    pub gold_answers: Vec<String>,
    pub accuracy_hit: u8,
    pub anls: f64,
    pub fallback_used: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    /// Mean accuracy over evaluated samples, in percent.
    pub accuracy: f64,
    /// Mean ANLS over evaluated samples, in percent.
    pub anls: f64,
    pub evaluated: usize,
    pub errored: usize,
}

impl Aggregate {
    pub fn from_rows(rows: &[SampleRow]) -> Self {
        let ok: Vec<&SampleRow> = rows.iter().filter(|r| r.error.is_none()).collect();
        let n = ok.len();
        let mean = |f: &dyn Fn(&SampleRow) -> f64| {
            if n == 0 {
                0.0
            } else {
                100.0 * ok.iter().map(|r| f(r)).sum::<f64>() / n as f64
            }
        };
        Self {
            accuracy: mean(&|r| f64::from(r.accuracy_hit)),
            anls: mean(&|r| r.anls),
            evaluated: n,
            errored: rows.len() - n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: ConfigSnapshot,
    pub aggregate: Aggregate,
    pub per_sample: Vec<SampleRow>,
    /// Per-sample traces, parallel to `per_sample`; `None` for errored samples.
    #[serde(skip)]
    pub traces: Vec<Option<RunTrace>>,
}

fn evaluate_one(pipeline: &Pipeline, mode: RunMode, sample: &QaSample) -> (SampleRow, Option<RunTrace>) {
    let mut row = SampleRow {
        sample_id: sample.sample_id.clone(),
        question: sample.question.clone(),
        prediction: None,
        gold_answers: sample.gold_answers.clone(),
        accuracy_hit: 0,
        anls: 0.0,
        fallback_used: false,
        error: None,
    };
    let scored = pipeline
        .run(mode, &sample.frames, &sample.question)
        .and_then(|result| {
            let hit = accuracy_match(&result.answer, &sample.gold_answers)?;
            let anls = anls_score(&result.answer, &sample.gold_answers, ANLS_THRESHOLD)?;
            Ok((result, hit, anls))
        });
    match scored {
        Ok((result, hit, anls)) => {
            row.accuracy_hit = hit;
            row.anls = anls;
            row.fallback_used = result.refined.fallback_used;
            row.prediction = Some(result.answer);
            (row, Some(result.trace))
        }
        Err(e) => {
            tracing::warn!(sample = %sample.sample_id, error = %e, "sample failed");
            row.error = Some(e.to_string());
            (row, None)
        }
    }
}

/// Runs every sample, isolating per-sample failures. Fails only when the
/// configuration is invalid or no sample could be evaluated.
pub fn evaluate(
    samples: &[QaSample],
    config: &PipelineConfig,
    backends: &Backends,
    mode: RunMode,
) -> Result<EvalReport> {
    if samples.is_empty() {
        return Err(Error::Evaluation("no samples to evaluate".into()));
    }
    let pipeline = Pipeline::new(config.clone(), backends.clone())?;
    let (per_sample, traces): (Vec<_>, Vec<_>) = ordered_map(samples, config.max_samples_in_flight, |s| {
        evaluate_one(&pipeline, mode, s)
    })
    .into_iter()
    .unzip();
    let aggregate = Aggregate::from_rows(&per_sample);
    if aggregate.evaluated == 0 {
        let first = per_sample[0].error.clone().unwrap_or_default();
        return Err(Error::Evaluation(format!(
            "all {} samples failed; first error: {first}",
            per_sample.len()
        )));
    }
    Ok(EvalReport {
        config: config.snapshot(mode),
        aggregate,
        per_sample,
        traces,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(hit: u8, anls: f64, error: bool) -> SampleRow {
        SampleRow {
            sample_id: "s".into(),
            question: "q".into(),
            prediction: Some("p".into()),
            gold_answers: vec!["g".into()],
            accuracy_hit: hit,
            anls,
            fallback_used: false,
            error: error.then(|| "boom".to_string()),
        }
    }

    #[test]
    fn aggregate_skips_errored_rows() {
        let rows = vec![row(1, 1.0, false), row(0, 0.5, false), row(0, 0.0, true)];
        let a = Aggregate::from_rows(&rows);
        assert_eq!(a.evaluated, 2);
        assert_eq!(a.errored, 1);
        assert!((a.accuracy - 50.0).abs() < 1e-12);
        assert!((a.anls - 75.0).abs() < 1e-12);
    }
}
