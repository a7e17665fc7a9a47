//! Report files written by batch evaluation.

use std::fs;
use std::path::{Path, PathBuf};

use super::EvalReport;
use crate::error::{Error, Result};

pub const SUMMARY_FILE: &str = "summary.json";
pub const SAMPLES_FILE: &str = "samples.csv";
pub const TRACES_DIR: &str = "traces";

#[derive(Debug, Clone, PartialEq)]
pub struct ReportFiles {
    pub summary: PathBuf,
    pub samples: PathBuf,
    pub traces: Vec<PathBuf>,
}

/// `ACC: 75.00 ANLS: 97.50`
pub fn summary_line(report: &EvalReport) -> String {
    format!(
        "ACC: {:.2} ANLS: {:.2}",
        report.aggregate.accuracy, report.aggregate.anls
    )
}

fn trace_file_name(sample_id: &str) -> String {
    let safe: String = sample_id
        .chars()
        .map(|c| if c.is_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' })
        .collect();
    format!("{safe}.json")
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<Vec<u8>> {
    serde_json::to_vec_pretty(value).map_err(|e| Error::Evaluation(format!("cannot serialize report: {e}")))
}

/// Writes `summary.json`, `samples.csv` and one trace per evaluated sample
/// under `dir`.
pub fn write_report(report: &EvalReport, dir: &Path) -> Result<ReportFiles> {
    fs::create_dir_all(dir.join(TRACES_DIR))?;

    let summary = dir.join(SUMMARY_FILE);
    fs::write(&summary, to_json(report)?)?;

    let samples = dir.join(SAMPLES_FILE);
    let mut w = csv::Writer::from_path(&samples).map_err(|e| Error::Io(e.into()))?;
    let csv_err = |e: csv::Error| Error::Io(e.into());
    w.write_record(["sample_id", "prediction", "gold", "acc", "anls", "fallback", "error"])
        .map_err(csv_err)?;
    for row in &report.per_sample {
        w.write_record([
            row.sample_id.as_str(),
            row.prediction.as_deref().unwrap_or(""),
            &row.gold_answers.join(" | "),
            &row.accuracy_hit.to_string(),
            &format!("{:.4}", row.anls),
            if row.fallback_used { "1" } else { "0" },
            row.error.as_deref().unwrap_or(""),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;

    let mut traces = Vec::new();
    for (row, trace) in report.per_sample.iter().zip(&report.traces) {
        if let Some(trace) = trace {
            let path = dir.join(TRACES_DIR).join(trace_file_name(&row.sample_id));
            fs::write(&path, to_json(trace)?)?;
            traces.push(path);
        }
    }
    Ok(ReportFiles {
        summary,
        samples,
        traces,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{Aggregate, SampleRow};
    use crate::pipeline::PipelineConfig;
    use crate::trace::RunMode;

    #[test]
    fn writes_csv_and_summary() {
        let rows = vec![
            SampleRow {
                sample_id: "a/1".into(),
                question: "q".into(),
                prediction: Some("half, price".into()),
                gold_answers: vec!["half price".into(), "50%".into()],
                accuracy_hit: 0,
                anls: 0.9,
                fallback_used: true,
                error: None,
            },
            SampleRow {
                sample_id: "b".into(),
                question: "q".into(),
                prediction: None,
                gold_answers: vec!["x".into()],
                accuracy_hit: 0,
                anls: 0.0,
                fallback_used: false,
                error: Some("source error".into()),
            },
        ];
        let report = EvalReport {
            config: PipelineConfig::default().snapshot(RunMode::Sfa),
            aggregate: Aggregate::from_rows(&rows),
            per_sample: rows,
            traces: vec![None, None],
        };
        assert_eq!(summary_line(&report), "ACC: 0.00 ANLS: 90.00");
        let dir = tempfile::tempdir().unwrap();
        let files = write_report(&report, dir.path()).unwrap();
        let mut r = csv::Reader::from_path(&files.samples).unwrap();
        let header: Vec<String> = r.headers().unwrap().iter().map(String::from).collect();
        assert_eq!(header, ["sample_id", "prediction", "gold", "acc", "anls", "fallback", "error"]);
        let recs: Vec<csv::StringRecord> = r.records().map(|x| x.unwrap()).collect();
        assert_eq!(&recs[0][1], "half, price");
        assert_eq!(&recs[0][5], "1");
        assert_eq!(&recs[1][6], "source error");
        let summary: serde_json::Value = serde_json::from_slice(&fs::read(&files.summary).unwrap()).unwrap();
        assert_eq!(summary["config"]["mode"], "sfa");
        assert_eq!(summary["aggregate"]["errored"], 1);
        assert_eq!(trace_file_name("a/1"), "a_1.json");
    }
}
