//! The `sfa` command-line driver.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::cache::ResultCache;
use crate::config::{build_backends, resolve, CliConfigFile, Overrides, ResolvedConfig};
use crate::error::{Error, Result, EXIT_CODES};
use crate::eval::{evaluate, load_manifest, summary_line, write_report};
use crate::media::{encode_image, FrameSource, ImageFormat};
use crate::pipeline::Pipeline;
use crate::scan::scan_frame_with_record;
use crate::trace::{RunMode, RunStats, RunTrace, StageTimings};

#[derive(Debug, Parser)]
#[command(name = "sfa", version, about = "Scan, focus and amplify scene text in video frames before asking a video-language model")]
#[command(after_help = EXIT_CODES)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Answer one question about one frame directory.
    Run(RunArgs),
    /// Evaluate a manifest of samples and write a report.
    Eval(EvalArgs),
    /// Dump the Scan stage's windows for every sampled frame.
    ScanDebug(ScanDebugArgs),
    /// Inspect or clear the result cache.
    Cache {
        #[command(subcommand)]
        action: CacheAction,
    },
}

#[derive(Debug, Subcommand)]
pub enum CacheAction {
    /// Print entry counts per stage.
    Stats(CacheArgs),
    /// Delete all entries.
    Clear(CacheArgs),
}

#[derive(Debug, Args)]
pub struct CacheArgs {
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Initial window size as a fraction of the frame, in [0.5, 1].
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Relevance threshold in [0, 1].
    #[arg(long)]
    pub tau: Option<f64>,
    /// Sampling rate in frames per second.
    #[arg(long)]
    pub fps: Option<f64>,
    /// JSON fixtures for the mock backends (replaces any endpoints).
    #[arg(long)]
    pub mock_fixtures: Option<PathBuf>,
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    #[arg(long)]
    pub max_in_flight: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Frame directory with a `frames.meta` sidecar.
    #[arg(long)]
    pub frames: PathBuf,
    #[arg(long)]
    pub question: String,
    #[arg(long, default_value = "sfa")]
    pub mode: RunMode,
    /// Where to write the trace; defaults to `<report-dir>/trace.json`, or
    /// `<frames>.trace.json` without a report dir.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long)]
    pub report_dir: Option<PathBuf>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value = "sfa")]
    pub mode: RunMode,
    #[arg(long)]
    pub report_dir: PathBuf,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct ScanDebugArgs {
    #[arg(long)]
    pub frames: PathBuf,
    /// Output directory for the per-frame dumps.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write a PNG of every retained candidate region.
    #[arg(long)]
    pub crops: bool,
    #[command(flatten)]
    pub common: CommonArgs,
}

/// What `run` writes next to the printed answer.
#[derive(Debug, Serialize)]
pub struct RunRecord<'a> {
    pub answer: &'a str,
    pub trace: &'a RunTrace,
    pub timing: &'a StageTimings,
    pub stats: &'a RunStats,
}

fn load_config(common: &CommonArgs) -> Result<ResolvedConfig> {
    let file = common.config.as_deref().map(CliConfigFile::load).transpose()?;
    resolve(
        file.as_ref(),
        &Overrides {
            alpha: common.alpha,
            tau: common.tau,
            fps: common.fps,
            max_in_flight: common.max_in_flight,
            cache_dir: common.cache_dir.clone(),
            mock_fixtures: common.mock_fixtures.clone(),
        },
    )
}

fn pipeline_for(common: &CommonArgs) -> Result<Pipeline> {
    let resolved = load_config(common)?;
    let spec = resolved.backends.ok_or_else(|| {
        Error::Config("no backends configured: pass --mock-fixtures or set [endpoints] in --config".into())
    })?;
    Pipeline::new(resolved.pipeline, build_backends(&spec)?)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    let bytes = serde_json::to_vec_pretty(value).map_err(std::io::Error::other)?;
    std::fs::write(path, bytes)?;
    Ok(())
}

fn default_trace_path(frames: &Path) -> PathBuf {
    let mut name = frames
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_else(|| OsString::from("frames"));
    name.push(".trace.json");
    frames.with_file_name(name)
}

fn cmd_run(args: &RunArgs, out: &mut dyn Write) -> Result<()> {
    let pipeline = pipeline_for(&args.common)?;
    let source = FrameSource::open_directory(&args.frames)?;
    let result = pipeline.run(args.mode, &source, &args.question)?;
    writeln!(out, "{}", result.answer)?;
    let trace_path = match (&args.trace, &args.report_dir) {
        (Some(p), _) => p.clone(),
        (None, Some(dir)) => dir.join("trace.json"),
        (None, None) => default_trace_path(&args.frames),
    };
    write_json(
        &trace_path,
        &RunRecord {
            answer: &result.answer,
            trace: &result.trace,
            timing: &result.timing,
            stats: &result.stats,
        },
    )?;
    tracing::info!(path = %trace_path.display(), "trace written");
    Ok(())
}

fn cmd_eval(args: &EvalArgs, out: &mut dyn Write) -> Result<()> {
    let resolved = load_config(&args.common)?;
    // the manifest is checked before any backend is built or called
    let samples = load_manifest(&args.manifest)?;
    let spec = resolved.backends.ok_or_else(|| {
        Error::Config("no backends configured: pass --mock-fixtures or set [endpoints] in --config".into())
    })?;
    let backends = build_backends(&spec)?;
    let report = evaluate(&samples, &resolved.pipeline, &backends, args.mode)?;
    write_report(&report, &args.report_dir)?;
    writeln!(out, "{}", summary_line(&report))?;
    Ok(())
}

fn cmd_scan_debug(args: &ScanDebugArgs, out: &mut dyn Write) -> Result<()> {
    let pipeline = pipeline_for(&args.common)?;
    let alpha = pipeline.config().alpha;
    let source = FrameSource::open_directory(&args.frames)?;
    let frames = pipeline.sample_source(&source)?;
    let detections = pipeline.detect_frames(&frames);
    std::fs::create_dir_all(&args.out)?;
    for (frame, (lines, detection_error)) in frames.iter().zip(detections) {
        if let Some(e) = &detection_error {
            tracing::warn!(frame = frame.frame_index(), error = %e, "detection failed");
        }
        let (regions, record) = scan_frame_with_record(frame, &lines, alpha)?;
        let stem = format!("frame_{:06}", frame.frame_index());
        write_json(&args.out.join(format!("{stem}.json")), &record)?;
        if args.crops {
            for region in &regions {
                let bytes = encode_image(&region.normalized_image, ImageFormat::Png)?;
                std::fs::write(args.out.join(format!("{stem}_{}.png", region.anchor())), bytes)?;
            }
        }
        match &record.discarded {
            Some(why) => writeln!(out, "frame {}: discarded: {why}", frame.frame_index())?,
            None => writeln!(
                out,
                "frame {}: {} windows, {} retained",
                frame.frame_index(),
                record.windows.len(),
                regions.len()
            )?,
        }
    }
    Ok(())
}

fn cache_root(args: &CacheArgs) -> Result<PathBuf> {
    let from_file = args
        .config
        .as_deref()
        .map(CliConfigFile::load)
        .transpose()?
        .and_then(|f| f.cache_dir);
    args.cache_dir
        .clone()
        .or(from_file)
        .ok_or_else(|| Error::Argument("--cache-dir is required".into()))
}

fn cmd_cache(action: &CacheAction, out: &mut dyn Write) -> Result<()> {
    match action {
        CacheAction::Stats(args) => {
            let cache = ResultCache::open(cache_root(args)?)?;
            for (stage, n) in cache.entry_counts()? {
                writeln!(out, "{}: {n}", stage.dir_name())?;
            }
        }
        CacheAction::Clear(args) => {
            let cache = ResultCache::open(cache_root(args)?)?;
            writeln!(out, "removed {} entries", cache.clear()?)?;
        }
    }
    Ok(())
}

pub fn dispatch(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Run(args) => cmd_run(args, out),
        Command::Eval(args) => cmd_eval(args, out),
        Command::ScanDebug(args) => cmd_scan_debug(args, out),
        Command::Cache { action } => cmd_cache(action, out),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn execute<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let _ = if code == 0 { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    match dispatch(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
