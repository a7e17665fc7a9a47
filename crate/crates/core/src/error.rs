//! Crate-wide error type.
//!
//! Every failure carries enough context to map it onto a stable CLI exit
//! code (see [`Error::exit_code`]).

use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Pipeline stage names used to tag errors raised during a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Sample,
    Detect,
    Scan,
    Focus,
    Amplify,
    Answer,
    Evaluate,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Sample => "sample",
            Stage::Detect => "detect",
            Stage::Scan => "scan",
            Stage::Focus => "focus",
            Stage::Amplify => "amplify",
            Stage::Answer => "answer",
            Stage::Evaluate => "evaluate",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("source error at {path}: {reason}")]
    Source { path: PathBuf, reason: String },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("video has no frames")]
    EmptyVideo,

    #[error("degenerate region: {0}")]
    DegenerateRegion(String),

    #[error("image encoding failed: {0}")]
    Encoding(String),

    #[error("transport error (status {status:?}): {body}")]
    Transport { status: Option<u16>, body: String },

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("fixture error in `{field}`: {reason}")]
    Fixture { field: String, reason: String },

    #[error("manifest error at line {line}: {reason}")]
    Manifest { line: usize, reason: String },

    #[error("no key regions selected and fallback is disabled")]
    NoKeyRegions,

    #[error("evaluation failed: {0}")]
    Evaluation(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn source_error(path: impl Into<PathBuf>, reason: impl fmt::Display) -> Self {
        Error::Source {
            path: path.into(),
            reason: reason.to_string(),
        }
    }

    pub fn fixture(field: impl Into<String>, reason: impl fmt::Display) -> Self {
        Error::Fixture {
            field: field.into(),
            reason: reason.to_string(),
        }
    }

    /// Wraps `self` with the stage it was raised in. Already-tagged errors
    /// keep their original stage.
    pub fn at(self, stage: Stage) -> Self {
        match self {
            tagged @ Error::Stage { .. } => tagged,
            other => Error::Stage {
                stage,
                source: Box::new(other),
            },
        }
    }

    /// The innermost error, with stage tags peeled off.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    pub fn stage(&self) -> Option<Stage> {
        match self {
            Error::Stage { stage, .. } => Some(*stage),
            _ => None,
        }
    }

    /// Process exit code for this error. Stable; listed in the CLI help.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            Error::Argument(_) | Error::Config(_) => 2,
            Error::Source { .. } => 3,
            Error::EmptyVideo => 4,
            Error::DegenerateRegion(_) | Error::Encoding(_) => 5,
            Error::Transport { .. } | Error::Protocol(_) => 6,
            Error::Fixture { .. } => 7,
            Error::Manifest { .. } => 8,
            Error::NoKeyRegions => 9,
            Error::Evaluation(_) => 10,
            Error::Io(_) => 11,
            Error::Stage { .. } => unreachable!("root() strips stage tags"),
        }
    }
}

/// Exit code table shown in `--help`.
pub const EXIT_CODES: &str = "\
Exit codes:
  0   success
  2   configuration or argument error (e.g. --alpha outside [0.5, 1.0])
  3   frame source error (missing or unreadable frames)
  4   empty video
  5   image error (degenerate region, encoding failure)
  6   backend transport or protocol error
  7   mock fixture error
  8   manifest error
  9   no key regions and fallback disabled
  10  evaluation error (every sample failed)
  11  i/o error";
