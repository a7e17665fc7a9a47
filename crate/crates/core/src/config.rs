//! TOML configuration for the command-line driver.
//!
//! ```toml
//! alpha = 0.6
//! tau = 0.7
//! fps = 1.0
//! fallback = "cascade"
//! max_in_flight = 4
//! cache_dir = "cache"
//! mock_fixtures = "fixtures.json"   # or the three endpoints below
//!
//! [prompts]
//! relevance = "prompts/relevance.txt"
//!
//! [endpoints.scorer]
//! base_url = "http://localhost:8000/v1"
//! model_name = "qwen2-vl-7b"
//! api_key_env = "SCORER_API_KEY"
//! ```
//!
//! Relative paths resolve against the config file's directory. Values given
//! as flags override the file, which overrides the built-in defaults.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;

use crate::amplify::FallbackPolicy;
use crate::backends::{Backends, ChatAnswerer, ChatClient, ChatDetector, ChatScorer, EndpointConfig, MockFixtures};
use crate::error::{Error, Result};
use crate::pipeline::PipelineConfig;
use crate::prompt::PromptTemplate;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptPaths {
    pub relevance: Option<PathBuf>,
    pub answer: Option<PathBuf>,
    pub detection: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointSet {
    pub detector: Option<EndpointConfig>,
    pub scorer: Option<EndpointConfig>,
    pub answerer: Option<EndpointConfig>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CliConfigFile {
    pub alpha: Option<f64>,
    pub tau: Option<f64>,
    pub fps: Option<f64>,
    pub fallback: Option<FallbackPolicy>,
    pub max_in_flight: Option<usize>,
    pub max_samples_in_flight: Option<usize>,
    pub cache_dir: Option<PathBuf>,
    pub mock_fixtures: Option<PathBuf>,
    #[serde(default)]
    pub prompts: PromptPaths,
    #[serde(default)]
    pub endpoints: EndpointSet,
}

impl CliConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Loads a file and resolves its relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut file = Self::parse(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut file.cache_dir,
            &mut file.mock_fixtures,
            &mut file.prompts.relevance,
            &mut file.prompts.answer,
            &mut file.prompts.detection,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(file)
    }
}

/// Values given on the command line; `None` means "not given".
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub alpha: Option<f64>,
    pub tau: Option<f64>,
    pub fps: Option<f64>,
    pub max_in_flight: Option<usize>,
    pub cache_dir: Option<PathBuf>,
    pub mock_fixtures: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BackendSpec {
    Mock(PathBuf),
    Live {
        detector: Box<EndpointConfig>,
        scorer: Box<EndpointConfig>,
        answerer: Box<EndpointConfig>,
        detection_prompt: PromptTemplate,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedConfig {
    pub pipeline: PipelineConfig,
    /// `None` when neither fixtures nor a full endpoint set were given.
    pub backends: Option<BackendSpec>,
}

/// Layers defaults, then the file, then flags, and validates the result.
pub fn resolve(file: Option<&CliConfigFile>, flags: &Overrides) -> Result<ResolvedConfig> {
    let empty = CliConfigFile::default();
    let file = file.unwrap_or(&empty);
    let mut cfg = PipelineConfig::default();

    let pick = |flag: Option<f64>, file: Option<f64>, default: f64| flag.or(file).unwrap_or(default);
    cfg.alpha = pick(flags.alpha, file.alpha, cfg.alpha);
    cfg.tau = pick(flags.tau, file.tau, cfg.tau);
    cfg.target_fps = pick(flags.fps, file.fps, cfg.target_fps);
    cfg.fallback = file.fallback.unwrap_or(cfg.fallback);
    cfg.max_in_flight = flags.max_in_flight.or(file.max_in_flight).unwrap_or(cfg.max_in_flight);
    cfg.max_samples_in_flight = file.max_samples_in_flight.unwrap_or(cfg.max_samples_in_flight);
    cfg.cache_dir = flags.cache_dir.clone().or_else(|| file.cache_dir.clone());
    if let Some(p) = &file.prompts.relevance {
        cfg.relevance_prompt = PromptTemplate::load(p, true)?;
    }
    if let Some(p) = &file.prompts.answer {
        cfg.answer_prompt = PromptTemplate::load(p, true)?;
    }
    cfg.validate()?;

    let backends = match flags.mock_fixtures.clone().or_else(|| file.mock_fixtures.clone()) {
        Some(path) => Some(BackendSpec::Mock(path)),
        None => match &file.endpoints {
            EndpointSet {
                detector: Some(d),
                scorer: Some(s),
                answerer: Some(a),
            } => {
                for e in [d, s, a] {
                    e.validate()?;
                }
                let detection_prompt = match &file.prompts.detection {
                    Some(p) => PromptTemplate::load(p, false)?,
                    None => PromptTemplate::default_detection(),
                };
                Some(BackendSpec::Live {
                    detector: Box::new(d.clone()),
                    scorer: Box::new(s.clone()),
                    answerer: Box::new(a.clone()),
                    detection_prompt,
                })
            }
            EndpointSet {
                detector: None,
                scorer: None,
                answerer: None,
            } => None,
            _ => {
                return Err(Error::Config(
                    "endpoints.detector, endpoints.scorer and endpoints.answerer must all be set".into(),
                ))
            }
        },
    };
    Ok(ResolvedConfig {
        pipeline: cfg,
        backends,
    })
}

pub fn build_backends(spec: &BackendSpec) -> Result<Backends> {
    match spec {
        BackendSpec::Mock(path) => Ok(Backends::from_fixtures(MockFixtures::load(path)?)),
        BackendSpec::Live {
            detector,
            scorer,
            answerer,
            detection_prompt,
        } => {
            let client = |e: &EndpointConfig| ChatClient::new(e.clone()).map(Arc::new);
            Ok(Backends::new(
                Arc::new(ChatDetector::new(client(detector)?, detection_prompt.clone())),
                Arc::new(ChatScorer::new(client(scorer)?)),
                Arc::new(ChatAnswerer::new(client(answerer)?)),
            ))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::{DEFAULT_ALPHA, DEFAULT_FPS, DEFAULT_TAU};

    #[test]
    fn precedence_matrix() {
        // each of alpha, tau, fps set at every combination of file/flag layers
        let file_vals = (0.8, 0.5, 2.0);
        let flag_vals = (0.9, 0.4, 3.0);
        for mask in 0..64u32 {
            let bit = |i: u32| mask & (1 << i) != 0;
            let file = CliConfigFile {
                alpha: bit(0).then_some(file_vals.0),
                tau: bit(1).then_some(file_vals.1),
                fps: bit(2).then_some(file_vals.2),
                ..Default::default()
            };
            let flags = Overrides {
                alpha: bit(3).then_some(flag_vals.0),
                tau: bit(4).then_some(flag_vals.1),
                fps: bit(5).then_some(flag_vals.2),
                ..Default::default()
            };
            let cfg = resolve(Some(&file), &flags).unwrap().pipeline;
            let expect = |flag: bool, fv: f64, file: bool, fil: f64, d: f64| {
                if flag {
                    fv
                } else if file {
                    fil
                } else {
                    d
                }
            };
            assert_eq!(cfg.alpha, expect(bit(3), flag_vals.0, bit(0), file_vals.0, DEFAULT_ALPHA));
            assert_eq!(cfg.tau, expect(bit(4), flag_vals.1, bit(1), file_vals.1, DEFAULT_TAU));
            assert_eq!(cfg.target_fps, expect(bit(5), flag_vals.2, bit(2), file_vals.2, DEFAULT_FPS));
        }
    }

    #[test]
    fn defaults_without_file() {
        let r = resolve(None, &Overrides::default()).unwrap();
        assert_eq!(r.pipeline.alpha, 0.6);
        assert_eq!(r.pipeline.tau, 0.7);
        assert_eq!(r.pipeline.target_fps, 1.0);
        assert_eq!(r.backends, None);
    }

    #[test]
    fn out_of_range_is_config_error() {
        let flags = Overrides {
            alpha: Some(0.3),
            ..Default::default()
        };
        assert!(matches!(resolve(None, &flags), Err(Error::Config(_))));
        let file = CliConfigFile {
            tau: Some(1.5),
            ..Default::default()
        };
        assert!(matches!(resolve(Some(&file), &Overrides::default()), Err(Error::Config(_))));
    }

    #[test]
    fn parses_full_file_and_resolves_paths() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sfa.toml");
        std::fs::write(
            &path,
            r#"
alpha = 0.75
fallback = "disabled"
cache_dir = "cache"
[endpoints.detector]
base_url = "http://localhost:1/v1"
model_name = "det"
[endpoints.scorer]
base_url = "http://localhost:1/v1"
model_name = "sc"
api_key_env = "SC_KEY"
[endpoints.answerer]
base_url = "http://localhost:1/v1"
model_name = "ans"
"#,
        )
        .unwrap();
        let file = CliConfigFile::load(&path).unwrap();
        assert_eq!(file.cache_dir, Some(dir.path().join("cache")));
        let r = resolve(Some(&file), &Overrides::default()).unwrap();
        assert_eq!(r.pipeline.alpha, 0.75);
        assert_eq!(r.pipeline.fallback, FallbackPolicy::Disabled);
        match r.backends {
            Some(BackendSpec::Live { scorer, .. }) => {
                assert_eq!(scorer.api_key_env.as_deref(), Some("SC_KEY"))
            }
            other => panic!("{other:?}"),
        }
        // a mock flag wins over the endpoints
        let flags = Overrides {
            mock_fixtures: Some("m.json".into()),
            ..Default::default()
        };
        assert_eq!(
            resolve(Some(&file), &flags).unwrap().backends,
            Some(BackendSpec::Mock("m.json".into()))
        );
    }

    #[test]
    fn partial_endpoints_and_unknown_keys_rejected() {
        let file = CliConfigFile::parse("[endpoints.scorer]\nbase_url = \"http://x/v1\"\nmodel_name = \"m\"\n").unwrap();
        assert!(matches!(resolve(Some(&file), &Overrides::default()), Err(Error::Config(_))));
        assert!(CliConfigFile::parse("alpah = 0.6").is_err());
    }
}
