//! The JSON run configuration: pipeline, backend, simulator, judge and sweep
//! sections. Secrets come from environment variables named in the file.

use std::fmt;
use std::path::{Path, PathBuf};
#[cfg(feature = "http")]
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[cfg(feature = "http")]
use crate::backends::http::{HttpBackend, HttpConfig};
use crate::backends::replay::ReplayBackend;
use crate::backends::simulator::{SimulatorBackend, SimulatorParams};
#[cfg(feature = "http")]
use crate::backends::RetryPolicy;
use crate::backends::Backend;
use crate::domain::PipelineConfig;
use crate::judge::{JudgeConfig, LatentJudge, SolutionJudge};
use crate::store::RunStore;
use crate::sweep::SweepSpec;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {key}: {message}", path.display())]
    Parse {
        path: PathBuf,
        key: String,
        message: String,
    },
    #[error("{key}: {message}")]
    Invalid { key: String, message: String },
}

impl ConfigError {
    pub fn invalid(key: impl Into<String>, message: impl fmt::Display) -> Self {
        ConfigError::Invalid {
            key: key.into(),
            message: message.to_string(),
        }
    }

    /// Dotted path of the offending key, when known.
    pub fn key(&self) -> Option<&str> {
        match self {
            ConfigError::Io { .. } => None,
            ConfigError::Parse { key, .. } | ConfigError::Invalid { key, .. } => Some(key),
        }
    }
}

/// Parses a JSON file, reporting the dotted key path of any error.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_json(&text).map_err(|(key, message)| ConfigError::Parse {
        path: path.to_owned(),
        key,
        message,
    })
}

fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T, (String, String)> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|err| {
        let key = err.path().to_string();
        let key = if key == "." { "<root>".to_owned() } else { key };
        (key, err.into_inner().to_string())
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineSection {
    pub threads: u32,
    pub max_rounds: u32,
    pub verdicts: u32,
    pub max_generation_tokens: u64,
    pub max_verification_tokens: u64,
    pub temperature: f64,
    pub concurrency_cap: u32,
    pub rng_seed: u64,
}

impl Default for PipelineSection {
    fn default() -> Self {
        let d = PipelineConfig::default();
        PipelineSection {
            threads: d.threads,
            max_rounds: d.max_rounds,
            verdicts: d.verdicts,
            max_generation_tokens: d.max_generation_tokens,
            max_verification_tokens: d.max_verification_tokens,
            temperature: d.temperature,
            concurrency_cap: d.concurrency_cap,
            rng_seed: d.rng_seed,
        }
    }
}

impl PipelineSection {
    pub fn to_config(&self) -> PipelineConfig {
        PipelineConfig {
            threads: self.threads,
            max_rounds: self.max_rounds,
            verdicts: self.verdicts,
            max_generation_tokens: self.max_generation_tokens,
            max_verification_tokens: self.max_verification_tokens,
            temperature: self.temperature,
            concurrency_cap: self.concurrency_cap,
            rng_seed: self.rng_seed,
            ..PipelineConfig::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    Simulator,
    Http,
    Replay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrySection {
    pub attempts: u32,
    pub initial_backoff_ms: u64,
}

impl Default for RetrySection {
    fn default() -> Self {
        RetrySection {
            attempts: 3,
            initial_backoff_ms: 1_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendSection {
    pub kind: BackendKind,
    pub url: Option<String>,
    pub model: Option<String>,
    /// Name of the environment variable holding the API key.
    pub api_key_env: Option<String>,
    pub retry: RetrySection,
    pub timeout_ms: u64,
    /// Run store to replay from; relative paths resolve against the config file.
    pub replay_store: Option<PathBuf>,
}

impl Default for BackendSection {
    fn default() -> Self {
        BackendSection {
            kind: BackendKind::Simulator,
            url: None,
            model: None,
            api_key_env: None,
            retry: RetrySection::default(),
            timeout_ms: 600_000,
            replay_store: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JudgeKind {
    #[default]
    None,
    /// Reads the simulator's latent correctness instead of executing code.
    Latent,
    Execution,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JudgeSection {
    pub kind: JudgeKind,
    pub execution: JudgeConfig,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub pipeline: PipelineSection,
    pub backend: BackendSection,
    pub simulator: SimulatorParams,
    pub judge: JudgeSection,
    pub sweep: Option<SweepSpec>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let mut config: RunConfig = read_json(path)?;
        config.base_dir = path.parent().map(Path::to_owned).unwrap_or_default();
        config.validate()?;
        Ok(config)
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let config: RunConfig = parse_json(text).map_err(|(key, message)| ConfigError::Parse {
            path: PathBuf::from("<inline>"),
            key,
            message,
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn pipeline_config(&self) -> PipelineConfig {
        self.pipeline.to_config()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        use crate::domain::DomainError;
        match self.pipeline_config().validate() {
            Err(DomainError::Validation { field, reason }) => {
                return Err(ConfigError::invalid(field, reason))
            }
            Err(other) => return Err(ConfigError::invalid("pipeline", other)),
            Ok(()) => {}
        }
        let backend = &self.backend;
        match backend.kind {
            BackendKind::Simulator => {
                self.simulator
                    .validate()
                    .map_err(|msg| match msg.split_once(": ") {
                        Some((key, rest)) => ConfigError::invalid(key, rest),
                        None => ConfigError::invalid("simulator", msg),
                    })?;
            }
            BackendKind::Http => {
                if backend.url.as_deref().is_none_or(str::is_empty) {
                    return Err(ConfigError::invalid(
                        "backend.url",
                        "required when backend.kind is \"http\"",
                    ));
                }
                if backend.model.as_deref().is_none_or(str::is_empty) {
                    return Err(ConfigError::invalid(
                        "backend.model",
                        "required when backend.kind is \"http\"",
                    ));
                }
                if backend.retry.attempts == 0 {
                    return Err(ConfigError::invalid("backend.retry.attempts", "must be >= 1"));
                }
                if backend.timeout_ms == 0 {
                    return Err(ConfigError::invalid("backend.timeout_ms", "must be >= 1"));
                }
            }
            BackendKind::Replay => {
                if backend.replay_store.is_none() {
                    return Err(ConfigError::invalid(
                        "backend.replay_store",
                        "required when backend.kind is \"replay\"",
                    ));
                }
            }
        }
        if self.judge.kind == JudgeKind::Execution {
            let exec = &self.judge.execution;
            if exec.max_parallel == 0 {
                return Err(ConfigError::invalid("judge.execution.max_parallel", "must be >= 1"));
            }
            exec.profile(&exec.toolchain)
                .map_err(|e| ConfigError::invalid("judge.execution.toolchain", e))?;
        }
        if let Some(sweep) = &self.sweep {
            sweep.validate("sweep")?;
        }
        Ok(())
    }

    fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_owned()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn build_backend(&self) -> Result<Box<dyn Backend>, ConfigError> {
        match self.backend.kind {
            BackendKind::Simulator => Ok(Box::new(
                SimulatorBackend::new(self.simulator.clone())
                    .map_err(|e| ConfigError::invalid("simulator", e))?,
            )),
            BackendKind::Http => self.build_http(),
            BackendKind::Replay => {
                let path = self.resolve(
                    self.backend
                        .replay_store
                        .as_deref()
                        .expect("validated replay_store"),
                );
                let runs = RunStore::new(&path)
                    .load()
                    .map_err(|e| ConfigError::invalid("backend.replay_store", e))?;
                Ok(Box::new(ReplayBackend::new(&runs)))
            }
        }
    }

    #[cfg(feature = "http")]
    fn build_http(&self) -> Result<Box<dyn Backend>, ConfigError> {
        let b = &self.backend;
        let api_key = match &b.api_key_env {
            None => None,
            Some(var) => Some(std::env::var(var).map_err(|_| {
                ConfigError::invalid(
                    "backend.api_key_env",
                    format!("environment variable {var} is not set"),
                )
            })?),
        };
        Ok(Box::new(HttpBackend::new(HttpConfig {
            url: b.url.clone().expect("validated url"),
            model: b.model.clone().expect("validated model"),
            api_key,
            retry: RetryPolicy {
                attempts: b.retry.attempts,
                initial_backoff: Duration::from_millis(b.retry.initial_backoff_ms),
            },
            timeout: Duration::from_millis(b.timeout_ms),
        })))
    }

    #[cfg(not(feature = "http"))]
    fn build_http(&self) -> Result<Box<dyn Backend>, ConfigError> {
        Err(ConfigError::invalid(
            "backend.kind",
            "built without the `http` feature",
        ))
    }

    pub fn build_judge(&self) -> Result<Option<Box<dyn SolutionJudge>>, ConfigError> {
        match self.judge.kind {
            JudgeKind::None => Ok(None),
            JudgeKind::Latent => Ok(Some(Box::new(LatentJudge))),
            JudgeKind::Execution => self.build_execution_judge().map(Some),
        }
    }

    #[cfg(feature = "exec")]
    fn build_execution_judge(&self) -> Result<Box<dyn SolutionJudge>, ConfigError> {
        let judge = crate::judge::ExecutionJudge::new(self.judge.execution.clone())
            .map_err(|e| ConfigError::invalid("judge.execution", e))?;
        Ok(Box::new(judge))
    }

    #[cfg(not(feature = "exec"))]
    fn build_execution_judge(&self) -> Result<Box<dyn SolutionJudge>, ConfigError> {
        Err(ConfigError::invalid("judge.kind", "built without the `exec` feature"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_a_simulator_config() {
        let config = RunConfig::from_json("{}").unwrap();
        assert_eq!(config.backend.kind, BackendKind::Simulator);
        assert_eq!(config.pipeline_config(), PipelineConfig::default());
    }

    #[test]
    fn http_without_url_names_the_key() {
        let err = RunConfig::from_json(r#"{"backend": {"kind": "http", "model": "m"}}"#).unwrap_err();
        assert_eq!(err.key(), Some("backend.url"));
    }

    #[test]
    fn unknown_key_is_reported_with_its_path() {
        let err = RunConfig::from_json(r#"{"pipeline": {"thread": 4}}"#).unwrap_err();
        assert_eq!(err.key(), Some("pipeline.thread"));
        assert!(err.to_string().contains("thread"));
        let err = RunConfig::from_json(r#"{"pipeline": {"threads": "four"}}"#).unwrap_err();
        assert_eq!(err.key(), Some("pipeline.threads"));
    }

    #[test]
    fn invalid_values_name_their_key() {
        let err = RunConfig::from_json(r#"{"pipeline": {"verdicts": 0}}"#).unwrap_err();
        assert_eq!(err.key(), Some("pipeline.verdicts"));
        let err = RunConfig::from_json(r#"{"simulator": {"verifier_tnr": 1.5}}"#).unwrap_err();
        assert_eq!(err.key(), Some("simulator.verifier_tnr"));
        let err = RunConfig::from_json(r#"{"backend": {"kind": "replay"}}"#).unwrap_err();
        assert_eq!(err.key(), Some("backend.replay_store"));
    }

    #[cfg(feature = "http")]
    #[test]
    fn missing_secret_names_the_env_key() {
        let config = RunConfig::from_json(
            r#"{"backend": {"kind": "http", "url": "http://127.0.0.1:9", "model": "m",
                "api_key_env": "PT_TEST_SURELY_UNSET_KEY"}}"#,
        )
        .unwrap();
        let err = config.build_backend().err().unwrap();
        assert_eq!(err.key(), Some("backend.api_key_env"));
    }

    #[test]
    fn latent_judge_builds() {
        let config = RunConfig::from_json(r#"{"judge": {"kind": "latent"}}"#).unwrap();
        assert!(config.build_judge().unwrap().is_some());
    }
}
