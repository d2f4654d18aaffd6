use std::io::Write;

use parallel_thinking::config::ConfigError;
use serde::Serialize;

/// Command-level events, written to standard error next to pipeline progress.
#[derive(Debug, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum CliEvent<'a> {
    RunSkipped {
        problem_id: &'a str,
        rng_seed: u64,
    },
    RunStored {
        problem_id: &'a str,
        rng_seed: u64,
        score: u32,
        total_tokens: u64,
    },
    RunFailed {
        problem_id: &'a str,
        rng_seed: u64,
        error: String,
    },
    Error {
        kind: &'static str,
        #[serde(skip_serializing_if = "Option::is_none")]
        key: Option<String>,
        message: String,
    },
}

pub fn emit(event: &CliEvent<'_>) {
    if let Ok(line) = serde_json::to_string(event) {
        let _ = writeln!(std::io::stderr().lock(), "{line}");
    }
}

/// Why a command stopped: configuration problems exit 2, everything else 1.
#[derive(Debug)]
pub enum Failure {
    Config { key: Option<String>, message: String },
    Run(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Config { .. } => 2,
            Failure::Run(_) => 1,
        }
    }

    pub fn event(&self) -> CliEvent<'static> {
        match self {
            Failure::Config { key, message } => CliEvent::Error {
                kind: "config",
                key: key.clone(),
                message: message.clone(),
            },
            Failure::Run(message) => CliEvent::Error {
                kind: "failure",
                key: None,
                message: message.clone(),
            },
        }
    }

    pub fn config(key: impl Into<String>, message: impl ToString) -> Self {
        Failure::Config {
            key: Some(key.into()),
            message: message.to_string(),
        }
    }

    pub fn run(message: impl ToString) -> Self {
        Failure::Run(message.to_string())
    }
}

impl From<ConfigError> for Failure {
    fn from(err: ConfigError) -> Self {
        Failure::Config {
            key: err.key().map(str::to_owned),
            message: err.to_string(),
        }
    }
}
