//! Execution judging: the binary reward of a candidate program.
//!
//! [`ExecutionJudge`] compiles and runs candidates as subprocesses inside a
//! scratch directory with a wall-clock timeout and, on Unix, an address-space
//! cap. This is not a security boundary; run it only on trusted or disposable
//! hosts. [`LatentJudge`] is the stub used with the simulator backend: it
//! reads the candidate's latent bit instead of executing anything.

#[cfg(feature = "exec")]
mod sandbox;
#[cfg(feature = "exec")]
pub mod toolchain;

use std::collections::BTreeMap;
#[cfg(feature = "exec")]
use std::sync::{Condvar, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    Candidate, CompareMode, ExecReport, ExecStatus, Latent, Problem, TestOutcome,
};

#[cfg(feature = "exec")]
pub use toolchain::{compile, run_test, Artifact, CompileOutcome, Limits, TestRun};

#[derive(Debug, Error)]
pub enum JudgeError {
    /// The host could not run the judge; never charged to the candidate.
    #[error("judge environment error: {0}")]
    Environment(String),
    #[error("unknown toolchain profile {0:?}")]
    UnknownToolchain(String),
}

pub trait SolutionJudge: Send + Sync {
    fn judge_solution(&self, problem: &Problem, candidate: &Candidate)
        -> Result<ExecReport, JudgeError>;
}

/// Compile and run commands for one language.
///
/// Placeholders: `{src}` (source path), `{bin}` (artifact path), `{input}`
/// (path of the current test's input file; stdin is always fed as well).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToolchainProfile {
    #[serde(default)]
    pub compile_cmd: Option<String>,
    pub run_cmd: String,
    #[serde(default = "default_source_file")]
    pub source_file: String,
    #[serde(default = "default_true")]
    pub enforce_memory_limit: bool,
}

fn default_source_file() -> String {
    "main.cpp".to_owned()
}

fn default_true() -> bool {
    true
}

impl ToolchainProfile {
    pub fn cpp() -> Self {
        ToolchainProfile {
            compile_cmd: Some("g++ -O2 -std=c++17 -o {bin} {src}".to_owned()),
            run_cmd: "{bin}".to_owned(),
            source_file: "main.cpp".to_owned(),
            enforce_memory_limit: true,
        }
    }

    pub fn python3() -> Self {
        ToolchainProfile {
            compile_cmd: Some("python3 -m py_compile {src}".to_owned()),
            run_cmd: "python3 {src}".to_owned(),
            source_file: "main.py".to_owned(),
            enforce_memory_limit: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JudgeConfig {
    #[serde(default = "default_toolchain")]
    pub toolchain: String,
    #[serde(default)]
    pub toolchains: BTreeMap<String, ToolchainProfile>,
    #[serde(default = "default_max_parallel")]
    pub max_parallel: usize,
    /// Extra wall-clock allowance before a running test is killed.
    #[serde(default = "default_slack_ms")]
    pub time_slack_ms: u64,
    #[serde(default = "default_compile_timeout_ms")]
    pub compile_timeout_ms: u64,
}

fn default_toolchain() -> String {
    "cpp".to_owned()
}

fn default_max_parallel() -> usize {
    4
}

fn default_slack_ms() -> u64 {
    50
}

fn default_compile_timeout_ms() -> u64 {
    60_000
}

impl Default for JudgeConfig {
    fn default() -> Self {
        JudgeConfig {
            toolchain: default_toolchain(),
            toolchains: BTreeMap::new(),
            max_parallel: default_max_parallel(),
            time_slack_ms: default_slack_ms(),
            compile_timeout_ms: default_compile_timeout_ms(),
        }
    }
}

impl JudgeConfig {
    /// Looks up a profile, falling back to the built-in `cpp` and `python3`.
    pub fn profile(&self, name: &str) -> Result<ToolchainProfile, JudgeError> {
        if let Some(profile) = self.toolchains.get(name) {
            return Ok(profile.clone());
        }
        match name {
            "cpp" => Ok(ToolchainProfile::cpp()),
            "python3" => Ok(ToolchainProfile::python3()),
            _ => Err(JudgeError::UnknownToolchain(name.to_owned())),
        }
    }
}

/// Compares program output with the expected output.
pub fn outputs_match(mode: CompareMode, actual: &[u8], expected: &[u8]) -> bool {
    match mode {
        CompareMode::Exact => actual == expected,
        CompareMode::TokenNormalized => tokens(actual).eq(tokens(expected)),
    }
}

fn tokens(bytes: &[u8]) -> impl Iterator<Item = &[u8]> {
    bytes
        .split(|b| b.is_ascii_whitespace())
        .filter(|token| !token.is_empty())
}

/// Counting semaphore bounding concurrent executions.
#[cfg(feature = "exec")]
#[derive(Debug)]
pub(crate) struct Semaphore {
    available: Mutex<usize>,
    freed: Condvar,
}

#[cfg(feature = "exec")]
pub(crate) struct Permit<'a>(&'a Semaphore);

#[cfg(feature = "exec")]
impl Semaphore {
    pub(crate) fn new(permits: usize) -> Self {
        Semaphore {
            available: Mutex::new(permits.max(1)),
            freed: Condvar::new(),
        }
    }

    pub(crate) fn acquire(&self) -> Permit<'_> {
        let mut available = self.available.lock().expect("semaphore poisoned");
        while *available == 0 {
            available = self.freed.wait(available).expect("semaphore poisoned");
        }
        *available -= 1;
        Permit(self)
    }
}

#[cfg(feature = "exec")]
impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.available.lock().expect("semaphore poisoned") += 1;
        self.0.freed.notify_one();
    }
}

/// Assembles a report from the tests executed so far (early exit on failure).
pub(crate) fn report_from_outcomes(per_test: Vec<TestOutcome>, total: u32) -> ExecReport {
    let passed = per_test
        .iter()
        .take_while(|t| t.status == ExecStatus::Accepted)
        .count() as u32;
    let status = per_test
        .iter()
        .map(|t| t.status)
        .find(|s| *s != ExecStatus::Accepted)
        .unwrap_or(ExecStatus::Accepted);
    let binary_score = u8::from(status == ExecStatus::Accepted && passed == total);
    ExecReport {
        status,
        passed,
        total,
        binary_score,
        per_test,
    }
}

/// Judge stub for simulated candidates: accepted iff the latent bit is set.
#[derive(Debug, Default, Clone, Copy)]
pub struct LatentJudge;

impl SolutionJudge for LatentJudge {
    fn judge_solution(
        &self,
        problem: &Problem,
        candidate: &Candidate,
    ) -> Result<ExecReport, JudgeError> {
        let total = problem.tests.len() as u32;
        if candidate.truncated {
            return Ok(ExecReport::rejected(ExecStatus::TruncatedInput, total));
        }
        let correct = candidate
            .latent
            .map(Latent::is_correct)
            .ok_or_else(|| JudgeError::Environment("candidate has no latent label".into()))?;
        let per_test = if correct {
            vec![
                TestOutcome {
                    status: ExecStatus::Accepted,
                    wall_time_ms: 0
                };
                total as usize
            ]
        } else {
            vec![TestOutcome {
                status: ExecStatus::WrongAnswer,
                wall_time_ms: 0,
            }]
        };
        Ok(report_from_outcomes(per_test, total))
    }
}

#[cfg(feature = "exec")]
pub use exec_judge::ExecutionJudge;

#[cfg(feature = "exec")]
mod exec_judge {
    use super::*;

    pub struct ExecutionJudge {
        profile: ToolchainProfile,
        config: JudgeConfig,
        permits: Semaphore,
    }

    impl ExecutionJudge {
        pub fn new(config: JudgeConfig) -> Result<Self, JudgeError> {
            let profile = config.profile(&config.toolchain)?;
            Ok(ExecutionJudge {
                profile,
                permits: Semaphore::new(config.max_parallel),
                config,
            })
        }

        pub fn profile(&self) -> &ToolchainProfile {
            &self.profile
        }
    }

    impl SolutionJudge for ExecutionJudge {
        fn judge_solution(
            &self,
            problem: &Problem,
            candidate: &Candidate,
        ) -> Result<ExecReport, JudgeError> {
            let total = problem.tests.len() as u32;
            if candidate.truncated {
                return Ok(ExecReport::rejected(ExecStatus::TruncatedInput, total));
            }
            let _permit = self.permits.acquire();
            let scratch = tempfile::Builder::new()
                .prefix("judge-")
                .tempdir()
                .map_err(|e| JudgeError::Environment(format!("scratch directory: {e}")))?;
            let artifact = match compile(
                &candidate.source_code,
                &self.profile,
                scratch.path(),
                self.config.compile_timeout_ms,
            )? {
                CompileOutcome::Compiled(artifact) => artifact,
                CompileOutcome::Failed { diagnostics } => {
                    log::debug!("compile error for {}: {diagnostics}", problem.id);
                    return Ok(ExecReport::rejected(ExecStatus::CompileError, total));
                }
            };
            let limits = Limits {
                time_limit_ms: problem.time_limit_ms,
                memory_limit_mib: problem.memory_limit_mib,
                slack_ms: self.config.time_slack_ms,
            };
            let mut per_test = Vec::new();
            for test in &problem.tests {
                let run = run_test(&artifact, test, &limits, problem.compare_mode)?;
                per_test.push(TestOutcome {
                    status: run.status,
                    wall_time_ms: run.wall_time_ms,
                });
                if run.status != ExecStatus::Accepted {
                    break;
                }
            }
            Ok(report_from_outcomes(per_test, total))
        }
    }
}
