//! Model-call contract shared by every backend.
//!
//! A backend turns a problem (and, for verify/refine, a prior candidate) into a
//! [`Candidate`] or [`Verdict`]. Three implementations ship: a chat-completion
//! HTTP client, a seeded simulator, and a replay backend that serves logged
//! runs back verbatim.

#[cfg(feature = "http")]
pub mod http;
pub mod prompts;
pub mod replay;
pub mod simulator;
pub mod verdict;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Candidate, Problem, SolutionRole, Verdict};
use crate::seed;

pub use prompts::render_prompt;
pub use verdict::parse_verdict;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CallRole {
    Generation,
    Verification,
    Refinement,
}

impl CallRole {
    fn tag(self) -> u64 {
        match self {
            CallRole::Generation => seed::tag::GENERATION,
            CallRole::Verification => seed::tag::VERIFICATION,
            CallRole::Refinement => seed::tag::REFINEMENT,
        }
    }
}

impl From<SolutionRole> for CallRole {
    fn from(role: SolutionRole) -> Self {
        match role {
            SolutionRole::Generation => CallRole::Generation,
            SolutionRole::Refinement => CallRole::Refinement,
        }
    }
}

/// Coordinates of one model call inside a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CallSite {
    pub run_seed: u64,
    pub thread_index: u32,
    pub round_index: u32,
    pub role: CallRole,
    /// 0-based; `None` for generation and refinement calls.
    pub verdict_index: Option<u32>,
    pub max_tokens: u64,
    pub temperature: f64,
}

impl CallSite {
    /// hash(run_seed, thread, round, role, verdict_index)
    pub fn seed(&self) -> u64 {
        seed::derive(&[
            self.run_seed,
            self.thread_index as u64,
            self.round_index as u64,
            self.role.tag(),
            self.verdict_index.map_or(u64::MAX, u64::from),
        ])
    }
}

/// What goes over the wire for one call.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BackendRequest {
    pub role: CallRole,
    pub rendered_prompt: String,
    pub max_tokens: u64,
    pub temperature: f64,
    pub call_seed: u64,
}

impl BackendRequest {
    pub fn new(site: &CallSite, rendered_prompt: String) -> Result<Self, BackendError> {
        if rendered_prompt.is_empty() {
            return Err(BackendError::Contract("rendered prompt is empty".into()));
        }
        Ok(BackendRequest {
            role: site.role,
            rendered_prompt,
            max_tokens: site.max_tokens,
            temperature: site.temperature,
            call_seed: site.seed(),
        })
    }
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("unexpected response: {0}")]
    Protocol(String),
    #[error("backend contract violated: {0}")]
    Contract(String),
    #[error("replay log has no entry for {0}")]
    ReplayMiss(String),
}

/// Retry schedule for transport failures: `attempts` tries in total, sleeping
/// `initial_backoff * 2^k` before retry `k + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub initial_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            attempts: 3,
            initial_backoff: Duration::from_secs(1),
        }
    }
}

impl RetryPolicy {
    pub fn backoff(&self, retry: u32) -> Duration {
        self.initial_backoff.saturating_mul(1 << retry.min(16))
    }
}

/// The generate / verify / refine contract.
///
/// Implementations must tolerate concurrent calls; the orchestrator issues up
/// to its concurrency cap at once.
pub trait Backend: Send + Sync {
    fn id(&self) -> &str;

    fn generate(&self, problem: &Problem, site: &CallSite) -> Result<Candidate, BackendError>;

    fn verify(
        &self,
        problem: &Problem,
        candidate: &Candidate,
        site: &CallSite,
    ) -> Result<Verdict, BackendError>;

    fn refine(
        &self,
        problem: &Problem,
        candidate: &Candidate,
        feedback: &str,
        site: &CallSite,
    ) -> Result<Candidate, BackendError>;
}

/// Splits a solution completion into (explanation, source). The source is the
/// last fenced code block; without one, the whole completion is the source.
pub fn split_completion(completion: &str) -> (String, String) {
    let mut fences = Vec::new();
    let mut offset = 0;
    for line in completion.split_inclusive('\n') {
        if line.trim_start().starts_with("```") {
            fences.push((offset, offset + line.len()));
        }
        offset += line.len();
    }
    // Pair fences in order; the last complete pair wins.
    let last_block = fences
        .chunks_exact(2)
        .last()
        .map(|pair| (pair[0], pair[1]));
    match last_block {
        Some(((open_start, open_end), (close_start, close_end))) => {
            let body = &completion[open_end..close_start];
            let body = body.strip_suffix('\n').unwrap_or(body);
            let code = body.strip_suffix('\r').unwrap_or(body).to_owned();
            let mut explanation = completion[..open_start].to_owned();
            explanation.push_str(&completion[close_end..]);
            (explanation.trim().to_owned(), code)
        }
        None => (String::new(), completion.to_owned()),
    }
}

/// Fallback token estimate when an endpoint reports no usage: chars / 4, rounded up.
pub fn estimate_tokens(text: &str) -> u64 {
    (text.chars().count() as u64).div_ceil(4)
}

#[cfg(feature = "http")]
pub(crate) fn solution_candidate(
    problem: &Problem,
    site: &CallSite,
    completion: &str,
    token_count: u64,
    truncated: bool,
) -> Candidate {
    let (explanation, source_code) = split_completion(completion);
    Candidate {
        problem_id: problem.id.clone(),
        thread_index: site.thread_index,
        round_index: site.round_index,
        role: if site.round_index == 1 {
            SolutionRole::Generation
        } else {
            SolutionRole::Refinement
        },
        explanation,
        source_code,
        token_count,
        truncated,
        usage_estimated: false,
        latent: None,
    }
}
