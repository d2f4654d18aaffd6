//! Chat-completion HTTP backend.
//!
//! Sends `{model, messages, max_tokens, temperature, seed}` and reads the
//! first choice's message content plus `usage.completion_tokens`. Transport
//! failures, 429 and 5xx responses are retried per [`RetryPolicy`]; other
//! non-2xx statuses fail immediately.

use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::verdict::parse_verdict;
use super::{
    estimate_tokens, render_prompt, solution_candidate, Backend, BackendError, BackendRequest,
    CallRole, CallSite, RetryPolicy,
};
use crate::domain::{Candidate, Problem, Verdict};

#[derive(Debug, Clone)]
pub struct HttpConfig {
    pub url: String,
    pub model: String,
    pub api_key: Option<String>,
    pub retry: RetryPolicy,
    pub timeout: Duration,
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'static str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: [ChatMessage<'a>; 1],
    max_tokens: u64,
    temperature: f64,
    seed: u64,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct Choice {
    message: ResponseMessage,
    #[serde(default)]
    finish_reason: Option<String>,
}

#[derive(Deserialize)]
struct ResponseMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct Usage {
    completion_tokens: Option<u64>,
}

/// One completed call.
#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub text: String,
    pub token_count: u64,
    pub usage_estimated: bool,
    pub hit_max_tokens: bool,
}

enum Attempt {
    Retry(String),
    Fatal(BackendError),
}

pub struct HttpBackend {
    config: HttpConfig,
    agent: ureq::Agent,
}

impl HttpBackend {
    pub fn new(config: HttpConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(config.timeout))
            .build()
            .new_agent();
        HttpBackend { config, agent }
    }

    pub fn complete(&self, request: &BackendRequest) -> Result<Completion, BackendError> {
        let policy = self.config.retry;
        let attempts = policy.attempts.max(1);
        let mut last = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                thread::sleep(policy.backoff(attempt - 1));
            }
            match self.attempt(request) {
                Ok(completion) => return Ok(completion),
                Err(Attempt::Fatal(err)) => return Err(err),
                Err(Attempt::Retry(message)) => {
                    log::warn!("chat call attempt {} failed: {message}", attempt + 1);
                    last = message;
                }
            }
        }
        Err(BackendError::Transport {
            attempts,
            message: last,
        })
    }

    fn attempt(&self, request: &BackendRequest) -> Result<Completion, Attempt> {
        let body = ChatRequest {
            model: &self.config.model,
            messages: [ChatMessage {
                role: "user",
                content: &request.rendered_prompt,
            }],
            max_tokens: request.max_tokens,
            temperature: request.temperature,
            seed: request.call_seed,
        };
        let mut builder = self.agent.post(&self.config.url);
        if let Some(key) = &self.config.api_key {
            builder = builder.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = builder
            .send_json(&body)
            .map_err(|e| Attempt::Retry(e.to_string()))?;
        let status = response.status().as_u16();
        if status == 429 || status >= 500 {
            return Err(Attempt::Retry(format!("HTTP {status}")));
        }
        if !(200..300).contains(&status) {
            let detail = response.body_mut().read_to_string().unwrap_or_default();
            return Err(Attempt::Fatal(BackendError::Protocol(format!(
                "HTTP {status}: {detail}"
            ))));
        }
        let parsed: ChatResponse = response
            .body_mut()
            .read_json()
            .map_err(|e| Attempt::Fatal(BackendError::Protocol(e.to_string())))?;
        let choice = parsed.choices.into_iter().next().ok_or_else(|| {
            Attempt::Fatal(BackendError::Protocol("response has no choices".into()))
        })?;
        let text = choice.message.content.unwrap_or_default();
        let reported = parsed.usage.and_then(|u| u.completion_tokens);
        let token_count = reported.unwrap_or_else(|| estimate_tokens(&text));
        let hit_max_tokens = choice.finish_reason.as_deref() == Some("length")
            || token_count >= request.max_tokens;
        Ok(Completion {
            text,
            token_count,
            usage_estimated: reported.is_none(),
            hit_max_tokens,
        })
    }

    fn solution_call(
        &self,
        problem: &Problem,
        prompt: String,
        site: &CallSite,
    ) -> Result<Candidate, BackendError> {
        let completion = self.complete(&BackendRequest::new(site, prompt)?)?;
        let mut candidate = solution_candidate(
            problem,
            site,
            &completion.text,
            completion.token_count,
            completion.hit_max_tokens,
        );
        candidate.usage_estimated = completion.usage_estimated;
        Ok(candidate)
    }
}

impl Backend for HttpBackend {
    fn id(&self) -> &str {
        "http"
    }

    fn generate(&self, problem: &Problem, site: &CallSite) -> Result<Candidate, BackendError> {
        let prompt = render_prompt(CallRole::Generation, problem, None, None)?;
        self.solution_call(problem, prompt, site)
    }

    fn verify(
        &self,
        problem: &Problem,
        candidate: &Candidate,
        site: &CallSite,
    ) -> Result<Verdict, BackendError> {
        let prompt = render_prompt(CallRole::Verification, problem, Some(candidate), None)?;
        let completion = self.complete(&BackendRequest::new(site, prompt)?)?;
        let mut verdict = parse_verdict(&completion.text, completion.token_count);
        verdict.usage_estimated = completion.usage_estimated;
        Ok(verdict)
    }

    fn refine(
        &self,
        problem: &Problem,
        candidate: &Candidate,
        feedback: &str,
        site: &CallSite,
    ) -> Result<Candidate, BackendError> {
        let prompt = render_prompt(CallRole::Refinement, problem, Some(candidate), Some(feedback))?;
        self.solution_call(problem, prompt, site)
    }
}
