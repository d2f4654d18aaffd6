//! Seeded stochastic stand-in for a model.
//!
//! Each candidate carries a latent correctness bit. Generation draws it with
//! `p_first_correct`; refinement flips it with `p_refine_fix` /
//! `p_refine_break`; verification reports it through a noisy channel with the
//! given true-positive and true-negative rates. Every draw comes from the
//! call's own seed, so a call is reproducible in isolation.
//!
//! Token counts are log-normal with mean `mean` and log-space standard
//! deviation `spread` (so `mu = ln(mean) - spread^2 / 2`). A count above the
//! call's `max_tokens` is clamped and the candidate marked truncated; a
//! truncated candidate is never latently correct.

use rand::Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use super::verdict::{format_verdict, parse_verdict};
use super::{Backend, BackendError, CallSite};
use crate::domain::{Candidate, Latent, Problem, SolutionRole, Verdict};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TokenShape {
    pub mean: f64,
    pub spread: f64,
}

impl TokenShape {
    pub const fn new(mean: f64, spread: f64) -> Self {
        TokenShape { mean, spread }
    }

    fn sample(&self, rng: &mut impl Rng) -> u64 {
        let draw = if self.spread == 0.0 {
            self.mean
        } else {
            let mu = self.mean.ln() - self.spread * self.spread / 2.0;
            LogNormal::new(mu, self.spread)
                .expect("validated shape")
                .sample(rng)
        };
        (draw.round() as u64).max(1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulatorParams {
    pub p_first_correct: f64,
    pub verifier_tpr: f64,
    pub verifier_tnr: f64,
    pub p_refine_fix: f64,
    pub p_refine_break: f64,
    #[serde(default = "default_generation_tokens")]
    pub generation_tokens: TokenShape,
    #[serde(default = "default_verification_tokens")]
    pub verification_tokens: TokenShape,
    #[serde(default = "default_generation_tokens")]
    pub refinement_tokens: TokenShape,
}

fn default_generation_tokens() -> TokenShape {
    TokenShape::new(6_000.0, 0.3)
}

fn default_verification_tokens() -> TokenShape {
    TokenShape::new(1_000.0, 0.3)
}

impl Default for SimulatorParams {
    fn default() -> Self {
        SimulatorParams {
            p_first_correct: 0.3,
            verifier_tpr: 0.96,
            verifier_tnr: 0.8,
            p_refine_fix: 0.25,
            p_refine_break: 0.05,
            generation_tokens: default_generation_tokens(),
            verification_tokens: default_verification_tokens(),
            refinement_tokens: default_generation_tokens(),
        }
    }
}

impl SimulatorParams {
    pub fn validate(&self) -> Result<(), String> {
        let probabilities = [
            ("simulator.p_first_correct", self.p_first_correct),
            ("simulator.verifier_tpr", self.verifier_tpr),
            ("simulator.verifier_tnr", self.verifier_tnr),
            ("simulator.p_refine_fix", self.p_refine_fix),
            ("simulator.p_refine_break", self.p_refine_break),
        ];
        for (key, p) in probabilities {
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("{key}: {p} is not a probability"));
            }
        }
        let shapes = [
            ("simulator.generation_tokens", self.generation_tokens),
            ("simulator.verification_tokens", self.verification_tokens),
            ("simulator.refinement_tokens", self.refinement_tokens),
        ];
        for (key, shape) in shapes {
            if !(shape.mean > 0.0 && shape.mean.is_finite()) || !(shape.spread >= 0.0) {
                return Err(format!("{key}: mean must be > 0 and spread >= 0"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SimulatorBackend {
    params: SimulatorParams,
}

impl SimulatorBackend {
    pub fn new(params: SimulatorParams) -> Result<Self, BackendError> {
        params.validate().map_err(BackendError::Contract)?;
        Ok(SimulatorBackend { params })
    }

    pub fn params(&self) -> &SimulatorParams {
        &self.params
    }

    fn solution(
        &self,
        problem: &Problem,
        site: &CallSite,
        correct: bool,
        tokens: u64,
        note: &str,
    ) -> Candidate {
        let truncated = tokens > site.max_tokens;
        let token_count = tokens.min(site.max_tokens);
        let correct = correct && !truncated;
        let id = site.seed();
        Candidate {
            problem_id: problem.id.clone(),
            thread_index: site.thread_index,
            round_index: site.round_index,
            role: if site.round_index == 1 {
                SolutionRole::Generation
            } else {
                SolutionRole::Refinement
            },
            explanation: format!(
                "Simulated {note} for {} (thread {}, round {}).",
                problem.id, site.thread_index, site.round_index
            ),
            source_code: format!("// simulated solution {id:016x}\nint main() {{ return 0; }}\n"),
            token_count,
            truncated,
            usage_estimated: false,
            latent: Some(Latent::new(correct)),
        }
    }
}

fn latent_of(candidate: &Candidate) -> Result<bool, BackendError> {
    candidate.latent.map(Latent::is_correct).ok_or_else(|| {
        BackendError::Contract("simulator received a candidate it did not produce".into())
    })
}

impl Backend for SimulatorBackend {
    fn id(&self) -> &str {
        "simulator"
    }

    fn generate(&self, problem: &Problem, site: &CallSite) -> Result<Candidate, BackendError> {
        let mut rng = seed::rng(site.seed());
        let correct = rng.random_bool(self.params.p_first_correct);
        let tokens = self.params.generation_tokens.sample(&mut rng);
        Ok(self.solution(problem, site, correct, tokens, "generation"))
    }

    fn verify(
        &self,
        _problem: &Problem,
        candidate: &Candidate,
        site: &CallSite,
    ) -> Result<Verdict, BackendError> {
        let truth = latent_of(candidate)?;
        let mut rng = seed::rng(site.seed());
        let judgment = if truth {
            rng.random_bool(self.params.verifier_tpr)
        } else {
            !rng.random_bool(self.params.verifier_tnr)
        };
        let tokens = self
            .params
            .verification_tokens
            .sample(&mut rng)
            .min(site.max_tokens);
        let reasoning = if judgment {
            "Simulated check found no issue.".to_owned()
        } else {
            format!(
                "Simulated critique {:08x}: a counterexample breaks round {}.",
                site.seed() as u32,
                site.round_index
            )
        };
        Ok(parse_verdict(&format_verdict(judgment, &reasoning), tokens))
    }

    fn refine(
        &self,
        problem: &Problem,
        candidate: &Candidate,
        _feedback: &str,
        site: &CallSite,
    ) -> Result<Candidate, BackendError> {
        let before = latent_of(candidate)?;
        let mut rng = seed::rng(site.seed());
        let correct = if before {
            !rng.random_bool(self.params.p_refine_break)
        } else {
            rng.random_bool(self.params.p_refine_fix)
        };
        let tokens = self.params.refinement_tokens.sample(&mut rng);
        Ok(self.solution(problem, site, correct, tokens, "refinement"))
    }
}
