//! Serves candidates and verdicts from previously logged runs.

use std::collections::HashMap;

use super::{Backend, BackendError, CallSite};
use crate::domain::{Candidate, Problem, RunRecord, Verdict};

type SolutionKey = (String, u64, u32, u32);
type VerdictKey = (String, u64, u32, u32, u32);

/// Replays logged runs keyed by (problem, run seed, thread, round[, verdict]).
#[derive(Debug, Default, Clone)]
pub struct ReplayBackend {
    solutions: HashMap<SolutionKey, Candidate>,
    verdicts: HashMap<VerdictKey, Verdict>,
}

impl ReplayBackend {
    pub fn new(runs: &[RunRecord]) -> Self {
        let mut replay = ReplayBackend::default();
        for run in runs {
            for (at, round) in run.rounds() {
                let key = (
                    run.problem_id.clone(),
                    run.rng_seed,
                    at.thread_index,
                    at.round_index,
                );
                for (j, verdict) in round.verdicts.iter().enumerate() {
                    replay.verdicts.insert(
                        (key.0.clone(), key.1, key.2, key.3, j as u32),
                        verdict.clone(),
                    );
                }
                replay.solutions.insert(key, round.candidate.clone());
            }
        }
        replay
    }

    fn solution(&self, problem: &Problem, site: &CallSite) -> Result<Candidate, BackendError> {
        let key = (
            problem.id.clone(),
            site.run_seed,
            site.thread_index,
            site.round_index,
        );
        self.solutions
            .get(&key)
            .cloned()
            .ok_or_else(|| BackendError::ReplayMiss(format!("solution {key:?}")))
    }
}

impl Backend for ReplayBackend {
    fn id(&self) -> &str {
        "replay"
    }

    fn generate(&self, problem: &Problem, site: &CallSite) -> Result<Candidate, BackendError> {
        self.solution(problem, site)
    }

    fn verify(
        &self,
        problem: &Problem,
        _candidate: &Candidate,
        site: &CallSite,
    ) -> Result<Verdict, BackendError> {
        let index = site
            .verdict_index
            .ok_or_else(|| BackendError::Contract("verification call without verdict index".into()))?;
        let key = (
            problem.id.clone(),
            site.run_seed,
            site.thread_index,
            site.round_index,
            index,
        );
        self.verdicts
            .get(&key)
            .cloned()
            .ok_or_else(|| BackendError::ReplayMiss(format!("verdict {key:?}")))
    }

    fn refine(
        &self,
        problem: &Problem,
        _candidate: &Candidate,
        _feedback: &str,
        site: &CallSite,
    ) -> Result<Candidate, BackendError> {
        self.solution(problem, site)
    }
}
