//! The multi-thread generate → verify → refine pipeline.
//!
//! Each of the N threads runs up to M rounds. A round produces one candidate
//! (generation in round 1, refinement afterwards) and V independent verdicts;
//! its score is the number of positive verdicts. A unanimous round ends its
//! thread. Otherwise the next round refines the candidate using the reasoning
//! of one negative verdict drawn with the round's seed. After all threads
//! finish, the final answer is the round with the highest score, preferring
//! lower round indices, with remaining ties drawn from the run seed.
//!
//! Every random choice is derived from the run seed and the choice's
//! coordinates, so results do not depend on scheduling. Threads and the V
//! verification calls of a round run concurrently up to `concurrency_cap`.

use std::io::Write;
use std::sync::Mutex;

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::backends::{Backend, BackendError, CallRole, CallSite};
use crate::domain::{
    positive_votes, Candidate, DomainError, PipelineConfig, Problem, RoundRecord, RoundRef,
    RunRecord, SolutionRole, Termination, ThreadRecord, Verdict, SCHEMA_VERSION,
};
use crate::judge::{JudgeError, SolutionJudge};
use crate::seed;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] DomainError),
    #[error("all {threads} threads failed; first error: {first}")]
    AllThreadsFailed { threads: u32, first: String },
    #[error(transparent)]
    Judge(#[from] JudgeError),
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error("could not build worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SelectionError {
    #[error("no rounds available for selection")]
    Empty,
}

/// Structured progress, one JSON object per event.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum ProgressEvent {
    ThreadStarted {
        problem_id: String,
        thread: u32,
    },
    RoundFinished {
        problem_id: String,
        thread: u32,
        round: u32,
        score: u32,
        tokens: u64,
    },
    ThreadFailed {
        problem_id: String,
        thread: u32,
        error: String,
    },
    Selected {
        problem_id: String,
        thread: u32,
        round: u32,
        score: u32,
        total_tokens: u64,
    },
}

pub trait EventSink: Sync {
    fn emit(&self, event: &ProgressEvent);
}

#[derive(Debug, Default, Clone, Copy)]
pub struct NullSink;

impl EventSink for NullSink {
    fn emit(&self, _event: &ProgressEvent) {}
}

/// Writes each event as one JSON line.
pub struct JsonLinesSink<W: Write + Send> {
    out: Mutex<W>,
}

impl<W: Write + Send> JsonLinesSink<W> {
    pub fn new(out: W) -> Self {
        JsonLinesSink {
            out: Mutex::new(out),
        }
    }

    pub fn into_inner(self) -> W {
        self.out.into_inner().expect("event sink poisoned")
    }
}

impl<W: Write + Send> EventSink for JsonLinesSink<W> {
    fn emit(&self, event: &ProgressEvent) {
        if let Ok(line) = serde_json::to_string(event) {
            let mut out = self.out.lock().expect("event sink poisoned");
            let _ = writeln!(out, "{line}");
        }
    }
}

/// Collects events in memory.
#[derive(Debug, Default)]
pub struct RecordingSink(pub Mutex<Vec<ProgressEvent>>);

impl EventSink for RecordingSink {
    fn emit(&self, event: &ProgressEvent) {
        self.0.lock().expect("sink poisoned").push(event.clone());
    }
}

enum Executor {
    Sequential,
    #[cfg(feature = "parallel")]
    Pool(rayon::ThreadPool),
}

impl Executor {
    fn new(cap: u32) -> Result<Self, PipelineError> {
        #[cfg(feature = "parallel")]
        if cap > 1 {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(cap as usize)
                .thread_name(|i| format!("pipeline-{i}"))
                .build()
                .map_err(|e| PipelineError::Pool(e.to_string()))?;
            return Ok(Executor::Pool(pool));
        }
        let _ = cap;
        Ok(Executor::Sequential)
    }

    /// Evaluates `f(0..n)`, returning results in index order.
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            Executor::Sequential => (0..n).map(f).collect(),
            #[cfg(feature = "parallel")]
            Executor::Pool(pool) => {
                use rayon::prelude::*;
                pool.install(|| (0..n).into_par_iter().map(f).collect())
            }
        }
    }
}

pub struct Orchestrator<'a> {
    backend: &'a dyn Backend,
    judge: Option<&'a dyn SolutionJudge>,
    events: &'a dyn EventSink,
}

impl<'a> Orchestrator<'a> {
    pub fn new(backend: &'a dyn Backend) -> Self {
        Orchestrator {
            backend,
            judge: None,
            events: &NullSink,
        }
    }

    pub fn with_judge(mut self, judge: &'a dyn SolutionJudge) -> Self {
        self.judge = Some(judge);
        self
    }

    pub fn with_events(mut self, events: &'a dyn EventSink) -> Self {
        self.events = events;
        self
    }

    /// Runs the pipeline with `config.rng_seed` as the run seed.
    pub fn run_pipeline(
        &self,
        problem: &Problem,
        config: &PipelineConfig,
    ) -> Result<RunRecord, PipelineError> {
        self.run_pipeline_seeded(problem, config, config.rng_seed)
    }

    /// Runs the pipeline with an explicit run seed. The stored config takes
    /// `backend_id` and `judge_attached` from what is actually attached.
    pub fn run_pipeline_seeded(
        &self,
        problem: &Problem,
        config: &PipelineConfig,
        run_seed: u64,
    ) -> Result<RunRecord, PipelineError> {
        let mut config = config.clone();
        config.backend_id = self.backend.id().to_owned();
        config.judge_attached = self.judge.is_some();
        config.validate()?;
        problem.validate()?;

        let executor = Executor::new(config.concurrency_cap)?;
        let threads: Vec<ThreadRecord> = executor
            .map(config.threads as usize, |t| {
                self.thread(problem, t as u32, &config, run_seed, &executor)
            })
            .into_iter()
            .collect::<Result<_, _>>()?;

        if threads.iter().all(ThreadRecord::is_failed) {
            return Err(PipelineError::AllThreadsFailed {
                threads: config.threads,
                first: threads[0].error.clone().unwrap_or_default(),
            });
        }

        let scored: Vec<(RoundRef, u32)> = threads
            .iter()
            .filter(|t| !t.is_failed())
            .flat_map(|t| {
                t.rounds.iter().map(move |r| {
                    (
                        RoundRef {
                            thread_index: t.thread_index,
                            round_index: r.candidate.round_index,
                        },
                        r.score,
                    )
                })
            })
            .collect();
        let selected = select_final(&scored, seed::derive(&[run_seed, seed::tag::SELECTION]))?;

        let total_tokens = threads.iter().map(ThreadRecord::tokens).sum();
        let tokens_estimated = threads.iter().flat_map(|t| &t.rounds).any(|r| {
            r.candidate.usage_estimated || r.verdicts.iter().any(|v| v.usage_estimated)
        });
        let run = RunRecord {
            schema_version: SCHEMA_VERSION,
            problem_id: problem.id.clone(),
            config,
            threads,
            selected,
            total_tokens,
            rng_seed: run_seed,
            tokens_estimated,
        };
        self.events.emit(&ProgressEvent::Selected {
            problem_id: problem.id.clone(),
            thread: selected.thread_index,
            round: selected.round_index,
            score: run.selected_round().score,
            total_tokens,
        });
        Ok(run)
    }

    /// Runs one thread sequentially on the calling worker.
    pub fn run_thread(
        &self,
        problem: &Problem,
        thread_index: u32,
        config: &PipelineConfig,
        run_seed: u64,
    ) -> Result<ThreadRecord, PipelineError> {
        self.thread(problem, thread_index, config, run_seed, &Executor::Sequential)
    }

    fn thread(
        &self,
        problem: &Problem,
        thread_index: u32,
        config: &PipelineConfig,
        run_seed: u64,
        executor: &Executor,
    ) -> Result<ThreadRecord, PipelineError> {
        self.events.emit(&ProgressEvent::ThreadStarted {
            problem_id: problem.id.clone(),
            thread: thread_index,
        });
        let mut rounds = Vec::new();
        let outcome = self.round_loop(problem, thread_index, config, run_seed, executor, &mut rounds);
        let (termination, error) = match outcome {
            Ok(termination) => (termination, None),
            Err(RoundFailure::Backend(err)) => {
                let error = err.to_string();
                self.events.emit(&ProgressEvent::ThreadFailed {
                    problem_id: problem.id.clone(),
                    thread: thread_index,
                    error: error.clone(),
                });
                (Termination::Failed, Some(error))
            }
            Err(RoundFailure::Judge(err)) => return Err(err.into()),
        };
        Ok(ThreadRecord {
            thread_index,
            rounds,
            termination,
            error,
        })
    }

    fn round_loop(
        &self,
        problem: &Problem,
        thread_index: u32,
        config: &PipelineConfig,
        run_seed: u64,
        executor: &Executor,
        rounds: &mut Vec<RoundRecord>,
    ) -> Result<Termination, RoundFailure> {
        let site = |round_index: u32, role: CallRole| CallSite {
            run_seed,
            thread_index,
            round_index,
            role,
            verdict_index: None,
            max_tokens: config.max_generation_tokens,
            temperature: config.temperature,
        };
        let mut candidate = self
            .backend
            .generate(problem, &site(1, CallRole::Generation))?;
        for round_index in 1..=config.max_rounds {
            check_candidate(&candidate, thread_index, round_index)?;
            let verdicts = self.verify_on(problem, &candidate, config, run_seed, executor)?;
            let exec_result = match self.judge {
                Some(judge) => Some(judge.judge_solution(problem, &candidate)?),
                None => None,
            };
            let round = RoundRecord::new(candidate, verdicts, exec_result);
            let score = round.score;
            self.events.emit(&ProgressEvent::RoundFinished {
                problem_id: problem.id.clone(),
                thread: thread_index,
                round: round_index,
                score,
                tokens: round.tokens(),
            });
            rounds.push(round);
            if score == config.verdicts {
                return Ok(Termination::UnanimousEarlyStop);
            }
            if round_index == config.max_rounds {
                break;
            }
            let last = rounds.last().expect("just pushed");
            let feedback = choose_feedback(&last.verdicts, run_seed, thread_index, round_index)
                .expect("a non-unanimous round has a negative verdict");
            candidate = self.backend.refine(
                problem,
                &last.candidate,
                &last.verdicts[feedback].reasoning,
                &site(round_index + 1, CallRole::Refinement),
            )?;
        }
        Ok(Termination::MaxRoundsReached)
    }

    /// Issues V independent verification calls; results are in verdict-index order.
    pub fn verify_candidate(
        &self,
        problem: &Problem,
        candidate: &Candidate,
        config: &PipelineConfig,
        run_seed: u64,
    ) -> Result<Vec<Verdict>, BackendError> {
        let executor = Executor::new(config.concurrency_cap).map_err(|e| {
            BackendError::Contract(e.to_string())
        })?;
        self.verify_on(problem, candidate, config, run_seed, &executor)
    }

    fn verify_on(
        &self,
        problem: &Problem,
        candidate: &Candidate,
        config: &PipelineConfig,
        run_seed: u64,
        executor: &Executor,
    ) -> Result<Vec<Verdict>, BackendError> {
        executor
            .map(config.verdicts as usize, |j| {
                let site = CallSite {
                    run_seed,
                    thread_index: candidate.thread_index,
                    round_index: candidate.round_index,
                    role: CallRole::Verification,
                    verdict_index: Some(j as u32),
                    max_tokens: config.max_verification_tokens,
                    temperature: config.temperature,
                };
                self.backend.verify(problem, candidate, &site)
            })
            .into_iter()
            .collect()
    }
}

enum RoundFailure {
    Backend(BackendError),
    Judge(JudgeError),
}

impl From<BackendError> for RoundFailure {
    fn from(err: BackendError) -> Self {
        RoundFailure::Backend(err)
    }
}

impl From<JudgeError> for RoundFailure {
    fn from(err: JudgeError) -> Self {
        RoundFailure::Judge(err)
    }
}

fn check_candidate(candidate: &Candidate, thread: u32, round: u32) -> Result<(), BackendError> {
    let role = if round == 1 {
        SolutionRole::Generation
    } else {
        SolutionRole::Refinement
    };
    if candidate.thread_index != thread || candidate.round_index != round || candidate.role != role
    {
        return Err(BackendError::Contract(format!(
            "backend returned candidate for thread {} round {} ({:?}), expected thread {thread} round {round}",
            candidate.thread_index, candidate.round_index, candidate.role
        )));
    }
    Ok(())
}

/// Index of the negative verdict whose reasoning feeds the next refinement,
/// drawn uniformly with the round's seed. `None` when every verdict is positive.
pub fn choose_feedback(
    verdicts: &[Verdict],
    run_seed: u64,
    thread_index: u32,
    round_index: u32,
) -> Option<usize> {
    let negatives: Vec<usize> = verdicts
        .iter()
        .enumerate()
        .filter(|(_, v)| !v.judgment)
        .map(|(j, _)| j)
        .collect();
    if negatives.is_empty() {
        return None;
    }
    let mut rng = seed::rng(seed::derive(&[
        run_seed,
        seed::tag::FEEDBACK_CHOICE,
        thread_index as u64,
        round_index as u64,
    ]));
    Some(negatives[rng.random_range(0..negatives.len())])
}

/// Picks the round with the highest score, then the lowest round index; any
/// remaining tie is broken uniformly at random with `seed`.
pub fn select_final(scored: &[(RoundRef, u32)], seed: u64) -> Result<RoundRef, SelectionError> {
    let best = scored
        .iter()
        .map(|&(at, score)| (score, std::cmp::Reverse(at.round_index)))
        .max()
        .ok_or(SelectionError::Empty)?;
    let mut tied: Vec<RoundRef> = scored
        .iter()
        .filter(|&&(at, score)| (score, std::cmp::Reverse(at.round_index)) == best)
        .map(|&(at, _)| at)
        .collect();
    tied.sort();
    if tied.len() == 1 {
        return Ok(tied[0]);
    }
    let mut rng = seed::rng(seed);
    Ok(tied[rng.random_range(0..tied.len())])
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct TokenTotals {
    pub total: u64,
    pub generation: u64,
    pub refinement: u64,
    pub verification: u64,
    pub per_thread: Vec<u64>,
}

pub fn token_totals(run: &RunRecord) -> TokenTotals {
    let mut totals = TokenTotals::default();
    for thread in &run.threads {
        for round in &thread.rounds {
            match round.candidate.role {
                SolutionRole::Generation => totals.generation += round.candidate.token_count,
                SolutionRole::Refinement => totals.refinement += round.candidate.token_count,
            }
            totals.verification += round.verdicts.iter().map(|v| v.token_count).sum::<u64>();
        }
        totals.per_thread.push(thread.tokens());
    }
    totals.total = totals.generation + totals.refinement + totals.verification;
    totals
}

/// Recomputes every round's score from its verdicts.
pub fn scores_consistent(run: &RunRecord) -> bool {
    run.rounds()
        .all(|(_, round)| round.score == positive_votes(&round.verdicts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::simulator::{SimulatorBackend, SimulatorParams, TokenShape};
    use crate::domain::fixtures::{candidate, verdict};
    use crate::domain::{CompareMode, ParseStatus, TestCase};
    use crate::judge::LatentJudge;

    fn rr(thread_index: u32, round_index: u32) -> RoundRef {
        RoundRef {
            thread_index,
            round_index,
        }
    }

    fn problem() -> Problem {
        Problem {
            id: "toy".into(),
            statement: "toy".into(),
            tests: vec![TestCase {
                input: vec![],
                expected_output: vec![],
            }],
            time_limit_ms: 1000,
            memory_limit_mib: 64,
            compare_mode: CompareMode::Exact,
        }
    }

    fn config(threads: u32, max_rounds: u32, verdicts: u32, seed: u64) -> PipelineConfig {
        PipelineConfig {
            threads,
            max_rounds,
            verdicts,
            rng_seed: seed,
            ..PipelineConfig::default()
        }
    }

    fn simulator(f: impl FnOnce(&mut SimulatorParams)) -> SimulatorBackend {
        let mut params = SimulatorParams::default();
        f(&mut params);
        SimulatorBackend::new(params).unwrap()
    }

    #[test]
    fn earlier_round_wins_score_tie() {
        let scored = [(rr(0, 1), 5), (rr(1, 2), 5), (rr(2, 1), 3)];
        assert_eq!(select_final(&scored, 0).unwrap(), rr(0, 1));
    }

    #[test]
    fn single_and_empty_candidate_sets() {
        assert_eq!(select_final(&[(rr(3, 2), 0)], 9).unwrap(), rr(3, 2));
        assert_eq!(select_final(&[], 9), Err(SelectionError::Empty));
    }

    #[test]
    fn higher_score_beats_earlier_round() {
        let scored = [(rr(0, 1), 2), (rr(1, 3), 4)];
        assert_eq!(select_final(&scored, 1).unwrap(), rr(1, 3));
    }

    #[test]
    fn exact_tie_is_a_fair_seeded_draw() {
        let scored = [(rr(0, 1), 1), (rr(1, 1), 1)];
        assert_eq!(select_final(&scored, 77).unwrap(), select_final(&scored, 77).unwrap());
        let n = 10_000;
        let first = (0..n)
            .filter(|&s| select_final(&scored, seed::derive(&[s])).unwrap() == rr(0, 1))
            .count();
        let share = first as f64 / n as f64;
        assert!((share - 0.5).abs() <= 0.02, "share {share}");
    }

    #[test]
    fn token_totals_arithmetic() {
        let run = RunRecord {
            schema_version: SCHEMA_VERSION,
            problem_id: "p".into(),
            config: config(1, 1, 2, 0),
            threads: vec![ThreadRecord {
                thread_index: 0,
                rounds: vec![RoundRecord::new(
                    candidate(0, 1, 100),
                    vec![verdict(false, 30), verdict(true, 40)],
                    None,
                )],
                termination: Termination::MaxRoundsReached,
                error: None,
            }],
            selected: rr(0, 1),
            total_tokens: 170,
            rng_seed: 0,
            tokens_estimated: false,
        };
        let totals = token_totals(&run);
        assert_eq!(totals.total, 170);
        assert_eq!((totals.generation, totals.verification), (100, 70));
        assert_eq!(totals.per_thread, vec![170]);
        assert_eq!(token_totals(&RunRecord { threads: vec![], ..run }).total, 0);
    }

    #[test]
    fn perfect_single_round_run_stops_early() {
        let sim = simulator(|p| {
            p.p_first_correct = 1.0;
            p.verifier_tpr = 1.0;
            p.verifier_tnr = 1.0;
        });
        let run = Orchestrator::new(&sim).run_pipeline(&problem(), &config(1, 1, 1, 3)).unwrap();
        assert_eq!(run.threads.len(), 1);
        assert_eq!(run.threads[0].rounds.len(), 1);
        assert_eq!(run.threads[0].termination, Termination::UnanimousEarlyStop);
        assert_eq!(run.selected, rr(0, 1));
        run.validate().unwrap();
    }

    #[test]
    fn hopeless_threads_run_all_rounds() {
        let sim = simulator(|p| {
            p.p_first_correct = 0.0;
            p.p_refine_fix = 0.0;
            p.verifier_tnr = 1.0;
        });
        let run = Orchestrator::new(&sim).run_pipeline(&problem(), &config(2, 4, 3, 5)).unwrap();
        for thread in &run.threads {
            assert_eq!(thread.rounds.len(), 4);
            assert_eq!(thread.termination, Termination::MaxRoundsReached);
            assert!(thread.rounds.iter().all(|r| r.score == 0));
        }
        assert_eq!(run.selected.round_index, 1);
    }

    #[test]
    fn two_threads_one_round_selects_higher_score() {
        let sim = simulator(|p| {
            p.p_first_correct = 0.5;
            p.verifier_tpr = 1.0;
            p.verifier_tnr = 1.0;
        });
        let mut checked = 0;
        for s in 0..200 {
            let run = Orchestrator::new(&sim).run_pipeline(&problem(), &config(2, 1, 4, s)).unwrap();
            let a = run.threads[0].rounds[0].score;
            let b = run.threads[1].rounds[0].score;
            if a != b {
                let expect = if a > b { 0 } else { 1 };
                assert_eq!(run.selected, rr(expect, 1));
                checked += 1;
            }
        }
        assert!(checked > 50);
    }

    #[test]
    fn feedback_is_one_of_the_negative_verdicts() {
        let verdicts = vec![verdict(true, 1), verdict(false, 1), verdict(false, 1)];
        let mut seen = [false; 3];
        for s in 0..200 {
            let j = choose_feedback(&verdicts, s, 0, 1).unwrap();
            assert_eq!(Some(j), choose_feedback(&verdicts, s, 0, 1));
            seen[j] = true;
        }
        assert_eq!(seen, [false, true, true]);
        assert_eq!(choose_feedback(&[verdict(true, 1)], 0, 0, 1), None);
    }

    #[test]
    fn refinement_receives_the_chosen_reasoning() {
        use std::sync::Mutex;

        /// Records the feedback passed to refine; otherwise defers to the simulator.
        struct Spy {
            inner: SimulatorBackend,
            feedback: Mutex<Vec<(u32, String)>>,
        }
        impl Backend for Spy {
            fn id(&self) -> &str {
                "spy"
            }
            fn generate(&self, p: &Problem, s: &CallSite) -> Result<Candidate, BackendError> {
                self.inner.generate(p, s)
            }
            fn verify(&self, p: &Problem, c: &Candidate, s: &CallSite) -> Result<Verdict, BackendError> {
                self.inner.verify(p, c, s)
            }
            fn refine(&self, p: &Problem, c: &Candidate, f: &str, s: &CallSite) -> Result<Candidate, BackendError> {
                self.feedback.lock().unwrap().push((s.round_index - 1, f.to_owned()));
                self.inner.refine(p, c, f, s)
            }
        }
        let spy = Spy {
            inner: simulator(|p| {
                p.p_first_correct = 0.0;
                p.p_refine_fix = 0.0;
                p.verifier_tnr = 0.5;
            }),
            feedback: Mutex::new(Vec::new()),
        };
        let seed = 11;
        let run = Orchestrator::new(&spy).run_pipeline(&problem(), &config(1, 3, 3, seed)).unwrap();
        let calls = spy.feedback.lock().unwrap().clone();
        assert_eq!(calls.len(), run.threads[0].rounds.len() - 1);
        for (round_index, text) in calls {
            let round = &run.threads[0].rounds[round_index as usize - 1];
            let j = choose_feedback(&round.verdicts, seed, 0, round_index).unwrap();
            assert!(!round.verdicts[j].judgment);
            assert_eq!(round.verdicts[j].reasoning, text);
        }
    }

    #[test]
    fn judged_runs_carry_exec_results() {
        let sim = simulator(|_| {});
        let run = Orchestrator::new(&sim)
            .with_judge(&LatentJudge)
            .run_pipeline(&problem(), &config(3, 2, 2, 8))
            .unwrap();
        assert!(run.config.judge_attached);
        for (_, round) in run.rounds() {
            let exec = round.exec_result.as_ref().unwrap();
            assert_eq!(exec.is_correct(), round.candidate.latent.unwrap().is_correct());
        }
        run.validate().unwrap();
    }

    struct FailingBackend {
        inner: SimulatorBackend,
        fail_thread: Option<u32>,
    }

    impl Backend for FailingBackend {
        fn id(&self) -> &str {
            "flaky"
        }
        fn generate(&self, p: &Problem, s: &CallSite) -> Result<Candidate, BackendError> {
            if self.fail_thread.is_none_or(|t| t == s.thread_index) {
                return Err(BackendError::Transport {
                    attempts: 3,
                    message: "connection refused".into(),
                });
            }
            self.inner.generate(p, s)
        }
        fn verify(&self, p: &Problem, c: &Candidate, s: &CallSite) -> Result<Verdict, BackendError> {
            self.inner.verify(p, c, s)
        }
        fn refine(&self, p: &Problem, c: &Candidate, f: &str, s: &CallSite) -> Result<Candidate, BackendError> {
            self.inner.refine(p, c, f, s)
        }
    }

    #[test]
    fn failed_thread_is_excluded_without_aborting_siblings() {
        let backend = FailingBackend {
            inner: simulator(|_| {}),
            fail_thread: Some(1),
        };
        let sink = RecordingSink::default();
        let run = Orchestrator::new(&backend)
            .with_events(&sink)
            .run_pipeline(&problem(), &config(3, 2, 2, 4))
            .unwrap();
        assert!(run.threads[1].is_failed());
        assert!(run.threads[1].error.as_deref().unwrap().contains("3 attempt"));
        assert_ne!(run.selected.thread_index, 1);
        run.validate().unwrap();
        let events = sink.0.lock().unwrap();
        assert!(events
            .iter()
            .any(|e| matches!(e, ProgressEvent::ThreadFailed { thread: 1, .. })));
        assert!(matches!(events.last(), Some(ProgressEvent::Selected { .. })));
    }

    #[test]
    fn all_threads_failing_is_a_pipeline_error() {
        let backend = FailingBackend {
            inner: simulator(|_| {}),
            fail_thread: None,
        };
        let err = Orchestrator::new(&backend)
            .run_pipeline(&problem(), &config(2, 1, 1, 0))
            .unwrap_err();
        assert!(matches!(err, PipelineError::AllThreadsFailed { threads: 2, .. }));
    }

    #[test]
    fn concurrent_and_sequential_runs_agree() {
        let sim = simulator(|_| {});
        let mut cfg = config(4, 3, 4, 21);
        let sequential = Orchestrator::new(&sim).run_pipeline(&problem(), &cfg).unwrap();
        cfg.concurrency_cap = 8;
        let mut concurrent = Orchestrator::new(&sim).run_pipeline(&problem(), &cfg).unwrap();
        concurrent.config.concurrency_cap = 1;
        assert_eq!(sequential, concurrent);
    }

    #[test]
    fn verify_candidate_returns_v_verdicts_in_order() {
        let sim = simulator(|p| {
            p.p_first_correct = 1.0;
            p.verifier_tpr = 1.0;
        });
        let orchestrator = Orchestrator::new(&sim);
        let cfg = config(1, 1, 8, 2);
        let site = CallSite {
            run_seed: 2,
            thread_index: 0,
            round_index: 1,
            role: CallRole::Generation,
            verdict_index: None,
            max_tokens: cfg.max_generation_tokens,
            temperature: 1.0,
        };
        let c = sim.generate(&problem(), &site).unwrap();
        let verdicts = orchestrator.verify_candidate(&problem(), &c, &cfg, 2).unwrap();
        assert_eq!(verdicts.len(), 8);
        assert!(verdicts.iter().all(|v| v.judgment && v.parse_status == ParseStatus::Parsed));
        let single = orchestrator.verify_candidate(&problem(), &c, &config(1, 1, 1, 2), 2).unwrap();
        assert_eq!(single.len(), 1);
        assert_eq!(single[0], verdicts[0]);
    }

    #[test]
    fn token_budget_bound_holds() {
        let sim = simulator(|p| {
            p.generation_tokens = TokenShape::new(900.0, 0.8);
            p.verification_tokens = TokenShape::new(300.0, 0.8);
        });
        for s in 0..100 {
            let mut cfg = config(3, 3, 2, s);
            cfg.max_generation_tokens = 1_000;
            cfg.max_verification_tokens = 400;
            let run = Orchestrator::new(&sim).run_pipeline(&problem(), &cfg).unwrap();
            let bound = 3 * 3 * (1_000 + 2 * 400);
            assert!(run.total_tokens <= bound);
            assert_eq!(run.total_tokens, token_totals(&run).total);
        }
    }
}
