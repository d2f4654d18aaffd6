//! Shared data types for pipeline runs and their canonical line-delimited
//! JSON form.
//!
//! Every value here is immutable once built. [`RunRecord::validate`] checks
//! the cross-field invariants (score = positive verdict count, token totals,
//! selection pointer) and is applied on both serialization and parsing.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Version written into every serialized [`RunRecord`].
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DomainError {
    #[error("invalid {field}: {reason}")]
    Validation { field: String, reason: String },
    #[error("unsupported schema_version {found} (expected {SCHEMA_VERSION})")]
    SchemaVersion { found: u32 },
    #[error("malformed run record: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl DomainError {
    fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        DomainError::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

/// How a program's stdout is compared against the expected output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CompareMode {
    Exact,
    #[default]
    TokenNormalized,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestCase {
    pub input: Vec<u8>,
    pub expected_output: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub id: String,
    pub statement: String,
    pub tests: Vec<TestCase>,
    pub time_limit_ms: u64,
    pub memory_limit_mib: u64,
    pub compare_mode: CompareMode,
}

/// On-disk `problem.json`; tests live next to it in `tests/NN.in` / `tests/NN.out`.
#[derive(Debug, Serialize, Deserialize)]
struct ProblemManifest {
    id: String,
    statement: String,
    time_limit_ms: u64,
    memory_limit_mib: u64,
    #[serde(default)]
    compare_mode: CompareMode,
}

impl Problem {
    pub fn validate(&self) -> Result<(), DomainError> {
        if self.id.is_empty() {
            return Err(DomainError::invalid("problem.id", "must be nonempty"));
        }
        if self.tests.is_empty() {
            return Err(DomainError::invalid("problem.tests", "at least one test required"));
        }
        if self.time_limit_ms == 0 {
            return Err(DomainError::invalid("problem.time_limit_ms", "must be > 0"));
        }
        if self.memory_limit_mib == 0 {
            return Err(DomainError::invalid("problem.memory_limit_mib", "must be > 0"));
        }
        Ok(())
    }

    /// Loads a problem directory: `problem.json` plus `tests/NN.in`/`tests/NN.out`
    /// pairs, ordered lexicographically by stem.
    pub fn load_dir(dir: &Path) -> Result<Problem, DomainError> {
        let io_err = |path: &Path| {
            let path = path.to_path_buf();
            move |source| DomainError::Io { path, source }
        };
        let manifest_path = dir.join("problem.json");
        let raw = fs::read_to_string(&manifest_path).map_err(io_err(&manifest_path))?;
        let manifest: ProblemManifest = serde_json::from_str(&raw)?;

        let tests_dir = dir.join("tests");
        let mut stems: Vec<String> = fs::read_dir(&tests_dir)
            .map_err(io_err(&tests_dir))?
            .filter_map(|entry| entry.ok())
            .filter_map(|entry| {
                let name = entry.file_name().into_string().ok()?;
                name.strip_suffix(".in").map(str::to_owned)
            })
            .collect();
        stems.sort();

        let mut tests = Vec::with_capacity(stems.len());
        for stem in &stems {
            let input_path = tests_dir.join(format!("{stem}.in"));
            let output_path = tests_dir.join(format!("{stem}.out"));
            let input = fs::read(&input_path).map_err(io_err(&input_path))?;
            let expected_output = fs::read(&output_path).map_err(io_err(&output_path))?;
            tests.push(TestCase {
                input,
                expected_output,
            });
        }

        let problem = Problem {
            id: manifest.id,
            statement: manifest.statement,
            tests,
            time_limit_ms: manifest.time_limit_ms,
            memory_limit_mib: manifest.memory_limit_mib,
            compare_mode: manifest.compare_mode,
        };
        problem.validate()?;
        Ok(problem)
    }

    /// Loads every subdirectory of `root` that contains a `problem.json`,
    /// sorted by directory name.
    pub fn load_all(root: &Path) -> Result<Vec<Problem>, DomainError> {
        let mut dirs: Vec<PathBuf> = fs::read_dir(root)
            .map_err(|source| DomainError::Io {
                path: root.to_path_buf(),
                source,
            })?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|path| path.join("problem.json").is_file())
            .collect();
        dirs.sort();
        let problems = dirs
            .iter()
            .map(|dir| Problem::load_dir(dir))
            .collect::<Result<Vec<_>, _>>()?;
        let mut seen = std::collections::BTreeSet::new();
        for problem in &problems {
            if !seen.insert(problem.id.as_str()) {
                return Err(DomainError::invalid(
                    "problem.id",
                    format!("duplicate id {:?}", problem.id),
                ));
            }
        }
        Ok(problems)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolutionRole {
    Generation,
    Refinement,
}

/// Ground-truth correctness attached by the simulator.
///
/// Never rendered into any prompt; only the simulator's own verify path,
/// the latent judge stub, and test code read it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Latent(bool);

impl Latent {
    pub fn new(correct: bool) -> Self {
        Latent(correct)
    }

    pub fn is_correct(self) -> bool {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub problem_id: String,
    pub thread_index: u32,
    pub round_index: u32,
    pub role: SolutionRole,
    pub explanation: String,
    pub source_code: String,
    pub token_count: u64,
    pub truncated: bool,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub usage_estimated: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latent: Option<Latent>,
}

impl Candidate {
    /// Text substituted for `{solution}` in verification and refinement prompts.
    pub fn render_solution(&self) -> String {
        let code = format!("```cpp\n{}\n```", self.source_code.trim_end_matches('\n'));
        if self.explanation.is_empty() {
            code
        } else {
            format!("{}\n\n{}", self.explanation, code)
        }
    }

    pub fn validate(&self, field: &str) -> Result<(), DomainError> {
        if self.round_index < 1 {
            return Err(DomainError::invalid(format!("{field}.round_index"), "must be >= 1"));
        }
        let expected = if self.round_index == 1 {
            SolutionRole::Generation
        } else {
            SolutionRole::Refinement
        };
        if self.role != expected {
            return Err(DomainError::invalid(
                format!("{field}.role"),
                "generation iff round_index = 1",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseStatus {
    Parsed,
    Malformed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub judgment: bool,
    pub reasoning: String,
    pub token_count: u64,
    pub parse_status: ParseStatus,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub usage_estimated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecStatus {
    Accepted,
    WrongAnswer,
    TimeLimit,
    RuntimeError,
    CompileError,
    TruncatedInput,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub status: ExecStatus,
    pub wall_time_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecReport {
    pub status: ExecStatus,
    pub passed: u32,
    pub total: u32,
    pub binary_score: u8,
    pub per_test: Vec<TestOutcome>,
}

impl ExecReport {
    pub fn is_correct(&self) -> bool {
        self.binary_score == 1
    }

    /// Report for a candidate rejected before any test ran.
    pub fn rejected(status: ExecStatus, total: u32) -> Self {
        ExecReport {
            status,
            passed: 0,
            total,
            binary_score: 0,
            per_test: Vec::new(),
        }
    }

    pub fn validate(&self, field: &str) -> Result<(), DomainError> {
        let accepted = self.status == ExecStatus::Accepted;
        let all_passed = self.passed == self.total;
        let scored = match self.binary_score {
            0 => false,
            1 => true,
            _ => {
                return Err(DomainError::invalid(
                    format!("{field}.binary_score"),
                    "must be 0 or 1",
                ))
            }
        };
        if accepted != all_passed || accepted != scored {
            return Err(DomainError::invalid(
                format!("{field}.binary_score"),
                "binary_score = 1 iff status = accepted iff passed = total",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub candidate: Candidate,
    pub verdicts: Vec<Verdict>,
    pub score: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exec_result: Option<ExecReport>,
}

impl RoundRecord {
    pub fn new(candidate: Candidate, verdicts: Vec<Verdict>, exec_result: Option<ExecReport>) -> Self {
        let score = positive_votes(&verdicts);
        RoundRecord {
            candidate,
            verdicts,
            score,
            exec_result,
        }
    }

    pub fn tokens(&self) -> u64 {
        self.candidate.token_count + self.verdicts.iter().map(|v| v.token_count).sum::<u64>()
    }
}

/// Number of verdicts judging the candidate correct.
pub fn positive_votes(verdicts: &[Verdict]) -> u32 {
    verdicts.iter().filter(|v| v.judgment).count() as u32
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    UnanimousEarlyStop,
    MaxRoundsReached,
    /// A backend call exhausted its retries; the thread is excluded from selection.
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThreadRecord {
    pub thread_index: u32,
    pub rounds: Vec<RoundRecord>,
    pub termination: Termination,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ThreadRecord {
    pub fn tokens(&self) -> u64 {
        self.rounds.iter().map(RoundRecord::tokens).sum()
    }

    pub fn is_failed(&self) -> bool {
        self.termination == Termination::Failed
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub threads: u32,
    pub max_rounds: u32,
    pub verdicts: u32,
    pub max_generation_tokens: u64,
    pub max_verification_tokens: u64,
    pub temperature: f64,
    pub concurrency_cap: u32,
    pub rng_seed: u64,
    pub backend_id: String,
    pub judge_attached: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            threads: 1,
            max_rounds: 1,
            verdicts: 1,
            max_generation_tokens: 32_768,
            max_verification_tokens: 16_384,
            temperature: 1.0,
            concurrency_cap: 1,
            rng_seed: 0,
            backend_id: "simulator".to_owned(),
            judge_attached: false,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), DomainError> {
        let positive = [
            ("pipeline.threads", self.threads as u64),
            ("pipeline.max_rounds", self.max_rounds as u64),
            ("pipeline.verdicts", self.verdicts as u64),
            ("pipeline.concurrency_cap", self.concurrency_cap as u64),
            ("pipeline.max_generation_tokens", self.max_generation_tokens),
            ("pipeline.max_verification_tokens", self.max_verification_tokens),
        ];
        for (field, value) in positive {
            if value == 0 {
                return Err(DomainError::invalid(field, "must be >= 1"));
            }
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(DomainError::invalid("pipeline.temperature", "must be a finite value >= 0"));
        }
        Ok(())
    }

    /// Stable short hash of the configuration, used to match store lines on resume.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let canonical = serde_json::to_vec(self).expect("config serializes");
        let digest = Sha256::digest(&canonical);
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Points at one round of one thread.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RoundRef {
    pub thread_index: u32,
    pub round_index: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema_version: u32,
    pub problem_id: String,
    pub config: PipelineConfig,
    pub threads: Vec<ThreadRecord>,
    pub selected: RoundRef,
    pub total_tokens: u64,
    pub rng_seed: u64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub tokens_estimated: bool,
}

impl RunRecord {
    pub fn round(&self, at: RoundRef) -> Option<&RoundRecord> {
        let thread = self.threads.get(at.thread_index as usize)?;
        if at.round_index == 0 {
            return None;
        }
        thread.rounds.get(at.round_index as usize - 1)
    }

    pub fn selected_round(&self) -> &RoundRecord {
        self.round(self.selected)
            .expect("validated run points at an existing round")
    }

    /// Sum of token counts over every candidate and verdict.
    pub fn recomputed_tokens(&self) -> u64 {
        self.threads.iter().map(ThreadRecord::tokens).sum()
    }

    pub fn rounds(&self) -> impl Iterator<Item = (RoundRef, &RoundRecord)> {
        self.threads.iter().flat_map(|thread| {
            thread.rounds.iter().map(move |round| {
                (
                    RoundRef {
                        thread_index: thread.thread_index,
                        round_index: round.candidate.round_index,
                    },
                    round,
                )
            })
        })
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(DomainError::SchemaVersion {
                found: self.schema_version,
            });
        }
        if self.problem_id.is_empty() {
            return Err(DomainError::invalid("problem_id", "must be nonempty"));
        }
        self.config.validate()?;
        let cfg = &self.config;
        if self.threads.len() != cfg.threads as usize {
            return Err(DomainError::invalid(
                "threads",
                format!("expected {} threads, found {}", cfg.threads, self.threads.len()),
            ));
        }
        for (t, thread) in self.threads.iter().enumerate() {
            let field = format!("threads[{t}]");
            if thread.thread_index as usize != t {
                return Err(DomainError::invalid(format!("{field}.thread_index"), "out of order"));
            }
            validate_thread(thread, cfg, &self.problem_id, &field)?;
        }
        if self.total_tokens != self.recomputed_tokens() {
            return Err(DomainError::invalid(
                "total_tokens",
                format!(
                    "stored {} but candidates and verdicts sum to {}",
                    self.total_tokens,
                    self.recomputed_tokens()
                ),
            ));
        }
        match self.threads.get(self.selected.thread_index as usize) {
            Some(thread) if !thread.is_failed() && self.round(self.selected).is_some() => {}
            _ => {
                return Err(DomainError::invalid(
                    "selected",
                    format!(
                        "no round {} in a live thread {}",
                        self.selected.round_index, self.selected.thread_index
                    ),
                ))
            }
        }
        Ok(())
    }
}

fn validate_thread(
    thread: &ThreadRecord,
    cfg: &PipelineConfig,
    problem_id: &str,
    field: &str,
) -> Result<(), DomainError> {
    if thread.rounds.len() > cfg.max_rounds as usize {
        return Err(DomainError::invalid(format!("{field}.rounds"), "more than max_rounds rounds"));
    }
    if thread.rounds.is_empty() && !thread.is_failed() {
        return Err(DomainError::invalid(format!("{field}.rounds"), "live thread has no rounds"));
    }
    for (r, round) in thread.rounds.iter().enumerate() {
        let rfield = format!("{field}.rounds[{r}]");
        let cand = &round.candidate;
        cand.validate(&format!("{rfield}.candidate"))?;
        if cand.round_index as usize != r + 1 || cand.thread_index != thread.thread_index {
            return Err(DomainError::invalid(
                format!("{rfield}.candidate"),
                "thread/round index does not match position",
            ));
        }
        if cand.problem_id != problem_id {
            return Err(DomainError::invalid(
                format!("{rfield}.candidate.problem_id"),
                "does not match run problem_id",
            ));
        }
        if round.verdicts.len() != cfg.verdicts as usize {
            return Err(DomainError::invalid(
                format!("{rfield}.verdicts"),
                format!("expected {} verdicts", cfg.verdicts),
            ));
        }
        for (v, verdict) in round.verdicts.iter().enumerate() {
            if verdict.parse_status == ParseStatus::Malformed && verdict.judgment {
                return Err(DomainError::invalid(
                    format!("{rfield}.verdicts[{v}].judgment"),
                    "malformed verdict must be negative",
                ));
            }
        }
        if round.score != positive_votes(&round.verdicts) {
            return Err(DomainError::invalid(
                format!("{rfield}.score"),
                "does not equal the number of positive verdicts",
            ));
        }
        if cfg.judge_attached != round.exec_result.is_some() {
            return Err(DomainError::invalid(
                format!("{rfield}.exec_result"),
                "present iff judge_attached",
            ));
        }
        if let Some(report) = &round.exec_result {
            report.validate(&format!("{rfield}.exec_result"))?;
        }
        let unanimous = round.score == cfg.verdicts;
        let last = r + 1 == thread.rounds.len();
        if unanimous && !last {
            return Err(DomainError::invalid(
                format!("{rfield}.score"),
                "unanimous round must end its thread",
            ));
        }
        if last && !thread.is_failed() {
            let expected = if unanimous {
                Termination::UnanimousEarlyStop
            } else {
                Termination::MaxRoundsReached
            };
            if thread.termination != expected {
                return Err(DomainError::invalid(
                    format!("{field}.termination"),
                    format!("expected {expected:?}"),
                ));
            }
            if !unanimous && thread.rounds.len() != cfg.max_rounds as usize {
                return Err(DomainError::invalid(
                    format!("{field}.rounds"),
                    "thread stopped before max_rounds without a unanimous round",
                ));
            }
        }
    }
    Ok(())
}

/// Serializes a run as a single JSON line terminated by `\n`.
pub fn serialize_run(run: &RunRecord) -> Result<String, DomainError> {
    run.validate()?;
    let mut line = serde_json::to_string(run)?;
    line.push('\n');
    Ok(line)
}

/// Parses one store line, rejecting unknown schema versions and invalid runs.
pub fn deserialize_run(line: &str) -> Result<RunRecord, DomainError> {
    let value: serde_json::Value = serde_json::from_str(line.trim_end())?;
    let version = value
        .get("schema_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| DomainError::invalid("schema_version", "missing"))?;
    if version != SCHEMA_VERSION as u64 {
        return Err(DomainError::SchemaVersion {
            found: version as u32,
        });
    }
    let run: RunRecord = serde_json::from_value(value)?;
    run.validate()?;
    Ok(run)
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn verdict(judgment: bool, tokens: u64) -> Verdict {
        Verdict {
            judgment,
            reasoning: if judgment { "ok".into() } else { "bad".into() },
            token_count: tokens,
            parse_status: ParseStatus::Parsed,
            usage_estimated: false,
        }
    }

    pub fn candidate(thread: u32, round: u32, tokens: u64) -> Candidate {
        Candidate {
            problem_id: "p".into(),
            thread_index: thread,
            round_index: round,
            role: if round == 1 {
                SolutionRole::Generation
            } else {
                SolutionRole::Refinement
            },
            explanation: "explain".into(),
            source_code: "int main(){}".into(),
            token_count: tokens,
            truncated: false,
            usage_estimated: false,
            latent: None,
        }
    }

    pub fn minimal_run() -> RunRecord {
        let round = RoundRecord::new(candidate(0, 1, 100), vec![verdict(true, 30)], None);
        RunRecord {
            schema_version: SCHEMA_VERSION,
            problem_id: "p".into(),
            config: PipelineConfig::default(),
            threads: vec![ThreadRecord {
                thread_index: 0,
                rounds: vec![round],
                termination: Termination::UnanimousEarlyStop,
                error: None,
            }],
            selected: RoundRef {
                thread_index: 0,
                round_index: 1,
            },
            total_tokens: 130,
            rng_seed: 7,
            tokens_estimated: false,
        }
    }
}
