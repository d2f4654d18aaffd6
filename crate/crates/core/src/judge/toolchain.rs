use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Duration;

use super::sandbox::run_process;
use super::{outputs_match, JudgeError, ToolchainProfile};
use crate::domain::{CompareMode, ExecStatus, TestCase};

/// A compiled (or staged, for interpreted profiles) program.
#[derive(Debug, Clone)]
pub struct Artifact {
    pub dir: PathBuf,
    pub source: PathBuf,
    pub binary: PathBuf,
    run_template: String,
    enforce_memory_limit: bool,
}

#[derive(Debug)]
pub enum CompileOutcome {
    Compiled(Artifact),
    Failed { diagnostics: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub time_limit_ms: u64,
    pub memory_limit_mib: u64,
    pub slack_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestRun {
    pub status: ExecStatus,
    pub output: Vec<u8>,
    pub wall_time_ms: u64,
}

fn expand(template: &str, src: &Path, bin: &Path, input: Option<&Path>) -> Vec<String> {
    template
        .split_whitespace()
        .map(|word| {
            let mut arg = word
                .replace("{src}", &src.to_string_lossy())
                .replace("{bin}", &bin.to_string_lossy());
            if let Some(input) = input {
                arg = arg.replace("{input}", &input.to_string_lossy());
            }
            arg
        })
        .collect()
}

fn environment_error(argv: &[String], err: io::Error) -> JudgeError {
    let program = argv.first().map(String::as_str).unwrap_or("");
    if err.kind() == io::ErrorKind::NotFound {
        JudgeError::Environment(format!("`{program}` not found"))
    } else {
        JudgeError::Environment(format!("failed to start `{program}`: {err}"))
    }
}

/// Writes `source_code` into `scratch` and runs the profile's compile command.
///
/// A missing compiler is an environment error; a compiler that runs and
/// rejects the source is a [`CompileOutcome::Failed`].
pub fn compile(
    source_code: &str,
    profile: &ToolchainProfile,
    scratch: &Path,
    timeout_ms: u64,
) -> Result<CompileOutcome, JudgeError> {
    if source_code.trim().is_empty() {
        return Ok(CompileOutcome::Failed {
            diagnostics: "empty source".to_owned(),
        });
    }
    let source = scratch.join(&profile.source_file);
    let binary = scratch.join("solution.bin");
    fs::write(&source, source_code)
        .map_err(|e| JudgeError::Environment(format!("writing {}: {e}", source.display())))?;

    if let Some(template) = &profile.compile_cmd {
        let argv = expand(template, &source, &binary, None);
        let outcome = run_process(&argv, scratch, &[], Duration::from_millis(timeout_ms), None)
            .map_err(|e| environment_error(&argv, e))?;
        let ok = outcome.status.is_some_and(|s| s.success());
        if !ok {
            let mut diagnostics = String::from_utf8_lossy(&outcome.stderr).into_owned();
            diagnostics.push_str(&String::from_utf8_lossy(&outcome.stdout));
            if outcome.timed_out {
                diagnostics.push_str("\ncompilation timed out");
            }
            if diagnostics.trim().is_empty() {
                diagnostics = format!("compiler exited with {:?}", outcome.status);
            }
            return Ok(CompileOutcome::Failed { diagnostics });
        }
    }
    Ok(CompileOutcome::Compiled(Artifact {
        dir: scratch.to_path_buf(),
        source,
        binary,
        run_template: profile.run_cmd.clone(),
        enforce_memory_limit: profile.enforce_memory_limit,
    }))
}

/// Runs one test. The process is killed once `time_limit + slack` elapses;
/// any run longer than the time limit is reported as `time_limit`.
pub fn run_test(
    artifact: &Artifact,
    test: &TestCase,
    limits: &Limits,
    compare_mode: CompareMode,
) -> Result<TestRun, JudgeError> {
    let input_path = artifact.dir.join("input.txt");
    fs::write(&input_path, &test.input)
        .map_err(|e| JudgeError::Environment(format!("writing test input: {e}")))?;
    let argv = expand(
        &artifact.run_template,
        &artifact.source,
        &artifact.binary,
        Some(&input_path),
    );
    let memory = artifact
        .enforce_memory_limit
        .then(|| limits.memory_limit_mib.saturating_mul(1024 * 1024));
    let deadline = Duration::from_millis(limits.time_limit_ms + limits.slack_ms);
    let outcome = run_process(&argv, &artifact.dir, &test.input, deadline, memory)
        .map_err(|e| environment_error(&argv, e))?;

    let wall_time_ms = outcome.wall.as_millis() as u64;
    let status = if outcome.timed_out || wall_time_ms > limits.time_limit_ms {
        ExecStatus::TimeLimit
    } else if !outcome.status.is_some_and(|s| s.success()) {
        ExecStatus::RuntimeError
    } else if outputs_match(compare_mode, &outcome.stdout, &test.expected_output) {
        ExecStatus::Accepted
    } else {
        ExecStatus::WrongAnswer
    };
    Ok(TestRun {
        status,
        output: outcome.stdout,
        wall_time_ms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sh_profile(script_compile: Option<&str>) -> ToolchainProfile {
        ToolchainProfile {
            compile_cmd: script_compile.map(str::to_owned),
            run_cmd: "sh {src}".to_owned(),
            source_file: "main.sh".to_owned(),
            enforce_memory_limit: false,
        }
    }

    fn limits(time_limit_ms: u64) -> Limits {
        Limits {
            time_limit_ms,
            memory_limit_mib: 256,
            slack_ms: 50,
        }
    }

    fn test_case(input: &str, expected: &str) -> TestCase {
        TestCase {
            input: input.as_bytes().to_vec(),
            expected_output: expected.as_bytes().to_vec(),
        }
    }

    fn compiled(source: &str, dir: &Path) -> Artifact {
        match compile(source, &sh_profile(Some("sh -n {src}")), dir, 5_000).unwrap() {
            CompileOutcome::Compiled(a) => a,
            CompileOutcome::Failed { diagnostics } => panic!("{diagnostics}"),
        }
    }

    #[test]
    fn echo_program_is_accepted() {
        let dir = tempfile::tempdir().unwrap();
        let artifact = compiled("cat", dir.path());
        let run = run_test(&artifact, &test_case("42\n", "42"), &limits(2_000), CompareMode::TokenNormalized)
            .unwrap();
        assert_eq!(run.status, ExecStatus::Accepted);
        assert_eq!(run.output, b"42\n");
    }

    #[test]
    fn busy_loop_hits_time_limit() {
        let dir = tempfile::tempdir().unwrap();
        let artifact = compiled("while :; do :; done", dir.path());
        let run = run_test(&artifact, &test_case("", ""), &limits(100), CompareMode::Exact).unwrap();
        assert_eq!(run.status, ExecStatus::TimeLimit);
        assert!(run.wall_time_ms >= 100);
        assert!(run.wall_time_ms < 1_000, "killed late: {} ms", run.wall_time_ms);
    }

    #[test]
    fn nonzero_exit_is_runtime_error() {
        let dir = tempfile::tempdir().unwrap();
        let artifact = compiled("exit 3", dir.path());
        let run = run_test(&artifact, &test_case("", ""), &limits(2_000), CompareMode::Exact).unwrap();
        assert_eq!(run.status, ExecStatus::RuntimeError);
    }

    #[test]
    fn wrong_output_is_wrong_answer() {
        let dir = tempfile::tempdir().unwrap();
        let artifact = compiled("echo 5", dir.path());
        let run = run_test(&artifact, &test_case("", "6"), &limits(2_000), CompareMode::TokenNormalized)
            .unwrap();
        assert_eq!(run.status, ExecStatus::WrongAnswer);
    }

    #[test]
    fn syntax_error_and_empty_source_fail_to_compile() {
        let dir = tempfile::tempdir().unwrap();
        let outcome = compile("if then fi (", &sh_profile(Some("sh -n {src}")), dir.path(), 5_000).unwrap();
        match outcome {
            CompileOutcome::Failed { diagnostics } => assert!(!diagnostics.trim().is_empty()),
            CompileOutcome::Compiled(_) => panic!("expected failure"),
        }
        assert!(matches!(
            compile("  \n", &sh_profile(None), dir.path(), 5_000).unwrap(),
            CompileOutcome::Failed { .. }
        ));
    }

    #[test]
    fn missing_compiler_is_environment_error() {
        let dir = tempfile::tempdir().unwrap();
        let profile = sh_profile(Some("definitely-not-a-compiler-xyz {src}"));
        assert!(matches!(
            compile("x", &profile, dir.path(), 5_000),
            Err(JudgeError::Environment(_))
        ));
    }

    #[test]
    fn input_placeholder_names_the_test_file() {
        let dir = tempfile::tempdir().unwrap();
        let mut profile = sh_profile(None);
        profile.run_cmd = "sh {src} {input}".to_owned();
        let artifact = match compile("cat \"$1\"", &profile, dir.path(), 5_000).unwrap() {
            CompileOutcome::Compiled(a) => a,
            CompileOutcome::Failed { diagnostics } => panic!("{diagnostics}"),
        };
        let run = run_test(&artifact, &test_case("from file", "from file"), &limits(2_000), CompareMode::Exact)
            .unwrap();
        assert_eq!(run.status, ExecStatus::Accepted);
    }
}
