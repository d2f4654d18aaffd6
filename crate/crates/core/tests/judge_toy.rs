mod common;

use common::{fixture, have_gxx};
use parallel_thinking::domain::{Candidate, ExecStatus, Problem, SolutionRole};
use parallel_thinking::judge::{ExecutionJudge, JudgeConfig, SolutionJudge};

fn submission(problem: &Problem, file: &str) -> Candidate {
    Candidate {
        problem_id: problem.id.clone(),
        thread_index: 0,
        round_index: 1,
        role: SolutionRole::Generation,
        explanation: String::new(),
        source_code: std::fs::read_to_string(fixture(&format!("solutions/{file}"))).unwrap(),
        token_count: 100,
        truncated: false,
        usage_estimated: false,
        latent: None,
    }
}

fn toy(name: &str) -> Problem {
    Problem::load_dir(&fixture(&format!("problems/{name}"))).unwrap()
}

#[test]
fn toy_set_statuses() {
    if !have_gxx() {
        eprintln!("g++ not available; skipping");
        return;
    }
    let judge = ExecutionJudge::new(JudgeConfig::default()).unwrap();
    let cases = [
        ("aplusb", ExecStatus::Accepted, 1),
        ("offbyone", ExecStatus::WrongAnswer, 0),
        ("slow", ExecStatus::TimeLimit, 0),
    ];
    for (name, status, score) in cases {
        let problem = toy(name);
        let report = judge.judge_solution(&problem, &submission(&problem, &format!("{name}.cpp"))).unwrap();
        assert_eq!((report.status, report.binary_score), (status, score), "{name}");
        report.validate("exec_result").unwrap();
    }
}

#[test]
fn wrong_answer_stops_at_first_failure() {
    if !have_gxx() {
        return;
    }
    let judge = ExecutionJudge::new(JudgeConfig::default()).unwrap();
    let problem = toy("offbyone");
    let report = judge.judge_solution(&problem, &submission(&problem, "offbyone.cpp")).unwrap();
    assert_eq!(report.passed, 0);
    assert_eq!(report.total, 3);
    assert_eq!(report.per_test.len(), 1);
}

#[test]
fn truncated_candidate_is_never_compiled() {
    let mut config = JudgeConfig::default();
    config.toolchain = "missing".into();
    config.toolchains.insert(
        "missing".into(),
        serde_json::from_str(r#"{"compile_cmd": "/nonexistent/compiler {src}", "run_cmd": "{bin}"}"#).unwrap(),
    );
    let judge = ExecutionJudge::new(config).unwrap();
    let problem = toy("aplusb");
    let mut candidate = submission(&problem, "aplusb.cpp");
    candidate.truncated = true;
    let report = judge.judge_solution(&problem, &candidate).unwrap();
    assert_eq!(report.status, ExecStatus::TruncatedInput);
    assert_eq!(report.binary_score, 0);
}

#[test]
fn compile_error_is_reported() {
    if !have_gxx() {
        return;
    }
    let judge = ExecutionJudge::new(JudgeConfig::default()).unwrap();
    let problem = toy("aplusb");
    let mut candidate = submission(&problem, "aplusb.cpp");
    candidate.source_code = "int main( {".into();
    let report = judge.judge_solution(&problem, &candidate).unwrap();
    assert_eq!(report.status, ExecStatus::CompileError);
}

#[test]
fn runtime_error_is_reported() {
    if !have_gxx() {
        return;
    }
    let judge = ExecutionJudge::new(JudgeConfig::default()).unwrap();
    let problem = toy("aplusb");
    let mut candidate = submission(&problem, "aplusb.cpp");
    candidate.source_code = "#include <cstdlib>\nint main() { std::abort(); }\n".into();
    let report = judge.judge_solution(&problem, &candidate).unwrap();
    assert_eq!(report.status, ExecStatus::RuntimeError);
}
