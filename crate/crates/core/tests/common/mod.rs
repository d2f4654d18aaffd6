#![allow(dead_code)]

use std::path::PathBuf;

use parallel_thinking::domain::{Candidate, CompareMode, Problem, SolutionRole, TestCase};

pub fn fixture(path: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(path)
}

pub fn golden(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(format!("{name}.rendered.txt"));
    std::fs::read_to_string(path).expect("golden file")
}

pub fn golden_problem() -> Problem {
    Problem {
        id: "sum".into(),
        statement: "Given two integers a and b, print a+b.\n\nInput: one line with a and b.\nOutput: their sum."
            .into(),
        tests: vec![TestCase {
            input: b"1 2\n".to_vec(),
            expected_output: b"3\n".to_vec(),
        }],
        time_limit_ms: 1000,
        memory_limit_mib: 256,
        compare_mode: CompareMode::TokenNormalized,
    }
}

pub fn golden_candidate() -> Candidate {
    Candidate {
        problem_id: "sum".into(),
        thread_index: 0,
        round_index: 1,
        role: SolutionRole::Generation,
        explanation: "Read both numbers and add them.".into(),
        source_code: "#include <iostream>\nint main(){long long a,b;std::cin>>a>>b;std::cout<<a+b;}"
            .into(),
        token_count: 42,
        truncated: false,
        usage_estimated: false,
        latent: None,
    }
}

pub const GOLDEN_FEEDBACK: &str = "The solution overflows when a and b are near 10^18.";

pub fn have_gxx() -> bool {
    std::process::Command::new("g++")
        .arg("--version")
        .output()
        .is_ok_and(|o| o.status.success())
}
