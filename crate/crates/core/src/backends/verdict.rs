use crate::domain::{ParseStatus, Verdict};

const CORRECT: &str = "Verdict: Correct.";
const INCORRECT: &str = "Verdict: Incorrect.";

/// Parses a verification completion.
///
/// The first nonblank line must be exactly one of the two verdict forms
/// (case-sensitive, surrounding whitespace ignored); the trimmed remainder
/// becomes the reasoning. Anything else is a negative, malformed verdict that
/// keeps the full text as its reasoning.
pub fn parse_verdict(raw_completion: &str, token_count: u64) -> Verdict {
    let text = raw_completion.trim_start();
    let (first, rest) = text.split_once('\n').unwrap_or((text, ""));
    let judgment = match first.trim() {
        CORRECT => Some(true),
        INCORRECT => Some(false),
        _ => None,
    };
    match judgment {
        Some(judgment) => Verdict {
            judgment,
            reasoning: rest.trim().to_owned(),
            token_count,
            parse_status: ParseStatus::Parsed,
            usage_estimated: false,
        },
        None => Verdict {
            judgment: false,
            reasoning: raw_completion.to_owned(),
            token_count,
            parse_status: ParseStatus::Malformed,
            usage_estimated: false,
        },
    }
}

/// Inverse of [`parse_verdict`] for well-formed verdicts.
pub fn format_verdict(judgment: bool, reasoning: &str) -> String {
    let head = if judgment { CORRECT } else { INCORRECT };
    if reasoning.is_empty() {
        head.to_owned()
    } else {
        format!("{head}\n{reasoning}")
    }
}
