//! Role prompt templates.
//!
//! Placeholders are `{problem}`, `{solution}` and `{verdict_reasoning}`.
//! Substitution is single-pass: text inserted for one placeholder is never
//! scanned for further placeholders.

use crate::domain::{Candidate, Problem};

use super::{BackendError, CallRole};

pub const GENERATION_TEMPLATE: &str = "\
You are solving the given programming contest problem with a C++ solution.

{problem}";

pub const VERIFICATION_TEMPLATE: &str = "\
You are given a programming contest problem and a proposed solution. Your task is to determine whether the solution is correct (should receive Accepted) or incorrect (e.g., Wrong Answer, Time Limit Exceeded, Runtime Error, etc.).

Important requirements:
-- Carefully reason about all edge cases and constraints.
-- If you decide the solution is incorrect, you MUST identify at least one clear reason, such as a logical flaw, missing case, incorrect complexity, or a specific counterexample.
-- A counterexample should be described concretely (e.g., a specific input and what goes wrong).
-- Do NOT hedge: pick exactly one verdict, Correct or Incorrect.

Your response MUST follow EXACTLY this format (with no extra text before or after):
Line 1: \"Verdict: Correct.\" or \"Verdict: Incorrect.\"
Line 2+: One or few short paragraphs explaining the reasoning for that verdict. If Incorrect, you MUST mention at least one specific failing scenario, logical flaw, or counterexample.

{problem}

{solution}";

pub const REFINEMENT_TEMPLATE: &str = "\
You are correcting a programming contest submission. A judge provided a verdict explaining why the prior attempt failed. Read the feedback carefully and emit an improved C++ solution. The judge feedback may be noisy and the previous solution might actually be correct, but you must still output a solution using the same format (solution explanation followed by reference code).

{problem}

{solution}

{verdict_reasoning}";

pub fn template(role: CallRole) -> &'static str {
    match role {
        CallRole::Generation => GENERATION_TEMPLATE,
        CallRole::Verification => VERIFICATION_TEMPLATE,
        CallRole::Refinement => REFINEMENT_TEMPLATE,
    }
}

/// Renders the prompt for `role`.
///
/// Generation takes neither `prior` nor `feedback`; verification needs `prior`;
/// refinement needs both.
pub fn render_prompt(
    role: CallRole,
    problem: &Problem,
    prior: Option<&Candidate>,
    feedback: Option<&str>,
) -> Result<String, BackendError> {
    let contract = |msg: &str| Err(BackendError::Contract(format!("{role:?} prompt: {msg}")));
    match (role, prior.is_some(), feedback.is_some()) {
        (CallRole::Generation, false, false)
        | (CallRole::Verification, true, false)
        | (CallRole::Refinement, true, true) => {}
        (CallRole::Generation, ..) => return contract("takes no prior solution or feedback"),
        (CallRole::Verification, false, _) => return contract("missing {solution}"),
        (CallRole::Verification, true, true) => return contract("takes no feedback"),
        (CallRole::Refinement, false, _) => return contract("missing {solution}"),
        (CallRole::Refinement, true, false) => return contract("missing {verdict_reasoning}"),
    }
    let solution = prior.map(Candidate::render_solution);
    Ok(substitute(template(role), |name| match name {
        "problem" => Some(problem.statement.as_str()),
        "solution" => solution.as_deref(),
        "verdict_reasoning" => feedback,
        _ => None,
    }))
}

fn substitute<'a>(template: &str, lookup: impl Fn(&str) -> Option<&'a str>) -> String {
    let mut out = String::with_capacity(template.len() + 256);
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        match after.find('}').and_then(|close| lookup(&after[..close]).map(|v| (close, v))) {
            Some((close, value)) => {
                out.push_str(value);
                rest = &after[close + 1..];
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}
