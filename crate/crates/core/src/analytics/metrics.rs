use serde::{Deserialize, Serialize};

use super::AnalysisError;

/// Verification quality with "judged correct" as the positive class.
/// Precision (recall) is absent when nothing was predicted (actually) positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerificationMetrics {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub accuracy: f64,
    pub true_positives: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
    pub true_negatives: u64,
}

pub fn verification_metrics(
    judgments: &[bool],
    truths: &[bool],
) -> Result<VerificationMetrics, AnalysisError> {
    if judgments.len() != truths.len() {
        return Err(AnalysisError::Domain(format!(
            "{} judgments but {} truths",
            judgments.len(),
            truths.len()
        )));
    }
    if judgments.is_empty() {
        return Err(AnalysisError::Domain("no verdicts to score".into()));
    }
    let (mut tp, mut fp, mut fn_, mut tn) = (0u64, 0u64, 0u64, 0u64);
    for (&judged, &truth) in judgments.iter().zip(truths) {
        match (judged, truth) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    let ratio = |num: u64, den: u64| (den > 0).then(|| num as f64 / den as f64);
    Ok(VerificationMetrics {
        precision: ratio(tp, tp + fp),
        recall: ratio(tp, tp + fn_),
        accuracy: (tp + tn) as f64 / judgments.len() as f64,
        true_positives: tp,
        false_positives: fp,
        false_negatives: fn_,
        true_negatives: tn,
    })
}

/// Unbiased pass@k from `n` samples of which `c` are correct:
/// `1 - C(n-c, k) / C(n, k)`, evaluated as a product of ratios so it never
/// forms a binomial coefficient.
pub fn pass_at_k(n: u64, c: u64, k: u64) -> Result<f64, AnalysisError> {
    if c > n {
        return Err(AnalysisError::Domain(format!("c = {c} exceeds n = {n}")));
    }
    if k == 0 || k > n {
        return Err(AnalysisError::Domain(format!("k = {k} must be in 1..={n}")));
    }
    if n - c < k {
        return Ok(1.0);
    }
    // C(n-c, k) / C(n, k) = prod_{i = n-c+1}^{n} (1 - k / i)
    let miss: f64 = ((n - c + 1)..=n).map(|i| 1.0 - k as f64 / i as f64).product();
    Ok(1.0 - miss)
}
