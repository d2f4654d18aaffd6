use serde::{Deserialize, Serialize};

use super::AnalysisError;

/// Mean generated tokens and accuracy for one checkpoint or configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub label: String,
    pub mean_tokens: f64,
    pub accuracy: f64,
}

/// `accuracy = slope * ln(tokens) + intercept`, fit by ordinary least squares.
/// The logarithm is natural; `slope` is accuracy per e-fold of tokens.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogLinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Standard errors; absent with exactly two points.
    pub slope_std_error: Option<f64>,
    pub intercept_std_error: Option<f64>,
    pub n_points: usize,
}

impl LogLinearFit {
    pub fn predict(&self, tokens: f64) -> f64 {
        self.slope * tokens.ln() + self.intercept
    }

    /// Token budget at which the fitted line reaches `accuracy`.
    pub fn tokens_for(&self, accuracy: f64) -> Option<f64> {
        (self.slope != 0.0).then(|| ((accuracy - self.intercept) / self.slope).exp())
    }
}

pub fn loglinear_fit(points: &[ScalingPoint]) -> Result<LogLinearFit, AnalysisError> {
    if points.len() < 2 {
        return Err(AnalysisError::Domain("log-linear fit needs at least 2 points".into()));
    }
    if let Some(bad) = points.iter().find(|p| !(p.mean_tokens > 0.0)) {
        return Err(AnalysisError::Domain(format!(
            "point {:?} has non-positive mean_tokens",
            bad.label
        )));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.mean_tokens.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.accuracy).collect();
    let x_mean = xs.iter().sum::<f64>() / n;
    let y_mean = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - x_mean).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - x_mean) * (y - y_mean)).sum();
    let syy: f64 = ys.iter().map(|y| (y - y_mean).powi(2)).sum();
    if sxx <= f64::EPSILON * xs.iter().map(|x| x * x).sum::<f64>() {
        return Err(AnalysisError::Domain(
            "all points share the same token count".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let sse: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - (slope * x + intercept)).powi(2))
        .sum();
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        (1.0 - sse / syy).clamp(0.0, 1.0)
    };
    let (slope_std_error, intercept_std_error) = if points.len() > 2 {
        let s2 = sse / (n - 2.0);
        let se_slope = (s2 / sxx).sqrt();
        let se_intercept = (s2 * (1.0 / n + x_mean * x_mean / sxx)).sqrt();
        (Some(se_slope), Some(se_intercept))
    } else {
        (None, None)
    };
    Ok(LogLinearFit {
        slope,
        intercept,
        r_squared,
        slope_std_error,
        intercept_std_error,
        n_points: points.len(),
    })
}
