//! Analysis math over finished runs: per-turn rewards, advantage estimators,
//! the clipped surrogate, verification metrics, pass@k, log-linear scaling
//! fits, and selection-accuracy reports.

pub mod advantages;
pub mod fit;
pub mod metrics;
pub mod report;
pub mod turns;

use thiserror::Error;

pub use advantages::{
    clipped_surrogate_loss, discounted_returns, grpo_advantages, ppo_clip_term,
    whitened_advantages, AdvantageBatch, AdvantageEntry, Estimator,
};
pub use fit::{loglinear_fit, LogLinearFit, ScalingPoint};
pub use metrics::{pass_at_k, verification_metrics, VerificationMetrics};
pub use report::{
    pass_at_k_table, scaling_csv, scaling_points, selection_accuracy_report, verification_pairs,
    config_label, CurvePoint, PassAtK, SelectionReport,
};
pub use turns::{per_turn_rewards, Turn, TurnRewardTable, TurnRole};

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("missing exec_result for {0}")]
    MissingExecResult(String),
    #[error("runs without exec results: {}", .0.join(", "))]
    MissingExecResults(Vec<String>),
    #[error("{0}")]
    Domain(String),
}
