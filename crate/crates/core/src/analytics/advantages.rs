//! Advantage estimators and the PPO clipped surrogate.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::turns::{TurnRewardTable, TurnRole};
use super::AnalysisError;

pub const DEFAULT_DELTA: f64 = 1e-8;
pub const DEFAULT_EPSILON: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    TurnGroupedGrpo,
    BatchWhitened,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvantageEntry {
    pub turn: usize,
    pub role: TurnRole,
    pub reward: f64,
    pub advantage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvantageBatch {
    pub estimator: Estimator,
    /// Whitening guard; `None` for the turn-grouped estimator.
    pub delta: Option<f64>,
    /// Per-turn means (turn-grouped) or the single batch mean keyed by turn 0.
    pub turn_means: BTreeMap<usize, f64>,
    /// Batch standard deviation (whitened only).
    pub batch_std: Option<f64>,
    /// Turn indices whose group held a single trajectory.
    pub singleton_turns: Vec<usize>,
    pub trajectories: Vec<Vec<AdvantageEntry>>,
}

impl AdvantageBatch {
    pub fn advantages(&self) -> Vec<Vec<f64>> {
        self.trajectories
            .iter()
            .map(|t| t.iter().map(|e| e.advantage).collect())
            .collect()
    }
}

/// Turn-grouped advantages: `A_t = r_t - mean over the batch of r_t`.
///
/// Trajectories are aligned by absolute turn index; a trajectory without turn
/// `t` does not enter that turn's mean. No division by the group's spread.
pub fn grpo_advantages(batch: &[TurnRewardTable]) -> Result<AdvantageBatch, AnalysisError> {
    if batch.is_empty() {
        return Err(AnalysisError::Domain("advantage batch is empty".into()));
    }
    let mut groups: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for table in batch {
        check_increasing(table)?;
        for turn in &table.turns {
            let entry = groups.entry(turn.index).or_insert((0.0, 0));
            entry.0 += turn.reward;
            entry.1 += 1;
        }
    }
    let turn_means: BTreeMap<usize, f64> = groups
        .iter()
        .map(|(&t, &(sum, n))| (t, sum / n as f64))
        .collect();
    let singleton_turns: Vec<usize> = groups
        .iter()
        .filter(|(_, &(_, n))| n == 1)
        .map(|(&t, _)| t)
        .collect();
    if !singleton_turns.is_empty() {
        log::warn!("turns {singleton_turns:?} have a single trajectory; their advantages are 0");
    }
    let trajectories = batch
        .iter()
        .map(|table| {
            table
                .turns
                .iter()
                .map(|turn| {
                    let advantage = if singleton_turns.contains(&turn.index) {
                        0.0
                    } else {
                        turn.reward - turn_means[&turn.index]
                    };
                    AdvantageEntry {
                        turn: turn.index,
                        role: turn.role,
                        reward: turn.reward,
                        advantage,
                    }
                })
                .collect()
        })
        .collect();
    Ok(AdvantageBatch {
        estimator: Estimator::TurnGroupedGrpo,
        delta: None,
        turn_means,
        batch_std: None,
        singleton_turns,
        trajectories,
    })
}

/// Batch-level whitening: `A = (r - mu) / (sigma + delta)` with `mu`, `sigma`
/// the mean and population standard deviation of every reward in the batch,
/// regardless of role. The resulting advantages have mean 0 and standard
/// deviation `sigma / (sigma + delta)`; a constant batch yields all zeros.
pub fn whitened_advantages(
    batch: &[TurnRewardTable],
    delta: f64,
) -> Result<AdvantageBatch, AnalysisError> {
    if !(delta > 0.0) {
        return Err(AnalysisError::Domain(format!("delta must be > 0, got {delta}")));
    }
    let rewards: Vec<f64> = batch.iter().flat_map(|t| t.turns.iter().map(|x| x.reward)).collect();
    if rewards.len() < 2 {
        return Err(AnalysisError::Domain("whitening needs at least 2 turns".into()));
    }
    for table in batch {
        check_increasing(table)?;
    }
    let n = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let std = (rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n).sqrt();
    let trajectories = batch
        .iter()
        .map(|table| {
            table
                .turns
                .iter()
                .map(|turn| AdvantageEntry {
                    turn: turn.index,
                    role: turn.role,
                    reward: turn.reward,
                    advantage: (turn.reward - mean) / (std + delta),
                })
                .collect()
        })
        .collect();
    Ok(AdvantageBatch {
        estimator: Estimator::BatchWhitened,
        delta: Some(delta),
        turn_means: BTreeMap::from([(0, mean)]),
        batch_std: Some(std),
        singleton_turns: Vec::new(),
        trajectories,
    })
}

fn check_increasing(table: &TurnRewardTable) -> Result<(), AnalysisError> {
    if table.turns.windows(2).any(|w| w[0].index >= w[1].index) {
        return Err(AnalysisError::Domain("turn indices must strictly increase".into()));
    }
    Ok(())
}

/// `min(rho * A, clip(rho, 1 - eps, 1 + eps) * A)`.
pub fn ppo_clip_term(ratio: f64, advantage: f64, epsilon: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - epsilon, 1.0 + epsilon);
    (ratio * advantage).min(clipped * advantage)
}

/// Negated mean of [`ppo_clip_term`] over `(ratio, advantage)` pairs.
pub fn clipped_surrogate_loss(terms: &[(f64, f64)], epsilon: f64) -> f64 {
    if terms.is_empty() {
        return 0.0;
    }
    -terms
        .iter()
        .map(|&(ratio, advantage)| ppo_clip_term(ratio, advantage, epsilon))
        .sum::<f64>()
        / terms.len() as f64
}

/// `R_t = sum_{k >= t} gamma^(k - t) r_k`.
pub fn discounted_returns(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut running = 0.0;
    for (i, &r) in rewards.iter().enumerate().rev() {
        running = r + gamma * running;
        out[i] = running;
    }
    out
}
