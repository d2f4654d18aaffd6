use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::domain::{SolutionRole, ThreadRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TurnRole {
    Generation,
    Verification,
    Refinement,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    /// 1-based position in the trajectory.
    pub index: usize,
    pub role: TurnRole,
    pub reward: f64,
}

/// One trajectory's turns: solution, verification, solution, verification, ...
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TurnRewardTable {
    pub turns: Vec<Turn>,
}

impl TurnRewardTable {
    /// Builds a table from bare rewards, alternating solution and verification
    /// turns with generation first.
    pub fn from_rewards(rewards: &[f64]) -> Self {
        let turns = rewards
            .iter()
            .enumerate()
            .map(|(i, &reward)| Turn {
                index: i + 1,
                role: match i {
                    0 => TurnRole::Generation,
                    i if i % 2 == 1 => TurnRole::Verification,
                    _ => TurnRole::Refinement,
                },
                reward,
            })
            .collect();
        TurnRewardTable { turns }
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.turns.iter().map(|t| t.reward).collect()
    }
}

/// Per-turn rewards of one thread.
///
/// Solution turns earn their execution score. A verification turn earns the
/// fraction of its verdicts that agree with the execution result of the
/// solution it checked; with a single verdict this is the 0/1 indicator.
pub fn per_turn_rewards(thread: &ThreadRecord) -> Result<TurnRewardTable, AnalysisError> {
    let mut turns = Vec::with_capacity(thread.rounds.len() * 2);
    for round in &thread.rounds {
        let exec = round.exec_result.as_ref().ok_or_else(|| {
            AnalysisError::MissingExecResult(format!(
                "thread {} round {}",
                thread.thread_index, round.candidate.round_index
            ))
        })?;
        let correct = exec.is_correct();
        turns.push(Turn {
            index: turns.len() + 1,
            role: match round.candidate.role {
                SolutionRole::Generation => TurnRole::Generation,
                SolutionRole::Refinement => TurnRole::Refinement,
            },
            reward: f64::from(exec.binary_score),
        });
        if !round.verdicts.is_empty() {
            let agree = round.verdicts.iter().filter(|v| v.judgment == correct).count();
            turns.push(Turn {
                index: turns.len() + 1,
                role: TurnRole::Verification,
                reward: agree as f64 / round.verdicts.len() as f64,
            });
        }
    }
    Ok(TurnRewardTable { turns })
}
