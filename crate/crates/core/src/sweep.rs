//! Grids over (threads, rounds, verdicts) with per-run derived seeds.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::config::ConfigError;
use crate::domain::{CompareMode, PipelineConfig, Problem, TestCase};
use crate::seed::{derive, hash_str, tag};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub threads: Vec<u32>,
    pub max_rounds: Vec<u32>,
    pub verdicts: Vec<u32>,
    /// Seeded repetitions of every (point, problem) pair.
    #[serde(default = "one")]
    pub runs_per_point: u32,
    /// Defaults to `pipeline.rng_seed`.
    #[serde(default)]
    pub base_seed: Option<u64>,
    /// Problem directory; relative paths resolve against the sweep file.
    #[serde(default)]
    pub problems: Option<PathBuf>,
    /// Placeholder problems for simulator sweeps when no directory is given.
    #[serde(default)]
    pub synthetic_problems: Option<u32>,
    /// Where to write the scaling CSV; relative to the store when not absolute.
    #[serde(default)]
    pub csv: Option<PathBuf>,
}

fn one() -> u32 {
    1
}

/// A grid point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GridPoint {
    pub threads: u32,
    pub max_rounds: u32,
    pub verdicts: u32,
}

/// One pipeline execution scheduled by a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepJob {
    pub problem_index: usize,
    pub repetition: u32,
    pub config: PipelineConfig,
    pub seed: u64,
}

impl SweepSpec {
    pub fn validate(&self, prefix: &str) -> Result<(), ConfigError> {
        let axes = [
            ("threads", &self.threads),
            ("max_rounds", &self.max_rounds),
            ("verdicts", &self.verdicts),
        ];
        for (name, axis) in axes {
            if axis.is_empty() {
                return Err(ConfigError::invalid(format!("{prefix}.{name}"), "axis is empty"));
            }
            if axis.contains(&0) {
                return Err(ConfigError::invalid(format!("{prefix}.{name}"), "values must be >= 1"));
            }
        }
        if self.runs_per_point == 0 {
            return Err(ConfigError::invalid(format!("{prefix}.runs_per_point"), "must be >= 1"));
        }
        if self.synthetic_problems == Some(0) {
            return Err(ConfigError::invalid(format!("{prefix}.synthetic_problems"), "must be >= 1"));
        }
        Ok(())
    }

    /// Cartesian product in (threads, max_rounds, verdicts) order, duplicates removed.
    pub fn points(&self) -> Vec<GridPoint> {
        let mut points = Vec::new();
        for &threads in &self.threads {
            for &max_rounds in &self.max_rounds {
                for &verdicts in &self.verdicts {
                    let p = GridPoint { threads, max_rounds, verdicts };
                    if !points.contains(&p) {
                        points.push(p);
                    }
                }
            }
        }
        points
    }

    /// Every job of the sweep. Seeds depend only on their own coordinates, so
    /// adding points or problems leaves existing jobs unchanged.
    pub fn jobs(&self, base: &PipelineConfig, problems: &[Problem]) -> Vec<SweepJob> {
        let base_seed = self.base_seed.unwrap_or(base.rng_seed);
        let mut jobs = Vec::new();
        for point in self.points() {
            let config = PipelineConfig {
                threads: point.threads,
                max_rounds: point.max_rounds,
                verdicts: point.verdicts,
                rng_seed: base_seed,
                ..base.clone()
            };
            for (problem_index, problem) in problems.iter().enumerate() {
                for repetition in 0..self.runs_per_point {
                    jobs.push(SweepJob {
                        problem_index,
                        repetition,
                        config: config.clone(),
                        seed: sweep_seed(base_seed, point, &problem.id, repetition),
                    });
                }
            }
        }
        jobs
    }
}

pub fn sweep_seed(base_seed: u64, point: GridPoint, problem_id: &str, repetition: u32) -> u64 {
    derive(&[
        base_seed,
        tag::SWEEP,
        u64::from(point.threads),
        u64::from(point.max_rounds),
        u64::from(point.verdicts),
        hash_str(problem_id),
        u64::from(repetition),
    ])
}

/// Seed of a single configured run on one problem.
pub fn run_seed(base_seed: u64, problem_id: &str) -> u64 {
    derive(&[base_seed, tag::RUN, hash_str(problem_id)])
}

/// Placeholder problems for simulated sweeps; their tests are never executed
/// by the latent judge.
pub fn synthetic_problems(count: u32) -> Vec<Problem> {
    (0..count)
        .map(|i| Problem {
            id: format!("synthetic-{i:04}"),
            statement: format!("Synthetic problem {i}: print the input unchanged."),
            tests: vec![TestCase {
                input: b"1\n".to_vec(),
                expected_output: b"1\n".to_vec(),
            }],
            time_limit_ms: 1_000,
            memory_limit_mib: 256,
            compare_mode: CompareMode::TokenNormalized,
        })
        .collect()
}
