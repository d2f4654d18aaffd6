//! Browser bindings over the core library: reward curves, pass@k curves and
//! simulated scaling sweeps. Each export takes plain numbers or strings and
//! returns a JSON document for the page to plot.

use parallel_thinking::analytics::{pass_at_k, selection_accuracy_report, CurvePoint};
use parallel_thinking::backends::simulator::{SimulatorBackend, SimulatorParams};
use parallel_thinking::domain::PipelineConfig;
use parallel_thinking::judge::LatentJudge;
use parallel_thinking::orchestrator::Orchestrator;
use parallel_thinking::rewards::{hard_clip_reward, rc_reward, ClipDistribution};
use parallel_thinking::sweep::{synthetic_problems, SweepSpec};
use serde::Serialize;
use wasm_bindgen::prelude::*;

const MAX_SIMULATED_RUNS: u64 = 200_000;

#[derive(Debug, Serialize)]
pub struct RewardCurve {
    pub lengths: Vec<f64>,
    pub rc: Vec<f64>,
    /// Hard cap at the distribution's median, for comparison.
    pub hard: Vec<f64>,
    pub hard_limit: f64,
}

#[derive(Debug, Serialize)]
pub struct PassAtKCurve {
    pub n: u64,
    pub c: u64,
    pub ks: Vec<u64>,
    pub values: Vec<f64>,
}

fn median(dist: &ClipDistribution) -> f64 {
    match *dist {
        ClipDistribution::Hard { limit } => limit,
        ClipDistribution::Uniform { low, high } => 0.5 * (low + high),
        ClipDistribution::Gaussian { mean, .. } => mean,
        ClipDistribution::TruncExp { rate, upper } => {
            -(0.5 * (1.0 + (-rate * upper).exp())).ln() / rate
        }
    }
}

/// Expected reward of a correct answer over `points` lengths in `[0, max_length]`.
pub fn reward_curve_data(dist: &str, max_length: f64, points: u32) -> Result<RewardCurve, String> {
    let dist: ClipDistribution = dist.parse().map_err(|e| format!("{e}"))?;
    if !(max_length.is_finite() && max_length > 0.0) || points < 2 {
        return Err("need max_length > 0 and at least 2 points".into());
    }
    let hard_limit = median(&dist);
    let lengths: Vec<f64> = (0..points)
        .map(|i| max_length * f64::from(i) / f64::from(points - 1))
        .collect();
    Ok(RewardCurve {
        rc: lengths.iter().map(|&l| rc_reward(true, l, &dist)).collect(),
        hard: lengths.iter().map(|&l| hard_clip_reward(true, l, hard_limit)).collect(),
        lengths,
        hard_limit,
    })
}

/// pass@k for every k in `1..=n` given `c` correct samples out of `n`.
pub fn pass_at_k_data(n: u64, c: u64) -> Result<PassAtKCurve, String> {
    let ks: Vec<u64> = (1..=n).collect();
    let values = ks
        .iter()
        .map(|&k| pass_at_k(n, c, k).map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    Ok(PassAtKCurve { n, c, ks, values })
}

/// Simulated selection accuracy against mean tokens for every grid point.
/// `params` is a simulator parameter object in JSON; missing fields default.
pub fn simulate_scaling_data(
    params: &str,
    threads: &[u32],
    max_rounds: &[u32],
    verdicts: &[u32],
    runs_per_point: u32,
    seed: u64,
) -> Result<Vec<CurvePoint>, String> {
    let params: SimulatorParams = if params.trim().is_empty() {
        SimulatorParams::default()
    } else {
        serde_json::from_str(params).map_err(|e| format!("simulator params: {e}"))?
    };
    let spec = SweepSpec {
        threads: threads.to_vec(),
        max_rounds: max_rounds.to_vec(),
        verdicts: verdicts.to_vec(),
        runs_per_point,
        base_seed: Some(seed),
        problems: None,
        synthetic_problems: Some(1),
        csv: None,
    };
    spec.validate("sweep").map_err(|e| e.to_string())?;
    let total = spec.points().len() as u64 * u64::from(runs_per_point);
    if total > MAX_SIMULATED_RUNS {
        return Err(format!("{total} runs requested; the limit is {MAX_SIMULATED_RUNS}"));
    }
    let backend = SimulatorBackend::new(params).map_err(|e| e.to_string())?;
    let judge = LatentJudge;
    let orchestrator = Orchestrator::new(&backend).with_judge(&judge);
    let problems = synthetic_problems(1);
    let runs = spec
        .jobs(&PipelineConfig::default(), &problems)
        .into_iter()
        .map(|job| {
            orchestrator
                .run_pipeline_seeded(&problems[job.problem_index], &job.config, job.seed)
                .map_err(|e| e.to_string())
        })
        .collect::<Result<Vec<_>, _>>()?;
    let report = selection_accuracy_report(&runs).map_err(|e| e.to_string())?;
    Ok(report.curve)
}

fn to_js<T: Serialize>(result: Result<T, String>) -> Result<String, JsError> {
    result
        .and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string()))
        .map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn reward_curve(dist: &str, max_length: f64, points: u32) -> Result<String, JsError> {
    to_js(reward_curve_data(dist, max_length, points))
}

#[wasm_bindgen]
pub fn pass_at_k_curve(n: u32, c: u32) -> Result<String, JsError> {
    to_js(pass_at_k_data(u64::from(n), u64::from(c)))
}

#[wasm_bindgen]
pub fn simulate_scaling(
    params: &str,
    threads: Vec<u32>,
    max_rounds: Vec<u32>,
    verdicts: Vec<u32>,
    runs_per_point: u32,
    seed: u64,
) -> Result<String, JsError> {
    to_js(simulate_scaling_data(params, &threads, &max_rounds, &verdicts, runs_per_point, seed))
}
