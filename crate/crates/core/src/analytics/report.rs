use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::fit::ScalingPoint;
use super::metrics::pass_at_k;
use super::AnalysisError;
use crate::domain::{PipelineConfig, RunRecord};

/// Accuracy of one (threads, rounds, verdicts) configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub label: String,
    pub threads: u32,
    pub max_rounds: u32,
    pub verdicts: u32,
    pub n_runs: usize,
    pub mean_tokens: f64,
    /// Fraction of runs whose selected candidate passes every test.
    pub accuracy: f64,
    /// Fraction of runs in which any candidate passes every test.
    pub oracle: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub runs: usize,
    pub pipeline_pass_at_1: f64,
    pub oracle_pass_at_n: f64,
    /// Ordered by mean tokens.
    pub curve: Vec<CurvePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassAtK {
    pub k: u64,
    pub value: f64,
    pub n_runs: usize,
}

pub fn config_label(config: &PipelineConfig) -> String {
    format!("N{}-M{}-V{}", config.threads, config.max_rounds, config.verdicts)
}

fn run_label(run: &RunRecord) -> String {
    format!("{}#{:016x}", run.problem_id, run.rng_seed)
}

fn require_exec(runs: &[RunRecord]) -> Result<(), AnalysisError> {
    let missing: Vec<String> = runs
        .iter()
        .filter(|run| run.rounds().any(|(_, round)| round.exec_result.is_none()))
        .map(run_label)
        .collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(AnalysisError::MissingExecResults(missing))
    }
}

fn selected_correct(run: &RunRecord) -> bool {
    run.selected_round()
        .exec_result
        .as_ref()
        .is_some_and(|e| e.is_correct())
}

fn any_correct(run: &RunRecord) -> bool {
    run.rounds()
        .any(|(_, round)| round.exec_result.as_ref().is_some_and(|e| e.is_correct()))
}

pub fn selection_accuracy_report(runs: &[RunRecord]) -> Result<SelectionReport, AnalysisError> {
    if runs.is_empty() {
        return Err(AnalysisError::Domain("no runs to analyze".into()));
    }
    require_exec(runs)?;
    let mut groups: BTreeMap<(u32, u32, u32), Vec<&RunRecord>> = BTreeMap::new();
    for run in runs {
        let c = &run.config;
        groups.entry((c.threads, c.max_rounds, c.verdicts)).or_default().push(run);
    }
    let fraction = |runs: &[&RunRecord], f: fn(&RunRecord) -> bool| {
        runs.iter().filter(|r| f(r)).count() as f64 / runs.len() as f64
    };
    let mut curve: Vec<CurvePoint> = groups
        .into_iter()
        .map(|((threads, max_rounds, verdicts), members)| CurvePoint {
            label: config_label(&members[0].config),
            threads,
            max_rounds,
            verdicts,
            n_runs: members.len(),
            mean_tokens: members.iter().map(|r| r.total_tokens as f64).sum::<f64>()
                / members.len() as f64,
            accuracy: fraction(&members, selected_correct),
            oracle: fraction(&members, any_correct),
        })
        .collect();
    curve.sort_by(|a, b| a.mean_tokens.total_cmp(&b.mean_tokens).then(a.label.cmp(&b.label)));
    let all: Vec<&RunRecord> = runs.iter().collect();
    Ok(SelectionReport {
        runs: runs.len(),
        pipeline_pass_at_1: fraction(&all, selected_correct),
        oracle_pass_at_n: fraction(&all, any_correct),
        curve,
    })
}

pub fn scaling_points(report: &SelectionReport) -> Vec<ScalingPoint> {
    report
        .curve
        .iter()
        .map(|p| ScalingPoint {
            label: p.label.clone(),
            mean_tokens: p.mean_tokens,
            accuracy: p.accuracy,
        })
        .collect()
}

pub fn scaling_csv(curve: &[CurvePoint]) -> String {
    let mut out = String::from("label,threads,max_rounds,verdicts,n_runs,mean_tokens,accuracy,oracle\n");
    for p in curve {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            p.label, p.threads, p.max_rounds, p.verdicts, p.n_runs, p.mean_tokens, p.accuracy, p.oracle
        );
    }
    out
}

/// Mean pass@k over runs, treating each thread's first-round candidate as
/// one independent sample.
pub fn pass_at_k_table(runs: &[RunRecord], ks: &[u64]) -> Result<Vec<PassAtK>, AnalysisError> {
    if runs.is_empty() {
        return Err(AnalysisError::Domain("no runs to analyze".into()));
    }
    require_exec(runs)?;
    let samples: Vec<(u64, u64)> = runs
        .iter()
        .map(|run| {
            let firsts: Vec<bool> = run
                .threads
                .iter()
                .filter_map(|t| t.rounds.first())
                .map(|r| r.exec_result.as_ref().is_some_and(|e| e.is_correct()))
                .collect();
            (firsts.len() as u64, firsts.iter().filter(|&&c| c).count() as u64)
        })
        .collect();
    ks.iter()
        .map(|&k| {
            let mut total = 0.0;
            for &(n, c) in &samples {
                total += pass_at_k(n, c, k)?;
            }
            Ok(PassAtK {
                k,
                value: total / samples.len() as f64,
                n_runs: samples.len(),
            })
        })
        .collect()
}

/// Every verdict's judgment paired with the execution truth of the
/// candidate it judged.
pub fn verification_pairs(runs: &[RunRecord]) -> Result<(Vec<bool>, Vec<bool>), AnalysisError> {
    require_exec(runs)?;
    let mut judgments = Vec::new();
    let mut truths = Vec::new();
    for run in runs {
        for (_, round) in run.rounds() {
            let truth = round.exec_result.as_ref().is_some_and(|e| e.is_correct());
            for v in &round.verdicts {
                judgments.push(v.judgment);
                truths.push(truth);
            }
        }
    }
    Ok((judgments, truths))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::fixtures::{candidate, verdict};
    use crate::domain::{
        ExecReport, ExecStatus, RoundRecord, RoundRef, Termination, ThreadRecord, SCHEMA_VERSION,
    };

    fn exec(correct: bool) -> ExecReport {
        if correct {
            ExecReport { status: ExecStatus::Accepted, passed: 1, total: 1, binary_score: 1, per_test: vec![] }
        } else {
            ExecReport::rejected(ExecStatus::WrongAnswer, 1)
        }
    }

    /// One-round threads; `truths[t]` is thread t's correctness.
    fn run(truths: &[bool], selected: u32, seed: u64) -> RunRecord {
        let threads: Vec<ThreadRecord> = truths
            .iter()
            .enumerate()
            .map(|(t, &ok)| ThreadRecord {
                thread_index: t as u32,
                rounds: vec![RoundRecord::new(
                    candidate(t as u32, 1, 10),
                    vec![verdict(ok, 5)],
                    Some(exec(ok)),
                )],
                termination: if ok { Termination::UnanimousEarlyStop } else { Termination::MaxRoundsReached },
                error: None,
            })
            .collect();
        let config = PipelineConfig {
            threads: truths.len() as u32,
            max_rounds: 1,
            verdicts: 1,
            judge_attached: true,
            ..PipelineConfig::default()
        };
        RunRecord {
            schema_version: SCHEMA_VERSION,
            problem_id: "p".into(),
            config,
            total_tokens: 15 * truths.len() as u64,
            threads,
            selected: RoundRef { thread_index: selected, round_index: 1 },
            rng_seed: seed,
            tokens_estimated: false,
        }
    }

    #[test]
    fn selection_and_oracle_fractions() {
        let runs = vec![run(&[true, false], 0, 1), run(&[false, true], 0, 2), run(&[false, false], 1, 3)];
        for r in &runs {
            r.validate().unwrap();
        }
        let report = selection_accuracy_report(&runs).unwrap();
        assert!((report.pipeline_pass_at_1 - 1.0 / 3.0).abs() < 1e-12);
        assert!((report.oracle_pass_at_n - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(report.curve.len(), 1);
        assert_eq!(report.curve[0].label, "N2-M1-V1");
        assert_eq!(report.curve[0].mean_tokens, 30.0);
    }

    #[test]
    fn missing_exec_lists_runs() {
        let mut bad = run(&[true], 0, 9);
        bad.threads[0].rounds[0].exec_result = None;
        let err = selection_accuracy_report(&[run(&[true], 0, 1), bad]).unwrap_err();
        assert_eq!(err, AnalysisError::MissingExecResults(vec![format!("p#{:016x}", 9)]));
    }

    #[test]
    fn groups_sort_by_tokens() {
        let runs = vec![run(&[true, true, false, false], 0, 1), run(&[false], 0, 2)];
        let report = selection_accuracy_report(&runs).unwrap();
        let labels: Vec<_> = report.curve.iter().map(|p| p.label.as_str()).collect();
        assert_eq!(labels, ["N1-M1-V1", "N4-M1-V1"]);
        let csv = scaling_csv(&report.curve);
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.lines().nth(2).unwrap().starts_with("N4-M1-V1,4,1,1,1,60,1,1"));
        assert_eq!(scaling_points(&report)[1].accuracy, 1.0);
    }

    #[test]
    fn pass_at_k_uses_first_rounds() {
        let runs = vec![run(&[true, false, true, false], 0, 1)];
        let table = pass_at_k_table(&runs, &[1, 2]).unwrap();
        assert!((table[0].value - 0.5).abs() < 1e-12);
        assert!((table[1].value - 5.0 / 6.0).abs() < 1e-12);
        assert!(pass_at_k_table(&runs, &[5]).is_err());
    }

    #[test]
    fn verification_pairs_follow_exec_truth() {
        let (j, t) = verification_pairs(&[run(&[true, false], 0, 1)]).unwrap();
        assert_eq!(j, t);
        assert_eq!(j, vec![true, false]);
    }
}
