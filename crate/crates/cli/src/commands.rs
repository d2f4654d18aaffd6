use std::collections::HashSet;
use std::path::{Path, PathBuf};

use parallel_thinking::analytics::{
    loglinear_fit, pass_at_k_table, scaling_csv, scaling_points, selection_accuracy_report,
    verification_metrics, verification_pairs,
};
use parallel_thinking::backends::Backend;
use parallel_thinking::config::{read_json, JudgeKind, RunConfig};
use parallel_thinking::domain::{
    Candidate, DomainError, PipelineConfig, Problem, RunRecord, SolutionRole,
};
use parallel_thinking::judge::{ExecutionJudge, SolutionJudge};
use parallel_thinking::orchestrator::{JsonLinesSink, Orchestrator};
use parallel_thinking::rewards::{hard_clip_reward, rc_reward, rc_reward_mc, ClipDistribution};
use parallel_thinking::store::{RunKey, RunStore};
use parallel_thinking::sweep::{run_seed, synthetic_problems, SweepSpec};

use crate::events::{emit, CliEvent, Failure};
use crate::ReportKind;

type Outcome = Result<String, Failure>;

fn problems_error(err: DomainError) -> Failure {
    match err {
        DomainError::Validation { field, reason } => Failure::config(field, reason),
        other => Failure::Config { key: None, message: other.to_string() },
    }
}

fn load_store(store: &RunStore) -> Result<Vec<RunRecord>, Failure> {
    store.load().map_err(Failure::run)
}

/// The configuration as it will be stored once the given backend and judge run it.
fn stored_config(base: &PipelineConfig, backend: &dyn Backend, judged: bool) -> PipelineConfig {
    PipelineConfig {
        backend_id: backend.id().to_owned(),
        judge_attached: judged,
        ..base.clone()
    }
}

struct Job<'a> {
    problem: &'a Problem,
    config: PipelineConfig,
    seed: u64,
}

#[derive(Default)]
struct Tally {
    stored: usize,
    skipped: usize,
    failed: usize,
}

fn execute(
    jobs: &[Job<'_>],
    backend: &dyn Backend,
    judge: Option<&dyn SolutionJudge>,
    store: &RunStore,
) -> Result<Tally, Failure> {
    let mut done: HashSet<RunKey> = store.keys().map_err(Failure::run)?;
    let sink = JsonLinesSink::new(std::io::stderr());
    let mut orchestrator = Orchestrator::new(backend).with_events(&sink);
    if let Some(judge) = judge {
        orchestrator = orchestrator.with_judge(judge);
    }
    let mut tally = Tally::default();
    for job in jobs {
        let key = RunKey {
            problem_id: job.problem.id.clone(),
            config_fingerprint: stored_config(&job.config, backend, judge.is_some()).fingerprint(),
            rng_seed: job.seed,
        };
        if done.contains(&key) {
            emit(&CliEvent::RunSkipped { problem_id: &job.problem.id, rng_seed: job.seed });
            tally.skipped += 1;
            continue;
        }
        match orchestrator.run_pipeline_seeded(job.problem, &job.config, job.seed) {
            Ok(run) => {
                store.append(&run).map_err(Failure::run)?;
                emit(&CliEvent::RunStored {
                    problem_id: &run.problem_id,
                    rng_seed: run.rng_seed,
                    score: run.selected_round().score,
                    total_tokens: run.total_tokens,
                });
                done.insert(RunKey::of(&run));
                tally.stored += 1;
            }
            Err(err) => {
                emit(&CliEvent::RunFailed {
                    problem_id: &job.problem.id,
                    rng_seed: job.seed,
                    error: err.to_string(),
                });
                tally.failed += 1;
            }
        }
    }
    Ok(tally)
}

fn finish(tally: &Tally, what: &str) -> Outcome {
    let line = format!(
        "{what}: {} stored, {} skipped, {} failed",
        tally.stored, tally.skipped, tally.failed
    );
    if tally.failed > 0 {
        Err(Failure::run(line))
    } else {
        Ok(line)
    }
}

pub fn run(config_path: &Path, problems_dir: &Path, store_path: &Path) -> Outcome {
    let config = RunConfig::load(config_path)?;
    let problems = Problem::load_all(problems_dir).map_err(problems_error)?;
    if problems.is_empty() {
        return Err(Failure::Config {
            key: None,
            message: format!("no problem directories under {}", problems_dir.display()),
        });
    }
    let backend = config.build_backend()?;
    let judge = config.build_judge()?;
    let base = config.pipeline_config();
    let jobs: Vec<Job<'_>> = problems
        .iter()
        .map(|problem| Job { problem, config: base.clone(), seed: run_seed(base.rng_seed, &problem.id) })
        .collect();
    let tally = execute(&jobs, backend.as_ref(), judge.as_deref(), &RunStore::new(store_path))?;
    finish(&tally, "run")
}

fn resolve(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_owned()
    } else {
        base.join(path)
    }
}

pub fn sweep(
    config_path: &Path,
    sweep_path: Option<&Path>,
    store_path: &Path,
    problems_override: Option<&Path>,
    csv_override: Option<&Path>,
) -> Outcome {
    let config = RunConfig::load(config_path)?;
    let (spec, spec_dir): (SweepSpec, PathBuf) = match sweep_path {
        Some(path) => {
            let spec: SweepSpec = read_json(path)?;
            spec.validate("sweep")?;
            (spec, path.parent().map(Path::to_owned).unwrap_or_default())
        }
        None => match &config.sweep {
            Some(spec) => (spec.clone(), config.base_dir.clone()),
            None => return Err(Failure::config("sweep", "no --sweep file and no sweep section in the config")),
        },
    };
    if config.judge.kind == JudgeKind::None {
        return Err(Failure::config("judge.kind", "a sweep needs a judge to score accuracy"));
    }
    let problems = match (problems_override, &spec.problems, spec.synthetic_problems) {
        (Some(dir), _, _) => Problem::load_all(dir).map_err(problems_error)?,
        (None, Some(dir), _) => Problem::load_all(&resolve(&spec_dir, dir)).map_err(problems_error)?,
        (None, None, Some(count)) => synthetic_problems(count),
        (None, None, None) => {
            return Err(Failure::config("sweep.problems", "give a problem directory or synthetic_problems"))
        }
    };
    if problems.is_empty() {
        return Err(Failure::config("sweep.problems", "no problems found"));
    }
    let backend = config.build_backend()?;
    let judge = config.build_judge()?;
    let planned = spec.jobs(&config.pipeline_config(), &problems);
    let jobs: Vec<Job<'_>> = planned
        .iter()
        .map(|job| Job { problem: &problems[job.problem_index], config: job.config.clone(), seed: job.seed })
        .collect();
    let store = RunStore::new(store_path);
    let tally = execute(&jobs, backend.as_ref(), judge.as_deref(), &store)?;

    let wanted: HashSet<RunKey> = jobs
        .iter()
        .map(|job| RunKey {
            problem_id: job.problem.id.clone(),
            config_fingerprint: stored_config(&job.config, backend.as_ref(), judge.is_some()).fingerprint(),
            rng_seed: job.seed,
        })
        .collect();
    let runs: Vec<RunRecord> = load_store(&store)?
        .into_iter()
        .filter(|run| wanted.contains(&RunKey::of(run)))
        .collect();
    let csv_path = match (csv_override, &spec.csv) {
        (Some(path), _) => path.to_owned(),
        (None, Some(path)) => resolve(&spec_dir, path),
        (None, None) => store_path.with_extension("scaling.csv"),
    };
    if !runs.is_empty() {
        let report = selection_accuracy_report(&runs).map_err(Failure::run)?;
        write_file(&csv_path, &scaling_csv(&report.curve))?;
    }
    let summary = finish(&tally, "sweep")?;
    Ok(format!("{summary}; {} points -> {}", spec.points().len(), csv_path.display()))
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Failure::run(format!("{}: {e}", parent.display())))?;
    }
    std::fs::write(path, contents).map_err(|e| Failure::run(format!("{}: {e}", path.display())))
}

fn to_json(value: &impl serde::Serialize) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    text
}

pub fn analyze(store_path: &Path, kind: ReportKind, out: &Path, ks: &[u64]) -> Outcome {
    let runs = load_store(&RunStore::new(store_path))?;
    if runs.is_empty() {
        return Err(Failure::run(format!("{}: no runs", store_path.display())));
    }
    let as_csv = out.extension().is_some_and(|e| e == "csv");
    let (contents, summary) = match kind {
        ReportKind::Selection => {
            let report = selection_accuracy_report(&runs).map_err(Failure::run)?;
            let summary = format!(
                "selection: {} runs, pipeline pass@1 {:.4}, oracle pass@N {:.4}",
                report.runs, report.pipeline_pass_at_1, report.oracle_pass_at_n
            );
            let text = if as_csv { scaling_csv(&report.curve) } else { to_json(&report) };
            (text, summary)
        }
        ReportKind::Passk => {
            let n = runs.iter().map(|r| r.threads.len() as u64).min().unwrap_or(1);
            let ks: Vec<u64> = if ks.is_empty() { (1..=n).collect() } else { ks.to_vec() };
            let table = pass_at_k_table(&runs, &ks).map_err(Failure::run)?;
            let summary = table
                .iter()
                .map(|row| format!("pass@{}={:.4}", row.k, row.value))
                .collect::<Vec<_>>()
                .join(" ");
            (to_json(&table), format!("passk: {summary}"))
        }
        ReportKind::Fit => {
            let report = selection_accuracy_report(&runs).map_err(Failure::run)?;
            let fit = loglinear_fit(&scaling_points(&report)).map_err(Failure::run)?;
            let summary = format!(
                "fit: slope {:.6}, intercept {:.6}, r2 {:.4} over {} points",
                fit.slope, fit.intercept, fit.r_squared, fit.n_points
            );
            (to_json(&fit), summary)
        }
        ReportKind::Verification => {
            let (judgments, truths) = verification_pairs(&runs).map_err(Failure::run)?;
            let metrics = verification_metrics(&judgments, &truths).map_err(Failure::run)?;
            let show = |x: Option<f64>| x.map_or("n/a".to_owned(), |v| format!("{v:.4}"));
            let summary = format!(
                "verification: precision {}, recall {}, accuracy {:.4} over {} verdicts",
                show(metrics.precision),
                show(metrics.recall),
                metrics.accuracy,
                judgments.len()
            );
            (to_json(&metrics), summary)
        }
    };
    write_file(out, &contents)?;
    Ok(format!("{summary} -> {}", out.display()))
}

pub fn reward(score: u8, length: f64, dist: &str, samples: Option<u64>, seed: u64) -> Outcome {
    if score > 1 {
        return Err(Failure::config("--score", "must be 0 or 1"));
    }
    let dist: ClipDistribution = dist.parse().map_err(|e| Failure::config("--dist", e))?;
    if !(length >= 0.0) {
        return Err(Failure::config("--length", "must be >= 0"));
    }
    let correct = score == 1;
    let (value, method) = match (samples, dist) {
        (_, ClipDistribution::Hard { limit }) => (hard_clip_reward(correct, length, limit), "closed_form"),
        (Some(n), _) => (rc_reward_mc(correct, length, &dist, n, seed), "monte_carlo"),
        (None, _) => (rc_reward(correct, length, &dist), "closed_form"),
    };
    Ok(serde_json::json!({
        "reward": value,
        "method": method,
        "dist": dist.to_string(),
        "score": score,
        "length": length,
    })
    .to_string())
}

pub fn judge(problem_dir: &Path, source: &Path, config: Option<&Path>, toolchain: Option<&str>) -> Outcome {
    let problem = Problem::load_dir(problem_dir).map_err(problems_error)?;
    let source_code = std::fs::read_to_string(source)
        .map_err(|e| Failure::Config { key: None, message: format!("{}: {e}", source.display()) })?;
    let mut settings = match config {
        Some(path) => RunConfig::load(path)?.judge.execution,
        None => Default::default(),
    };
    if let Some(name) = toolchain {
        settings.toolchain = name.to_owned();
    }
    let judge = ExecutionJudge::new(settings).map_err(|e| Failure::config("judge.execution.toolchain", e))?;
    let candidate = Candidate {
        problem_id: problem.id.clone(),
        thread_index: 0,
        round_index: 1,
        role: SolutionRole::Generation,
        explanation: String::new(),
        source_code,
        token_count: 0,
        truncated: false,
        usage_estimated: false,
        latent: None,
    };
    let report = judge.judge_solution(&problem, &candidate).map_err(Failure::run)?;
    Ok(serde_json::to_string(&report).expect("report serializes"))
}
