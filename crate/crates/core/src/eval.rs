//! Batch evaluation: run every task of a split n times with isolated
//! environments, score runs with the task checkers, and aggregate
//! goal-completion metrics.
//!
//! - TGC: percentage of tasks whose first run passed.
//! - RTGC: percentage of tasks where all n runs passed (equals TGC when
//!   n_runs is 1).
//! - SGC: percentage of scenarios where every variant's first run passed.
//!
//! Step and token averages are reported over all first runs and over solved
//! first runs separately. Every aggregate is recomputable from the per-task
//! rows, and reports embed a fingerprint of the experiment config.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agent::{AgentConfig, AgentError, AgentRuntime, PneOptions, RunResult, SnippetConfig};
use crate::embed::{CachingProvider, HashEmbedder};
use crate::miniworld::{self, MiniSession, MiniTask};
use crate::pool::{load_pool, PoolError};
use crate::provider::{ChatProvider, RecordingProvider, ReplayProvider, ScriptedProvider};
use crate::select::{
    derive_seed, select_trajectory_demos, trajectory_candidates, SelectError, SelectionMethod,
    SelectionSpec,
};
use crate::types::{RecordKind, Split, Task, Terminal};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("integrity error: {0}")]
    Integrity(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Pool(#[from] PoolError),
    #[error(transparent)]
    Select(#[from] SelectError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One run's outcome for the metric tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub passed: bool,
    pub steps: u32,
    pub input_tokens: u64,
    pub output_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRow {
    pub task_id: String,
    pub scenario_id: String,
    pub variant: u32,
    pub runs: Vec<RunOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_task: Vec<TaskRow>,
    /// Percentage of tasks whose first run passed.
    pub tgc: f64,
    /// Percentage of tasks with every run passed.
    pub rtgc: f64,
    /// Percentage of scenarios with all variants' first runs passed.
    pub sgc: f64,
    /// Mean steps over all first runs.
    pub avg_steps: f64,
    /// Mean steps over first runs that passed; null when none did.
    pub avg_steps_solved: Option<f64>,
    /// Mean total (input + output) tokens over all first runs.
    pub avg_tokens: f64,
    pub avg_tokens_solved: Option<f64>,
    pub config_fingerprint: String,
}

impl EvalReport {
    /// Canonical serialized form; byte-stable for identical inputs.
    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("report serializes");
        out.push('\n');
        out
    }
}

fn percentage(numerator: usize, denominator: usize) -> f64 {
    100.0 * numerator as f64 / denominator as f64
}

/// Aggregates per-task run outcomes into an [`EvalReport`]. Every task must
/// have exactly `n_runs` outcomes.
pub fn evaluate(
    results: &BTreeMap<String, Vec<RunOutcome>>,
    tasks: &[Task],
    n_runs: usize,
    config_fingerprint: &str,
) -> Result<EvalReport, EvalError> {
    if n_runs < 1 {
        return Err(EvalError::Integrity("n_runs must be >= 1".into()));
    }
    if tasks.is_empty() {
        return Err(EvalError::Integrity("no tasks to evaluate".into()));
    }
    let mut rows = Vec::with_capacity(tasks.len());
    for task in tasks {
        let runs = results.get(&task.task_id).ok_or_else(|| {
            EvalError::Integrity(format!("missing runs for task '{}'", task.task_id))
        })?;
        if runs.len() != n_runs {
            return Err(EvalError::Integrity(format!(
                "task '{}' has {} runs, expected {n_runs}",
                task.task_id,
                runs.len()
            )));
        }
        rows.push(TaskRow {
            task_id: task.task_id.clone(),
            scenario_id: task.scenario_id.clone(),
            variant: task.variant,
            runs: runs.clone(),
        });
    }
    if results.len() != tasks.len() {
        return Err(EvalError::Integrity(format!(
            "{} result entries for {} tasks",
            results.len(),
            tasks.len()
        )));
    }
    rows.sort_by(|a, b| a.task_id.cmp(&b.task_id));

    let n = rows.len();
    let first_passed = rows.iter().filter(|r| r.runs[0].passed).count();
    let all_passed = rows
        .iter()
        .filter(|r| r.runs.iter().all(|run| run.passed))
        .count();

    let mut scenarios: BTreeMap<String, bool> = BTreeMap::new();
    for row in &rows {
        let entry = scenarios.entry(row.scenario_id.clone()).or_insert(true);
        *entry &= row.runs[0].passed;
    }
    let scenario_count = scenarios.len();
    let scenarios_passed = scenarios.values().filter(|ok| **ok).count();

    let firsts: Vec<&RunOutcome> = rows.iter().map(|r| &r.runs[0]).collect();
    let avg_steps = firsts.iter().map(|r| r.steps as f64).sum::<f64>() / n as f64;
    let avg_tokens = firsts
        .iter()
        .map(|r| (r.input_tokens + r.output_tokens) as f64)
        .sum::<f64>()
        / n as f64;
    let solved: Vec<&&RunOutcome> = firsts.iter().filter(|r| r.passed).collect();
    let avg_steps_solved = (!solved.is_empty())
        .then(|| solved.iter().map(|r| r.steps as f64).sum::<f64>() / solved.len() as f64);
    let avg_tokens_solved = (!solved.is_empty()).then(|| {
        solved
            .iter()
            .map(|r| (r.input_tokens + r.output_tokens) as f64)
            .sum::<f64>()
            / solved.len() as f64
    });

    Ok(EvalReport {
        per_task: rows,
        tgc: percentage(first_passed, n),
        rtgc: percentage(all_passed, n),
        sgc: percentage(scenarios_passed, scenario_count),
        avg_steps,
        avg_steps_solved,
        avg_tokens,
        avg_tokens_solved,
        config_fingerprint: config_fingerprint.to_string(),
    })
}

/// Recomputes the aggregate fields from the per-task rows; a report is
/// well-formed iff this equals the report itself.
pub fn recompute(report: &EvalReport) -> Result<EvalReport, EvalError> {
    let tasks: Vec<Task> = report
        .per_task
        .iter()
        .map(|row| Task {
            task_id: row.task_id.clone(),
            scenario_id: row.scenario_id.clone(),
            variant: row.variant,
            instruction: "-".into(),
            split: Split::TestNormal,
        })
        .collect();
    let results: BTreeMap<String, Vec<RunOutcome>> = report
        .per_task
        .iter()
        .map(|row| (row.task_id.clone(), row.runs.clone()))
        .collect();
    let n_runs = report.per_task.first().map(|r| r.runs.len()).unwrap_or(1);
    evaluate(&results, &tasks, n_runs, &report.config_fingerprint)
}

// ---------------------------------------------------------------------------
// Experiment runner
// ---------------------------------------------------------------------------

fn default_snippet_k() -> usize {
    2
}
fn default_snippet_threshold() -> f64 {
    0.85
}
fn default_runs() -> usize {
    2
}
fn default_provider() -> String {
    "scripted".into()
}
fn default_max_steps() -> u32 {
    50
}
fn default_max_context_length() -> u64 {
    1_000_000
}

/// Flat experiment configuration, loadable from a key-value (TOML) file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub split: Split,
    pub method: SelectionMethod,
    pub k: usize,
    #[serde(default)]
    pub solver: Option<RecordKind>,
    #[serde(default)]
    pub snippets: bool,
    #[serde(default = "default_snippet_k")]
    pub snippet_k: usize,
    #[serde(default = "default_snippet_threshold")]
    pub snippet_threshold: f64,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub seed: u64,
    pub pool: PathBuf,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default = "default_provider")]
    pub provider: String,
    #[serde(default)]
    pub fixed_id: Option<String>,
    #[serde(default = "default_max_steps")]
    pub max_steps: u32,
    #[serde(default = "default_max_context_length")]
    pub max_context_length: u64,
}

impl ExperimentConfig {
    pub fn new(split: Split, method: SelectionMethod, k: usize, pool: PathBuf) -> Self {
        ExperimentConfig {
            split,
            method,
            k,
            solver: None,
            snippets: false,
            snippet_k: default_snippet_k(),
            snippet_threshold: default_snippet_threshold(),
            runs: default_runs(),
            seed: 0,
            pool,
            out: None,
            provider: default_provider(),
            fixed_id: None,
            max_steps: default_max_steps(),
            max_context_length: default_max_context_length(),
        }
    }

    pub fn solver_kind(&self) -> RecordKind {
        self.solver.unwrap_or(RecordKind::React)
    }

    /// Stable fingerprint of the experimental grid point, embedded in every
    /// report. Covers what defines the experiment — split, method, budgets,
    /// seed — but not transport or filesystem details, so a recorded session
    /// and its replay produce identical reports.
    pub fn fingerprint(&self) -> String {
        let canonical = serde_json::json!({
            "split": self.split,
            "method": self.method,
            "k": self.k,
            "solver": self.solver_kind(),
            "snippets": self.snippets,
            "snippet_k": self.snippet_k,
            "snippet_threshold": self.snippet_threshold,
            "runs": self.runs,
            "seed": self.seed,
            "fixed_id": self.fixed_id,
            "max_steps": self.max_steps,
            "max_context_length": self.max_context_length,
        })
        .to_string();
        let digest = Sha256::digest(canonical.as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Loads an [`ExperimentConfig`] from a flat key-value file.
pub fn load_experiment_config(path: &Path) -> Result<ExperimentConfig, EvalError> {
    let text = std::fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| EvalError::Config(e.to_string()))
}

/// The canonical annotation pipeline over the built-in catalog: scripted
/// provider, offline embedder, replay checker, and the iterative annotation
/// loop over the given splits.
pub fn annotate_catalog(
    splits: &[Split],
    solver_kind: RecordKind,
    rounds: u32,
    demos: SelectionSpec,
    seed: u64,
    checkpoint_path: Option<PathBuf>,
) -> Result<crate::types::AnnotationPool, crate::annotate::AnnotateError> {
    use crate::annotate::{
        run_annotation, AnnotationConfig, PlanDemoSelector, PneSolver, ReactSolver,
        TrajectoryDemoSelector,
    };

    let mut tasks: Vec<Task> = Vec::new();
    for split in splits {
        tasks.extend(miniworld::list_tasks(*split).into_iter().map(|m| m.task));
    }
    let chat = miniworld::scripted_agent_provider();
    let embed = CachingProvider::new(HashEmbedder::default());
    let factory = miniworld::env_factory(seed);
    let checker = miniworld::ReplayChecker { seed };
    let mut config = AnnotationConfig::new(rounds, solver_kind, demos.clone());
    config.seed = seed;
    config.checkpoint_path = checkpoint_path;

    match solver_kind {
        RecordKind::React => {
            let selector = TrajectoryDemoSelector {
                spec: demos,
                embed: &embed,
            };
            let mut solver = ReactSolver {
                chat: &chat,
                embed: &embed,
                env_factory: &factory,
                config: AgentConfig::annotation_react(),
                snippets: None,
            };
            run_annotation(&tasks, &mut solver, &checker, &selector, &config)
        }
        RecordKind::Pne => {
            let selector = PlanDemoSelector {
                spec: SelectionSpec {
                    k: 4,
                    ..demos.clone()
                },
                embed: &embed,
            };
            let mut options = PneOptions::annotation();
            options.planner_demos = SelectionSpec { k: 4, ..demos.clone() };
            options.executor_demos = SelectionSpec { k: 3, ..demos };
            let mut solver = PneSolver {
                chat: &chat,
                embed: &embed,
                env_factory: &factory,
                options,
            };
            run_annotation(&tasks, &mut solver, &checker, &selector, &config)
        }
    }
}

enum EvalProvider {
    Plain(Box<dyn ChatProvider>),
    Recording {
        inner: RecordingProvider<ScriptedProvider>,
        session_path: PathBuf,
    },
}

impl EvalProvider {
    fn as_chat(&self) -> &dyn ChatProvider {
        match self {
            EvalProvider::Plain(p) => p.as_ref(),
            EvalProvider::Recording { inner, .. } => inner,
        }
    }
}

fn build_provider(config: &ExperimentConfig) -> Result<EvalProvider, EvalError> {
    let spec = config.provider.as_str();
    if spec == "scripted" {
        return Ok(EvalProvider::Plain(Box::new(
            miniworld::scripted_agent_provider(),
        )));
    }
    if let Some(path) = spec.strip_prefix("record:") {
        return Ok(EvalProvider::Recording {
            inner: RecordingProvider::new(miniworld::scripted_agent_provider()),
            session_path: PathBuf::from(path),
        });
    }
    if let Some(path) = spec.strip_prefix("replay:") {
        let replay = ReplayProvider::load(Path::new(path))?;
        return Ok(EvalProvider::Plain(Box::new(replay)));
    }
    Err(EvalError::Config(format!(
        "unknown provider '{spec}' (expected scripted, record:<path>, or replay:<path>)"
    )))
}

/// Runs one task once and scores it with the task's checker. Returns the
/// run, whether it counts as solved, and any failed assertion names.
pub fn run_task_once(
    runtime: &AgentRuntime<'_>,
    mini: &MiniTask,
    config: &ExperimentConfig,
) -> Result<(RunResult, bool, Vec<String>), EvalError> {
    let mut env = MiniSession::start(mini, config.seed);
    let result = match config.solver_kind() {
        RecordKind::React => {
            let mut spec = SelectionSpec::new(config.method, config.k);
            spec.fixed_id = config.fixed_id.clone();
            if spec.method == SelectionMethod::Random {
                spec.seed = derive_seed(config.seed, &mini.task.task_id);
            }
            let demos = select_trajectory_demos(&mini.task, runtime.pool, &spec, runtime.embed)?;
            let agent_config = AgentConfig {
                max_steps: config.max_steps,
                max_context_length: config.max_context_length,
                ..AgentConfig::evaluation()
            };
            let snippet_config = config.snippets.then(|| SnippetConfig {
                k: config.snippet_k,
                threshold: config.snippet_threshold,
            });
            runtime.run_react(
                &mini.task,
                &demos,
                &mut env,
                &agent_config,
                snippet_config.as_ref(),
            )?
        }
        RecordKind::Pne => {
            // Paper-default demo counts: four task-plan pairs for the
            // planner, three subtask trajectories for the executor; the
            // configured method applies to both.
            let mut options = PneOptions::evaluation();
            options.planner_demos.method = config.method;
            options.executor_demos.method = config.method;
            options.executor_config.max_steps = config.max_steps;
            options.executor_config.max_context_length = config.max_context_length;
            runtime.run_pne(&mini.task, &mut env, &options, None)?
        }
    };
    let report = miniworld::check(mini, &env.state, result.trajectory.final_answer.as_deref());
    let passed = result.outcome == Terminal::Completed && report.passed;
    Ok((result, passed, report.failed))
}

/// A completed split run: the report plus the raw per-run results for
/// transcript writing and inspection.
pub struct SplitRun {
    pub report: EvalReport,
    pub runs: Vec<(String, usize, RunResult)>,
}

/// Runs every task of the configured split `runs` times against isolated
/// environments, with the given pool and chat provider. This is the
/// filesystem-free core of [`run_experiment`].
pub fn run_split(
    pool: &crate::types::AnnotationPool,
    config: &ExperimentConfig,
    chat: &dyn ChatProvider,
) -> Result<SplitRun, EvalError> {
    let minis = miniworld::list_tasks(config.split);
    if minis.is_empty() {
        return Err(EvalError::Integrity(format!(
            "split {} has no tasks",
            config.split
        )));
    }
    if config.runs < 1 {
        return Err(EvalError::Integrity("runs must be >= 1".into()));
    }
    // Fail configuration problems before spending any provider calls.
    if config.method == SelectionMethod::Fixed {
        let id = config
            .fixed_id
            .as_deref()
            .ok_or_else(|| EvalError::Config("method 'fixed' requires fixed_id".into()))?;
        let known = trajectory_candidates(pool, "")
            .iter()
            .any(|c| c.candidate_id == id);
        if !known {
            return Err(EvalError::Config(format!(
                "fixed demonstration id '{id}' not found in pool"
            )));
        }
    }

    let embed = CachingProvider::new(HashEmbedder::default());
    let runtime = AgentRuntime::new(pool, chat, &embed);

    let mut results: BTreeMap<String, Vec<RunOutcome>> = BTreeMap::new();
    let mut runs: Vec<(String, usize, RunResult)> = Vec::new();
    for mini in &minis {
        for run_index in 0..config.runs {
            let (result, passed, _failed) = run_task_once(&runtime, mini, config)?;
            results
                .entry(mini.task.task_id.clone())
                .or_default()
                .push(RunOutcome {
                    passed,
                    steps: result.trajectory.steps.len() as u32,
                    input_tokens: result.total_input_tokens,
                    output_tokens: result.total_output_tokens,
                });
            runs.push((mini.task.task_id.clone(), run_index, result));
        }
    }

    let tasks: Vec<Task> = minis.iter().map(|m| m.task.clone()).collect();
    let report = evaluate(&results, &tasks, config.runs, &config.fingerprint())?;
    Ok(SplitRun { report, runs })
}

/// Runs the full experiment grid point described by `config`: loads the
/// pool, builds the provider, runs the split, and writes the report, per-run
/// transcripts, and (when recording) the provider session under
/// `config.out` if set.
pub fn run_experiment(config: &ExperimentConfig) -> Result<EvalReport, EvalError> {
    let pool = load_pool(&config.pool)?;
    let provider = build_provider(config)?;
    let SplitRun { report, runs } = run_split(&pool, config, provider.as_chat())?;
    let transcripts = runs;

    if let Some(out) = &config.out {
        std::fs::create_dir_all(out)?;
        std::fs::write(out.join("report.json"), report.to_json())?;
        let transcripts_dir = out.join("transcripts");
        std::fs::create_dir_all(&transcripts_dir)?;
        for (task_id, run_index, result) in &transcripts {
            let mut lines = String::new();
            for call in &result.transcript {
                lines.push_str(&serde_json::to_string(call).expect("call serializes"));
                lines.push('\n');
            }
            let path = transcripts_dir.join(format!("{task_id}_{run_index}.jsonl"));
            std::fs::write(path, lines)?;
        }
    }
    if let EvalProvider::Recording {
        inner,
        session_path,
    } = &provider
    {
        if let Some(parent) = session_path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        inner.save(session_path)?;
    }

    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn run(passed: bool) -> RunOutcome {
        RunOutcome {
            passed,
            steps: 3,
            input_tokens: 100,
            output_tokens: 20,
        }
    }

    fn task(id: &str, scenario: &str, variant: u32) -> Task {
        Task {
            task_id: id.into(),
            scenario_id: scenario.into(),
            variant,
            instruction: "-".into(),
            split: Split::TestNormal,
        }
    }

    fn two_scenario_fixture() -> (BTreeMap<String, Vec<RunOutcome>>, Vec<Task>) {
        // Scenario A: all variants pass both runs. Scenario B: variant 1
        // passes run 1 only, variants 2 and 3 fail both runs.
        let mut results = BTreeMap::new();
        for v in 1..=3 {
            results.insert(format!("a{v}"), vec![run(true), run(true)]);
        }
        results.insert("b1".to_string(), vec![run(true), run(false)]);
        results.insert("b2".to_string(), vec![run(false), run(false)]);
        results.insert("b3".to_string(), vec![run(false), run(false)]);
        let tasks = vec![
            task("a1", "A", 1),
            task("a2", "A", 2),
            task("a3", "A", 3),
            task("b1", "B", 1),
            task("b2", "B", 2),
            task("b3", "B", 3),
        ];
        (results, tasks)
    }

    #[test]
    fn all_passing_runs_give_perfect_scores() {
        let tasks = vec![task("a1", "A", 1), task("a2", "A", 2)];
        let mut results = BTreeMap::new();
        results.insert("a1".into(), vec![run(true)]);
        results.insert("a2".into(), vec![run(true)]);
        let report = evaluate(&results, &tasks, 1, "fp").unwrap();
        assert_eq!(report.tgc, 100.0);
        assert_eq!(report.rtgc, 100.0);
        assert_eq!(report.sgc, 100.0);
    }

    /// Hand computation: TGC 4/6, RTGC 3/6, SGC 1/2.
    #[test]
    fn two_scenario_fixture_matches_hand_computed_metrics() {
        let (results, tasks) = two_scenario_fixture();
        let report = evaluate(&results, &tasks, 2, "fp").unwrap();
        assert_abs_diff_eq!(report.tgc, 100.0 * 4.0 / 6.0, epsilon = 1e-9);
        assert_abs_diff_eq!(report.rtgc, 50.0, epsilon = 1e-9);
        assert_abs_diff_eq!(report.sgc, 50.0, epsilon = 1e-9);
    }

    #[test]
    fn single_run_collapses_rtgc_onto_tgc() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let tasks: Vec<Task> = (0..6)
                .map(|i| task(&format!("t{i}"), &format!("s{i}"), 1))
                .collect();
            let results: BTreeMap<String, Vec<RunOutcome>> = tasks
                .iter()
                .map(|t| (t.task_id.clone(), vec![run(rng.random_bool(0.5))]))
                .collect();
            let report = evaluate(&results, &tasks, 1, "fp").unwrap();
            assert_eq!(report.tgc, report.rtgc);
        }
    }

    #[test]
    fn missing_or_extra_runs_are_integrity_errors() {
        let (mut results, tasks) = two_scenario_fixture();
        results.get_mut("b1").unwrap().pop();
        assert!(matches!(
            evaluate(&results, &tasks, 2, "fp"),
            Err(EvalError::Integrity(_))
        ));

        let (mut results, tasks) = two_scenario_fixture();
        results.remove("b3");
        assert!(matches!(
            evaluate(&results, &tasks, 2, "fp"),
            Err(EvalError::Integrity(_))
        ));
    }

    #[test]
    fn aggregates_recompute_from_rows() {
        let (results, tasks) = two_scenario_fixture();
        let report = evaluate(&results, &tasks, 2, "fp").unwrap();
        let recomputed = recompute(&report).unwrap();
        assert_eq!(report, recomputed);
    }

    #[test]
    fn report_is_invariant_under_task_order() {
        let (results, mut tasks) = two_scenario_fixture();
        let forward = evaluate(&results, &tasks, 2, "fp").unwrap();
        tasks.reverse();
        let backward = evaluate(&results, &tasks, 2, "fp").unwrap();
        assert_eq!(forward, backward);
        assert_eq!(forward.to_json(), backward.to_json());
    }

    #[test]
    fn config_fingerprint_is_stable_and_sensitive() {
        let a = ExperimentConfig::new(
            Split::TestNormal,
            SelectionMethod::Cosine,
            1,
            PathBuf::from("pool.jsonl"),
        );
        let b = a.clone();
        assert_eq!(a.fingerprint(), b.fingerprint());
        let mut c = a.clone();
        c.seed = 1;
        assert_ne!(a.fingerprint(), c.fingerprint());
    }

    #[test]
    fn config_round_trips_through_toml() {
        let mut config = ExperimentConfig::new(
            Split::TestChallenge,
            SelectionMethod::SetBsr,
            2,
            PathBuf::from("pool.jsonl"),
        );
        config.snippets = true;
        config.runs = 3;
        let text = toml::to_string(&config).unwrap();
        let parsed: ExperimentConfig = toml::from_str(&text).unwrap();
        assert_eq!(parsed, config);

        let minimal = "split = \"test_normal\"\nmethod = \"cos\"\nk = 1\npool = \"p.jsonl\"\n";
        let parsed: ExperimentConfig = toml::from_str(minimal).unwrap();
        assert_eq!(parsed.runs, 2);
        assert_eq!(parsed.snippet_threshold, 0.85);
        assert_eq!(parsed.method, SelectionMethod::Cosine);
    }
}
