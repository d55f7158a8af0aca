//! Iterative annotation: solve unannotated tasks round by round, keeping
//! only checker-verified solutions and using everything annotated so far as
//! demonstration candidates for the rest.
//!
//! The loop is sequential and deterministic: each round visits the
//! unannotated tasks in ascending task_id order, selects demonstrations from
//! the pool as it stands (so tasks annotated earlier in a round help the
//! later ones), solves, checks, and admits. The pool is checkpointed after
//! every admission; a run can resume from the checkpoint without re-solving
//! anything already annotated.

use std::path::{Path, PathBuf};

use crate::pool::{load_pool, save_pool, PoolError};
use crate::select::{SelectError, SelectionResult, SelectionSpec};
use crate::types::{
    AnnotationPool, AnnotationRecord, Plan, RecordKind, Task, Trajectory,
};

#[derive(Debug, thiserror::Error)]
pub enum AnnotateError {
    #[error("integrity error: {0}")]
    Integrity(String),
    #[error(transparent)]
    Pool(#[from] PoolError),
    #[error("checkpoint write to {path} failed ({source}); state is resumable from the last good checkpoint")]
    Checkpoint {
        path: PathBuf,
        #[source]
        source: Box<PoolError>,
    },
}

impl From<crate::types::IntegrityError> for AnnotateError {
    fn from(e: crate::types::IntegrityError) -> Self {
        AnnotateError::Integrity(e.0)
    }
}

/// A hard solver failure: the task stays unannotated, the error is logged,
/// and the round continues.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct SolverFailure(pub String);

/// A solver's verified-or-not output for one attempt.
#[derive(Debug, Clone)]
pub enum Solution {
    React(Trajectory),
    Pne {
        plan: Plan,
        subtask_trajectories: Vec<Trajectory>,
    },
}

impl Solution {
    /// Every action of the solution, in execution order.
    pub fn actions(&self) -> Vec<&str> {
        match self {
            Solution::React(trajectory) => {
                trajectory.steps.iter().map(|s| s.action.as_str()).collect()
            }
            Solution::Pne {
                subtask_trajectories,
                ..
            } => subtask_trajectories
                .iter()
                .flat_map(|t| t.steps.iter().map(|s| s.action.as_str()))
                .collect(),
        }
    }

    fn kind(&self) -> RecordKind {
        match self {
            Solution::React(_) => RecordKind::React,
            Solution::Pne { .. } => RecordKind::Pne,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveAttempt {
    pub solution: Solution,
    pub steps: u32,
    pub input_tokens: u64,
    pub output_tokens: u64,
}

/// Generates candidate solutions. The pool passed in is the same view the
/// demonstrations were selected from, for rendering them.
pub trait Solver {
    fn solve(
        &mut self,
        task: &Task,
        demos: &SelectionResult,
        pool: &AnnotationPool,
    ) -> Result<SolveAttempt, SolverFailure>;
}

/// Verdict of a solution checker.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub passed: bool,
    pub failed: Vec<String>,
}

/// Verifies candidate solutions; only passing ones enter the pool.
pub trait SolutionChecker {
    fn check(&self, task: &Task, solution: &Solution) -> CheckOutcome;
}

/// Selects demonstrations for a task from the current annotated pool.
pub trait DemoSelector {
    fn select(&self, task: &Task, pool: &AnnotationPool)
        -> Result<SelectionResult, SelectError>;
}

/// Standard trajectory-demo selector: applies a [`SelectionSpec`] with the
/// task statement as the retrieval key. Random selection derives a per-task
/// seed from the base seed so tasks draw independent samples.
pub struct TrajectoryDemoSelector<'a> {
    pub spec: SelectionSpec,
    pub embed: &'a dyn crate::embed::EmbeddingProvider,
}

impl DemoSelector for TrajectoryDemoSelector<'_> {
    fn select(
        &self,
        task: &Task,
        pool: &AnnotationPool,
    ) -> Result<SelectionResult, SelectError> {
        let mut spec = self.spec.clone();
        if spec.method == crate::select::SelectionMethod::Random {
            spec.seed = crate::select::derive_seed(spec.seed, &task.task_id);
        }
        crate::select::select_trajectory_demos(task, pool, &spec, self.embed)
    }
}

/// Planner-demo selector for PnE annotation: task-plan pairs keyed by the
/// task statement.
pub struct PlanDemoSelector<'a> {
    pub spec: SelectionSpec,
    pub embed: &'a dyn crate::embed::EmbeddingProvider,
}

impl DemoSelector for PlanDemoSelector<'_> {
    fn select(
        &self,
        task: &Task,
        pool: &AnnotationPool,
    ) -> Result<SelectionResult, SelectError> {
        let candidates = crate::select::plan_candidates(pool, &task.task_id);
        crate::select::select_candidates(&task.instruction, &candidates, &self.spec, self.embed)
    }
}

/// Parameters of one annotation run.
#[derive(Debug, Clone)]
pub struct AnnotationConfig {
    pub rounds: u32,
    pub solver_kind: RecordKind,
    /// Demonstration spec the canonical selectors are built from; recorded
    /// here so a run is reproducible from its config.
    pub demos: SelectionSpec,
    pub seed: u64,
    pub checkpoint_path: Option<PathBuf>,
    /// When set, demonstrations come from a snapshot of the pool taken at
    /// round start instead of the live pool, trading within-round
    /// bootstrapping for order-independence (the contract concurrent
    /// execution would need).
    pub snapshot_demos: bool,
}

impl AnnotationConfig {
    pub fn new(rounds: u32, solver_kind: RecordKind, demos: SelectionSpec) -> Self {
        AnnotationConfig {
            rounds,
            solver_kind,
            demos,
            seed: 0,
            checkpoint_path: None,
            snapshot_demos: false,
        }
    }
}

fn record_from_solution(
    task: Task,
    solution: Solution,
    round: u32,
) -> Result<AnnotationRecord, crate::types::IntegrityError> {
    match solution {
        Solution::React(trajectory) => AnnotationRecord::react(task, trajectory, round),
        Solution::Pne {
            plan,
            subtask_trajectories,
        } => AnnotationRecord::pne(task, plan, subtask_trajectories, round),
    }
}

fn checkpoint(pool: &AnnotationPool, path: &Path) -> Result<(), AnnotateError> {
    save_pool(pool, path).map_err(|source| AnnotateError::Checkpoint {
        path: path.to_path_buf(),
        source: Box::new(source),
    })
}

fn run_rounds(
    mut pool: AnnotationPool,
    first_round: u32,
    solver: &mut dyn Solver,
    checker: &dyn SolutionChecker,
    selector: &dyn DemoSelector,
    config: &AnnotationConfig,
) -> Result<AnnotationPool, AnnotateError> {
    if config.rounds < 1 {
        return Err(AnnotateError::Integrity("rounds must be >= 1".into()));
    }
    if let Some(path) = &config.checkpoint_path {
        checkpoint(&pool, path)?;
    }
    for round in first_round..=config.rounds {
        let snapshot = if config.snapshot_demos {
            Some(pool.clone())
        } else {
            None
        };
        let mut pending: Vec<Task> = pool.unannotated.clone();
        pending.sort_by(|a, b| a.task_id.cmp(&b.task_id));
        for task in pending {
            let demo_pool = snapshot.as_ref().unwrap_or(&pool);
            let demos = match selector.select(&task, demo_pool) {
                Ok(demos) => demos,
                Err(e) => {
                    log::warn!(
                        "round={round} task={} outcome=selector_error error={e}",
                        task.task_id
                    );
                    continue;
                }
            };
            let attempt = match solver.solve(&task, &demos, demo_pool) {
                Ok(attempt) => attempt,
                Err(e) => {
                    log::warn!(
                        "round={round} task={} outcome=solver_error error={e}",
                        task.task_id
                    );
                    continue;
                }
            };
            let verdict = checker.check(&task, &attempt.solution);
            let tokens = attempt.input_tokens + attempt.output_tokens;
            if !verdict.passed {
                log::info!(
                    "round={round} task={} outcome=rejected steps={} tokens={tokens} failed={:?}",
                    task.task_id,
                    attempt.steps,
                    verdict.failed
                );
                continue;
            }
            if attempt.solution.kind() != config.solver_kind {
                log::warn!(
                    "round={round} task={} outcome=kind_mismatch expected={:?}",
                    task.task_id,
                    config.solver_kind
                );
                continue;
            }
            let record = match record_from_solution(task.clone(), attempt.solution, round) {
                Ok(record) => record,
                Err(e) => {
                    // A checker can pass a structurally inadmissible solution
                    // (e.g. one that never completed); it stays unannotated.
                    log::warn!(
                        "round={round} task={} outcome=inadmissible error={e}",
                        task.task_id
                    );
                    continue;
                }
            };
            log::info!(
                "round={round} task={} outcome=admitted steps={} tokens={tokens}",
                task.task_id,
                attempt.steps
            );
            pool.admit(record)?;
            if let Some(path) = &config.checkpoint_path {
                checkpoint(&pool, path)?;
            }
        }
        if pool.unannotated.is_empty() {
            break; // All tasks annotated.
        }
    }
    Ok(pool)
}

/// Runs the full annotation loop over `tasks` for up to `config.rounds`
/// rounds, returning the pool of admitted records plus whatever stayed
/// unannotated.
pub fn run_annotation(
    tasks: &[Task],
    solver: &mut dyn Solver,
    checker: &dyn SolutionChecker,
    selector: &dyn DemoSelector,
    config: &AnnotationConfig,
) -> Result<AnnotationPool, AnnotateError> {
    let pool = AnnotationPool::with_unannotated(tasks.to_vec())?;
    run_rounds(pool, 1, solver, checker, selector, config)
}

/// Continues an interrupted run from its checkpoint: already-annotated tasks
/// are never re-solved, and rounds resume after the highest recorded round.
/// Tasks in the list but absent from the checkpoint join the unannotated
/// set; a checkpoint task missing from the list is an integrity error.
pub fn resume_annotation(
    checkpoint_path: &Path,
    tasks: &[Task],
    solver: &mut dyn Solver,
    checker: &dyn SolutionChecker,
    selector: &dyn DemoSelector,
    config: &AnnotationConfig,
) -> Result<AnnotationPool, AnnotateError> {
    let mut pool = load_pool(checkpoint_path)?;
    let known: std::collections::HashSet<&str> =
        tasks.iter().map(|t| t.task_id.as_str()).collect();
    for record in &pool.records {
        if !known.contains(record.task.task_id.as_str()) {
            return Err(AnnotateError::Integrity(format!(
                "checkpoint task '{}' is absent from the task list",
                record.task.task_id
            )));
        }
    }
    for task in &pool.unannotated {
        if !known.contains(task.task_id.as_str()) {
            return Err(AnnotateError::Integrity(format!(
                "checkpoint task '{}' is absent from the task list",
                task.task_id
            )));
        }
    }
    let seen: std::collections::HashSet<&str> = pool
        .records
        .iter()
        .map(|r| r.task.task_id.as_str())
        .chain(pool.unannotated.iter().map(|t| t.task_id.as_str()))
        .collect();
    let new_tasks: Vec<Task> = tasks
        .iter()
        .filter(|t| !seen.contains(t.task_id.as_str()))
        .cloned()
        .collect();
    pool.unannotated.extend(new_tasks);
    pool.validate()?;

    let last_round = pool
        .records
        .iter()
        .map(|r| r.annotated_in_round)
        .max()
        .unwrap_or(0);
    run_rounds(pool, last_round + 1, solver, checker, selector, config)
}

// ---------------------------------------------------------------------------
// Canonical solvers: thin bridges from the agent loops to the Solver trait.
// ---------------------------------------------------------------------------

/// Builds a fresh environment for a task, or `None` for unknown tasks.
pub type EnvFactory<'a> = dyn Fn(&Task) -> Option<Box<dyn crate::agent::Environment>> + 'a;

/// ReAct solver over an environment factory.
pub struct ReactSolver<'a> {
    pub chat: &'a dyn crate::provider::ChatProvider,
    pub embed: &'a dyn crate::embed::EmbeddingProvider,
    pub env_factory: &'a EnvFactory<'a>,
    pub config: crate::agent::AgentConfig,
    pub snippets: Option<crate::agent::SnippetConfig>,
}

impl Solver for ReactSolver<'_> {
    fn solve(
        &mut self,
        task: &Task,
        demos: &SelectionResult,
        pool: &AnnotationPool,
    ) -> Result<SolveAttempt, SolverFailure> {
        let mut env = (self.env_factory)(task)
            .ok_or_else(|| SolverFailure(format!("no environment for task '{}'", task.task_id)))?;
        let runtime = crate::agent::AgentRuntime::new(pool, self.chat, self.embed);
        let result = runtime
            .run_react(task, demos, env.as_mut(), &self.config, self.snippets.as_ref())
            .map_err(|e| SolverFailure(e.to_string()))?;
        Ok(SolveAttempt {
            steps: result.trajectory.steps.len() as u32,
            input_tokens: result.total_input_tokens,
            output_tokens: result.total_output_tokens,
            solution: Solution::React(result.trajectory),
        })
    }
}

/// Plan-and-Execute solver over an environment factory. The demos passed in
/// are the planner's task-plan pairs; executor demos are selected inside the
/// run, keyed by each subtask statement.
pub struct PneSolver<'a> {
    pub chat: &'a dyn crate::provider::ChatProvider,
    pub embed: &'a dyn crate::embed::EmbeddingProvider,
    pub env_factory: &'a EnvFactory<'a>,
    pub options: crate::agent::PneOptions,
}

impl Solver for PneSolver<'_> {
    fn solve(
        &mut self,
        task: &Task,
        demos: &SelectionResult,
        pool: &AnnotationPool,
    ) -> Result<SolveAttempt, SolverFailure> {
        let mut env = (self.env_factory)(task)
            .ok_or_else(|| SolverFailure(format!("no environment for task '{}'", task.task_id)))?;
        let runtime = crate::agent::AgentRuntime::new(pool, self.chat, self.embed);
        let result = runtime
            .run_pne(task, env.as_mut(), &self.options, Some(demos))
            .map_err(|e| SolverFailure(e.to_string()))?;
        let plan = result.plan.ok_or_else(|| {
            SolverFailure(format!("run for '{}' produced no plan", task.task_id))
        })?;
        Ok(SolveAttempt {
            steps: result.trajectory.steps.len() as u32,
            input_tokens: result.total_input_tokens,
            output_tokens: result.total_output_tokens,
            solution: Solution::Pne {
                plan,
                subtask_trajectories: result.subtask_trajectories,
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::HashEmbedder;
    use crate::select::SelectionMethod;
    use crate::types::{Split, Step, Terminal};
    use std::cell::Cell;

    fn fixture_task(id: &str, scenario: &str, variant: u32, instruction: &str) -> Task {
        Task {
            task_id: id.into(),
            scenario_id: scenario.into(),
            variant,
            instruction: instruction.into(),
            split: Split::Train,
        }
    }

    /// Six tasks over two scenarios. Task ids are chosen so one alpha task
    /// precedes its scenario's zero-demo seed alphabetically and must wait
    /// for round 2; everything else bootstraps within round 1.
    fn six_task_fixture() -> Vec<Task> {
        vec![
            fixture_task("a0", "alpha", 2, "move 10 coins into the alpha vault"),
            fixture_task("a1", "alpha", 1, "move 25 coins into the alpha vault"),
            fixture_task("a2", "alpha", 3, "move 40 coins into the alpha vault"),
            fixture_task("b1", "beta", 1, "write entry one in the beta journal"),
            fixture_task("b2", "beta", 2, "write entry two in the beta journal"),
            fixture_task("b3", "beta", 3, "write entry three in the beta journal"),
        ]
    }

    /// Demonstration-sensitive scripted solver: succeeds on the two seed
    /// tasks unconditionally, and on everything else only when a
    /// same-scenario demonstration was selected. Solution quality is
    /// encoded in the final answer; the paired checker reads it back.
    struct ScriptedSolver<'a> {
        calls: &'a Cell<u32>,
        force_fail: bool,
    }

    impl Solver for ScriptedSolver<'_> {
        fn solve(
            &mut self,
            task: &Task,
            demos: &SelectionResult,
            pool: &AnnotationPool,
        ) -> Result<SolveAttempt, SolverFailure> {
            self.calls.set(self.calls.get() + 1);
            let easy = task.task_id == "a1" || task.task_id == "b1";
            let has_scenario_demo = demos.selected.iter().any(|picked| {
                pool.record(&picked.candidate_id)
                    .map(|r| r.task.scenario_id == task.scenario_id)
                    .unwrap_or(false)
            });
            let good = !self.force_fail && (easy || has_scenario_demo);
            let answer = if good { "good" } else { "bad" };
            let trajectory = Trajectory {
                task_id: task.task_id.clone(),
                steps: vec![Step {
                    index: 1,
                    thought: "attempt".into(),
                    action: format!("final(answer=\"{answer}\")"),
                    observation: String::new(),
                    input_tokens: 7,
                    output_tokens: 3,
                }],
                terminal: Terminal::Completed,
                final_answer: Some(answer.to_string()),
            };
            Ok(SolveAttempt {
                solution: Solution::React(trajectory),
                steps: 1,
                input_tokens: 7,
                output_tokens: 3,
            })
        }
    }

    struct AnswerChecker;

    impl SolutionChecker for AnswerChecker {
        fn check(&self, _task: &Task, solution: &Solution) -> CheckOutcome {
            let passed = match solution {
                Solution::React(t) => t.final_answer.as_deref() == Some("good"),
                Solution::Pne { .. } => false,
            };
            CheckOutcome {
                passed,
                failed: if passed { vec![] } else { vec!["answer".into()] },
            }
        }
    }

    struct AlwaysPass;

    impl SolutionChecker for AlwaysPass {
        fn check(&self, _task: &Task, _solution: &Solution) -> CheckOutcome {
            CheckOutcome {
                passed: true,
                failed: vec![],
            }
        }
    }

    fn config(rounds: u32) -> AnnotationConfig {
        AnnotationConfig::new(
            rounds,
            RecordKind::React,
            SelectionSpec::new(SelectionMethod::Cosine, 1),
        )
    }

    fn run_fixture(
        rounds: u32,
        force_fail: bool,
        snapshot: bool,
        checkpoint: Option<PathBuf>,
    ) -> (AnnotationPool, u32) {
        let tasks = six_task_fixture();
        let calls = Cell::new(0);
        let mut solver = ScriptedSolver {
            calls: &calls,
            force_fail,
        };
        let embed = HashEmbedder::default();
        let selector = TrajectoryDemoSelector {
            spec: SelectionSpec::new(SelectionMethod::Cosine, 1),
            embed: &embed,
        };
        let mut cfg = config(rounds);
        cfg.snapshot_demos = snapshot;
        cfg.checkpoint_path = checkpoint;
        let pool = run_annotation(&tasks, &mut solver, &AnswerChecker, &selector, &cfg).unwrap();
        (pool, calls.get())
    }

    fn rounds_by_task(pool: &AnnotationPool) -> Vec<(String, u32)> {
        let mut out: Vec<(String, u32)> = pool
            .records
            .iter()
            .map(|r| (r.task.task_id.clone(), r.annotated_in_round))
            .collect();
        out.sort();
        out
    }

    /// Hand trace, sequential mode, ascending id order:
    /// round 1 — a0 fails (empty pool), a1 seeds, a2 follows a1 in-round,
    /// b1 seeds, b2 and b3 follow; round 2 — a0 succeeds off the alpha demos.
    #[test]
    fn six_task_fixture_follows_the_hand_traced_schedule() {
        let (pool, calls) = run_fixture(3, false, false, None);
        assert_eq!(
            rounds_by_task(&pool),
            vec![
                ("a0".to_string(), 2),
                ("a1".to_string(), 1),
                ("a2".to_string(), 1),
                ("b1".to_string(), 1),
                ("b2".to_string(), 1),
                ("b3".to_string(), 1),
            ]
        );
        assert!(pool.unannotated.is_empty());
        // 6 attempts in round 1, one retry in round 2.
        assert_eq!(calls, 7);
    }

    /// Snapshot mode defers within-round bootstrapping: only the seeds land
    /// in round 1, their dependents all wait for round 2.
    #[test]
    fn snapshot_mode_trades_bootstrapping_for_round_isolation() {
        let (pool, _) = run_fixture(3, false, true, None);
        assert_eq!(
            rounds_by_task(&pool),
            vec![
                ("a0".to_string(), 2),
                ("a1".to_string(), 1),
                ("a2".to_string(), 2),
                ("b1".to_string(), 1),
                ("b2".to_string(), 2),
                ("b3".to_string(), 2),
            ]
        );
    }

    #[test]
    fn always_true_checker_annotates_everything_in_one_round() {
        let tasks = six_task_fixture();
        let calls = Cell::new(0);
        let mut solver = ScriptedSolver {
            calls: &calls,
            force_fail: false,
        };
        let embed = HashEmbedder::default();
        let selector = TrajectoryDemoSelector {
            spec: SelectionSpec::new(SelectionMethod::Cosine, 1),
            embed: &embed,
        };
        let pool =
            run_annotation(&tasks, &mut solver, &AlwaysPass, &selector, &config(1)).unwrap();
        assert_eq!(pool.records.len(), 6);
        assert_eq!(calls.get(), 6, "exactly N solver calls");
        assert!(pool
            .records
            .iter()
            .all(|r| r.annotated_in_round == 1));
    }

    #[test]
    fn always_false_checker_makes_exactly_r_times_n_calls() {
        let (pool, calls) = run_fixture(3, true, false, None);
        assert_eq!(pool.records.len(), 0);
        assert_eq!(pool.unannotated.len(), 6);
        assert_eq!(calls, 3 * 6);
    }

    #[test]
    fn partition_is_preserved() {
        let (pool, _) = run_fixture(1, true, false, None);
        let mut all: Vec<&str> = pool
            .records
            .iter()
            .map(|r| r.task.task_id.as_str())
            .chain(pool.unannotated.iter().map(|t| t.task_id.as_str()))
            .collect();
        all.sort_unstable();
        assert_eq!(all, vec!["a0", "a1", "a2", "b1", "b2", "b3"]);
    }

    #[test]
    fn resume_after_round_one_matches_the_uninterrupted_run() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("checkpoint.jsonl");

        // Killed after round 1: run with R=1 and a checkpoint.
        let (after_round_one, _) = run_fixture(1, false, false, Some(path.clone()));
        assert_eq!(after_round_one.records.len(), 5);

        // Uninterrupted reference run.
        let (reference, _) = run_fixture(3, false, false, None);

        // Resume from the checkpoint with the full budget.
        let tasks = six_task_fixture();
        let calls = Cell::new(0);
        let mut solver = ScriptedSolver {
            calls: &calls,
            force_fail: false,
        };
        let embed = HashEmbedder::default();
        let selector = TrajectoryDemoSelector {
            spec: SelectionSpec::new(SelectionMethod::Cosine, 1),
            embed: &embed,
        };
        let resumed = resume_annotation(
            &path,
            &tasks,
            &mut solver,
            &AnswerChecker,
            &selector,
            &config(3),
        )
        .unwrap();
        assert_eq!(resumed, reference);
        // Only the one remaining task was re-solved.
        assert_eq!(calls.get(), 1);
    }

    #[test]
    fn resume_with_everything_annotated_makes_no_solver_calls() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("checkpoint.jsonl");
        let (finished, _) = run_fixture(3, false, false, Some(path.clone()));
        assert!(finished.unannotated.is_empty());

        let tasks = six_task_fixture();
        let calls = Cell::new(0);
        let mut solver = ScriptedSolver {
            calls: &calls,
            force_fail: false,
        };
        let embed = HashEmbedder::default();
        let selector = TrajectoryDemoSelector {
            spec: SelectionSpec::new(SelectionMethod::Cosine, 1),
            embed: &embed,
        };
        let resumed = resume_annotation(
            &path,
            &tasks,
            &mut solver,
            &AnswerChecker,
            &selector,
            &config(3),
        )
        .unwrap();
        assert_eq!(resumed, finished);
        assert_eq!(calls.get(), 0);
    }

    #[test]
    fn resume_rejects_checkpoint_tasks_missing_from_the_list() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("checkpoint.jsonl");
        let (_, _) = run_fixture(1, false, false, Some(path.clone()));

        let truncated: Vec<Task> = six_task_fixture().into_iter().skip(1).collect();
        let calls = Cell::new(0);
        let mut solver = ScriptedSolver {
            calls: &calls,
            force_fail: false,
        };
        let embed = HashEmbedder::default();
        let selector = TrajectoryDemoSelector {
            spec: SelectionSpec::new(SelectionMethod::Cosine, 1),
            embed: &embed,
        };
        let err = resume_annotation(
            &path,
            &truncated,
            &mut solver,
            &AnswerChecker,
            &selector,
            &config(3),
        )
        .unwrap_err();
        assert!(matches!(err, AnnotateError::Integrity(_)), "{err}");
    }
}
