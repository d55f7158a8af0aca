//! Domain types shared by every subsystem: tasks, steps, trajectories, plans,
//! and the annotation pool that joins tasks with verified solutions.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Dataset split a task belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Dev,
    TestNormal,
    TestChallenge,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::TestNormal => "test_normal",
            Split::TestChallenge => "test_challenge",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "dev" => Ok(Split::Dev),
            "test_normal" => Ok(Split::TestNormal),
            "test_challenge" => Ok(Split::TestChallenge),
            other => Err(format!("unknown split '{other}'")),
        }
    }
}

/// A natural-language task instance: one variant of a scenario template.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub task_id: String,
    pub scenario_id: String,
    pub variant: u32,
    pub instruction: String,
    pub split: Split,
}

impl Task {
    pub fn validate(&self) -> Result<(), IntegrityError> {
        if self.task_id.is_empty() {
            return Err(IntegrityError("task_id must be non-empty".into()));
        }
        if self.variant < 1 {
            return Err(IntegrityError(format!(
                "task {}: variant must be >= 1",
                self.task_id
            )));
        }
        if self.instruction.trim().is_empty() {
            return Err(IntegrityError(format!(
                "task {}: instruction must be non-empty",
                self.task_id
            )));
        }
        Ok(())
    }
}

/// One thought/action/observation triple, with per-step token accounting so
/// truncation and usage reports stay recomputable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub index: u32,
    pub thought: String,
    pub action: String,
    pub observation: String,
    pub input_tokens: u64,
    pub output_tokens: u64,
}

/// How a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Terminal {
    /// The agent emitted a terminal `final(...)` action.
    Completed,
    /// The step budget ran out.
    Exhausted,
    /// The run was cut short (provider failure, context overflow, plan error).
    Aborted,
}

impl fmt::Display for Terminal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Terminal::Completed => "completed",
            Terminal::Exhausted => "exhausted",
            Terminal::Aborted => "aborted",
        };
        f.write_str(s)
    }
}

/// An ordered execution trace for one task (or one subtask).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub task_id: String,
    pub steps: Vec<Step>,
    pub terminal: Terminal,
    pub final_answer: Option<String>,
}

impl Trajectory {
    /// Checks the stored-annotation invariants: non-empty steps, strictly
    /// increasing indices, and non-empty thought/action on non-terminal steps.
    pub fn validate(&self) -> Result<(), IntegrityError> {
        if self.steps.is_empty() {
            return Err(IntegrityError(format!(
                "trajectory for {}: steps must be non-empty",
                self.task_id
            )));
        }
        let mut prev = 0u32;
        for step in &self.steps {
            if step.index <= prev {
                return Err(IntegrityError(format!(
                    "trajectory for {}: step indices must be strictly increasing (step {} after {})",
                    self.task_id, step.index, prev
                )));
            }
            prev = step.index;
        }
        // Every step but the terminal one must carry a real thought and action.
        for step in &self.steps[..self.steps.len() - 1] {
            if step.thought.is_empty() || step.action.is_empty() {
                return Err(IntegrityError(format!(
                    "trajectory for {}: non-terminal step {} has an empty thought or action",
                    self.task_id, step.index
                )));
            }
        }
        Ok(())
    }
}

/// One subtask of a plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subtask {
    pub subtask_id: String,
    pub statement: String,
}

/// An ordered decomposition of a task into subtasks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub task_id: String,
    pub subtasks: Vec<Subtask>,
}

impl Plan {
    pub fn validate(&self) -> Result<(), IntegrityError> {
        if self.subtasks.is_empty() {
            return Err(IntegrityError(format!(
                "plan for {}: subtasks must be non-empty",
                self.task_id
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for st in &self.subtasks {
            if !seen.insert(st.subtask_id.as_str()) {
                return Err(IntegrityError(format!(
                    "plan for {}: duplicate subtask_id '{}'",
                    self.task_id, st.subtask_id
                )));
            }
        }
        Ok(())
    }
}

/// Which solver produced an annotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordKind {
    React,
    Pne,
}

/// A task joined with its checker-verified solution.
///
/// Exactly one of the solution shapes is populated, matching `kind`: a single
/// trajectory for ReAct, or a plan plus one trajectory per subtask
/// (positionally aligned with `plan.subtasks`) for Plan-and-Execute.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationRecord {
    pub task: Task,
    pub kind: RecordKind,
    pub trajectory: Option<Trajectory>,
    pub plan: Option<Plan>,
    pub subtask_trajectories: Vec<Trajectory>,
    pub annotated_in_round: u32,
}

impl AnnotationRecord {
    pub fn react(task: Task, trajectory: Trajectory, round: u32) -> Result<Self, IntegrityError> {
        let record = AnnotationRecord {
            task,
            kind: RecordKind::React,
            trajectory: Some(trajectory),
            plan: None,
            subtask_trajectories: Vec::new(),
            annotated_in_round: round,
        };
        record.validate()?;
        Ok(record)
    }

    pub fn pne(
        task: Task,
        plan: Plan,
        subtask_trajectories: Vec<Trajectory>,
        round: u32,
    ) -> Result<Self, IntegrityError> {
        let record = AnnotationRecord {
            task,
            kind: RecordKind::Pne,
            trajectory: None,
            plan: Some(plan),
            subtask_trajectories,
            annotated_in_round: round,
        };
        record.validate()?;
        Ok(record)
    }

    pub fn validate(&self) -> Result<(), IntegrityError> {
        self.task.validate()?;
        if self.annotated_in_round < 1 {
            return Err(IntegrityError(format!(
                "record {}: annotated_in_round must be >= 1",
                self.task.task_id
            )));
        }
        match self.kind {
            RecordKind::React => {
                let trajectory = self.trajectory.as_ref().ok_or_else(|| {
                    IntegrityError(format!(
                        "react record {} is missing its trajectory",
                        self.task.task_id
                    ))
                })?;
                if self.plan.is_some() || !self.subtask_trajectories.is_empty() {
                    return Err(IntegrityError(format!(
                        "react record {} must not carry a plan or subtask trajectories",
                        self.task.task_id
                    )));
                }
                trajectory.validate()?;
                if trajectory.terminal != Terminal::Completed {
                    return Err(IntegrityError(format!(
                        "record {}: only completed trajectories may enter a pool (got {})",
                        self.task.task_id, trajectory.terminal
                    )));
                }
            }
            RecordKind::Pne => {
                let plan = self.plan.as_ref().ok_or_else(|| {
                    IntegrityError(format!(
                        "pne record {} is missing its plan",
                        self.task.task_id
                    ))
                })?;
                if self.trajectory.is_some() {
                    return Err(IntegrityError(format!(
                        "pne record {} must not carry a task-level trajectory",
                        self.task.task_id
                    )));
                }
                plan.validate()?;
                if plan.subtasks.len() != self.subtask_trajectories.len() {
                    return Err(IntegrityError(format!(
                        "record {}: {} subtasks but {} subtask trajectories",
                        self.task.task_id,
                        plan.subtasks.len(),
                        self.subtask_trajectories.len()
                    )));
                }
                for trajectory in &self.subtask_trajectories {
                    trajectory.validate()?;
                    if trajectory.terminal != Terminal::Completed {
                        return Err(IntegrityError(format!(
                            "record {}: subtask trajectory did not complete (got {})",
                            self.task.task_id, trajectory.terminal
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Tasks joined with verified solutions, plus the tasks still waiting for one.
///
/// A pool is immutable after load; annotation appends new records through
/// [`AnnotationPool::admit`] under a single-writer contract.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AnnotationPool {
    pub records: Vec<AnnotationRecord>,
    pub unannotated: Vec<Task>,
}

impl AnnotationPool {
    pub fn new() -> Self {
        Self::default()
    }

    /// A pool with no solutions yet: every task starts unannotated.
    pub fn with_unannotated(tasks: Vec<Task>) -> Result<Self, IntegrityError> {
        let pool = AnnotationPool {
            records: Vec::new(),
            unannotated: tasks,
        };
        pool.validate()?;
        Ok(pool)
    }

    pub fn from_parts(
        records: Vec<AnnotationRecord>,
        unannotated: Vec<Task>,
    ) -> Result<Self, IntegrityError> {
        let pool = AnnotationPool {
            records,
            unannotated,
        };
        pool.validate()?;
        Ok(pool)
    }

    pub fn validate(&self) -> Result<(), IntegrityError> {
        let mut task_ids = std::collections::HashSet::new();
        let mut scenario_variants = std::collections::HashSet::new();
        let mut check_task = |task: &Task| -> Result<(), IntegrityError> {
            task.validate()?;
            if !task_ids.insert(task.task_id.clone()) {
                return Err(IntegrityError(format!(
                    "duplicate task_id '{}' in pool",
                    task.task_id
                )));
            }
            if !scenario_variants.insert((task.scenario_id.clone(), task.variant)) {
                return Err(IntegrityError(format!(
                    "duplicate (scenario_id, variant) = ({}, {})",
                    task.scenario_id, task.variant
                )));
            }
            Ok(())
        };
        for record in &self.records {
            check_task(&record.task)?;
        }
        for task in &self.unannotated {
            check_task(task)?;
        }
        for record in &self.records {
            record.validate()?;
        }
        Ok(())
    }

    /// Moves a task from the unannotated set into the records.
    ///
    /// Rejects (never overwrites) duplicate task ids, records whose task is
    /// not currently unannotated, and solutions that did not complete.
    pub fn admit(&mut self, record: AnnotationRecord) -> Result<(), IntegrityError> {
        record.validate()?;
        let id = &record.task.task_id;
        if self.records.iter().any(|r| &r.task.task_id == id) {
            return Err(IntegrityError(format!(
                "task '{id}' is already annotated; refusing to overwrite"
            )));
        }
        let position = self
            .unannotated
            .iter()
            .position(|t| &t.task_id == id)
            .ok_or_else(|| {
                IntegrityError(format!("task '{id}' is not in the unannotated set"))
            })?;
        self.unannotated.remove(position);
        self.records.push(record);
        Ok(())
    }

    pub fn record(&self, task_id: &str) -> Option<&AnnotationRecord> {
        self.records.iter().find(|r| r.task.task_id == task_id)
    }

    pub fn react_records(&self) -> impl Iterator<Item = &AnnotationRecord> {
        self.records
            .iter()
            .filter(|r| r.kind == RecordKind::React)
    }

    pub fn pne_records(&self) -> impl Iterator<Item = &AnnotationRecord> {
        self.records.iter().filter(|r| r.kind == RecordKind::Pne)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// A domain-invariant violation: duplicate ids, empty required fields,
/// mismatched record shapes, and the like.
#[derive(Debug, Clone, thiserror::Error)]
#[error("{0}")]
pub struct IntegrityError(pub String);

#[cfg(test)]
mod tests {
    use super::*;

    fn task(id: &str) -> Task {
        Task {
            task_id: id.to_string(),
            scenario_id: format!("scenario_{id}"),
            variant: 1,
            instruction: "do the thing".to_string(),
            split: Split::Train,
        }
    }

    fn completed_trajectory(task_id: &str) -> Trajectory {
        Trajectory {
            task_id: task_id.to_string(),
            steps: vec![
                Step {
                    index: 1,
                    thought: "think".into(),
                    action: "app.method()".into(),
                    observation: "ok".into(),
                    input_tokens: 10,
                    output_tokens: 5,
                },
                Step {
                    index: 2,
                    thought: "done".into(),
                    action: "final(answer=\"done\")".into(),
                    observation: "".into(),
                    input_tokens: 12,
                    output_tokens: 4,
                },
            ],
            terminal: Terminal::Completed,
            final_answer: Some("done".into()),
        }
    }

    #[test]
    fn admission_requires_completed_terminal() {
        let mut trajectory = completed_trajectory("t1");
        trajectory.terminal = Terminal::Exhausted;
        let err = AnnotationRecord::react(task("t1"), trajectory, 1).unwrap_err();
        assert!(err.0.contains("completed"), "{err}");
    }

    #[test]
    fn duplicate_task_id_is_rejected_not_overwritten() {
        let mut pool = AnnotationPool::with_unannotated(vec![task("t1")]).unwrap();
        let record = AnnotationRecord::react(task("t1"), completed_trajectory("t1"), 1).unwrap();
        pool.admit(record.clone()).unwrap();
        let err = pool.admit(record).unwrap_err();
        assert!(err.0.contains("refusing to overwrite"), "{err}");
        assert_eq!(pool.records.len(), 1);
    }

    #[test]
    fn step_indices_must_strictly_increase() {
        let mut trajectory = completed_trajectory("t1");
        trajectory.steps[1].index = 1;
        assert!(trajectory.validate().is_err());
    }

    #[test]
    fn pne_record_needs_one_trajectory_per_subtask() {
        let plan = Plan {
            task_id: "t1".into(),
            subtasks: vec![
                Subtask {
                    subtask_id: "s1".into(),
                    statement: "first".into(),
                },
                Subtask {
                    subtask_id: "s2".into(),
                    statement: "second".into(),
                },
            ],
        };
        let err = AnnotationRecord::pne(task("t1"), plan, vec![completed_trajectory("t1")], 1)
            .unwrap_err();
        assert!(err.0.contains("subtask trajectories"), "{err}");
    }

    #[test]
    fn duplicate_scenario_variant_is_rejected() {
        let mut second = task("t2");
        second.scenario_id = "scenario_t1".into();
        let err = AnnotationPool::with_unannotated(vec![task("t1"), second]).unwrap_err();
        assert!(err.0.contains("scenario_id"), "{err}");
    }
}
