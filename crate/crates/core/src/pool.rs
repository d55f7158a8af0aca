//! Line-delimited pool persistence.
//!
//! One record per line, UTF-8, with a top-level `kind` discriminator:
//! `react` and `pne` lines carry annotations, `task` lines carry tasks still
//! waiting for one. The line-oriented layout lets annotation rounds append
//! checkpoints without rewriting history.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::types::{
    AnnotationPool, AnnotationRecord, IntegrityError, Plan, RecordKind, Split, Step, Task,
    Terminal, Trajectory,
};

#[derive(Debug, thiserror::Error)]
pub enum PoolError {
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("integrity error: {0}")]
    Integrity(#[from] IntegrityError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// On-disk representation of one pool line. Field names are part of the file
/// format and must not change.
#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum PoolLine {
    Task {
        task_id: String,
        scenario_id: String,
        variant: u32,
        instruction: String,
        split: Split,
    },
    React {
        task_id: String,
        scenario_id: String,
        variant: u32,
        instruction: String,
        split: Split,
        steps: Vec<StepLine>,
        terminal: Terminal,
        final_answer: Option<String>,
        annotated_in_round: u32,
    },
    Pne {
        task_id: String,
        scenario_id: String,
        variant: u32,
        instruction: String,
        split: Split,
        plan: PlanLine,
        subtask_trajectories: Vec<TrajectoryLine>,
        annotated_in_round: u32,
    },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StepLine {
    index: u32,
    thought: String,
    action: String,
    observation: String,
    input_tokens: u64,
    output_tokens: u64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanLine {
    subtasks: Vec<SubtaskLine>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SubtaskLine {
    subtask_id: String,
    statement: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrajectoryLine {
    task_id: String,
    steps: Vec<StepLine>,
    terminal: Terminal,
    final_answer: Option<String>,
}

impl From<&Step> for StepLine {
    fn from(s: &Step) -> Self {
        StepLine {
            index: s.index,
            thought: s.thought.clone(),
            action: s.action.clone(),
            observation: s.observation.clone(),
            input_tokens: s.input_tokens,
            output_tokens: s.output_tokens,
        }
    }
}

impl From<StepLine> for Step {
    fn from(s: StepLine) -> Self {
        Step {
            index: s.index,
            thought: s.thought,
            action: s.action,
            observation: s.observation,
            input_tokens: s.input_tokens,
            output_tokens: s.output_tokens,
        }
    }
}

impl From<&Trajectory> for TrajectoryLine {
    fn from(t: &Trajectory) -> Self {
        TrajectoryLine {
            task_id: t.task_id.clone(),
            steps: t.steps.iter().map(StepLine::from).collect(),
            terminal: t.terminal,
            final_answer: t.final_answer.clone(),
        }
    }
}

impl From<TrajectoryLine> for Trajectory {
    fn from(t: TrajectoryLine) -> Self {
        Trajectory {
            task_id: t.task_id,
            steps: t.steps.into_iter().map(Step::from).collect(),
            terminal: t.terminal,
            final_answer: t.final_answer,
        }
    }
}

fn task_line(task: &Task) -> PoolLine {
    PoolLine::Task {
        task_id: task.task_id.clone(),
        scenario_id: task.scenario_id.clone(),
        variant: task.variant,
        instruction: task.instruction.clone(),
        split: task.split,
    }
}

fn record_line(record: &AnnotationRecord) -> PoolLine {
    let t = &record.task;
    match record.kind {
        RecordKind::React => {
            let trajectory = record.trajectory.as_ref().expect("validated react record");
            PoolLine::React {
                task_id: t.task_id.clone(),
                scenario_id: t.scenario_id.clone(),
                variant: t.variant,
                instruction: t.instruction.clone(),
                split: t.split,
                steps: trajectory.steps.iter().map(StepLine::from).collect(),
                terminal: trajectory.terminal,
                final_answer: trajectory.final_answer.clone(),
                annotated_in_round: record.annotated_in_round,
            }
        }
        RecordKind::Pne => {
            let plan = record.plan.as_ref().expect("validated pne record");
            PoolLine::Pne {
                task_id: t.task_id.clone(),
                scenario_id: t.scenario_id.clone(),
                variant: t.variant,
                instruction: t.instruction.clone(),
                split: t.split,
                plan: PlanLine {
                    subtasks: plan
                        .subtasks
                        .iter()
                        .map(|s| SubtaskLine {
                            subtask_id: s.subtask_id.clone(),
                            statement: s.statement.clone(),
                        })
                        .collect(),
                },
                subtask_trajectories: record
                    .subtask_trajectories
                    .iter()
                    .map(TrajectoryLine::from)
                    .collect(),
                annotated_in_round: record.annotated_in_round,
            }
        }
    }
}

fn line_into_pool(line: PoolLine, pool: &mut AnnotationPool) -> Result<(), IntegrityError> {
    match line {
        PoolLine::Task {
            task_id,
            scenario_id,
            variant,
            instruction,
            split,
        } => {
            pool.unannotated.push(Task {
                task_id,
                scenario_id,
                variant,
                instruction,
                split,
            });
            Ok(())
        }
        PoolLine::React {
            task_id,
            scenario_id,
            variant,
            instruction,
            split,
            steps,
            terminal,
            final_answer,
            annotated_in_round,
        } => {
            let task = Task {
                task_id: task_id.clone(),
                scenario_id,
                variant,
                instruction,
                split,
            };
            let trajectory = Trajectory {
                task_id,
                steps: steps.into_iter().map(Step::from).collect(),
                terminal,
                final_answer,
            };
            let record = AnnotationRecord::react(task, trajectory, annotated_in_round)?;
            pool.records.push(record);
            Ok(())
        }
        PoolLine::Pne {
            task_id,
            scenario_id,
            variant,
            instruction,
            split,
            plan,
            subtask_trajectories,
            annotated_in_round,
        } => {
            let task = Task {
                task_id: task_id.clone(),
                scenario_id,
                variant,
                instruction,
                split,
            };
            let plan = Plan {
                task_id,
                subtasks: plan
                    .subtasks
                    .into_iter()
                    .map(|s| crate::types::Subtask {
                        subtask_id: s.subtask_id,
                        statement: s.statement,
                    })
                    .collect(),
            };
            let trajectories = subtask_trajectories
                .into_iter()
                .map(Trajectory::from)
                .collect();
            let record = AnnotationRecord::pne(task, plan, trajectories, annotated_in_round)?;
            pool.records.push(record);
            Ok(())
        }
    }
}

/// Loads a pool from a line-delimited file, checking every type invariant.
///
/// Retrieval indexes are not built here; selection embeds keys on demand.
pub fn load_pool(path: impl AsRef<Path>) -> Result<AnnotationPool, PoolError> {
    let text = fs::read_to_string(path)?;
    parse_pool(&text)
}

/// Parses pool file contents. Split out of [`load_pool`] so in-memory
/// callers (tests, the browser demo) can reuse the format.
pub fn parse_pool(text: &str) -> Result<AnnotationPool, PoolError> {
    let mut pool = AnnotationPool::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed: PoolLine =
            serde_json::from_str(line).map_err(|source| PoolError::Parse {
                line: i + 1,
                source,
            })?;
        line_into_pool(parsed, &mut pool)?;
    }
    pool.validate()?;
    Ok(pool)
}

/// Serializes a pool to its line-delimited text form: records first, in
/// order, then the unannotated tasks.
pub fn pool_to_string(pool: &AnnotationPool) -> String {
    let mut out = String::new();
    for record in &pool.records {
        out.push_str(&serde_json::to_string(&record_line(record)).expect("pool line serializes"));
        out.push('\n');
    }
    for task in &pool.unannotated {
        out.push_str(&serde_json::to_string(&task_line(task)).expect("pool line serializes"));
        out.push('\n');
    }
    out
}

/// Writes a pool so that `load_pool` reproduces it field-for-field.
pub fn save_pool(pool: &AnnotationPool, path: impl AsRef<Path>) -> Result<(), PoolError> {
    pool.validate()?;
    let file = fs::File::create(path)?;
    let mut writer = BufWriter::new(file);
    writer.write_all(pool_to_string(pool).as_bytes())?;
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Subtask;

    fn task(id: &str, scenario: &str, variant: u32) -> Task {
        Task {
            task_id: id.into(),
            scenario_id: scenario.into(),
            variant,
            instruction: format!("instruction for {id}"),
            split: Split::Train,
        }
    }

    fn react_record(id: &str, scenario: &str) -> AnnotationRecord {
        let trajectory = Trajectory {
            task_id: id.into(),
            steps: vec![
                Step {
                    index: 1,
                    thought: "look".into(),
                    action: "app.check(x=1)".into(),
                    observation: "{\"ok\":true}".into(),
                    input_tokens: 30,
                    output_tokens: 9,
                },
                Step {
                    index: 2,
                    thought: "verify".into(),
                    action: "app.check(x=2)".into(),
                    observation: "{\"ok\":true}".into(),
                    input_tokens: 40,
                    output_tokens: 11,
                },
                Step {
                    index: 3,
                    thought: "finish".into(),
                    action: "final(answer=\"done\")".into(),
                    observation: "".into(),
                    input_tokens: 50,
                    output_tokens: 8,
                },
            ],
            terminal: Terminal::Completed,
            final_answer: Some("done".into()),
        };
        AnnotationRecord::react(task(id, scenario, 1), trajectory, 1).unwrap()
    }

    #[test]
    fn empty_file_loads_empty_pool() {
        let pool = parse_pool("").unwrap();
        assert_eq!(pool.records.len(), 0);
        assert_eq!(pool.unannotated.len(), 0);
    }

    #[test]
    fn single_react_record_round_trips() {
        let pool = AnnotationPool::from_parts(vec![react_record("t1", "s1")], vec![]).unwrap();
        let text = pool_to_string(&pool);
        assert_eq!(text.lines().count(), 1);
        let loaded = parse_pool(&text).unwrap();
        assert_eq!(loaded, pool);
    }

    #[test]
    fn pne_record_round_trips() {
        let plan = Plan {
            task_id: "t1".into(),
            subtasks: vec![
                Subtask {
                    subtask_id: "s1".into(),
                    statement: "first part".into(),
                },
                Subtask {
                    subtask_id: "s2".into(),
                    statement: "second part".into(),
                },
            ],
        };
        let sub = |sid: &str| Trajectory {
            task_id: sid.into(),
            steps: vec![Step {
                index: 1,
                thought: "go".into(),
                action: "final(answer=\"ok\")".into(),
                observation: "".into(),
                input_tokens: 5,
                output_tokens: 5,
            }],
            terminal: Terminal::Completed,
            final_answer: Some("ok".into()),
        };
        let record =
            AnnotationRecord::pne(task("t1", "s1", 1), plan, vec![sub("t1"), sub("t1")], 2)
                .unwrap();
        let pool =
            AnnotationPool::from_parts(vec![record], vec![task("t2", "s2", 1)]).unwrap();
        let loaded = parse_pool(&pool_to_string(&pool)).unwrap();
        assert_eq!(loaded, pool);
    }

    #[test]
    fn task_in_both_sections_is_an_integrity_error() {
        let record = react_record("t1", "s1");
        let mut text = pool_to_string(
            &AnnotationPool::from_parts(vec![record], vec![]).unwrap(),
        );
        // Same task appended again as unannotated.
        text.push_str(
            &serde_json::to_string(&task_line(&task("t1", "s9", 1))).unwrap(),
        );
        text.push('\n');
        let err = parse_pool(&text).unwrap_err();
        assert!(matches!(err, PoolError::Integrity(_)), "{err}");
    }

    #[test]
    fn malformed_line_reports_its_number() {
        let good = pool_to_string(
            &AnnotationPool::from_parts(vec![react_record("t1", "s1")], vec![]).unwrap(),
        );
        let text = format!("{good}this is not json\n");
        let err = parse_pool(&text).unwrap_err();
        match err {
            PoolError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn save_and_load_through_the_filesystem() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pool.jsonl");
        let pool = AnnotationPool::from_parts(
            vec![react_record("t1", "s1")],
            vec![task("t2", "s2", 1), task("t3", "s3", 2)],
        )
        .unwrap();
        save_pool(&pool, &path).unwrap();
        let loaded = load_pool(&path).unwrap();
        assert_eq!(loaded, pool);
    }
}
