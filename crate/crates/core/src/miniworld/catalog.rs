//! The built-in task catalog: nine scenarios, three variants each.
//!
//! Splits: train holds four scenarios over the ledger and notes apps, dev one
//! more notes scenario, test_normal two new scenarios over the seen apps, and
//! test_challenge two scenarios over the inbox app, which no train task
//! touches. Every task ships a gold thought/action sequence and a gold plan;
//! those feed tests and the scripted provider's rule table only — selection
//! and agents never see them.
//!
//! The scripted provider built here is deliberately demonstration-sensitive:
//! it emits a task's gold steps only when the prompt carries a
//! demonstration of a related scenario (or the task is an easy bootstrap
//! variant), and flails otherwise. That gives the harness a provider whose
//! success is a pure function of what the selector put in the prompt.

use std::sync::OnceLock;

use crate::provider::{markers, Pred, ScriptedProvider, ScriptedRule};
use crate::types::{Split, Task};

use super::{AllowedMutation, Assertion, Email, Note};

/// A catalog task: the core task plus its checker, gold solution, and
/// fixture metadata.
#[derive(Debug, Clone)]
pub struct MiniTask {
    pub task: Task,
    pub assertions: Vec<Assertion>,
    pub allowed_mutations: Vec<AllowedMutation>,
    /// Gold thought/action sequence; tests and the scripted rule table only.
    pub gold_steps: Vec<GoldStep>,
    /// Gold plan with per-subtask gold steps, for the PnE paths.
    pub gold_plan: Vec<GoldSubtask>,
    /// Train scenarios whose demonstrations unlock this task for the
    /// scripted provider. Empty for held-out challenge tasks.
    pub helper_scenarios: Vec<String>,
    /// Solvable by the scripted provider with zero demonstrations; the
    /// bootstrap seeds of iterative annotation.
    pub easy: bool,
    pub initial_notes: Vec<Note>,
    pub initial_inbox: Vec<(String, Email)>,
}

#[derive(Debug, Clone)]
pub struct GoldStep {
    pub thought: String,
    pub action: String,
}

#[derive(Debug, Clone)]
pub struct GoldSubtask {
    pub statement: String,
    pub steps: Vec<GoldStep>,
    /// When set, the scripted executor requires this text in the prompt —
    /// in practice it is the binding line of an earlier subtask's action, so
    /// the rule only fires when previous-subtask summaries are shown.
    pub summary_gate: Option<String>,
}

fn step(thought: &str, action: &str) -> GoldStep {
    GoldStep {
        thought: thought.to_string(),
        action: action.to_string(),
    }
}

fn subtask(statement: &str, steps: Vec<GoldStep>) -> GoldSubtask {
    GoldSubtask {
        statement: statement.to_string(),
        steps,
        summary_gate: None,
    }
}

fn gated_subtask(statement: &str, steps: Vec<GoldStep>, gate: &str) -> GoldSubtask {
    GoldSubtask {
        statement: statement.to_string(),
        steps,
        summary_gate: Some(gate.to_string()),
    }
}

struct TaskSpec {
    split: Split,
    scenario: &'static str,
    variant: u32,
    instruction: String,
    assertions: Vec<Assertion>,
    allowed: Vec<AllowedMutation>,
    gold: Vec<GoldStep>,
    plan: Vec<GoldSubtask>,
    helpers: Vec<&'static str>,
    initial_notes: Vec<Note>,
    initial_inbox: Vec<(String, Email)>,
}

impl TaskSpec {
    fn into_task(self) -> MiniTask {
        let split_prefix = self.split.to_string();
        MiniTask {
            task: Task {
                task_id: format!("{split_prefix}_{}_{}", self.scenario, self.variant),
                scenario_id: self.scenario.to_string(),
                variant: self.variant,
                instruction: self.instruction,
                split: self.split,
            },
            assertions: self.assertions,
            allowed_mutations: self.allowed,
            gold_steps: self.gold,
            gold_plan: self.plan,
            helper_scenarios: self.helpers.iter().map(|s| s.to_string()).collect(),
            easy: matches!(self.split, Split::Train | Split::Dev) && self.variant == 1,
            initial_notes: self.initial_notes,
            initial_inbox: self.initial_inbox,
        }
    }
}

fn pay_rent(variant: u32, src: &str, dst: &str, amount: i64) -> TaskSpec {
    TaskSpec {
        split: Split::Train,
        scenario: "pay_rent",
        variant,
        instruction: format!(
            "Use the ledger app to transfer {amount} cents from {src} to {dst}, then reply done."
        ),
        assertions: vec![
            Assertion::BalanceDelta {
                user: src.into(),
                delta: -amount,
            },
            Assertion::BalanceDelta {
                user: dst.into(),
                delta: amount,
            },
            Assertion::AnswerEquals {
                expected: "done".into(),
            },
            Assertion::NoExtraneousChanges,
        ],
        allowed: vec![AllowedMutation::Transfer {
            src: src.into(),
            dst: dst.into(),
            amount,
        }],
        gold: vec![
            step(
                &format!(
                    "Now I need to transfer {amount} cents from {src} to {dst} with the ledger transfer method before I reply done."
                ),
                &format!("ledger.transfer(src=\"{src}\", dst=\"{dst}\", amount={amount})"),
            ),
            step(
                "The ledger transfer succeeded so I reply done.",
                "final(answer=\"done\")",
            ),
        ],
        plan: vec![
            subtask(
                &format!("Transfer {amount} cents from {src} to {dst} in the ledger."),
                vec![
                    step(
                        &format!(
                            "Now I need to transfer {amount} cents from {src} to {dst} with the ledger transfer method."
                        ),
                        &format!(
                            "ledger.transfer(src=\"{src}\", dst=\"{dst}\", amount={amount})"
                        ),
                    ),
                    step(
                        "The ledger transfer succeeded so this subtask is done.",
                        "final(answer=\"transferred\")",
                    ),
                ],
            ),
            subtask(
                "Reply done.",
                vec![step(
                    "The plan is complete so I reply done.",
                    "final(answer=\"done\")",
                )],
            ),
        ],
        helpers: vec!["pay_rent"],
        initial_notes: vec![],
        initial_inbox: vec![],
    }
}

fn balance_note(variant: u32, user: &str) -> TaskSpec {
    let title = format!("{user} balance");
    TaskSpec {
        split: Split::Train,
        scenario: "balance_note",
        variant,
        instruction: format!(
            "Look up {user}'s ledger balance in cents and save it in a note titled '{title}', then reply with the balance."
        ),
        assertions: vec![
            Assertion::NoteBodyEqualsBalanceOf {
                title: title.clone(),
                user: user.into(),
            },
            Assertion::AnswerEqualsBalanceOf { user: user.into() },
            Assertion::NoExtraneousChanges,
        ],
        allowed: vec![AllowedMutation::NoteCreated {
            title: title.clone(),
        }],
        gold: vec![
            step(
                &format!("First I look up the ledger balance of {user} in cents."),
                &format!("bal = ledger.balance(user=\"{user}\")"),
            ),
            step(
                &format!("Now I save the balance into a note titled '{title}'."),
                &format!("notes.create(title=\"{title}\", body=bal.balance)"),
            ),
            step(
                "The note is saved so I reply with the balance.",
                "final(answer=bal.balance)",
            ),
        ],
        plan: vec![
            subtask(
                &format!("Look up {user}'s ledger balance in cents."),
                vec![
                    step(
                        &format!("First I look up the ledger balance of {user} in cents."),
                        &format!("bal = ledger.balance(user=\"{user}\")"),
                    ),
                    step(
                        "The balance is recorded so this subtask is done.",
                        "final(answer=\"ok\")",
                    ),
                ],
            ),
            gated_subtask(
                &format!("Save the balance in a note titled '{title}' and reply with it."),
                vec![
                    step(
                        &format!("Now I save the balance into a note titled '{title}'."),
                        &format!("notes.create(title=\"{title}\", body=bal.balance)"),
                    ),
                    step(
                        "The note is saved so I reply with the balance.",
                        "final(answer=bal.balance)",
                    ),
                ],
                "bal = ledger.balance",
            ),
        ],
        helpers: vec!["balance_note"],
        initial_notes: vec![],
        initial_inbox: vec![],
    }
}

fn note_keep(variant: u32, title: &str, body: &str) -> TaskSpec {
    TaskSpec {
        split: Split::Train,
        scenario: "note_keep",
        variant,
        instruction: format!(
            "Create a note titled '{title}' with body '{body}', then reply done."
        ),
        assertions: vec![
            Assertion::NoteExists {
                title: title.into(),
                body: Some(body.into()),
            },
            Assertion::AnswerEquals {
                expected: "done".into(),
            },
            Assertion::NoExtraneousChanges,
        ],
        allowed: vec![AllowedMutation::NoteCreated {
            title: title.into(),
        }],
        gold: vec![
            step(
                &format!("Now I create a note titled '{title}' with body '{body}' as requested."),
                &format!("notes.create(title=\"{title}\", body=\"{body}\")"),
            ),
            step(
                "The note is saved so I reply done.",
                "final(answer=\"done\")",
            ),
        ],
        plan: vec![
            subtask(
                &format!("Create a note titled '{title}' with body '{body}'."),
                vec![
                    step(
                        &format!(
                            "Now I create a note titled '{title}' with body '{body}' as requested."
                        ),
                        &format!("notes.create(title=\"{title}\", body=\"{body}\")"),
                    ),
                    step(
                        "The note is saved so this subtask is done.",
                        "final(answer=\"saved\")",
                    ),
                ],
            ),
            subtask(
                "Reply done.",
                vec![step(
                    "The plan is complete so I reply done.",
                    "final(answer=\"done\")",
                )],
            ),
        ],
        helpers: vec!["note_keep"],
        initial_notes: vec![],
        initial_inbox: vec![],
    }
}

fn balance_query(variant: u32, user: &str) -> TaskSpec {
    TaskSpec {
        split: Split::Train,
        scenario: "balance_query",
        variant,
        instruction: format!("Reply with {user}'s current ledger balance in cents."),
        assertions: vec![
            Assertion::AnswerEqualsBalanceOf { user: user.into() },
            Assertion::NoExtraneousChanges,
        ],
        allowed: vec![],
        gold: vec![
            step(
                &format!("First I look up the ledger balance of {user} in cents."),
                &format!("bal = ledger.balance(user=\"{user}\")"),
            ),
            step(
                "The balance is known so I reply with it.",
                "final(answer=bal.balance)",
            ),
        ],
        plan: vec![
            subtask(
                &format!("Look up {user}'s ledger balance in cents."),
                vec![
                    step(
                        &format!("First I look up the ledger balance of {user} in cents."),
                        &format!("bal = ledger.balance(user=\"{user}\")"),
                    ),
                    step(
                        "The balance is recorded so this subtask is done.",
                        "final(answer=\"ok\")",
                    ),
                ],
            ),
            gated_subtask(
                "Reply with the balance.",
                vec![step(
                    "The balance is known so I reply with it.",
                    "final(answer=bal.balance)",
                )],
                "bal = ledger.balance",
            ),
        ],
        helpers: vec!["balance_query"],
        initial_notes: vec![],
        initial_inbox: vec![],
    }
}

fn note_lookup(variant: u32, title: &str, body: &str) -> TaskSpec {
    TaskSpec {
        split: Split::Dev,
        scenario: "note_lookup",
        variant,
        instruction: format!("Reply with the body of the note titled '{title}'."),
        assertions: vec![
            Assertion::AnswerEquals {
                expected: body.into(),
            },
            Assertion::NoExtraneousChanges,
        ],
        allowed: vec![],
        gold: vec![
            step(
                &format!("First I find the note titled '{title}' to read its body."),
                &format!("src = notes.find(title=\"{title}\")"),
            ),
            step(
                "The body is known so I reply with it.",
                "final(answer=src.body)",
            ),
        ],
        plan: vec![
            subtask(
                &format!("Find the note titled '{title}'."),
                vec![
                    step(
                        &format!("First I find the note titled '{title}' to read its body."),
                        &format!("src = notes.find(title=\"{title}\")"),
                    ),
                    step(
                        "The note is found so this subtask is done.",
                        "final(answer=\"found\")",
                    ),
                ],
            ),
            gated_subtask(
                "Reply with its body.",
                vec![step(
                    "The body is known so I reply with it.",
                    "final(answer=src.body)",
                )],
                "src = notes.find",
            ),
        ],
        helpers: vec!["note_lookup"],
        initial_notes: vec![Note {
            title: title.into(),
            body: body.into(),
        }],
        initial_inbox: vec![],
    }
}

fn split_payment(variant: u32, src: &str, u1: &str, u2: &str, amount: i64) -> TaskSpec {
    TaskSpec {
        split: Split::TestNormal,
        scenario: "split_payment",
        variant,
        instruction: format!(
            "Use the ledger app to transfer {amount} cents from {src} to {u1} and the same amount from {src} to {u2}, then reply done."
        ),
        assertions: vec![
            Assertion::BalanceDelta {
                user: src.into(),
                delta: -2 * amount,
            },
            Assertion::BalanceDelta {
                user: u1.into(),
                delta: amount,
            },
            Assertion::BalanceDelta {
                user: u2.into(),
                delta: amount,
            },
            Assertion::AnswerEquals {
                expected: "done".into(),
            },
            Assertion::NoExtraneousChanges,
        ],
        allowed: vec![
            AllowedMutation::Transfer {
                src: src.into(),
                dst: u1.into(),
                amount,
            },
            AllowedMutation::Transfer {
                src: src.into(),
                dst: u2.into(),
                amount,
            },
        ],
        gold: vec![
            step(
                &format!(
                    "Now I need to transfer {amount} cents from {src} to {u1} with the ledger transfer method before I reply done."
                ),
                &format!("ledger.transfer(src=\"{src}\", dst=\"{u1}\", amount={amount})"),
            ),
            step(
                &format!(
                    "Now I need to transfer {amount} cents from {src} to {u2} with the ledger transfer method before I reply done."
                ),
                &format!("ledger.transfer(src=\"{src}\", dst=\"{u2}\", amount={amount})"),
            ),
            step(
                "The ledger transfer succeeded so I reply done.",
                "final(answer=\"done\")",
            ),
        ],
        plan: vec![
            subtask(
                &format!("Transfer {amount} cents from {src} to {u1} in the ledger."),
                vec![
                    step(
                        &format!(
                            "Now I need to transfer {amount} cents from {src} to {u1} with the ledger transfer method."
                        ),
                        &format!("ledger.transfer(src=\"{src}\", dst=\"{u1}\", amount={amount})"),
                    ),
                    step(
                        "The ledger transfer succeeded so this subtask is done.",
                        "final(answer=\"transferred\")",
                    ),
                ],
            ),
            subtask(
                &format!("Transfer {amount} cents from {src} to {u2} in the ledger."),
                vec![
                    step(
                        &format!(
                            "Now I need to transfer {amount} cents from {src} to {u2} with the ledger transfer method."
                        ),
                        &format!("ledger.transfer(src=\"{src}\", dst=\"{u2}\", amount={amount})"),
                    ),
                    step(
                        "The ledger transfer succeeded so this subtask is done.",
                        "final(answer=\"transferred\")",
                    ),
                ],
            ),
            subtask(
                "Reply done.",
                vec![step(
                    "The plan is complete so I reply done.",
                    "final(answer=\"done\")",
                )],
            ),
        ],
        helpers: vec!["pay_rent"],
        initial_notes: vec![],
        initial_inbox: vec![],
    }
}

fn note_copy(variant: u32, old: &str, new: &str, body: &str) -> TaskSpec {
    TaskSpec {
        split: Split::TestNormal,
        scenario: "note_copy",
        variant,
        instruction: format!(
            "Create a new note titled '{new}' with the same body as the note titled '{old}', then reply done."
        ),
        assertions: vec![
            Assertion::NoteExists {
                title: new.into(),
                body: Some(body.into()),
            },
            Assertion::AnswerEquals {
                expected: "done".into(),
            },
            Assertion::NoExtraneousChanges,
        ],
        allowed: vec![AllowedMutation::NoteCreated { title: new.into() }],
        gold: vec![
            step(
                &format!("First I find the note titled '{old}' to read its body."),
                &format!("src = notes.find(title=\"{old}\")"),
            ),
            step(
                &format!("Now I create a note titled '{new}' with the body I found."),
                &format!("notes.create(title=\"{new}\", body=src.body)"),
            ),
            step(
                "The note is saved so I reply done.",
                "final(answer=\"done\")",
            ),
        ],
        plan: vec![
            subtask(
                &format!("Find the note titled '{old}'."),
                vec![
                    step(
                        &format!("First I find the note titled '{old}' to read its body."),
                        &format!("src = notes.find(title=\"{old}\")"),
                    ),
                    step(
                        "The note is found so this subtask is done.",
                        "final(answer=\"found\")",
                    ),
                ],
            ),
            gated_subtask(
                &format!("Create a note titled '{new}' with the same body and reply done."),
                vec![
                    step(
                        &format!("Now I create a note titled '{new}' with the body I found."),
                        &format!("notes.create(title=\"{new}\", body=src.body)"),
                    ),
                    step(
                        "The note is saved so I reply done.",
                        "final(answer=\"done\")",
                    ),
                ],
                "src = notes.find",
            ),
        ],
        helpers: vec!["note_keep", "note_lookup"],
        initial_notes: vec![Note {
            title: old.into(),
            body: body.into(),
        }],
        initial_inbox: vec![],
    }
}

fn send_update(variant: u32, to: &str, subject: &str, body: &str) -> TaskSpec {
    TaskSpec {
        split: Split::TestChallenge,
        scenario: "send_update",
        variant,
        instruction: format!(
            "Use the inbox app to send an email to {to} with subject '{subject}' and body '{body}', then reply done."
        ),
        assertions: vec![
            Assertion::EmailSent {
                to: to.into(),
                subject: subject.into(),
            },
            Assertion::AnswerEquals {
                expected: "done".into(),
            },
            Assertion::NoExtraneousChanges,
        ],
        allowed: vec![AllowedMutation::EmailSent {
            to: to.into(),
            subject: subject.into(),
        }],
        gold: vec![
            step(
                &format!("Now I send an email to {to} with subject '{subject}' using the inbox app."),
                &format!("inbox.send(to=\"{to}\", subject=\"{subject}\", body=\"{body}\")"),
            ),
            step(
                "The email is sent so I reply done.",
                "final(answer=\"done\")",
            ),
        ],
        plan: vec![
            subtask(
                &format!("Send an email to {to} with subject '{subject}'."),
                vec![
                    step(
                        &format!(
                            "Now I send an email to {to} with subject '{subject}' using the inbox app."
                        ),
                        &format!(
                            "inbox.send(to=\"{to}\", subject=\"{subject}\", body=\"{body}\")"
                        ),
                    ),
                    step(
                        "The email is sent so this subtask is done.",
                        "final(answer=\"sent\")",
                    ),
                ],
            ),
            subtask(
                "Reply done.",
                vec![step(
                    "The plan is complete so I reply done.",
                    "final(answer=\"done\")",
                )],
            ),
        ],
        helpers: vec![],
        initial_notes: vec![],
        initial_inbox: vec![],
    }
}

fn inbox_count(variant: u32, user: &str, count: usize) -> TaskSpec {
    let initial_inbox = (1..=count)
        .map(|i| {
            (
                user.to_string(),
                Email {
                    from: "mailer".into(),
                    subject: format!("notice {i}"),
                    body: format!("automated notice {i}"),
                },
            )
        })
        .collect();
    TaskSpec {
        split: Split::TestChallenge,
        scenario: "inbox_count",
        variant,
        instruction: format!("Reply with the number of emails in {user}'s inbox."),
        assertions: vec![
            Assertion::AnswerEquals {
                expected: count.to_string(),
            },
            Assertion::NoExtraneousChanges,
        ],
        allowed: vec![],
        gold: vec![
            step(
                &format!("First I list the emails in {user}'s inbox."),
                &format!("m = inbox.messages(user=\"{user}\")"),
            ),
            step(
                "The count is known so I reply with it.",
                "final(answer=m.count)",
            ),
        ],
        plan: vec![
            subtask(
                &format!("List the emails in {user}'s inbox."),
                vec![
                    step(
                        &format!("First I list the emails in {user}'s inbox."),
                        &format!("m = inbox.messages(user=\"{user}\")"),
                    ),
                    step(
                        "The messages are listed so this subtask is done.",
                        "final(answer=\"listed\")",
                    ),
                ],
            ),
            gated_subtask(
                "Reply with the count.",
                vec![step(
                    "The count is known so I reply with it.",
                    "final(answer=m.count)",
                )],
                "m = inbox.messages",
            ),
        ],
        helpers: vec![],
        initial_notes: vec![],
        initial_inbox,
    }
}

fn build_catalog() -> Vec<MiniTask> {
    let specs = vec![
        pay_rent(1, "alice", "bob", 3000),
        pay_rent(2, "bob", "carol", 2500),
        pay_rent(3, "carol", "alice", 1200),
        balance_note(1, "alice"),
        balance_note(2, "bob"),
        balance_note(3, "carol"),
        note_keep(1, "groceries", "buy oat milk and bread"),
        note_keep(2, "ideas", "walk more every day"),
        note_keep(3, "packing", "bring a warm coat"),
        balance_query(1, "alice"),
        balance_query(2, "bob"),
        balance_query(3, "carol"),
        note_lookup(1, "wifi", "password hunter2"),
        note_lookup(2, "door", "code 4521"),
        note_lookup(3, "plants", "water on friday"),
        split_payment(1, "alice", "bob", "carol", 3000),
        split_payment(2, "bob", "alice", "carol", 2500),
        split_payment(3, "carol", "alice", "bob", 1200),
        note_copy(1, "wifi", "wifi copy", "password hunter2"),
        note_copy(2, "door", "door copy", "code 4521"),
        note_copy(3, "plants", "plants copy", "water on friday"),
        send_update(1, "bob", "standup", "moved to friday"),
        send_update(2, "alice", "renewal", "lease renews in may"),
        send_update(3, "carol", "delivery", "package at the door"),
        inbox_count(1, "alice", 3),
        inbox_count(2, "bob", 1),
        inbox_count(3, "carol", 2),
    ];
    specs.into_iter().map(TaskSpec::into_task).collect()
}

fn catalog() -> &'static Vec<MiniTask> {
    static CATALOG: OnceLock<Vec<MiniTask>> = OnceLock::new();
    CATALOG.get_or_init(build_catalog)
}

/// All catalog tasks in a split, in task_id order.
pub fn list_tasks(split: Split) -> Vec<MiniTask> {
    let mut tasks: Vec<MiniTask> = catalog()
        .iter()
        .filter(|t| t.task.split == split)
        .cloned()
        .collect();
    tasks.sort_by(|a, b| a.task.task_id.cmp(&b.task.task_id));
    tasks
}

/// Every catalog task, across all splits.
pub fn all_tasks() -> Vec<MiniTask> {
    catalog().clone()
}

pub fn lookup_task(task_id: &str) -> Option<MiniTask> {
    catalog().iter().find(|t| t.task.task_id == task_id).cloned()
}

fn reply_json(step: &GoldStep) -> String {
    serde_json::json!({ "thought": step.thought, "action": step.action }).to_string()
}

/// Test scaffolding: materializes a catalog task's gold steps into a react
/// record, replaying the actions on a fresh world for faithful
/// observations. Selection and agents never call this; fixtures do.
pub fn gold_react_record(
    task_id: &str,
    seed: u64,
    round: u32,
) -> Option<crate::types::AnnotationRecord> {
    let mini = lookup_task(task_id)?;
    let mut state = super::reset(&mini, seed);
    let mut steps = Vec::new();
    let mut final_answer = None;
    for (i, gold) in mini.gold_steps.iter().enumerate() {
        let outcome = super::execute(&mut state, &gold.action);
        if outcome.terminal {
            final_answer = outcome.final_answer.clone();
        }
        steps.push(crate::types::Step {
            index: i as u32 + 1,
            thought: gold.thought.clone(),
            action: gold.action.clone(),
            observation: outcome.observation,
            input_tokens: 10,
            output_tokens: 10,
        });
    }
    crate::types::AnnotationRecord::react(
        mini.task.clone(),
        crate::types::Trajectory {
            task_id: task_id.to_string(),
            steps,
            terminal: crate::types::Terminal::Completed,
            final_answer,
        },
        round,
    )
    .ok()
}

fn scenario_instructions(scenario: &str) -> Vec<String> {
    catalog()
        .iter()
        .filter(|t| t.task.scenario_id == scenario)
        .map(|t| t.task.instruction.clone())
        .collect()
}

/// The demonstration gate for a task: satisfied by a demo of any helper
/// scenario (for train and dev tasks that includes their own scenario's
/// other variants). Easy tasks are ungated.
fn demo_gate(task: &MiniTask) -> Pred {
    if task.easy {
        return Pred::Always;
    }
    let needles: Vec<Pred> = task
        .helper_scenarios
        .iter()
        .flat_map(|scenario| scenario_instructions(scenario))
        .map(Pred::DemoContains)
        .collect();
    Pred::Any(needles)
}

/// Builds the full demonstration-sensitive rule table over the catalog:
/// gold ReAct rules gated on helper demos, planner and executor gold rules,
/// and flailing fallbacks for unrecognized prompts.
pub fn scripted_agent_provider() -> ScriptedProvider {
    let mut rules = Vec::new();
    for task in catalog() {
        let id = &task.task.task_id;
        let instruction = task.task.instruction.clone();

        rules.push(ScriptedRule::new(
            &format!("react:{id}"),
            Pred::All(vec![
                Pred::TaskContains(markers::TASK_PREFIX.to_string()),
                Pred::TaskContains(instruction.clone()),
                demo_gate(task),
            ]),
            task.gold_steps.iter().map(reply_json).collect(),
        ));

        rules.push(ScriptedRule::new(
            &format!("plan:{id}"),
            Pred::All(vec![
                Pred::TaskContains(markers::PLAN_PREFIX.to_string()),
                Pred::TaskContains(instruction.clone()),
            ]),
            vec![serde_json::json!({
                "subtasks": task
                    .gold_plan
                    .iter()
                    .map(|s| s.statement.clone())
                    .collect::<Vec<_>>(),
            })
            .to_string()],
        ));

        for sub in &task.gold_plan {
            let mut preds = vec![
                Pred::TaskContains(format!("{} {}", markers::SUBTASK_MARKER, sub.statement)),
                Pred::TaskContains(instruction.clone()),
            ];
            if let Some(gate) = &sub.summary_gate {
                preds.push(Pred::PromptContains(gate.clone()));
            }
            rules.push(ScriptedRule::new(
                &format!("executor:{id}:{}", sub.statement),
                Pred::All(preds),
                sub.steps.iter().map(reply_json).collect(),
            ));
        }
    }

    // Fallbacks, most specific first; the bare react fallback must be last.
    rules.push(ScriptedRule::new(
        "fallback:planner",
        Pred::TaskContains(markers::PLAN_PREFIX.to_string()),
        vec![serde_json::json!({ "subtasks": [] }).to_string()],
    ));
    rules.push(ScriptedRule::new(
        "fallback:executor",
        Pred::TaskContains(markers::SUBTASK_MARKER.to_string()),
        vec![serde_json::json!({
            "thought": "I cannot make progress on this subtask without a relevant example.",
            "action": "help.me()",
        })
        .to_string()],
    ));
    rules.push(ScriptedRule::new(
        "fallback:react",
        Pred::Always,
        vec![serde_json::json!({
            "thought": "I do not recognize this task without a relevant example.",
            "action": "final(answer=\"unknown\")",
        })
        .to_string()],
    ));

    ScriptedProvider::new(rules)
}
