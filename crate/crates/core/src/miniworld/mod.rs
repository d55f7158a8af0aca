//! A deterministic, seeded toy environment: three apps (ledger, notes,
//! inbox) behind a tiny action DSL, templated scenario/variant tasks, and
//! per-task unit-test checkers.
//!
//! Every state change is appended to a mutation log, which is what lets the
//! checker assert that only the requisite changes were made. Action failures
//! of any kind become error observations; nothing an agent writes can raise
//! past [`execute`].

pub mod catalog;
pub mod dsl;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::types::Task;
use dsl::{Action, ValueExpr};

pub use catalog::{list_tasks, lookup_task, scripted_agent_provider, MiniTask};

/// Base balance in cents for every user; the seed shifts it by 100 per step
/// so distinct seeds produce distinct but checker-compatible worlds.
pub const BASE_BALANCE_CENTS: i64 = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Note {
    pub title: String,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Email {
    pub from: String,
    pub subject: String,
    pub body: String,
}

/// A state change. The log records every one, in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "change", rename_all = "snake_case")]
pub enum Mutation {
    Transfer {
        src: String,
        dst: String,
        amount: i64,
    },
    NoteCreated {
        note_id: String,
        title: String,
        body: String,
    },
    EmailSent {
        to: String,
        subject: String,
        body: String,
    },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct WorldState {
    /// user -> balance in integer cents; never negative.
    pub ledger: BTreeMap<String, i64>,
    /// note_id -> note.
    pub notes: BTreeMap<String, Note>,
    /// user -> received emails, in arrival order.
    pub inbox: BTreeMap<String, Vec<Email>>,
    /// Per-run bindings created by `name = app.method(...)` actions.
    pub variables: BTreeMap<String, serde_json::Value>,
    pub mutation_log: Vec<Mutation>,
}

/// Result of executing one action; the same type the agent loop consumes.
pub use crate::agent::ActionOutcome as ExecOutcome;

fn observation_outcome(text: String) -> ExecOutcome {
    ExecOutcome {
        observation: text,
        terminal: false,
        final_answer: None,
    }
}

fn error_outcome(message: impl std::fmt::Display) -> ExecOutcome {
    observation_outcome(format!("error: {message}"))
}

/// Deterministic initial state for a task: all users funded from the seeding
/// table, plus the scenario's initial notes and emails.
pub fn reset(task: &MiniTask, seed: u64) -> WorldState {
    let mut state = WorldState::default();
    let balance = BASE_BALANCE_CENTS + 100 * seed as i64;
    for user in ["alice", "bob", "carol"] {
        state.ledger.insert(user.to_string(), balance);
    }
    for (i, note) in task.initial_notes.iter().enumerate() {
        state.notes.insert(format!("note-{}", i + 1), note.clone());
    }
    for (user, email) in &task.initial_inbox {
        state.inbox.entry(user.clone()).or_default().push(email.clone());
    }
    state
}

fn resolve(state: &WorldState, expr: &ValueExpr) -> Result<serde_json::Value, String> {
    match expr {
        ValueExpr::Str(s) => Ok(serde_json::Value::String(s.clone())),
        ValueExpr::Int(n) => Ok(serde_json::json!(n)),
        ValueExpr::Bool(b) => Ok(serde_json::json!(b)),
        ValueExpr::Ref(path) => {
            let mut value = state
                .variables
                .get(&path[0])
                .ok_or_else(|| format!("unknown variable '{}'", path[0]))?
                .clone();
            for field in &path[1..] {
                value = value
                    .get(field)
                    .ok_or_else(|| format!("no field '{field}' on variable '{}'", path[0]))?
                    .clone();
            }
            Ok(value)
        }
    }
}

fn as_text(value: &serde_json::Value) -> Result<String, String> {
    match value {
        serde_json::Value::String(s) => Ok(s.clone()),
        serde_json::Value::Number(n) => Ok(n.to_string()),
        serde_json::Value::Bool(b) => Ok(b.to_string()),
        other => Err(format!("expected a text-like value, got {other}")),
    }
}

fn as_amount(value: &serde_json::Value) -> Result<i64, String> {
    match value {
        serde_json::Value::Number(n) => n
            .as_i64()
            .ok_or_else(|| format!("amount {n} is not an integer")),
        serde_json::Value::String(s) => s
            .parse::<i64>()
            .map_err(|_| format!("amount '{s}' is not an integer")),
        other => Err(format!("expected an integer amount, got {other}")),
    }
}

struct Args(BTreeMap<String, serde_json::Value>);

impl Args {
    fn build(
        state: &WorldState,
        raw: &[(String, ValueExpr)],
    ) -> Result<Self, String> {
        let mut map = BTreeMap::new();
        for (name, expr) in raw {
            if map.insert(name.clone(), resolve(state, expr)?).is_some() {
                return Err(format!("duplicate argument '{name}'"));
            }
        }
        Ok(Args(map))
    }

    fn text(&mut self, name: &str) -> Result<String, String> {
        let value = self
            .0
            .remove(name)
            .ok_or_else(|| format!("missing argument '{name}'"))?;
        as_text(&value)
    }

    fn amount(&mut self, name: &str) -> Result<i64, String> {
        let value = self
            .0
            .remove(name)
            .ok_or_else(|| format!("missing argument '{name}'"))?;
        as_amount(&value)
    }

    fn finish(self) -> Result<(), String> {
        if let Some(name) = self.0.keys().next() {
            return Err(format!("unexpected argument '{name}'"));
        }
        Ok(())
    }
}

/// Executes one action against the world. Successful calls return a
/// structured-result observation and log their mutations; `final` is
/// terminal; every failure (syntax, unknown app or method, bad arguments,
/// guard violations) is an error observation with `terminal = false`.
pub fn execute(state: &mut WorldState, action_text: &str) -> ExecOutcome {
    let action = match dsl::parse_action(action_text) {
        Ok(a) => a,
        Err(e) => return error_outcome(e),
    };
    match action {
        Action::Final { answer } => match resolve(state, &answer).and_then(|v| as_text(&v)) {
            Ok(text) => ExecOutcome {
                observation: String::new(),
                terminal: true,
                final_answer: Some(text),
            },
            Err(e) => error_outcome(e),
        },
        Action::Call {
            binding,
            app,
            method,
            args,
        } => {
            let args = match Args::build(state, &args) {
                Ok(a) => a,
                Err(e) => return error_outcome(e),
            };
            match dispatch(state, &app, &method, args) {
                Ok(result) => {
                    if let Some(name) = binding {
                        state.variables.insert(name, result.clone());
                    }
                    observation_outcome(result.to_string())
                }
                Err(e) => error_outcome(e),
            }
        }
    }
}

fn dispatch(
    state: &mut WorldState,
    app: &str,
    method: &str,
    mut args: Args,
) -> Result<serde_json::Value, String> {
    match (app, method) {
        ("ledger", "balance") => {
            let user = args.text("user")?;
            args.finish()?;
            let balance = *state
                .ledger
                .get(&user)
                .ok_or_else(|| format!("unknown user '{user}'"))?;
            Ok(serde_json::json!({ "user": user, "balance": balance }))
        }
        ("ledger", "transfer") => {
            let src = args.text("src")?;
            let dst = args.text("dst")?;
            let amount = args.amount("amount")?;
            args.finish()?;
            if !state.ledger.contains_key(&src) {
                return Err(format!("unknown user '{src}'"));
            }
            if !state.ledger.contains_key(&dst) {
                return Err(format!("unknown user '{dst}'"));
            }
            if src == dst {
                return Err("src and dst must differ".into());
            }
            if amount <= 0 {
                return Err(format!("amount must be positive, got {amount}"));
            }
            if state.ledger[&src] < amount {
                return Err(format!(
                    "insufficient funds: {src} has {} cents, needs {amount}",
                    state.ledger[&src]
                ));
            }
            *state.ledger.get_mut(&src).unwrap() -= amount;
            *state.ledger.get_mut(&dst).unwrap() += amount;
            state.mutation_log.push(Mutation::Transfer {
                src: src.clone(),
                dst: dst.clone(),
                amount,
            });
            Ok(serde_json::json!({
                "src": src.clone(),
                "dst": dst.clone(),
                "amount": amount,
                "src_balance": state.ledger[&src],
                "dst_balance": state.ledger[&dst],
            }))
        }
        ("ledger", "users") => {
            args.finish()?;
            let users: Vec<&String> = state.ledger.keys().collect();
            Ok(serde_json::json!({ "users": users }))
        }
        ("notes", "create") => {
            let title = args.text("title")?;
            let body = args.text("body")?;
            args.finish()?;
            if title.is_empty() {
                return Err("title must be non-empty".into());
            }
            let note_id = format!("note-{}", state.notes.len() + 1);
            state.notes.insert(
                note_id.clone(),
                Note {
                    title: title.clone(),
                    body: body.clone(),
                },
            );
            state.mutation_log.push(Mutation::NoteCreated {
                note_id: note_id.clone(),
                title: title.clone(),
                body,
            });
            Ok(serde_json::json!({ "note_id": note_id, "title": title }))
        }
        ("notes", "find") => {
            let title = args.text("title")?;
            args.finish()?;
            let found = state
                .notes
                .iter()
                .find(|(_, note)| note.title == title)
                .ok_or_else(|| format!("no note titled '{title}'"))?;
            Ok(serde_json::json!({
                "note_id": found.0,
                "title": found.1.title,
                "body": found.1.body,
            }))
        }
        ("notes", "list") => {
            args.finish()?;
            let notes: Vec<serde_json::Value> = state
                .notes
                .iter()
                .map(|(id, note)| serde_json::json!({ "note_id": id, "title": note.title }))
                .collect();
            Ok(serde_json::json!({ "notes": notes }))
        }
        ("inbox", "messages") => {
            let user = args.text("user")?;
            args.finish()?;
            let messages = state.inbox.get(&user).cloned().unwrap_or_default();
            Ok(serde_json::json!({
                "user": user,
                "count": messages.len(),
                "messages": messages,
            }))
        }
        ("inbox", "send") => {
            let to = args.text("to")?;
            let subject = args.text("subject")?;
            let body = args.text("body")?;
            args.finish()?;
            state.inbox.entry(to.clone()).or_default().push(Email {
                from: "me".into(),
                subject: subject.clone(),
                body: body.clone(),
            });
            state.mutation_log.push(Mutation::EmailSent {
                to: to.clone(),
                subject: subject.clone(),
                body,
            });
            Ok(serde_json::json!({ "to": to, "subject": subject, "delivered": true }))
        }
        ("ledger", _) | ("notes", _) | ("inbox", _) => {
            Err(format!("unknown method '{method}' on app '{app}'"))
        }
        _ => Err(format!("unknown app '{app}'")),
    }
}

// ---------------------------------------------------------------------------
// Checkers
// ---------------------------------------------------------------------------

/// A mutation the task is allowed (and expected) to make. Note ids are
/// auto-assigned, so note patterns match on title only.
#[derive(Debug, Clone, PartialEq)]
pub enum AllowedMutation {
    Transfer {
        src: String,
        dst: String,
        amount: i64,
    },
    NoteCreated {
        title: String,
    },
    EmailSent {
        to: String,
        subject: String,
    },
}

impl AllowedMutation {
    fn matches(&self, mutation: &Mutation) -> bool {
        match (self, mutation) {
            (
                AllowedMutation::Transfer { src, dst, amount },
                Mutation::Transfer {
                    src: s,
                    dst: d,
                    amount: a,
                },
            ) => src == s && dst == d && amount == a,
            (
                AllowedMutation::NoteCreated { title },
                Mutation::NoteCreated { title: t, .. },
            ) => title == t,
            (
                AllowedMutation::EmailSent { to, subject },
                Mutation::EmailSent {
                    to: t, subject: s, ..
                },
            ) => to == t && subject == s,
            _ => false,
        }
    }
}

/// One named unit-test assertion over (final state, final answer, mutation
/// log). Balance checks read net deltas off the mutation log and answer
/// checks compare against live state, so one assertion list is correct for
/// any world seed.
#[derive(Debug, Clone, PartialEq)]
pub enum Assertion {
    /// Net ledger delta for a user across the whole run.
    BalanceDelta { user: String, delta: i64 },
    /// A note with this title (and body, when given) exists.
    NoteExists { title: String, body: Option<String> },
    /// The final answer equals this exact text.
    AnswerEquals { expected: String },
    /// The final answer equals the user's current balance.
    AnswerEqualsBalanceOf { user: String },
    /// The note with this title holds the user's current balance as its body.
    NoteBodyEqualsBalanceOf { title: String, user: String },
    /// An email with this recipient and subject was sent.
    EmailSent { to: String, subject: String },
    /// Every logged mutation matches an unconsumed allowed pattern.
    NoExtraneousChanges,
}

impl Assertion {
    pub fn name(&self) -> String {
        match self {
            Assertion::BalanceDelta { user, .. } => format!("balance_delta:{user}"),
            Assertion::NoteExists { title, .. } => format!("note_exists:{title}"),
            Assertion::AnswerEquals { .. } => "answer_equals".into(),
            Assertion::AnswerEqualsBalanceOf { user } => {
                format!("answer_equals_balance:{user}")
            }
            Assertion::NoteBodyEqualsBalanceOf { title, .. } => {
                format!("note_body_equals_balance:{title}")
            }
            Assertion::EmailSent { to, .. } => format!("email_sent:{to}"),
            Assertion::NoExtraneousChanges => "no_extraneous_changes".into(),
        }
    }

    fn holds(
        &self,
        state: &WorldState,
        final_answer: Option<&str>,
        allowed: &[AllowedMutation],
    ) -> bool {
        match self {
            Assertion::BalanceDelta { user, delta } => {
                let mut net = 0i64;
                for mutation in &state.mutation_log {
                    if let Mutation::Transfer { src, dst, amount } = mutation {
                        if src == user {
                            net -= amount;
                        }
                        if dst == user {
                            net += amount;
                        }
                    }
                }
                net == *delta
            }
            Assertion::NoteExists { title, body } => state.notes.values().any(|note| {
                note.title == *title
                    && body.as_ref().map(|b| &note.body == b).unwrap_or(true)
            }),
            Assertion::AnswerEquals { expected } => final_answer == Some(expected.as_str()),
            Assertion::AnswerEqualsBalanceOf { user } => match state.ledger.get(user) {
                Some(balance) => final_answer == Some(balance.to_string().as_str()),
                None => false,
            },
            Assertion::NoteBodyEqualsBalanceOf { title, user } => {
                let Some(balance) = state.ledger.get(user) else {
                    return false;
                };
                state
                    .notes
                    .values()
                    .any(|note| note.title == *title && note.body == balance.to_string())
            }
            Assertion::EmailSent { to, subject } => state.mutation_log.iter().any(|m| {
                matches!(m, Mutation::EmailSent { to: t, subject: s, .. }
                    if t == to && s == subject)
            }),
            Assertion::NoExtraneousChanges => {
                let mut consumed = vec![false; allowed.len()];
                'log: for mutation in &state.mutation_log {
                    for (i, pattern) in allowed.iter().enumerate() {
                        if !consumed[i] && pattern.matches(mutation) {
                            consumed[i] = true;
                            continue 'log;
                        }
                    }
                    return false;
                }
                true
            }
        }
    }
}

/// Outcome of running a task's unit tests.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub passed: bool,
    pub failed: Vec<String>,
}

/// Evaluates every assertion of the task against the terminal world state.
/// A task is solved only if all of them pass.
pub fn check(task: &MiniTask, state: &WorldState, final_answer: Option<&str>) -> CheckReport {
    let mut failed = Vec::new();
    for assertion in &task.assertions {
        if !assertion.holds(state, final_answer, &task.allowed_mutations) {
            failed.push(assertion.name());
        }
    }
    CheckReport {
        passed: failed.is_empty(),
        failed,
    }
}

/// One live environment: a world plus the [`crate::agent::Environment`]
/// surface the agent loop drives.
pub struct MiniSession {
    pub state: WorldState,
}

impl MiniSession {
    pub fn start(task: &MiniTask, seed: u64) -> Self {
        MiniSession {
            state: reset(task, seed),
        }
    }
}

impl crate::agent::Environment for MiniSession {
    fn execute(&mut self, action: &str) -> ExecOutcome {
        execute(&mut self.state, action)
    }
}

/// Environment factory over the built-in catalog, for the annotation loop
/// and the batch runner.
pub fn env_factory(
    seed: u64,
) -> impl Fn(&Task) -> Option<Box<dyn crate::agent::Environment>> {
    move |task: &Task| {
        lookup_task(&task.task_id)
            .map(|mini| Box::new(MiniSession::start(&mini, seed)) as Box<dyn crate::agent::Environment>)
    }
}

/// Checker that replays a candidate solution's actions against a fresh
/// world and runs the task's unit tests. Solutions that did not complete
/// fail outright; this is also what makes stored records re-checkable.
pub struct ReplayChecker {
    pub seed: u64,
}

impl crate::annotate::SolutionChecker for ReplayChecker {
    fn check(
        &self,
        task: &Task,
        solution: &crate::annotate::Solution,
    ) -> crate::annotate::CheckOutcome {
        let failure = |name: &str| crate::annotate::CheckOutcome {
            passed: false,
            failed: vec![name.to_string()],
        };
        let Some(mini) = lookup_task(&task.task_id) else {
            return failure("unknown_task");
        };
        let completed = match solution {
            crate::annotate::Solution::React(t) => t.terminal == crate::types::Terminal::Completed,
            crate::annotate::Solution::Pne {
                subtask_trajectories,
                ..
            } => subtask_trajectories
                .iter()
                .all(|t| t.terminal == crate::types::Terminal::Completed),
        };
        if !completed {
            return failure("not_completed");
        }
        let mut state = reset(&mini, self.seed);
        let mut final_answer = None;
        for action in solution.actions() {
            let outcome = execute(&mut state, action);
            if outcome.terminal {
                final_answer = outcome.final_answer;
            }
        }
        let report = check(&mini, &state, final_answer.as_deref());
        crate::annotate::CheckOutcome {
            passed: report.passed,
            failed: report.failed,
        }
    }
}
