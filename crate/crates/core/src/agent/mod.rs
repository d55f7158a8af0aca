//! ReAct and Plan-and-Execute solver loops.
//!
//! Both loops speak to a [`ChatProvider`] and an [`Environment`], assembling
//! a fresh prompt every step: demonstrations up front, the task context, the
//! execution trace, and — when snippet retrieval is on — a postfix of step
//! snippets keyed by the previous step's thought and shown for exactly one
//! step. Provider hard failures and context overflows abort the run rather
//! than erroring out of it; the trajectory collected so far is preserved.

pub mod parse;
pub mod prompt;

pub use parse::{parse_agent_output, parse_plan_output, ParseError, ParsedOutput};
pub use prompt::{
    assemble_prompt, render_snippet_postfix, render_subtask_demo, render_trajectory_demo,
    truncate_prompt, HistoryStep, PromptBundle, HIDDEN_OBSERVATION_PLACEHOLDER,
};

use crate::embed::EmbeddingProvider;
use crate::provider::{markers, ChatMessage, ChatProvider, ChatRequest};
use crate::select::{
    plan_candidates, select_candidates, select_snippets, subtask_candidates, SelectionMethod,
    SelectionResult, SelectionSpec, Snippet,
};
use crate::types::{AnnotationPool, Plan, RecordKind, Step, Subtask, Task, Terminal, Trajectory};

/// What executing one action did to the environment.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionOutcome {
    pub observation: String,
    pub terminal: bool,
    pub final_answer: Option<String>,
}

/// The environment surface an agent run drives. One run owns one instance.
pub trait Environment {
    fn execute(&mut self, action: &str) -> ActionOutcome;
}

#[derive(Debug, thiserror::Error)]
pub enum AgentError {
    #[error("demonstration record '{0}' not found in pool")]
    UnknownDemo(String),
    #[error("record '{0}' does not carry the expected solution kind")]
    WrongDemoKind(String),
    #[error("invalid agent config: {0}")]
    InvalidConfig(String),
    #[error("prompt of ~{estimate} tokens cannot fit the {limit}-token context limit")]
    ContextOverflow { estimate: u64, limit: u64 },
    #[error("planning failed: {0}")]
    Plan(String),
}

/// Decoding and budget parameters for one solver loop.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    pub max_steps: u32,
    pub max_context_length: u64,
    pub temperature: f64,
    pub top_p: f64,
    pub max_output_tokens: u32,
    pub parse_retries: u32,
}

impl AgentConfig {
    /// ReAct solver defaults during annotation.
    pub fn annotation_react() -> Self {
        AgentConfig {
            max_steps: 50,
            max_context_length: 40_000,
            temperature: 0.1,
            top_p: 0.5,
            max_output_tokens: 2000,
            parse_retries: 1,
        }
    }

    /// PnE executor defaults during annotation.
    pub fn annotation_pne_executor() -> Self {
        AgentConfig {
            max_steps: 20,
            max_context_length: 20_000,
            temperature: 0.3,
            top_p: 0.5,
            max_output_tokens: 2000,
            parse_retries: 1,
        }
    }

    /// Evaluation defaults for both the ReAct solver and the PnE executor:
    /// the context limit is effectively unbounded.
    pub fn evaluation() -> Self {
        AgentConfig {
            max_steps: 50,
            max_context_length: 1_000_000,
            temperature: 0.1,
            top_p: 0.5,
            max_output_tokens: 2000,
            parse_retries: 1,
        }
    }

    /// Planner decoding: a single call, same sampling as evaluation.
    pub fn planner() -> Self {
        AgentConfig {
            max_steps: 1,
            ..Self::evaluation()
        }
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        if self.max_steps == 0 || self.max_context_length == 0 || self.max_output_tokens == 0 {
            return Err(AgentError::InvalidConfig(
                "max_steps, max_context_length, and max_output_tokens must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Step-snippet retrieval knobs. Up to `k` snippets at or above `threshold`
/// BSR against the previous step's thought.
#[derive(Debug, Clone, PartialEq)]
pub struct SnippetConfig {
    pub k: usize,
    pub threshold: f64,
}

impl Default for SnippetConfig {
    fn default() -> Self {
        SnippetConfig {
            k: 2,
            threshold: 0.85,
        }
    }
}

/// Snippets shown in one step's prompt.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSnippets {
    pub step_index: u32,
    pub snippets: Vec<Snippet>,
}

/// One provider call, recorded for audit and replay analysis.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ProviderCall {
    /// Trajectory step this call served; 0 for the planner call.
    pub step_index: u32,
    pub messages: Vec<ChatMessage>,
    pub response: String,
    pub input_tokens: u64,
    pub output_tokens: u64,
}

/// Outcome of one solver run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub trajectory: Trajectory,
    pub outcome: Terminal,
    pub total_input_tokens: u64,
    pub total_output_tokens: u64,
    /// Trajectory demos for ReAct runs, task-plan demos for PnE runs.
    pub demos_used: SelectionResult,
    pub snippets_used: Vec<StepSnippets>,
    /// Per-subtask executor demos, PnE runs only.
    pub subtask_demos: Vec<SelectionResult>,
    /// The per-subtask execution traces, PnE runs only; `trajectory` holds
    /// their concatenation.
    pub subtask_trajectories: Vec<Trajectory>,
    pub plan: Option<Plan>,
    pub transcript: Vec<ProviderCall>,
    pub abort_reason: Option<String>,
}

/// Default general context: names the apps and pins the reply format.
pub const DEFAULT_SETUP: &str = "\
You are an agent that completes tasks by calling app methods one step at a time.

Apps:
- ledger: balance(user), transfer(src, dst, amount), users()
- notes: create(title, body), find(title), list()
- inbox: messages(user), send(to, subject, body)

Every turn, reply with a single JSON object {\"thought\": \"...\", \"action\": \"...\"}.
The action is one call, e.g. `b = ledger.balance(user=\"alice\")`, and results bound to
a name can be reused later, e.g. `final(answer=b.balance)`. Finish the task with
`final(answer=...)`.";

/// Planner context: pins the plan reply format.
pub const PLANNER_SETUP: &str = "\
You are a planner. Break the task into an ordered list of subtasks an executor
agent can carry out one by one. Reply with a single JSON object of the form
{\"subtasks\": [\"first subtask\", \"second subtask\"]}.";

/// Plan-and-Execute configuration: demo selection specs and per-phase
/// decoding.
#[derive(Debug, Clone)]
pub struct PneOptions {
    pub planner_config: AgentConfig,
    pub executor_config: AgentConfig,
    pub planner_demos: SelectionSpec,
    pub executor_demos: SelectionSpec,
    /// Show summaries of completed subtasks in the executor's task context.
    pub include_summaries: bool,
}

impl PneOptions {
    /// Evaluation defaults: four task-plan pairs and three subtask
    /// trajectories, both by BSR.
    pub fn evaluation() -> Self {
        PneOptions {
            planner_config: AgentConfig::planner(),
            executor_config: AgentConfig::evaluation(),
            planner_demos: SelectionSpec::new(SelectionMethod::Bsr, 4),
            executor_demos: SelectionSpec::new(SelectionMethod::Bsr, 3),
            include_summaries: true,
        }
    }

    /// Annotation defaults: cosine selection, executor with the annotation
    /// budget.
    pub fn annotation() -> Self {
        PneOptions {
            planner_config: AgentConfig::planner(),
            executor_config: AgentConfig::annotation_pne_executor(),
            planner_demos: SelectionSpec::new(SelectionMethod::Cosine, 4),
            executor_demos: SelectionSpec::new(SelectionMethod::Cosine, 3),
            include_summaries: true,
        }
    }
}

/// Summary of a completed subtask for later subtasks' prompts: the subtask
/// statement followed by the actions that ran, in order. Terminal
/// `final(...)` actions are protocol, not work, and are omitted.
pub fn summarize_subtask(statement: &str, trajectory: &Trajectory) -> String {
    let mut out = statement.to_string();
    for step in &trajectory.steps {
        if step.action.trim_start().starts_with("final(") {
            continue;
        }
        out.push('\n');
        out.push_str(&step.action);
    }
    out
}

/// Shared, read-only context for solver runs: the demonstration pool and the
/// chat/embedding providers.
pub struct AgentRuntime<'a> {
    pub pool: &'a AnnotationPool,
    pub chat: &'a dyn ChatProvider,
    pub embed: &'a dyn EmbeddingProvider,
    pub setup: String,
    pub request_seed: Option<u64>,
}

struct EpisodeOutput {
    steps: Vec<Step>,
    terminal: Terminal,
    final_answer: Option<String>,
    calls: Vec<ProviderCall>,
    snippets_used: Vec<StepSnippets>,
    abort_reason: Option<String>,
}

impl<'a> AgentRuntime<'a> {
    pub fn new(
        pool: &'a AnnotationPool,
        chat: &'a dyn ChatProvider,
        embed: &'a dyn EmbeddingProvider,
    ) -> Self {
        AgentRuntime {
            pool,
            chat,
            embed,
            setup: DEFAULT_SETUP.to_string(),
            request_seed: None,
        }
    }

    /// Renders selected react records as trajectory demonstrations, in
    /// selection order.
    pub fn render_trajectory_demos(
        &self,
        demos: &SelectionResult,
    ) -> Result<Vec<ChatMessage>, AgentError> {
        let mut messages = Vec::new();
        for picked in &demos.selected {
            let record = self
                .pool
                .record(&picked.candidate_id)
                .ok_or_else(|| AgentError::UnknownDemo(picked.candidate_id.clone()))?;
            if record.kind != RecordKind::React {
                return Err(AgentError::WrongDemoKind(picked.candidate_id.clone()));
            }
            let trajectory = record.trajectory.as_ref().expect("validated react record");
            messages.extend(render_trajectory_demo(
                &record.task.instruction,
                &trajectory.steps,
            ));
        }
        Ok(messages)
    }

    fn render_subtask_demos(
        &self,
        demos: &SelectionResult,
    ) -> Result<Vec<ChatMessage>, AgentError> {
        let mut messages = Vec::new();
        for picked in &demos.selected {
            let (task_id, subtask_id) = picked
                .candidate_id
                .split_once('/')
                .ok_or_else(|| AgentError::UnknownDemo(picked.candidate_id.clone()))?;
            let record = self
                .pool
                .record(task_id)
                .ok_or_else(|| AgentError::UnknownDemo(picked.candidate_id.clone()))?;
            let plan = record
                .plan
                .as_ref()
                .ok_or_else(|| AgentError::WrongDemoKind(picked.candidate_id.clone()))?;
            let position = plan
                .subtasks
                .iter()
                .position(|s| s.subtask_id == subtask_id)
                .ok_or_else(|| AgentError::UnknownDemo(picked.candidate_id.clone()))?;
            let trajectory = &record.subtask_trajectories[position];
            messages.extend(render_subtask_demo(
                &plan.subtasks[position].statement,
                &trajectory.steps,
            ));
        }
        Ok(messages)
    }

    /// One ReAct-style episode against a single task message. `step_offset`
    /// shifts trajectory indices so PnE can concatenate subtask episodes.
    fn run_episode(
        &self,
        task_message: &ChatMessage,
        demo_messages: &[ChatMessage],
        env: &mut dyn Environment,
        config: &AgentConfig,
        snippet_config: Option<&SnippetConfig>,
        exclude_task_id: &str,
        step_offset: u32,
    ) -> EpisodeOutput {
        let mut steps: Vec<Step> = Vec::new();
        let mut calls: Vec<ProviderCall> = Vec::new();
        let mut snippets_used: Vec<StepSnippets> = Vec::new();
        let mut prev_thought: Option<String> = None;

        let abort = |steps: Vec<Step>,
                     calls: Vec<ProviderCall>,
                     snippets_used: Vec<StepSnippets>,
                     reason: String| EpisodeOutput {
            steps,
            terminal: Terminal::Aborted,
            final_answer: None,
            calls,
            snippets_used,
            abort_reason: Some(reason),
        };

        for local_step in 1..=config.max_steps {
            let index = step_offset + local_step;

            // Snippets derive from the previous step's thought only; the
            // first step of an episode has none.
            let snippets = match (snippet_config, &prev_thought) {
                (Some(cfg), Some(thought)) => {
                    match select_snippets(
                        thought,
                        self.pool,
                        cfg.k,
                        cfg.threshold,
                        self.embed,
                        exclude_task_id,
                    ) {
                        Ok(s) => s,
                        Err(e) => {
                            return abort(
                                steps,
                                calls,
                                snippets_used,
                                format!("snippet selection failed: {e}"),
                            )
                        }
                    }
                }
                _ => Vec::new(),
            };
            if !snippets.is_empty() {
                snippets_used.push(StepSnippets {
                    step_index: index,
                    snippets: snippets.clone(),
                });
            }

            let bundle = prompt::assemble_with_task_message(
                &self.setup,
                demo_messages,
                task_message.clone(),
                &steps,
                &snippets,
            );
            let bundle = match truncate_prompt(bundle, config.max_context_length) {
                Ok(b) => b,
                Err(e) => return abort(steps, calls, snippets_used, e.to_string()),
            };
            let messages = bundle.messages();

            let mut step_input = 0u64;
            let mut step_output = 0u64;
            let mut parsed: Option<ParsedOutput> = None;
            let mut raw = String::new();
            for _attempt in 0..=config.parse_retries {
                let request = ChatRequest {
                    messages: messages.clone(),
                    temperature: config.temperature,
                    top_p: config.top_p,
                    max_output_tokens: config.max_output_tokens,
                    seed: self.request_seed,
                };
                match self.chat.chat(&request) {
                    Ok(response) => {
                        step_input += response.input_tokens;
                        step_output += response.output_tokens;
                        calls.push(ProviderCall {
                            step_index: index,
                            messages: messages.clone(),
                            response: response.content.clone(),
                            input_tokens: response.input_tokens,
                            output_tokens: response.output_tokens,
                        });
                        raw = response.content;
                        if let Ok(p) = parse_agent_output(&raw) {
                            parsed = Some(p);
                            break;
                        }
                    }
                    Err(e) => {
                        return abort(
                            steps,
                            calls,
                            snippets_used,
                            format!("provider failure: {e}"),
                        )
                    }
                }
            }

            match parsed {
                Some(output) => {
                    let outcome = env.execute(&output.action);
                    steps.push(Step {
                        index,
                        thought: output.thought.clone(),
                        action: output.action,
                        observation: outcome.observation,
                        input_tokens: step_input,
                        output_tokens: step_output,
                    });
                    prev_thought = Some(output.thought);
                    if outcome.terminal {
                        return EpisodeOutput {
                            steps,
                            terminal: Terminal::Completed,
                            final_answer: outcome.final_answer,
                            calls,
                            snippets_used,
                            abort_reason: None,
                        };
                    }
                }
                None => {
                    // Parse retries exhausted: inject an error observation
                    // and keep going.
                    let thought = if raw.trim().is_empty() {
                        "[unparseable output]".to_string()
                    } else {
                        raw
                    };
                    steps.push(Step {
                        index,
                        thought,
                        action: "[unparseable]".into(),
                        observation:
                            "error: reply was not a JSON object with fields thought and action"
                                .into(),
                        input_tokens: step_input,
                        output_tokens: step_output,
                    });
                    prev_thought = None;
                }
            }
        }

        EpisodeOutput {
            steps,
            terminal: Terminal::Exhausted,
            final_answer: None,
            calls,
            snippets_used,
            abort_reason: None,
        }
    }

    fn result_from_episode(
        &self,
        task: &Task,
        episode: EpisodeOutput,
        demos_used: SelectionResult,
    ) -> RunResult {
        let total_input_tokens = episode.steps.iter().map(|s| s.input_tokens).sum();
        let total_output_tokens = episode.steps.iter().map(|s| s.output_tokens).sum();
        RunResult {
            trajectory: Trajectory {
                task_id: task.task_id.clone(),
                steps: episode.steps,
                terminal: episode.terminal,
                final_answer: episode.final_answer,
            },
            outcome: episode.terminal,
            total_input_tokens,
            total_output_tokens,
            demos_used,
            snippets_used: episode.snippets_used,
            subtask_demos: Vec::new(),
            subtask_trajectories: Vec::new(),
            plan: None,
            transcript: episode.calls,
            abort_reason: episode.abort_reason,
        }
    }

    /// The ReAct loop: generate thought/action, execute, observe, repeat
    /// until a terminal action, step exhaustion, or an abort.
    pub fn run_react(
        &self,
        task: &Task,
        demos: &SelectionResult,
        env: &mut dyn Environment,
        config: &AgentConfig,
        snippet_config: Option<&SnippetConfig>,
    ) -> Result<RunResult, AgentError> {
        config.validate()?;
        let demo_messages = self.render_trajectory_demos(demos)?;
        let task_message =
            ChatMessage::user(format!("{} {}", markers::TASK_PREFIX, task.instruction));
        let episode = self.run_episode(
            &task_message,
            &demo_messages,
            env,
            config,
            snippet_config,
            &task.task_id,
            0,
        );
        Ok(self.result_from_episode(task, episode, demos.clone()))
    }

    fn plan_attempt(
        &self,
        task: &Task,
        plan_demos: &SelectionResult,
        config: &AgentConfig,
    ) -> (Result<Plan, String>, Vec<ProviderCall>) {
        let mut messages = vec![ChatMessage::system(PLANNER_SETUP)];
        for picked in &plan_demos.selected {
            let Some(record) = self.pool.record(&picked.candidate_id) else {
                return (
                    Err(format!("plan demo '{}' not in pool", picked.candidate_id)),
                    Vec::new(),
                );
            };
            let Some(plan) = record.plan.as_ref() else {
                return (
                    Err(format!(
                        "plan demo '{}' is not a pne record",
                        picked.candidate_id
                    )),
                    Vec::new(),
                );
            };
            messages.push(ChatMessage::user(format!(
                "{} {}",
                markers::EXAMPLE_TASK_PREFIX,
                record.task.instruction
            )));
            let statements: Vec<&str> = plan
                .subtasks
                .iter()
                .map(|s| s.statement.as_str())
                .collect();
            messages.push(ChatMessage::assistant(
                serde_json::json!({ "subtasks": statements }).to_string(),
            ));
        }
        messages.push(ChatMessage::user(format!(
            "{} {}",
            markers::PLAN_PREFIX,
            task.instruction
        )));

        let mut calls = Vec::new();
        let mut last_error = String::from("planner returned nothing");
        for _attempt in 0..=config.parse_retries {
            let request = ChatRequest {
                messages: messages.clone(),
                temperature: config.temperature,
                top_p: config.top_p,
                max_output_tokens: config.max_output_tokens,
                seed: self.request_seed,
            };
            match self.chat.chat(&request) {
                Ok(response) => {
                    calls.push(ProviderCall {
                        step_index: 0,
                        messages: messages.clone(),
                        response: response.content.clone(),
                        input_tokens: response.input_tokens,
                        output_tokens: response.output_tokens,
                    });
                    match parse_plan_output(&response.content) {
                        Ok(statements) => {
                            let plan = Plan {
                                task_id: task.task_id.clone(),
                                subtasks: statements
                                    .into_iter()
                                    .enumerate()
                                    .map(|(i, statement)| Subtask {
                                        subtask_id: format!("s{}", i + 1),
                                        statement,
                                    })
                                    .collect(),
                            };
                            return (Ok(plan), calls);
                        }
                        Err(e) => last_error = e.to_string(),
                    }
                }
                Err(e) => {
                    last_error = format!("provider failure: {e}");
                    break;
                }
            }
        }
        (Err(last_error), calls)
    }

    /// One planner call (with parse retries): the task is decomposed into an
    /// ordered subtask list.
    pub fn plan(
        &self,
        task: &Task,
        plan_demos: &SelectionResult,
        config: &AgentConfig,
    ) -> Result<Plan, AgentError> {
        let (result, _calls) = self.plan_attempt(task, plan_demos, config);
        result.map_err(AgentError::Plan)
    }

    fn executor_task_message(
        &self,
        task: &Task,
        plan: &Plan,
        summaries: &[String],
        current: &Subtask,
        include_summaries: bool,
    ) -> ChatMessage {
        let mut text = format!("Overall task: {}\nPlan:", task.instruction);
        for (i, subtask) in plan.subtasks.iter().enumerate() {
            text.push_str(&format!("\n{}. {}", i + 1, subtask.statement));
        }
        if include_summaries && !summaries.is_empty() {
            text.push_str("\nCompleted subtasks:");
            for summary in summaries {
                text.push('\n');
                text.push_str(summary);
            }
        }
        text.push_str(&format!(
            "\n{} {}",
            markers::SUBTASK_MARKER, current.statement
        ));
        ChatMessage::user(text)
    }

    /// Plan once, then execute subtasks in order with a ReAct-style
    /// executor. Each subtask gets its own demos keyed by the subtask
    /// statement, and its task context carries the full plan plus summaries
    /// of the completed subtasks. A subtask failure aborts the rest.
    ///
    /// Planner demos may be supplied by the caller (the annotation loop
    /// selects them against its own pool view); otherwise they are selected
    /// here per `options.planner_demos`.
    pub fn run_pne(
        &self,
        task: &Task,
        env: &mut dyn Environment,
        options: &PneOptions,
        plan_demos: Option<&SelectionResult>,
    ) -> Result<RunResult, AgentError> {
        options.executor_config.validate()?;
        let plan_demos = match plan_demos {
            Some(demos) => demos.clone(),
            None => {
                let candidates = plan_candidates(self.pool, &task.task_id);
                select_candidates(
                    &task.instruction,
                    &candidates,
                    &options.planner_demos,
                    self.embed,
                )
                .map_err(|e| AgentError::Plan(e.to_string()))?
            }
        };

        let (plan_result, mut transcript) =
            self.plan_attempt(task, &plan_demos, &options.planner_config);
        let plan = match plan_result {
            Ok(plan) => plan,
            Err(reason) => {
                // Plan error: the run aborts before any execution.
                return Ok(RunResult {
                    trajectory: Trajectory {
                        task_id: task.task_id.clone(),
                        steps: Vec::new(),
                        terminal: Terminal::Aborted,
                        final_answer: None,
                    },
                    outcome: Terminal::Aborted,
                    total_input_tokens: transcript.iter().map(|c| c.input_tokens).sum(),
                    total_output_tokens: transcript.iter().map(|c| c.output_tokens).sum(),
                    demos_used: plan_demos,
                    snippets_used: Vec::new(),
                    subtask_demos: Vec::new(),
                    subtask_trajectories: Vec::new(),
                    plan: None,
                    transcript,
                    abort_reason: Some(format!("plan error: {reason}")),
                });
            }
        };

        let executor_candidates = subtask_candidates(self.pool, &task.task_id);
        let mut steps: Vec<Step> = Vec::new();
        let mut snippets_used: Vec<StepSnippets> = Vec::new();
        let mut subtask_demos: Vec<SelectionResult> = Vec::new();
        let mut subtask_trajectories: Vec<Trajectory> = Vec::new();
        let mut summaries: Vec<String> = Vec::new();
        let mut final_answer = None;
        let mut outcome = Terminal::Completed;
        let mut abort_reason = None;

        for subtask in &plan.subtasks {
            let demos = select_candidates(
                &subtask.statement,
                &executor_candidates,
                &options.executor_demos,
                self.embed,
            )
            .map_err(|e| AgentError::Plan(e.to_string()))?;
            let demo_messages = self.render_subtask_demos(&demos)?;
            subtask_demos.push(demos);

            let task_message = self.executor_task_message(
                task,
                &plan,
                &summaries,
                subtask,
                options.include_summaries,
            );
            let episode = self.run_episode(
                &task_message,
                &demo_messages,
                env,
                &options.executor_config,
                None,
                &task.task_id,
                steps.len() as u32,
            );

            let sub_trajectory = Trajectory {
                task_id: task.task_id.clone(),
                steps: episode.steps.clone(),
                terminal: episode.terminal,
                final_answer: episode.final_answer.clone(),
            };
            steps.extend(episode.steps);
            snippets_used.extend(episode.snippets_used);
            transcript.extend(episode.calls);
            subtask_trajectories.push(sub_trajectory.clone());

            match episode.terminal {
                Terminal::Completed => {
                    final_answer = episode.final_answer;
                    summaries.push(summarize_subtask(&subtask.statement, &sub_trajectory));
                }
                failed => {
                    outcome = Terminal::Aborted;
                    abort_reason = Some(format!(
                        "subtask '{}' {failed}; remaining plan abandoned",
                        subtask.statement
                    ));
                    break;
                }
            }
        }

        let total_input_tokens = transcript.iter().map(|c| c.input_tokens).sum();
        let total_output_tokens = transcript.iter().map(|c| c.output_tokens).sum();
        Ok(RunResult {
            trajectory: Trajectory {
                task_id: task.task_id.clone(),
                steps,
                terminal: outcome,
                final_answer: final_answer.clone(),
            },
            outcome,
            total_input_tokens,
            total_output_tokens,
            demos_used: plan_demos,
            snippets_used,
            subtask_demos,
            subtask_trajectories,
            plan: Some(plan),
            transcript,
            abort_reason,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::HashEmbedder;
    use crate::miniworld::{self, check, lookup_task, scripted_agent_provider, MiniSession};
    use crate::provider::{CountingProvider, Pred, ScriptedProvider, ScriptedRule};
    use crate::types::AnnotationRecord;

    fn empty_pool() -> AnnotationPool {
        AnnotationPool::new()
    }

    fn no_demos() -> SelectionResult {
        SelectionResult::empty(SelectionMethod::ZeroShot, 0)
    }

    fn small_config(max_steps: u32) -> AgentConfig {
        AgentConfig {
            max_steps,
            ..AgentConfig::evaluation()
        }
    }

    fn gold_record(task_id: &str) -> AnnotationRecord {
        miniworld::catalog::gold_react_record(task_id, 0, 1).unwrap()
    }

    fn fixed_demos(ids: &[&str]) -> SelectionResult {
        SelectionResult {
            selected: ids
                .iter()
                .map(|id| crate::select::ScoredCandidate {
                    candidate_id: id.to_string(),
                    score: 0.0,
                })
                .collect(),
            method: SelectionMethod::Fixed,
            k_requested: ids.len(),
        }
    }

    #[test]
    fn terminal_action_at_step_one_completes_in_one_step() {
        let provider = ScriptedProvider::new(vec![ScriptedRule::new(
            "done",
            Pred::Always,
            vec![serde_json::json!({
                "thought": "nothing to do",
                "action": "final(answer=\"done\")",
            })
            .to_string()],
        )]);
        let pool = empty_pool();
        let embed = HashEmbedder::default();
        let runtime = AgentRuntime::new(&pool, &provider, &embed);
        let mini = lookup_task("train_pay_rent_1").unwrap();
        let mut env = MiniSession::start(&mini, 0);
        let result = runtime
            .run_react(&mini.task, &no_demos(), &mut env, &small_config(5), None)
            .unwrap();
        assert_eq!(result.outcome, Terminal::Completed);
        assert_eq!(result.trajectory.steps.len(), 1);
        assert_eq!(result.trajectory.final_answer.as_deref(), Some("done"));
    }

    #[test]
    fn never_terminal_provider_exhausts_the_step_budget() {
        let provider = ScriptedProvider::new(vec![ScriptedRule::new(
            "loop",
            Pred::Always,
            vec![serde_json::json!({
                "thought": "still looking",
                "action": "notes.list()",
            })
            .to_string()],
        )]);
        let pool = empty_pool();
        let embed = HashEmbedder::default();
        let runtime = AgentRuntime::new(&pool, &provider, &embed);
        let mini = lookup_task("train_pay_rent_1").unwrap();
        let mut env = MiniSession::start(&mini, 0);
        let result = runtime
            .run_react(&mini.task, &no_demos(), &mut env, &small_config(5), None)
            .unwrap();
        assert_eq!(result.outcome, Terminal::Exhausted);
        assert_eq!(result.trajectory.steps.len(), 5);
    }

    #[test]
    fn provider_call_budget_is_steps_times_retries_plus_one() {
        let garbage = ScriptedProvider::new(vec![ScriptedRule::new(
            "garbage",
            Pred::Always,
            vec!["not json at all".into()],
        )]);
        let counting = CountingProvider::new(garbage);
        let pool = empty_pool();
        let embed = HashEmbedder::default();
        let runtime = AgentRuntime::new(&pool, &counting, &embed);
        let mini = lookup_task("train_pay_rent_1").unwrap();
        let mut env = MiniSession::start(&mini, 0);
        let config = AgentConfig {
            max_steps: 3,
            parse_retries: 2,
            ..AgentConfig::evaluation()
        };
        let result = runtime
            .run_react(&mini.task, &no_demos(), &mut env, &config, None)
            .unwrap();
        assert_eq!(counting.calls(), 3 * (1 + 2));
        assert_eq!(result.outcome, Terminal::Exhausted);
        // Every step carries the injected error observation.
        assert!(result
            .trajectory
            .steps
            .iter()
            .all(|s| s.observation.starts_with("error:")));
    }

    #[test]
    fn token_totals_equal_per_step_sums() {
        let provider = scripted_agent_provider();
        let pool =
            AnnotationPool::from_parts(vec![gold_record("train_pay_rent_1")], vec![]).unwrap();
        let embed = HashEmbedder::default();
        let runtime = AgentRuntime::new(&pool, &provider, &embed);
        let mini = lookup_task("train_pay_rent_2").unwrap();
        let mut env = MiniSession::start(&mini, 0);
        let result = runtime
            .run_react(
                &mini.task,
                &fixed_demos(&["train_pay_rent_1"]),
                &mut env,
                &AgentConfig::evaluation(),
                None,
            )
            .unwrap();
        assert_eq!(result.outcome, Terminal::Completed);
        let input: u64 = result.trajectory.steps.iter().map(|s| s.input_tokens).sum();
        let output: u64 = result
            .trajectory
            .steps
            .iter()
            .map(|s| s.output_tokens)
            .sum();
        assert_eq!(result.total_input_tokens, input);
        assert_eq!(result.total_output_tokens, output);
        assert!(input > 0 && output > 0);
    }

    /// The demonstration-sensitive provider completes a test task exactly
    /// when a helper-scenario demo is in the prompt.
    #[test]
    fn matching_scenario_demo_flips_failure_to_checker_pass() {
        let provider = scripted_agent_provider();
        let pool =
            AnnotationPool::from_parts(vec![gold_record("train_pay_rent_1")], vec![]).unwrap();
        let embed = HashEmbedder::default();
        let runtime = AgentRuntime::new(&pool, &provider, &embed);
        let mini = lookup_task("test_normal_split_payment_1").unwrap();
        let config = AgentConfig::evaluation();

        let mut env = MiniSession::start(&mini, 0);
        let with_demo = runtime
            .run_react(
                &mini.task,
                &fixed_demos(&["train_pay_rent_1"]),
                &mut env,
                &config,
                None,
            )
            .unwrap();
        assert_eq!(with_demo.outcome, Terminal::Completed);
        let report = check(
            &mini,
            &env.state,
            with_demo.trajectory.final_answer.as_deref(),
        );
        assert!(report.passed, "failed: {:?}", report.failed);

        let mut env = MiniSession::start(&mini, 0);
        let zero_shot = runtime
            .run_react(&mini.task, &no_demos(), &mut env, &config, None)
            .unwrap();
        assert_eq!(zero_shot.outcome, Terminal::Completed);
        let report = check(
            &mini,
            &env.state,
            zero_shot.trajectory.final_answer.as_deref(),
        );
        assert!(!report.passed, "zero-shot must fail the checker");
    }

    #[test]
    fn planner_parses_scripted_subtasks() {
        let provider = scripted_agent_provider();
        let pool = empty_pool();
        let embed = HashEmbedder::default();
        let runtime = AgentRuntime::new(&pool, &provider, &embed);
        let mini = lookup_task("train_balance_note_1").unwrap();
        let plan = runtime
            .plan(&mini.task, &no_demos(), &AgentConfig::planner())
            .unwrap();
        assert_eq!(plan.subtasks.len(), 2);
        assert_eq!(plan.subtasks[0].subtask_id, "s1");
        assert_eq!(
            plan.subtasks[0].statement,
            mini.gold_plan[0].statement
        );
    }

    #[test]
    fn empty_plan_is_a_plan_error() {
        let provider = ScriptedProvider::new(vec![ScriptedRule::new(
            "empty",
            Pred::Always,
            vec![serde_json::json!({ "subtasks": [] }).to_string()],
        )]);
        let pool = empty_pool();
        let embed = HashEmbedder::default();
        let runtime = AgentRuntime::new(&pool, &provider, &embed);
        let mini = lookup_task("train_balance_note_1").unwrap();
        let err = runtime
            .plan(&mini.task, &no_demos(), &AgentConfig::planner())
            .unwrap_err();
        assert!(matches!(err, AgentError::Plan(_)));
    }

    #[test]
    fn pne_completes_with_summaries_and_aborts_without() {
        let provider = scripted_agent_provider();
        let pool = empty_pool();
        let embed = HashEmbedder::default();
        let runtime = AgentRuntime::new(&pool, &provider, &embed);
        let mini = lookup_task("train_balance_note_1").unwrap();

        let mut options = PneOptions::evaluation();
        options.executor_config.max_steps = 4;

        let mut env = MiniSession::start(&mini, 0);
        let with_summaries = runtime.run_pne(&mini.task, &mut env, &options, None).unwrap();
        assert_eq!(with_summaries.outcome, Terminal::Completed);
        let report = check(
            &mini,
            &env.state,
            with_summaries.trajectory.final_answer.as_deref(),
        );
        assert!(report.passed, "failed: {:?}", report.failed);
        assert_eq!(with_summaries.plan.as_ref().unwrap().subtasks.len(), 2);

        // Without summaries the second subtask's gold rule cannot fire: the
        // executor flails and the run aborts.
        options.include_summaries = false;
        let mut env = MiniSession::start(&mini, 0);
        let without = runtime.run_pne(&mini.task, &mut env, &options, None).unwrap();
        assert_eq!(without.outcome, Terminal::Aborted);
        assert!(without.abort_reason.is_some());
    }

    #[test]
    fn failed_subtask_aborts_the_remaining_plan() {
        // Planner emits two subtasks; the first one's executor never
        // terminates, so the second must never start.
        let provider = ScriptedProvider::new(vec![
            ScriptedRule::new(
                "plan",
                Pred::TaskContains(markers::PLAN_PREFIX.to_string()),
                vec![serde_json::json!({ "subtasks": ["spin forever", "never reached"] })
                    .to_string()],
            ),
            ScriptedRule::new(
                "executor",
                Pred::TaskContains(markers::SUBTASK_MARKER.to_string()),
                vec![serde_json::json!({
                    "thought": "going in circles",
                    "action": "notes.list()",
                })
                .to_string()],
            ),
        ]);
        let pool = empty_pool();
        let embed = HashEmbedder::default();
        let runtime = AgentRuntime::new(&pool, &provider, &embed);
        let mini = lookup_task("train_pay_rent_1").unwrap();
        let mut options = PneOptions::evaluation();
        options.executor_config.max_steps = 3;
        let mut env = MiniSession::start(&mini, 0);
        let result = runtime.run_pne(&mini.task, &mut env, &options, None).unwrap();
        assert_eq!(result.outcome, Terminal::Aborted);
        assert_eq!(result.trajectory.steps.len(), 3);
        assert!(result
            .transcript
            .iter()
            .all(|c| !c.messages.iter().any(|m| m.content.contains("never reached")
                && m.content.contains(markers::SUBTASK_MARKER))
                || !c
                    .messages
                    .iter()
                    .any(|m| m.content.ends_with("never reached"))));
        let reason = result.abort_reason.unwrap();
        assert!(reason.contains("spin forever"), "{reason}");
    }

    #[test]
    fn summaries_concatenate_statement_and_actions() {
        let trajectory = |actions: &[&str]| Trajectory {
            task_id: "t".into(),
            steps: actions
                .iter()
                .enumerate()
                .map(|(i, action)| Step {
                    index: i as u32 + 1,
                    thought: "t".into(),
                    action: action.to_string(),
                    observation: "o".into(),
                    input_tokens: 0,
                    output_tokens: 0,
                })
                .collect(),
            terminal: Terminal::Completed,
            final_answer: Some("x".into()),
        };

        // Terminal-only trajectory: statement prefix only.
        let only_final = trajectory(&["final(answer=\"x\")"]);
        assert_eq!(summarize_subtask("do the thing", &only_final), "do the thing");

        let three = trajectory(&[
            "a.one()",
            "b = a.two()",
            "a.three(x=b.y)",
            "final(answer=\"x\")",
        ]);
        let summary = summarize_subtask("multi step", &three);
        assert_eq!(summary, "multi step\na.one()\nb = a.two()\na.three(x=b.y)");
        // The binding name survives into the summary.
        assert!(summary.contains("b = a.two()"));
    }

    #[test]
    fn unknown_demo_id_is_an_error() {
        let provider = scripted_agent_provider();
        let pool = empty_pool();
        let embed = HashEmbedder::default();
        let runtime = AgentRuntime::new(&pool, &provider, &embed);
        let mini = lookup_task("train_pay_rent_1").unwrap();
        let mut env = MiniSession::start(&mini, 0);
        let err = runtime
            .run_react(
                &mini.task,
                &fixed_demos(&["nonexistent"]),
                &mut env,
                &AgentConfig::evaluation(),
                None,
            )
            .unwrap_err();
        assert!(matches!(err, AgentError::UnknownDemo(_)));
    }
}
