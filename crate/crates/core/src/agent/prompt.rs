//! Prompt assembly and truncation.
//!
//! Placement rules: demonstrations live in the general context before the
//! task message, the execution trace follows the task message in step order,
//! and the snippet postfix — when present — is always the final message and
//! survives exactly one step.
//!
//! Truncation hides observations only, never demonstrations or thoughts, and
//! never the most recent three steps: first the long ones (>= 500 tokens)
//! outside that window in descending length, then the remaining older ones,
//! oldest first. Hidden observation text becomes a literal placeholder.
//! Hiding is recomputed from the full history on every assembly.

use crate::provider::{estimate_tokens, markers, ChatMessage};
use crate::select::Snippet;
use crate::types::{Step, Task};

use super::AgentError;

/// Observations at or above this estimated token length are hidden first.
pub const LONG_OBSERVATION_TOKENS: u64 = 500;
/// The most recent steps whose observations truncation must never touch.
pub const PROTECTED_RECENT_STEPS: usize = 3;
/// Literal replacement for a hidden observation's text.
pub const HIDDEN_OBSERVATION_PLACEHOLDER: &str = "[observation hidden]";

/// One executed step as it appears in the prompt: an assistant turn with the
/// thought/action object and an environment turn with the observation.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryStep {
    pub step_index: u32,
    pub agent: ChatMessage,
    /// Original observation text, before any hiding.
    pub observation: String,
    pub observation_hidden: bool,
}

impl HistoryStep {
    fn observation_message(&self) -> ChatMessage {
        let text = if self.observation_hidden {
            HIDDEN_OBSERVATION_PLACEHOLDER
        } else {
            self.observation.as_str()
        };
        ChatMessage::user(format!("Observation: {text}"))
    }

    /// Estimated tokens of the rendered (possibly hidden) observation turn.
    fn observation_tokens(&self) -> u64 {
        estimate_tokens(&self.observation_message().content)
    }

    /// Estimated tokens of the observation as originally rendered.
    fn full_observation_tokens(&self) -> u64 {
        estimate_tokens(&format!("Observation: {}", self.observation))
    }
}

/// A fully ordered prompt: general context (setup and demonstrations), the
/// task context, the execution trace, and an optional snippet postfix.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptBundle {
    pub general_context: Vec<ChatMessage>,
    pub task_context: ChatMessage,
    pub history: Vec<HistoryStep>,
    pub snippet_postfix: Option<ChatMessage>,
}

impl PromptBundle {
    /// Flattens to the provider message list, applying observation hiding.
    pub fn messages(&self) -> Vec<ChatMessage> {
        let mut out = self.general_context.clone();
        out.push(self.task_context.clone());
        for step in &self.history {
            out.push(step.agent.clone());
            out.push(step.observation_message());
        }
        if let Some(postfix) = &self.snippet_postfix {
            out.push(postfix.clone());
        }
        out
    }

    pub fn token_estimate(&self) -> u64 {
        let mut total: u64 = self
            .general_context
            .iter()
            .map(|m| estimate_tokens(&m.content))
            .sum();
        total += estimate_tokens(&self.task_context.content);
        for step in &self.history {
            total += estimate_tokens(&step.agent.content);
            total += step.observation_tokens();
        }
        if let Some(postfix) = &self.snippet_postfix {
            total += estimate_tokens(&postfix.content);
        }
        total
    }

    /// Step indices whose observations are currently hidden.
    pub fn hidden_steps(&self) -> Vec<u32> {
        self.history
            .iter()
            .filter(|s| s.observation_hidden)
            .map(|s| s.step_index)
            .collect()
    }
}

pub(super) fn agent_turn(thought: &str, action: &str) -> ChatMessage {
    ChatMessage::assistant(
        serde_json::json!({ "thought": thought, "action": action }).to_string(),
    )
}

/// Assembles the prompt for the next step: setup, demonstrations (in
/// selection order), task instruction, history, then the snippet postfix iff
/// snippets were selected for this step.
pub fn assemble_prompt(
    setup: &str,
    demo_messages: &[ChatMessage],
    task: &Task,
    history: &[Step],
    snippets: &[Snippet],
) -> PromptBundle {
    let task_context = ChatMessage::user(format!(
        "{} {}",
        markers::TASK_PREFIX,
        task.instruction
    ));
    assemble_with_task_message(setup, demo_messages, task_context, history, snippets)
}

/// Same assembly with a caller-built task message (the PnE executor writes
/// its own task context with the plan and subtask summaries).
pub fn assemble_with_task_message(
    setup: &str,
    demo_messages: &[ChatMessage],
    task_context: ChatMessage,
    history: &[Step],
    snippets: &[Snippet],
) -> PromptBundle {
    let mut general_context = Vec::with_capacity(1 + demo_messages.len());
    general_context.push(ChatMessage::system(setup));
    general_context.extend(demo_messages.iter().cloned());
    let history = history
        .iter()
        .map(|step| HistoryStep {
            step_index: step.index,
            agent: agent_turn(&step.thought, &step.action),
            observation: step.observation.clone(),
            observation_hidden: false,
        })
        .collect();
    let snippet_postfix = if snippets.is_empty() {
        None
    } else {
        Some(ChatMessage::user(render_snippet_postfix(snippets)))
    };
    PromptBundle {
        general_context,
        task_context,
        history,
        snippet_postfix,
    }
}

/// The single snippet message appended after the execution trace.
pub fn render_snippet_postfix(snippets: &[Snippet]) -> String {
    let mut out = String::from(markers::SNIPPET_HEADER);
    for snippet in snippets {
        out.push_str("\n\nExample step:");
        for step in &snippet.steps {
            out.push('\n');
            out.push_str(&agent_turn(&step.thought, &step.action).content);
            if !step.observation.is_empty() {
                out.push_str(&format!("\nObservation: {}", step.observation));
            }
        }
    }
    out
}

/// Renders a solved task as a demonstration block: a header with the task
/// statement, then the trajectory as alternating agent/environment turns.
pub fn render_trajectory_demo(instruction: &str, steps: &[Step]) -> Vec<ChatMessage> {
    render_demo_block(markers::EXAMPLE_TASK_PREFIX, instruction, steps)
}

/// Renders a solved subtask for the executor prompt.
pub fn render_subtask_demo(statement: &str, steps: &[Step]) -> Vec<ChatMessage> {
    render_demo_block(markers::EXAMPLE_SUBTASK_PREFIX, statement, steps)
}

fn render_demo_block(prefix: &str, statement: &str, steps: &[Step]) -> Vec<ChatMessage> {
    let mut messages = vec![ChatMessage::user(format!("{prefix} {statement}"))];
    for step in steps {
        messages.push(agent_turn(&step.thought, &step.action));
        if !step.observation.is_empty() {
            messages.push(ChatMessage::user(format!(
                "Observation: {}",
                step.observation
            )));
        }
    }
    messages
}

/// Two-stage observation hiding, recomputed from scratch on the given
/// bundle. Returns a context-overflow error if the prompt cannot fit.
pub fn truncate_prompt(mut bundle: PromptBundle, limit: u64) -> Result<PromptBundle, AgentError> {
    if bundle.token_estimate() <= limit {
        return Ok(bundle);
    }
    let protected_from = bundle
        .history
        .len()
        .saturating_sub(PROTECTED_RECENT_STEPS);

    // Stage 1: long observations outside the protected window, longest first.
    let mut stage1: Vec<(u64, usize)> = bundle.history[..protected_from]
        .iter()
        .enumerate()
        .filter(|(_, s)| !s.observation_hidden)
        .map(|(i, s)| (s.full_observation_tokens(), i))
        .filter(|(tokens, _)| *tokens >= LONG_OBSERVATION_TOKENS)
        .collect();
    stage1.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
    for (_, i) in stage1 {
        if bundle.token_estimate() <= limit {
            break;
        }
        bundle.history[i].observation_hidden = true;
    }

    // Stage 2: any remaining older observations, oldest first.
    for i in 0..protected_from {
        if bundle.token_estimate() <= limit {
            break;
        }
        bundle.history[i].observation_hidden = true;
    }

    let estimate = bundle.token_estimate();
    if estimate > limit {
        return Err(AgentError::ContextOverflow { estimate, limit });
    }
    Ok(bundle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::select::PayloadRef;
    use crate::types::Split;

    fn task() -> Task {
        Task {
            task_id: "t1".into(),
            scenario_id: "s1".into(),
            variant: 1,
            instruction: "move the money".into(),
            split: Split::TestNormal,
        }
    }

    fn history_step(index: u32, observation: &str) -> Step {
        Step {
            index,
            thought: format!("thought {index}"),
            action: format!("app.call(step={index})"),
            observation: observation.into(),
            input_tokens: 0,
            output_tokens: 0,
        }
    }

    fn snippet() -> Snippet {
        Snippet {
            source: PayloadRef {
                task_id: "other".into(),
                subtask_id: None,
                step_index: Some(2),
            },
            steps: vec![history_step(2, "snippet obs")],
            match_score: 0.9,
        }
    }

    #[test]
    fn zero_shot_shape_is_setup_then_task() {
        let bundle = assemble_prompt("setup text", &[], &task(), &[], &[]);
        let messages = bundle.messages();
        assert_eq!(messages.len(), 2);
        assert_eq!(messages[0].content, "setup text");
        assert!(messages[1].content.starts_with(markers::TASK_PREFIX));
    }

    #[test]
    fn demos_appear_strictly_before_the_task_message() {
        let demo_a = render_trajectory_demo("solved a", &[history_step(1, "obs")]);
        let demo_b = render_trajectory_demo("solved b", &[history_step(1, "obs")]);
        let mut demos = demo_a.clone();
        demos.extend(demo_b);
        let bundle = assemble_prompt("setup", &demos, &task(), &[], &[]);
        let messages = bundle.messages();
        let task_pos = messages
            .iter()
            .position(|m| m.content.starts_with(markers::TASK_PREFIX))
            .unwrap();
        let demo_positions: Vec<usize> = messages
            .iter()
            .enumerate()
            .filter(|(_, m)| m.content.starts_with(markers::EXAMPLE_TASK_PREFIX))
            .map(|(i, _)| i)
            .collect();
        assert_eq!(demo_positions.len(), 2);
        assert!(demo_positions.iter().all(|p| *p < task_pos));
    }

    #[test]
    fn snippet_postfix_is_final_and_absent_without_snippets() {
        let with = assemble_prompt(
            "setup",
            &[],
            &task(),
            &[history_step(1, "obs")],
            &[snippet()],
        );
        let messages = with.messages();
        assert!(messages
            .last()
            .unwrap()
            .content
            .starts_with(markers::SNIPPET_HEADER));

        // Re-assembling for the next step without snippets carries none over.
        let without = assemble_prompt(
            "setup",
            &[],
            &task(),
            &[history_step(1, "obs"), history_step(2, "obs")],
            &[],
        );
        assert!(without
            .messages()
            .iter()
            .all(|m| !m.content.contains(markers::SNIPPET_HEADER)));
    }

    fn observation_of_tokens(tokens: u64) -> String {
        // estimate_tokens(content) = ceil(len/4); the "Observation: " prefix
        // is 13 chars, so pad the body to land exactly on the target.
        "x".repeat((tokens * 4 - 13) as usize)
    }

    fn length_fixture() -> PromptBundle {
        let steps: Vec<Step> = [100u64, 900, 100, 800, 50]
            .iter()
            .enumerate()
            .map(|(i, tokens)| history_step(i as u32 + 1, &observation_of_tokens(*tokens)))
            .collect();
        assemble_prompt("setup", &[], &task(), &steps, &[])
    }

    #[test]
    fn under_limit_bundle_is_unchanged() {
        let bundle = length_fixture();
        let total = bundle.token_estimate();
        let out = truncate_prompt(bundle.clone(), total).unwrap();
        assert_eq!(out, bundle);
    }

    /// Observation lengths [100, 900, 100, 800, 50]: steps 3–5 are
    /// protected, step 2 is the only stage-1 candidate (>= 500 tokens and
    /// outside the window), and a 950-token deficit then needs stage 2 to
    /// hide step 1 as well.
    #[test]
    fn two_stage_hiding_on_the_length_fixture() {
        let bundle = length_fixture();
        let total = bundle.token_estimate();
        let limit = total - 950;
        let truncated = truncate_prompt(bundle, limit).unwrap();
        assert_eq!(truncated.hidden_steps(), vec![1, 2]);
        assert!(truncated.token_estimate() <= limit);

        // Thoughts and the last three observations are intact.
        for step in &truncated.history {
            assert!(step.agent.content.contains("thought"));
        }
        for step in &truncated.history[2..] {
            assert!(!step.observation_hidden);
        }
        let rendered = truncated.messages();
        let hidden_count = rendered
            .iter()
            .filter(|m| m.content.contains(HIDDEN_OBSERVATION_PLACEHOLDER))
            .count();
        assert_eq!(hidden_count, 2);
    }

    #[test]
    fn stage_one_alone_suffices_for_a_small_deficit() {
        let bundle = length_fixture();
        let total = bundle.token_estimate();
        // Hiding step 2 frees ~895 tokens; a 500-token deficit stops there.
        let truncated = truncate_prompt(bundle, total - 500).unwrap();
        assert_eq!(truncated.hidden_steps(), vec![2]);
    }

    #[test]
    fn limit_below_fixed_overhead_is_a_context_overflow() {
        let bundle = length_fixture();
        let err = truncate_prompt(bundle, 10).unwrap_err();
        assert!(matches!(err, AgentError::ContextOverflow { .. }));
    }

    #[test]
    fn demonstrations_are_never_hidden() {
        let demo_steps = vec![history_step(1, &observation_of_tokens(2000))];
        let demos = render_trajectory_demo("huge demo", &demo_steps);
        let steps = vec![history_step(1, "tiny")];
        let bundle = assemble_prompt("setup", &demos, &task(), &steps, &[]);
        let total = bundle.token_estimate();
        // Nothing hideable: only one history step, and it is protected.
        let err = truncate_prompt(bundle, total - 100).unwrap_err();
        assert!(matches!(err, AgentError::ContextOverflow { .. }));
    }
}
