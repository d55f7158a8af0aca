//! Chat-completion providers.
//!
//! Three implementations sit behind one trait: a remote client for an
//! OpenAI-compatible endpoint (feature `remote`), a deterministic scripted
//! provider whose rule table keys replies on predicates over the prompt, and
//! a record/replay pair keyed by request hash. The scripted and replay
//! providers are pure functions of the request.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Prompt-structure markers shared between the prompt renderer and the
/// scripted provider's predicates. The renderer guarantees that exactly one
/// message per request carries a task anchor and that demonstration messages
/// start with an example prefix.
pub mod markers {
    /// Prefix of the test-task context message in ReAct prompts.
    pub const TASK_PREFIX: &str = "Your task:";
    /// Prefix of the planner's task message.
    pub const PLAN_PREFIX: &str = "Plan the task:";
    /// Marker inside the executor's task message naming the active subtask.
    pub const SUBTASK_MARKER: &str = "Current subtask:";
    /// Prefix of a trajectory-demonstration header message.
    pub const EXAMPLE_TASK_PREFIX: &str = "Example task:";
    /// Prefix of a subtask-demonstration header message.
    pub const EXAMPLE_SUBTASK_PREFIX: &str = "Example subtask:";
    /// First line of the snippet postfix message.
    pub const SNIPPET_HEADER: &str = "Reference steps from similar tasks:";
}

#[derive(Debug, thiserror::Error)]
pub enum ProviderError {
    #[error("no scripted rule matched the request")]
    NoRuleMatched,
    #[error("replay miss: request hash {0} not in the recorded session")]
    ReplayMiss(String),
    #[error("remote provider failed after {attempts} attempt(s): {message}")]
    Remote { attempts: u32, message: String },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub top_p: f64,
    pub max_output_tokens: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl ChatRequest {
    pub fn validate(&self) -> Result<(), ProviderError> {
        if self.messages.is_empty() {
            return Err(ProviderError::InvalidRequest(
                "messages must be non-empty".into(),
            ));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(ProviderError::InvalidRequest(format!(
                "temperature {} out of range",
                self.temperature
            )));
        }
        if !(0.0..=1.0).contains(&self.top_p) {
            return Err(ProviderError::InvalidRequest(format!(
                "top_p {} out of range",
                self.top_p
            )));
        }
        if self.max_output_tokens == 0 {
            return Err(ProviderError::InvalidRequest(
                "max_output_tokens must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub content: String,
    pub input_tokens: u64,
    pub output_tokens: u64,
    /// True when the token counts were estimated rather than reported by the
    /// provider.
    pub usage_estimated: bool,
}

pub trait ChatProvider: Send + Sync {
    fn provider_name(&self) -> &str;

    fn chat(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError>;
}

impl<P: ChatProvider + ?Sized> ChatProvider for &P {
    fn provider_name(&self) -> &str {
        (*self).provider_name()
    }

    fn chat(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        (*self).chat(request)
    }
}

/// Estimated token count: ceil(characters / 4). Monotone in text length.
pub fn estimate_tokens(text: &str) -> u64 {
    (text.chars().count() as u64).div_ceil(4)
}

/// Estimated input-side token count of a message list.
pub fn estimate_request_tokens(messages: &[ChatMessage]) -> u64 {
    messages.iter().map(|m| estimate_tokens(&m.content)).sum()
}

/// Canonical request hash for record/replay: messages plus decoding
/// parameters, nothing volatile.
pub fn request_hash(request: &ChatRequest) -> String {
    let canonical = serde_json::json!({
        "messages": request.messages,
        "temperature": request.temperature,
        "top_p": request.top_p,
        "max_output_tokens": request.max_output_tokens,
        "seed": request.seed,
    });
    let digest = Sha256::digest(canonical.to_string().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

// ---------------------------------------------------------------------------
// Scripted provider
// ---------------------------------------------------------------------------

/// Predicate over a prompt, evaluated against the rendered message list.
#[derive(Debug, Clone)]
pub enum Pred {
    Always,
    /// Any message content contains the needle.
    PromptContains(String),
    /// The task-anchor message contains the needle.
    TaskContains(String),
    /// Some demonstration message (one starting with an example prefix)
    /// contains the needle.
    DemoContains(String),
    Not(Box<Pred>),
    All(Vec<Pred>),
    Any(Vec<Pred>),
}

struct PromptView<'a> {
    messages: &'a [ChatMessage],
    anchor: Option<usize>,
}

impl<'a> PromptView<'a> {
    fn new(messages: &'a [ChatMessage]) -> Self {
        let anchor = messages.iter().rposition(|m| {
            m.content.starts_with(markers::TASK_PREFIX)
                || m.content.starts_with(markers::PLAN_PREFIX)
                || m.content.contains(markers::SUBTASK_MARKER)
        });
        PromptView { messages, anchor }
    }

    /// 1-based step index: assistant turns after the task anchor, plus one.
    fn step(&self) -> usize {
        let start = self.anchor.map_or(0, |i| i + 1);
        self.messages[start..]
            .iter()
            .filter(|m| m.role == Role::Assistant)
            .count()
            + 1
    }

    fn eval(&self, pred: &Pred) -> bool {
        match pred {
            Pred::Always => true,
            Pred::PromptContains(needle) => {
                self.messages.iter().any(|m| m.content.contains(needle))
            }
            Pred::TaskContains(needle) => self
                .anchor
                .map(|i| self.messages[i].content.contains(needle))
                .unwrap_or(false),
            Pred::DemoContains(needle) => self.messages.iter().any(|m| {
                (m.content.starts_with(markers::EXAMPLE_TASK_PREFIX)
                    || m.content.starts_with(markers::EXAMPLE_SUBTASK_PREFIX))
                    && m.content.contains(needle)
            }),
            Pred::Not(inner) => !self.eval(inner),
            Pred::All(preds) => preds.iter().all(|p| self.eval(p)),
            Pred::Any(preds) => preds.iter().any(|p| self.eval(p)),
        }
    }
}

/// One scripted behavior: when the predicate matches, reply with the entry
/// for the current episode step (clamped to the last entry).
#[derive(Debug, Clone)]
pub struct ScriptedRule {
    pub name: String,
    pub predicate: Pred,
    pub replies: Vec<String>,
}

impl ScriptedRule {
    pub fn new(name: &str, predicate: Pred, replies: Vec<String>) -> Self {
        assert!(!replies.is_empty(), "a rule needs at least one reply");
        ScriptedRule {
            name: name.to_string(),
            predicate,
            replies,
        }
    }
}

/// Deterministic provider for tests and offline evaluation: first matching
/// rule wins, replies indexed by the episode step inferred from the prompt.
pub struct ScriptedProvider {
    rules: Vec<ScriptedRule>,
}

impl ScriptedProvider {
    pub fn new(rules: Vec<ScriptedRule>) -> Self {
        ScriptedProvider { rules }
    }
}

impl ChatProvider for ScriptedProvider {
    fn provider_name(&self) -> &str {
        "scripted"
    }

    fn chat(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        request.validate()?;
        let view = PromptView::new(&request.messages);
        for rule in &self.rules {
            if view.eval(&rule.predicate) {
                let step = view.step();
                let content = rule.replies[(step - 1).min(rule.replies.len() - 1)].clone();
                let input_tokens = estimate_request_tokens(&request.messages);
                let output_tokens = estimate_tokens(&content);
                return Ok(ChatResponse {
                    content,
                    input_tokens,
                    output_tokens,
                    usage_estimated: true,
                });
            }
        }
        Err(ProviderError::NoRuleMatched)
    }
}

// ---------------------------------------------------------------------------
// Record / replay
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct SessionLine {
    request_hash: String,
    content: String,
    input_tokens: u64,
    output_tokens: u64,
    usage_estimated: bool,
}

/// Wraps a provider and records every (request hash, response) pair.
pub struct RecordingProvider<P> {
    inner: P,
    session: Mutex<Vec<SessionLine>>,
}

impl<P: ChatProvider> RecordingProvider<P> {
    pub fn new(inner: P) -> Self {
        RecordingProvider {
            inner,
            session: Mutex::new(Vec::new()),
        }
    }

    /// Writes the recorded session as line-delimited records.
    pub fn save(&self, path: impl AsRef<std::path::Path>) -> std::io::Result<()> {
        let session = self.session.lock().unwrap();
        let mut out = String::new();
        for line in session.iter() {
            out.push_str(&serde_json::to_string(line).expect("session line serializes"));
            out.push('\n');
        }
        std::fs::write(path, out)
    }
}

impl<P: ChatProvider> ChatProvider for RecordingProvider<P> {
    fn provider_name(&self) -> &str {
        "record"
    }

    fn chat(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        let response = self.inner.chat(request)?;
        self.session.lock().unwrap().push(SessionLine {
            request_hash: request_hash(request),
            content: response.content.clone(),
            input_tokens: response.input_tokens,
            output_tokens: response.output_tokens,
            usage_estimated: response.usage_estimated,
        });
        Ok(response)
    }
}

/// Replays a recorded session by request hash. Holds no inner provider, so a
/// replayed run makes zero live provider calls; an unmatched request is a
/// replay-miss error.
pub struct ReplayProvider {
    responses: HashMap<String, ChatResponse>,
}

impl ReplayProvider {
    pub fn load(path: impl AsRef<std::path::Path>) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> std::io::Result<Self> {
        let mut responses = HashMap::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let parsed: SessionLine = serde_json::from_str(line)
                .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
            responses.insert(
                parsed.request_hash,
                ChatResponse {
                    content: parsed.content,
                    input_tokens: parsed.input_tokens,
                    output_tokens: parsed.output_tokens,
                    usage_estimated: parsed.usage_estimated,
                },
            );
        }
        Ok(ReplayProvider { responses })
    }
}

impl ChatProvider for ReplayProvider {
    fn provider_name(&self) -> &str {
        "replay"
    }

    fn chat(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        let hash = request_hash(request);
        self.responses
            .get(&hash)
            .cloned()
            .ok_or(ProviderError::ReplayMiss(hash))
    }
}

/// Counts calls through to an inner provider. Used by budget tests.
pub struct CountingProvider<P> {
    inner: P,
    calls: AtomicU64,
}

impl<P: ChatProvider> CountingProvider<P> {
    pub fn new(inner: P) -> Self {
        CountingProvider {
            inner,
            calls: AtomicU64::new(0),
        }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }
}

impl<P: ChatProvider> ChatProvider for CountingProvider<P> {
    fn provider_name(&self) -> &str {
        self.inner.provider_name()
    }

    fn chat(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.chat(request)
    }
}

// ---------------------------------------------------------------------------
// Remote client
// ---------------------------------------------------------------------------

#[cfg(feature = "remote")]
pub use remote::{RemoteChatProvider, RemoteConfig};

#[cfg(feature = "remote")]
mod remote {
    //! Client for an OpenAI-compatible chat-completions endpoint.
    //!
    //! `POST {base_url}/v1/chat/completions` with fields `model`,
    //! `messages[{role,content}]`, `temperature`, `top_p`, `max_tokens`.
    //! Auth is a bearer token read from the environment variable named in
    //! the config. Transient failures (429, 5xx, transport errors) retry
    //! with exponential backoff.

    use super::*;

    #[derive(Debug, Clone)]
    pub struct RemoteConfig {
        pub base_url: String,
        pub model: String,
        /// Name of the environment variable holding the bearer token.
        pub auth_env: String,
        pub max_retries: u32,
        pub initial_backoff_ms: u64,
    }

    impl RemoteConfig {
        pub fn new(base_url: &str, model: &str, auth_env: &str) -> Self {
            RemoteConfig {
                base_url: base_url.trim_end_matches('/').to_string(),
                model: model.to_string(),
                auth_env: auth_env.to_string(),
                max_retries: 3,
                initial_backoff_ms: 250,
            }
        }
    }

    pub struct RemoteChatProvider {
        config: RemoteConfig,
        client: reqwest::blocking::Client,
    }

    #[derive(Deserialize)]
    struct CompletionsResponse {
        choices: Vec<Choice>,
        #[serde(default)]
        usage: Option<Usage>,
    }

    #[derive(Deserialize)]
    struct Choice {
        message: AssistantMessage,
    }

    #[derive(Deserialize)]
    struct AssistantMessage {
        content: String,
    }

    #[derive(Deserialize)]
    struct Usage {
        prompt_tokens: u64,
        completion_tokens: u64,
    }

    impl RemoteChatProvider {
        pub fn new(config: RemoteConfig) -> Self {
            RemoteChatProvider {
                config,
                client: reqwest::blocking::Client::new(),
            }
        }

        /// Wire body for a request. Messages pass through verbatim.
        pub fn request_body(&self, request: &ChatRequest) -> serde_json::Value {
            let mut body = serde_json::json!({
                "model": self.config.model,
                "messages": request.messages,
                "temperature": request.temperature,
                "top_p": request.top_p,
                "max_tokens": request.max_output_tokens,
            });
            if let Some(seed) = request.seed {
                body["seed"] = serde_json::json!(seed);
            }
            body
        }
    }

    fn retryable_status(status: reqwest::StatusCode) -> bool {
        status.as_u16() == 429 || status.is_server_error()
    }

    impl ChatProvider for RemoteChatProvider {
        fn provider_name(&self) -> &str {
            "remote"
        }

        fn chat(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError> {
            request.validate()?;
            let url = format!("{}/v1/chat/completions", self.config.base_url);
            let token = std::env::var(&self.config.auth_env).unwrap_or_default();
            let body = self.request_body(request);
            let mut attempts = 0u32;
            loop {
                attempts += 1;
                let sent = self
                    .client
                    .post(&url)
                    .bearer_auth(&token)
                    .json(&body)
                    .send();
                let retry_message = match sent {
                    Ok(resp) if resp.status().is_success() => {
                        let parsed: CompletionsResponse =
                            resp.json().map_err(|e| ProviderError::Remote {
                                attempts,
                                message: format!("malformed response: {e}"),
                            })?;
                        let choice =
                            parsed.choices.into_iter().next().ok_or_else(|| {
                                ProviderError::Remote {
                                    attempts,
                                    message: "response had no choices".into(),
                                }
                            })?;
                        let content = choice.message.content;
                        return Ok(match parsed.usage {
                            Some(usage) => ChatResponse {
                                content,
                                input_tokens: usage.prompt_tokens,
                                output_tokens: usage.completion_tokens,
                                usage_estimated: false,
                            },
                            None => ChatResponse {
                                input_tokens: estimate_request_tokens(&request.messages),
                                output_tokens: estimate_tokens(&content),
                                content,
                                usage_estimated: true,
                            },
                        });
                    }
                    Ok(resp) => {
                        let status = resp.status();
                        if !retryable_status(status) {
                            return Err(ProviderError::Remote {
                                attempts,
                                message: format!("http status {status}"),
                            });
                        }
                        format!("http status {status}")
                    }
                    Err(e) => e.to_string(),
                };
                if attempts > self.config.max_retries {
                    return Err(ProviderError::Remote {
                        attempts,
                        message: retry_message,
                    });
                }
                let backoff = self.config.initial_backoff_ms << (attempts - 1).min(8);
                std::thread::sleep(std::time::Duration::from_millis(backoff));
            }
        }
    }

    #[cfg(test)]
    mod tests {
        use super::*;

        #[test]
        fn request_body_passes_messages_through_verbatim() {
            let provider = RemoteChatProvider::new(RemoteConfig::new(
                "https://example.test",
                "test-model",
                "TEST_TOKEN_VAR",
            ));
            let request = ChatRequest {
                messages: vec![
                    ChatMessage::system("be brief"),
                    ChatMessage::user("Your task: do it"),
                ],
                temperature: 0.1,
                top_p: 0.5,
                max_output_tokens: 2000,
                seed: Some(11),
            };
            let body = provider.request_body(&request);
            assert_eq!(body["model"], "test-model");
            assert_eq!(body["max_tokens"], 2000);
            assert_eq!(body["seed"], 11);
            let round_tripped: Vec<ChatMessage> =
                serde_json::from_value(body["messages"].clone()).unwrap();
            assert_eq!(round_tripped, request.messages);
        }

        #[test]
        fn retryable_statuses() {
            assert!(retryable_status(reqwest::StatusCode::TOO_MANY_REQUESTS));
            assert!(retryable_status(reqwest::StatusCode::BAD_GATEWAY));
            assert!(!retryable_status(reqwest::StatusCode::BAD_REQUEST));
            assert!(!retryable_status(reqwest::StatusCode::UNAUTHORIZED));
        }
    }
}
