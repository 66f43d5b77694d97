use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

use super::AgentKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        ChatMessage {
            role,
            content: content.into(),
        }
    }
}

/// One call to an agent: the rendered prompt plus the conversation so far.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmRequest {
    pub agent: AgentKind,
    pub system: String,
    pub messages: Vec<ChatMessage>,
}

impl LlmRequest {
    pub fn last_message(&self) -> &str {
        self.messages.last().map(|m| m.content.as_str()).unwrap_or("")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendError {
    #[error("backend call timed out")]
    Timeout,
    #[error("transport error: {message}")]
    Transport { message: String },
    #[error("backend returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("no scripted response for {agent} message: {excerpt}")]
    Unmatched { agent: String, excerpt: String },
    #[error("backend is not configured: {message}")]
    Config { message: String },
}

impl BackendError {
    pub fn transport(message: impl Into<String>) -> Self {
        BackendError::Transport { message: message.into() }
    }

    pub fn config(message: impl Into<String>) -> Self {
        BackendError::Config { message: message.into() }
    }
}

/// Text-in, text-out access to a language model.
#[async_trait]
pub trait LlmBackend: Send + Sync {
    async fn send(&self, request: &LlmRequest) -> Result<String, BackendError>;
}

/// Calls `backend` and gives up after `timeout`. Dropping the returned future cancels
/// the call.
pub async fn send_with_timeout(
    backend: &dyn LlmBackend,
    request: &LlmRequest,
    timeout: Duration,
) -> Result<String, BackendError> {
    tokio::time::timeout(timeout, backend.send(request))
        .await
        .map_err(|_| BackendError::Timeout)?
}

/// A request/response pair as seen by [`RecordingBackend`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exchange {
    pub agent: AgentKind,
    /// Last message of the request, which is what scripted steps match against.
    pub message: String,
    pub response: Result<String, BackendError>,
}

/// Wraps a backend and keeps every exchange, so sessions can journal raw replies.
pub struct RecordingBackend<'a> {
    inner: &'a dyn LlmBackend,
    log: Mutex<Vec<Exchange>>,
}

impl<'a> RecordingBackend<'a> {
    pub fn new(inner: &'a dyn LlmBackend) -> Self {
        RecordingBackend {
            inner,
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn take(&self) -> Vec<Exchange> {
        std::mem::take(&mut *self.log.lock().expect("log lock"))
    }
}

#[async_trait]
impl LlmBackend for RecordingBackend<'_> {
    async fn send(&self, request: &LlmRequest) -> Result<String, BackendError> {
        let out = self.inner.send(request).await;
        self.log.lock().expect("log lock").push(Exchange {
            agent: request.agent,
            message: request.last_message().to_string(),
            response: out.clone(),
        });
        out
    }
}

/// One scripted reply. `match` must occur in the request's last message; `agent`, when
/// given, must equal the calling agent. A step with `error` fails the call instead.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptedStep {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent: Option<AgentKind>,
    #[serde(rename = "match", default)]
    pub pattern: String,
    #[serde(default)]
    pub response: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<BackendError>,
}

/// Deterministic backend that replays an ordered list of steps. Each call consumes the
/// next step; a call that does not match it fails.
#[derive(Debug, Default)]
pub struct ScriptedBackend {
    steps: Vec<ScriptedStep>,
    cursor: Mutex<usize>,
}

impl ScriptedBackend {
    pub fn new(steps: Vec<ScriptedStep>) -> Self {
        ScriptedBackend {
            steps,
            cursor: Mutex::new(0),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        Ok(Self::new(serde_json::from_str(text)?))
    }

    pub fn load(path: &Path) -> Result<Self, BackendError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BackendError::config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| BackendError::config(format!("{}: {e}", path.display())))
    }

    pub fn steps(&self) -> &[ScriptedStep] {
        &self.steps
    }

    pub fn consumed(&self) -> usize {
        *self.cursor.lock().expect("cursor lock")
    }

    pub fn is_exhausted(&self) -> bool {
        self.consumed() == self.steps.len()
    }
}

#[async_trait]
impl LlmBackend for ScriptedBackend {
    async fn send(&self, request: &LlmRequest) -> Result<String, BackendError> {
        let mut cursor = self.cursor.lock().expect("cursor lock");
        let last = request.last_message();
        let unmatched = || BackendError::Unmatched {
            agent: request.agent.name().into(),
            excerpt: last.chars().take(120).collect(),
        };
        let step = self.steps.get(*cursor).ok_or_else(unmatched)?;
        if step.agent.is_some_and(|a| a != request.agent) || !last.contains(&step.pattern) {
            return Err(unmatched());
        }
        *cursor += 1;
        match &step.error {
            Some(e) => Err(e.clone()),
            None => Ok(step.response.clone()),
        }
    }
}

/// Chat-completions client for an OpenAI-style HTTP endpoint.
#[derive(Debug, Clone)]
pub struct LiveBackend {
    client: reqwest::Client,
    url: String,
    model: String,
    key: Option<String>,
}

impl LiveBackend {
    pub fn new(base_url: &str, model: &str, key: Option<String>) -> Self {
        let base = base_url.trim_end_matches('/');
        let url = if base.ends_with("/chat/completions") {
            base.to_string()
        } else {
            format!("{base}/chat/completions")
        };
        LiveBackend {
            client: reqwest::Client::new(),
            url,
            model: model.to_string(),
            key,
        }
    }

    /// Reads `PARLOGUE_LLM_URL`, `PARLOGUE_LLM_MODEL` and `PARLOGUE_LLM_KEY`.
    pub fn from_env() -> Result<Self, BackendError> {
        let var = |name: &str| std::env::var(name).ok().filter(|v| !v.is_empty());
        let url = var("PARLOGUE_LLM_URL").ok_or_else(|| BackendError::config("PARLOGUE_LLM_URL is not set"))?;
        let model = var("PARLOGUE_LLM_MODEL")
            .ok_or_else(|| BackendError::config("PARLOGUE_LLM_MODEL is not set"))?;
        Ok(Self::new(&url, &model, var("PARLOGUE_LLM_KEY")))
    }
}

#[derive(Deserialize)]
struct Completion {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChatMessage,
}

#[async_trait]
impl LlmBackend for LiveBackend {
    async fn send(&self, request: &LlmRequest) -> Result<String, BackendError> {
        let mut messages = vec![ChatMessage::new(Role::System, request.system.clone())];
        messages.extend(request.messages.iter().cloned());
        let body = serde_json::json!({ "model": self.model, "messages": messages });
        let mut req = self.client.post(&self.url).json(&body);
        if let Some(key) = &self.key {
            req = req.bearer_auth(key);
        }
        let resp = req
            .send()
            .await
            .map_err(|e| BackendError::transport(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            let body = resp.text().await.unwrap_or_default();
            return Err(BackendError::Status {
                status: status.as_u16(),
                body,
            });
        }
        let completion: Completion = resp
            .json()
            .await
            .map_err(|e| BackendError::transport(format!("bad completion body: {e}")))?;
        completion
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| BackendError::transport("completion has no choices"))
    }
}
