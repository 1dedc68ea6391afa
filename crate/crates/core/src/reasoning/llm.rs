//! Chat-completion backend with corrective retries.

use std::fs::File;
use std::io::Write;
use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::parse::parse_reasoning_response;
use super::prompt::build_reasoning_prompt;
use super::{LlmConfig, ReasonedWidgetSet};
use crate::error::ReasonError;
use crate::library::PreferenceLibrary;
use crate::task::TaskContext;

/// Environment variable holding the API key.
pub const API_KEY_ENV: &str = "CROWDGEN_LLM_KEY";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: &str, content: impl Into<String>) -> Self {
        ChatMessage {
            role: role.to_string(),
            content: content.into(),
        }
    }
}

pub trait ChatBackend: Send + Sync {
    fn complete(&self, messages: &[ChatMessage], temperature: f64) -> Result<String, ReasonError>;
}

/// OpenAI-style `/chat/completions` client.
pub struct HttpChatBackend {
    agent: ureq::Agent,
    endpoint: String,
    model: String,
    api_key: Option<String>,
}

impl std::fmt::Debug for HttpChatBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpChatBackend")
            .field("endpoint", &self.endpoint)
            .field("model", &self.model)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .finish()
    }
}

impl HttpChatBackend {
    /// Reads the key from the environment; it is held in memory only.
    pub fn from_config(cfg: &LlmConfig) -> Self {
        let key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
        Self::with_key(cfg, key)
    }

    pub fn with_key(cfg: &LlmConfig, api_key: Option<String>) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(cfg.timeout_secs)))
            .http_status_as_error(true)
            .build()
            .into();
        HttpChatBackend {
            agent,
            endpoint: cfg.endpoint.clone(),
            model: cfg.model.clone(),
            api_key,
        }
    }
}

impl ChatBackend for HttpChatBackend {
    fn complete(&self, messages: &[ChatMessage], temperature: f64) -> Result<String, ReasonError> {
        let body = json!({ "model": self.model, "temperature": temperature, "messages": messages });
        let mut req = self.agent.post(&self.endpoint);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req
            .send_json(&body)
            .map_err(|e| ReasonError::Transport(e.to_string()))?;
        let v: Value = resp
            .body_mut()
            .read_json()
            .map_err(|e| ReasonError::Transport(format!("reply body: {e}")))?;
        v["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| ReasonError::Transport("reply has no choices[0].message.content".into()))
    }
}

/// Append-only log of prompts and replies.
#[derive(Debug)]
pub struct Transcript {
    file: Mutex<File>,
}

impl Transcript {
    pub fn create(path: &Path) -> std::io::Result<Self> {
        Ok(Transcript {
            file: Mutex::new(File::options().create(true).append(true).open(path)?),
        })
    }

    pub fn record(&self, event: &str, payload: &Value) {
        let line = json!({ "event": event, "payload": payload });
        let mut f = self.file.lock().unwrap_or_else(|p| p.into_inner());
        if let Err(e) = writeln!(f, "{line}") {
            tracing::warn!("transcript write failed: {e}");
        }
    }
}

fn correction(err: &crate::error::ParseError) -> String {
    format!(
        "Your previous response could not be used: {err}. Respond again following the example format, \
         using only widgets from the given candidates, and include every requested aspect."
    )
}

/// One reasoning pass through a chat backend. Replies that fail to parse are
/// answered with the error and retried up to `cfg.max_retries` times.
pub fn reason_once_llm(
    ctx: &TaskContext,
    lib: &PreferenceLibrary,
    cfg: &LlmConfig,
    backend: &dyn ChatBackend,
    transcript: Option<&Transcript>,
) -> Result<ReasonedWidgetSet, ReasonError> {
    let prompt = build_reasoning_prompt(ctx, lib);
    let mut messages = vec![ChatMessage::new("system", &prompt.system), ChatMessage::new("user", &prompt.user)];
    let attempts = cfg.max_retries + 1;
    for attempt in 1..=attempts {
        if let Some(t) = transcript {
            t.record("request", &json!({ "attempt": attempt, "messages": messages }));
        }
        let raw = backend.complete(&messages, cfg.temperature)?;
        if let Some(t) = transcript {
            t.record("reply", &json!({ "attempt": attempt, "content": raw }));
        }
        match parse_reasoning_response(&raw, ctx.aspects()) {
            Ok(mut set) => {
                set.task_name = ctx.name().to_string();
                return Ok(set);
            }
            Err(err) if attempt == attempts => {
                return Err(ReasonError::ExhaustedRetries {
                    attempts,
                    last_error: err,
                    last_raw: raw,
                })
            }
            Err(err) => {
                tracing::debug!(attempt, %err, "unusable reply, retrying");
                messages.push(ChatMessage::new("assistant", raw));
                messages.push(ChatMessage::new("user", correction(&err)));
            }
        }
    }
    unreachable!("loop returns on the last attempt")
}
