//! Widget reasoning: one pass produces a widget and rationale per aspect.

mod llm;
mod oracle;
mod parse;
mod prompt;

use std::borrow::Cow;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use llm::{reason_once_llm, ChatBackend, ChatMessage, HttpChatBackend, Transcript, API_KEY_ENV};
pub use oracle::{fallback_widget, reason_once_oracle, vote_distribution};
pub use parse::parse_reasoning_response;
pub use prompt::{build_reasoning_prompt, PromptBundle};

use crate::catalog::WidgetKind;
use crate::error::ReasonError;
use crate::library::{subset_library, LibraryMode, PreferenceLibrary};
use crate::task::{Aspect, TaskContext};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReasonedWidget {
    pub widget: WidgetKind,
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReasonedWidgetSet {
    pub task_name: String,
    pub per_aspect: BTreeMap<Aspect, ReasonedWidget>,
    pub relevant_tasks: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmConfig {
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub max_retries: u32,
    pub timeout_secs: u64,
}

impl Default for LlmConfig {
    fn default() -> Self {
        LlmConfig {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model: "gpt-4o".into(),
            temperature: 1.0,
            max_retries: 3,
            timeout_secs: 120,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Backend {
    Oracle,
    Llm(LlmConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReasonerConfig {
    pub backend: Backend,
    pub library_mode: LibraryMode,
    /// Oracle sampling seed; iteration `i` of an aggregate uses `seed + i`.
    pub seed: u64,
    /// Seed for choosing which responses a `withlib(n)` subset keeps.
    pub subset_seed: u64,
}

impl Default for ReasonerConfig {
    fn default() -> Self {
        ReasonerConfig {
            backend: Backend::Oracle,
            library_mode: LibraryMode::WithLib(30),
            seed: 0,
            subset_seed: 0,
        }
    }
}

impl ReasonerConfig {
    pub fn validate(&self) -> Result<(), ReasonError> {
        if let Backend::Llm(c) = &self.backend {
            if !(c.temperature.is_finite() && c.temperature >= 0.0) {
                return Err(ReasonError::Config(format!("temperature {} must be >= 0", c.temperature)));
            }
            if c.endpoint.is_empty() || c.model.is_empty() {
                return Err(ReasonError::Config("llm backend needs an endpoint and a model".into()));
            }
        }
        Ok(())
    }
}

/// The library the reasoner sees under `mode`: a subset, all of it, or nothing.
pub fn library_for_mode<'a>(
    lib: &'a PreferenceLibrary,
    mode: LibraryMode,
    subset_seed: u64,
) -> Result<Cow<'a, PreferenceLibrary>, ReasonError> {
    match mode {
        LibraryMode::WithoutLib => Ok(Cow::Owned(PreferenceLibrary::empty())),
        LibraryMode::WithLib(n) if n == lib.min_responses_per_aspect() && lib.tasks.iter().all(|t| {
            t.responses.values().all(|l| l.len() == n)
        }) =>
        {
            Ok(Cow::Borrowed(lib))
        }
        LibraryMode::WithLib(_) => Ok(Cow::Owned(subset_library(lib, mode, subset_seed)?)),
    }
}

/// Dispatches one pass on an already-prepared library.
pub fn reason_prepared(
    ctx: &TaskContext,
    prepared: &PreferenceLibrary,
    config: &ReasonerConfig,
    seed: u64,
    backend: Option<&dyn ChatBackend>,
    transcript: Option<&Transcript>,
) -> Result<ReasonedWidgetSet, ReasonError> {
    match &config.backend {
        Backend::Oracle => Ok(reason_once_oracle(ctx, prepared, seed)),
        Backend::Llm(cfg) => match backend {
            Some(b) => reason_once_llm(ctx, prepared, cfg, b, transcript),
            None => reason_once_llm(ctx, prepared, cfg, &HttpChatBackend::from_config(cfg), transcript),
        },
    }
}

/// Applies the configured library mode, then reasons once.
pub fn reason(ctx: &TaskContext, lib: &PreferenceLibrary, config: &ReasonerConfig) -> Result<ReasonedWidgetSet, ReasonError> {
    config.validate()?;
    let prepared = library_for_mode(lib, config.library_mode, config.subset_seed)?;
    reason_prepared(ctx, &prepared, config, config.seed, None, None)
}
