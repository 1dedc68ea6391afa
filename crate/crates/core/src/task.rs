//! User task context and task-to-library relevance.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::catalog::{CapabilityTag, CategoryTag};
use crate::error::TaskError;
use crate::library::PreferenceLibrary;

/// A preference aspect raters judge widgets on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aspect {
    Predictability,
    Efficiency,
    Explorability,
}

impl Aspect {
    pub const ALL: [Aspect; 3] = [Aspect::Predictability, Aspect::Efficiency, Aspect::Explorability];

    pub fn as_str(self) -> &'static str {
        match self {
            Aspect::Predictability => "predictability",
            Aspect::Efficiency => "efficiency",
            Aspect::Explorability => "explorability",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Aspect::Predictability => "Predictability",
            Aspect::Efficiency => "Efficiency",
            Aspect::Explorability => "Explorability",
        }
    }

    /// Definition line given to the reasoner.
    pub fn definition(self) -> &'static str {
        match self {
            Aspect::Predictability => "allows users to obtain results with no surprises or doesn't require users to deduce how to perform the interaction.",
            Aspect::Efficiency => "allows users to perform tasks with a minimum amount of effort.",
            Aspect::Explorability => "allows users to explore multiple possibilities and perform functions with high flexibility.",
        }
    }
}

impl fmt::Display for Aspect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Aspect {
    type Err = TaskError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase();
        Aspect::ALL
            .into_iter()
            .find(|a| a.as_str() == norm)
            .ok_or_else(|| TaskError::UnknownAspect(s.to_string()))
    }
}

/// The task the user wants widgets for.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TaskContextInput", into = "TaskContextInput")]
pub struct TaskContext {
    name: String,
    description: String,
    aspects: BTreeSet<Aspect>,
    tags: BTreeSet<CategoryTag>,
    image_ref: Option<String>,
}

/// Wire shape of a task context; `tags` may be omitted and are then derived.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaskContextInput {
    #[serde(default = "default_task_name")]
    pub name: String,
    pub description: String,
    #[serde(default = "all_aspects")]
    pub aspects: Vec<Aspect>,
    #[serde(default)]
    pub tags: Vec<CategoryTag>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_ref: Option<String>,
}

fn default_task_name() -> String {
    "user_task".to_string()
}

fn all_aspects() -> Vec<Aspect> {
    Aspect::ALL.to_vec()
}

impl TryFrom<TaskContextInput> for TaskContext {
    type Error = TaskError;

    fn try_from(input: TaskContextInput) -> Result<Self, Self::Error> {
        let mut ctx = TaskContext::new(&input.name, &input.description, input.aspects)?;
        if !input.tags.is_empty() {
            ctx.tags = input.tags.into_iter().collect();
        }
        ctx.image_ref = input.image_ref;
        Ok(ctx)
    }
}

impl From<TaskContext> for TaskContextInput {
    fn from(ctx: TaskContext) -> Self {
        TaskContextInput {
            name: ctx.name,
            description: ctx.description,
            aspects: ctx.aspects.into_iter().collect(),
            tags: ctx.tags.into_iter().collect(),
            image_ref: ctx.image_ref,
        }
    }
}

fn valid_name(name: &str) -> bool {
    !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

impl TaskContext {
    /// Builds a context whose tags are derived from the description.
    pub fn new(
        name: &str,
        description: &str,
        aspects: impl IntoIterator<Item = Aspect>,
    ) -> Result<Self, TaskError> {
        if !valid_name(name) {
            return Err(TaskError::InvalidName(name.to_string()));
        }
        if description.trim().is_empty() {
            return Err(TaskError::EmptyDescription);
        }
        let aspects: BTreeSet<Aspect> = aspects.into_iter().collect();
        if aspects.is_empty() {
            return Err(TaskError::NoAspects);
        }
        Ok(TaskContext {
            name: name.to_string(),
            description: description.to_string(),
            aspects,
            tags: derive_tags(description),
            image_ref: None,
        })
    }

    /// Replaces the derived tags with explicit ones. An empty set keeps the
    /// derived tags.
    pub fn with_tags(mut self, tags: impl IntoIterator<Item = CategoryTag>) -> Self {
        let tags: BTreeSet<_> = tags.into_iter().collect();
        if !tags.is_empty() {
            self.tags = tags;
        }
        self
    }

    pub fn with_image(mut self, image_ref: impl Into<String>) -> Self {
        self.image_ref = Some(image_ref.into());
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn aspects(&self) -> &BTreeSet<Aspect> {
        &self.aspects
    }

    pub fn tags(&self) -> &BTreeSet<CategoryTag> {
        &self.tags
    }

    pub fn image_ref(&self) -> Option<&str> {
        self.image_ref.as_deref()
    }
}

const STOP_WORDS: [&str; 50] = [
    "a", "an", "the", "and", "or", "but", "if", "of", "to", "in", "on", "for", "with", "by", "at",
    "from", "as", "into", "is", "are", "be", "was", "it", "its", "this", "that", "these", "those",
    "you", "your", "me", "my", "we", "our", "they", "their", "them", "what", "which", "who", "how",
    "so", "than", "then", "most", "very", "can", "will", "just", "image",
];

fn tokens(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(|w| w.to_lowercase())
}

/// Lowercased content words (stop words and single letters removed).
pub fn content_words(text: &str) -> BTreeSet<String> {
    tokens(text)
        .filter(|w| w.chars().count() > 1 && !STOP_WORDS.contains(&w.as_str()))
        .collect()
}

const KEYWORD_TABLE: &[(&[&str], &[CapabilityTag])] = &[
    (
        &["exposure", "lightness", "brightness", "saturation", "temperature", "tint", "hue", "contrast"],
        &[CapabilityTag::Continuous, CapabilityTag::Discrete],
    ),
    (
        &["hue", "tint", "temperature", "color", "tone", "spring", "fall", "autumn"],
        &[CapabilityTag::Color],
    ),
    (
        &["position", "place", "align", "watermark", "logo", "margin", "vignette", "text"],
        &[CapabilityTag::Position, CapabilityTag::Discrete],
    ),
];

/// Category tags implied by keywords in a task description.
pub fn derive_tags(description: &str) -> BTreeSet<CategoryTag> {
    let words: BTreeSet<String> = tokens(description).collect();
    KEYWORD_TABLE
        .iter()
        .filter(|(keys, _)| keys.iter().any(|k| words.contains(*k)))
        .flat_map(|(_, tags)| tags.iter().copied())
        .collect()
}

/// Weight of one shared content word relative to one shared tag, in tenths.
const WORD_WEIGHT_TENTHS: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RelevantTask {
    pub task_name: String,
    pub tag_overlap: u32,
    pub word_overlap: u32,
}

impl RelevantTask {
    /// Score in tenths; exact, so ordering never depends on float rounding.
    pub fn score_tenths(&self) -> u32 {
        self.tag_overlap * 10 + self.word_overlap * WORD_WEIGHT_TENTHS
    }

    pub fn score(&self) -> f64 {
        f64::from(self.score_tenths()) / 10.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RelevanceResult {
    pub ranked: Vec<RelevantTask>,
    pub threshold_applied: bool,
}

impl RelevanceResult {
    pub fn task_names(&self) -> Vec<String> {
        self.ranked.iter().map(|r| r.task_name.clone()).collect()
    }
}

/// Ranks library tasks by tag overlap plus a tenth per shared content word.
/// Zero-score tasks are dropped; ties keep library order.
pub fn relevance(ctx: &TaskContext, lib: &PreferenceLibrary) -> RelevanceResult {
    relevance_top_k(ctx, lib, None)
}

pub fn relevance_top_k(
    ctx: &TaskContext,
    lib: &PreferenceLibrary,
    top_k: Option<usize>,
) -> RelevanceResult {
    let ctx_words = content_words(ctx.description());
    let mut ranked: Vec<RelevantTask> = Vec::with_capacity(lib.tasks.len());
    let mut excluded = false;
    for task in &lib.tasks {
        let tag_overlap = ctx.tags().intersection(&task.tags).count() as u32;
        let word_overlap = content_words(&task.description).intersection(&ctx_words).count() as u32;
        let rel = RelevantTask {
            task_name: task.name.clone(),
            tag_overlap,
            word_overlap,
        };
        if rel.score_tenths() == 0 {
            excluded = true;
        } else {
            ranked.push(rel);
        }
    }
    // stable sort keeps library order among equal scores
    ranked.sort_by_key(|r| std::cmp::Reverse(r.score_tenths()));
    if let Some(k) = top_k {
        if ranked.len() > k {
            ranked.truncate(k);
            excluded = true;
        }
    }
    RelevanceResult {
        ranked,
        threshold_applied: excluded,
    }
}
