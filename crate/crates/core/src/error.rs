use std::fmt;

use thiserror::Error;

use crate::catalog::WidgetKind;
use crate::task::Aspect;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CatalogError {
    #[error("unknown widget name {0:?}")]
    UnknownWidget(String),
    #[error("unknown capability tag {0:?}")]
    UnknownTag(String),
    #[error("tag set must not be empty")]
    EmptyTagSet,
}

/// What went wrong at one location of a library document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ViolationKind {
    Missing,
    WrongType(&'static str),
    Empty,
    UnknownWidget(String),
    UnknownAspect(String),
    UnknownTag(String),
    Duplicate(String),
    InvalidName(String),
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ViolationKind::Missing => f.write_str("missing required field"),
            ViolationKind::WrongType(want) => write!(f, "expected {want}"),
            ViolationKind::Empty => f.write_str("must not be empty"),
            ViolationKind::UnknownWidget(w) => write!(f, "unknown widget {w:?}"),
            ViolationKind::UnknownAspect(a) => write!(f, "unknown aspect {a:?}"),
            ViolationKind::UnknownTag(t) => write!(f, "unknown tag {t:?}"),
            ViolationKind::Duplicate(v) => write!(f, "duplicate value {v:?}"),
            ViolationKind::InvalidName(n) => write!(f, "invalid identifier {n:?}"),
        }
    }
}

/// A schema violation at a JSON-pointer-like path such as `tasks[2].responses.efficiency[4].widget`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub path: String,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.kind)
    }
}

#[derive(Debug, Error)]
pub enum LibraryError {
    #[error("library document is not valid JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("library failed validation: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("unknown task {0:?}")]
    UnknownTask(String),
    #[error("task {task:?} has no responses for {aspect}")]
    MissingAspect { task: String, aspect: Aspect },
    #[error("cannot take {requested} responses per aspect, only {available} available")]
    SubsetTooLarge { requested: usize, available: usize },
    #[error("library mode withoutlib has no subset; use the empty library")]
    SubsetWithoutLibrary,
}

impl LibraryError {
    pub fn violations(&self) -> &[Violation] {
        match self {
            LibraryError::Invalid(v) => v,
            _ => &[],
        }
    }

    pub fn has_unknown_widget(&self) -> bool {
        self.violations()
            .iter()
            .any(|v| matches!(v.kind, ViolationKind::UnknownWidget(_)))
    }
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TaskError {
    #[error("task description must not be empty")]
    EmptyDescription,
    #[error("task must request at least one aspect")]
    NoAspects,
    #[error("unknown aspect {0:?}")]
    UnknownAspect(String),
    #[error("invalid task name {0:?}")]
    InvalidName(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("no JSON document with a \"widget\" section found in reply")]
    NoDocument,
    #[error("reply is missing requested aspect {0}")]
    MissingAspect(Aspect),
    #[error("reply names unknown widget {0:?}")]
    UnknownWidget(String),
    #[error("malformed reply: {0}")]
    Malformed(String),
}

#[derive(Debug, Error)]
pub enum ReasonError {
    #[error("LLM transport error: {0}")]
    Transport(String),
    #[error("LLM reply unusable after {attempts} attempt(s): {last_error}")]
    ExhaustedRetries {
        attempts: u32,
        last_error: ParseError,
        last_raw: String,
    },
    #[error(transparent)]
    Library(#[from] LibraryError),
    #[error("invalid reasoner configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenerateError {
    #[error("no image operation is bound to task {0:?}")]
    UnknownBinding(String),
    #[error("widget {kind} cannot drive the {op} operation")]
    KindOpMismatch { kind: WidgetKind, op: &'static str },
    #[error("widget {0} was not scored in the recommendation")]
    KindNotRecommended(WidgetKind),
    #[error("code generation needs at least one widget spec")]
    NoSpecs,
    #[error("code generation needs non-empty example code")]
    EmptyExampleCode,
    #[error("unknown code template {0:?}")]
    UnknownTemplate(String),
    #[error("emitted code could not be read back: {0}")]
    Extract(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ImageError {
    #[error("parameter {param} = {value} outside domain {domain}")]
    Domain {
        param: &'static str,
        value: f64,
        domain: &'static str,
    },
    #[error("overlay asset {asset_w}x{asset_h} larger than image {image_w}x{image_h}")]
    OverlayTooLarge {
        asset_w: u32,
        asset_h: u32,
        image_w: u32,
        image_h: u32,
    },
    #[error("unknown overlay asset {0:?}")]
    UnknownAsset(String),
    #[error("invalid image buffer: {0}")]
    InvalidBuffer(String),
    #[error("malformed hex color {0:?}")]
    MalformedHex(String),
    #[error("png codec error: {0}")]
    Codec(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StudyError {
    #[error("chi-squared test needs at least one observation")]
    NoObservations,
    #[error("no comparison records to analyze")]
    EmptyRecords,
    #[error("participant count must be positive")]
    NoParticipants,
    #[error("pair {0} is not one of the canonical comparison pairs")]
    NonCanonicalPair(String),
    #[error("record does not match participant {participant}'s plan: {reason}")]
    OutsidePlan { participant: String, reason: String },
    #[error("invalid rater model: {0}")]
    InvalidModel(String),
    #[error("unknown task set {0}; expected 1 or 2")]
    UnknownTaskSet(u8),
    #[error("record line {line}: {message}")]
    Record { line: usize, message: String },
    #[error("record i/o: {0}")]
    Io(String),
}
