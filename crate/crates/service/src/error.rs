use crowdgen_core::{GenerateError, ImageError, LibraryError, ReasonError, StudyError, TaskError};
use serde_json::{json, Value};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("{0}")]
    Validation(String),
    /// Validation failure with the offending document paths.
    #[error("{message}")]
    Invalid { message: String, details: Vec<String> },
    #[error("{0}")]
    Unprocessable(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    Backend(String),
    #[error("{0}")]
    Io(String),
}

impl ServiceError {
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::Validation(_) | ServiceError::Invalid { .. } => "validation",
            ServiceError::Unprocessable(_) => "unprocessable",
            ServiceError::Conflict(_) => "conflict",
            ServiceError::NotFound(_) => "not_found",
            ServiceError::Backend(_) => "backend",
            ServiceError::Io(_) => "io",
        }
    }

    pub fn http_status(&self) -> u16 {
        match self {
            ServiceError::Validation(_) | ServiceError::Invalid { .. } => 400,
            ServiceError::Unprocessable(_) => 422,
            ServiceError::Conflict(_) => 409,
            ServiceError::NotFound(_) => 404,
            ServiceError::Backend(_) => 502,
            ServiceError::Io(_) => 500,
        }
    }

    /// 2 validation, 3 backend, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            ServiceError::Backend(_) => 3,
            ServiceError::Io(_) | ServiceError::NotFound(_) => 4,
            _ => 2,
        }
    }

    pub fn details(&self) -> &[String] {
        match self {
            ServiceError::Invalid { details, .. } => details,
            _ => &[],
        }
    }

    pub fn to_json(&self) -> Value {
        let mut err = json!({ "code": self.code(), "message": self.to_string() });
        if !self.details().is_empty() {
            err["details"] = json!(self.details());
        }
        json!({ "error": err })
    }

    /// Library errors raised while appending are conflicts with the stored state.
    pub fn conflict(e: LibraryError) -> Self {
        match e {
            LibraryError::Invalid(v) => ServiceError::Conflict(LibraryError::Invalid(v).to_string()),
            other => ServiceError::Conflict(other.to_string()),
        }
    }
}

impl From<LibraryError> for ServiceError {
    fn from(e: LibraryError) -> Self {
        let details: Vec<String> = e.violations().iter().map(|v| v.to_string()).collect();
        if details.is_empty() {
            ServiceError::Validation(e.to_string())
        } else {
            ServiceError::Invalid {
                message: e.to_string(),
                details,
            }
        }
    }
}

impl From<ReasonError> for ServiceError {
    fn from(e: ReasonError) -> Self {
        match e {
            ReasonError::Transport(_) | ReasonError::ExhaustedRetries { .. } => ServiceError::Backend(e.to_string()),
            ReasonError::Library(l) => l.into(),
            ReasonError::Config(_) => ServiceError::Validation(e.to_string()),
        }
    }
}

impl From<GenerateError> for ServiceError {
    fn from(e: GenerateError) -> Self {
        match e {
            GenerateError::UnknownBinding(_) | GenerateError::KindOpMismatch { .. } | GenerateError::KindNotRecommended(_) => {
                ServiceError::Unprocessable(e.to_string())
            }
            _ => ServiceError::Validation(e.to_string()),
        }
    }
}

impl From<ImageError> for ServiceError {
    fn from(e: ImageError) -> Self {
        ServiceError::Validation(e.to_string())
    }
}

impl From<TaskError> for ServiceError {
    fn from(e: TaskError) -> Self {
        ServiceError::Validation(e.to_string())
    }
}

impl From<StudyError> for ServiceError {
    fn from(e: StudyError) -> Self {
        match e {
            StudyError::OutsidePlan { .. } | StudyError::NonCanonicalPair(_) => ServiceError::Conflict(e.to_string()),
            StudyError::Io(_) => ServiceError::Io(e.to_string()),
            _ => ServiceError::Validation(e.to_string()),
        }
    }
}

impl From<std::io::Error> for ServiceError {
    fn from(e: std::io::Error) -> Self {
        ServiceError::Io(e.to_string())
    }
}
