use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;
use vizual_core::notebook::NotebookError;
use vizual_core::rewrite::RewriteError;

/// Error body. `code` is stable and machine-readable; `message` is for
/// people.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub page: Option<String>,
    /// Zero-based statement index within `page`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub statement: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            body: ErrorBody {
                code: code.to_string(),
                message: message.into(),
                page: None,
                statement: None,
            },
        }
    }

    pub fn not_found(code: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, code, message)
    }

    pub fn invalid(code: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, code, message)
    }

    pub fn conflict(code: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, code, message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "INTERNAL", message)
    }
}

impl From<NotebookError> for ApiError {
    fn from(e: NotebookError) -> Self {
        use NotebookError as E;
        let status = match &e {
            E::UnknownBranch(_) | E::UnknownPage(_) => StatusCode::NOT_FOUND,
            E::InvalidSource { .. } | E::OutOfRange { .. } | E::Fixture(_) | E::Gesture { .. } | E::Format(_) => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            E::Rewrite(RewriteError::Incomparable(_)) => StatusCode::UNPROCESSABLE_ENTITY,
            _ => StatusCode::CONFLICT,
        };
        let mut err = ApiError::new(status, e.code(), e.to_string());
        if let E::Exec { page, index, .. } = &e {
            err.body.page = Some(page.clone());
            err.body.statement = *index;
        }
        if let E::Gesture { page, .. } = &e {
            err.body.page = Some(page.clone());
        }
        err
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}
