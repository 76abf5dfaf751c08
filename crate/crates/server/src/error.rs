use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use kcat_core::analytics::AnalyticsError;
use kcat_core::linker::LinkError;
use kcat_core::SessionError;
use serde_json::json;

use crate::store::StoreError;

/// An error response: `{"error": <code>, "message": <text>}`.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "BadRequest", message)
    }

    pub fn unknown_session(id: &str) -> Self {
        Self::new(
            StatusCode::NOT_FOUND,
            "UnknownSession",
            format!("unknown session `{id}`"),
        )
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status.is_server_error() {
            tracing::error!(code = self.code, "{}", self.message);
        }
        (
            self.status,
            Json(json!({"error": self.code, "message": self.message})),
        )
            .into_response()
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let status = match &e {
            SessionError::UnknownDoc(_) | SessionError::UnknownMention(_) => StatusCode::NOT_FOUND,
            SessionError::UnknownType(_)
            | SessionError::UnknownFormat(_)
            | SessionError::Import(_) => StatusCode::BAD_REQUEST,
            SessionError::NotInChain { .. }
            | SessionError::NotOffered(_)
            | SessionError::NotACandidate(_)
            | SessionError::NoPrediction(_)
            | SessionError::EmptyHistory => StatusCode::CONFLICT,
            SessionError::Log(_) | SessionError::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError::new(status, e.code(), e.to_string())
    }
}

impl From<AnalyticsError> for ApiError {
    fn from(e: AnalyticsError) -> Self {
        let (status, code) = match &e {
            AnalyticsError::NoOverlap(..) => (StatusCode::CONFLICT, "NoOverlap"),
            AnalyticsError::TooFewAnnotators(_) => (StatusCode::BAD_REQUEST, "TooFewAnnotators"),
            AnalyticsError::UnknownType(_) => (StatusCode::BAD_REQUEST, "UnknownType"),
            AnalyticsError::UnknownMention(_) => (StatusCode::NOT_FOUND, "UnknownMention"),
            AnalyticsError::Conflict { .. } => (StatusCode::CONFLICT, "Conflict"),
            AnalyticsError::MixedAnnotators(..) => (StatusCode::BAD_REQUEST, "MixedAnnotators"),
        };
        ApiError::new(status, code, e.to_string())
    }
}

impl From<LinkError> for ApiError {
    fn from(e: LinkError) -> Self {
        match e {
            LinkError::EmptyInput => ApiError::new(
                StatusCode::CONFLICT,
                "EmptyCorpus",
                "the corpus has no mentions",
            ),
            other => ApiError::internal(other.to_string()),
        }
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        ApiError::new(
            StatusCode::INTERNAL_SERVER_ERROR,
            "StorageError",
            e.to_string(),
        )
    }
}
