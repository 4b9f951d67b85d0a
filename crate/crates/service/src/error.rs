use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use openset_core::embed::EmbedError;
use openset_core::head::HeadError;
use openset_core::session::RejectedTransition;
use serde_json::json;

/// Error response: status plus a `{"error": kind, "message": text}` body.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub kind: &'static str,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, kind: &'static str, message: impl Into<String>) -> Self {
        Self { status, kind, message: message.into() }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    pub fn conflict(kind: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, kind, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.kind, "message": self.message }))).into_response()
    }
}

impl From<HeadError> for ApiError {
    fn from(e: HeadError) -> Self {
        let (status, kind) = match &e {
            HeadError::DimensionMismatch { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "dimension_mismatch"),
            HeadError::ExtractorMismatch { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "extractor_mismatch"),
            HeadError::DuplicateClass(_) => (StatusCode::CONFLICT, "duplicate_class"),
            HeadError::EmptyName | HeadError::EmptyPositives | HeadError::InvalidConfig(_) => {
                (StatusCode::UNPROCESSABLE_ENTITY, "invalid_request")
            }
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        Self::new(status, kind, e.to_string())
    }
}

impl From<EmbedError> for ApiError {
    fn from(e: EmbedError) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_image", e.to_string())
    }
}

impl From<RejectedTransition> for ApiError {
    fn from(e: RejectedTransition) -> Self {
        Self::conflict("rejected_transition", e.to_string())
    }
}
