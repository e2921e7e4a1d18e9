//! JSON error bodies.

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use kgpilot_core::pipeline::{FailureKind, PipelineError, PipelineTrace, Stage};
use serde::{Deserialize, Serialize};

/// Every `code` an [`ApiError`] can carry.
pub const ERROR_CODES: [&str; 9] = [
    "bad_request",
    "empty_query",
    "empty_update",
    "bad_direction",
    "unknown_node",
    "session_busy",
    "integration_failed",
    "pipeline_error",
    "internal",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    #[serde(skip, default = "internal_status")]
    pub status: StatusCode,
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage: Option<Stage>,
    /// Zero-based index of the failed verification query.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index: Option<usize>,
    /// Partial trace of a failed chat run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<Box<PipelineTrace>>,
}

fn internal_status() -> StatusCode {
    StatusCode::INTERNAL_SERVER_ERROR
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        debug_assert!(ERROR_CODES.contains(&code));
        Self {
            status,
            code: code.into(),
            message: message.into(),
            stage: None,
            index: None,
            trace: None,
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }

    pub fn at(mut self, stage: Stage) -> Self {
        self.stage = Some(stage);
        self
    }

    /// A failed chat run: 500 with the stage and the partial trace.
    pub fn from_run(error: &PipelineError, trace: PipelineTrace) -> Self {
        let mut e = Self::new(StatusCode::INTERNAL_SERVER_ERROR, "pipeline_error", error.to_string()).at(error.stage);
        e.trace = Some(Box::new(trace));
        e
    }

    /// A failed update. Model failures are server errors; anything about
    /// the delta itself is unprocessable.
    pub fn from_update(error: &PipelineError) -> Self {
        let mut e = match &error.kind {
            FailureKind::Llm(_) => Self::new(StatusCode::INTERNAL_SERVER_ERROR, "pipeline_error", error.to_string()),
            _ => Self::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "integration_failed",
                error.to_string(),
            ),
        }
        .at(error.stage);
        if let FailureKind::IntegrationFailed { index } = error.kind {
            e.index = Some(index);
        }
        e
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(&self)).into_response()
    }
}
