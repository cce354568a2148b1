use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use featurelens_core::Error;
use serde_json::json;

/// Error response body: `{"code": "...", "message": "..."}`.
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

    pub fn bad_query(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_query", message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", message)
    }
}

fn status_of(e: &Error) -> StatusCode {
    match e {
        Error::Parse(_) | Error::Json(_) | Error::InvalidArgument(_) | Error::Range { .. } => StatusCode::BAD_REQUEST,
        Error::Schema(_) | Error::UnknownColumn(_) | Error::Dimension(_) | Error::Shape { .. } | Error::UnknownElement(_) => {
            StatusCode::UNPROCESSABLE_ENTITY
        }
        Error::DegenerateField(_) | Error::ZeroVariance(_) | Error::InsufficientData(_) => StatusCode::UNPROCESSABLE_ENTITY,
        Error::Compatibility { .. } | Error::Version { .. } => StatusCode::CONFLICT,
        Error::Io { .. } | Error::Write(_) => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError::new(status_of(&e), e.code(), e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "code": self.code, "message": self.message }))).into_response()
    }
}

pub type ApiResult<T> = Result<T, ApiError>;
