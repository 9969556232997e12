use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::{json, Value};

/// An error response: `{"error": message, "detail": ...}`.
#[derive(Debug, Clone)]
pub struct ApiError {
    pub status: StatusCode,
    pub error: String,
    pub detail: Value,
}

impl ApiError {
    pub fn new(status: StatusCode, error: impl Into<String>) -> Self {
        Self {
            status,
            error: error.into(),
            detail: Value::Null,
        }
    }

    pub fn with_detail(mut self, detail: Value) -> Self {
        self.detail = detail;
        self
    }

    pub fn not_found(what: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, format!("unknown {what}"))
    }

    pub fn body(&self) -> Value {
        json!({"error": self.error, "detail": self.detail})
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body())).into_response()
    }
}

/// Status code for an engine error: input problems are 422, anything
/// else is a server fault.
pub fn status_for(err: &chromaflow::Error) -> StatusCode {
    use chromaflow::Error::*;
    match err.root() {
        InvalidImage(_) => StatusCode::BAD_REQUEST,
        EmptyRegion(_)
        | DimensionMismatch { .. }
        | OverlappingRegions { .. }
        | NoCorrespondences
        | UnknownTarget(_)
        | NeighborCountOutOfRange { .. }
        | BetaOutOfRange(_)
        | Unconstrained
        | InvalidConfig(_) => StatusCode::UNPROCESSABLE_ENTITY,
        _ => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl From<chromaflow::Error> for ApiError {
    fn from(err: chromaflow::Error) -> Self {
        let status = status_for(&err);
        let error = match err.root() {
            chromaflow::Error::InvalidImage(_) => "invalid image".to_string(),
            chromaflow::Error::Unconstrained => "unconstrained system".to_string(),
            chromaflow::Error::NoCorrespondences => "no correspondences".to_string(),
            _ => err.root().to_string(),
        };
        ApiError::new(status, error).with_detail(Value::String(err.to_string()))
    }
}
