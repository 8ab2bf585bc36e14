// SPDX-License-Identifier: MIT OR Apache-2.0

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Every failure the API can report. Each maps to one HTTP status.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    InvalidRequest,
    InvalidSteering,
    UnknownSample,
    UnknownClassSet,
    UnknownSession,
    UnknownClass,
    UnknownComponent,
    UnknownEvalSet,
    UnlabeledEvalSet,
    UnknownLabel,
    ZeroNormEmbedding,
    NotFound,
    PathTraversal,
    Internal,
}

impl ErrorCode {
    pub fn status(self) -> StatusCode {
        match self {
            Self::InvalidRequest | Self::InvalidSteering | Self::UnknownComponent => {
                StatusCode::BAD_REQUEST
            }
            Self::PathTraversal => StatusCode::FORBIDDEN,
            Self::UnknownSample
            | Self::UnknownClassSet
            | Self::UnknownSession
            | Self::UnknownClass
            | Self::UnknownEvalSet
            | Self::NotFound => StatusCode::NOT_FOUND,
            Self::UnlabeledEvalSet | Self::UnknownLabel | Self::ZeroNormEmbedding => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            Self::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: ErrorCode,
    pub message: String,
}

impl ApiError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:?}: {}", self.code, self.message)
    }
}

impl std::error::Error for ApiError {}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::InvalidSteering(_) => ErrorCode::InvalidSteering,
            Error::UnknownComponent { .. } => ErrorCode::UnknownComponent,
            Error::UnknownClass(_) => ErrorCode::UnknownClass,
            Error::UnlabeledEvalSet => ErrorCode::UnlabeledEvalSet,
            Error::UnknownLabel(_) => ErrorCode::UnknownLabel,
            Error::ZeroNormEmbedding(_) => ErrorCode::ZeroNormEmbedding,
            Error::InvalidGrid(_) | Error::InvalidArgument(_) | Error::DimMismatch { .. } => {
                ErrorCode::InvalidRequest
            }
            _ => ErrorCode::Internal,
        };
        Self::new(code, e.to_string())
    }
}

#[derive(Serialize)]
struct Envelope<'a> {
    error: &'a ApiError,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.code.status(), Json(Envelope { error: &self })).into_response()
    }
}
