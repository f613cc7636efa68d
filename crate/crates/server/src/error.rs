use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use guiyun::corpus::CorpusError;
use guiyun::{ExtractionError, GenerationError, LedgerError, ProsodyError};
use serde::Serialize;

/// Machine-readable failure, rendered as `{"error": {"code", "message"}}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ErrorBody {
    pub code: &'static str,
    pub message: String,
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    pub fn bad_request(code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            body: ErrorBody {
                code,
                message: message.into(),
            },
        }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            body: ErrorBody {
                code: "internal",
                message: message.into(),
            },
        }
    }
}

#[derive(Serialize)]
struct Envelope<'a> {
    error: &'a ErrorBody,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status.is_server_error() {
            log::error!("{}: {}", self.body.code, self.body.message);
        }
        (self.status, Json(Envelope { error: &self.body })).into_response()
    }
}

pub fn prosody_code(e: &ProsodyError) -> Option<&'static str> {
    match e {
        ProsodyError::NoTemplate(_) => Some("no_template"),
        ProsodyError::MissingChars(_) => Some("missing_chars"),
        _ => None,
    }
}

impl From<GenerationError> for ApiError {
    fn from(e: GenerationError) -> Self {
        let code = match &e {
            GenerationError::LineLength { .. } => "line_length",
            GenerationError::StyleViolation { .. } => "style_violation",
            GenerationError::InfeasibleConstraints(_) => "infeasible_constraints",
            GenerationError::UnsupportedGenre(_) => "unsupported_genre",
            GenerationError::NoCommonRhymeGroup => "no_common_rhyme_group",
            GenerationError::InvalidPrompt(_) => "invalid_prompt",
            GenerationError::Prosody(ProsodyError::NoTemplate(_)) => "unsupported_genre",
            GenerationError::Prosody(p) => match prosody_code(p) {
                Some(code) => code,
                None => return ApiError::internal(e.to_string()),
            },
            _ => return ApiError::internal(e.to_string()),
        };
        ApiError::bad_request(code, e.to_string())
    }
}

impl From<ExtractionError> for ApiError {
    fn from(e: ExtractionError) -> Self {
        match e {
            ExtractionError::NoCoverage(_) => ApiError::bad_request("no_coverage", e.to_string()),
            _ => ApiError::internal(e.to_string()),
        }
    }
}

impl From<ProsodyError> for ApiError {
    fn from(e: ProsodyError) -> Self {
        match prosody_code(&e) {
            Some(code) => ApiError::bad_request(code, e.to_string()),
            None => ApiError::internal(e.to_string()),
        }
    }
}

impl From<CorpusError> for ApiError {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::EmptyPoem => ApiError::bad_request("empty_poem", e.to_string()),
            _ => ApiError::internal(e.to_string()),
        }
    }
}

impl From<LedgerError> for ApiError {
    fn from(e: LedgerError) -> Self {
        match e {
            LedgerError::EmptyPoem => ApiError::bad_request("empty_poem", e.to_string()),
            _ => ApiError::internal(e.to_string()),
        }
    }
}
