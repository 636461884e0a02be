use cuedr_core::pack::Diagnostic;
use cuedr_core::store::StoreError;
use cuedr_core::SchemeError;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("missing or invalid bearer token")]
    Unauthorized,
    #[error("user ids are 1-64 printable characters")]
    InvalidUserId,
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("user already registered")]
    UserExists,
    #[error("unknown user")]
    UnknownUser,
    #[error("key is not part of the alphabet")]
    InvalidSymbol,
    #[error("key does not select the assigned keyword")]
    WrongKey { step: usize },
    #[error("session expired or finished")]
    SessionGone,
    #[error("another request for this session is in flight")]
    SessionBusy,
    #[error("session belongs to the other flow")]
    WrongSessionMode,
    #[error("{entered} of {required} keys entered")]
    NotReady { entered: usize, required: usize },
    #[error("account locked")]
    Locked { retry_after_secs: u64 },
    #[error("too many attempts")]
    RateLimited { retry_after_secs: u64 },
    #[error("authentication failed")]
    AuthenticationFailed { locked: bool },
    #[error("pack rejected")]
    InvalidPack(Vec<Diagnostic>),
    #[error("not found")]
    NotFound,
    #[error("storage full")]
    StorageFull,
    #[error("internal error: {0}")]
    Internal(String),
}

#[derive(Debug, Serialize)]
pub struct ErrorBody {
    pub error: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub retry: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub retry_after_secs: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub locked: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<Vec<Diagnostic>>,
}

impl ServiceError {
    pub fn status(&self) -> u16 {
        use ServiceError::*;
        match self {
            Unauthorized | AuthenticationFailed { .. } => 401,
            InvalidUserId | BadRequest(_) | WrongKey { .. } => 400,
            UnknownUser | NotFound => 404,
            UserExists | SessionBusy | WrongSessionMode | NotReady { .. } => 409,
            SessionGone => 410,
            InvalidSymbol | InvalidPack(_) => 422,
            Locked { .. } => 423,
            RateLimited { .. } => 429,
            Internal(_) => 500,
            StorageFull => 507,
        }
    }

    pub fn code(&self) -> &'static str {
        use ServiceError::*;
        match self {
            Unauthorized => "unauthorized",
            InvalidUserId => "invalid_user_id",
            BadRequest(_) => "bad_request",
            UserExists => "user_exists",
            UnknownUser => "unknown_user",
            InvalidSymbol => "invalid_symbol",
            WrongKey { .. } => "wrong_key",
            SessionGone => "session_gone",
            SessionBusy => "session_busy",
            WrongSessionMode => "wrong_session_mode",
            NotReady { .. } => "not_ready",
            Locked { .. } => "locked",
            RateLimited { .. } => "rate_limited",
            AuthenticationFailed { .. } => "authentication_failed",
            InvalidPack(_) => "invalid_pack",
            NotFound => "not_found",
            StorageFull => "storage_full",
            Internal(_) => "internal",
        }
    }

    pub fn body(&self) -> ErrorBody {
        let mut body = ErrorBody {
            error: self.code(),
            message: match self {
                ServiceError::Internal(_) => "internal error".into(),
                other => other.to_string(),
            },
            step: None,
            retry: None,
            retry_after_secs: None,
            locked: None,
            diagnostics: None,
        };
        match self {
            ServiceError::WrongKey { step } => {
                body.step = Some(*step);
                body.retry = Some(true);
            }
            ServiceError::Locked { retry_after_secs }
            | ServiceError::RateLimited { retry_after_secs } => {
                body.retry_after_secs = Some(*retry_after_secs);
            }
            ServiceError::AuthenticationFailed { locked } => body.locked = Some(*locked),
            ServiceError::InvalidPack(d) => body.diagnostics = Some(d.clone()),
            _ => {}
        }
        body
    }
}

impl From<StoreError> for ServiceError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::StorageFull => ServiceError::StorageFull,
            StoreError::AlreadyExists(_) => ServiceError::UserExists,
            other => ServiceError::Internal(other.to_string()),
        }
    }
}

impl From<SchemeError> for ServiceError {
    fn from(e: SchemeError) -> Self {
        match e {
            SchemeError::InvalidSymbol => ServiceError::InvalidSymbol,
            SchemeError::SessionClosed => ServiceError::SessionGone,
            SchemeError::WrongMode(_) => ServiceError::WrongSessionMode,
            SchemeError::NotReady { entered, required } => {
                ServiceError::NotReady { entered, required }
            }
            SchemeError::LockedOut => ServiceError::Locked {
                retry_after_secs: 0,
            },
            other => ServiceError::Internal(other.to_string()),
        }
    }
}
