use thiserror::Error;

use crate::portfolio::PortfolioId;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SchemeError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("portfolio `{portfolio}` is invalid: {reason}")]
    InvalidPortfolio {
        portfolio: PortfolioId,
        reason: String,
    },
    #[error("{available} portfolios available but the sequence needs {required}")]
    InsufficientPortfolios { available: usize, required: usize },
    #[error("every portfolio has already been visited")]
    Exhausted,
    #[error("unknown portfolio `{0}`")]
    UnknownPortfolio(PortfolioId),
    #[error("no feedback key with version {0}")]
    UnknownKeyVersion(u32),
    #[error("symbol is not part of the key alphabet")]
    InvalidSymbol,
    #[error("session is closed")]
    SessionClosed,
    #[error("operation does not apply to a {0} session")]
    WrongMode(&'static str),
    #[error("{entered} of {required} entries recorded")]
    NotReady { entered: usize, required: usize },
    #[error("account is locked")]
    LockedOut,
    #[error("credential record belongs to another user")]
    RecordMismatch,
    #[error(transparent)]
    Credential(#[from] CredentialError),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CredentialError {
    #[error("keyword contains the reserved separator character")]
    SeparatorInKeyword,
    #[error("KDF parameters below the configured floor: {0}")]
    WeakParams(String),
    #[error("KDF failure: {0}")]
    Kdf(String),
}
