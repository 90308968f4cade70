//! Certificate storage keyed by token.
//!
//! The store is a key/value map with one write rule: a certificate may only
//! be stored under the token derived from its own issuer key and label, and
//! only if it verifies. Anyone can read. Freshness is the reader's problem.

mod closure;
mod counting;
mod delete;
mod safesets;

use std::sync::Arc;

use thiserror::Error;

use crate::cert::{Certificate, Token, VerifyError};

pub use closure::{fetch_closure, fetch_closure_many, fetch_validated, ClosureError, ClosureLimits, ClosureResult, FetchError, SetSource, SkipReason, StoreSource};
pub use counting::CountingStore;
pub use delete::{DeleteRequest, DELETE_WINDOW};
pub use safesets::{SafeSets, StoreConfig, StoreRecord, DEFAULT_MAX_PAYLOAD};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StoreError {
    #[error("certificate belongs under token {computed}, not {claimed}")]
    TokenMismatch { claimed: Token, computed: Token },
    #[error("certificate rejected: {0}")]
    Invalid(#[from] VerifyError),
    #[error("token {0} is held by a different issuer")]
    ForeignOverwrite(Token),
    #[error("payload of {size} bytes exceeds the {limit}-byte limit")]
    PayloadTooLarge { size: usize, limit: usize },
    #[error("no set stored under {0}")]
    NotFound(Token),
    #[error("delete request is not signed by the record's issuer")]
    Unauthorized,
    #[error("delete request timestamp is outside the accepted window or was replayed")]
    StaleRequest,
    #[error("store data is corrupt: {0}")]
    Corrupt(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("transport error: {0}")]
    Transport(String),
    /// A rejection reported by a remote store, carrying the remote's code.
    #[error("store rejected the request ({code}): {message}")]
    Rejected { code: &'static str, message: String },
}

impl StoreError {
    /// Stable machine-readable code. Validation failures report the
    /// underlying verification code.
    pub fn code(&self) -> &'static str {
        match self {
            StoreError::TokenMismatch { .. } => "token_mismatch",
            StoreError::Invalid(v) => v.code(),
            StoreError::ForeignOverwrite(_) => "foreign_overwrite",
            StoreError::PayloadTooLarge { .. } => "payload_too_large",
            StoreError::NotFound(_) => "not_found",
            StoreError::Unauthorized => "unauthorized",
            StoreError::StaleRequest => "stale_request",
            StoreError::Corrupt(_) => "corrupt",
            StoreError::Io(_) => "io",
            StoreError::Transport(_) => "transport",
            StoreError::Rejected { code, .. } => code,
        }
    }

    /// Rebuilds an error from a code and message received over the wire.
    /// Unknown codes map to `transport`.
    pub fn from_code(code: &str, message: String, token: &Token) -> Self {
        match code {
            "not_found" => StoreError::NotFound(*token),
            "unauthorized" => StoreError::Unauthorized,
            "stale_request" => StoreError::StaleRequest,
            "foreign_overwrite" => StoreError::ForeignOverwrite(*token),
            _ => match KNOWN_CODES.iter().find(|c| **c == code) {
                Some(c) => StoreError::Rejected { code: c, message },
                None => StoreError::Transport(format!("{code}: {message}")),
            },
        }
    }
}

/// Every code [`StoreError::code`] can return.
pub const KNOWN_CODES: &[&str] = &[
    "token_mismatch",
    "bad_signature",
    "key_issuer_mismatch",
    "speaker_mismatch",
    "expired",
    "not_yet_valid",
    "decode",
    "foreign_overwrite",
    "payload_too_large",
    "not_found",
    "unauthorized",
    "stale_request",
    "corrupt",
    "io",
    "transport",
];

impl From<std::io::Error> for StoreError {
    fn from(e: std::io::Error) -> Self {
        StoreError::Io(e.to_string())
    }
}

/// Storage interface shared by the in-process store and remote clients.
pub trait CertStore: Send + Sync {
    /// Stores encoded certificate bytes under `token` after the write check.
    fn put(&self, token: &Token, bytes: &[u8]) -> Result<(), StoreError>;
    /// The stored bytes, verbatim.
    fn fetch(&self, token: &Token) -> Result<Vec<u8>, StoreError>;
    fn delete(&self, token: &Token, req: &DeleteRequest) -> Result<(), StoreError>;
}

impl<S: CertStore + ?Sized> CertStore for Arc<S> {
    fn put(&self, token: &Token, bytes: &[u8]) -> Result<(), StoreError> {
        (**self).put(token, bytes)
    }

    fn fetch(&self, token: &Token) -> Result<Vec<u8>, StoreError> {
        (**self).fetch(token)
    }

    fn delete(&self, token: &Token, req: &DeleteRequest) -> Result<(), StoreError> {
        (**self).delete(token, req)
    }
}

impl<S: CertStore + ?Sized> CertStore for &S {
    fn put(&self, token: &Token, bytes: &[u8]) -> Result<(), StoreError> {
        (**self).put(token, bytes)
    }

    fn fetch(&self, token: &Token) -> Result<Vec<u8>, StoreError> {
        (**self).fetch(token)
    }

    fn delete(&self, token: &Token, req: &DeleteRequest) -> Result<(), StoreError> {
        (**self).delete(token, req)
    }
}

/// Posts a certificate under its own token.
pub fn post(store: &dyn CertStore, cert: &Certificate) -> Result<Token, StoreError> {
    let token = cert.token();
    store.put(&token, &crate::cert::encode(cert))?;
    Ok(token)
}
