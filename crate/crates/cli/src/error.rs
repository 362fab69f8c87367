//! Application errors carrying the exit-code taxonomy: 1 usage/config,
//! 2 data, 3 backend/transport, 4 verification failure.

use ccshap_core::ccshap::AuditError;
use ccshap_core::scoring::ScoreError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Backend,
    Verification,
}

#[derive(Debug)]
pub struct AppError {
    kind: ErrorKind,
    message: String,
}

impl AppError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { kind: ErrorKind::Usage, message: message.into() }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self { kind: ErrorKind::Data, message: message.into() }
    }

    pub fn data_from(error: impl std::fmt::Display) -> Self {
        Self::data(error.to_string())
    }

    pub fn backend(message: impl Into<String>) -> Self {
        Self { kind: ErrorKind::Backend, message: message.into() }
    }

    pub fn verification(message: impl Into<String>) -> Self {
        Self { kind: ErrorKind::Verification, message: message.into() }
    }

    pub fn kind(&self) -> ErrorKind {
        self.kind
    }

    pub fn exit_code(&self) -> u8 {
        match self.kind {
            ErrorKind::Usage => 1,
            ErrorKind::Data => 2,
            ErrorKind::Backend => 3,
            ErrorKind::Verification => 4,
        }
    }
}

impl std::fmt::Display for AppError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for AppError {}

impl From<crate::config::ConfigError> for AppError {
    fn from(e: crate::config::ConfigError) -> Self {
        Self::usage(e.to_string())
    }
}

impl From<crate::ingest::IngestError> for AppError {
    fn from(e: crate::ingest::IngestError) -> Self {
        Self::data(e.to_string())
    }
}

impl From<crate::report::ReportError> for AppError {
    fn from(e: crate::report::ReportError) -> Self {
        Self::data(e.to_string())
    }
}

impl From<crate::backend::CheckpointError> for AppError {
    fn from(e: crate::backend::CheckpointError) -> Self {
        Self::data(e.to_string())
    }
}

impl From<crate::cache::CacheError> for AppError {
    fn from(e: crate::cache::CacheError) -> Self {
        Self::data(e.to_string())
    }
}

impl From<crate::backend::BackendError> for AppError {
    fn from(e: crate::backend::BackendError) -> Self {
        match &e {
            crate::backend::BackendError::Checkpoint(_) => Self::data(e.to_string()),
            crate::backend::BackendError::Remote(_) => Self::backend(e.to_string()),
        }
    }
}

impl From<crate::remote::RemoteError> for AppError {
    fn from(e: crate::remote::RemoteError) -> Self {
        match &e {
            crate::remote::RemoteError::Config(_) => Self::usage(e.to_string()),
            _ => Self::backend(e.to_string()),
        }
    }
}

impl From<AuditError> for AppError {
    fn from(e: AuditError) -> Self {
        match &e {
            AuditError::Backend(ScoreError::Transport(_)) | AuditError::Backend(ScoreError::Backend(_)) => {
                Self::backend(e.to_string())
            }
            _ => Self::data(e.to_string()),
        }
    }
}
