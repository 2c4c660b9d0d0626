use std::path::PathBuf;

/// Errors produced by token parsing, persistence, and configuration loading.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// The bytes do not parse as a valid token file. Callers must not
    /// retry with the same bytes; the staged credential is corrupt.
    #[error("malformed token: {0}")]
    MalformedToken(String),

    /// An OS-level failure while persisting or reading a file.
    #[error("io failure on {path}: {source}")]
    IoFailure {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A provider name outside `[a-z0-9_]+`.
    #[error("invalid provider name {0:?} (expected [a-z0-9_]+)")]
    InvalidProviderName(String),

    /// Access-token scopes must be a subset of the refresh-token scopes.
    #[error("access scope {0:?} is not covered by the refresh token scopes")]
    ScopeNotCovered(String),

    /// A line in a config file that is not `KEY = value` or a comment.
    #[error("config syntax error at line {line}: {reason}")]
    ConfigSyntax { line: usize, reason: String },

    /// A provider was partially configured; the named key is missing.
    #[error("provider {provider:?} is missing config key {key}")]
    IncompleteProvider { provider: String, key: String },

    /// A provider endpoint URL that is not an absolute https URL
    /// (http is permitted only when test mode is enabled).
    #[error("provider {provider:?}: {url:?} must be an absolute https url")]
    InsecureUrl { provider: String, url: String },

    /// A provider endpoint URL that does not parse at all.
    #[error("provider {provider:?}: invalid url {url:?}: {reason}")]
    InvalidUrl {
        provider: String,
        url: String,
        reason: String,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::IoFailure {
            path: path.into(),
            source,
        }
    }
}
