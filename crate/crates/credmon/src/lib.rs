//! The credential-manager service.
//!
//! Hosts the user-facing key/consent pages, completes the OAuth
//! authorization-code flow, vaults refresh tokens under the store root,
//! and runs a background refresher that keeps staged `.use` files fresh.
//!
//! Layout of the store root:
//!
//! ```text
//! <store>/
//!   .credmon-requests.json      pending credential requests
//!   <user>/
//!     <provider>.top            vaulted refresh token (service-side only)
//!     <provider>.use            minted access token (staged into sandboxes)
//!     <provider>.failed         marker: refresh was revoked, re-authorize
//! ```

pub mod refresher;
pub mod requests;
pub mod service;
pub mod vault;

use std::time::{SystemTime, UNIX_EPOCH};

pub use refresher::{refresher_tick, RefreshAction, RefreshOutcome};
pub use requests::{CredentialRequest, RequestStatus, ServiceRequest};
pub use service::{spawn, CredmonService, EnsureOutcome, ServeOptions};
pub use vault::CredStoreLayout;

/// Errors surfaced by request creation and the HTTP handlers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unknown provider {0:?}")]
    UnknownProvider(String),

    #[error("scope {scope:?} is not allowed for provider {provider}")]
    ScopeNotAllowed { provider: String, scope: String },

    #[error("invalid user name {0:?}")]
    InvalidUser(String),

    /// A credential-request status may only move forward.
    #[error("invalid status transition {from:?} -> {to:?}")]
    InvalidTransition {
        from: RequestStatus,
        to: RequestStatus,
    },

    #[error(transparent)]
    Token(#[from] token_core::Error),

    #[error(transparent)]
    OAuth(#[from] oauth_flow::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Current Unix time in seconds.
pub fn unix_now() -> i64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .expect("system clock before epoch")
        .as_secs() as i64
}
