//! Token data types and their on-disk formats.
//!
//! Everything the other crates share lives here: the access/refresh token
//! types, the `.use` and `.top` JSON file formats, the expiry/refresh
//! policy, atomic owner-only file writes, and the provider configuration
//! file format.
//!
//! Two file kinds are produced, with a strict split:
//!
//! - `<provider>.use` — the short-lived access token staged into job
//!   sandboxes. Never contains a refresh token.
//! - `<provider>.top` — the long-lived refresh token, kept only in the
//!   credential service's vault.

pub mod config;
pub mod files;
pub mod token;

mod error;

pub use config::{load_provider_config, parse_provider_config, ProviderConfig};
pub use error::Error;
pub use files::write_token_file;
pub use token::{
    needs_refresh, parse_top_token, parse_use_token, serialize_top_token, serialize_use_token,
    AccessToken, ProviderName, RefreshToken, TokenPair, DEFAULT_REFRESH_MARGIN_SECS,
};

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
