//! A configurable test double for an OAuth2 cloud-storage provider.
//!
//! Implements the provider's three surfaces — authorize redirect, token
//! endpoint, and drive content endpoint — plus bandwidth throttling and
//! fault injection, so the whole system and the benchmark run offline.
//! Usable both embedded in tests ([`MockProvider::start`]) and as a
//! standalone binary (`mock-provider`).

mod routes;
mod state;
mod throttle;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use tokio::net::TcpListener;
use tokio::task::JoinHandle;

pub use state::{RequestLogEntry, TokenInfo};
pub use throttle::TokenBucket;

/// What kind of failure (if any) the mock injects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum FaultMode {
    /// Behave normally.
    #[default]
    None,
    /// The authorize endpoint redirects back with `error=access_denied`.
    DenyConsent,
    /// Refresh grants are rejected with `invalid_grant`.
    RevokeRefresh,
    /// The first download attempt per path is truncated mid-body.
    DropOnce,
    /// Code exchanges omit the `refresh_token` field.
    OmitRefreshToken,
}

/// Mock behavior knobs.
#[derive(Debug, Clone)]
pub struct MockConfig {
    /// Directory served as the drive root.
    pub backing_dir: PathBuf,
    /// Access-token lifetime in seconds.
    pub token_lifetime: u64,
    /// Bytes per second; `None` means unthrottled.
    pub bandwidth_limit: Option<u64>,
    pub fault_mode: FaultMode,
    /// When true, content GETs respond 302 to a short-lived unauthenticated
    /// `/dl/<nonce>` URL, which rejects any Authorization header.
    pub redirect_downloads: bool,
}

impl MockConfig {
    pub fn new(backing_dir: impl Into<PathBuf>) -> Self {
        MockConfig {
            backing_dir: backing_dir.into(),
            token_lifetime: 3600,
            bandwidth_limit: None,
            fault_mode: FaultMode::None,
            redirect_downloads: true,
        }
    }

    pub fn token_lifetime(mut self, seconds: u64) -> Self {
        self.token_lifetime = seconds;
        self
    }

    pub fn bandwidth_limit(mut self, bytes_per_sec: u64) -> Self {
        assert!(bytes_per_sec > 0, "bandwidth limit must be positive");
        self.bandwidth_limit = Some(bytes_per_sec);
        self
    }

    pub fn fault_mode(mut self, mode: FaultMode) -> Self {
        self.fault_mode = mode;
        self
    }

    pub fn redirect_downloads(mut self, on: bool) -> Self {
        self.redirect_downloads = on;
        self
    }
}

/// A running mock provider bound to a loopback port.
///
/// The server task is aborted when this handle drops.
pub struct MockProvider {
    addr: SocketAddr,
    state: Arc<state::MockState>,
    server: JoinHandle<()>,
}

impl MockProvider {
    /// Starts the mock on an ephemeral loopback port.
    pub async fn start(config: MockConfig) -> std::io::Result<Self> {
        Self::start_on(config, 0).await
    }

    /// Starts the mock on a specific port (0 = ephemeral).
    pub async fn start_on(config: MockConfig, port: u16) -> std::io::Result<Self> {
        let listener = TcpListener::bind(("127.0.0.1", port)).await?;
        let addr = listener.local_addr()?;
        let state = Arc::new(state::MockState::new(config));
        let app = routes::router(Arc::clone(&state));
        let server = tokio::spawn(async move {
            if let Err(err) = axum::serve(listener, app).await {
                tracing::error!("mock provider server exited: {err}");
            }
        });
        Ok(MockProvider {
            addr,
            state,
            server,
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn authorize_url(&self) -> String {
        format!("{}/oauth2/v2.0/authorize", self.base_url())
    }

    pub fn token_url(&self) -> String {
        format!("{}/oauth2/v2.0/token", self.base_url())
    }

    /// Snapshot of every request the mock has served.
    pub fn request_log(&self) -> Vec<RequestLogEntry> {
        self.state.request_log()
    }

    /// True iff the mock's token endpoint issued this access token.
    pub fn issued_access_token(&self, token: &str) -> bool {
        self.state.issued_access_token(token)
    }

    /// Access tokens issued so far, in issuance order.
    pub fn issued_access_tokens(&self) -> Vec<String> {
        self.state.issued_access_tokens()
    }
}

impl Drop for MockProvider {
    fn drop(&mut self) {
        self.server.abort();
    }
}
