//! Issued-credential tables and the request log.

use std::collections::{HashMap, HashSet};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::RngCore;

use crate::MockConfig;

/// How long a pre-signed `/dl/<nonce>` URL stays valid.
pub(crate) const DOWNLOAD_NONCE_TTL: Duration = Duration::from_secs(60);

/// One request as the mock saw it, for wire-format assertions in tests.
#[derive(Debug, Clone)]
pub struct RequestLogEntry {
    pub method: String,
    /// Raw request path, percent-encoding preserved.
    pub path: String,
    pub query: Option<String>,
    /// Verbatim Authorization header, if any.
    pub authorization: Option<String>,
}

/// Scope binding carried by a code, access token, or refresh token.
#[derive(Debug, Clone)]
pub struct TokenInfo {
    pub scope: String,
}

pub(crate) struct AccessEntry {
    pub expires_at: Instant,
}

pub(crate) struct NonceEntry {
    pub file_path: String,
    pub expires_at: Instant,
}

pub(crate) struct MockState {
    pub config: MockConfig,
    /// Unused single-use authorization codes → scope binding.
    pub codes: Mutex<HashMap<String, TokenInfo>>,
    /// Live access tokens → scope + expiry.
    pub access_tokens: Mutex<HashMap<String, AccessEntry>>,
    /// Every access token ever issued, in order (for test assertions).
    pub issued_order: Mutex<Vec<String>>,
    /// Live refresh tokens → scope binding. Rotated-away tokens are removed.
    pub refresh_tokens: Mutex<HashMap<String, TokenInfo>>,
    /// Live pre-signed download nonces.
    pub nonces: Mutex<HashMap<String, NonceEntry>>,
    /// Paths whose first download attempt has already been dropped.
    pub dropped_paths: Mutex<HashSet<String>>,
    pub log: Mutex<Vec<RequestLogEntry>>,
}

impl MockState {
    pub fn new(config: MockConfig) -> Self {
        MockState {
            config,
            codes: Mutex::new(HashMap::new()),
            access_tokens: Mutex::new(HashMap::new()),
            issued_order: Mutex::new(Vec::new()),
            refresh_tokens: Mutex::new(HashMap::new()),
            nonces: Mutex::new(HashMap::new()),
            dropped_paths: Mutex::new(HashSet::new()),
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn issue_code(&self, scope: &str) -> String {
        let code = format!("code-{}", random_hex(16));
        self.codes.lock().unwrap().insert(
            code.clone(),
            TokenInfo {
                scope: scope.to_string(),
            },
        );
        code
    }

    /// Consumes a code; `None` if unknown or already used.
    pub fn take_code(&self, code: &str) -> Option<TokenInfo> {
        self.codes.lock().unwrap().remove(code)
    }

    pub fn issue_access_token(&self) -> String {
        let token = format!("at-{}", random_hex(24));
        self.access_tokens.lock().unwrap().insert(
            token.clone(),
            AccessEntry {
                expires_at: Instant::now() + Duration::from_secs(self.config.token_lifetime),
            },
        );
        self.issued_order.lock().unwrap().push(token.clone());
        token
    }

    pub fn issue_refresh_token(&self, scope: &str) -> String {
        let token = format!("rt-{}", random_hex(24));
        self.refresh_tokens.lock().unwrap().insert(
            token.clone(),
            TokenInfo {
                scope: scope.to_string(),
            },
        );
        token
    }

    /// Consumes a live refresh token (the mock rotates on every refresh).
    pub fn take_refresh_token(&self, token: &str) -> Option<TokenInfo> {
        self.refresh_tokens.lock().unwrap().remove(token)
    }

    /// Validates a bearer token: it must have been issued here and be
    /// within its lifetime.
    pub fn access_token_live(&self, token: &str) -> bool {
        match self.access_tokens.lock().unwrap().get(token) {
            Some(entry) => entry.expires_at > Instant::now(),
            None => false,
        }
    }

    pub fn issued_access_token(&self, token: &str) -> bool {
        self.issued_order.lock().unwrap().iter().any(|t| t == token)
    }

    pub fn issued_access_tokens(&self) -> Vec<String> {
        self.issued_order.lock().unwrap().clone()
    }

    pub fn issue_nonce(&self, file_path: &str) -> String {
        let nonce = random_hex(16);
        self.nonces.lock().unwrap().insert(
            nonce.clone(),
            NonceEntry {
                file_path: file_path.to_string(),
                expires_at: Instant::now() + DOWNLOAD_NONCE_TTL,
            },
        );
        nonce
    }

    /// Resolves a nonce to its file path if still valid.
    pub fn resolve_nonce(&self, nonce: &str) -> Option<String> {
        let nonces = self.nonces.lock().unwrap();
        nonces
            .get(nonce)
            .filter(|entry| entry.expires_at > Instant::now())
            .map(|entry| entry.file_path.clone())
    }

    /// True exactly once per path: whether this attempt should be dropped.
    pub fn should_drop(&self, file_path: &str) -> bool {
        if self.config.fault_mode != crate::FaultMode::DropOnce {
            return false;
        }
        self.dropped_paths
            .lock()
            .unwrap()
            .insert(file_path.to_string())
    }

    pub fn record(&self, entry: RequestLogEntry) {
        self.log.lock().unwrap().push(entry);
    }

    pub fn request_log(&self) -> Vec<RequestLogEntry> {
        self.log.lock().unwrap().clone()
    }
}

pub(crate) fn random_hex(bytes: usize) -> String {
    let mut buf = vec![0u8; bytes];
    rand::rng().fill_bytes(&mut buf);
    buf.iter().map(|b| format!("{b:02x}")).collect()
}
