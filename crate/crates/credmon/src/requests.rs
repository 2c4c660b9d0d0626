//! Pending credential requests and their persistent store.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Pending requests expire after this long; bounds store growth.
pub const KEY_EXPIRY_SECS: i64 = 24 * 3600;

/// Request lifecycle. Transitions only move forward:
/// pending → awaiting_callback → complete | failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestStatus {
    Pending,
    AwaitingCallback,
    Complete,
    Failed,
}

impl RequestStatus {
    pub fn is_terminal(self) -> bool {
        matches!(self, RequestStatus::Complete | RequestStatus::Failed)
    }

    /// Whether moving from `self` to `next` respects the forward-only
    /// automaton. Staying in place is a no-op, not a violation.
    pub fn can_advance(self, next: RequestStatus) -> bool {
        use RequestStatus::*;
        matches!(
            (self, next),
            (Pending, Pending)
                | (Pending, AwaitingCallback)
                | (AwaitingCallback, AwaitingCallback)
                | (AwaitingCallback, Complete)
                | (AwaitingCallback, Failed)
                | (Complete, Complete)
                | (Failed, Failed)
        )
    }
}

/// One requested (provider, scopes) pair within a credential request.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ServiceRequest {
    pub provider: String,
    pub scopes: Vec<String>,
    /// Set once the provider's callback has vaulted a credential.
    #[serde(default)]
    pub acquired: bool,
}

/// A pending user authorization, keyed by the random key id that forms
/// the `/key/<id>` URL.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CredentialRequest {
    /// 16 random bytes, hex: 32 URL-safe characters.
    pub key_id: String,
    pub user: String,
    pub services: Vec<ServiceRequest>,
    pub created_at: i64,
    pub status: RequestStatus,
}

impl CredentialRequest {
    pub fn new(user: &str, services: Vec<ServiceRequest>, now: i64) -> Self {
        let status = if services.is_empty() {
            // Nothing to acquire.
            RequestStatus::Complete
        } else {
            RequestStatus::Pending
        };
        CredentialRequest {
            key_id: generate_key_id(),
            user: user.to_string(),
            services,
            created_at: now,
            status,
        }
    }

    /// Moves the status forward, rejecting backward transitions.
    pub fn advance(&mut self, next: RequestStatus) -> Result<()> {
        if !self.status.can_advance(next) {
            return Err(Error::InvalidTransition {
                from: self.status,
                to: next,
            });
        }
        self.status = next;
        Ok(())
    }

    pub fn is_expired(&self, now: i64) -> bool {
        now - self.created_at > KEY_EXPIRY_SECS
    }

    pub fn all_acquired(&self) -> bool {
        self.services.iter().all(|s| s.acquired)
    }
}

pub fn generate_key_id() -> String {
    let mut buf = [0u8; 16];
    rand::rng().fill_bytes(&mut buf);
    buf.iter().map(|b| format!("{b:02x}")).collect()
}

/// The request store: a single JSON file under the store root, rewritten
/// atomically on every mutation. Desk-scale by design.
pub struct RequestStore {
    path: PathBuf,
    requests: HashMap<String, CredentialRequest>,
}

impl RequestStore {
    pub fn file_name() -> &'static str {
        ".credmon-requests.json"
    }

    /// Loads the store; a missing file is an empty store.
    pub fn load(store_root: &Path) -> Result<Self> {
        let path = store_root.join(Self::file_name());
        let requests = match std::fs::read(&path) {
            Ok(bytes) => {
                let list: Vec<CredentialRequest> = serde_json::from_slice(&bytes)
                    .map_err(|e| token_core::Error::MalformedToken(e.to_string()))?;
                list.into_iter().map(|r| (r.key_id.clone(), r)).collect()
            }
            Err(err) if err.kind() == std::io::ErrorKind::NotFound => HashMap::new(),
            Err(err) => {
                return Err(Error::Token(token_core::Error::IoFailure {
                    path,
                    source: err,
                }))
            }
        };
        Ok(RequestStore { path, requests })
    }

    pub fn get(&self, key_id: &str) -> Option<&CredentialRequest> {
        self.requests.get(key_id)
    }

    pub fn get_mut(&mut self, key_id: &str) -> Option<&mut CredentialRequest> {
        self.requests.get_mut(key_id)
    }

    /// Inserts or replaces a request and persists the store.
    pub fn put(&mut self, request: CredentialRequest) -> Result<()> {
        self.requests.insert(request.key_id.clone(), request);
        self.save()
    }

    pub fn save(&self) -> Result<()> {
        let mut list: Vec<&CredentialRequest> = self.requests.values().collect();
        list.sort_by(|a, b| a.key_id.cmp(&b.key_id));
        let bytes = serde_json::to_vec_pretty(&list)
            .map_err(|e| token_core::Error::MalformedToken(e.to_string()))?;
        token_core::write_token_file(&self.path, &bytes)?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.requests.len()
    }

    pub fn is_empty(&self) -> bool {
        self.requests.is_empty()
    }
}
