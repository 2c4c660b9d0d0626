//! The on-disk credential vault: one directory per user, `.top` and
//! `.use` files per provider, all owner-restricted and written atomically.

use std::path::{Path, PathBuf};

use token_core::{
    files::create_private_dir, parse_top_token, parse_use_token, serialize_top_token,
    serialize_use_token, write_token_file, AccessToken, RefreshToken, TokenPair,
};

use crate::{Error, Result};

/// Vault paths under a store root.
#[derive(Debug, Clone)]
pub struct CredStoreLayout {
    root: PathBuf,
}

impl CredStoreLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        CredStoreLayout { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn user_dir(&self, user: &str) -> Result<PathBuf> {
        validate_user(user)?;
        Ok(self.root.join(user))
    }

    pub fn use_path(&self, user: &str, provider: &str) -> Result<PathBuf> {
        Ok(self.user_dir(user)?.join(format!("{provider}.use")))
    }

    pub fn top_path(&self, user: &str, provider: &str) -> Result<PathBuf> {
        Ok(self.user_dir(user)?.join(format!("{provider}.top")))
    }

    fn failed_path(&self, user: &str, provider: &str) -> Result<PathBuf> {
        Ok(self.user_dir(user)?.join(format!("{provider}.failed")))
    }

    /// Vaults a freshly acquired credential pair: `.top`, then `.use`,
    /// clearing any failure marker from an earlier revocation.
    pub fn write_pair(&self, user: &str, pair: &TokenPair) -> Result<()> {
        let dir = self.user_dir(user)?;
        create_private_dir(&dir)?;
        let provider = pair.provider.as_str();
        write_token_file(
            &self.top_path(user, provider)?,
            &serialize_top_token(&pair.refresh),
        )?;
        write_token_file(
            &self.use_path(user, provider)?,
            &serialize_use_token(&pair.access),
        )?;
        self.clear_failed(user, provider)?;
        Ok(())
    }

    pub fn write_access(&self, user: &str, provider: &str, access: &AccessToken) -> Result<()> {
        write_token_file(
            &self.use_path(user, provider)?,
            &serialize_use_token(access),
        )?;
        Ok(())
    }

    pub fn write_refresh(&self, user: &str, provider: &str, refresh: &RefreshToken) -> Result<()> {
        write_token_file(
            &self.top_path(user, provider)?,
            &serialize_top_token(refresh),
        )?;
        Ok(())
    }

    pub fn read_access(&self, user: &str, provider: &str) -> Result<Option<AccessToken>> {
        let path = self.use_path(user, provider)?;
        match std::fs::read(&path) {
            Ok(bytes) => Ok(Some(parse_use_token(&bytes)?)),
            Err(err) if err.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(err) => Err(Error::Token(token_core::Error::IoFailure {
                path,
                source: err,
            })),
        }
    }

    pub fn read_refresh(&self, user: &str, provider: &str) -> Result<Option<RefreshToken>> {
        let path = self.top_path(user, provider)?;
        match std::fs::read(&path) {
            Ok(bytes) => Ok(Some(parse_top_token(&bytes)?)),
            Err(err) if err.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(err) => Err(Error::Token(token_core::Error::IoFailure {
                path,
                source: err,
            })),
        }
    }

    /// Marks a credential as requiring re-authorization (refresh revoked).
    pub fn mark_failed(&self, user: &str, provider: &str) -> Result<()> {
        write_token_file(&self.failed_path(user, provider)?, b"refresh revoked\n")?;
        Ok(())
    }

    pub fn clear_failed(&self, user: &str, provider: &str) -> Result<()> {
        let path = self.failed_path(user, provider)?;
        match std::fs::remove_file(&path) {
            Ok(()) => Ok(()),
            Err(err) if err.kind() == std::io::ErrorKind::NotFound => Ok(()),
            Err(err) => Err(Error::Token(token_core::Error::IoFailure {
                path,
                source: err,
            })),
        }
    }

    pub fn is_failed(&self, user: &str, provider: &str) -> bool {
        self.failed_path(user, provider)
            .map(|p| p.exists())
            .unwrap_or(false)
    }

    /// A credential is live when a refresh token is vaulted, it has not
    /// been marked as revoked, and its scopes cover the requested set.
    pub fn has_live_credential(&self, user: &str, provider: &str, scopes: &[String]) -> bool {
        if self.is_failed(user, provider) {
            return false;
        }
        match self.read_refresh(user, provider) {
            Ok(Some(refresh)) => scopes.iter().all(|s| refresh.scopes.contains(s)),
            _ => false,
        }
    }

    /// Every (user, provider) with a vaulted refresh token.
    pub fn list_credentials(&self) -> Vec<(String, String)> {
        let mut found = Vec::new();
        let Ok(users) = std::fs::read_dir(&self.root) else {
            return found;
        };
        for user_entry in users.flatten() {
            if !user_entry.path().is_dir() {
                continue;
            }
            let Ok(user) = user_entry.file_name().into_string() else {
                continue;
            };
            if validate_user(&user).is_err() {
                continue;
            }
            let Ok(files) = std::fs::read_dir(user_entry.path()) else {
                continue;
            };
            for file in files.flatten() {
                let name = file.file_name();
                let Some(name) = name.to_str() else { continue };
                if let Some(provider) = name.strip_suffix(".top") {
                    if token_core::token::is_valid_provider_name(provider) {
                        found.push((user.clone(), provider.to_string()));
                    }
                }
            }
        }
        found.sort();
        found
    }
}

/// Usernames become directory names; keep them a safe charset and make
/// path traversal impossible.
pub fn validate_user(user: &str) -> Result<()> {
    let ok = !user.is_empty()
        && user.len() <= 64
        && !user.starts_with('.')
        && user
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-'));
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidUser(user.to_string()))
    }
}
