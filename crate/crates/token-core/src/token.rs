//! Access/refresh token types, the `.use`/`.top` JSON formats, and the
//! refresh policy.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Default margin, in seconds, before expiry at which an access token is
/// considered due for refresh. Five minutes comfortably exceeds transfer
/// startup latency.
pub const DEFAULT_REFRESH_MARGIN_SECS: i64 = 300;

const BEARER: &str = "Bearer";

/// A provider name: lowercase alphanumerics and underscores, e.g. `onedrive`.
///
/// Provider names double as file stems (`onedrive.use`, `onedrive.top`) and
/// as config-key prefixes, so the charset is deliberately narrow.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ProviderName(String);

impl ProviderName {
    pub fn new(name: &str) -> Result<Self> {
        if is_valid_provider_name(name) {
            Ok(ProviderName(name.to_string()))
        } else {
            Err(Error::InvalidProviderName(name.to_string()))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ProviderName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl TryFrom<String> for ProviderName {
    type Error = Error;
    fn try_from(value: String) -> Result<Self> {
        ProviderName::new(&value)
    }
}

impl From<ProviderName> for String {
    fn from(value: ProviderName) -> String {
        value.0
    }
}

pub fn is_valid_provider_name(name: &str) -> bool {
    !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
}

/// A minted bearer access token with an absolute expiry.
///
/// Expiry is stored as absolute `expires_at` (Unix seconds) rather than a
/// relative lifetime, so staged files are self-describing; the conversion
/// from `expires_in` happens once, at mint time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccessToken {
    /// The opaque bearer token. Non-empty.
    pub token: String,
    /// Absolute expiry, Unix seconds.
    pub expires_at: i64,
    /// Scopes granted to this token.
    pub scopes: Vec<String>,
}

impl AccessToken {
    /// Mints a token from a provider response, converting the relative
    /// `expires_in` into an absolute expiry. `expires_in` must be positive
    /// so the expiry lands strictly after mint time.
    pub fn mint(token: &str, scopes: Vec<String>, expires_in: i64, now: i64) -> Result<Self> {
        if token.is_empty() {
            return Err(Error::MalformedToken("empty access token".into()));
        }
        if expires_in <= 0 {
            return Err(Error::MalformedToken(format!(
                "non-positive expires_in {expires_in}"
            )));
        }
        Ok(AccessToken {
            token: token.to_string(),
            expires_at: now + expires_in,
            scopes,
        })
    }

    /// The token type. Always `Bearer`; parsing accepts any case and
    /// canonicalizes.
    pub fn token_type(&self) -> &'static str {
        BEARER
    }

    pub fn is_expired(&self, now: i64) -> bool {
        self.expires_at <= now
    }
}

/// A long-lived refresh credential. Lives only in the service-side vault;
/// never serialized into any `.use` file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RefreshToken {
    pub token: String,
    /// When the refresh token was obtained, Unix seconds.
    pub obtained_at: i64,
    pub scopes: Vec<String>,
}

impl RefreshToken {
    pub fn new(token: &str, obtained_at: i64, scopes: Vec<String>) -> Result<Self> {
        if token.is_empty() {
            return Err(Error::MalformedToken("empty refresh token".into()));
        }
        Ok(RefreshToken {
            token: token.to_string(),
            obtained_at,
            scopes,
        })
    }
}

/// One provider's credential pair: the vaulted refresh token plus the
/// currently minted access token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenPair {
    pub provider: ProviderName,
    pub refresh: RefreshToken,
    pub access: AccessToken,
}

impl TokenPair {
    /// The access token's scopes must be covered by the refresh token's
    /// scopes: the mint can only ever narrow, never widen.
    pub fn new(provider: ProviderName, refresh: RefreshToken, access: AccessToken) -> Result<Self> {
        for scope in &access.scopes {
            if !refresh.scopes.contains(scope) {
                return Err(Error::ScopeNotCovered(scope.clone()));
            }
        }
        Ok(TokenPair {
            provider,
            refresh,
            access,
        })
    }
}

/// Wire format of a `.use` file. Exactly these four keys; a refresh token
/// key must never appear here.
#[derive(Serialize, Deserialize)]
struct UseFile {
    access_token: String,
    token_type: String,
    expires_at: i64,
    scope: String,
}

/// Wire format of a `.top` vault file.
#[derive(Serialize, Deserialize)]
struct TopFile {
    refresh_token: String,
    obtained_at: i64,
    scope: String,
}

fn join_scopes(scopes: &[String]) -> String {
    scopes.join(" ")
}

/// Splits a space-joined scope string. The empty string yields no scopes.
pub fn split_scopes(scope: &str) -> Vec<String> {
    scope.split_whitespace().map(str::to_string).collect()
}

/// Serializes an access token into `.use` file bytes: a JSON object with
/// keys exactly `access_token`, `token_type`, `expires_at`, `scope`.
pub fn serialize_use_token(access: &AccessToken) -> Vec<u8> {
    let wire = UseFile {
        access_token: access.token.clone(),
        token_type: BEARER.to_string(),
        expires_at: access.expires_at,
        scope: join_scopes(&access.scopes),
    };
    serde_json::to_vec(&wire).expect("use-file serialization cannot fail")
}

/// Parses `.use` file bytes. Inverse of [`serialize_use_token`]; unknown
/// extra keys are ignored. An expired token parses fine — expiry is the
/// caller's policy, not a format error.
pub fn parse_use_token(bytes: &[u8]) -> Result<AccessToken> {
    let wire: UseFile =
        serde_json::from_slice(bytes).map_err(|e| Error::MalformedToken(e.to_string()))?;
    if wire.access_token.is_empty() {
        return Err(Error::MalformedToken("empty access token".into()));
    }
    if !wire.token_type.eq_ignore_ascii_case(BEARER) {
        return Err(Error::MalformedToken(format!(
            "unsupported token_type {:?}",
            wire.token_type
        )));
    }
    Ok(AccessToken {
        token: wire.access_token,
        expires_at: wire.expires_at,
        scopes: split_scopes(&wire.scope),
    })
}

/// Serializes a refresh token into `.top` vault-file bytes.
pub fn serialize_top_token(refresh: &RefreshToken) -> Vec<u8> {
    let wire = TopFile {
        refresh_token: refresh.token.clone(),
        obtained_at: refresh.obtained_at,
        scope: join_scopes(&refresh.scopes),
    };
    serde_json::to_vec(&wire).expect("top-file serialization cannot fail")
}

/// Parses `.top` vault-file bytes.
pub fn parse_top_token(bytes: &[u8]) -> Result<RefreshToken> {
    let wire: TopFile =
        serde_json::from_slice(bytes).map_err(|e| Error::MalformedToken(e.to_string()))?;
    if wire.refresh_token.is_empty() {
        return Err(Error::MalformedToken("empty refresh token".into()));
    }
    Ok(RefreshToken {
        token: wire.refresh_token,
        obtained_at: wire.obtained_at,
        scopes: split_scopes(&wire.scope),
    })
}

/// True iff the token is due for refresh: `expires_at - now <= margin`.
///
/// Monotone in `now`: once true for a given token and margin, it stays true.
pub fn needs_refresh(access: &AccessToken, now: i64, margin: i64) -> bool {
    debug_assert!(margin >= 0, "refresh margin must be non-negative");
    access.expires_at - now <= margin
}
