//! Provider configuration and its key/value config-file format.
//!
//! One provider is described by a block of uppercased keys:
//!
//! ```text
//! ONEDRIVE_CLIENT_ID = 535diaa1-...
//! ONEDRIVE_CLIENT_SECRET_FILE = /etc/onedrive.secret
//! ONEDRIVE_AUTHORIZATION_URL = https://login.microsoftonline.com/common/oauth2/v2.0/authorize
//! ONEDRIVE_TOKEN_URL = https://login.microsoftonline.com/common/oauth2/v2.0/token
//! ```
//!
//! An optional `<PROVIDER>_ALLOWED_SCOPES` key (comma- or space-separated)
//! restricts which scopes may be requested for the provider; when absent,
//! any scope is allowed. Unrelated keys are ignored, so a provider block
//! can live inside a larger shared config file.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use url::Url;

use crate::token::ProviderName;
use crate::{Error, Result};

/// One OAuth provider's client registration and endpoints.
#[derive(Debug, Clone)]
pub struct ProviderConfig {
    pub name: ProviderName,
    pub client_id: String,
    /// The client secret is read from this path at use time; it is never
    /// cached into any serialized artifact.
    pub client_secret_path: PathBuf,
    pub authorize_url: Url,
    pub token_url: Url,
    /// Scopes that may be requested. Empty means unrestricted.
    pub allowed_scopes: Vec<String>,
}

impl ProviderConfig {
    /// True iff `scope` may be requested for this provider.
    pub fn allows_scope(&self, scope: &str) -> bool {
        self.allowed_scopes.is_empty() || self.allowed_scopes.iter().any(|s| s == scope)
    }

    /// Reads the client secret from disk, trimming a trailing newline.
    pub fn read_client_secret(&self) -> Result<String> {
        let raw = fs::read_to_string(&self.client_secret_path)
            .map_err(|e| Error::io(&self.client_secret_path, e))?;
        Ok(raw.trim_end_matches(['\r', '\n']).to_string())
    }
}

const SUFFIX_CLIENT_ID: &str = "_CLIENT_ID";
const SUFFIX_SECRET_FILE: &str = "_CLIENT_SECRET_FILE";
const SUFFIX_AUTHORIZE: &str = "_AUTHORIZATION_URL";
const SUFFIX_TOKEN: &str = "_TOKEN_URL";
const SUFFIX_SCOPES: &str = "_ALLOWED_SCOPES";

#[derive(Default)]
struct PartialProvider {
    client_id: Option<String>,
    secret_file: Option<String>,
    authorize_url: Option<String>,
    token_url: Option<String>,
    allowed_scopes: Option<Vec<String>>,
}

/// Loads and parses a provider config file.
pub fn load_provider_config(
    path: &Path,
    allow_http: bool,
) -> Result<BTreeMap<String, ProviderConfig>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_provider_config(&text, allow_http)
}

/// Parses provider config text. `allow_http` permits plain-http endpoint
/// URLs (for test providers); otherwise endpoints must be https.
pub fn parse_provider_config(
    text: &str,
    allow_http: bool,
) -> Result<BTreeMap<String, ProviderConfig>> {
    let mut partial: BTreeMap<String, PartialProvider> = BTreeMap::new();

    for (idx, raw_line) in text.lines().enumerate() {
        let line = raw_line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::ConfigSyntax {
            line: idx + 1,
            reason: format!("expected KEY = value, got {line:?}"),
        })?;
        let key = key.trim().to_ascii_uppercase();
        let value = value.trim().to_string();

        let (provider, slot) = match strip_known_suffix(&key) {
            Some(split) => split,
            None => continue, // unrelated key, ignored
        };
        let name = provider.to_ascii_lowercase();
        if !crate::token::is_valid_provider_name(&name) {
            return Err(Error::InvalidProviderName(name));
        }
        let entry = partial.entry(name).or_default();
        match slot {
            Slot::ClientId => entry.client_id = Some(value),
            Slot::SecretFile => entry.secret_file = Some(value),
            Slot::AuthorizeUrl => entry.authorize_url = Some(value),
            Slot::TokenUrl => entry.token_url = Some(value),
            Slot::AllowedScopes => entry.allowed_scopes = Some(split_scope_list(&value)),
        }
    }

    let mut providers = BTreeMap::new();
    for (name, entry) in partial {
        let missing = |key: &str| Error::IncompleteProvider {
            provider: name.clone(),
            key: format!("{}{key}", name.to_ascii_uppercase()),
        };
        let config = ProviderConfig {
            name: ProviderName::new(&name)?,
            client_id: entry.client_id.ok_or_else(|| missing(SUFFIX_CLIENT_ID))?,
            client_secret_path: PathBuf::from(
                entry
                    .secret_file
                    .ok_or_else(|| missing(SUFFIX_SECRET_FILE))?,
            ),
            authorize_url: parse_endpoint_url(
                &name,
                &entry
                    .authorize_url
                    .ok_or_else(|| missing(SUFFIX_AUTHORIZE))?,
                allow_http,
            )?,
            token_url: parse_endpoint_url(
                &name,
                &entry.token_url.ok_or_else(|| missing(SUFFIX_TOKEN))?,
                allow_http,
            )?,
            allowed_scopes: entry.allowed_scopes.unwrap_or_default(),
        };
        providers.insert(name, config);
    }
    Ok(providers)
}

enum Slot {
    ClientId,
    SecretFile,
    AuthorizeUrl,
    TokenUrl,
    AllowedScopes,
}

fn strip_known_suffix(key: &str) -> Option<(&str, Slot)> {
    // _CLIENT_SECRET_FILE must be tried before _CLIENT_ID would never match
    // it, but keep the longest-suffix-first order explicit anyway.
    for (suffix, slot) in [
        (SUFFIX_SECRET_FILE, Slot::SecretFile),
        (SUFFIX_CLIENT_ID, Slot::ClientId),
        (SUFFIX_AUTHORIZE, Slot::AuthorizeUrl),
        (SUFFIX_TOKEN, Slot::TokenUrl),
        (SUFFIX_SCOPES, Slot::AllowedScopes),
    ] {
        if let Some(prefix) = key.strip_suffix(suffix) {
            if !prefix.is_empty() {
                return Some((prefix, slot));
            }
        }
    }
    None
}

fn split_scope_list(value: &str) -> Vec<String> {
    value
        .split([',', ' ', '\t'])
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

fn parse_endpoint_url(provider: &str, raw: &str, allow_http: bool) -> Result<Url> {
    let url = Url::parse(raw).map_err(|e| Error::InvalidUrl {
        provider: provider.to_string(),
        url: raw.to_string(),
        reason: e.to_string(),
    })?;
    match url.scheme() {
        "https" => Ok(url),
        "http" if allow_http => Ok(url),
        _ => Err(Error::InsecureUrl {
            provider: provider.to_string(),
            url: raw.to_string(),
        }),
    }
}
