//! The scheduler's side of credential handling: parse a submit-description
//! file, make sure credentials exist (prompting the user to visit the key
//! URL when they do not), and stage `.use` files into a job sandbox.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Serialize;

/// Key listing the OAuth services a job needs, comma-separated.
const SERVICES_KEY: &str = "use_oauth_services";

/// Per-service scopes live under `<provider>_oauth_permissions`.
const PERMISSIONS_SUFFIX: &str = "_oauth_permissions";

/// Name of the staged credentials directory inside a sandbox.
pub const SANDBOX_CREDS_DIR: &str = ".condor_creds";

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("submit file parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("credential service unreachable at {url}: {reason}")]
    CredmonUnreachable { url: String, reason: String },

    #[error("credential service rejected the request ({status}): {body}")]
    CredmonRejected { status: u16, body: String },

    #[error("no staged credential for {provider:?} under {store}")]
    MissingCredential { provider: String, store: PathBuf },

    #[error("staged credential for {provider:?} is expired or unreadable: {reason}")]
    StaleCredential { provider: String, reason: String },

    #[error("staging failed: {0}")]
    StagingFailed(#[from] token_core::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// A parsed submit-description file. Unrelated keys are preserved but
/// ignored; `queue` statements are recognized and skipped.
#[derive(Debug, Clone, Default)]
pub struct SubmitDescription {
    /// Every `key = value` entry, keys lowercased, in file order.
    pub entries: Vec<(String, String)>,
    /// Providers from `use_oauth_services`, lowercased, in order.
    pub oauth_services: Vec<String>,
    /// Requested scopes per provider. Every provider in `oauth_services`
    /// has an entry; an empty list means provider defaults.
    pub permissions: BTreeMap<String, Vec<String>>,
}

impl SubmitDescription {
    /// (provider, scopes) pairs in submit-file order.
    pub fn services(&self) -> Vec<(String, Vec<String>)> {
        self.oauth_services
            .iter()
            .map(|p| {
                (
                    p.clone(),
                    self.permissions.get(p).cloned().unwrap_or_default(),
                )
            })
            .collect()
    }
}

/// Parses submit-description text: case-insensitive `key = value` lines,
/// `#` comments, blank lines, and bare `queue` statements.
pub fn parse_submit_description(text: &str) -> Result<SubmitDescription> {
    let mut desc = SubmitDescription::default();

    for (idx, raw_line) in text.lines().enumerate() {
        let line = raw_line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        // `queue` (optionally with a count or slice) ends a job block;
        // job execution is out of scope here.
        let first_word = line.split_whitespace().next().unwrap_or_default();
        if first_word.eq_ignore_ascii_case("queue") {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: idx + 1,
            reason: format!("expected key = value, got {line:?}"),
        })?;
        let key = key.trim().to_ascii_lowercase();
        let value = value.trim().to_string();
        if key.is_empty() {
            return Err(Error::Parse {
                line: idx + 1,
                reason: "empty key".into(),
            });
        }
        desc.entries.push((key, value));
    }

    for (key, value) in &desc.entries {
        if key == SERVICES_KEY {
            desc.oauth_services = value
                .split(',')
                .map(|s| s.trim().to_ascii_lowercase())
                .filter(|s| !s.is_empty())
                .collect();
        }
    }
    for (key, value) in &desc.entries {
        if let Some(provider) = key.strip_suffix(PERMISSIONS_SUFFIX) {
            // Scopes may be comma- or space-separated.
            let scopes: Vec<String> = value
                .split([',', ' ', '\t'])
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(str::to_string)
                .collect();
            desc.permissions.insert(provider.to_string(), scopes);
        }
    }
    // Every requested provider gets a permissions entry, defaulting empty.
    for provider in &desc.oauth_services {
        desc.permissions.entry(provider.clone()).or_default();
    }
    Ok(desc)
}

/// Result of a credential check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EnsureOutcome {
    /// Every requested credential is vaulted with covering scopes.
    Ready,
    /// The user must visit the key URL and authorize, then resubmit.
    MustVisit { url: String },
}

#[derive(Serialize)]
struct EnsureRequestWire<'a> {
    user: &'a str,
    services: Vec<EnsureServiceWire<'a>>,
}

#[derive(Serialize)]
struct EnsureServiceWire<'a> {
    provider: &'a str,
    scopes: &'a [String],
}

/// Asks the credential service whether every requested (provider, scopes)
/// pair is covered, opening a credential request when it is not.
///
/// Jobs with no OAuth services are trivially ready without any network
/// round trip.
pub fn ensure_credentials(
    credmon_url: &str,
    desc: &SubmitDescription,
    user: &str,
) -> Result<EnsureOutcome> {
    if desc.oauth_services.is_empty() {
        return Ok(EnsureOutcome::Ready);
    }
    let services = desc.services();
    let body = EnsureRequestWire {
        user,
        services: services
            .iter()
            .map(|(provider, scopes)| EnsureServiceWire {
                provider,
                scopes: scopes.as_slice(),
            })
            .collect(),
    };

    let endpoint = format!("{}/api/v1/ensure", credmon_url.trim_end_matches('/'));
    let client = reqwest::blocking::Client::builder()
        .timeout(Duration::from_secs(10))
        .build()
        .map_err(|e| Error::CredmonUnreachable {
            url: endpoint.clone(),
            reason: e.to_string(),
        })?;
    let response =
        client
            .post(&endpoint)
            .json(&body)
            .send()
            .map_err(|e| Error::CredmonUnreachable {
                url: endpoint.clone(),
                reason: e.to_string(),
            })?;

    let status = response.status();
    let text = response.text().unwrap_or_default();
    if !status.is_success() {
        return Err(Error::CredmonRejected {
            status: status.as_u16(),
            body: text,
        });
    }
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::CredmonRejected {
            status: status.as_u16(),
            body: format!("unparseable response: {e}"),
        })?;
    match value["status"].as_str() {
        Some("ready") => Ok(EnsureOutcome::Ready),
        Some("must_visit") => Ok(EnsureOutcome::MustVisit {
            url: value["url"].as_str().unwrap_or_default().to_string(),
        }),
        other => Err(Error::CredmonRejected {
            status: status.as_u16(),
            body: format!("unexpected status {other:?}"),
        }),
    }
}

/// Stages `.use` files for every requested service into
/// `<sandbox_dir>/.condor_creds/`, owner-restricted. Only `.use` files are
/// staged — vault `.top` files never leave the store. Returns the path to
/// export as `_CONDOR_CREDS`.
///
/// Idempotent: re-staging overwrites with equivalent content and
/// permissions.
pub fn stage_sandbox(
    store_root: &Path,
    desc: &SubmitDescription,
    user: &str,
    sandbox_dir: &Path,
) -> Result<PathBuf> {
    let creds_dir = sandbox_dir.join(SANDBOX_CREDS_DIR);
    token_core::files::create_private_dir(&creds_dir)?;

    let now = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .expect("system clock before epoch")
        .as_secs() as i64;

    for provider in &desc.oauth_services {
        let source = store_root.join(user).join(format!("{provider}.use"));
        let bytes = match std::fs::read(&source) {
            Ok(bytes) => bytes,
            Err(err) if err.kind() == std::io::ErrorKind::NotFound => {
                return Err(Error::MissingCredential {
                    provider: provider.clone(),
                    store: store_root.to_path_buf(),
                })
            }
            Err(err) => {
                return Err(Error::StagingFailed(token_core::Error::IoFailure {
                    path: source,
                    source: err,
                }))
            }
        };
        // A token that does not parse or is already expired means the
        // refresher upstream is broken; staging it would only move the
        // failure into the job.
        let token = token_core::parse_use_token(&bytes).map_err(|e| Error::StaleCredential {
            provider: provider.clone(),
            reason: e.to_string(),
        })?;
        if token.is_expired(now) {
            return Err(Error::StaleCredential {
                provider: provider.clone(),
                reason: format!("expired at {}", token.expires_at),
            });
        }
        token_core::write_token_file(&creds_dir.join(format!("{provider}.use")), &bytes)?;
    }
    Ok(creds_dir)
}
