//! OAuth2 authorization-code mechanics.
//!
//! Three pure-protocol operations, shared by the credential service:
//! building the authorize redirect URL, exchanging an authorization code,
//! and refreshing an access token. Every network interaction here is a
//! single request/response; retry policy belongs to callers.

use std::time::Duration;

use rand::RngCore;
use serde::Deserialize;
use token_core::{ProviderConfig, RefreshToken};
use url::Url;

/// The scope a provider requires before it will issue a refresh token.
/// Always appended to authorize requests; the flow depends on receiving one.
pub const OFFLINE_ACCESS_SCOPE: &str = "offline_access";

/// Token-endpoint calls are interactive-flow scale; 30 seconds is generous.
const TOKEN_ENDPOINT_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A requested scope is outside the provider's allowed set — a
    /// submit-file/provider-config mismatch.
    #[error("scope {scope:?} is not allowed for provider {provider}")]
    ScopeNotAllowed { provider: String, scope: String },

    /// Non-2xx from the token endpoint. The body is redacted of secrets.
    #[error("provider rejected the request ({status}): {body}")]
    ProviderRejected { status: u16, body: String },

    /// The token endpoint returned 2xx but the payload does not parse.
    #[error("malformed token response: {0}")]
    MalformedResponse(String),

    /// The code exchange came back without a refresh token even though
    /// offline access was requested.
    #[error("token response is missing the refresh token")]
    MissingRefreshToken,

    /// The request never completed (connect failure, timeout).
    #[error("token endpoint unreachable: {0}")]
    Transport(#[source] reqwest::Error),

    /// The client secret file could not be read.
    #[error("client secret unreadable: {0}")]
    SecretUnreadable(#[source] token_core::Error),
}

/// Parameters for one authorize redirect.
#[derive(Debug, Clone)]
pub struct AuthorizeRequest {
    pub client_id: String,
    /// Where the provider sends the user back; path is `/return/<provider>`.
    pub redirect_uri: Url,
    pub scopes: Vec<String>,
    /// CSRF binding value: at least 16 bytes of entropy, URL-safe.
    pub state: String,
}

impl AuthorizeRequest {
    /// Builds a request for `cfg`, deriving the redirect URI from
    /// `redirect_base` and generating a fresh random state.
    pub fn new(cfg: &ProviderConfig, redirect_base: &Url, scopes: Vec<String>) -> Self {
        let redirect_uri = redirect_base
            .join(&format!("/return/{}", cfg.name))
            .expect("provider names are url-safe");
        AuthorizeRequest {
            client_id: cfg.client_id.clone(),
            redirect_uri,
            scopes,
            state: generate_state(),
        }
    }
}

/// 16 random bytes, hex-encoded: 32 URL-safe characters.
pub fn generate_state() -> String {
    random_hex(16)
}

pub(crate) fn random_hex(bytes: usize) -> String {
    let mut buf = vec![0u8; bytes];
    rand::rng().fill_bytes(&mut buf);
    buf.iter().map(|b| format!("{b:02x}")).collect()
}

/// A token-endpoint response, either from a code exchange or a refresh.
#[derive(Debug, Clone)]
pub struct TokenResponse {
    pub access_token: String,
    /// Present on code exchanges; on refreshes only if the provider
    /// rotates refresh tokens.
    pub refresh_token: Option<String>,
    /// Relative lifetime in seconds; always positive.
    pub expires_in: i64,
    /// Space-joined scope string, passed through verbatim from the provider.
    pub scope: String,
    pub token_type: String,
}

#[derive(Deserialize)]
struct TokenResponseWire {
    access_token: String,
    #[serde(default)]
    refresh_token: Option<String>,
    expires_in: i64,
    #[serde(default)]
    scope: String,
    #[serde(default = "default_token_type")]
    token_type: String,
}

fn default_token_type() -> String {
    "Bearer".to_string()
}

/// Builds the authorize redirect URL for `cfg` and `req`.
///
/// Query parameters: `response_type=code`, `client_id`, `redirect_uri`,
/// `state`, and `scope` — the requested scopes plus the always-appended
/// `offline_access`. Deterministic given its inputs, and carries no secret.
pub fn build_authorize_url(cfg: &ProviderConfig, req: &AuthorizeRequest) -> Result<Url, Error> {
    for scope in &req.scopes {
        if !cfg.allows_scope(scope) {
            return Err(Error::ScopeNotAllowed {
                provider: cfg.name.to_string(),
                scope: scope.clone(),
            });
        }
    }
    let mut scope_value = req.scopes.join(" ");
    if !scope_value.is_empty() {
        scope_value.push(' ');
    }
    scope_value.push_str(OFFLINE_ACCESS_SCOPE);

    let mut url = cfg.authorize_url.clone();
    url.query_pairs_mut()
        .append_pair("response_type", "code")
        .append_pair("client_id", &req.client_id)
        .append_pair("redirect_uri", req.redirect_uri.as_str())
        .append_pair("state", &req.state)
        .append_pair("scope", &scope_value);
    Ok(url)
}

/// Exchanges an authorization code for tokens.
///
/// One POST to the token endpoint with the code, client credentials, and
/// redirect URI. Because `offline_access` is always requested, a missing
/// refresh token in the response is an error.
pub async fn exchange_code(
    http: &reqwest::Client,
    cfg: &ProviderConfig,
    code: &str,
    redirect_uri: &Url,
) -> Result<TokenResponse, Error> {
    let secret = cfg.read_client_secret().map_err(Error::SecretUnreadable)?;
    let form = [
        ("grant_type", "authorization_code"),
        ("code", code),
        ("client_id", &cfg.client_id),
        ("client_secret", &secret),
        ("redirect_uri", redirect_uri.as_str()),
    ];
    let response = post_token_endpoint(http, cfg, &secret, &form).await?;
    if response.refresh_token.is_none() {
        return Err(Error::MissingRefreshToken);
    }
    Ok(response)
}

/// Exchanges a refresh token for a new access token.
///
/// If the provider rotates the refresh token, the new one is surfaced in
/// the response; callers decide whether to persist it.
pub async fn refresh_access_token(
    http: &reqwest::Client,
    cfg: &ProviderConfig,
    refresh: &RefreshToken,
) -> Result<TokenResponse, Error> {
    let secret = cfg.read_client_secret().map_err(Error::SecretUnreadable)?;
    let scope = refresh.scopes.join(" ");
    let form = [
        ("grant_type", "refresh_token"),
        ("refresh_token", &refresh.token),
        ("client_id", &cfg.client_id),
        ("client_secret", &secret),
        // Some providers refuse to refresh when scope is omitted.
        ("scope", &scope),
    ];
    post_token_endpoint(http, cfg, &secret, &form).await
}

async fn post_token_endpoint(
    http: &reqwest::Client,
    cfg: &ProviderConfig,
    secret: &str,
    form: &[(&str, &str)],
) -> Result<TokenResponse, Error> {
    let response = http
        .post(cfg.token_url.clone())
        .timeout(TOKEN_ENDPOINT_TIMEOUT)
        .form(form)
        .send()
        .await
        .map_err(Error::Transport)?;

    let status = response.status();
    let body = response.bytes().await.map_err(Error::Transport)?;
    if !status.is_success() {
        return Err(Error::ProviderRejected {
            status: status.as_u16(),
            body: redact(&String::from_utf8_lossy(&body), secret),
        });
    }
    let wire: TokenResponseWire =
        serde_json::from_slice(&body).map_err(|e| Error::MalformedResponse(e.to_string()))?;
    if wire.access_token.is_empty() {
        return Err(Error::MalformedResponse("empty access_token".into()));
    }
    if wire.expires_in <= 0 {
        return Err(Error::MalformedResponse(format!(
            "non-positive expires_in {}",
            wire.expires_in
        )));
    }
    Ok(TokenResponse {
        access_token: wire.access_token,
        refresh_token: wire.refresh_token,
        expires_in: wire.expires_in,
        scope: wire.scope,
        token_type: wire.token_type,
    })
}

fn redact(body: &str, secret: &str) -> String {
    let mut out = if secret.is_empty() {
        body.to_string()
    } else {
        body.replace(secret, "<redacted>")
    };
    if out.len() > 512 {
        out.truncate(512);
        out.push_str("...");
    }
    out
}
