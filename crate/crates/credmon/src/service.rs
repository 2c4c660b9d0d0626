//! HTTP front end: key/consent pages, login redirects, OAuth callbacks,
//! and the credential-check API used by the job stager.

use std::collections::{BTreeMap, HashMap};
use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use token_core::token::split_scopes;
use token_core::{AccessToken, ProviderConfig, ProviderName, RefreshToken, TokenPair};
use tokio::net::TcpListener;
use tokio::sync::Mutex;
use tokio::task::JoinHandle;
use url::Url;

use crate::requests::{CredentialRequest, RequestStore, ServiceRequest};
use crate::vault::{validate_user, CredStoreLayout};
use crate::{refresher, unix_now, Error, RequestStatus, Result};

/// Service configuration.
#[derive(Debug, Clone)]
pub struct ServeOptions {
    pub providers: BTreeMap<String, ProviderConfig>,
    pub store_root: std::path::PathBuf,
    /// Base of the URLs shown to users (`<public_base>/key/<id>`). In a
    /// deployment this is the https front of the TLS terminator; defaults
    /// to `https://<listen addr>` once the port is known.
    pub public_base: Option<Url>,
    /// Test mode: the OAuth redirect URI uses the plain-http listen
    /// address instead of the public base.
    pub insecure_http: bool,
    /// Seconds before expiry at which the refresher rewrites `.use` files.
    pub refresh_margin: i64,
    pub refresh_interval: Duration,
    /// Listen port on loopback; 0 picks an ephemeral port.
    pub port: u16,
}

impl ServeOptions {
    pub fn new(
        providers: BTreeMap<String, ProviderConfig>,
        store_root: impl Into<std::path::PathBuf>,
    ) -> Self {
        ServeOptions {
            providers,
            store_root: store_root.into(),
            public_base: None,
            insecure_http: false,
            refresh_margin: token_core::DEFAULT_REFRESH_MARGIN_SECS,
            refresh_interval: Duration::from_secs(60),
            port: 0,
        }
    }
}

struct StateBinding {
    key_id: String,
    provider: String,
}

pub struct ServiceState {
    pub(crate) providers: BTreeMap<String, ProviderConfig>,
    pub(crate) layout: CredStoreLayout,
    pub(crate) requests: Mutex<RequestStore>,
    oauth_states: std::sync::Mutex<HashMap<String, StateBinding>>,
    user_locks: std::sync::Mutex<HashMap<String, Arc<Mutex<()>>>>,
    pub(crate) http: reqwest::Client,
    public_base: Url,
    redirect_base: Url,
    pub(crate) refresh_margin: i64,
}

impl ServiceState {
    /// Serializes writes to a single user's vault files.
    pub(crate) fn user_lock(&self, user: &str) -> Arc<Mutex<()>> {
        let mut locks = self.user_locks.lock().unwrap();
        Arc::clone(locks.entry(user.to_string()).or_default())
    }

    fn provider(&self, name: &str) -> Result<&ProviderConfig> {
        self.providers
            .get(name)
            .ok_or_else(|| Error::UnknownProvider(name.to_string()))
    }

    /// Validates and persists a new credential request for `user`.
    pub async fn create_credential_request(
        &self,
        user: &str,
        services: Vec<(String, Vec<String>)>,
    ) -> Result<CredentialRequest> {
        validate_user(user)?;
        let mut requested = Vec::new();
        for (provider, scopes) in services {
            let cfg = self.provider(&provider)?;
            for scope in &scopes {
                if !cfg.allows_scope(scope) {
                    return Err(Error::ScopeNotAllowed {
                        provider: provider.clone(),
                        scope: scope.clone(),
                    });
                }
            }
            requested.push(ServiceRequest {
                provider,
                scopes,
                acquired: false,
            });
        }
        let request = CredentialRequest::new(user, requested, unix_now());
        let mut store = self.requests.lock().await;
        store.put(request.clone())?;
        Ok(request)
    }

    pub fn key_url(&self, key_id: &str) -> String {
        format!("{}/key/{key_id}", base_trimmed(&self.public_base))
    }
}

fn base_trimmed(url: &Url) -> String {
    url.as_str().trim_end_matches('/').to_string()
}

/// A running service handle; tasks abort on drop.
pub struct CredmonService {
    addr: SocketAddr,
    state: Arc<ServiceState>,
    tasks: Vec<JoinHandle<()>>,
}

impl CredmonService {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn state(&self) -> &Arc<ServiceState> {
        &self.state
    }
}

impl Drop for CredmonService {
    fn drop(&mut self) {
        for task in &self.tasks {
            task.abort();
        }
    }
}

/// Binds the listener, starts the HTTP front end and exactly one
/// background refresher task.
pub async fn spawn(options: ServeOptions) -> Result<CredmonService> {
    token_core::files::create_private_dir(&options.store_root)?;
    let listener = TcpListener::bind(("127.0.0.1", options.port))
        .await
        .map_err(|e| token_core::Error::IoFailure {
            path: options.store_root.clone(),
            source: e,
        })?;
    let addr = listener.local_addr().expect("bound listener has an addr");

    let public_base = options.public_base.unwrap_or_else(|| {
        Url::parse(&format!("https://{addr}")).expect("listen addr is a valid url")
    });
    let redirect_base = if options.insecure_http {
        Url::parse(&format!("http://{addr}")).expect("listen addr is a valid url")
    } else {
        public_base.clone()
    };

    let state = Arc::new(ServiceState {
        providers: options.providers,
        layout: CredStoreLayout::new(&options.store_root),
        requests: Mutex::new(RequestStore::load(&options.store_root)?),
        oauth_states: std::sync::Mutex::new(HashMap::new()),
        user_locks: std::sync::Mutex::new(HashMap::new()),
        http: reqwest::Client::new(),
        public_base,
        redirect_base,
        refresh_margin: options.refresh_margin,
    });

    let app = router(Arc::clone(&state));
    let server = tokio::spawn(async move {
        if let Err(err) = axum::serve(listener, app).await {
            tracing::error!("credmon server exited: {err}");
        }
    });
    let refresher = refresher::spawn_refresher(Arc::clone(&state), options.refresh_interval);

    Ok(CredmonService {
        addr,
        state,
        tasks: vec![server, refresher],
    })
}

fn router(state: Arc<ServiceState>) -> Router {
    Router::new()
        .route("/key/{key_id}", get(handle_key_page))
        .route("/login/{provider}", get(handle_login))
        .route("/return/{provider}", get(handle_callback))
        .route("/api/v1/ensure", post(handle_ensure))
        .route("/healthz", get(|| async { "ok" }))
        .with_state(state)
}

fn escape_html(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
        .replace('\'', "&#39;")
}

fn page(title: &str, body: &str) -> Html<String> {
    Html(format!(
        "<!doctype html>\n<html><head><title>{title}</title></head>\n<body>\n{body}\n</body></html>\n"
    ))
}

fn found(location: &str) -> Response {
    (
        StatusCode::FOUND,
        [(axum::http::header::LOCATION, location.to_string())],
    )
        .into_response()
}

fn not_found_page() -> Response {
    (
        StatusCode::NOT_FOUND,
        page("Unknown key", "<h1>Unknown or expired key</h1>"),
    )
        .into_response()
}

/// `GET /key/<key_id>` — the page the credential prompt points users at.
async fn handle_key_page(
    State(state): State<Arc<ServiceState>>,
    Path(key_id): Path<String>,
) -> Response {
    let store = state.requests.lock().await;
    let Some(request) = store.get(&key_id) else {
        return not_found_page();
    };
    if request.is_expired(unix_now()) {
        return not_found_page();
    }
    let user = escape_html(&request.user);
    match request.status {
        RequestStatus::Complete => page(
            "Credentials acquired",
            &format!("<h1>Hello, {user}.</h1>\n<p>All requested credentials are already acquired. You may resubmit your job.</p>"),
        )
        .into_response(),
        RequestStatus::Failed => page(
            "Credential acquisition failed",
            &format!("<h1>Hello, {user}.</h1>\n<p>Credential acquisition failed. Submit your job again to request a new key.</p>"),
        )
        .into_response(),
        RequestStatus::Pending | RequestStatus::AwaitingCallback => {
            let mut items = String::new();
            for service in &request.services {
                let provider = escape_html(&service.provider);
                if service.acquired {
                    items.push_str(&format!("<li>{provider} &mdash; acquired</li>\n"));
                } else {
                    items.push_str(&format!(
                        "<li><a href=\"/login/{provider}?key={key_id}\">Log in to {provider}</a></li>\n"
                    ));
                }
            }
            page(
                "Acquire credentials",
                &format!(
                    "<h1>Hello, {user}.</h1>\n<p>Log in to each service below to store credentials for your jobs:</p>\n<ul>\n{items}</ul>"
                ),
            )
            .into_response()
        }
    }
}

/// `GET /login/<provider>?key=<key_id>` — starts the provider's
/// authorization-code flow and binds the returned state to the key.
async fn handle_login(
    State(state): State<Arc<ServiceState>>,
    Path(provider): Path<String>,
    Query(query): Query<HashMap<String, String>>,
) -> Response {
    let Some(key_id) = query.get("key") else {
        return (StatusCode::BAD_REQUEST, "missing key parameter").into_response();
    };
    let mut store = state.requests.lock().await;
    let Some(request) = store.get_mut(key_id) else {
        return not_found_page();
    };
    if request.is_expired(unix_now()) {
        return not_found_page();
    }
    let Some(service) = request.services.iter().find(|s| s.provider == provider) else {
        return not_found_page();
    };
    if request.status.is_terminal() {
        return found(&format!("/key/{key_id}"));
    }
    let cfg = match state.provider(&provider) {
        Ok(cfg) => cfg,
        Err(_) => return not_found_page(),
    };

    let auth_request =
        oauth_flow::AuthorizeRequest::new(cfg, &state.redirect_base, service.scopes.clone());
    let authorize_url = match oauth_flow::build_authorize_url(cfg, &auth_request) {
        Ok(url) => url,
        Err(err) => {
            return (StatusCode::BAD_REQUEST, err.to_string()).into_response();
        }
    };
    state.oauth_states.lock().unwrap().insert(
        auth_request.state.clone(),
        StateBinding {
            key_id: key_id.clone(),
            provider: provider.clone(),
        },
    );
    if let Err(err) = request.advance(RequestStatus::AwaitingCallback) {
        return (StatusCode::CONFLICT, err.to_string()).into_response();
    }
    if let Err(err) = store.save() {
        return (StatusCode::INTERNAL_SERVER_ERROR, err.to_string()).into_response();
    }
    found(authorize_url.as_str())
}

/// `GET /return/<provider>?code=…&state=…` — the OAuth callback. Validates
/// the state binding, exchanges the code, and vaults the credential pair.
async fn handle_callback(
    State(state): State<Arc<ServiceState>>,
    Path(provider): Path<String>,
    Query(query): Query<HashMap<String, String>>,
) -> Response {
    // CSRF check first; an unknown state leaves every request unmodified.
    let binding = query
        .get("state")
        .and_then(|s| state.oauth_states.lock().unwrap().remove(s));
    let Some(binding) = binding else {
        return (
            StatusCode::FORBIDDEN,
            page("State mismatch", "<h1>State mismatch</h1><p>The callback state is unknown; the request was not modified.</p>"),
        )
            .into_response();
    };
    if binding.provider != provider {
        return (
            StatusCode::FORBIDDEN,
            page(
                "State mismatch",
                "<h1>State mismatch</h1><p>The callback state belongs to a different provider.</p>",
            ),
        )
            .into_response();
    }

    let mut store = state.requests.lock().await;
    let Some(request) = store.get_mut(&binding.key_id) else {
        return not_found_page();
    };
    let user = request.user.clone();

    if let Some(error) = query.get("error") {
        let _ = request.advance(RequestStatus::Failed);
        let _ = store.save();
        return page(
            "Authorization denied",
            &format!(
                "<h1>Authorization denied</h1>\n<p>The provider reported: {}.</p>",
                escape_html(error)
            ),
        )
        .into_response();
    }
    let Some(code) = query.get("code") else {
        return (StatusCode::BAD_REQUEST, "missing code parameter").into_response();
    };
    let cfg = match state.provider(&provider) {
        Ok(cfg) => cfg.clone(),
        Err(err) => return (StatusCode::BAD_REQUEST, err.to_string()).into_response(),
    };

    let redirect_uri = state
        .redirect_base
        .join(&format!("/return/{provider}"))
        .expect("provider names are url-safe");
    let exchanged = oauth_flow::exchange_code(&state.http, &cfg, code, &redirect_uri).await;
    let response = match exchanged {
        Ok(response) => response,
        Err(err) => {
            tracing::warn!("code exchange failed for {user}/{provider}: {err}");
            let _ = request.advance(RequestStatus::Failed);
            let _ = store.save();
            return (
                StatusCode::BAD_GATEWAY,
                page(
                    "Token retrieval failed",
                    "<h1>Token retrieval failed</h1>\n<p>The provider rejected the exchange. Submit your job again to retry.</p>",
                ),
            )
                .into_response();
        }
    };

    let now = unix_now();
    let scopes = split_scopes(&response.scope);
    let vaulted = vault_response(&state, &user, &provider, &response, scopes, now).await;
    if let Err(err) = vaulted {
        tracing::error!("vault write failed for {user}/{provider}: {err}");
        let _ = request.advance(RequestStatus::Failed);
        let _ = store.save();
        return (
            StatusCode::INTERNAL_SERVER_ERROR,
            page("Storage failed", "<h1>Storage failed</h1>"),
        )
            .into_response();
    }

    if let Some(service) = request.services.iter_mut().find(|s| s.provider == provider) {
        service.acquired = true;
    }
    let remaining: Vec<String> = request
        .services
        .iter()
        .filter(|s| !s.acquired)
        .map(|s| s.provider.clone())
        .collect();
    if remaining.is_empty() {
        if let Err(err) = request.advance(RequestStatus::Complete) {
            return (StatusCode::CONFLICT, err.to_string()).into_response();
        }
    }
    if let Err(err) = store.save() {
        return (StatusCode::INTERNAL_SERVER_ERROR, err.to_string()).into_response();
    }

    let body = if remaining.is_empty() {
        format!(
            "<h1>Token retrieved</h1>\n<p>The {} token was retrieved and stored. You may resubmit your job.</p>",
            escape_html(&provider)
        )
    } else {
        format!(
            "<h1>Token retrieved</h1>\n<p>The {} token was retrieved and stored.</p>\n<p><a href=\"/key/{}\">Continue</a> with the remaining services: {}.</p>",
            escape_html(&provider),
            binding.key_id,
            escape_html(&remaining.join(", "))
        )
    };
    page("Token retrieved", &body).into_response()
}

async fn vault_response(
    state: &ServiceState,
    user: &str,
    provider: &str,
    response: &oauth_flow::TokenResponse,
    scopes: Vec<String>,
    now: i64,
) -> Result<()> {
    let refresh_token = response
        .refresh_token
        .as_deref()
        .expect("exchange_code guarantees a refresh token");
    let refresh = RefreshToken::new(refresh_token, now, scopes.clone())?;
    let access = AccessToken::mint(&response.access_token, scopes, response.expires_in, now)?;
    let pair = TokenPair::new(ProviderName::new(provider)?, refresh, access)?;
    let lock = state.user_lock(user);
    let _guard = lock.lock().await;
    state.layout.write_pair(user, &pair)
}

#[derive(Debug, Deserialize)]
pub struct EnsureRequest {
    pub user: String,
    #[serde(default)]
    pub services: Vec<EnsureService>,
}

#[derive(Debug, Deserialize)]
pub struct EnsureService {
    pub provider: String,
    #[serde(default)]
    pub scopes: Vec<String>,
}

/// Outcome of a credential-coverage check.
#[derive(Debug, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum EnsureOutcome {
    /// Every requested (provider, scopes) pair has a live vaulted
    /// credential covering the scopes.
    Ready,
    /// At least one credential is missing or too narrow; the user must
    /// visit the key URL and authorize.
    MustVisit { url: String, key_id: String },
}

/// `POST /api/v1/ensure` — the job stager's entry point. Checks vault
/// coverage and opens a fresh credential request when anything is missing.
async fn handle_ensure(
    State(state): State<Arc<ServiceState>>,
    Json(body): Json<EnsureRequest>,
) -> Response {
    if let Err(err) = validate_user(&body.user) {
        return error_json(StatusCode::BAD_REQUEST, &err);
    }
    for service in &body.services {
        if let Err(err) = state.provider(&service.provider) {
            return error_json(StatusCode::BAD_REQUEST, &err);
        }
    }

    let covered = body.services.iter().all(|service| {
        state
            .layout
            .has_live_credential(&body.user, &service.provider, &service.scopes)
    });
    if covered {
        return Json(EnsureOutcome::Ready).into_response();
    }

    let services = body
        .services
        .into_iter()
        .map(|s| (s.provider, s.scopes))
        .collect();
    match state.create_credential_request(&body.user, services).await {
        Ok(request) => Json(EnsureOutcome::MustVisit {
            url: state.key_url(&request.key_id),
            key_id: request.key_id,
        })
        .into_response(),
        Err(err) => error_json(StatusCode::BAD_REQUEST, &err),
    }
}

fn error_json(status: StatusCode, err: &Error) -> Response {
    (
        status,
        Json(serde_json::json!({ "error": err.to_string() })),
    )
        .into_response()
}
