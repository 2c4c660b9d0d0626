//! HTTP surface: authorize redirect, token endpoint, drive content.

use std::collections::HashMap;
use std::io;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::{Body, Bytes};
use axum::extract::{Query, Request, State};
use axum::http::header::{AUTHORIZATION, CONTENT_LENGTH, CONTENT_TYPE, HOST, LOCATION};
use axum::http::{Method, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Form, Router};
use futures::StreamExt;
use percent_encoding::percent_decode_str;
use serde_json::json;
use tokio::io::AsyncReadExt;

use crate::state::{MockState, RequestLogEntry};
use crate::throttle::TokenBucket;
use crate::FaultMode;

const CONTENT_PREFIX: &str = "/v1.0/me/drive/root:";
const CONTENT_SUFFIX: &str = ":/content";
const UNTHROTTLED_CHUNK: usize = 512 * 1024;

pub(crate) fn router(state: Arc<MockState>) -> Router {
    Router::new()
        .route("/oauth2/v2.0/authorize", get(serve_authorize))
        .route("/oauth2/v2.0/token", post(serve_token))
        .fallback(content_dispatch)
        .layer(middleware::from_fn_with_state(
            Arc::clone(&state),
            log_requests,
        ))
        .with_state(state)
}

async fn log_requests(State(state): State<Arc<MockState>>, req: Request, next: Next) -> Response {
    state.record(RequestLogEntry {
        method: req.method().to_string(),
        path: req.uri().path().to_string(),
        query: req.uri().query().map(str::to_string),
        authorization: req
            .headers()
            .get(AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .map(str::to_string),
    });
    next.run(req).await
}

fn found(location: &str) -> Response {
    (StatusCode::FOUND, [(LOCATION, location.to_string())]).into_response()
}

fn oauth_error(error: &str) -> Response {
    (
        StatusCode::BAD_REQUEST,
        [(CONTENT_TYPE, "application/json")],
        json!({ "error": error }).to_string(),
    )
        .into_response()
}

/// `GET /oauth2/v2.0/authorize` — issues a single-use code bound to the
/// requested scope and redirects back with the caller's state echoed.
async fn serve_authorize(
    State(state): State<Arc<MockState>>,
    Query(params): Query<HashMap<String, String>>,
) -> Response {
    for required in [
        "client_id",
        "redirect_uri",
        "state",
        "response_type",
        "scope",
    ] {
        if !params.contains_key(required) {
            return (
                StatusCode::BAD_REQUEST,
                format!("missing parameter {required}"),
            )
                .into_response();
        }
    }
    if params["response_type"] != "code" {
        return (StatusCode::BAD_REQUEST, "response_type must be code").into_response();
    }
    let mut redirect = match url::Url::parse(&params["redirect_uri"]) {
        Ok(url) => url,
        Err(_) => return (StatusCode::BAD_REQUEST, "bad redirect_uri").into_response(),
    };
    if state.config.fault_mode == FaultMode::DenyConsent {
        redirect
            .query_pairs_mut()
            .append_pair("error", "access_denied")
            .append_pair("state", &params["state"]);
        return found(redirect.as_str());
    }
    let code = state.issue_code(&params["scope"]);
    redirect
        .query_pairs_mut()
        .append_pair("code", &code)
        .append_pair("state", &params["state"]);
    found(redirect.as_str())
}

/// `POST /oauth2/v2.0/token` — code and refresh grants. Codes are single
/// use; refresh tokens rotate on every refresh.
async fn serve_token(
    State(state): State<Arc<MockState>>,
    Form(form): Form<HashMap<String, String>>,
) -> Response {
    if !form.contains_key("client_id") || !form.contains_key("client_secret") {
        return oauth_error("invalid_client");
    }
    match form.get("grant_type").map(String::as_str) {
        Some("authorization_code") => {
            let code = match form.get("code") {
                Some(code) => code,
                None => return oauth_error("invalid_request"),
            };
            let info = match state.take_code(code) {
                Some(info) => info,
                None => return oauth_error("invalid_grant"),
            };
            token_success(&state, &info.scope, true)
        }
        Some("refresh_token") => {
            let token = match form.get("refresh_token") {
                Some(token) => token,
                None => return oauth_error("invalid_request"),
            };
            if state.config.fault_mode == FaultMode::RevokeRefresh {
                return oauth_error("invalid_grant");
            }
            let info = match state.take_refresh_token(token) {
                Some(info) => info,
                None => return oauth_error("invalid_grant"),
            };
            token_success(&state, &info.scope, true)
        }
        _ => oauth_error("unsupported_grant_type"),
    }
}

fn token_success(state: &MockState, scope: &str, with_refresh: bool) -> Response {
    let access = state.issue_access_token();
    let mut body = json!({
        "access_token": access,
        "token_type": "Bearer",
        "expires_in": state.config.token_lifetime,
        "scope": scope,
    });
    if with_refresh && state.config.fault_mode != FaultMode::OmitRefreshToken {
        body["refresh_token"] = json!(state.issue_refresh_token(scope));
    }
    (
        StatusCode::OK,
        [(CONTENT_TYPE, "application/json")],
        body.to_string(),
    )
        .into_response()
}

/// Everything that is not an OAuth endpoint: the drive content template
/// and the pre-signed download URLs.
async fn content_dispatch(State(state): State<Arc<MockState>>, req: Request) -> Response {
    let path = req.uri().path().to_string();
    let authorization = req
        .headers()
        .get(AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .map(str::to_string);

    if let Some(nonce) = path.strip_prefix("/dl/") {
        if req.method() != Method::GET {
            return StatusCode::METHOD_NOT_ALLOWED.into_response();
        }
        // Pre-signed URLs are unauthenticated by construction; a Bearer
        // header here means the client failed to strip auth on redirect.
        if authorization.is_some() {
            return (
                StatusCode::BAD_REQUEST,
                "authorization header not allowed on pre-signed url",
            )
                .into_response();
        }
        let file_path = match state.resolve_nonce(nonce) {
            Some(path) => path,
            None => return StatusCode::NOT_FOUND.into_response(),
        };
        return stream_file(&state, &file_path).await;
    }

    let remote_path = match path
        .strip_prefix(CONTENT_PREFIX)
        .and_then(|rest| rest.strip_suffix(CONTENT_SUFFIX))
    {
        Some(encoded) => match decode_remote_path(encoded) {
            Some(path) => path,
            None => return StatusCode::NOT_FOUND.into_response(),
        },
        None => return StatusCode::NOT_FOUND.into_response(),
    };

    if !bearer_is_live(&state, authorization.as_deref()) {
        return StatusCode::UNAUTHORIZED.into_response();
    }

    match *req.method() {
        Method::GET => {
            let backing = backing_file(&state, &remote_path);
            if !backing.is_file() {
                return StatusCode::NOT_FOUND.into_response();
            }
            if state.config.redirect_downloads {
                let nonce = state.issue_nonce(&remote_path);
                let location = match req.headers().get(HOST).and_then(|v| v.to_str().ok()) {
                    Some(host) => format!("http://{host}/dl/{nonce}"),
                    None => format!("/dl/{nonce}"),
                };
                return found(&location);
            }
            stream_file(&state, &remote_path).await
        }
        Method::PUT => store_file(&state, &remote_path, req).await,
        _ => StatusCode::METHOD_NOT_ALLOWED.into_response(),
    }
}

fn decode_remote_path(encoded: &str) -> Option<String> {
    let decoded = percent_decode_str(encoded).decode_utf8().ok()?;
    if !decoded.starts_with('/') || decoded.split('/').any(|seg| seg == "..") {
        return None;
    }
    Some(decoded.into_owned())
}

fn bearer_is_live(state: &MockState, authorization: Option<&str>) -> bool {
    let Some(value) = authorization else {
        return false;
    };
    let Some((scheme, token)) = value.split_once(' ') else {
        return false;
    };
    scheme.eq_ignore_ascii_case("bearer") && state.access_token_live(token.trim())
}

fn backing_file(state: &MockState, remote_path: &str) -> PathBuf {
    state
        .config
        .backing_dir
        .join(remote_path.trim_start_matches('/'))
}

struct StreamState {
    file: tokio::fs::File,
    bucket: Option<TokenBucket>,
    chunk: usize,
    /// Bytes still to be sent before the stream ends or is cut.
    send_until: u64,
    sent: u64,
    /// When set, the stream errors out at `send_until` instead of ending.
    truncated: bool,
}

async fn stream_file(state: &MockState, remote_path: &str) -> Response {
    let backing = backing_file(state, remote_path);
    let file = match tokio::fs::File::open(&backing).await {
        Ok(file) => file,
        Err(_) => return StatusCode::NOT_FOUND.into_response(),
    };
    let len = match file.metadata().await {
        Ok(meta) => meta.len(),
        Err(_) => return StatusCode::INTERNAL_SERVER_ERROR.into_response(),
    };

    let truncated = state.should_drop(remote_path);
    let bucket = state.config.bandwidth_limit.map(TokenBucket::new);
    let chunk = bucket
        .as_ref()
        .map(TokenBucket::chunk_size)
        .unwrap_or(UNTHROTTLED_CHUNK);
    let stream_state = StreamState {
        file,
        bucket,
        chunk,
        send_until: if truncated { len / 2 } else { len },
        sent: 0,
        truncated,
    };

    let stream = futures::stream::unfold(stream_state, |mut s| async move {
        if s.sent >= s.send_until {
            if s.truncated {
                s.truncated = false;
                return Some((
                    Err(io::Error::new(
                        io::ErrorKind::ConnectionReset,
                        "injected drop",
                    )),
                    s,
                ));
            }
            return None;
        }
        let want = s.chunk.min((s.send_until - s.sent) as usize);
        let mut buf = vec![0u8; want];
        let n = match s.file.read(&mut buf).await {
            Ok(0) => return None,
            Ok(n) => n,
            Err(err) => return Some((Err(err), s)),
        };
        buf.truncate(n);
        if let Some(bucket) = &mut s.bucket {
            bucket.acquire(n).await;
        }
        s.sent += n as u64;
        Some((Ok(Bytes::from(buf)), s))
    });

    Response::builder()
        .status(StatusCode::OK)
        .header(CONTENT_TYPE, "application/octet-stream")
        .header(CONTENT_LENGTH, len)
        .body(Body::from_stream(stream))
        .expect("static response parts are valid")
}

async fn store_file(state: &MockState, remote_path: &str, req: Request) -> Response {
    let backing = backing_file(state, remote_path);
    if let Some(parent) = backing.parent() {
        if tokio::fs::create_dir_all(parent).await.is_err() {
            return StatusCode::INTERNAL_SERVER_ERROR.into_response();
        }
    }
    let mut file = match tokio::fs::File::create(&backing).await {
        Ok(file) => file,
        Err(_) => return StatusCode::INTERNAL_SERVER_ERROR.into_response(),
    };
    let mut body = req.into_body().into_data_stream();
    let mut size: u64 = 0;
    while let Some(chunk) = body.next().await {
        let chunk = match chunk {
            Ok(chunk) => chunk,
            Err(_) => return StatusCode::BAD_REQUEST.into_response(),
        };
        size += chunk.len() as u64;
        if tokio::io::AsyncWriteExt::write_all(&mut file, &chunk)
            .await
            .is_err()
        {
            return StatusCode::INTERNAL_SERVER_ERROR.into_response();
        }
    }
    (
        StatusCode::CREATED,
        [(CONTENT_TYPE, "application/json")],
        json!({ "size": size }).to_string(),
    )
        .into_response()
}
