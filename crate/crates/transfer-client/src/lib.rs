//! File-transfer client: resolves `provider:///path` sources, reads the
//! staged access token from the credentials directory, and streams file
//! content down (or up) through the provider's drive content endpoint.
//!
//! Designed to run inside job sandboxes: a single static binary, no
//! config files, credentials located via `_CONDOR_CREDS`.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use percent_encoding::{utf8_percent_encode, AsciiSet, NON_ALPHANUMERIC};
use serde::Serialize;
use token_core::AccessToken;
use url::Url;

/// Everything except unreserved characters and the path separator gets
/// percent-encoded into the content-URL template.
const REMOTE_PATH_ENCODE_SET: &AsciiSet = &NON_ALPHANUMERIC
    .remove(b'-')
    .remove(b'.')
    .remove(b'_')
    .remove(b'~')
    .remove(b'/');

/// Default provider API base; override with `GRAPH_API_BASE`.
pub const DEFAULT_API_BASE: &str = "https://graph.microsoft.com";

/// Name of the environment variable pointing at the credentials directory.
pub const CREDS_ENV: &str = "_CONDOR_CREDS";

/// Environment variable overriding the provider API base (tests point
/// this at a mock).
pub const API_BASE_ENV: &str = "GRAPH_API_BASE";

/// Simple uploads go up in one request; larger files are out of scope.
pub const UPLOAD_CAP_BYTES: u64 = 250_000_000;

/// Streaming read/write unit.
const CHUNK_SIZE: usize = 1024 * 1024;

/// Backoff before retry attempts 2, 3, ...
const RETRY_BACKOFF: [Duration; 3] = [
    Duration::from_secs(1),
    Duration::from_secs(2),
    Duration::from_secs(4),
];

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("bad source url: {0}")]
    BadUrl(String),

    #[error("credentials directory missing: {0}")]
    CredsDirMissing(String),

    #[error("token file missing: {0}")]
    TokenFileMissing(PathBuf),

    #[error("malformed token file: {0}")]
    MalformedToken(#[source] token_core::Error),

    /// The staged token is already expired — staging or refresh failed
    /// upstream; retrying locally cannot help.
    #[error("staged token expired at {expires_at} (now {now})")]
    TokenExpired { expires_at: i64, now: i64 },

    /// 401/403 from the provider: stale or insufficient token.
    #[error("authorization rejected by the provider ({status})")]
    AuthRejected { status: u16 },

    #[error("remote file not found")]
    NotFound,

    /// Fewer (or more) bytes arrived than the provider promised.
    #[error("transfer truncated: expected {expected} bytes, got {got}")]
    TransferTruncated { expected: u64, got: u64 },

    #[error("file exceeds the {UPLOAD_CAP_BYTES}-byte simple-upload cap ({0} bytes)")]
    TooLarge(u64),

    #[error("network error: {0}")]
    Network(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Each error class maps to a distinct documented exit code; 0 is
    /// success.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::BadUrl(_) => 2,
            Error::CredsDirMissing(_) => 3,
            Error::TokenFileMissing(_) => 4,
            Error::MalformedToken(_) => 5,
            Error::TokenExpired { .. } => 6,
            Error::AuthRejected { .. } => 7,
            Error::NotFound => 8,
            Error::TransferTruncated { .. } => 9,
            Error::TooLarge(_) => 10,
            Error::Network(_) => 11,
            Error::Io { .. } => 12,
        }
    }

    /// Transient failures that a whole-file restart can fix.
    fn retryable(&self) -> bool {
        matches!(self, Error::Network(_) | Error::TransferTruncated { .. })
    }

    fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Direction {
    #[default]
    Download,
    Upload,
}

/// A parsed transfer: provider, rooted remote path, and the local side.
#[derive(Debug, Clone)]
pub struct TransferSpec {
    pub provider: String,
    pub remote_path: String,
    /// Local destination for downloads; local source for uploads.
    pub local_dest: PathBuf,
    pub direction: Direction,
}

/// Outcome of a completed transfer.
#[derive(Debug, Clone, Serialize)]
pub struct TransferReport {
    pub bytes: u64,
    pub elapsed_s: f64,
    pub final_url: String,
    pub retries: u32,
}

impl TransferReport {
    pub fn mbps(&self) -> f64 {
        if self.elapsed_s > 0.0 {
            self.bytes as f64 * 8.0 / self.elapsed_s / 1e6
        } else {
            0.0
        }
    }
}

/// Splits `<provider>://<path>`. The triple-slash form yields a rooted
/// path; the path must be rooted and free of `..` segments.
pub fn parse_source_url(arg: &str) -> Result<(String, String)> {
    let (provider, path) = arg
        .split_once("://")
        .ok_or_else(|| Error::BadUrl(format!("{arg:?} has no <provider>:// scheme")))?;
    if !token_core::token::is_valid_provider_name(provider) {
        return Err(Error::BadUrl(format!(
            "{provider:?} is not a valid provider name"
        )));
    }
    if path.is_empty() {
        return Err(Error::BadUrl(format!("{arg:?} has an empty remote path")));
    }
    if !path.starts_with('/') {
        return Err(Error::BadUrl(format!(
            "{arg:?}: remote path must be rooted (use {provider}:///...)"
        )));
    }
    if path.split('/').any(|seg| seg == "..") {
        return Err(Error::BadUrl(format!("{arg:?} contains a .. segment")));
    }
    Ok((provider.to_string(), path.to_string()))
}

/// Reads `<creds_dir>/<provider>.use` and rejects tokens that are already
/// expired.
pub fn locate_credentials_in(creds_dir: &Path, provider: &str, now: i64) -> Result<AccessToken> {
    if !creds_dir.is_dir() {
        return Err(Error::CredsDirMissing(creds_dir.display().to_string()));
    }
    let path = creds_dir.join(format!("{provider}.use"));
    let bytes = match std::fs::read(&path) {
        Ok(bytes) => bytes,
        Err(err) if err.kind() == std::io::ErrorKind::NotFound => {
            return Err(Error::TokenFileMissing(path))
        }
        Err(err) => return Err(Error::io(path, err)),
    };
    let token = token_core::parse_use_token(&bytes).map_err(Error::MalformedToken)?;
    if token.is_expired(now) {
        return Err(Error::TokenExpired {
            expires_at: token.expires_at,
            now,
        });
    }
    Ok(token)
}

/// Reads the staged token for `provider` from the directory named by
/// `_CONDOR_CREDS`.
pub fn locate_credentials(provider: &str) -> Result<AccessToken> {
    let dir = std::env::var(CREDS_ENV)
        .map_err(|_| Error::CredsDirMissing(format!("{CREDS_ENV} is not set")))?;
    locate_credentials_in(Path::new(&dir), provider, unix_now())
}

fn unix_now() -> i64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .expect("system clock before epoch")
        .as_secs() as i64
}

/// A description of the content request: GET on the drive content
/// template with a bearer header. Building never fails — an unusable
/// token is the server's to reject.
#[derive(Debug, Clone)]
pub struct ContentRequest {
    pub method: &'static str,
    pub url: Url,
    pub authorization: String,
}

/// Percent-encodes a rooted remote path into the content-URL template
/// `/v1.0/me/drive/root:<path>:/content`.
pub fn content_url(api_base: &Url, remote_path: &str) -> Url {
    let encoded = utf8_percent_encode(remote_path, REMOTE_PATH_ENCODE_SET);
    let raw = format!(
        "{}/v1.0/me/drive/root:{}:/content",
        api_base.as_str().trim_end_matches('/'),
        encoded
    );
    Url::parse(&raw).expect("content template with encoded path is a valid url")
}

pub fn build_content_request(
    token: &AccessToken,
    remote_path: &str,
    api_base: &Url,
) -> ContentRequest {
    ContentRequest {
        method: "GET",
        url: content_url(api_base, remote_path),
        authorization: format!("Bearer {}", token.token),
    }
}

/// Resolves the provider API base from `GRAPH_API_BASE` or the default.
pub fn api_base_from_env() -> Result<Url> {
    let raw = std::env::var(API_BASE_ENV).unwrap_or_else(|_| DEFAULT_API_BASE.to_string());
    Url::parse(&raw).map_err(|e| Error::BadUrl(format!("{API_BASE_ENV}={raw:?}: {e}")))
}

/// Transfer client options.
#[derive(Debug, Clone)]
pub struct ClientOptions {
    pub api_base: Url,
    /// Per-read timeout while streaming; also the connect timeout.
    pub timeout: Duration,
    /// Whole-file attempts; 1 means no retries.
    pub max_attempts: u32,
}

impl ClientOptions {
    pub fn new(api_base: Url) -> Self {
        ClientOptions {
            api_base,
            timeout: Duration::from_secs(30),
            max_attempts: 3,
        }
    }
}

pub struct Client {
    http: reqwest::blocking::Client,
    options: ClientOptions,
}

impl Client {
    pub fn new(options: ClientOptions) -> Result<Self> {
        let http = reqwest::blocking::Client::builder()
            // Redirects are followed by hand so the Authorization header
            // can be stripped before hitting the pre-signed URL.
            .redirect(reqwest::redirect::Policy::none())
            .connect_timeout(options.timeout)
            // In the blocking client this is a per-operation timeout: a
            // stalled read fails, a long steadily-progressing stream does
            // not.
            .timeout(options.timeout)
            .build()
            .map_err(|e| Error::Network(e.to_string()))?;
        Ok(Client { http, options })
    }

    /// Downloads `spec` with whole-file restarts on transient failures.
    pub fn download(&self, spec: &TransferSpec, token: &AccessToken) -> Result<TransferReport> {
        self.with_retries(|| self.download_once(spec, token))
    }

    /// Uploads `spec.local_dest` to the remote path. Files beyond the
    /// simple-upload cap are rejected up front.
    pub fn upload(&self, spec: &TransferSpec, token: &AccessToken) -> Result<TransferReport> {
        let meta =
            std::fs::metadata(&spec.local_dest).map_err(|e| Error::io(&spec.local_dest, e))?;
        if meta.len() > UPLOAD_CAP_BYTES {
            return Err(Error::TooLarge(meta.len()));
        }
        self.with_retries(|| self.upload_once(spec, token, meta.len()))
    }

    fn with_retries(&self, attempt: impl Fn() -> Result<TransferReport>) -> Result<TransferReport> {
        let mut tries = 0;
        loop {
            match attempt() {
                Ok(mut report) => {
                    report.retries = tries;
                    return Ok(report);
                }
                Err(err) if err.retryable() && tries + 1 < self.options.max_attempts.max(1) => {
                    let backoff = RETRY_BACKOFF[(tries as usize).min(RETRY_BACKOFF.len() - 1)];
                    log::warn!(
                        "attempt {} failed ({err}); retrying in {backoff:?}",
                        tries + 1
                    );
                    std::thread::sleep(backoff);
                    tries += 1;
                }
                Err(err) => return Err(err),
            }
        }
    }

    fn download_once(&self, spec: &TransferSpec, token: &AccessToken) -> Result<TransferReport> {
        let started = Instant::now();
        let request = build_content_request(token, &spec.remote_path, &self.options.api_base);

        let first = self
            .http
            .get(request.url.clone())
            .header(reqwest::header::AUTHORIZATION, &request.authorization)
            .send()
            .map_err(|e| Error::Network(e.to_string()))?;

        // Content endpoints 302 to a pre-authorized URL; follow exactly one
        // redirect and do not re-send the Authorization header.
        let (response, final_url) = if first.status().is_redirection() {
            let location = first
                .headers()
                .get(reqwest::header::LOCATION)
                .and_then(|v| v.to_str().ok())
                .ok_or_else(|| Error::Network("redirect without a Location header".into()))?;
            let target = request
                .url
                .join(location)
                .map_err(|e| Error::Network(format!("bad redirect target {location:?}: {e}")))?;
            let followed = self
                .http
                .get(target.clone())
                .send()
                .map_err(|e| Error::Network(e.to_string()))?;
            (followed, target)
        } else {
            let url = first.url().clone();
            (first, url)
        };

        let response = check_status(response)?;
        let expected = response.content_length();

        let dest = resolve_dest(&spec.local_dest, &spec.remote_path)?;
        let parent = dest
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .ok_or_else(|| {
                Error::io(
                    &dest,
                    std::io::Error::new(std::io::ErrorKind::InvalidInput, "no parent directory"),
                )
            })?;
        let mut tmp = tempfile::Builder::new()
            .prefix(".transfer-")
            .tempfile_in(parent)
            .map_err(|e| Error::io(parent, e))?;

        let bytes = stream_to(response, tmp.as_file_mut(), &dest)?;
        if let Some(expected) = expected {
            if bytes != expected {
                return Err(Error::TransferTruncated {
                    expected,
                    got: bytes,
                });
            }
        }
        tmp.persist(&dest).map_err(|e| Error::io(&dest, e.error))?;

        Ok(TransferReport {
            bytes,
            elapsed_s: started.elapsed().as_secs_f64(),
            final_url: final_url.to_string(),
            retries: 0,
        })
    }

    fn upload_once(
        &self,
        spec: &TransferSpec,
        token: &AccessToken,
        len: u64,
    ) -> Result<TransferReport> {
        let started = Instant::now();
        let url = content_url(&self.options.api_base, &spec.remote_path);
        let file =
            std::fs::File::open(&spec.local_dest).map_err(|e| Error::io(&spec.local_dest, e))?;

        let response = self
            .http
            .put(url.clone())
            .header(
                reqwest::header::AUTHORIZATION,
                format!("Bearer {}", token.token),
            )
            .body(reqwest::blocking::Body::sized(file, len))
            .send()
            .map_err(|e| Error::Network(e.to_string()))?;
        check_status(response)?;

        Ok(TransferReport {
            bytes: len,
            elapsed_s: started.elapsed().as_secs_f64(),
            final_url: url.to_string(),
            retries: 0,
        })
    }
}

fn check_status(response: reqwest::blocking::Response) -> Result<reqwest::blocking::Response> {
    let status = response.status();
    match status.as_u16() {
        200 | 201 => Ok(response),
        401 | 403 => Err(Error::AuthRejected {
            status: status.as_u16(),
        }),
        404 => Err(Error::NotFound),
        code => Err(Error::Network(format!("unexpected status {code}"))),
    }
}

/// If the destination is a directory, the remote basename lands inside it.
fn resolve_dest(local_dest: &Path, remote_path: &str) -> Result<PathBuf> {
    let treat_as_dir = local_dest.is_dir();
    if !treat_as_dir {
        return Ok(local_dest.to_path_buf());
    }
    let basename = remote_path
        .rsplit('/')
        .next()
        .filter(|s| !s.is_empty())
        .ok_or_else(|| Error::BadUrl(format!("{remote_path:?} has no basename")))?;
    Ok(local_dest.join(basename))
}

/// Streams a response body into the temp file in 1 MB units.
fn stream_to(
    mut response: reqwest::blocking::Response,
    file: &mut std::fs::File,
    dest: &Path,
) -> Result<u64> {
    use std::io::{Read, Write};
    let mut buf = vec![0u8; CHUNK_SIZE];
    let mut total: u64 = 0;
    loop {
        let n = response
            .read(&mut buf)
            .map_err(|e| Error::Network(e.to_string()))?;
        if n == 0 {
            break;
        }
        file.write_all(&buf[..n]).map_err(|e| Error::io(dest, e))?;
        total += n as u64;
    }
    file.flush().map_err(|e| Error::io(dest, e))?;
    Ok(total)
}
