//! Timed trials: spawn the transfer client twice per file and wall-clock
//! each whole process invocation (token read and connection setup count —
//! the measurement is end-user transfer experience).

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use sha2::{Digest, Sha256};

use crate::analytics::{speed_mbps, BenchResult, Pass};

#[derive(Debug, thiserror::Error)]
pub enum TrialError {
    #[error("credential staging against the mock failed: {0}")]
    Staging(String),

    #[error("transfer client exited with {status:?}: {stderr}")]
    ClientFailed { status: Option<i32>, stderr: String },

    #[error("downloaded file does not match the fixture ({file})")]
    ChecksumMismatch { file: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Analytics(#[from] crate::analytics::AnalyticsError),
}

/// Everything one double-download trial needs.
#[derive(Debug, Clone)]
pub struct TrialOptions {
    pub site: String,
    pub method: String,
    pub file_name: String,
    pub size: u64,
    /// Mock provider base URL (becomes `GRAPH_API_BASE`).
    pub api_base: String,
    /// Directory holding the staged `.use` file (becomes `_CONDOR_CREDS`).
    pub creds_dir: PathBuf,
    /// Path to the transfer client binary.
    pub client_bin: PathBuf,
    /// Where downloads land; wiped between passes.
    pub download_dir: PathBuf,
    /// Expected SHA-256 of the fixture, for verification.
    pub expected_sha256: [u8; 32],
}

/// Acquires an access token through the mock's own authorize + token
/// endpoints (never a side door) and stages it as `onedrive.use` in a
/// fresh directory. Must not be called from async context.
pub fn stage_mock_credentials(api_base: &str) -> Result<tempfile::TempDir, TrialError> {
    let http = reqwest::blocking::Client::builder()
        .redirect(reqwest::redirect::Policy::none())
        .build()
        .map_err(|e| TrialError::Staging(e.to_string()))?;

    let authorize = http
        .get(format!("{api_base}/oauth2/v2.0/authorize"))
        .query(&[
            ("response_type", "code"),
            ("client_id", "bench"),
            ("redirect_uri", "http://127.0.0.1:1/cb"),
            ("state", "bench-state"),
            ("scope", "Files.ReadWrite.All offline_access"),
        ])
        .send()
        .map_err(|e| TrialError::Staging(e.to_string()))?;
    let location = authorize
        .headers()
        .get(reqwest::header::LOCATION)
        .and_then(|v| v.to_str().ok())
        .ok_or_else(|| TrialError::Staging("authorize did not redirect".into()))?;
    let url = url::Url::parse(location).map_err(|e| TrialError::Staging(e.to_string()))?;
    let code = url
        .query_pairs()
        .find(|(k, _)| k == "code")
        .map(|(_, v)| v.into_owned())
        .ok_or_else(|| TrialError::Staging("authorize redirect carried no code".into()))?;

    let token: serde_json::Value = http
        .post(format!("{api_base}/oauth2/v2.0/token"))
        .form(&[
            ("grant_type", "authorization_code"),
            ("code", &code),
            ("client_id", "bench"),
            ("client_secret", "bench-secret"),
        ])
        .send()
        .map_err(|e| TrialError::Staging(e.to_string()))?
        .json()
        .map_err(|e| TrialError::Staging(e.to_string()))?;
    let access = token["access_token"]
        .as_str()
        .ok_or_else(|| TrialError::Staging(format!("no access_token in {token}")))?;
    let expires_in = token["expires_in"].as_i64().unwrap_or(3600);

    let now = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .expect("system clock before epoch")
        .as_secs() as i64;
    let staged =
        token_core::AccessToken::mint(access, vec!["Files.ReadWrite.All".into()], expires_in, now)
            .map_err(|e| TrialError::Staging(e.to_string()))?;

    let creds = tempfile::tempdir()?;
    token_core::write_token_file(
        &creds.path().join("onedrive.use"),
        &token_core::serialize_use_token(&staged),
    )
    .map_err(|e| TrialError::Staging(e.to_string()))?;
    Ok(creds)
}

/// SHA-256 of a file, streamed.
pub fn file_sha256(path: &Path) -> std::io::Result<[u8; 32]> {
    let mut file = std::fs::File::open(path)?;
    let mut hasher = Sha256::new();
    std::io::copy(&mut file, &mut hasher)?;
    Ok(hasher.finalize().into())
}

/// Downloads the file twice sequentially, timing each client invocation
/// wall-clock and checksum-verifying both downloads.
pub fn run_trial(options: &TrialOptions) -> Result<(BenchResult, BenchResult), TrialError> {
    let first = run_pass(options, Pass::First)?;
    let second = run_pass(options, Pass::Second)?;
    Ok((first, second))
}

fn run_pass(options: &TrialOptions, pass: Pass) -> Result<BenchResult, TrialError> {
    let dest = options.download_dir.join(&options.file_name);
    if dest.exists() {
        std::fs::remove_file(&dest)?;
    }

    let started = Instant::now();
    let output = Command::new(&options.client_bin)
        .arg(format!("onedrive:///{}", options.file_name))
        .arg(&options.download_dir)
        .arg("--timeout")
        .arg("60")
        .env("_CONDOR_CREDS", &options.creds_dir)
        .env("GRAPH_API_BASE", &options.api_base)
        .output()?;
    let elapsed = started.elapsed().as_secs_f64();

    if !output.status.success() {
        return Err(TrialError::ClientFailed {
            status: output.status.code(),
            stderr: String::from_utf8_lossy(&output.stderr).to_string(),
        });
    }
    if file_sha256(&dest)? != options.expected_sha256 {
        return Err(TrialError::ChecksumMismatch {
            file: options.file_name.clone(),
        });
    }

    Ok(BenchResult {
        site: options.site.clone(),
        method: options.method.clone(),
        size_bytes: options.size,
        pass,
        elapsed_s: elapsed,
        speed_mbps: speed_mbps(options.size, elapsed)?,
    })
}
