//! The `credmon serve` binary comes up, serves, and refreshes.

use std::io::{BufRead, BufReader, Write};
use std::process::{Command, Stdio};
use std::time::Duration;

use mock_provider::{MockConfig, MockProvider};

#[tokio::test]
async fn serve_starts_and_answers_health_checks() {
    let backing = tempfile::tempdir().unwrap();
    let mock = MockProvider::start(MockConfig::new(backing.path()))
        .await
        .unwrap();

    let mut secret = tempfile::NamedTempFile::new().unwrap();
    writeln!(secret, "s3cret").unwrap();
    let mut config = tempfile::NamedTempFile::new().unwrap();
    write!(
        config,
        "ONEDRIVE_CLIENT_ID = cid\n\
         ONEDRIVE_CLIENT_SECRET_FILE = {}\n\
         ONEDRIVE_AUTHORIZATION_URL = {}\n\
         ONEDRIVE_TOKEN_URL = {}\n",
        secret.path().display(),
        mock.authorize_url(),
        mock.token_url(),
    )
    .unwrap();
    let store = tempfile::tempdir().unwrap();

    let mut child = Command::new(env!("CARGO_BIN_EXE_credmon"))
        .arg("serve")
        .arg("--config")
        .arg(config.path())
        .arg("--store")
        .arg(store.path())
        .args(["--insecure-http", "--port", "0"])
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();

    // First stdout line announces the listen address.
    let stdout = child.stdout.take().unwrap();
    let addr_line = tokio::task::spawn_blocking(move || {
        let mut line = String::new();
        BufReader::new(stdout).read_line(&mut line).unwrap();
        line
    })
    .await
    .unwrap();
    let base = addr_line
        .trim()
        .strip_prefix("listening on ")
        .unwrap_or_else(|| panic!("unexpected announce line {addr_line:?}"))
        .to_string();

    let client = reqwest::Client::new();
    let mut healthy = false;
    for _ in 0..50 {
        if let Ok(resp) = client.get(format!("{base}/healthz")).send().await {
            if resp.status().is_success() {
                healthy = true;
                break;
            }
        }
        tokio::time::sleep(Duration::from_millis(100)).await;
    }
    child.kill().unwrap();
    child.wait().unwrap();
    assert!(healthy, "service never answered at {base}");
}

#[test]
fn serve_requires_a_provider_config() {
    let store = tempfile::tempdir().unwrap();
    let empty_config = tempfile::NamedTempFile::new().unwrap();
    let output = Command::new(env!("CARGO_BIN_EXE_credmon"))
        .arg("serve")
        .arg("--config")
        .arg(empty_config.path())
        .arg("--store")
        .arg(store.path())
        .output()
        .unwrap();
    assert!(!output.status.success());
    assert!(String::from_utf8_lossy(&output.stderr).contains("no providers"));
}
