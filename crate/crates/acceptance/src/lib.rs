//! Helpers shared by the acceptance suite: workspace binary resolution
//! and small utilities.

use std::path::PathBuf;
use std::process::Command;

/// Resolves a workspace binary in the build directory (test executables
/// live in `<target>/debug/deps`, binaries one level up), building it
/// first if this test target got compiled before it.
pub fn workspace_bin(package: &str, bin: &str) -> PathBuf {
    let exe = std::env::current_exe().expect("current executable path");
    let deps = exe.parent().expect("executable directory");
    let build_dir = deps
        .file_name()
        .filter(|n| *n == "deps")
        .and_then(|_| deps.parent())
        .unwrap_or(deps);
    let path = build_dir.join(bin);
    if !path.is_file() {
        let cargo = option_env!("CARGO").unwrap_or("cargo");
        let status = Command::new(cargo)
            .args(["build", "-p", package, "--bin", bin])
            .status()
            .unwrap_or_else(|e| panic!("running cargo build for {bin}: {e}"));
        assert!(status.success(), "building {package}::{bin} failed");
    }
    path
}

pub fn unix_now() -> i64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .expect("system clock before epoch")
        .as_secs() as i64
}
