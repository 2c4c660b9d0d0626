//! The `bench` CLI end to end at desk scale: gen → run → compare.

use std::path::PathBuf;
use std::process::Command;

fn bench_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bench"))
}

/// The trials spawn the transfer client; build it if this test target got
/// compiled before it.
fn transfer_bin() -> PathBuf {
    let target_dir = PathBuf::from(env!("CARGO_BIN_EXE_bench"))
        .parent()
        .unwrap()
        .to_path_buf();
    let transfer = target_dir.join("transfer");
    if !transfer.is_file() {
        let status = Command::new(env!("CARGO"))
            .args(["build", "-p", "transfer-client", "--bin", "transfer"])
            .status()
            .expect("cargo build transfer");
        assert!(status.success(), "building the transfer client failed");
    }
    transfer
}

#[test]
fn gen_lists_the_capped_suite() {
    let dir = tempfile::tempdir().unwrap();
    let output = bench_bin()
        .args(["gen", "--max-size", "25MB"])
        .arg("--dir")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("f5k.bin"));
    assert!(stdout.contains("f22.bin"));
    assert!(!stdout.contains("f170.bin"));
    assert_eq!(
        std::fs::metadata(dir.path().join("f22.bin")).unwrap().len(),
        22_801_000
    );
}

#[test]
fn run_measures_the_mock_line_rate() {
    let fixtures = tempfile::tempdir().unwrap();
    let output = bench_bin()
        .args(["gen", "--max-size", "25MB"])
        .arg("--dir")
        .arg(fixtures.path())
        .output()
        .unwrap();
    assert!(output.status.success());

    let out_csv = fixtures.path().join("results.csv");
    let output = bench_bin()
        .args(["run", "--profile", "cap10", "--bandwidth", "10000000"])
        .args(["--sizes", "5797,22801000"])
        .arg("--dir")
        .arg(fixtures.path())
        .arg("--out")
        .arg(&out_csv)
        .arg("--client")
        .arg(transfer_bin())
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );

    let mut reader = csv::Reader::from_path(&out_csv).unwrap();
    let rows: Vec<bench_harness::BenchResult> =
        reader.deserialize().collect::<Result<_, _>>().unwrap();
    assert_eq!(rows.len(), 4, "first and second passes for both sizes");
    // 10^7 B/s is an 80 mbps line rate; whole-process timing eats a little.
    for row in rows.iter().filter(|r| r.size_bytes == 22_801_000) {
        assert_eq!(row.site, "cap10");
        assert_eq!(row.method, "onedrive");
        assert!(
            (row.speed_mbps - 80.0).abs() <= 8.0,
            "pass {:?}: {} mbps",
            row.pass,
            row.speed_mbps
        );
    }

    // The 5.8 KB trials are latency-dominated: recorded, but flagged.
    assert_eq!(rows.iter().filter(|r| r.size_bytes == 5_797).count(), 2);
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(
        stdout.contains("below the 2s reliability threshold"),
        "small-file caveat missing from: {stdout}"
    );
}

#[test]
fn compare_builds_a_table_and_flags_empty_results() {
    let dir = tempfile::tempdir().unwrap();
    let results = dir.path().join("results.csv");
    let baselines = dir.path().join("baselines.csv");
    let table = dir.path().join("table.txt");

    std::fs::write(
        &results,
        "site,method,size_bytes,pass,elapsed_s,speed_mbps\n\
         east,onedrive,22801000,first,2.0,91.2\n\
         east,onedrive,22801000,second,2.0,91.2\n",
    )
    .unwrap();
    std::fs::write(
        &baselines,
        "site,method,size_bytes,speed_mbps\n\
         east,http,22801000,45.6\n",
    )
    .unwrap();

    let output = bench_bin()
        .args(["compare"])
        .arg("--results")
        .arg(&results)
        .arg("--baselines")
        .arg(&baselines)
        .arg("--out")
        .arg(&table)
        .output()
        .unwrap();
    assert!(output.status.success());
    let text = std::fs::read_to_string(&table).unwrap();
    assert!(text.contains("http 22.8MB"));
    assert!(text.contains("100.0%"), "91.2 vs 45.6 is +100%: {text}");
    assert!(text.contains("Average"));

    // Empty results: headers only, distinct exit code.
    std::fs::write(
        &results,
        "site,method,size_bytes,pass,elapsed_s,speed_mbps\n",
    )
    .unwrap();
    let output = bench_bin()
        .args(["compare"])
        .arg("--results")
        .arg(&results)
        .arg("--baselines")
        .arg(&baselines)
        .arg("--out")
        .arg(&table)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(3));
    let text = std::fs::read_to_string(&table).unwrap();
    assert!(text.contains("Site"));
    assert!(!text.contains("Average"));

    // A missing baseline cell is named.
    std::fs::write(
        &results,
        "site,method,size_bytes,pass,elapsed_s,speed_mbps\n\
         west,onedrive,22801000,first,2.0,91.2\n",
    )
    .unwrap();
    let output = bench_bin()
        .args(["compare"])
        .arg("--results")
        .arg(&results)
        .arg("--baselines")
        .arg(&baselines)
        .arg("--out")
        .arg(&table)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    let stderr = String::from_utf8(output.stderr).unwrap();
    assert!(stderr.contains("west"), "names the site: {stderr}");
    assert!(stderr.contains("22801000"), "names the size: {stderr}");
}
