//! Benchmark CLI: `bench gen`, `bench run`, `bench compare`.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use bench_harness::{
    build_comparison, canonical_suite, find_profile, format_size, generate_test_files, parse_size,
    render_table, run_trial, stage_mock_credentials, Baseline, BenchResult, FileSizeSpec,
    TrialOptions, BUILTIN_PROFILES, RELIABLE_ELAPSED_SECS,
};
use clap::{Parser, Subcommand};
use mock_provider::{MockConfig, MockProvider};

/// Exit code when a comparison ran but had no measured rows.
const EXIT_NO_DATA: i32 = 3;

#[derive(Parser)]
#[command(name = "bench", about = "Download-throughput benchmark harness")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the percentile-sized test files (deterministic content).
    Gen {
        /// Output directory.
        #[arg(long)]
        dir: PathBuf,

        /// Skip files larger than this (e.g. `25MB`); desk-scale runs.
        #[arg(long, value_parser = parse_size)]
        max_size: Option<u64>,
    },
    /// Run double-download trials for one site profile.
    Run {
        /// Site profile: one of the built-ins, or any name with --bandwidth.
        #[arg(long)]
        profile: String,

        /// Comma-separated byte sizes from the canonical suite
        /// (e.g. `22801000,170131000`; SI suffixes accepted).
        #[arg(long)]
        sizes: String,

        /// Directory holding generated fixtures (see `bench gen`).
        #[arg(long)]
        dir: PathBuf,

        /// Results CSV to write (columns: site, method, size_bytes, pass,
        /// elapsed_s, speed_mbps).
        #[arg(long)]
        out: PathBuf,

        /// Bandwidth cap in bytes/second; overrides the profile's cap.
        #[arg(long)]
        bandwidth: Option<u64>,

        /// Path to the transfer client (default: next to this binary).
        #[arg(long)]
        client: Option<PathBuf>,
    },
    /// Build the percent-difference comparison table.
    Compare {
        /// Results CSV from `bench run`.
        #[arg(long)]
        results: PathBuf,

        /// Baseline CSV (columns: site, method, size_bytes, speed_mbps).
        #[arg(long)]
        baselines: PathBuf,

        /// Text table to write.
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() {
    let args = Args::parse();
    match run(args) {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(1);
        }
    }
}

fn run(args: Args) -> anyhow::Result<i32> {
    match args.command {
        Command::Gen { dir, max_size } => cmd_gen(&dir, max_size),
        Command::Run {
            profile,
            sizes,
            dir,
            out,
            bandwidth,
            client,
        } => cmd_run(&profile, &sizes, &dir, &out, bandwidth, client),
        Command::Compare {
            results,
            baselines,
            out,
        } => cmd_compare(&results, &baselines, &out),
    }
}

fn cmd_gen(dir: &Path, max_size: Option<u64>) -> anyhow::Result<i32> {
    let kept = generate_test_files(dir, max_size).context("generating test files")?;
    for spec in &kept {
        println!(
            "p{:02}  {:>13} bytes  {}",
            spec.percentile, spec.size, spec.file_name
        );
    }
    Ok(0)
}

fn resolve_sizes(sizes: &str) -> anyhow::Result<Vec<FileSizeSpec>> {
    let mut specs: Vec<FileSizeSpec> = Vec::new();
    for part in sizes.split(',') {
        let bytes = parse_size(part).map_err(|e| anyhow::anyhow!(e))?;
        let spec = bench_harness::sizes::spec_for_size(bytes).with_context(|| {
            let known: Vec<String> = canonical_suite()
                .iter()
                .map(|s| s.size.to_string())
                .collect();
            format!(
                "{bytes} is not a canonical fixture size (known: {})",
                known.join(", ")
            )
        })?;
        if !specs.iter().any(|s| s.size == spec.size) {
            specs.push(spec);
        }
    }
    if specs.is_empty() {
        bail!("--sizes selected nothing");
    }
    Ok(specs)
}

fn default_client_path() -> anyhow::Result<PathBuf> {
    let own = std::env::current_exe().context("locating this binary")?;
    let dir = own.parent().context("binary has no parent directory")?;
    Ok(dir.join("transfer"))
}

fn cmd_run(
    profile: &str,
    sizes: &str,
    dir: &Path,
    out: &Path,
    bandwidth: Option<u64>,
    client: Option<PathBuf>,
) -> anyhow::Result<i32> {
    let cap = match (bandwidth, find_profile(profile)) {
        (Some(cap), _) => cap,
        (None, Some(builtin)) => builtin.bandwidth_bytes_per_sec,
        (None, None) => {
            let names: Vec<&str> = BUILTIN_PROFILES.iter().map(|p| p.name).collect();
            bail!("unknown profile {profile:?}; use one of {names:?} or pass --bandwidth");
        }
    };
    let specs = resolve_sizes(sizes)?;
    for spec in &specs {
        let path = dir.join(spec.file_name);
        let len = std::fs::metadata(&path)
            .with_context(|| {
                format!(
                    "{} missing; run `bench gen --dir {}`",
                    path.display(),
                    dir.display()
                )
            })?
            .len();
        if len != spec.size {
            bail!(
                "{} is {len} bytes, expected {}; regenerate with `bench gen`",
                path.display(),
                spec.size
            );
        }
    }
    let client_bin = match client {
        Some(path) => path,
        None => default_client_path()?,
    };
    if !client_bin.is_file() {
        bail!(
            "transfer client not found at {}; pass --client",
            client_bin.display()
        );
    }

    // The mock provider needs an async runtime; the trials themselves run
    // synchronously on this thread, strictly one at a time.
    let runtime = tokio::runtime::Runtime::new()?;
    let mock = runtime.block_on(MockProvider::start(
        MockConfig::new(dir).bandwidth_limit(cap),
    ))?;
    println!(
        "profile {profile}: mock provider at {} capped at {cap} B/s",
        mock.base_url()
    );

    let creds = stage_mock_credentials(&mock.base_url())?;
    let download_dir = tempfile::tempdir()?;
    let mut writer = csv::Writer::from_path(out)
        .with_context(|| format!("opening {} for writing", out.display()))?;

    for spec in &specs {
        println!("hashing fixture {} ...", spec.file_name);
        let expected = bench_harness::measure::file_sha256(&dir.join(spec.file_name))?;
        let options = TrialOptions {
            site: profile.to_string(),
            method: "onedrive".to_string(),
            file_name: spec.file_name.to_string(),
            size: spec.size,
            api_base: mock.base_url(),
            creds_dir: creds.path().to_path_buf(),
            client_bin: client_bin.clone(),
            download_dir: download_dir.path().to_path_buf(),
            expected_sha256: expected,
        };
        let (first, second) = run_trial(&options)?;
        for result in [&first, &second] {
            let caveat = if result.elapsed_s <= RELIABLE_ELAPSED_SECS {
                "  (below the 2s reliability threshold)"
            } else {
                ""
            };
            println!(
                "{} {} pass {:?}: {:.2}s, {:.1} mbps{caveat}",
                profile,
                format_size(result.size_bytes),
                result.pass,
                result.elapsed_s,
                result.speed_mbps,
            );
            writer.serialize(result)?;
        }
        writer.flush()?;
    }
    println!("results written to {}", out.display());
    Ok(0)
}

fn cmd_compare(results: &Path, baselines: &Path, out: &Path) -> anyhow::Result<i32> {
    let mut results_reader = csv::Reader::from_path(results)
        .with_context(|| format!("reading {}", results.display()))?;
    let results: Vec<BenchResult> = results_reader
        .deserialize()
        .collect::<Result<_, _>>()
        .context("parsing results csv")?;

    let mut baseline_reader = csv::Reader::from_path(baselines)
        .with_context(|| format!("reading {}", baselines.display()))?;
    let baselines: Vec<Baseline> = baseline_reader
        .deserialize()
        .collect::<Result<_, _>>()
        .context("parsing baselines csv")?;

    let comparison = build_comparison(&results, &baselines)?;
    let table = render_table(&comparison);
    std::fs::write(out, &table).with_context(|| format!("writing {}", out.display()))?;
    print!("{table}");

    if comparison.is_empty() {
        eprintln!("no measured rows; table has headers only");
        return Ok(EXIT_NO_DATA);
    }
    Ok(0)
}
