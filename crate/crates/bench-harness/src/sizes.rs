//! Percentile-sized test fixtures with deterministic content.

use std::io::Write;
use std::path::Path;

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// One percentile's file: label, exact byte size, and on-disk name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileSizeSpec {
    pub percentile: u8,
    pub size: u64,
    pub file_name: &'static str,
}

/// The canonical suite of file-size percentiles (decimal SI sizes). The
/// 95th and 99th percentiles share one file.
const SUITE: [(u8, u64, &str); 7] = [
    (1, 5_797, "f5k.bin"),
    (5, 22_801_000, "f22.bin"),
    (25, 170_131_000, "f170.bin"),
    (50, 467_852_000, "f468.bin"),
    (75, 493_337_000, "f493.bin"),
    (95, 2_335_000_000, "f2335.bin"),
    (99, 2_335_000_000, "f2335.bin"),
];

pub fn canonical_suite() -> Vec<FileSizeSpec> {
    SUITE
        .iter()
        .map(|&(percentile, size, file_name)| FileSizeSpec {
            percentile,
            size,
            file_name,
        })
        .collect()
}

/// Looks up the canonical spec for an exact byte size.
pub fn spec_for_size(size: u64) -> Option<FileSizeSpec> {
    canonical_suite().into_iter().find(|s| s.size == size)
}

const GENERATION_CHUNK: usize = 4 * 1024 * 1024;

/// Creates one file per canonical spec (sizes over `max_size` skipped),
/// filled with seed-fixed pseudo-random bytes so checksums are stable
/// across runs. Returns the specs that were kept, percentile order.
pub fn generate_test_files(
    dir: &Path,
    max_size: Option<u64>,
) -> std::io::Result<Vec<FileSizeSpec>> {
    std::fs::create_dir_all(dir)?;
    let cap = max_size.unwrap_or(u64::MAX);
    let kept: Vec<FileSizeSpec> = canonical_suite()
        .into_iter()
        .filter(|s| s.size <= cap)
        .collect();

    let mut written: Vec<&'static str> = Vec::new();
    for spec in &kept {
        if written.contains(&spec.file_name) {
            continue; // shared percentile file
        }
        let mut rng = ChaCha8Rng::from_seed(seed_for(spec.size));
        let mut file = std::io::BufWriter::new(std::fs::File::create(dir.join(spec.file_name))?);
        let mut remaining = spec.size;
        let mut buf = vec![0u8; GENERATION_CHUNK];
        while remaining > 0 {
            let n = GENERATION_CHUNK.min(remaining as usize);
            rng.fill_bytes(&mut buf[..n]);
            file.write_all(&buf[..n])?;
            remaining -= n as u64;
        }
        file.flush()?;
        written.push(spec.file_name);
    }
    Ok(kept)
}

/// Per-file seed: fixed base with the size mixed in, so each file's
/// content is independent of which subset gets generated.
fn seed_for(size: u64) -> [u8; 32] {
    let mut seed = *b"bench-fixture-content-seed-v1...";
    seed[24..32].copy_from_slice(&size.to_le_bytes());
    seed
}

/// Parses a byte size: a raw integer or a decimal-SI suffixed value
/// (`25MB`, `2.335GB`, `10k`). KB/MB/GB are powers of ten.
pub fn parse_size(text: &str) -> Result<u64, String> {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return Err("empty size".into());
    }
    let upper = trimmed.to_ascii_uppercase();
    let (number, multiplier) = if let Some(n) = upper.strip_suffix("GB").or(upper.strip_suffix("G"))
    {
        (n, 1e9)
    } else if let Some(n) = upper.strip_suffix("MB").or(upper.strip_suffix("M")) {
        (n, 1e6)
    } else if let Some(n) = upper.strip_suffix("KB").or(upper.strip_suffix("K")) {
        (n, 1e3)
    } else if let Some(n) = upper.strip_suffix("B") {
        (n, 1.0)
    } else {
        (upper.as_str(), 1.0)
    };
    let value: f64 = number
        .trim()
        .parse()
        .map_err(|e| format!("bad size {text:?}: {e}"))?;
    if value < 0.0 {
        return Err(format!("negative size {text:?}"));
    }
    Ok((value * multiplier).round() as u64)
}

/// Human label in decimal SI, one decimal place: `22.8MB`, `2.3GB`.
pub fn format_size(bytes: u64) -> String {
    let b = bytes as f64;
    if b >= 1e9 {
        format!("{:.1}GB", b / 1e9)
    } else if b >= 1e6 {
        format!("{:.1}MB", b / 1e6)
    } else if b >= 1e3 {
        format!("{:.1}KB", b / 1e3)
    } else {
        format!("{bytes}B")
    }
}
