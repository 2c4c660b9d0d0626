//! Speed and percent-difference arithmetic, and the comparison table.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::sizes::format_size;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum AnalyticsError {
    #[error("elapsed time must be positive, got {0}")]
    NonPositiveElapsed(f64),

    #[error("baseline speed must be positive, got {0}")]
    NonPositiveBaseline(f64),

    #[error("cannot average an empty column")]
    EmptyInput,

    #[error("missing baseline for site {site:?}, method {method:?}, size {size_bytes}")]
    MissingBaseline {
        site: String,
        method: String,
        size_bytes: u64,
    },
}

/// Which of the two sequential downloads a result came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pass {
    First,
    Second,
}

/// One timed download.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchResult {
    pub site: String,
    pub method: String,
    pub size_bytes: u64,
    pub pass: Pass,
    pub elapsed_s: f64,
    pub speed_mbps: f64,
}

/// A baseline method's speed for one (site, size) cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Baseline {
    pub site: String,
    pub method: String,
    pub size_bytes: u64,
    pub speed_mbps: f64,
}

/// Megabits per second: `size × 8 / elapsed / 10^6`.
pub fn speed_mbps(size_bytes: u64, elapsed_s: f64) -> Result<f64, AnalyticsError> {
    if elapsed_s <= 0.0 {
        return Err(AnalyticsError::NonPositiveElapsed(elapsed_s));
    }
    Ok(size_bytes as f64 * 8.0 / elapsed_s / 1e6)
}

/// `(onedrive − other) / other × 100`; positive iff the drive method was
/// faster than the baseline.
pub fn percent_difference(onedrive_speed: f64, other_speed: f64) -> Result<f64, AnalyticsError> {
    if other_speed <= 0.0 {
        return Err(AnalyticsError::NonPositiveBaseline(other_speed));
    }
    Ok((onedrive_speed - other_speed) / other_speed * 100.0)
}

/// Arithmetic mean of a non-empty column.
pub fn column_average(values: &[f64]) -> Result<f64, AnalyticsError> {
    if values.is_empty() {
        return Err(AnalyticsError::EmptyInput);
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// A column of the comparison table: one baseline method at one size.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ColumnKey {
    pub method: String,
    pub size_bytes: u64,
}

impl ColumnKey {
    pub fn label(&self) -> String {
        format!("{} {}", self.method, format_size(self.size_bytes))
    }
}

/// Per-site percent differences plus the per-column averages.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub columns: Vec<ColumnKey>,
    /// (site, one percent difference per column), site order.
    pub rows: Vec<(String, Vec<f64>)>,
    /// Per-column averages; empty when there are no rows.
    pub averages: Vec<f64>,
}

impl Comparison {
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Builds the comparison: for every measured site, the percent difference
/// of the drive method's mean speed against each baseline (method, size)
/// column. Every (site, column) cell needs a baseline entry.
pub fn build_comparison(
    results: &[BenchResult],
    baselines: &[Baseline],
) -> Result<Comparison, AnalyticsError> {
    let mut columns: Vec<ColumnKey> = baselines
        .iter()
        .map(|b| ColumnKey {
            method: b.method.clone(),
            size_bytes: b.size_bytes,
        })
        .collect();
    columns.sort();
    columns.dedup();

    let mut baseline_speed: BTreeMap<(String, String, u64), f64> = BTreeMap::new();
    for b in baselines {
        baseline_speed.insert(
            (b.site.clone(), b.method.clone(), b.size_bytes),
            b.speed_mbps,
        );
    }

    // Mean drive-method speed per (site, size) over every recorded pass.
    let mut measured: BTreeMap<(String, u64), Vec<f64>> = BTreeMap::new();
    for r in results {
        measured
            .entry((r.site.clone(), r.size_bytes))
            .or_default()
            .push(r.speed_mbps);
    }

    let mut sites: Vec<String> = results.iter().map(|r| r.site.clone()).collect();
    sites.sort();
    sites.dedup();

    let mut rows = Vec::new();
    for site in sites {
        let mut cells = Vec::new();
        for column in &columns {
            let speeds = measured
                .get(&(site.clone(), column.size_bytes))
                .ok_or_else(|| AnalyticsError::MissingBaseline {
                    site: site.clone(),
                    method: "onedrive".into(),
                    size_bytes: column.size_bytes,
                })?;
            let own = column_average(speeds)?;
            let other = *baseline_speed
                .get(&(site.clone(), column.method.clone(), column.size_bytes))
                .ok_or_else(|| AnalyticsError::MissingBaseline {
                    site: site.clone(),
                    method: column.method.clone(),
                    size_bytes: column.size_bytes,
                })?;
            cells.push(percent_difference(own, other)?);
        }
        rows.push((site, cells));
    }

    let averages = if rows.is_empty() {
        Vec::new()
    } else {
        (0..columns.len())
            .map(|i| {
                let column: Vec<f64> = rows.iter().map(|(_, cells)| cells[i]).collect();
                column_average(&column).expect("non-empty rows")
            })
            .collect()
    };

    Ok(Comparison {
        columns,
        rows,
        averages,
    })
}

/// Fixed-width text table, one decimal place, positive means the drive
/// method was faster.
pub fn render_table(comparison: &Comparison) -> String {
    let mut header: Vec<String> = vec!["Site".to_string()];
    header.extend(comparison.columns.iter().map(ColumnKey::label));

    let mut table: Vec<Vec<String>> = vec![header];
    for (site, cells) in &comparison.rows {
        let mut row = vec![site.clone()];
        row.extend(cells.iter().map(|c| format!("{c:.1}%")));
        table.push(row);
    }
    if !comparison.averages.is_empty() {
        let mut row = vec!["Average".to_string()];
        row.extend(comparison.averages.iter().map(|c| format!("{c:.1}%")));
        table.push(row);
    }

    let widths: Vec<usize> = (0..table[0].len())
        .map(|i| table.iter().map(|row| row[i].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for (idx, row) in table.iter().enumerate() {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .map(|(cell, w)| format!("{cell:>w$}", w = w))
            .collect();
        out.push_str(&line.join("  "));
        out.push('\n');
        if idx == 0 {
            let total = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
            out.push_str(&"-".repeat(total));
            out.push('\n');
        }
    }
    out
}
