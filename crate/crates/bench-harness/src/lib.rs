//! Download-throughput benchmark harness.
//!
//! Generates the percentile-sized test files, runs cold/warm download
//! trials per emulated site profile (the provider mock with a bandwidth
//! cap), computes speeds in megabits per second, and emits
//! percent-difference comparisons against baseline methods.
//!
//! Absolute site speeds depend on real infrastructure; this harness
//! validates its analytics against known values and its measurement
//! pipeline against the mock's known line rates. Site profiles are
//! emulations, not measurements.

pub mod analytics;
pub mod measure;
pub mod profiles;
pub mod sizes;

pub use analytics::{
    build_comparison, column_average, percent_difference, render_table, speed_mbps, AnalyticsError,
    Baseline, BenchResult, Comparison, Pass,
};
pub use measure::{run_trial, stage_mock_credentials, TrialError, TrialOptions};
pub use profiles::{find_profile, SiteProfile, BUILTIN_PROFILES};
pub use sizes::{canonical_suite, format_size, generate_test_files, parse_size, FileSizeSpec};

/// Speeds measured over transfers shorter than this are dominated by
/// startup latency and are flagged unreliable.
pub const RELIABLE_ELAPSED_SECS: f64 = 2.0;
