//! Emulated site profiles.
//!
//! Real sites differ wildly in delivery bandwidth; the benchmark treats
//! that as an input condition. Each profile is just a bandwidth cap fed
//! to the mock provider — an emulation, not a measurement of any site.

/// A named bandwidth cap.
#[derive(Debug, Clone, Copy)]
pub struct SiteProfile {
    pub name: &'static str,
    pub bandwidth_bytes_per_sec: u64,
}

/// Default profiles, loosely named after large opportunistic-computing
/// sites, with deliberately distinct caps.
pub const BUILTIN_PROFILES: [SiteProfile; 4] = [
    SiteProfile {
        name: "syracuse",
        bandwidth_bytes_per_sec: 2_500_000,
    },
    SiteProfile {
        name: "colorado",
        bandwidth_bytes_per_sec: 5_000_000,
    },
    SiteProfile {
        name: "bellarmine",
        bandwidth_bytes_per_sec: 10_000_000,
    },
    SiteProfile {
        name: "chicago",
        bandwidth_bytes_per_sec: 20_000_000,
    },
];

pub fn find_profile(name: &str) -> Option<SiteProfile> {
    BUILTIN_PROFILES.iter().copied().find(|p| p.name == name)
}
