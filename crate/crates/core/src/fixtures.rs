//! Bundled count tables used in examples, tests and the CLI.
//!
//! Each arm is listed as `[n(1,1), n(1,0), n(0,1), n(0,0)]` over `(d, y)`.

use crate::observed::ObservedCounts;

/// Nutrition trial with two-sided noncompliance.
pub fn ex1() -> ObservedCounts {
    ObservedCounts::from_arms([107, 42, 68, 42], [24, 8, 131, 79])
}

/// Vaccination encouragement study; the outcome is coded so that the naive
/// estimate is negative.
pub fn ex2() -> ObservedCounts {
    ObservedCounts::from_arms([31, 424, 85, 944], [30, 237, 99, 1041])
}

/// Supplementation trial with one-sided noncompliance (no treated controls).
pub fn ex3() -> ObservedCounts {
    ObservedCounts::from_arms([9663, 12, 2385, 34], [0, 0, 11514, 74])
}

/// Looks up a bundled table by name (`ex1`, `ex2`, `ex3`).
pub fn by_name(name: &str) -> Option<ObservedCounts> {
    match name.to_ascii_lowercase().as_str() {
        "ex1" => Some(ex1()),
        "ex2" => Some(ex2()),
        "ex3" => Some(ex3()),
        _ => None,
    }
}

pub const NAMES: [&str; 3] = ["ex1", "ex2", "ex3"];
