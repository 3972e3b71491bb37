//! Result types shared by the closed-form, numeric and sensitivity bounds.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::latent::{Channels, LatentIvModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    /// Interval spanned by two values in either order.
    pub fn spanning(a: f64, b: f64) -> Self {
        Self { lo: a.min(b), hi: a.max(b) }
    }

    pub fn point(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64, tol: f64) -> bool {
        x >= self.lo - tol && x <= self.hi + tol
    }

    pub fn contains_interval(&self, other: &Interval, tol: f64) -> bool {
        other.lo >= self.lo - tol && other.hi <= self.hi + tol
    }

    /// `[-hi, -lo]`.
    pub fn negate(&self) -> Self {
        Self { lo: -self.hi, hi: -self.lo }
    }

    pub fn clamp(&self, lo: f64, hi: f64) -> Self {
        Self { lo: self.lo.clamp(lo, hi), hi: self.hi.clamp(lo, hi) }
    }

    pub fn hull(&self, other: &Interval) -> Self {
        Self { lo: self.lo.min(other.lo), hi: self.hi.max(other.hi) }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match f.precision() {
            Some(p) => write!(f, "[{:.*}, {:.*}]", p, self.lo, p, self.hi),
            None => write!(f, "[{}, {}]", self.lo, self.hi),
        }
    }
}

/// Which procedure produced a [`BoundsReport`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundsMethod {
    OutcomeNondiff,
    TreatmentNondiff,
    OutcomeStrongMono,
    TreatmentStrongMono,
    TreatmentStrongMonoGeneral,
    Numeric,
    DifferentialOutcome,
    DifferentialTreatment,
}

impl BoundsMethod {
    pub fn describe(&self) -> &'static str {
        match self {
            Self::OutcomeNondiff => "outcome misclassified, non-differential",
            Self::TreatmentNondiff => "treatment misclassified, non-differential",
            Self::OutcomeStrongMono => "outcome misclassified, one-sided noncompliance",
            Self::TreatmentStrongMono => "treatment misclassified, one-sided noncompliance",
            Self::TreatmentStrongMonoGeneral => {
                "treatment misclassified, one-sided noncompliance (general case)"
            }
            Self::Numeric => "numeric search over misclassification rates",
            Self::DifferentialOutcome => "outcome misclassified, arm-specific rates",
            Self::DifferentialTreatment => "treatment misclassified, arm-specific rates",
        }
    }
}

/// Range of a sensitivity or specificity, e.g. `SN_Y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateBound {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
}

/// A rate configuration attaining (or meant to attain) a reported endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub label: String,
    pub channels: Channels,
    pub model: Option<LatentIvModel>,
    pub cace: f64,
    pub feasible: bool,
}

/// How to treat data whose naive Wald ratio is negative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignHandling {
    /// Swap the outcome labels internally and report in the input coding.
    #[default]
    Auto,
    /// Apply the formulas to the data as coded.
    AsCoded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub method: BoundsMethod,
    /// Naive Wald ratio in the input coding.
    pub naive_cace: f64,
    /// CACE interval in the input coding, limited to `[-1, 1]`.
    pub cace: Interval,
    /// The same interval before limiting to `[-1, 1]`.
    pub cace_raw: Interval,
    /// Sensitivity/specificity ranges in the input coding.
    pub rates: Vec<RateBound>,
    pub feasible: bool,
    /// Whether the outcome labels were swapped for the computation.
    pub recoded: bool,
    /// Constraints attaining each bound.
    pub binding: Vec<String>,
    /// Named intermediate quantities, computed in the analysis coding.
    pub intermediates: BTreeMap<String, f64>,
    /// `(SP, upper bound on SN)` pairs when the SN bound depends on SP.
    pub sn_upper_by_sp: Vec<[f64; 2]>,
    pub witnesses: Vec<Witness>,
    pub warnings: Vec<String>,
}

impl BoundsReport {
    pub(crate) fn new(method: BoundsMethod) -> Self {
        Self {
            method,
            naive_cace: f64::NAN,
            cace: Interval::point(f64::NAN),
            cace_raw: Interval::point(f64::NAN),
            rates: Vec::new(),
            feasible: true,
            recoded: false,
            binding: Vec::new(),
            intermediates: BTreeMap::new(),
            sn_upper_by_sp: Vec::new(),
            witnesses: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn rate(&self, name: &str) -> Option<&RateBound> {
        self.rates.iter().find(|r| r.name == name)
    }

    pub fn intermediate(&self, name: &str) -> Option<f64> {
        self.intermediates.get(name).copied()
    }

    pub(crate) fn set(&mut self, name: impl Into<String>, value: f64) {
        self.intermediates.insert(name.into(), value);
    }

    pub(crate) fn push_rate(&mut self, name: &str, lo: f64, hi: f64) {
        self.rates.push(RateBound { name: name.to_string(), lo, hi });
    }

    /// Stores a raw interval and its `[-1, 1]`-limited version.
    pub(crate) fn set_cace(&mut self, raw: Interval) {
        self.cace_raw = raw;
        self.cace = raw.clamp(-1.0, 1.0);
    }
}
