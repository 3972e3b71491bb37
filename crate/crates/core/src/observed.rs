//! Observed data for a binary instrument `Z`, treatment `D` and outcome `Y`.
//!
//! Cells are always indexed `[z][d][y]`. When some coordinate is measured
//! with error the same types hold the mismeasured values `(Z', D', Y')`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Normalization tolerance for [`ObservedDistribution`].
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Eight non-negative cell counts `n[z][d][y]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ObservedCounts {
    pub n: [[[u64; 2]; 2]; 2],
}

impl ObservedCounts {
    pub fn new(n: [[[u64; 2]; 2]; 2]) -> Self {
        Self { n }
    }

    /// Builds a table arm by arm from `(d, y)`-ordered rows:
    /// `[n(1,1), n(1,0), n(0,1), n(0,0)]`, the layout of a printed 2x2 table.
    pub fn from_arms(treated: [u64; 4], control: [u64; 4]) -> Self {
        let arm = |c: [u64; 4]| [[c[3], c[2]], [c[1], c[0]]];
        Self { n: [arm(control), arm(treated)] }
    }

    pub fn get(&self, z: usize, d: usize, y: usize) -> u64 {
        self.n[z][d][y]
    }

    pub fn set(&mut self, z: usize, d: usize, y: usize, count: u64) {
        self.n[z][d][y] = count;
    }

    pub fn arm_total(&self, z: usize) -> u64 {
        self.n[z].iter().flatten().sum()
    }

    pub fn total(&self) -> u64 {
        self.arm_total(0) + self.arm_total(1)
    }

    /// Iterates `(z, d, y, count)` in lexicographic cell order.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize, usize, u64)> + '_ {
        (0..8).map(move |i| {
            let (z, d, y) = (i >> 2, (i >> 1) & 1, i & 1);
            (z, d, y, self.n[z][d][y])
        })
    }

    pub fn to_distribution(&self) -> Result<ObservedDistribution> {
        from_counts(self)
    }
}

/// Converts counts into the arm share `P(Z=1)` and per-arm conditional cell
/// probabilities.
pub fn from_counts(counts: &ObservedCounts) -> Result<ObservedDistribution> {
    let totals = [counts.arm_total(0), counts.arm_total(1)];
    for (arm, &t) in totals.iter().enumerate() {
        if t == 0 {
            return Err(Error::ZeroArm { arm: arm as u8 });
        }
    }
    let mut p = [[[0.0; 2]; 2]; 2];
    for (z, d, y, c) in counts.cells() {
        p[z][d][y] = c as f64 / totals[z] as f64;
    }
    let pz = totals[1] as f64 / (totals[0] + totals[1]) as f64;
    Ok(ObservedDistribution { pz, p })
}

/// A set of `(d, y)` cells within an arm, stored as a 4-bit mask with bit
/// `2d + y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Event(u8);

impl Event {
    pub const NONE: Event = Event(0);
    pub const ALL: Event = Event(0b1111);

    pub const fn cell(d: usize, y: usize) -> Event {
        Event(1 << (2 * d + y))
    }

    /// `{Y = value}`.
    pub const fn y(value: usize) -> Event {
        Event(Self::cell(0, value).0 | Self::cell(1, value).0)
    }

    /// `{D = value}`.
    pub const fn d(value: usize) -> Event {
        Event(Self::cell(value, 0).0 | Self::cell(value, 1).0)
    }

    pub const fn and(self, other: Event) -> Event {
        Event(self.0 & other.0)
    }

    pub const fn or(self, other: Event) -> Event {
        Event(self.0 | other.0)
    }

    pub const fn not(self) -> Event {
        Event(!self.0 & 0b1111)
    }

    pub const fn contains(self, d: usize, y: usize) -> bool {
        self.0 & Self::cell(d, y).0 != 0
    }

    /// The same event after exchanging the outcome labels.
    pub fn recode_outcome(self) -> Event {
        let mut out = Event::NONE;
        for d in 0..2 {
            for y in 0..2 {
                if self.contains(d, y) {
                    out = out.or(Event::cell(d, 1 - y));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Conditioner {
    Z,
    /// Conditioning on `1 - Z`; swaps the arms.
    OneMinusZ,
}

/// `RD_{R|Q} = P(R=1 | Q=1) - P(R=1 | Q=0)` with `R` a union of cells and
/// `Q` either `Z` or `1 - Z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RiskDiffSpec {
    pub response: Event,
    pub conditioner: Conditioner,
}

impl RiskDiffSpec {
    pub const Y_ON_Z: RiskDiffSpec = RiskDiffSpec::on_z(Event::y(1));
    pub const D_ON_Z: RiskDiffSpec = RiskDiffSpec::on_z(Event::d(1));

    pub const fn on_z(response: Event) -> Self {
        Self { response, conditioner: Conditioner::Z }
    }

    pub const fn on_not_z(response: Event) -> Self {
        Self { response, conditioner: Conditioner::OneMinusZ }
    }
}

/// `P(Z=1)` together with `P(D=d, Y=y | Z=z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservedDistribution {
    pz: f64,
    p: [[[f64; 2]; 2]; 2],
}

impl ObservedDistribution {
    /// Validates `pz ∈ [0, 1]`, every cell in `[0, 1]` and per-arm
    /// normalization within [`NORMALIZATION_TOL`].
    pub fn new(pz: f64, p: [[[f64; 2]; 2]; 2]) -> Result<Self> {
        let in_unit = |v: f64| (-NORMALIZATION_TOL..=1.0 + NORMALIZATION_TOL).contains(&v);
        if !in_unit(pz) {
            return Err(Error::InvalidInput(format!("P(Z=1) = {pz} outside [0, 1]")));
        }
        for (z, arm) in p.iter().enumerate() {
            let total: f64 = arm.iter().flatten().sum();
            if (total - 1.0).abs() > NORMALIZATION_TOL || arm.iter().flatten().any(|&v| !in_unit(v)) {
                return Err(Error::InvalidInput(format!(
                    "arm z={z} is not a probability vector (sum {total})"
                )));
            }
        }
        Ok(Self { pz, p })
    }

    pub(crate) fn from_raw(pz: f64, p: [[[f64; 2]; 2]; 2]) -> Self {
        Self { pz, p }
    }

    pub fn pz(&self) -> f64 {
        self.pz
    }

    pub fn cells(&self) -> &[[[f64; 2]; 2]; 2] {
        &self.p
    }

    pub fn cell(&self, z: usize, d: usize, y: usize) -> f64 {
        self.p[z][d][y]
    }

    /// `P(event | Z=z)`.
    pub fn prob(&self, z: usize, event: Event) -> f64 {
        let mut total = 0.0;
        for d in 0..2 {
            for y in 0..2 {
                if event.contains(d, y) {
                    total += self.p[z][d][y];
                }
            }
        }
        total
    }

    /// `P(event | given, Z=z)`, or `None` when `P(given | Z=z) = 0`.
    pub fn cond(&self, z: usize, event: Event, given: Event) -> Option<f64> {
        let den = self.prob(z, given);
        (den > 0.0).then(|| self.prob(z, event.and(given)) / den)
    }

    pub fn risk_difference(&self, spec: RiskDiffSpec) -> f64 {
        risk_difference(self, spec)
    }

    pub fn recode_outcome(&self) -> Self {
        recode_outcome(self)
    }

    /// `RD_{D|Z}`.
    pub fn rd_d(&self) -> f64 {
        self.risk_difference(RiskDiffSpec::D_ON_Z)
    }

    /// `RD_{Y|Z}`.
    pub fn rd_y(&self) -> f64 {
        self.risk_difference(RiskDiffSpec::Y_ON_Z)
    }
}

pub fn risk_difference(dist: &ObservedDistribution, spec: RiskDiffSpec) -> f64 {
    let diff = dist.prob(1, spec.response) - dist.prob(0, spec.response);
    match spec.conditioner {
        Conditioner::Z => diff,
        Conditioner::OneMinusZ => -diff,
    }
}

/// Exchanges the outcome labels `Y ↦ 1 - Y` in both arms.
pub fn recode_outcome(dist: &ObservedDistribution) -> ObservedDistribution {
    let mut p = dist.p;
    for arm in p.iter_mut() {
        for row in arm.iter_mut() {
            row.swap(0, 1);
        }
    }
    ObservedDistribution { pz: dist.pz, p }
}
