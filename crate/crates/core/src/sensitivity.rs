//! Sensitivity analysis for differential misclassification of either the
//! treatment or the outcome, with rates that may differ between the two
//! instrument arms.
//!
//! Each arm contributes a corrected prevalence
//! `g(sn, sp) = (p' - (1 - sp)) / (sn + sp - 1)`. This is a linear-fractional
//! function with a positive denominator on an informative box, so its level
//! sets are lines and its extremes over a rectangle sit at the corners. The
//! CACE is monotone in the difference `g_1 - g_0` of the two arms, which
//! makes corner enumeration exact; [`sensitivity_region_grid`] is the
//! brute-force cross-check.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::latent::{check_feasibility, inverse_map_channels, Channel, Channels};
use crate::observed::{Event, ObservedDistribution};
use crate::report::{BoundsMethod, BoundsReport, Interval, Witness};

/// The variable whose misclassification rates depend on the arm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DiffVariable {
    #[serde(rename = "Y")]
    Y,
    #[serde(rename = "D")]
    D,
}

impl DiffVariable {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Y => "Y",
            Self::D => "D",
        }
    }
}

impl fmt::Display for DiffVariable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DiffVariable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "y" | "outcome" => Ok(Self::Y),
            "d" | "treatment" => Ok(Self::D),
            "dy" | "yd" | "both" => Err(Error::InvalidInput(
                "simultaneous differential misclassification of D and Y is not supported".into(),
            )),
            other => Err(Error::InvalidInput(format!("unknown variable '{other}' (expected Y or D)"))),
        }
    }
}

/// Arm-specific sensitivities and specificities of one variable; the suffix
/// is the value of `Z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DifferentialRates {
    pub variable: DiffVariable,
    pub sn1: f64,
    pub sn0: f64,
    pub sp1: f64,
    pub sp0: f64,
}

impl DifferentialRates {
    pub fn outcome(sn1: f64, sn0: f64, sp1: f64, sp0: f64) -> Self {
        Self { variable: DiffVariable::Y, sn1, sn0, sp1, sp0 }
    }

    pub fn treatment(sn1: f64, sn0: f64, sp1: f64, sp0: f64) -> Self {
        Self { variable: DiffVariable::D, sn1, sn0, sp1, sp0 }
    }

    /// Channel of arm `z`.
    pub fn arm(&self, z: usize) -> Channel {
        if z == 1 {
            Channel::new(self.sn1, self.sp1)
        } else {
            Channel::new(self.sn0, self.sp0)
        }
    }

    pub fn channels(&self) -> Channels {
        let per_arm = [self.arm(0), self.arm(1)];
        match self.variable {
            DiffVariable::Y => Channels { y: per_arm, ..Channels::PERFECT },
            DiffVariable::D => Channels { d: per_arm, ..Channels::PERFECT },
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("sn1", self.sn1), ("sn0", self.sn0), ("sp1", self.sp1), ("sp0", self.sp0)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidInput(format!("{name} = {v} is outside [0, 1]")));
            }
        }
        for z in [1, 0] {
            let r = self.arm(z).r();
            if r <= 0.0 {
                return Err(Error::NonInformativeRates { what: format!("sn{z} + sp{z} - 1"), value: r });
            }
        }
        Ok(())
    }
}

/// Corrected `P(V=1 | Z=z)` from the observed `p = P(V'=1 | Z=z)`.
fn corrected(p: f64, ch: Channel) -> f64 {
    (p - (1.0 - ch.sp)) / ch.r()
}

fn observed_prevalence(dist: &ObservedDistribution, variable: DiffVariable, z: usize) -> f64 {
    let event = match variable {
        DiffVariable::Y => Event::y(1),
        DiffVariable::D => Event::d(1),
    };
    dist.prob(z, event)
}

fn expect_variable(rates: &DifferentialRates, want: DiffVariable) -> Result<()> {
    if rates.variable != want {
        return Err(Error::InvalidInput(format!(
            "rates are for {} but this formula needs {}",
            rates.variable, want
        )));
    }
    Ok(())
}

/// CACE when the outcome is misclassified with arm-specific rates.
pub fn cace_diff_outcome(dist: &ObservedDistribution, rates: &DifferentialRates) -> Result<f64> {
    expect_variable(rates, DiffVariable::Y)?;
    rates.validate()?;
    let num = corrected(observed_prevalence(dist, DiffVariable::Y, 1), rates.arm(1))
        - corrected(observed_prevalence(dist, DiffVariable::Y, 0), rates.arm(0));
    let rd_d = dist.rd_d();
    if rd_d == 0.0 {
        return Err(Error::ZeroDenominator { numerator: num });
    }
    Ok(num / rd_d)
}

/// CACE when the treatment is misclassified with arm-specific rates.
pub fn cace_diff_treatment(dist: &ObservedDistribution, rates: &DifferentialRates) -> Result<f64> {
    expect_variable(rates, DiffVariable::D)?;
    rates.validate()?;
    let den = corrected(observed_prevalence(dist, DiffVariable::D, 1), rates.arm(1))
        - corrected(observed_prevalence(dist, DiffVariable::D, 0), rates.arm(0));
    if den == 0.0 {
        return Err(Error::ZeroCorrectedDenominator);
    }
    Ok(dist.rd_y() / den)
}

/// Dispatches on `rates.variable`.
pub fn cace_diff(dist: &ObservedDistribution, rates: &DifferentialRates) -> Result<f64> {
    match rates.variable {
        DiffVariable::Y => cace_diff_outcome(dist, rates),
        DiffVariable::D => cace_diff_treatment(dist, rates),
    }
}

/// Closed ranges for the four arm-specific rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateBox {
    pub variable: DiffVariable,
    pub sn1: Interval,
    pub sn0: Interval,
    pub sp1: Interval,
    pub sp0: Interval,
}

impl RateBox {
    /// The degenerate box holding a single rate vector.
    pub fn point(r: &DifferentialRates) -> Self {
        Self {
            variable: r.variable,
            sn1: Interval::point(r.sn1),
            sn0: Interval::point(r.sn0),
            sp1: Interval::point(r.sp1),
            sp0: Interval::point(r.sp0),
        }
    }

    /// Same ranges in both arms.
    pub fn symmetric(variable: DiffVariable, sn: Interval, sp: Interval) -> Self {
        Self { variable, sn1: sn, sn0: sn, sp1: sp, sp0: sp }
    }

    fn arm(&self, z: usize) -> (Interval, Interval) {
        if z == 1 {
            (self.sn1, self.sp1)
        } else {
            (self.sn0, self.sp0)
        }
    }

    pub fn contains(&self, r: &DifferentialRates) -> bool {
        r.variable == self.variable
            && self.sn1.contains(r.sn1, 0.0)
            && self.sn0.contains(r.sn0, 0.0)
            && self.sp1.contains(r.sp1, 0.0)
            && self.sp0.contains(r.sp0, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, iv) in [("sn1", self.sn1), ("sn0", self.sn0), ("sp1", self.sp1), ("sp0", self.sp0)] {
            if !(iv.lo <= iv.hi && iv.lo >= 0.0 && iv.hi <= 1.0) {
                return Err(Error::InvalidInput(format!("range {name} = {iv} is not a sub-interval of [0, 1]")));
            }
        }
        for z in [1, 0] {
            let (sn, sp) = self.arm(z);
            let r = sn.lo + sp.lo - 1.0;
            if r <= 0.0 {
                return Err(Error::NonInformativeRates { what: format!("min over box of sn{z} + sp{z} - 1"), value: r });
            }
        }
        Ok(())
    }
}

/// Smallest and largest corrected prevalence of one arm, with the
/// attaining `(sn, sp)`.
#[derive(Debug, Clone, Copy)]
struct ArmRange {
    min: (f64, Channel),
    max: (f64, Channel),
}

fn arm_range(p: f64, points: impl Iterator<Item = Channel>) -> ArmRange {
    let mut out: Option<ArmRange> = None;
    for ch in points {
        let v = corrected(p, ch);
        out = Some(match out {
            None => ArmRange { min: (v, ch), max: (v, ch) },
            Some(mut a) => {
                if v < a.min.0 {
                    a.min = (v, ch);
                }
                if v > a.max.0 {
                    a.max = (v, ch);
                }
                a
            }
        });
    }
    out.expect("at least one rate point")
}

fn corners(sn: Interval, sp: Interval) -> impl Iterator<Item = Channel> {
    [(sn.lo, sp.lo), (sn.lo, sp.hi), (sn.hi, sp.lo), (sn.hi, sp.hi)].into_iter().map(|(a, b)| Channel::new(a, b))
}

fn grid_points(sn: Interval, sp: Interval, resolution: usize) -> impl Iterator<Item = Channel> {
    let at = move |iv: Interval, j: usize| {
        if resolution < 2 || j + 1 == resolution {
            if resolution < 2 { iv.lo } else { iv.hi }
        } else {
            iv.lo + iv.width() * j as f64 / (resolution - 1) as f64
        }
    };
    (0..resolution).flat_map(move |i| (0..resolution).map(move |j| Channel::new(at(sn, i), at(sp, j))))
}

/// Range of the applicable CACE formula over the box, by corner enumeration.
pub fn sensitivity_region(dist: &ObservedDistribution, rbox: &RateBox) -> Result<BoundsReport> {
    rbox.validate()?;
    let ranges = [0, 1].map(|z| {
        let (sn, sp) = rbox.arm(z);
        arm_range(observed_prevalence(dist, rbox.variable, z), corners(sn, sp))
    });
    assemble(dist, rbox, ranges)
}

/// The same range by evaluating each arm on a `resolution × resolution` grid.
pub fn sensitivity_region_grid(dist: &ObservedDistribution, rbox: &RateBox, resolution: usize) -> Result<BoundsReport> {
    rbox.validate()?;
    if resolution == 0 {
        return Err(Error::InvalidInput("grid resolution must be positive".into()));
    }
    let ranges = [0, 1].map(|z| {
        let (sn, sp) = rbox.arm(z);
        arm_range(observed_prevalence(dist, rbox.variable, z), grid_points(sn, sp, resolution))
    });
    assemble(dist, rbox, ranges)
}

fn rates_from(variable: DiffVariable, a1: Channel, a0: Channel) -> DifferentialRates {
    DifferentialRates { variable, sn1: a1.sn, sn0: a0.sn, sp1: a1.sp, sp0: a0.sp }
}

fn assemble(dist: &ObservedDistribution, rbox: &RateBox, ranges: [ArmRange; 2]) -> Result<BoundsReport> {
    let var = rbox.variable;
    let [r0, r1] = ranges;
    // Largest and smallest arm difference g_1 - g_0.
    let diff_hi = (r1.max.0 - r0.min.0, rates_from(var, r1.max.1, r0.min.1));
    let diff_lo = (r1.min.0 - r0.max.0, rates_from(var, r1.min.1, r0.max.1));

    let mut report = BoundsReport::new(match var {
        DiffVariable::Y => BoundsMethod::DifferentialOutcome,
        DiffVariable::D => BoundsMethod::DifferentialTreatment,
    });
    let (rd_y, rd_d) = (dist.rd_y(), dist.rd_d());
    report.naive_cace = if rd_d != 0.0 { rd_y / rd_d } else { f64::NAN };
    let v = var.name();
    report.push_rate(&format!("SN_{v}^1"), rbox.sn1.lo, rbox.sn1.hi);
    report.push_rate(&format!("SN_{v}^0"), rbox.sn0.lo, rbox.sn0.hi);
    report.push_rate(&format!("SP_{v}^1"), rbox.sp1.lo, rbox.sp1.hi);
    report.push_rate(&format!("SP_{v}^0"), rbox.sp0.lo, rbox.sp0.hi);
    for (z, r) in [(1, r1), (0, r0)] {
        report.set(format!("corrected P({v}=1|Z={z}) min"), r.min.0);
        report.set(format!("corrected P({v}=1|Z={z}) max"), r.max.0);
    }

    // (value, rates attaining it) for the low and high ends.
    let ends: Option<[(f64, DifferentialRates); 2]> = match var {
        DiffVariable::Y => {
            if rd_d == 0.0 {
                return Err(Error::ZeroDenominator { numerator: diff_hi.0 });
            }
            let a = (diff_lo.0 / rd_d, diff_lo.1);
            let b = (diff_hi.0 / rd_d, diff_hi.1);
            Some(if rd_d > 0.0 { [a, b] } else { [b, a] })
        }
        DiffVariable::D => {
            if diff_lo.0 <= 0.0 && diff_hi.0 >= 0.0 {
                None
            } else {
                // rd_y / x is monotone on an interval of one sign
                let a = (rd_y / diff_lo.0, diff_lo.1);
                let b = (rd_y / diff_hi.0, diff_hi.1);
                Some(if a.0 <= b.0 { [a, b] } else { [b, a] })
            }
        }
    };

    match ends {
        Some([lo, hi]) => {
            report.set_cace(Interval::new(lo.0, hi.0));
            for (label, (value, rates)) in [("lower", lo), ("upper", hi)] {
                report.binding.push(format!(
                    "{label} {value:.6} at sn1={}, sn0={}, sp1={}, sp0={}",
                    rates.sn1, rates.sn0, rates.sp1, rates.sp0
                ));
                report.witnesses.push(witness(dist, label, &rates));
            }
        }
        None => {
            if rd_y == 0.0 {
                report.set_cace(Interval::point(0.0));
            } else {
                report.set_cace(Interval::new(f64::NEG_INFINITY, f64::INFINITY));
            }
            report.warnings.push(
                "the corrected first stage changes sign over the box; the CACE is unbounded there".into(),
            );
        }
    }
    if report.cace_raw.lo < -1.0 || report.cace_raw.hi > 1.0 {
        report.warnings.push(format!(
            "raw range {:.6} leaves [-1, 1]; part of the box is incompatible with the data",
            report.cace_raw
        ));
    }
    Ok(report)
}

fn witness(dist: &ObservedDistribution, label: &str, rates: &DifferentialRates) -> Witness {
    let ch = rates.channels();
    match inverse_map_channels(dist, &ch) {
        Ok(model) => Witness {
            label: label.to_string(),
            channels: ch,
            feasible: check_feasibility(&model).feasible,
            cace: model.cace(),
            model: Some(model),
        },
        Err(_) => Witness { label: label.to_string(), channels: ch, model: None, cace: f64::NAN, feasible: false },
    }
}
