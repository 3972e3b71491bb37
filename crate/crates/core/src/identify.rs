//! Point identification: the Wald ratio on observed data, its correction for
//! non-differential misclassification, the two-variable attenuation factor,
//! and the weight linking a dichotomized ordinal treatment to 2SLS.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observed::ObservedDistribution;

/// A Wald ratio `RD_{Y|Z} / RD_{D|Z}` with its parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaceEstimate {
    pub value: f64,
    pub numerator: f64,
    pub denominator: f64,
}

/// Non-differential sensitivities and specificities.
///
/// `sn_d, sp_d, sn_y, sp_y` are forward (`P(D'=1|D=1)` etc.). The instrument
/// pair is in the reverse direction: `sn_z = P(Z=1|Z'=1)`,
/// `sp_z = P(Z=0|Z'=0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NondiffRates {
    pub sn_d: f64,
    pub sp_d: f64,
    pub sn_y: f64,
    pub sp_y: f64,
    pub sn_z: f64,
    pub sp_z: f64,
}

impl Default for NondiffRates {
    fn default() -> Self {
        Self::PERFECT
    }
}

impl NondiffRates {
    pub const PERFECT: NondiffRates =
        NondiffRates { sn_d: 1.0, sp_d: 1.0, sn_y: 1.0, sp_y: 1.0, sn_z: 1.0, sp_z: 1.0 };

    pub fn outcome(sn_y: f64, sp_y: f64) -> Self {
        Self { sn_y, sp_y, ..Self::PERFECT }
    }

    pub fn treatment(sn_d: f64, sp_d: f64) -> Self {
        Self { sn_d, sp_d, ..Self::PERFECT }
    }

    pub fn instrument(sn_z: f64, sp_z: f64) -> Self {
        Self { sn_z, sp_z, ..Self::PERFECT }
    }

    pub fn r_d(&self) -> f64 {
        self.sn_d + self.sp_d - 1.0
    }

    pub fn r_y(&self) -> f64 {
        self.sn_y + self.sp_y - 1.0
    }

    pub fn r_z(&self) -> f64 {
        self.sn_z + self.sp_z - 1.0
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            ("sn_d", self.sn_d),
            ("sp_d", self.sp_d),
            ("sn_y", self.sn_y),
            ("sp_y", self.sp_y),
            ("sn_z", self.sn_z),
            ("sp_z", self.sp_z),
        ];
        for (name, v) in all {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidInput(format!("{name} = {v} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// `RD_{Y|Z} / RD_{D|Z}` on the given (possibly mismeasured) distribution.
pub fn naive_cace(dist: &ObservedDistribution) -> Result<CaceEstimate> {
    let numerator = dist.rd_y();
    let denominator = dist.rd_d();
    if denominator == 0.0 {
        return Err(Error::ZeroDenominator { numerator });
    }
    Ok(CaceEstimate { value: numerator / denominator, numerator, denominator })
}

/// `naive × r_d / r_y`.
pub fn corrected_cace(naive: &CaceEstimate, rates: &NondiffRates) -> Result<f64> {
    let (r_d, r_y) = (rates.r_d(), rates.r_y());
    if r_d <= 0.0 {
        return Err(Error::NonInformativeRates { what: "r_d".into(), value: r_d });
    }
    if r_y <= 0.0 {
        return Err(Error::NonInformativeRates { what: "r_y".into(), value: r_y });
    }
    Ok(naive.value * r_d / r_y)
}

/// Observed risk difference of `Q'` on `S'` when the true one is `rd_true`.
///
/// `a_s = P(S=s | S'=s)` (reverse direction) and `b_q = P(Q'=q | Q=q)`.
pub fn bross_attenuation(rd_true: f64, a1: f64, a0: f64, b1: f64, b0: f64) -> f64 {
    (a1 + a0 - 1.0) * (b1 + b0 - 1.0) * rd_true
}

/// Survival margins `P(D ≥ j | Z=z)`, `j = 1..J`, of an ordinal treatment
/// taking values `0..=J`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiTreatmentMargins {
    q1: Vec<f64>,
    q0: Vec<f64>,
}

impl MultiTreatmentMargins {
    pub fn new(q1: Vec<f64>, q0: Vec<f64>) -> Result<Self> {
        if q1.is_empty() || q1.len() != q0.len() {
            return Err(Error::InvalidInput("margins must be non-empty and of equal length".into()));
        }
        for q in [&q1, &q0] {
            if q.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::InvalidInput("margins must lie in [0, 1]".into()));
            }
            if q.windows(2).any(|w| w[1] > w[0]) {
                return Err(Error::InvalidInput("margins must be non-increasing in j".into()));
            }
        }
        if let Some(j) = q1.iter().zip(&q0).position(|(a, b)| a < b) {
            return Err(Error::InvalidInput(format!(
                "q1[{}] < q0[{}] contradicts monotone compliance",
                j + 1,
                j + 1
            )));
        }
        Ok(Self { q1, q0 })
    }

    /// Builds margins from the arm-wise laws `P(D=j | Z=z)`, `j = 0..=J`.
    pub fn from_pmfs(p1: &[f64], p0: &[f64]) -> Result<Self> {
        let tail = |p: &[f64]| -> Vec<f64> {
            (1..p.len()).map(|j| p[j..].iter().sum::<f64>().clamp(0.0, 1.0)).collect()
        };
        Self::new(tail(p1), tail(p0))
    }

    pub fn levels(&self) -> usize {
        self.q1.len()
    }

    pub fn q1(&self) -> &[f64] {
        &self.q1
    }

    pub fn q0(&self) -> &[f64] {
        &self.q0
    }

    /// `E[D | Z=1] - E[D | Z=0]`.
    pub fn mean_difference(&self) -> f64 {
        self.q1.iter().zip(&self.q0).map(|(a, b)| a - b).sum()
    }
}

/// `w_k = (q1[k] - q0[k]) / Σ_j (q1[j] - q0[j])`, with `k` one-based.
pub fn dichotomize_weight(margins: &MultiTreatmentMargins, k: usize) -> Result<f64> {
    if k == 0 || k > margins.levels() {
        return Err(Error::InvalidInput(format!("k = {k} outside 1..={}", margins.levels())));
    }
    let total = margins.mean_difference();
    if total <= 0.0 {
        return Err(Error::ZeroComplianceMass);
    }
    Ok((margins.q1[k - 1] - margins.q0[k - 1]) / total)
}
