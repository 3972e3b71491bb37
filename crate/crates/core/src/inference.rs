//! Confidence intervals for the Wald ratio and for the partially identified
//! CACE, and one-sided tests of the testable inequalities.
//!
//! Bootstrap replicate `i` draws from its own ChaCha stream of the configured
//! seed, so results do not depend on thread scheduling.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::statistics::{Data, OrderStatistics};

use crate::bounds::{
    bounds_outcome_nondiff, bounds_outcome_strongmono, bounds_treatment_nondiff, bounds_treatment_strongmono,
    condition_recode, condition_terms, ConditionVariant, CONDITION_TOL,
};
use crate::error::{Error, Result};
use crate::observed::{Event, ObservedCounts, ObservedDistribution};
use crate::report::{BoundsReport, Interval};
use crate::sampling::{resample_arms, rng_for};

/// Stream offset separating union-interval resamples from Wald resamples.
const UNION_STREAM: u64 = 1 << 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiMethod {
    #[default]
    Delta,
    Bootstrap,
}

impl FromStr for CiMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "delta" => Ok(Self::Delta),
            "bootstrap" => Ok(Self::Bootstrap),
            _ => Err(Error::InvalidInput(format!("unknown interval method '{s}'"))),
        }
    }
}

impl fmt::Display for CiMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Delta => "delta",
            Self::Bootstrap => "bootstrap",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CiConfig {
    /// Overall error level.
    pub alpha: f64,
    /// Share of `alpha` spent on the interval for the Wald ratio in the
    /// union construction.
    pub gamma: f64,
    pub method: CiMethod,
    pub bootstrap_reps: usize,
    pub seed: u64,
    /// Number of Wald-ratio values scanned by the union construction.
    pub grid_points: usize,
}

impl Default for CiConfig {
    fn default() -> Self {
        Self { alpha: 0.05, gamma: 0.005, method: CiMethod::Delta, bootstrap_reps: 2000, seed: 20_240_601, grid_points: 200 }
    }
}

impl CiConfig {
    /// Defaults with `gamma = alpha / 10`.
    pub fn with_alpha(alpha: f64) -> Self {
        Self { alpha, gamma: alpha / 10.0, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidInput(format!("alpha = {} must lie in (0, 1)", self.alpha)));
        }
        if !(self.gamma > 0.0 && self.gamma < self.alpha) {
            return Err(Error::InvalidInput(format!("gamma = {} must lie in (0, alpha)", self.gamma)));
        }
        if self.bootstrap_reps == 0 || self.grid_points == 0 {
            return Err(Error::InvalidInput("bootstrap_reps and grid_points must be positive".into()));
        }
        Ok(())
    }
}

/// Asymptotic variances of `√n·RD_{Y|Z}` and `√n·RD_{D|Z}` and their
/// correlation, with `n` the total sample size and arm sizes held fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticVariance {
    pub sigma1_sq: f64,
    pub sigma2_sq: f64,
    pub rho: f64,
}

impl AsymptoticVariance {
    pub fn from_counts(counts: &ObservedCounts) -> Result<Self> {
        let dist = counts.to_distribution()?;
        let n = counts.total() as f64;
        let (mut s1, mut s2, mut cov) = (0.0, 0.0, 0.0);
        for z in 0..2 {
            let nz = counts.arm_total(z) as f64;
            let py = dist.prob(z, Event::y(1));
            let pd = dist.prob(z, Event::d(1));
            let pyd = dist.prob(z, Event::cell(1, 1));
            s1 += py * (1.0 - py) / nz;
            s2 += pd * (1.0 - pd) / nz;
            cov += (pyd - py * pd) / nz;
        }
        let (s1, s2, cov) = (n * s1, n * s2, n * cov);
        let rho = if s1 > 0.0 && s2 > 0.0 { (cov / (s1 * s2).sqrt()).clamp(-1.0, 1.0) } else { 0.0 };
        Ok(Self { sigma1_sq: s1, sigma2_sq: s2, rho })
    }

    pub fn covariance(&self) -> f64 {
        self.rho * (self.sigma1_sq * self.sigma2_sq).sqrt()
    }

    /// Asymptotic variance of `√n` times the Wald ratio.
    pub fn ratio_variance(&self, cace: f64, rd_d: f64) -> f64 {
        (self.sigma1_sq - 2.0 * cace * self.covariance() + cace * cace * self.sigma2_sq) / (rd_d * rd_d)
    }
}

/// A confidence interval for the Wald ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaldCi {
    pub estimate: f64,
    /// Limited to `[-1, 1]`.
    pub interval: Interval,
    pub raw: Interval,
    pub level: f64,
    pub method: CiMethod,
    pub std_error: Option<f64>,
    pub replicates: usize,
    /// Resamples with a zero first stage, left out of the percentiles.
    pub degenerate_resamples: usize,
}

fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

fn normal_cdf(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

fn quantile(values: &[f64], tau: f64) -> f64 {
    let mut data = Data::new(values.to_vec());
    data.quantile(tau)
}

fn wald_ratio(counts: &ObservedCounts) -> Option<f64> {
    let d = counts.to_distribution().ok()?;
    let rd_d = d.rd_d();
    (rd_d != 0.0).then(|| d.rd_y() / rd_d)
}

/// Interval for the Wald ratio at level `1 - alpha`.
pub fn ci_wald(counts: &ObservedCounts, cfg: &CiConfig) -> Result<WaldCi> {
    if !(cfg.alpha > 0.0 && cfg.alpha < 1.0) {
        return Err(Error::InvalidInput(format!("alpha = {} must lie in (0, 1)", cfg.alpha)));
    }
    wald_at_level(counts, cfg, cfg.alpha)
}

fn wald_at_level(counts: &ObservedCounts, cfg: &CiConfig, alpha: f64) -> Result<WaldCi> {
    let dist = counts.to_distribution()?;
    let rd_d = dist.rd_d();
    let estimate = dist.rd_y() / rd_d;
    match cfg.method {
        CiMethod::Delta => {
            if rd_d == 0.0 {
                return Err(Error::ZeroDenominator { numerator: dist.rd_y() });
            }
            let v = AsymptoticVariance::from_counts(counts)?;
            let se = (v.ratio_variance(estimate, rd_d) / counts.total() as f64).sqrt();
            let zq = normal_quantile(1.0 - alpha / 2.0);
            let raw = Interval::new(estimate - zq * se, estimate + zq * se);
            Ok(WaldCi {
                estimate,
                interval: raw.clamp(-1.0, 1.0),
                raw,
                level: 1.0 - alpha,
                method: CiMethod::Delta,
                std_error: Some(se),
                replicates: 0,
                degenerate_resamples: 0,
            })
        }
        CiMethod::Bootstrap => {
            if cfg.bootstrap_reps == 0 {
                return Err(Error::InvalidInput("bootstrap_reps must be positive".into()));
            }
            let draws: Vec<Option<f64>> = (0..cfg.bootstrap_reps as u64)
                .into_par_iter()
                .map(|i| wald_ratio(&resample_arms(&mut rng_for(cfg.seed, i), counts)))
                .collect();
            let good: Vec<f64> = draws.iter().flatten().copied().collect();
            if good.is_empty() {
                return Err(Error::ZeroDenominator { numerator: dist.rd_y() });
            }
            let raw = Interval::new(quantile(&good, alpha / 2.0), quantile(&good, 1.0 - alpha / 2.0));
            Ok(WaldCi {
                estimate,
                interval: raw.clamp(-1.0, 1.0),
                raw,
                level: 1.0 - alpha,
                method: CiMethod::Bootstrap,
                std_error: None,
                replicates: cfg.bootstrap_reps,
                degenerate_resamples: draws.len() - good.len(),
            })
        }
    }
}

/// Which closed-form bounds the union interval is built on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    OutcomeNondiff,
    TreatmentNondiff,
    OutcomeStrongMono,
    TreatmentStrongMono,
}

impl BoundKind {
    pub const ALL: [BoundKind; 4] =
        [Self::OutcomeNondiff, Self::TreatmentNondiff, Self::OutcomeStrongMono, Self::TreatmentStrongMono];

    pub fn bounds(&self, dist: &ObservedDistribution) -> Result<BoundsReport> {
        match self {
            Self::OutcomeNondiff => bounds_outcome_nondiff(dist),
            Self::TreatmentNondiff => bounds_treatment_nondiff(dist),
            Self::OutcomeStrongMono => bounds_outcome_strongmono(dist),
            Self::TreatmentStrongMono => bounds_treatment_strongmono(dist),
        }
    }

    /// From the mismeasured variable (`"y"` or `"d"`) and the noncompliance
    /// assumption.
    pub fn select(variable: &str, strong_mono: bool) -> Result<Self> {
        match (variable, strong_mono) {
            ("y", false) => Ok(Self::OutcomeNondiff),
            ("d", false) => Ok(Self::TreatmentNondiff),
            ("y", true) => Ok(Self::OutcomeStrongMono),
            ("d", true) => Ok(Self::TreatmentStrongMono),
            _ => Err(Error::InvalidInput(format!(
                "closed-form bounds exist only for a single mismeasured D or Y, not '{variable}'"
            ))),
        }
    }
}

/// The bounds written as `{t·f : f ∈ [l, u]}` with `t` the Wald ratio.
fn factors(report: &BoundsReport) -> Option<(f64, f64)> {
    let c = report.naive_cace;
    if !(c.is_finite() && c != 0.0) {
        return None;
    }
    let (a, b) = (report.cace_raw.lo / c, report.cace_raw.hi / c);
    (a.is_finite() && b.is_finite()).then(|| (a.min(b), a.max(b)))
}

#[derive(Debug, Clone, Copy)]
struct Replicate {
    ratio: f64,
    lo: f64,
    hi: f64,
}

fn replicate(counts: &ObservedCounts, kind: BoundKind) -> Option<Replicate> {
    let dist = counts.to_distribution().ok()?;
    let report = kind.bounds(&dist).ok()?;
    let (lo, hi) = factors(&report)?;
    Some(Replicate { ratio: report.naive_cace, lo, hi })
}

/// Union confidence interval for a partially identified CACE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnionCi {
    pub kind: BoundKind,
    pub alpha: f64,
    pub gamma: f64,
    /// Limited to `[-1, 1]`.
    pub interval: Interval,
    pub raw: Interval,
    /// Level `1 - gamma` interval for the Wald ratio.
    pub ci_prime: Interval,
    /// Level `1 - (alpha - gamma)` range of the bound factors.
    pub factor_lo: f64,
    pub factor_hi: f64,
    /// Bounds at the point estimate.
    pub point_bounds: Interval,
    pub replicates: usize,
    pub degenerate_resamples: usize,
    /// `(gamma, interval length)` on a few values of `gamma`.
    pub gamma_profile: Vec<[f64; 2]>,
    pub warnings: Vec<String>,
}

/// Union interval: a level `1 - gamma` interval for the Wald ratio `t`,
/// then for each `t` on a grid over it the level `1 - (alpha - gamma)`
/// interval `[t·l, t·u]` with `l, u` the bootstrap limits of the bound
/// factors, then the union over the grid.
pub fn ci_union(counts: &ObservedCounts, kind: BoundKind, cfg: &CiConfig) -> Result<UnionCi> {
    cfg.validate()?;
    let dist = counts.to_distribution()?;
    let point = kind.bounds(&dist)?;
    let (l_hat, u_hat) = factors(&point).ok_or(Error::ZeroDenominator { numerator: dist.rd_y() })?;

    let draws: Vec<Option<Replicate>> = (0..cfg.bootstrap_reps as u64)
        .into_par_iter()
        .map(|i| replicate(&resample_arms(&mut rng_for(cfg.seed, UNION_STREAM + i), counts), kind))
        .collect();
    let good: Vec<Replicate> = draws.iter().flatten().copied().collect();
    if good.is_empty() {
        return Err(Error::InvalidInput("every bootstrap resample was degenerate".into()));
    }
    let los: Vec<f64> = good.iter().map(|r| r.lo).collect();
    let his: Vec<f64> = good.iter().map(|r| r.hi).collect();
    let ratios: Vec<f64> = good.iter().map(|r| r.ratio).collect();

    let build = |gamma: f64| -> Result<(Interval, Interval, f64, f64)> {
        let ci_prime = match cfg.method {
            CiMethod::Delta => wald_at_level(counts, cfg, gamma)?.raw,
            CiMethod::Bootstrap => Interval::new(quantile(&ratios, gamma / 2.0), quantile(&ratios, 1.0 - gamma / 2.0)),
        };
        let rest = cfg.alpha - gamma;
        // widened to contain the point factors
        let f_lo = quantile(&los, rest / 2.0).min(l_hat);
        let f_hi = quantile(&his, 1.0 - rest / 2.0).max(u_hat);
        let mut union: Option<Interval> = None;
        let g = cfg.grid_points.max(2);
        for j in 0..g {
            let t = ci_prime.lo + ci_prime.width() * j as f64 / (g - 1) as f64;
            let piece = Interval::spanning(t * f_lo, t * f_hi);
            union = Some(union.map_or(piece, |u| u.hull(&piece)));
        }
        Ok((union.expect("grid is non-empty"), ci_prime, f_lo, f_hi))
    };

    let (raw, ci_prime, factor_lo, factor_hi) = build(cfg.gamma)?;
    let mut gamma_profile = Vec::new();
    for share in [0.02, 0.1, 0.25, 0.5, 0.75] {
        let g = cfg.alpha * share;
        let (iv, ..) = build(g)?;
        gamma_profile.push([g, iv.clamp(-1.0, 1.0).width()]);
    }
    let mut warnings = Vec::new();
    if !point.feasible {
        warnings.push("the point-estimate bounds are infeasible; the interval is not meaningful".into());
    }
    let degenerate = draws.len() - good.len();
    if degenerate > 0 {
        warnings.push(format!("{degenerate} of {} bootstrap resamples were degenerate", draws.len()));
    }
    Ok(UnionCi {
        kind,
        alpha: cfg.alpha,
        gamma: cfg.gamma,
        interval: raw.clamp(-1.0, 1.0),
        raw,
        ci_prime,
        factor_lo,
        factor_hi,
        point_bounds: point.cace,
        replicates: cfg.bootstrap_reps,
        degenerate_resamples: degenerate,
        gamma_profile,
        warnings,
    })
}

/// One-sided test of `lhs ≥ rhs`; small p-values are evidence of violation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityTest {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub std_error: f64,
    pub z: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityTests {
    pub variant: ConditionVariant,
    pub recoded: bool,
    pub tests: Vec<InequalityTest>,
    pub min_p: f64,
    /// `min(1, k · min_p)` over the `k` inequalities.
    pub bonferroni_p: f64,
}

/// Normal-approximation tests of the slack of each inequality, with the
/// standard error from the multinomial covariance within each arm. For a
/// plain difference of proportions this is the unpooled two-sample test.
pub fn test_inequalities(counts: &ObservedCounts, variant: ConditionVariant) -> Result<InequalityTests> {
    let dist = counts.to_distribution()?;
    let recoded = condition_recode(&dist, variant);
    let cells = *dist.cells();
    let base = condition_terms(&cells, variant, recoded);
    let k = base.len();

    // Slack polynomials have degree at most 2, so central differences are exact.
    let h = 1e-4;
    let mut grads = vec![[[0.0; 4]; 2]; k];
    for z in 0..2 {
        for c in 0..4 {
            let mut up = cells;
            let mut dn = cells;
            up[z][c / 2][c % 2] += h;
            dn[z][c / 2][c % 2] -= h;
            let tu = condition_terms(&up, variant, recoded);
            let td = condition_terms(&dn, variant, recoded);
            for i in 0..k {
                grads[i][z][c] = ((tu[i].1 - tu[i].2) - (td[i].1 - td[i].2)) / (2.0 * h);
            }
        }
    }

    let tests: Vec<InequalityTest> = base
        .into_iter()
        .zip(&grads)
        .map(|((name, lhs, rhs), g)| {
            let mut var = 0.0;
            for z in 0..2 {
                let n = counts.arm_total(z) as f64;
                let p: Vec<f64> = (0..4).map(|c| cells[z][c / 2][c % 2]).collect();
                let mean: f64 = (0..4).map(|c| g[z][c] * p[c]).sum();
                let second: f64 = (0..4).map(|c| g[z][c] * g[z][c] * p[c]).sum();
                var += (second - mean * mean) / n;
            }
            let slack = lhs - rhs;
            let se = var.max(0.0).sqrt();
            let (z, p_value) = if se > 0.0 {
                (slack / se, normal_cdf(slack / se))
            } else if slack < -CONDITION_TOL {
                (f64::NEG_INFINITY, 0.0)
            } else if slack > CONDITION_TOL {
                (f64::INFINITY, 1.0)
            } else {
                (0.0, 0.5)
            };
            InequalityTest { name, lhs, rhs, slack, std_error: se, z, p_value }
        })
        .collect();
    let min_p = tests.iter().map(|t| t.p_value).fold(1.0, f64::min);
    Ok(InequalityTests { variant, recoded, min_p, bonferroni_p: (min_p * k as f64).min(1.0), tests })
}
