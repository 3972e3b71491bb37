//! Monte Carlo harness: random feasible latent models, misclassification
//! channels, finite-sample and exact observed data, and the audit that checks
//! closed-form bounds against the truth and against a numeric sweep.
//!
//! Model and rate draws for index `i` come from stream `i` of the master
//! seed, so every replicate is reproducible on its own.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::BoundKind;
use crate::latent::{check_feasibility, forward_map_channels, Channel, Channels, LatentIvModel, COMPLIER};
use crate::numopt::{numeric_bounds, Mismeasured, SearchConfig};
use crate::observed::ObservedCounts;
use crate::report::Interval;
use crate::sampling::{multinomial, rng_for};

/// Relative slack allowed when checking that the truth lies in the bounds.
pub const CONTAINMENT_TOL: f64 = 1e-9;
/// Largest gap between a closed-form endpoint and the numeric sweep that
/// still counts as attained.
pub const SHARPNESS_TOL: f64 = 1e-3;
const MAX_REDRAWS: usize = 10_000;

/// Ranges for sampled sensitivities and specificities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateRanges {
    pub sn: Interval,
    pub sp: Interval,
}

impl Default for RateRanges {
    fn default() -> Self {
        Self { sn: Interval::new(0.6, 1.0), sp: Interval::new(0.6, 1.0) }
    }
}

impl RateRanges {
    pub fn identity() -> Self {
        Self { sn: Interval::point(1.0), sp: Interval::point(1.0) }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Channel {
        let u = |iv: Interval, r: &mut R| iv.lo + iv.width() * r.random::<f64>();
        Channel::new(u(self.sn, rng), u(self.sp, rng))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub seed: u64,
    pub n_models: usize,
    /// Units per synthetic dataset; `None` means exact probabilities.
    pub sample_size: Option<u64>,
    pub mismeasured: Mismeasured,
    pub rates: RateRanges,
    pub strong_mono: bool,
    /// Range of `P(Z=1)`.
    pub pz: Interval,
}

impl ScenarioSpec {
    pub fn new(seed: u64, n_models: usize, mismeasured: Mismeasured) -> Self {
        Self {
            seed,
            n_models,
            sample_size: None,
            mismeasured,
            rates: RateRanges::default(),
            strong_mono: false,
            pz: Interval::new(0.1, 0.9),
        }
    }

    pub fn strong_mono(mut self, on: bool) -> Self {
        self.strong_mono = on;
        self
    }

    pub fn rates(mut self, rates: RateRanges) -> Self {
        self.rates = rates;
        self
    }

    pub fn sample_size(mut self, n: Option<u64>) -> Self {
        self.sample_size = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_size == Some(0) {
            return Err(Error::InvalidInput("sample size must be at least 1".into()));
        }
        let r = self.rates;
        let inside = |iv: Interval| iv.lo <= iv.hi && iv.lo >= 0.0 && iv.hi <= 1.0;
        if !(inside(r.sn) && inside(r.sp)) {
            return Err(Error::InvalidInput("rate ranges must be sub-intervals of [0, 1]".into()));
        }
        if r.sn.lo + r.sp.lo <= 1.0 {
            return Err(Error::NonInformativeRates { what: "min SN + min SP - 1".into(), value: r.sn.lo + r.sp.lo - 1.0 });
        }
        if !(self.pz.lo > 0.0 && self.pz.hi < 1.0 && self.pz.lo <= self.pz.hi) {
            return Err(Error::InvalidInput("P(Z=1) range must lie inside (0, 1)".into()));
        }
        Ok(())
    }
}

fn draw_model<R: Rng + ?Sized>(spec: &ScenarioSpec, rng: &mut R) -> LatentIvModel {
    let pz = spec.pz.lo + spec.pz.width() * rng.random::<f64>();
    // spacings of sorted uniforms are uniform on the simplex
    let pi = if spec.strong_mono {
        let n: f64 = rng.random();
        [0.0, n, 1.0 - n]
    } else {
        let (a, b): (f64, f64) = (rng.random(), rng.random());
        let (lo, hi) = (a.min(b), a.max(b));
        [lo, hi - lo, 1.0 - hi]
    };
    let py: [f64; 4] = [rng.random(), rng.random(), rng.random(), rng.random()];
    LatentIvModel::new(pz, pi, py[0], py[1], [py[2], py[3]])
}

/// Model number `index` of the scenario.
pub fn latent_model(spec: &ScenarioSpec, index: u64) -> LatentIvModel {
    draw_model(spec, &mut rng_for(spec.seed, index))
}

/// The scenario's models in order.
pub fn sample_latent(spec: &ScenarioSpec) -> impl Iterator<Item = LatentIvModel> + '_ {
    (0..spec.n_models as u64).map(move |i| latent_model(spec, i))
}

/// Model and channels number `index`. Under one-sided noncompliance the
/// treatment channel acts in the treated arm only. Instrument channels are
/// redrawn until they are compatible with the model's `P(Z=1)`.
pub fn scenario_draw(spec: &ScenarioSpec, index: u64) -> Result<(LatentIvModel, Channels)> {
    let mut rng = rng_for(spec.seed, index);
    let model = draw_model(spec, &mut rng);
    let mut ch = Channels::PERFECT;
    if spec.mismeasured.d {
        let c = spec.rates.draw(&mut rng);
        ch.d = if spec.strong_mono { [Channel::PERFECT, c] } else { [c; 2] };
    }
    if spec.mismeasured.y {
        ch.y = [spec.rates.draw(&mut rng); 2];
    }
    if spec.mismeasured.z {
        let mut tries = 0;
        loop {
            let c = spec.rates.draw(&mut rng);
            let q = (model.pz - (1.0 - c.sp)) / c.r();
            if q > 0.0 && q < 1.0 {
                ch.z = c;
                break;
            }
            tries += 1;
            if tries > MAX_REDRAWS {
                return Err(Error::InfeasibleZChannel { implied: q });
            }
        }
    }
    Ok((model, ch))
}

/// How observed data are generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SampleSize {
    /// Draw units one at a time through the full generative process.
    Units(u64),
    /// One multinomial draw from the exact observed law.
    Multinomial(u64),
    /// Exact observed probabilities times a pseudo-count, rounded.
    Exact(u64),
}

/// Observed counts for `model` seen through `ch`.
pub fn simulate_observed(model: &LatentIvModel, ch: &Channels, size: SampleSize, seed: u64) -> Result<ObservedCounts> {
    let exact = forward_map_channels(model, ch)?;
    let joint: Vec<f64> = (0..8)
        .map(|k| {
            let (z, d, y) = (k / 4, (k / 2) % 2, k % 2);
            let w = if z == 1 { exact.pz() } else { 1.0 - exact.pz() };
            w * exact.cell(z, d, y)
        })
        .collect();
    let mut out = ObservedCounts::default();
    match size {
        SampleSize::Exact(pseudo) => {
            for (k, p) in joint.iter().enumerate() {
                out.set(k / 4, (k / 2) % 2, k % 2, (p * pseudo as f64).round() as u64);
            }
        }
        SampleSize::Multinomial(n) => {
            let mut rng = rng_for(seed, 0);
            for (k, c) in multinomial(&mut rng, n, &joint).into_iter().enumerate() {
                out.set(k / 4, (k / 2) % 2, k % 2, c);
            }
        }
        SampleSize::Units(n) => {
            let mut rng = rng_for(seed, 0);
            // forward instrument channel P(Z'=1 | Z=z) from the stored reverse one
            let q = exact.pz();
            let zc = ch.z;
            let zp1 = [(1.0 - zc.sn) * q / (1.0 - model.pz), zc.sn * q / model.pz];
            let pi = model.pi();
            let flip = |rng: &mut rand_chacha::ChaCha8Rng, p: f64| (rng.random::<f64>() < p) as usize;
            for _ in 0..n {
                let z = flip(&mut rng, model.pz);
                let r: f64 = rng.random();
                let u = if r < pi[0] { 0 } else if r < pi[0] + pi[1] { 1 } else { COMPLIER };
                let d = LatentIvModel::treatment(u, z);
                let y = flip(&mut rng, model.py[u][z]);
                let zp = flip(&mut rng, zp1[z].clamp(0.0, 1.0));
                let dp = flip(&mut rng, ch.d[z].prob(1, d));
                let yp = flip(&mut rng, ch.y[z].prob(1, y));
                out.set(zp, dp, yp, out.get(zp, dp, yp) + 1);
            }
        }
    }
    Ok(out)
}

/// One audited model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub index: u64,
    pub true_cace: f64,
    pub naive_cace: f64,
    /// Closed-form bounds, before limiting to `[-1, 1]`.
    pub bounds: Interval,
    pub feasible: bool,
    pub contained: bool,
    /// Inner range found by the numeric sweep, when any point was feasible.
    pub numeric: Option<Interval>,
    pub lower_gap: f64,
    pub upper_gap: f64,
    pub attained: bool,
    /// The sweep found feasible rates beyond the closed-form range.
    pub exceeded: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub kind: BoundKind,
    pub n_models: usize,
    pub containment_violations: usize,
    pub sharpness_violations: usize,
    pub exceedances: usize,
    pub errors: usize,
    pub max_lower_gap: f64,
    pub max_upper_gap: f64,
    pub records: Vec<AuditRecord>,
}

impl AuditReport {
    /// Summary line followed by one JSON object per model.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let summary = serde_json::json!({
            "kind": self.kind,
            "n_models": self.n_models,
            "containment_violations": self.containment_violations,
            "sharpness_violations": self.sharpness_violations,
            "exceedances": self.exceedances,
            "errors": self.errors,
            "max_lower_gap": self.max_lower_gap,
            "max_upper_gap": self.max_upper_gap,
        });
        writeln!(w, "{summary}")?;
        for r in &self.records {
            writeln!(w, "{}", serde_json::to_string(r).map_err(std::io::Error::other)?)?;
        }
        Ok(())
    }
}

/// Settings of the numeric sweep used for the sharpness check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub grid: usize,
    pub rounds: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { grid: 201, rounds: 2 }
    }
}

fn audit_kind(spec: &ScenarioSpec) -> Result<BoundKind> {
    let m = spec.mismeasured;
    match (m.d, m.y, m.z) {
        (false, true, false) => BoundKind::select("y", spec.strong_mono),
        (true, false, false) => BoundKind::select("d", spec.strong_mono),
        _ => Err(Error::InvalidInput("the audit needs exactly one of D or Y mismeasured".into())),
    }
}

/// Checks the closed-form bounds on every scenario model with exact data:
/// the true CACE must lie inside, and a numeric sweep over the rates must
/// reach each endpoint.
pub fn sharpness_audit(spec: &ScenarioSpec) -> Result<AuditReport> {
    sharpness_audit_with(spec, &SweepConfig::default())
}

pub fn sharpness_audit_with(spec: &ScenarioSpec, sweep: &SweepConfig) -> Result<AuditReport> {
    spec.validate()?;
    let kind = audit_kind(spec)?;
    let search = SearchConfig::new(spec.mismeasured).strong_mono(spec.strong_mono).grid(sweep.grid).rounds(sweep.rounds);
    search.validate()?;
    let records: Vec<AuditRecord> =
        (0..spec.n_models as u64).into_par_iter().map(|i| audit_one(spec, kind, &search, i)).collect();

    let mut report = AuditReport {
        kind,
        n_models: spec.n_models,
        containment_violations: 0,
        sharpness_violations: 0,
        exceedances: 0,
        errors: 0,
        max_lower_gap: 0.0,
        max_upper_gap: 0.0,
        records: Vec::new(),
    };
    for r in &records {
        if r.error.is_some() {
            report.errors += 1;
            continue;
        }
        report.containment_violations += !r.contained as usize;
        report.sharpness_violations += !r.attained as usize;
        report.exceedances += r.exceeded as usize;
        report.max_lower_gap = report.max_lower_gap.max(r.lower_gap);
        report.max_upper_gap = report.max_upper_gap.max(r.upper_gap);
    }
    report.records = records;
    Ok(report)
}

fn audit_one(spec: &ScenarioSpec, kind: BoundKind, search: &SearchConfig, index: u64) -> AuditRecord {
    let mut rec = AuditRecord {
        index,
        true_cace: f64::NAN,
        naive_cace: f64::NAN,
        bounds: Interval::point(f64::NAN),
        feasible: false,
        contained: false,
        numeric: None,
        lower_gap: f64::INFINITY,
        upper_gap: f64::INFINITY,
        attained: false,
        exceeded: false,
        error: None,
    };
    let run = |rec: &mut AuditRecord| -> Result<()> {
        let (model, ch) = scenario_draw(spec, index)?;
        debug_assert!(check_feasibility(&model).feasible);
        rec.true_cace = model.cace();
        let dist = forward_map_channels(&model, &ch)?;
        let b = kind.bounds(&dist)?;
        rec.naive_cace = b.naive_cace;
        rec.bounds = b.cace_raw;
        rec.feasible = b.feasible;
        let tol = CONTAINMENT_TOL * rec.true_cace.abs().max(1.0);
        rec.contained = b.feasible && b.cace_raw.contains(rec.true_cace, tol);
        let n = numeric_bounds(&dist, search)?;
        let num = n.cace_raw;
        rec.numeric = Some(num);
        rec.lower_gap = (num.lo - b.cace_raw.lo).abs();
        rec.upper_gap = (num.hi - b.cace_raw.hi).abs();
        rec.attained = rec.lower_gap <= SHARPNESS_TOL && rec.upper_gap <= SHARPNESS_TOL;
        rec.exceeded = !b.cace_raw.contains_interval(&num, SHARPNESS_TOL);
        Ok(())
    };
    if let Err(e) = run(&mut rec) {
        rec.error = Some(e.to_string());
    }
    rec
}
