//! Closed-form sharp bounds when exactly one of treatment or outcome is
//! misclassified, with and without one-sided noncompliance, and the
//! observable inequalities those models imply.
//!
//! All formulas assume a non-negative naive Wald ratio. With
//! [`SignHandling::Auto`] a negative ratio is handled by swapping the outcome
//! labels internally; reported intervals and rates are mapped back to the
//! input coding while `intermediates` stay in the analysis coding.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::latent::{check_feasibility, inverse_map_channels, Channel, Channels, StrongMonoRates};
use crate::observed::{recode_outcome, Event, ObservedDistribution, RiskDiffSpec};
use crate::report::{BoundsMethod, BoundsReport, Interval, SignHandling, Witness};

const Y1: Event = Event::y(1);
const Y0: Event = Event::y(0);
const D1: Event = Event::d(1);
const D0: Event = Event::d(0);

/// Default tolerance on `P(D=1 | Z=0)` under one-sided noncompliance.
pub const STRONG_MONO_TOL: f64 = 1e-9;

/// Number of rows in the SP-dependent SN bound table.
const SN_TABLE_ROWS: usize = 11;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundsOptions {
    pub sign: SignHandling,
    pub strong_mono_tol: f64,
}

impl Default for BoundsOptions {
    fn default() -> Self {
        Self { sign: SignHandling::Auto, strong_mono_tol: STRONG_MONO_TOL }
    }
}

impl BoundsOptions {
    pub fn as_coded() -> Self {
        Self { sign: SignHandling::AsCoded, ..Self::default() }
    }
}

/// Returns the distribution the formulas are applied to.
fn orient(dist: &ObservedDistribution, sign: SignHandling, report: &mut BoundsReport) -> ObservedDistribution {
    if dist.rd_y() * dist.rd_d() >= 0.0 {
        return *dist;
    }
    match sign {
        SignHandling::Auto => {
            report.recoded = true;
            report.warnings.push("naive CACE < 0: outcome labels swapped for the computation".into());
            recode_outcome(dist)
        }
        SignHandling::AsCoded => {
            report.warnings.push("naive CACE < 0: formulas applied to the data as coded".into());
            *dist
        }
    }
}

/// Largest (or smallest) defined value with its label.
fn extremum(items: &[(&str, Option<f64>)], max: bool) -> (f64, String) {
    let mut best: Option<(f64, &str)> = None;
    for &(label, v) in items {
        let Some(v) = v else { continue };
        if v.is_nan() {
            continue;
        }
        let better = match best {
            None => true,
            Some((b, _)) => (max && v > b) || (!max && v < b),
        };
        if better {
            best = Some((v, label));
        }
    }
    best.map(|(v, l)| (v, l.to_string())).unwrap_or((f64::NAN, String::new()))
}

fn push_outcome_rates(report: &mut BoundsReport, sn: (f64, f64), sp: (f64, f64)) {
    let (sn_name, sp_name) = if report.recoded { ("SP_Y", "SN_Y") } else { ("SN_Y", "SP_Y") };
    report.push_rate(sn_name, sn.0, sn.1);
    report.push_rate(sp_name, sp.0, sp.1);
}

/// Maps an analysis-frame CACE interval to the input coding.
fn finish_cace(report: &mut BoundsReport, analysis: Interval) {
    let raw = if report.recoded { analysis.negate() } else { analysis };
    report.set_cace(raw);
}

/// Evaluates a rate configuration on the input data.
fn witness(input: &ObservedDistribution, label: &str, mut ch: Channels, recoded: bool) -> Witness {
    if recoded {
        for c in ch.y.iter_mut() {
            *c = Channel::new(c.sp, c.sn);
        }
    }
    match inverse_map_channels(input, &ch) {
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

fn outcome_channels(sn: f64, sp: f64) -> Channels {
    Channels { y: [Channel::new(sn, sp); 2], ..Channels::PERFECT }
}

fn treatment_channels(sn: f64, sp: f64) -> Channels {
    Channels { d: [Channel::new(sn, sp); 2], ..Channels::PERFECT }
}

/// Outcome misclassified with non-differential error.
pub fn bounds_outcome_nondiff(dist: &ObservedDistribution) -> Result<BoundsReport> {
    bounds_outcome_nondiff_with(dist, &BoundsOptions::default())
}

pub fn bounds_outcome_nondiff_with(dist: &ObservedDistribution, opts: &BoundsOptions) -> Result<BoundsReport> {
    let mut report = BoundsReport::new(BoundsMethod::OutcomeNondiff);
    let rd_d = dist.rd_d();
    if rd_d == 0.0 {
        return Err(Error::ZeroDenominator { numerator: dist.rd_y() });
    }
    report.naive_cace = dist.rd_y() / rd_d;
    let d = orient(dist, opts.sign, &mut report);
    let naive = d.rd_y() / rd_d;

    let set = [
        ("P(Y'=1|D=0,Z=1)", d.cond(1, Y1, D0)),
        ("P(Y'=1|D=1,Z=0)", d.cond(0, Y1, D1)),
        ("RD_{Y'D|Z}/RD_{D|Z}", Some(d.risk_difference(RiskDiffSpec::on_z(Y1.and(D1))) / rd_d)),
        ("RD_{Y'(1-D)|(1-Z)}/RD_{D|Z}", Some(d.risk_difference(RiskDiffSpec::on_not_z(Y1.and(D0))) / rd_d)),
    ];
    for (label, v) in set {
        if let Some(v) = v {
            report.set(label, v);
        }
    }
    let (m, m_at) = extremum(&set, true);
    let (n, n_at) = extremum(&set, false);
    report.set("M_Y", m);
    report.set("N_Y", n);
    report.set("CACE'", naive);
    report.binding.push(format!("SN_Y lower bound M_Y attained by {m_at}"));
    report.binding.push(format!("SP_Y lower bound 1-N_Y attained by {n_at}"));

    report.feasible = m <= 1.0 && n >= 0.0 && rd_d > 0.0;
    if rd_d < 0.0 {
        report.warnings.push("RD_{D|Z} < 0 contradicts monotone compliance".into());
    }
    push_outcome_rates(&mut report, (m, 1.0), (1.0 - n, 1.0));

    let width = m - n;
    let upper = if width > 0.0 {
        naive / width
    } else {
        report.warnings.push("M_Y - N_Y <= 0: upper bound set to 1".into());
        1.0
    };
    finish_cace(&mut report, Interval::spanning(naive, upper));

    if report.feasible {
        report.witnesses.push(witness(dist, "lower", outcome_channels(1.0, 1.0), report.recoded));
        report.witnesses.push(witness(dist, "upper", outcome_channels(m, 1.0 - n), report.recoded));
    }
    Ok(report)
}

/// Treatment misclassified with non-differential error.
pub fn bounds_treatment_nondiff(dist: &ObservedDistribution) -> Result<BoundsReport> {
    bounds_treatment_nondiff_with(dist, &BoundsOptions::default())
}

pub fn bounds_treatment_nondiff_with(dist: &ObservedDistribution, opts: &BoundsOptions) -> Result<BoundsReport> {
    let mut report = BoundsReport::new(BoundsMethod::TreatmentNondiff);
    let rd_d = dist.rd_d();
    if rd_d == 0.0 {
        return Err(Error::ZeroDenominator { numerator: dist.rd_y() });
    }
    report.naive_cace = dist.rd_y() / rd_d;
    let d = orient(dist, opts.sign, &mut report);
    let rd_y = d.rd_y();
    let rd_yd = d.risk_difference(RiskDiffSpec::on_z(Y1.and(D1)));
    if rd_y == 0.0 {
        return Err(Error::ZeroDenominator { numerator: rd_yd });
    }
    let naive = rd_y / rd_d;
    let a = rd_yd / rd_y;
    let b = d.risk_difference(RiskDiffSpec::on_not_z(Y0.and(D1))) / rd_y;

    let m_set = [
        ("P(D'=1|Z=1)", Some(d.prob(1, D1))),
        ("P(D'=1|Z=0)", Some(d.prob(0, D1))),
        ("P(D'=1|Y=1,Z=1)", d.cond(1, D1, Y1)),
        ("P(D'=1|Y=0,Z=1)", d.cond(1, D1, Y0)),
        ("RD_{(1-Y)D'|(1-Z)}/RD_{Y|Z}", Some(b)),
    ];
    let n_set = [
        ("P(D'=1|Z=1)", Some(d.prob(1, D1))),
        ("P(D'=1|Z=0)", Some(d.prob(0, D1))),
        ("P(D'=1|Y=1,Z=0)", d.cond(0, D1, Y1)),
        ("P(D'=1|Y=0,Z=0)", d.cond(0, D1, Y0)),
        ("RD_{YD'|Z}/RD_{Y|Z}", Some(a)),
    ];
    for (label, v) in m_set.iter().chain(&n_set) {
        if let Some(v) = v {
            report.set(*label, *v);
        }
    }
    let (m, m_at) = extremum(&m_set, true);
    let (n, n_at) = extremum(&n_set, false);
    let (u, u_at) = extremum(&[("1", Some(1.0)), ("RD_{YD'|Z}/RD_{Y|Z}", Some(a))], false);
    let (v, v_at) = extremum(&[("0", Some(0.0)), ("RD_{(1-Y)D'|(1-Z)}/RD_{Y|Z}", Some(b))], true);
    for (k, x) in [("M_D", m), ("N_D", n), ("U_D", u), ("V_D", v), ("CACE'", naive)] {
        report.set(k, x);
    }
    report.binding.push(format!("SN_D lower bound M_D attained by {m_at}"));
    report.binding.push(format!("SN_D upper bound U_D attained by {u_at}"));
    report.binding.push(format!("SP_D lower bound 1-N_D attained by {n_at}"));
    report.binding.push(format!("SP_D upper bound 1-V_D attained by {v_at}"));

    report.feasible = m <= u && v <= n && m <= 1.0 && n >= 0.0 && rd_d > 0.0;
    if rd_d < 0.0 {
        report.warnings.push("RD_{D'|Z} < 0 contradicts monotone compliance".into());
    }
    report.push_rate("SN_D", m, u);
    report.push_rate("SP_D", 1.0 - n, 1.0 - v);
    finish_cace(&mut report, Interval::spanning(naive * (m - n), naive * (u - v)));

    if report.feasible {
        report.witnesses.push(witness(dist, "lower", treatment_channels(m, 1.0 - n), report.recoded));
        report.witnesses.push(witness(dist, "upper", treatment_channels(u, 1.0 - v), report.recoded));
    }
    Ok(report)
}

fn check_strong_mono(dist: &ObservedDistribution, tol: f64) -> Result<()> {
    let p = dist.prob(0, D1);
    if p > tol {
        return Err(Error::StrongMonoViolated { p_treated_control: p });
    }
    Ok(())
}

/// Outcome misclassified, one-sided noncompliance.
pub fn bounds_outcome_strongmono(dist: &ObservedDistribution) -> Result<BoundsReport> {
    bounds_outcome_strongmono_with(dist, &BoundsOptions::default())
}

pub fn bounds_outcome_strongmono_with(dist: &ObservedDistribution, opts: &BoundsOptions) -> Result<BoundsReport> {
    check_strong_mono(dist, opts.strong_mono_tol)?;
    let mut report = BoundsReport::new(BoundsMethod::OutcomeStrongMono);
    let pd1 = dist.prob(1, D1);
    if pd1 == 0.0 {
        return Err(Error::ZeroDenominator { numerator: dist.rd_y() });
    }
    report.naive_cace = dist.rd_y() / pd1;
    let d = orient(dist, opts.sign, &mut report);
    let naive = d.rd_y() / pd1;
    let x_n = d.cond(1, Y1, D0);
    let x_c1 = d.cond(1, Y1, D1).expect("P(D=1|Z=1) > 0");
    let (n, n_at) = extremum(&[("P(Y'=1|D=0,Z=1)", x_n), ("P(Y'=1|D=1,Z=1)-CACE'", Some(x_c1 - naive))], false);
    let (m, m_at) = extremum(&[("P(Y'=1|D=0,Z=1)", x_n), ("P(Y'=1|D=1,Z=1)", Some(x_c1))], true);
    if let Some(x) = x_n {
        report.set("P(Y'=1|D=0,Z=1)", x);
    }
    report.set("P(Y'=1|D=1,Z=1)", x_c1);
    report.set("M_Y^m", m);
    report.set("N_Y^m", n);
    report.set("CACE'", naive);
    report.binding.push(format!("SN_Y lower bound M_Y^m attained by {m_at}"));
    report.binding.push(format!("SP_Y lower bound 1-N_Y^m attained by {n_at}"));

    report.feasible = m <= 1.0 && n >= 0.0;
    push_outcome_rates(&mut report, (m, 1.0), (1.0 - n, 1.0));
    let width = m - n;
    let upper = if width > 0.0 {
        naive / width
    } else {
        report.warnings.push("M_Y^m - N_Y^m <= 0: upper bound set to 1".into());
        1.0
    };
    finish_cace(&mut report, Interval::spanning(naive, upper));

    if report.feasible {
        report.witnesses.push(witness(dist, "lower", outcome_channels(1.0, 1.0), report.recoded));
        report.witnesses.push(witness(dist, "upper", outcome_channels(m, 1.0 - n), report.recoded));
    }
    Ok(report)
}

/// Treatment misclassified in the treated arm, one-sided noncompliance.
///
/// Uses the simplified form when `P(D'=1|Y=1,Z=1) ≥ P(D'=1|Y=0,Z=1)` and the
/// general endpoint form otherwise.
pub fn bounds_treatment_strongmono(dist: &ObservedDistribution) -> Result<BoundsReport> {
    bounds_treatment_strongmono_with(dist, &BoundsOptions::default())
}

pub fn bounds_treatment_strongmono_with(dist: &ObservedDistribution, opts: &BoundsOptions) -> Result<BoundsReport> {
    check_strong_mono(dist, opts.strong_mono_tol)?;
    let c = dist.prob(1, D1);
    if c == 0.0 {
        return Err(Error::ZeroDenominator { numerator: dist.rd_y() });
    }
    let mut report = BoundsReport::new(BoundsMethod::TreatmentStrongMono);
    report.naive_cace = dist.rd_y() / c;
    let d = orient(dist, opts.sign, &mut report);
    let rd = d.rd_y();
    if rd == 0.0 {
        return Err(Error::ZeroDenominator { numerator: 0.0 });
    }
    let s1 = d.cond(1, D1, Y1);
    let s0 = d.cond(1, D1, Y0);
    let p_y1_z1 = d.prob(1, Y1);
    let p_y1_z0 = d.prob(0, Y1);
    let p_y1d1 = d.prob(1, Y1.and(D1));

    let (m, m_at) = extremum(&[("P(D'=1|Y=1,Z=1)", s1), ("P(D'=1|Y=0,Z=1)", s0)], true);
    let first = (p_y1_z0 > 0.0).then(|| (p_y1d1 - rd * m) / p_y1_z0);
    let (min_s, min_at) = extremum(
        &[
            ("(P(Y=1,D'=1|Z=1)-RD_{Y|Z}*max_y P(D'=1|Y=y,Z=1))/P(Y=1|Z=0)", first),
            ("P(D'=1|Y=1,Z=1)", s1),
            ("P(D'=1|Y=0,Z=1)", s0),
        ],
        false,
    );
    let simplified = match (s1, s0) {
        (Some(a), Some(b)) => a >= b,
        (Some(_), None) => true,
        _ => false,
    };
    if !simplified {
        report.method = BoundsMethod::TreatmentStrongMonoGeneral;
    }
    for (k, v) in [("P(D'=1|Y=1,Z=1)", s1), ("P(D'=1|Y=0,Z=1)", s0), ("S_D first term", first)] {
        if let Some(v) = v {
            report.set(k, v);
        }
    }
    report.set("max_y P(D'=1|Y=y,Z=1)", m);
    report.set("min S_D", min_s);
    report.set("P(D'=1|Z=1)", c);
    report.set("RD_{Y|Z}", rd);
    report.set("CACE'", rd / c);
    report.binding.push(format!("SN_D^1 lower bound attained by {m_at}"));
    report.binding.push(format!("SP_D^1 lower bound 1-min S_D attained by {min_at}"));

    // CACE(SN, 1-SP = t) = RD (SN - t) / (P(D'=1|Z=1) - t); for fixed t the
    // admissible SN range is [m, sn_upper(t)].
    let sn_upper = |t: f64| (p_y1d1 - t * p_y1_z0) / rd;
    let cace_at = |sn: f64, t: f64| rd * (sn - t) / (c - t);

    let lower_0 = cace_at(m, 0.0);
    let lower_t = if c - min_s > 0.0 { cace_at(m, min_s) } else { f64::NAN };
    let lower = lower_0.min(if lower_t.is_nan() { lower_0 } else { lower_t });
    let upper = if simplified {
        1.0
    } else {
        let at_0 = p_y1d1 / c;
        let at_t = (p_y1d1 - min_s * p_y1_z1) / (c - min_s);
        at_0.max(if at_t.is_nan() { at_0 } else { at_t })
    };
    report.set("P(Y=1|D'=1,Z=1)", p_y1d1 / c);

    // The closed form lets SN_D^1 follow sn_upper(t) past 1; with SN_D^1 <= 1
    // imposed the upper limit is smaller whenever sn_upper exceeds 1.
    let mut ts = vec![0.0, min_s];
    let kink = (p_y1d1 - rd) / p_y1_z0;
    if kink > 0.0 && kink < min_s {
        ts.push(kink);
    }
    let capped_upper = ts
        .iter()
        .filter(|&&t| t >= 0.0 && c - t > 0.0)
        .map(|&t| cace_at(sn_upper(t).min(1.0), t))
        .fold(f64::NEG_INFINITY, f64::max);
    report.set("CACE upper with SN_D^1 <= 1", capped_upper);
    if capped_upper.is_finite() && capped_upper < upper - 1e-6 {
        report.warnings.push(format!(
            "the upper limit {upper:.4} needs SN_D^1 > 1; restricting SN_D^1 <= 1 gives {capped_upper:.4}"
        ));
    }

    report.feasible = min_s >= 0.0 && m <= 1.0 && c - min_s > 0.0;
    report.push_rate("SN_D^1", m, sn_upper(0.0).min(1.0));
    report.push_rate("SP_D^1", 1.0 - min_s, 1.0);
    if report.feasible {
        let lo_sp = 1.0 - min_s;
        for i in 0..SN_TABLE_ROWS {
            let sp = lo_sp + (1.0 - lo_sp) * i as f64 / (SN_TABLE_ROWS - 1) as f64;
            report.sn_upper_by_sp.push([sp, sn_upper(1.0 - sp)]);
        }
    }
    finish_cace(&mut report, Interval::spanning(lower, upper));

    if report.feasible {
        let t_lo = if lower_t < lower_0 { min_s } else { 0.0 };
        let t_hi = if simplified || upper > p_y1d1 / c { min_s } else { 0.0 };
        let sm = |sn: f64, t: f64| Channels::from(StrongMonoRates { sn_d1: sn, sp_d1: 1.0 - t });
        report.witnesses.push(witness(dist, "lower", sm(m, t_lo), report.recoded));
        report.witnesses.push(witness(dist, "upper", sm(sn_upper(t_hi), t_hi), report.recoded));
    }
    Ok(report)
}

/// Families of observable inequalities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConditionVariant {
    /// Outcome misclassified; same form as the classical IV inequalities.
    Outcome,
    /// Treatment misclassified.
    Treatment,
    /// Classical binary IV inequalities without measurement error.
    BalkePearl,
}

impl ConditionVariant {
    pub const ALL: [ConditionVariant; 3] = [Self::Outcome, Self::Treatment, Self::BalkePearl];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Outcome => "outcome",
            Self::Treatment => "treatment",
            Self::BalkePearl => "balke-pearl",
        }
    }
}

impl fmt::Display for ConditionVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ConditionVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "outcome" | "outcome-miserr" => Ok(Self::Outcome),
            "treatment" | "treatment-miserr" => Ok(Self::Treatment),
            "balke-pearl" => Ok(Self::BalkePearl),
            _ => Err(Error::InvalidInput(format!("unknown condition variant '{s}'"))),
        }
    }
}

/// One inequality `lhs ≥ rhs`; `slack = lhs - rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub variant: ConditionVariant,
    pub recoded: bool,
    pub conditions: Vec<Condition>,
    pub pass: bool,
}

impl ConditionReport {
    pub fn violated(&self) -> impl Iterator<Item = &Condition> {
        self.conditions.iter().filter(|c| !c.satisfied)
    }
}

/// Slack below which an inequality counts as violated.
pub const CONDITION_TOL: f64 = 1e-12;

pub fn testable_conditions(dist: &ObservedDistribution, variant: ConditionVariant) -> ConditionReport {
    let recoded = condition_recode(dist, variant);
    let conditions = condition_terms(dist.cells(), variant, recoded)
        .into_iter()
        .map(|(name, lhs, rhs)| Condition {
            name,
            lhs,
            rhs,
            slack: lhs - rhs,
            satisfied: lhs - rhs >= -CONDITION_TOL,
        })
        .collect::<Vec<_>>();
    let pass = conditions.iter().all(|c| c.satisfied);
    ConditionReport { variant, recoded, conditions, pass }
}

/// Whether the treatment family is evaluated with swapped outcome labels.
pub(crate) fn condition_recode(dist: &ObservedDistribution, variant: ConditionVariant) -> bool {
    variant == ConditionVariant::Treatment && dist.rd_y() * dist.rd_d() < 0.0
}

/// `(name, lhs, rhs)` for each inequality, as polynomials in the cells so
/// they stay defined when a conditioning event is empty.
pub(crate) fn condition_terms(
    cells: &[[[f64; 2]; 2]; 2],
    variant: ConditionVariant,
    recoded: bool,
) -> Vec<(String, f64, f64)> {
    let p = |z: usize, d: usize, y: usize| cells[z][d][if recoded { 1 - y } else { y }];
    let classical = |yname: &str, dname: &str| {
        let mut out = Vec::with_capacity(4);
        for y in [1, 0] {
            out.push((
                format!("P({yname}={y},{dname}=1|Z=1) >= P({yname}={y},{dname}=1|Z=0)"),
                p(1, 1, y),
                p(0, 1, y),
            ));
        }
        for y in [1, 0] {
            out.push((
                format!("P({yname}={y},{dname}=0|Z=0) >= P({yname}={y},{dname}=0|Z=1)"),
                p(0, 0, y),
                p(1, 0, y),
            ));
        }
        out
    };
    match variant {
        ConditionVariant::BalkePearl => classical("Y", "D"),
        ConditionVariant::Outcome => classical("Y'", "D"),
        ConditionVariant::Treatment => {
            let py = |z: usize, y: usize| p(z, 0, y) + p(z, 1, y);
            let rd_y = py(1, 1) - py(0, 1);
            let rd_yd = p(1, 1, 1) - p(0, 1, 1);
            let rd_nyd_flip = p(0, 1, 0) - p(1, 1, 0);
            let mut out = vec![
                ("P(Y=1,D'=1|Z=1) >= P(Y=1,D'=1|Z=0)".to_string(), p(1, 1, 1), p(0, 1, 1)),
                ("P(Y=0,D'=0|Z=0) >= P(Y=0,D'=0|Z=1)".to_string(), p(0, 0, 0), p(1, 0, 0)),
            ];
            // P(D'=1|Y=y,Z=1) <= RD_{YD'|Z}/RD_{Y|Z}, cleared of denominators
            for y in [1, 0] {
                out.push((
                    format!("P(D'=1|Y={y},Z=1) <= RD_{{YD'|Z}}/RD_{{Y|Z}}"),
                    rd_yd * py(1, y),
                    p(1, 1, y) * rd_y,
                ));
            }
            // P(D'=1|Y=y,Z=0) >= RD_{(1-Y)D'|(1-Z)}/RD_{Y|Z}, cleared likewise
            for y in [1, 0] {
                out.push((
                    format!("P(D'=1|Y={y},Z=0) >= RD_{{(1-Y)D'|(1-Z)}}/RD_{{Y|Z}}"),
                    p(0, 1, y) * rd_y,
                    rd_nyd_flip * py(0, y),
                ));
            }
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::latent::{forward_map, LatentIvModel};
    use crate::identify::NondiffRates;
    use proptest::prelude::*;

    fn ex(n: u8) -> ObservedDistribution {
        match n {
            1 => fixtures::ex1(),
            2 => fixtures::ex2(),
            _ => fixtures::ex3(),
        }
        .to_distribution()
        .unwrap()
    }

    #[test]
    fn outcome_nondiff_ex1() {
        let r = bounds_outcome_nondiff(&ex(1)).unwrap();
        assert!(!r.recoded && r.feasible);
        assert!((r.rate("SP_Y").unwrap().lo - 0.382).abs() < 1e-3);
        assert!((r.rate("SN_Y").unwrap().lo - 0.750).abs() < 1e-3);
        assert!((r.cace.lo - 0.0794).abs() < 1e-4);
        assert!((r.cace.hi - 0.0794 / 0.1318).abs() < 1e-3);
        assert_eq!(r.cace.lo, r.naive_cace);
    }

    #[test]
    fn outcome_nondiff_ex2_violation() {
        for opts in [BoundsOptions::default(), BoundsOptions::as_coded()] {
            let r = bounds_outcome_nondiff_with(&ex(2), &opts).unwrap();
            assert!(!r.feasible);
            assert!((r.rate("SP_Y").unwrap().lo - 1.0037).abs() < 1e-4, "{r:?}");
        }
    }

    #[test]
    fn treatment_nondiff_ex1() {
        let r = bounds_treatment_nondiff(&ex(1)).unwrap();
        assert!(r.feasible);
        assert!((r.rate("SP_D").unwrap().lo - 0.908).abs() < 1e-3);
        assert!((r.rate("SN_D").unwrap().lo - 0.611).abs() < 1e-3);
        let m_n = r.intermediate("M_D").unwrap() - r.intermediate("N_D").unwrap();
        assert!((m_n - 0.519).abs() < 1e-3);
        assert!((r.cace.lo - 0.0794 * m_n).abs() < 1e-4);
        assert!((r.cace.hi - 0.0794).abs() < 1e-4);
    }

    #[test]
    fn treatment_nondiff_ex2_as_coded_violation() {
        let r = bounds_treatment_nondiff_with(&ex(2), &BoundsOptions::as_coded()).unwrap();
        assert!(!r.feasible);
        assert!((r.rate("SN_D").unwrap().lo - 8.676).abs() < 1e-3);
    }

    #[test]
    fn strongmono_outcome_ex3() {
        let r = bounds_outcome_strongmono(&ex(3)).unwrap();
        assert!((r.intermediate("N_Y^m").unwrap() - 2385.0 / 2419.0).abs() < 1e-12);
        assert!((r.intermediate("M_Y^m").unwrap() - 9663.0 / 9675.0).abs() < 1e-12);
        assert!((r.rate("SP_Y").unwrap().lo - 0.014).abs() < 5e-4);
        assert!((r.rate("SN_Y").unwrap().lo - 0.999).abs() < 5e-4);
        assert!((r.cace.lo - 0.003).abs() < 5e-4);
        assert!((r.cace.hi - 0.252).abs() < 5e-4);
    }

    #[test]
    fn strongmono_outcome_degenerate_width() {
        // P(Y=1|D=1,Z=1) = P(Y=1|D=0,Z=1) and zero naive effect
        let p1 = [[0.25, 0.25], [0.25, 0.25]];
        let p0 = [[0.5, 0.5], [0.0, 0.0]];
        let d = ObservedDistribution::new(0.5, [p0, p1]).unwrap();
        let r = bounds_outcome_strongmono(&d).unwrap();
        assert_eq!(r.cace.hi, 1.0);
        assert_eq!(r.cace.lo, 0.0);
    }

    #[test]
    fn strongmono_rejects_treated_controls() {
        assert!(matches!(bounds_outcome_strongmono(&ex(1)), Err(Error::StrongMonoViolated { .. })));
        assert!(matches!(bounds_treatment_strongmono(&ex(1)), Err(Error::StrongMonoViolated { .. })));
    }

    #[test]
    fn strongmono_treatment_ex3() {
        let r = bounds_treatment_strongmono(&ex(3)).unwrap();
        assert_eq!(r.method, BoundsMethod::TreatmentStrongMono);
        let s1 = r.intermediate("P(D'=1|Y=1,Z=1)").unwrap();
        let s0 = r.intermediate("P(D'=1|Y=0,Z=1)").unwrap();
        assert!((s0 - 12.0 / 46.0).abs() < 1e-12);
        assert!(s1 >= s0);
        assert!((r.rate("SP_D^1").unwrap().lo - 0.739).abs() < 5e-4);
        assert!((r.rate("SN_D^1").unwrap().lo - 0.802).abs() < 5e-4);
        assert!((r.cace.lo - 0.003).abs() < 5e-4);
        assert_eq!(r.cace.hi, 1.0);
        assert_eq!(r.sn_upper_by_sp.len(), SN_TABLE_ROWS);
    }

    #[test]
    fn general_branch_agrees_with_simplified_at_the_switch() {
        // On the simplified branch the general upper formula evaluates to 1.
        let d = ex(3);
        let r = bounds_treatment_strongmono(&d).unwrap();
        let c = r.intermediate("P(D'=1|Z=1)").unwrap();
        let t = r.intermediate("min S_D").unwrap();
        let at_t = (d.prob(1, Y1.and(D1)) - t * d.prob(1, Y1)) / (c - t);
        assert!((at_t - 1.0).abs() < 1e-9);
    }

    #[test]
    fn conditions_on_fixtures() {
        let r = testable_conditions(&ex(2), ConditionVariant::BalkePearl);
        assert!(!r.pass);
        let v: Vec<_> = r.violated().map(|c| c.name.as_str()).collect();
        assert!(v.contains(&"P(Y=1,D=1|Z=1) >= P(Y=1,D=1|Z=0)"));
        let c = &r.conditions[0];
        assert!((c.lhs - 31.0 / 1484.0).abs() < 1e-15);
        assert!((c.rhs - 30.0 / 1407.0).abs() < 1e-15);
        for v in ConditionVariant::ALL {
            assert!(testable_conditions(&ex(3), v).pass, "{v}");
        }
    }

    #[test]
    fn symmetric_arms_have_zero_slack() {
        let p = [[0.1, 0.2], [0.3, 0.4]];
        let d = ObservedDistribution::new(0.4, [p, p]).unwrap();
        for v in ConditionVariant::ALL {
            let r = testable_conditions(&d, v);
            assert!(r.pass);
            assert!(r.conditions.iter().all(|c| c.slack.abs() < 1e-15));
        }
    }

    fn dist_strategy() -> impl Strategy<Value = ObservedDistribution> {
        (prop::array::uniform8(0.001f64..1.0), 0.2f64..0.8).prop_map(|(w, pz)| {
            let s1: f64 = w[4..].iter().sum();
            let s0: f64 = w[..4].iter().sum();
            let mut p = [[[0.0; 2]; 2]; 2];
            for i in 0..8 {
                let (z, d, y) = (i >> 2, (i >> 1) & 1, i & 1);
                p[z][d][y] = w[i] / if z == 1 { s1 } else { s0 };
            }
            ObservedDistribution::new(pz, p).unwrap()
        })
    }

    fn model_strategy() -> impl Strategy<Value = LatentIvModel> {
        (0.1f64..0.9, prop::array::uniform3(0.05f64..1.0), prop::array::uniform4(0.0f64..1.0)).prop_map(
            |(pz, w, py)| {
                let s: f64 = w.iter().sum();
                LatentIvModel::new(pz, [w[0] / s, w[1] / s, w[2] / s], py[0], py[1], [py[2], py[3]])
            },
        )
    }

    proptest! {
        #[test]
        fn balke_pearl_implies_treatment_family(d in dist_strategy()) {
            if testable_conditions(&d, ConditionVariant::BalkePearl).pass {
                prop_assert!(testable_conditions(&d, ConditionVariant::Treatment).pass);
            }
        }

        #[test]
        fn recoding_reflects_outcome_interval(d in dist_strategy()) {
            let (Ok(a), Ok(b)) = (bounds_outcome_nondiff(&d), bounds_outcome_nondiff(&recode_outcome(&d))) else {
                return Ok(());
            };
            prop_assert!((a.cace_raw.lo + b.cace_raw.hi).abs() < 1e-12);
            prop_assert!((a.cace_raw.hi + b.cace_raw.lo).abs() < 1e-12);
            prop_assert_eq!(a.recoded, !b.recoded);
        }

        #[test]
        fn truth_inside_outcome_and_treatment_bounds(
            m in model_strategy(), sn in 0.6f64..1.0, sp in 0.6f64..1.0, on_y in any::<bool>()
        ) {
            let rates = if on_y { NondiffRates::outcome(sn, sp) } else { NondiffRates::treatment(sn, sp) };
            let d = forward_map(&m, &rates).unwrap();
            prop_assume!(d.rd_y().abs() > 1e-9);
            let r = if on_y { bounds_outcome_nondiff(&d) } else { bounds_treatment_nondiff(&d) }.unwrap();
            prop_assert!(r.feasible);
            prop_assert!(r.cace.lo <= r.cace.hi);
            prop_assert!(r.cace.contains(m.cace(), 1e-9), "{} not in {:?}", m.cace(), r.cace);
            // true rates in the reported ranges
            let (sn_name, sp_name) = if on_y { ("SN_Y", "SP_Y") } else { ("SN_D", "SP_D") };
            let (snb, spb) = (r.rate(sn_name).unwrap(), r.rate(sp_name).unwrap());
            prop_assert!(sn >= snb.lo - 1e-9 && sn <= snb.hi + 1e-9);
            prop_assert!(sp >= spb.lo - 1e-9 && sp <= spb.hi + 1e-9);
            for w in &r.witnesses {
                prop_assert!(w.feasible, "{w:?}");
            }
        }

        #[test]
        fn outcome_lower_bound_is_naive(d in dist_strategy()) {
            if let Ok(r) = bounds_outcome_nondiff(&d).map_err(|_| ()).and_then(|r| if r.feasible { Ok(r) } else { Err(()) }) {
                let naive = d.rd_y() / d.rd_d();
                let closest = if naive >= 0.0 { r.cace_raw.lo } else { r.cace_raw.hi };
                prop_assert!((closest - naive).abs() < 1e-12);
            }
        }
    }
}
