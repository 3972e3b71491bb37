//! Command-line front end for `ivmeasure`: argument definitions, dispatch to
//! the library, and text or JSON reports.
//!
//! Exit status: 0 on success, 2 when the data contradict the model or an
//! audit finds a violation, 1 on any other error.

pub mod input;

use std::fmt::Write as _;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use ivmeasure::{
    bounds_outcome_nondiff_with, bounds_outcome_strongmono_with, bounds_treatment_nondiff_with,
    bounds_treatment_strongmono_with, ci_union, ci_wald, corrected_cace, naive_cace, numeric_bounds, scenario_draw,
    sensitivity_region, sensitivity_region_grid, sharpness_audit_with, simulate_observed, test_inequalities,
    testable_conditions, BoundKind, BoundsOptions, BoundsReport, CiConfig, CiMethod, ConditionVariant, DiffVariable,
    Error as CoreError, Event, Interval, Mismeasured, NondiffRates, ObservedCounts, RateBox, SampleSize,
    ScenarioSpec, SearchConfig, SignHandling, SweepConfig,
};

use input::{load, to_csv, InputFormat};

pub const SEED_ENV: &str = "IVMEASURE_SEED";
pub const DEFAULT_SEED: u64 = 20_240_601;
pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_FINDING: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "ivmeasure", version, about = "Binary IV analysis with misclassified instrument, treatment or outcome")]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Wald ratio, optionally corrected for known non-differential rates.
    Estimate(EstimateArgs),
    /// Bounds on the CACE when some variables are misclassified.
    Bounds(BoundsArgs),
    /// Observable inequalities implied by the model, with one-sided tests.
    Check(CheckArgs),
    /// CACE range under arm-specific misclassification rates.
    Sensitivity(SensitivityArgs),
    /// Confidence interval for the Wald ratio or for the bounded CACE.
    Ci(CiArgs),
    /// Draw a latent model and simulate observed counts from it.
    Simulate(SimulateArgs),
    /// Check closed-form bounds against the truth on simulated models.
    Audit(AuditArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// CSV or JSON file, or one of the bundled tables ex1, ex2, ex3.
    pub input: String,
    /// Overrides detection from the file extension.
    #[arg(long, value_enum)]
    pub input_format: Option<InputFormat>,
    /// Swap the outcome labels before the analysis.
    #[arg(long)]
    pub recode_outcome: bool,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Significant digits in text output.
    #[arg(long, default_value_t = 4)]
    pub precision: usize,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 1.0)]
    pub sn_d: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sp_d: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sn_y: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sp_y: f64,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Misclassified variables, e.g. y, d or zdy.
    #[arg(long)]
    pub mismeasured: Mismeasured,
    /// Assume one-sided noncompliance.
    #[arg(long)]
    pub strong_mono: bool,
    /// Use the grid search even when a closed form exists.
    #[arg(long)]
    pub numeric: bool,
    /// Apply the closed forms to the data as coded, without relabelling the
    /// outcome when the Wald ratio is negative.
    #[arg(long)]
    pub as_coded: bool,
    /// Points per rate axis in the grid search.
    #[arg(long, default_value_t = 101)]
    pub grid: usize,
    /// Local refinement rounds in the grid search.
    #[arg(long, default_value_t = 2)]
    pub rounds: usize,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Inequality family; all three when omitted.
    #[arg(long)]
    pub variant: Option<ConditionVariant>,
    #[command(flatten)]
    pub out: OutputArgs,
}

/// A rate or a range `lo:hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeArg(pub Interval);

impl std::str::FromStr for RangeArg {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("'{t}' is not a number"));
        match s.split_once(':') {
            Some((a, b)) => Ok(Self(Interval::new(num(a)?, num(b)?))),
            None => Ok(Self(Interval::point(num(s)?))),
        }
    }
}

#[derive(Debug, Args)]
pub struct SensitivityArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// The variable with arm-specific rates: y or d.
    #[arg(long)]
    pub mismeasured: DiffVariable,
    /// Sensitivity in the Z=1 arm, a value or a range lo:hi.
    #[arg(long, default_value = "1")]
    pub sn1: RangeArg,
    #[arg(long, default_value = "1")]
    pub sn0: RangeArg,
    #[arg(long, default_value = "1")]
    pub sp1: RangeArg,
    #[arg(long, default_value = "1")]
    pub sp0: RangeArg,
    /// Evaluate on a grid with this many points per rate instead of the corners.
    #[arg(long)]
    pub grid: Option<usize>,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct CiArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// y or d for the union interval on the bounds; omit for the Wald ratio.
    #[arg(long)]
    pub mismeasured: Option<String>,
    #[arg(long)]
    pub strong_mono: bool,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// First-stage share of alpha in the union interval; alpha/10 by default.
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, default_value_t = CiMethod::Delta)]
    pub method: CiMethod,
    #[arg(long, default_value_t = 2000)]
    pub reps: usize,
    #[arg(long, env = SEED_ENV, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Wald-ratio grid points in the union interval.
    #[arg(long, default_value_t = 200)]
    pub grid: usize,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Misclassified variables; none when omitted.
    #[arg(long)]
    pub mismeasured: Option<Mismeasured>,
    #[arg(long)]
    pub strong_mono: bool,
    #[arg(long, env = SEED_ENV, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Number of units.
    #[arg(long, default_value_t = 5000)]
    pub n: u64,
    /// Which model of the seeded sequence to use.
    #[arg(long, default_value_t = 0)]
    pub index: u64,
    /// Exact expected counts instead of a random sample.
    #[arg(long)]
    pub exact: bool,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    /// y or d.
    #[arg(long)]
    pub mismeasured: Mismeasured,
    #[arg(long)]
    pub strong_mono: bool,
    #[arg(long, default_value_t = 1000)]
    pub models: usize,
    #[arg(long, env = SEED_ENV, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Points per rate axis of the numeric sweep.
    #[arg(long, default_value_t = 201)]
    pub grid: usize,
    #[command(flatten)]
    pub out: OutputArgs,
}

/// Exit status and the text destined for standard output and error.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

struct Report {
    code: i32,
    json: Value,
    text: String,
}

pub fn run(cfg: &RunConfig) -> Outcome {
    let (format, name) = match &cfg.command {
        Command::Estimate(a) => (a.out.format, "estimate"),
        Command::Bounds(a) => (a.out.format, "bounds"),
        Command::Check(a) => (a.out.format, "check"),
        Command::Sensitivity(a) => (a.out.format, "sensitivity"),
        Command::Ci(a) => (a.out.format, "ci"),
        Command::Simulate(a) => (a.out.format, "simulate"),
        Command::Audit(a) => (a.out.format, "audit"),
    };
    let result = match &cfg.command {
        Command::Estimate(a) => estimate(a),
        Command::Bounds(a) => bounds(a),
        Command::Check(a) => check(a),
        Command::Sensitivity(a) => sensitivity(a),
        Command::Ci(a) => ci(a),
        Command::Simulate(a) => simulate(a),
        Command::Audit(a) => audit(a),
    };
    match result {
        Ok(r) => {
            let stdout = match format {
                Format::Text => r.text,
                Format::Json => match r.json {
                    Value::String(s) => s,
                    mut v => {
                        v["exit_status"] = json!(r.code);
                        format!("{}\n", serde_json::to_string_pretty(&v).expect("serializable"))
                    }
                },
            };
            Outcome { code: r.code, stdout, stderr: String::new() }
        }
        Err(e) => {
            let code = error_code(&e);
            let stdout = match format {
                Format::Json => format!(
                    "{}\n",
                    serde_json::to_string_pretty(&json!({ "command": name, "error": format!("{e:#}"), "exit_status": code }))
                        .expect("serializable")
                ),
                Format::Text => String::new(),
            };
            Outcome { code, stdout, stderr: format!("error: {e:#}\n") }
        }
    }
}

/// Findings about the data map to 2; everything else to 1.
fn error_code(e: &anyhow::Error) -> i32 {
    match e.downcast_ref::<CoreError>() {
        Some(CoreError::StrongMonoViolated { .. } | CoreError::NoFeasiblePoint { .. }) => EXIT_FINDING,
        _ => EXIT_ERROR,
    }
}

/// `x` with `sig` significant digits.
pub fn num(x: f64, sig: usize) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0".into();
    }
    let sig = sig.max(1) as i32;
    let mag = x.abs().log10().floor() as i32;
    if !(-5..=15).contains(&mag) {
        return format!("{:.*e}", (sig - 1) as usize, x);
    }
    let decimals = (sig - 1 - mag).max(0) as usize;
    format!("{x:.decimals$}")
}

fn interval(iv: Interval, sig: usize) -> String {
    format!("[{}, {}]", num(iv.lo, sig), num(iv.hi, sig))
}

struct Data {
    counts: ObservedCounts,
    analysed: ObservedCounts,
    header: Value,
    coding: &'static str,
}

fn read(data: &DataArgs) -> Result<Data> {
    let loaded = load(&data.input, data.input_format)?;
    let analysed = if data.recode_outcome { recode_counts(&loaded.counts) } else { loaded.counts };
    let coding = if data.recode_outcome { "outcome labels swapped by --recode-outcome" } else { "as supplied" };
    let header = json!({
        "source": loaded.source,
        "recode_outcome": data.recode_outcome,
        "outcome_coding": coding,
    });
    Ok(Data { counts: loaded.counts, analysed, header, coding })
}

fn recode_counts(c: &ObservedCounts) -> ObservedCounts {
    let mut out = *c;
    for z in 0..2 {
        for d in 0..2 {
            out.set(z, d, 0, c.get(z, d, 1));
            out.set(z, d, 1, c.get(z, d, 0));
        }
    }
    out
}

fn envelope(command: &str, data: &Data, result: Value) -> Value {
    json!({ "command": command, "input": data.header, "counts": data.counts, "result": result })
}

fn text_header(out: &mut String, command: &str, data: &Data) {
    let _ = writeln!(out, "{command}: {} (outcome coding: {})", data.header["source"].as_str().unwrap_or(""), data.coding);
    let c = &data.counts;
    let _ = writeln!(out, "counts  n(d,y) = 11 10 01 00");
    for z in [1, 0] {
        let _ = writeln!(
            out,
            "  z={z}   {} {} {} {}",
            c.get(z, 1, 1),
            c.get(z, 1, 0),
            c.get(z, 0, 1),
            c.get(z, 0, 0)
        );
    }
}

fn estimate(a: &EstimateArgs) -> Result<Report> {
    let data = read(&a.data)?;
    let sig = a.out.precision;
    let dist = data.analysed.to_distribution()?;
    let naive = naive_cace(&dist)?;
    let rates = NondiffRates { sn_d: a.sn_d, sp_d: a.sp_d, sn_y: a.sn_y, sp_y: a.sp_y, ..NondiffRates::PERFECT };
    rates.validate()?;
    let corrected = corrected_cace(&naive, &rates)?;
    let arm = |z: usize| json!({ "P(D'=1)": dist.prob(z, Event::d(1)), "P(Y'=1)": dist.prob(z, Event::y(1)) });
    let result = json!({
        "naive_cace": naive.value,
        "rd_y": naive.numerator,
        "rd_d": naive.denominator,
        "p_z1": dist.pz(),
        "arm_z1": arm(1),
        "arm_z0": arm(0),
        "rates": rates,
        "corrected_cace": corrected,
    });
    let mut text = String::new();
    text_header(&mut text, "estimate", &data);
    let _ = writeln!(text, "RD_Y = {}", num(naive.numerator, sig));
    let _ = writeln!(text, "RD_D = {}", num(naive.denominator, sig));
    let _ = writeln!(text, "naive CACE' = {}", num(naive.value, sig));
    if rates != NondiffRates::PERFECT {
        let _ = writeln!(text, "corrected CACE = {} (r_d = {}, r_y = {})", num(corrected, sig), num(rates.r_d(), sig), num(rates.r_y(), sig));
    }
    Ok(Report { code: EXIT_OK, json: envelope("estimate", &data, result), text })
}

fn bounds(a: &BoundsArgs) -> Result<Report> {
    let data = read(&a.data)?;
    let dist = data.analysed.to_distribution()?;
    let opts = BoundsOptions { sign: if a.as_coded { SignHandling::AsCoded } else { SignHandling::Auto }, ..BoundsOptions::default() };
    let m = a.mismeasured;
    let single = m.count() == 1 && !m.z;
    let report = if single && !a.numeric {
        match (m.y, a.strong_mono) {
            (true, false) => bounds_outcome_nondiff_with(&dist, &opts)?,
            (false, false) => bounds_treatment_nondiff_with(&dist, &opts)?,
            (true, true) => bounds_outcome_strongmono_with(&dist, &opts)?,
            (false, true) => bounds_treatment_strongmono_with(&dist, &opts)?,
        }
    } else {
        if a.as_coded {
            bail!("--as-coded applies to the closed-form bounds only");
        }
        numeric_bounds(&dist, &SearchConfig::new(m).strong_mono(a.strong_mono).grid(a.grid).rounds(a.rounds))?
    };
    let code = if report.feasible { EXIT_OK } else { EXIT_FINDING };
    let mut text = String::new();
    text_header(&mut text, "bounds", &data);
    render_bounds(&mut text, &report, a.out.precision);
    let result = json!({ "mismeasured": m.to_string(), "strong_mono": a.strong_mono, "report": report });
    Ok(Report { code, json: envelope("bounds", &data, result), text })
}

fn render_bounds(out: &mut String, r: &BoundsReport, sig: usize) {
    let _ = writeln!(out, "method: {}", r.method.describe());
    if r.recoded {
        let _ = writeln!(out, "outcome labels were swapped internally; results are in the input coding");
    }
    let _ = writeln!(out, "naive CACE' = {}", num(r.naive_cace, sig));
    let _ = writeln!(out, "CACE ∈ {}", interval(r.cace, sig));
    if r.cace_raw != r.cace {
        let _ = writeln!(out, "  before limiting to [-1, 1]: {}", interval(r.cace_raw, sig));
    }
    let _ = writeln!(out, "feasible: {}", if r.feasible { "yes" } else { "NO" });
    if !r.rates.is_empty() {
        let _ = writeln!(out, "rates:");
        for rb in &r.rates {
            let _ = writeln!(out, "  {} ∈ [{}, {}]", rb.name, num(rb.lo, sig), num(rb.hi, sig));
        }
    }
    if !r.intermediates.is_empty() {
        let _ = writeln!(out, "intermediates:");
        for (k, v) in &r.intermediates {
            let _ = writeln!(out, "  {k} = {}", num(*v, sig));
        }
    }
    if !r.sn_upper_by_sp.is_empty() {
        let _ = writeln!(out, "upper bound on SN by SP:");
        for [sp, sn] in &r.sn_upper_by_sp {
            let _ = writeln!(out, "  SP = {}  SN <= {}", num(*sp, sig), num(*sn, sig));
        }
    }
    for b in &r.binding {
        let _ = writeln!(out, "binding: {b}");
    }
    for w in &r.witnesses {
        let _ = writeln!(out, "witness {}: CACE = {} ({})", w.label, num(w.cace, sig), if w.feasible { "feasible" } else { "infeasible" });
    }
    for w in &r.warnings {
        let _ = writeln!(out, "warning: {w}");
    }
}

fn check(a: &CheckArgs) -> Result<Report> {
    let data = read(&a.data)?;
    let dist = data.analysed.to_distribution()?;
    let sig = a.out.precision;
    let variants: Vec<ConditionVariant> = match a.variant {
        Some(v) => vec![v],
        None => ConditionVariant::ALL.to_vec(),
    };
    let mut text = String::new();
    text_header(&mut text, "check", &data);
    let mut results = Vec::new();
    let mut pass = true;
    for v in variants {
        let report = testable_conditions(&dist, v);
        let tests = test_inequalities(&data.analysed, v)?;
        pass &= report.pass;
        let _ = writeln!(
            text,
            "{} conditions: {}{}",
            v,
            if report.pass { "all hold" } else { "VIOLATED" },
            if report.recoded { " (outcome labels swapped for this family)" } else { "" }
        );
        for (c, t) in report.conditions.iter().zip(&tests.tests) {
            let _ = writeln!(
                text,
                "  [{}] {}  slack {}  p = {}",
                if c.satisfied { "ok" } else { "VIOLATED" },
                c.name,
                num(c.slack, sig),
                num(t.p_value, sig)
            );
        }
        let _ = writeln!(text, "  smallest p = {} (Bonferroni-adjusted {})", num(tests.min_p, sig), num(tests.bonferroni_p, sig));
        results.push(json!({ "conditions": report, "tests": tests }));
    }
    let code = if pass { EXIT_OK } else { EXIT_FINDING };
    Ok(Report { code, json: envelope("check", &data, json!({ "pass": pass, "variants": results })), text })
}

fn sensitivity(a: &SensitivityArgs) -> Result<Report> {
    let data = read(&a.data)?;
    let dist = data.analysed.to_distribution()?;
    let rbox = RateBox { variable: a.mismeasured, sn1: a.sn1.0, sn0: a.sn0.0, sp1: a.sp1.0, sp0: a.sp0.0 };
    let report = match a.grid {
        Some(g) => sensitivity_region_grid(&dist, &rbox, g)?,
        None => sensitivity_region(&dist, &rbox)?,
    };
    let mut text = String::new();
    text_header(&mut text, "sensitivity", &data);
    render_bounds(&mut text, &report, a.out.precision);
    Ok(Report { code: EXIT_OK, json: envelope("sensitivity", &data, json!({ "box": rbox, "report": report })), text })
}

fn ci(a: &CiArgs) -> Result<Report> {
    let data = read(&a.data)?;
    let sig = a.out.precision;
    let cfg = CiConfig {
        alpha: a.alpha,
        gamma: a.gamma.unwrap_or(a.alpha / 10.0),
        method: a.method,
        bootstrap_reps: a.reps,
        seed: a.seed,
        grid_points: a.grid,
    };
    let mut text = String::new();
    text_header(&mut text, "ci", &data);
    let result = match &a.mismeasured {
        None => {
            let w = ci_wald(&data.analysed, &cfg)?;
            let _ = writeln!(text, "naive CACE' = {}", num(w.estimate, sig));
            let _ = writeln!(text, "{}% interval ({}): {}", num(100.0 * w.level, sig), w.method, interval(w.interval, sig));
            if let Some(se) = w.std_error {
                let _ = writeln!(text, "standard error = {}", num(se, sig));
            }
            if w.degenerate_resamples > 0 {
                let _ = writeln!(text, "degenerate resamples: {}", w.degenerate_resamples);
            }
            json!({ "kind": "wald", "config": cfg, "interval": w })
        }
        Some(var) => {
            let kind = BoundKind::select(&var.to_ascii_lowercase(), a.strong_mono)?;
            let u = ci_union(&data.analysed, kind, &cfg)?;
            let _ = writeln!(text, "bounds at the estimate: {}", interval(u.point_bounds, sig));
            let _ = writeln!(text, "interval for CACE' at level {}: {}", num(1.0 - u.gamma, sig), interval(u.ci_prime, sig));
            let _ = writeln!(text, "bound factors: [{}, {}]", num(u.factor_lo, sig), num(u.factor_hi, sig));
            let _ = writeln!(text, "{}% union interval: {}", num(100.0 * (1.0 - u.alpha), sig), interval(u.interval, sig));
            let _ = writeln!(text, "length by gamma:");
            for [g, len] in &u.gamma_profile {
                let _ = writeln!(text, "  gamma = {}  length {}", num(*g, sig), num(*len, sig));
            }
            for w in &u.warnings {
                let _ = writeln!(text, "warning: {w}");
            }
            json!({ "kind": "union", "config": cfg, "interval": u })
        }
    };
    Ok(Report { code: EXIT_OK, json: envelope("ci", &data, result), text })
}

fn simulate(a: &SimulateArgs) -> Result<Report> {
    let m = a.mismeasured.unwrap_or_default();
    let spec = ScenarioSpec::new(a.seed, 1, m).strong_mono(a.strong_mono);
    spec.validate()?;
    let (model, ch) = scenario_draw(&spec, a.index)?;
    let size = if a.exact { SampleSize::Exact(a.n) } else { SampleSize::Units(a.n) };
    let counts = simulate_observed(&model, &ch, size, a.seed.wrapping_add(a.index))?;
    let sig = a.out.precision;
    let json = json!({
        "command": "simulate",
        "seed": a.seed,
        "index": a.index,
        "n": a.n,
        "exact": a.exact,
        "mismeasured": m.to_string(),
        "strong_mono": a.strong_mono,
        "model": model,
        "channels": ch,
        "true_cace": model.cace(),
        "counts": counts,
    });
    let mut text = String::new();
    let _ = writeln!(text, "# true CACE = {}", num(model.cace(), sig));
    let _ = writeln!(
        text,
        "# pi_a = {}, pi_n = {}, pi_c = {}, P(Z=1) = {}",
        num(model.pi_a, sig),
        num(model.pi_n, sig),
        num(model.pi_c, sig),
        num(model.pz, sig)
    );
    text.push_str(&to_csv(&counts));
    Ok(Report { code: EXIT_OK, json, text })
}

fn audit(a: &AuditArgs) -> Result<Report> {
    let spec = ScenarioSpec::new(a.seed, a.models, a.mismeasured).strong_mono(a.strong_mono);
    let report = sharpness_audit_with(&spec, &SweepConfig { grid: a.grid, ..SweepConfig::default() })?;
    let code = if report.containment_violations + report.sharpness_violations + report.exceedances > 0 {
        EXIT_FINDING
    } else {
        EXIT_OK
    };
    let mut lines = Vec::new();
    report.write_jsonl(&mut lines)?;
    let sig = a.out.precision;
    let mut text = String::new();
    let _ = writeln!(text, "audit of {:?} bounds over {} models (seed {})", report.kind, report.n_models, a.seed);
    let _ = writeln!(text, "containment violations: {}", report.containment_violations);
    let _ = writeln!(text, "endpoints not attained within 1e-3: {}", report.sharpness_violations);
    let _ = writeln!(text, "numeric range beyond closed form: {}", report.exceedances);
    let _ = writeln!(text, "errors: {}", report.errors);
    let _ = writeln!(text, "largest endpoint gaps: lower {}, upper {}", num(report.max_lower_gap, sig), num(report.max_upper_gap, sig));
    Ok(Report { code, json: Value::String(String::from_utf8(lines)?), text })
}
