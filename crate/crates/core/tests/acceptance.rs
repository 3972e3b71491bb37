//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.
//!
//! Run with `cargo test -p ivmeasure --release --test acceptance`.

use std::time::{Duration, Instant};

use ivmeasure::*;
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;

type Q = Ratio<i128>;

struct Outcome {
    pass: bool,
    detail: String,
}

fn gate(id: &str, title: &str, budget: Option<Duration>, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = f();
    let elapsed = start.elapsed();
    let in_time = budget.map_or(true, |b| elapsed <= b);
    let pass = out.pass && in_time;
    let budget_note = match budget {
        Some(b) if !in_time => format!(" (over budget {:.0?})", b),
        Some(b) => format!(" (budget {:.0?})", b),
        None => String::new(),
    };
    println!(
        "{} {id} {title}: {} [{:.2?}{budget_note}]",
        if pass { "PASS" } else { "FAIL" },
        out.detail,
        elapsed
    );
    pass
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn rate_lo(r: &BoundsReport, name: &str) -> f64 {
    r.rate(name).map_or(f64::NAN, |b| b.lo)
}

// ---------- exact oracle helpers on raw counts ----------

fn qf(x: Q) -> f64 {
    *x.numer() as f64 / *x.denom() as f64
}

/// `P(event | Z=z)` with `event` a predicate on `(d, y)`.
fn arm_prob(c: &ObservedCounts, z: usize, event: impl Fn(usize, usize) -> bool) -> Q {
    let mut hit = 0;
    for d in 0..2 {
        for y in 0..2 {
            if event(d, y) {
                hit += c.get(z, d, y);
            }
        }
    }
    Q::new(hit as i128, c.arm_total(z) as i128)
}

/// `P(A | B, Z=z)`.
fn cond_prob(c: &ObservedCounts, z: usize, a: impl Fn(usize, usize) -> bool, b: impl Fn(usize, usize) -> bool) -> Q {
    let mut num = 0;
    let mut den = 0;
    for d in 0..2 {
        for y in 0..2 {
            if b(d, y) {
                den += c.get(z, d, y);
                if a(d, y) {
                    num += c.get(z, d, y);
                }
            }
        }
    }
    Q::new(num as i128, den as i128)
}

struct ExactOracle {
    naive: Q,
    m_y: Q,
    n_y: Q,
    m_d: Q,
    n_d: Q,
}

fn exact_oracle(c: &ObservedCounts) -> ExactOracle {
    let py = |z| arm_prob(c, z, |_, y| y == 1);
    let pd = |z| arm_prob(c, z, |d, _| d == 1);
    let rd_y = py(1) - py(0);
    let rd_d = pd(1) - pd(0);
    let yd = |z| arm_prob(c, z, |d, y| d == 1 && y == 1);
    let y_nd = |z| arm_prob(c, z, |d, y| d == 0 && y == 1);
    let nd = |z| arm_prob(c, z, |d, _| d == 0);
    let d_ny = |z| arm_prob(c, z, |d, y| d == 1 && y == 0);
    let ny = |z| arm_prob(c, z, |_, y| y == 0);
    let y_set = [
        cond_prob(c, 1, |_, y| y == 1, |d, _| d == 0),
        cond_prob(c, 0, |_, y| y == 1, |d, _| d == 1),
        (yd(1) - yd(0)) / rd_d,
        (y_nd(0) - y_nd(1)) / (nd(0) - nd(1)),
    ];
    let b = (d_ny(0) - d_ny(1)) / (ny(0) - ny(1));
    let a = (yd(1) - yd(0)) / rd_y;
    let m_d = [
        pd(1),
        pd(0),
        cond_prob(c, 1, |d, _| d == 1, |_, y| y == 1),
        cond_prob(c, 1, |d, _| d == 1, |_, y| y == 0),
        b,
    ];
    let n_d = [
        pd(1),
        pd(0),
        cond_prob(c, 0, |d, _| d == 1, |_, y| y == 1),
        cond_prob(c, 0, |d, _| d == 1, |_, y| y == 0),
        a,
    ];
    ExactOracle {
        naive: rd_y / rd_d,
        m_y: *y_set.iter().max().unwrap(),
        n_y: *y_set.iter().min().unwrap(),
        m_d: *m_d.iter().max().unwrap(),
        n_d: *n_d.iter().min().unwrap(),
    }
}

/// Delta-method interval for the Wald ratio written out from the arm-wise
/// multinomial moments.
fn delta_oracle(c: &ObservedCounts, alpha: f64) -> (f64, f64) {
    let mut var_y = 0.0;
    let mut var_d = 0.0;
    let mut cov = 0.0;
    let mut p = [[0.0; 3]; 2];
    for z in 0..2 {
        let n = c.arm_total(z) as f64;
        let pd = qf(arm_prob(c, z, |d, _| d == 1));
        let py = qf(arm_prob(c, z, |_, y| y == 1));
        let pdy = qf(arm_prob(c, z, |d, y| d == 1 && y == 1));
        var_y += py * (1.0 - py) / n;
        var_d += pd * (1.0 - pd) / n;
        cov += (pdy - pd * py) / n;
        p[z] = [pd, py, pdy];
    }
    let rd_d = p[1][0] - p[0][0];
    let ratio = (p[1][1] - p[0][1]) / rd_d;
    let var = (var_y - 2.0 * ratio * cov + ratio * ratio * var_d) / (rd_d * rd_d);
    let zq = statrs::distribution::ContinuousCDF::inverse_cdf(&statrs::distribution::Normal::standard(), 1.0 - alpha / 2.0);
    (ratio - zq * var.sqrt(), ratio + zq * var.sqrt())
}

fn closed_form(kind: BoundKind, dist: &ObservedDistribution) -> Result<BoundsReport> {
    kind.bounds(dist)
}

fn numeric_for(kind: BoundKind, dist: &ObservedDistribution) -> Result<BoundsReport> {
    let (m, sm) = match kind {
        BoundKind::OutcomeNondiff => (Mismeasured::Y, false),
        BoundKind::TreatmentNondiff => (Mismeasured::D, false),
        BoundKind::OutcomeStrongMono => (Mismeasured::Y, true),
        BoundKind::TreatmentStrongMono => (Mismeasured::D, true),
    };
    numeric_bounds(dist, &SearchConfig::new(m).strong_mono(sm).grid(201).rounds(2))
}

fn spec_for(kind: BoundKind, seed: u64, n: usize) -> ScenarioSpec {
    let (m, sm) = match kind {
        BoundKind::OutcomeNondiff => (Mismeasured::Y, false),
        BoundKind::TreatmentNondiff => (Mismeasured::D, false),
        BoundKind::OutcomeStrongMono => (Mismeasured::Y, true),
        BoundKind::TreatmentStrongMono => (Mismeasured::D, true),
    };
    ScenarioSpec::new(seed, n, m).strong_mono(sm)
}

fn label(kind: BoundKind) -> &'static str {
    match kind {
        BoundKind::OutcomeNondiff => "Y/nondiff",
        BoundKind::TreatmentNondiff => "D/nondiff",
        BoundKind::OutcomeStrongMono => "Y/strong-mono",
        BoundKind::TreatmentStrongMono => "D/strong-mono",
    }
}

// ---------- criteria ----------

fn a1() -> Outcome {
    let d = fixtures::ex3().to_distribution().unwrap();
    let tol = 5e-4;
    let y = bounds_outcome_strongmono(&d).unwrap();
    let t = bounds_treatment_strongmono(&d).unwrap();
    let naive = naive_cace(&d).unwrap().value;
    let checks = [
        ("naive", naive, 0.003),
        ("Y: SP_Y lo", rate_lo(&y, "SP_Y"), 0.014),
        ("Y: SN_Y lo", rate_lo(&y, "SN_Y"), 0.999),
        ("Y: CACE lo", y.cace.lo, 0.003),
        ("Y: CACE hi", y.cace.hi, 0.252),
        ("D: SP_D^1 lo", rate_lo(&t, "SP_D^1"), 0.739),
        ("D: SN_D^1 lo", rate_lo(&t, "SN_D^1"), 0.802),
        ("D: CACE lo", t.cace.lo, 0.003),
        ("D: CACE hi", t.cace.hi, 1.0),
    ];
    let bad: Vec<String> = checks
        .iter()
        .filter(|(_, got, want)| !close(*got, *want, tol))
        .map(|(n, got, want)| format!("{n} {got:.5} vs {want}"))
        .collect();
    Outcome {
        pass: bad.is_empty(),
        detail: if bad.is_empty() {
            format!(
                "naive {naive:.5}; Y [{:.4}, {:.4}]; D [{:.4}, {:.4}]",
                y.cace.lo, y.cace.hi, t.cace.lo, t.cace.hi
            )
        } else {
            bad.join("; ")
        },
    }
}

fn a2() -> Outcome {
    let d = fixtures::ex2().to_distribution().unwrap();
    let opts = BoundsOptions::as_coded();
    let y = bounds_outcome_nondiff_with(&d, &opts).unwrap();
    let t = bounds_treatment_nondiff_with(&d, &opts).unwrap();
    let sp_y = rate_lo(&y, "SP_Y");
    let sn_d = rate_lo(&t, "SN_D");
    let naive = naive_cace(&d).unwrap().value.abs();
    let bp = testable_conditions(&d, ConditionVariant::BalkePearl);
    let first = bp.conditions.iter().find(|c| c.name.contains("P(Y=1,D=1|Z=1)") && c.name.contains("P(Y=1,D=1|Z=0)"));
    let bp_flag = first.map_or(false, |c| !c.satisfied) && !bp.pass;
    let pass = !y.feasible
        && !t.feasible
        && close(sp_y, 1.0037, 1e-3)
        && sp_y > 1.0
        && close(sn_d, 8.676, 1e-3)
        && close(naive, 0.116, 1e-3)
        && bp_flag;
    Outcome {
        pass,
        detail: format!(
            "SP_Y lo {sp_y:.4} (feasible {}), SN_D lo {sn_d:.4} (feasible {}), |naive| {naive:.4}, BP first condition violated {bp_flag}",
            y.feasible, t.feasible
        ),
    }
}

fn a3() -> Outcome {
    let c = fixtures::ex1();
    let d = c.to_distribution().unwrap();
    let y = bounds_outcome_nondiff(&d).unwrap();
    let t = bounds_treatment_nondiff(&d).unwrap();
    let o = exact_oracle(&c);
    let sp_y = rate_lo(&y, "SP_Y");
    let sp_d = rate_lo(&t, "SP_D");
    let sn_y = rate_lo(&y, "SN_Y");
    let sn_d = rate_lo(&t, "SN_D");
    let naive = y.naive_cace;
    let wald = ci_wald(&c, &CiConfig::default()).unwrap();
    let (olo, ohi) = delta_oracle(&c, 0.05);
    let paper = close(sp_y, 0.382, 1e-3) && close(sp_d, 0.908, 1e-3);
    let oracle = close(naive, qf(o.naive), 1e-12)
        && close(sn_y, qf(o.m_y), 1e-12)
        && close(sp_y, 1.0 - qf(o.n_y), 1e-12)
        && close(sn_d, qf(o.m_d), 1e-12)
        && close(sp_d, 1.0 - qf(o.n_d), 1e-12)
        && close(naive, 0.0794, 5e-5)
        && close(sn_y, 0.750, 5e-4)
        && close(sn_d, 0.611, 5e-4)
        && close(wald.interval.lo, olo, 1e-9)
        && close(wald.interval.hi, ohi, 1e-9);
    Outcome {
        pass: paper && oracle,
        detail: format!(
            "SP_Y lo {sp_y:.4}, SP_D lo {sp_d:.4}; oracle naive {naive:.4} SN_Y {sn_y:.4} SN_D {sn_d:.4} CI ({:.4}, {:.4}) \
             [published 0.131, 0.759, 0.658, CI (-0.036, 0.298) differ; logged]",
            wald.interval.lo, wald.interval.hi
        ),
    }
}

fn model_error(a: &LatentIvModel, b: &LatentIvModel) -> f64 {
    let mut e = (a.pz - b.pz).abs();
    let (pa, pb) = (a.pi(), b.pi());
    for u in 0..3 {
        e = e.max((pa[u] - pb[u]).abs());
        if pa[u] > 0.0 {
            for z in 0..2 {
                e = e.max((a.py[u][z] - b.py[u][z]).abs());
            }
        }
    }
    e
}

fn dist_error(a: &ObservedDistribution, b: &ObservedDistribution) -> f64 {
    let mut e = (a.pz() - b.pz()).abs();
    for z in 0..2 {
        for d in 0..2 {
            for y in 0..2 {
                e = e.max((a.cell(z, d, y) - b.cell(z, d, y)).abs());
            }
        }
    }
    e
}

fn a4() -> Outcome {
    let subsets: Vec<Mismeasured> = Mismeasured::all_subsets().collect();
    let total = 10_000usize;
    let errors: Vec<(f64, bool)> = (0..total)
        .into_par_iter()
        .map(|i| {
            let m = subsets[i % subsets.len()];
            let spec = ScenarioSpec::new(4004, total, m);
            let Ok((model, ch)) = scenario_draw(&spec, i as u64) else { return (f64::INFINITY, false) };
            let Ok(obs) = forward_map_channels(&model, &ch) else { return (f64::INFINITY, false) };
            let Ok(back) = inverse_map_channels(&obs, &ch) else { return (f64::INFINITY, false) };
            let e1 = model_error(&model, &back);
            let Ok(again) = forward_map_channels(&back, &ch) else { return (f64::INFINITY, false) };
            (e1.max(dist_error(&obs, &again)), true)
        })
        .collect();
    let worst = errors.iter().map(|e| e.0).fold(0.0, f64::max);
    let failed = errors.iter().filter(|e| !e.1).count();
    Outcome {
        pass: failed == 0 && worst < 1e-10,
        detail: format!("{total} pairs over 7 subsets, max error {worst:.2e}, failures {failed}"),
    }
}

fn a5() -> Outcome {
    let spec = ScenarioSpec::new(5005, 1000, "zdy".parse().unwrap());
    let mut worst: f64 = 0.0;
    let mut failed = 0;
    for i in 0..1000u64 {
        let Ok((model, ch)) = scenario_draw(&spec, i) else {
            failed += 1;
            continue;
        };
        let rates = NondiffRates {
            sn_d: ch.d[0].sn,
            sp_d: ch.d[0].sp,
            sn_y: ch.y[0].sn,
            sp_y: ch.y[0].sp,
            sn_z: ch.z.sn,
            sp_z: ch.z.sp,
        };
        match forward_map(&model, &rates).and_then(|d| naive_cace(&d)) {
            Ok(c) => worst = worst.max((c.value * rates.r_d() / rates.r_y() - model.cace()).abs()),
            Err(_) => failed += 1,
        }
    }
    Outcome { pass: failed == 0 && worst <= 1e-10, detail: format!("1000 pairs, max error {worst:.2e}, failures {failed}") }
}

fn a6() -> Outcome {
    let tol = 2e-3;
    let mut lines = Vec::new();
    let mut pass = true;
    let mut check = |name: String, dist: &ObservedDistribution, kind: BoundKind| -> Option<f64> {
        let cf = closed_form(kind, dist).ok()?;
        let nm = numeric_for(kind, dist).ok()?;
        let gap = (cf.cace_raw.lo - nm.cace_raw.lo).abs().max((cf.cace_raw.hi - nm.cace_raw.hi).abs());
        if !(gap <= tol) {
            lines.push(format!(
                "{name}: closed [{:.4}, {:.4}] numeric [{:.4}, {:.4}]",
                cf.cace_raw.lo, cf.cace_raw.hi, nm.cace_raw.lo, nm.cace_raw.hi
            ));
        }
        Some(gap)
    };
    let ex1 = fixtures::ex1().to_distribution().unwrap();
    let ex3 = fixtures::ex3().to_distribution().unwrap();
    let fixed = [
        ("EX1", &ex1, BoundKind::OutcomeNondiff),
        ("EX1", &ex1, BoundKind::TreatmentNondiff),
        ("EX3", &ex3, BoundKind::OutcomeNondiff),
        ("EX3", &ex3, BoundKind::TreatmentNondiff),
        ("EX3", &ex3, BoundKind::OutcomeStrongMono),
        ("EX3", &ex3, BoundKind::TreatmentStrongMono),
    ];
    for (name, d, kind) in fixed {
        if check(format!("{name} {}", label(kind)), d, kind).is_none() {
            pass = false;
        }
    }
    let mut summary = Vec::new();
    for kind in BoundKind::ALL {
        let spec = spec_for(kind, 6006, 100);
        let mut worst: f64 = 0.0;
        let mut misses = 0;
        for i in 0..100u64 {
            let (model, ch) = scenario_draw(&spec, i).unwrap();
            let d = forward_map_channels(&model, &ch).unwrap();
            match check(format!("random {} #{i}", label(kind)), &d, kind) {
                Some(g) => {
                    worst = worst.max(g);
                    if !(g <= tol) {
                        misses += 1;
                    }
                }
                None => misses += 1,
            }
        }
        summary.push(format!("{}: {misses}/100 off, max gap {worst:.1e}", label(kind)));
    }
    pass &= lines.is_empty();
    let shown: Vec<String> = lines.iter().take(4).cloned().collect();
    Outcome {
        pass,
        detail: format!(
            "{}{}",
            summary.join("; "),
            if shown.is_empty() { String::new() } else { format!(" | mismatches ({}): {}", lines.len(), shown.join("; ")) }
        ),
    }
}

fn a7() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for kind in BoundKind::ALL {
        let spec = spec_for(kind, 7007, 1000);
        match sharpness_audit_with(&spec, &SweepConfig { grid: 201, rounds: 2 }) {
            Ok(a) => {
                let ok = a.containment_violations == 0 && a.sharpness_violations == 0 && a.errors == 0;
                pass &= ok;
                parts.push(format!(
                    "{} containment {} sharpness {} errors {}",
                    label(kind),
                    a.containment_violations,
                    a.sharpness_violations,
                    a.errors
                ));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("{}: {e}", label(kind)));
            }
        }
    }
    Outcome { pass, detail: parts.join("; ") }
}

fn random_distribution(rng: &mut ChaCha8Rng) -> ObservedDistribution {
    let mut p = [[[0.0; 2]; 2]; 2];
    for arm in p.iter_mut() {
        let e: Vec<f64> = (0..4).map(|_| Exp1.sample(rng)).collect();
        let s: f64 = e.iter().sum();
        for k in 0..4 {
            arm[k / 2][k % 2] = e[k] / s;
        }
    }
    let pz = rng.random_range(0.05..0.95);
    ObservedDistribution::new(pz, p).unwrap()
}

fn a8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8008);
    let mut bp_pass = 0;
    let mut counter = 0;
    for _ in 0..10_000 {
        let d = random_distribution(&mut rng);
        if testable_conditions(&d, ConditionVariant::BalkePearl).pass {
            bp_pass += 1;
            if !testable_conditions(&d, ConditionVariant::Treatment).pass {
                counter += 1;
            }
        }
    }
    Outcome {
        pass: counter == 0 && bp_pass > 0,
        detail: format!("10000 distributions, Balke-Pearl passes on {bp_pass}, treatment conditions fail on {counter} of those"),
    }
}

fn a9() -> Outcome {
    let c3 = fixtures::ex3();
    let cfg = CiConfig::default();
    let y = ci_union(&c3, BoundKind::OutcomeStrongMono, &cfg).unwrap();
    let t = ci_union(&c3, BoundKind::TreatmentStrongMono, &cfg).unwrap();
    let tol = 2e-3;
    let ex3_ok = close(y.interval.lo, 0.001, tol)
        && close(y.interval.hi, 1.0, 1e-12)
        && close(t.interval.lo, -1e-5, tol)
        && close(t.interval.hi, 1.0, 1e-12);

    let reps = 2000u64;
    let mc = CiConfig::default();
    let mut cover = Vec::new();
    for kind in [BoundKind::OutcomeStrongMono, BoundKind::TreatmentStrongMono] {
        let spec = spec_for(kind, 9009, reps as usize);
        let hits: usize = (0..reps)
            .map(|i| {
                let Ok((model, ch)) = scenario_draw(&spec, i) else { return 0 };
                let Ok(counts) = simulate_observed(&model, &ch, SampleSize::Multinomial(5000), 90_000 + i) else {
                    return 0;
                };
                let cfg = CiConfig { seed: 1_000 + i, ..mc };
                match ci_union(&counts, kind, &cfg) {
                    Ok(u) => u.interval.contains(model.cace(), 1e-12) as usize,
                    Err(_) => 0,
                }
            })
            .sum();
        cover.push((kind, hits as f64 / reps as f64));
    }
    let cover_ok = cover.iter().all(|(_, c)| *c >= 0.94);
    Outcome {
        pass: ex3_ok && cover_ok,
        detail: format!(
            "EX3 Y ({:.5}, {:.4}) target (0.001, 1); EX3 D ({:.5}, {:.4}) target (-1e-5, 1); coverage {}",
            y.interval.lo,
            y.interval.hi,
            t.interval.lo,
            t.interval.hi,
            cover.iter().map(|(k, c)| format!("{} {c:.4}", label(*k))).collect::<Vec<_>>().join(", ")
        ),
    }
}

fn a10() -> Outcome {
    let model = LatentIvModel::new(0.5, [0.2, 0.3, 0.5], 0.6, 0.3, [0.7, 0.4]);
    let mut noisy = Channels::PERFECT;
    noisy.z = Channel::new(0.8, 0.8);
    let n = 100_000;
    let reps = 2000u64;
    let variance = |ch: &Channels, offset: u64| -> f64 {
        let v: Vec<f64> = (0..reps)
            .into_par_iter()
            .map(|i| {
                let c = simulate_observed(&model, ch, SampleSize::Multinomial(n), offset + i).unwrap();
                naive_cace(&c.to_distribution().unwrap()).unwrap().value
            })
            .collect();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (v.len() - 1) as f64
    };
    let v0 = variance(&Channels::PERFECT, 0);
    let v1 = variance(&noisy, 1_000_000);
    let rel = (v1 / v0 - 1.0).abs();
    Outcome {
        pass: rel <= 0.05,
        detail: format!(
            "r'_Z = {:.2}, var perfect {v0:.3e}, var misclassified {v1:.3e}, ratio {:.3} (1/r'^2 = {:.3})",
            noisy.z.r(),
            v1 / v0,
            1.0 / (noisy.z.r() * noisy.z.r())
        ),
    }
}

/// Joint law along `S' → S → Q → Q'` summed out cell by cell.
fn chain_rd(w: f64, a1: f64, a0: f64, q: [f64; 2], b1: f64, b0: f64) -> (f64, f64) {
    let s_given_sp = |s: usize, sp: usize| match (sp, s) {
        (1, 1) => a1,
        (1, _) => 1.0 - a1,
        (_, 0) => a0,
        _ => 1.0 - a0,
    };
    let qp_given_q = |qp: usize, qq: usize| match (qq, qp) {
        (1, 1) => b1,
        (1, _) => 1.0 - b1,
        (_, 0) => b0,
        _ => 1.0 - b0,
    };
    let mut num = [0.0; 2];
    let mut den = [0.0; 2];
    let mut s_num = [0.0; 2];
    let mut s_den = [0.0; 2];
    for sp in 0..2 {
        let p_sp = if sp == 1 { w } else { 1.0 - w };
        for s in 0..2 {
            for qq in 0..2 {
                let p_q = if qq == 1 { q[s] } else { 1.0 - q[s] };
                for qp in 0..2 {
                    let p = p_sp * s_given_sp(s, sp) * p_q * qp_given_q(qp, qq);
                    den[sp] += p;
                    s_den[s] += p;
                    if qp == 1 {
                        num[sp] += p;
                    }
                    if qq == 1 {
                        s_num[s] += p;
                    }
                }
            }
        }
    }
    (s_num[1] / s_den[1] - s_num[0] / s_den[0], num[1] / den[1] - num[0] / den[0])
}

fn a11() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1111);
    let mut bross_err: f64 = 0.0;
    for _ in 0..10_000 {
        let w = rng.random_range(0.05..0.95);
        let a1 = rng.random_range(0.05..0.95);
        let a0 = rng.random_range(0.05..0.95);
        let b1 = rng.random::<f64>();
        let b0 = rng.random::<f64>();
        let qs = [rng.random::<f64>(), rng.random::<f64>()];
        let (truth, observed) = chain_rd(w, a1, a0, qs, b1, b0);
        bross_err = bross_err.max((bross_attenuation(truth, a1, a0, b1, b0) - observed).abs());
    }

    let mut sum_err: f64 = 0.0;
    let mut tau_err: f64 = 0.0;
    let mut models = 0;
    for levels in 1..=4usize {
        // principal strata are pairs d0 <= d1 over 0..=levels
        let strata: Vec<(usize, usize)> =
            (0..=levels).flat_map(|d0| (d0..=levels).map(move |d1| (d0, d1))).collect();
        for _ in 0..500 {
            let e: Vec<f64> = strata.iter().map(|_| Exp1.sample(&mut rng)).collect();
            let total: f64 = e.iter().sum();
            let pi: Vec<f64> = e.iter().map(|x| x / total).collect();
            let mut ey = [0.0; 2];
            let mut pmf = [vec![0.0; levels + 1], vec![0.0; levels + 1]];
            for (k, &(d0, d1)) in strata.iter().enumerate() {
                let mu0: f64 = rng.random();
                let mu1: f64 = if d0 == d1 { mu0 } else { rng.random() };
                ey[0] += pi[k] * mu0;
                ey[1] += pi[k] * mu1;
                pmf[0][d0] += pi[k];
                pmf[1][d1] += pi[k];
            }
            let mean = |p: &[f64]| p.iter().enumerate().map(|(j, v)| j as f64 * v).sum::<f64>();
            let first = mean(&pmf[1]) - mean(&pmf[0]);
            if first < 1e-3 {
                continue;
            }
            let rd_y = ey[1] - ey[0];
            let tau = rd_y / first;
            let Ok(m) = MultiTreatmentMargins::from_pmfs(&pmf[1], &pmf[0]) else { continue };
            models += 1;
            let mut sum = 0.0;
            for k in 1..=levels {
                let wk = dichotomize_weight(&m, k).unwrap();
                sum += wk;
                let tail = |p: &[f64]| p[k..].iter().sum::<f64>();
                let jump = tail(&pmf[1]) - tail(&pmf[0]);
                if jump.abs() < 1e-9 {
                    continue;
                }
                let tau_k = rd_y / jump;
                tau_err = tau_err.max((tau - tau_k * wk).abs() / tau.abs().max(1.0));
            }
            sum_err = sum_err.max((sum - 1.0).abs());
        }
    }
    Outcome {
        pass: bross_err <= 1e-12 && sum_err <= 1e-12 && tau_err <= 1e-12 && models > 0,
        detail: format!(
            "Bross max error {bross_err:.1e} over 10000 channels; {models} treatment models, weight-sum error {sum_err:.1e}, identity error {tau_err:.1e}"
        ),
    }
}

fn main() {
    // the harness passes filter arguments such as `--list`; listing is a no-op
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let results = [
        gate("A1", "EX3 strong-monotonicity bounds", Some(Duration::from_secs(1)), a1),
        gate("A2", "EX2 infeasibility", None, a2),
        gate("A3", "EX1 bounds and oracle values", None, a3),
        gate("A4", "forward/inverse round trip", Some(Duration::from_secs(30)), a4),
        gate("A5", "attenuation identity", None, a5),
        gate("A6", "numeric sweep vs closed form", Some(Duration::from_secs(120)), a6),
        gate("A7", "sharpness audit", None, a7),
        gate("A8", "Balke-Pearl implies treatment conditions", None, a8),
        gate("A9", "union confidence interval", Some(Duration::from_secs(600)), a9),
        gate("A10", "variance under instrument misclassification", None, a10),
        gate("A11", "Bross attenuation and dichotomization weights", None, a11),
    ];
    let failed = results.iter().filter(|p| !**p).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
