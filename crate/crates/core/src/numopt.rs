//! Numeric bounds on CACE when any subset of `{Z, D, Y}` is misclassified.
//!
//! The misclassification rates are searched on a grid; every grid point is
//! mapped back to a latent model and kept when that model is feasible. The
//! coarse grid is followed by zoomed local grids and a pattern search around
//! the incumbent optima.
//!
//! When the outcome is misclassified together with another variable, the
//! outcome rates are optimized in closed form at each grid point: given the
//! other channels, feasibility in `(SN_Y, SP_Y)` is a box and CACE scales as
//! `1 / (SN_Y + SP_Y - 1)`.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::latent::{
    check_feasibility_tol, inverse_map_channels, inverse_unchecked, Channel, Channels, ALWAYS, COMPLIER, FEASIBILITY_TOL, NEVER,
};
use crate::observed::ObservedDistribution;
use crate::report::{BoundsMethod, BoundsReport, Interval, Witness};

/// Stratum shares at or below this magnitude count as empty.
const EMPTY_STRATUM: f64 = 1e-12;
/// Budget for the points of one local refinement grid.
const LOCAL_GRID_BUDGET: f64 = 20_000.0;
const POLISH_MIN_STEP: f64 = 1e-12;
const POLISH_MAX_ITERS: usize = 400;

/// Which coordinates are measured with error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Mismeasured {
    pub z: bool,
    pub d: bool,
    pub y: bool,
}

impl Mismeasured {
    pub const Z: Mismeasured = Mismeasured { z: true, d: false, y: false };
    pub const D: Mismeasured = Mismeasured { z: false, d: true, y: false };
    pub const Y: Mismeasured = Mismeasured { z: false, d: false, y: true };

    pub fn count(&self) -> usize {
        self.z as usize + self.d as usize + self.y as usize
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    pub fn union(self, other: Mismeasured) -> Mismeasured {
        Mismeasured { z: self.z || other.z, d: self.d || other.d, y: self.y || other.y }
    }

    /// All seven non-empty subsets.
    pub fn all_subsets() -> impl Iterator<Item = Mismeasured> {
        (1u8..8).map(|m| Mismeasured { z: m & 1 != 0, d: m & 2 != 0, y: m & 4 != 0 })
    }
}

impl fmt::Display for Mismeasured {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (on, c) in [(self.z, 'z'), (self.d, 'd'), (self.y, 'y')] {
            if on {
                write!(f, "{c}")?;
            }
        }
        Ok(())
    }
}

impl FromStr for Mismeasured {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let mut m = Mismeasured::default();
        for c in s.chars() {
            let slot = match c.to_ascii_lowercase() {
                'z' => &mut m.z,
                'd' => &mut m.d,
                'y' => &mut m.y,
                _ => return Err(Error::InvalidInput(format!("unknown variable '{c}' in '{s}'"))),
            };
            if *slot {
                return Err(Error::InvalidInput(format!("variable '{c}' repeated in '{s}'")));
            }
            *slot = true;
        }
        if m.is_empty() {
            return Err(Error::InvalidInput("no mismeasured variable given".into()));
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub mismeasured: Mismeasured,
    /// One-sided noncompliance; the treatment channel then applies to the
    /// treated arm only.
    pub strong_mono: bool,
    pub grid_resolution: usize,
    pub refinement_rounds: usize,
    pub feasibility_tol: f64,
}

impl SearchConfig {
    /// Defaults: 101 points per axis for up to two variables, 41 for three,
    /// two refinement rounds.
    pub fn new(mismeasured: Mismeasured) -> Self {
        Self {
            mismeasured,
            strong_mono: false,
            grid_resolution: if mismeasured.count() <= 2 { 101 } else { 41 },
            refinement_rounds: 2,
            feasibility_tol: FEASIBILITY_TOL,
        }
    }

    pub fn strong_mono(mut self, on: bool) -> Self {
        self.strong_mono = on;
        self
    }

    pub fn grid(mut self, g: usize) -> Self {
        self.grid_resolution = g;
        self
    }

    pub fn rounds(mut self, r: usize) -> Self {
        self.refinement_rounds = r;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.mismeasured.is_empty() {
            return Err(Error::InvalidInput("no mismeasured variable given".into()));
        }
        if self.grid_resolution < 2 {
            return Err(Error::InvalidInput("grid_resolution must be at least 2".into()));
        }
        if !(self.feasibility_tol >= 0.0) {
            return Err(Error::InvalidInput("feasibility_tol must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Axis {
    SnZ,
    SpZ,
    SnD,
    SpD,
    SnY,
    SpY,
}

impl Axis {
    fn name(&self, strong_mono: bool) -> &'static str {
        match (self, strong_mono) {
            (Axis::SnZ, _) => "SN'_Z",
            (Axis::SpZ, _) => "SP'_Z",
            (Axis::SnD, false) => "SN_D",
            (Axis::SpD, false) => "SP_D",
            (Axis::SnD, true) => "SN_D^1",
            (Axis::SpD, true) => "SP_D^1",
            (Axis::SnY, _) => "SN_Y",
            (Axis::SpY, _) => "SP_Y",
        }
    }
}

/// Outcome of evaluating one rate vector.
#[derive(Debug, Clone, Copy)]
struct Eval {
    violation: f64,
    lo: f64,
    hi: f64,
    /// With the outcome eliminated: `(max x, min x)` of the outcome box.
    y_box: Option<(f64, f64)>,
}

impl Eval {
    const INFEASIBLE: Eval = Eval { violation: f64::INFINITY, lo: f64::NAN, hi: f64::NAN, y_box: None };
}

struct Problem<'a> {
    q: f64,
    cells: &'a [[[f64; 2]; 2]; 2],
    axes: Vec<Axis>,
    eliminate_y: bool,
    strong_mono: bool,
    tol: f64,
}

impl Problem<'_> {
    fn dim(&self) -> usize {
        self.axes.len()
    }

    fn channels(&self, theta: &[f64]) -> Channels {
        let mut ch = Channels::PERFECT;
        for (axis, &v) in self.axes.iter().zip(theta) {
            match axis {
                Axis::SnZ => ch.z.sn = v,
                Axis::SpZ => ch.z.sp = v,
                Axis::SnD => {
                    ch.d[1].sn = v;
                    if !self.strong_mono {
                        ch.d[0].sn = v;
                    }
                }
                Axis::SpD => {
                    ch.d[1].sp = v;
                    if !self.strong_mono {
                        ch.d[0].sp = v;
                    }
                }
                Axis::SnY => ch.y = [Channel::new(v, ch.y[0].sp); 2],
                Axis::SpY => ch.y = [Channel::new(ch.y[0].sn, v); 2],
            }
        }
        ch
    }

    fn informative(ch: &Channels) -> bool {
        ch.z.r() > 0.0 && ch.d[0].r() > 0.0 && ch.d[1].r() > 0.0 && ch.y[0].r() > 0.0
    }

    fn eval(&self, theta: &[f64]) -> Eval {
        let ch = self.channels(theta);
        if !Self::informative(&ch) {
            return Eval::INFEASIBLE;
        }
        let Ok(m) = inverse_unchecked(self.q, self.cells, &ch) else {
            return Eval::INFEASIBLE;
        };
        let mut v: f64 = 0.0;
        for x in [m.pz, m.pi_a, m.pi_n, m.pi_c] {
            v = v.max(-x).max(x - 1.0);
        }
        if self.strong_mono {
            v = v.max(m.pi_a.abs());
        }
        if !self.eliminate_y {
            for row in &m.py {
                v = v.max(-row[0]).max(row[0] - 1.0).max(-row[1]).max(row[1] - 1.0);
            }
            let c = m.cace();
            return Eval { violation: v, lo: c, hi: c, y_box: None };
        }
        // Outcome probabilities computed with a perfect outcome channel;
        // the true ones are (x - (1 - SP_Y)) / r_Y.
        let mut hi_x = f64::NEG_INFINITY;
        let mut lo_x = f64::INFINITY;
        let mut include = |x: f64| {
            hi_x = hi_x.max(x);
            lo_x = lo_x.min(x);
        };
        if m.pi_a.abs() > EMPTY_STRATUM {
            include(m.py[ALWAYS][0]);
        }
        if m.pi_n.abs() > EMPTY_STRATUM {
            include(m.py[NEVER][0]);
        }
        include(m.py[COMPLIER][0]);
        include(m.py[COMPLIER][1]);
        v = v.max(hi_x - 1.0).max(-lo_x);
        let cx = m.cace();
        let width = hi_x - lo_x;
        let (lo, hi) = if width > 0.0 {
            let far = cx / width;
            (cx.min(far), cx.max(far))
        } else {
            (cx, cx)
        };
        Eval { violation: v, lo, hi, y_box: Some((hi_x, lo_x)) }
    }

    fn feasible(&self, e: &Eval) -> bool {
        e.violation <= self.tol
    }
}

/// Per-axis running extremes plus the incumbents, combined associatively.
#[derive(Debug, Clone)]
struct Summary {
    lo: Option<(f64, u64, Vec<f64>)>,
    hi: Option<(f64, u64, Vec<f64>)>,
    nearest: Option<(f64, u64, Vec<f64>)>,
    axis_lo: Vec<f64>,
    axis_hi: Vec<f64>,
    y_sn_lo: f64,
    y_sp_lo: f64,
    feasible: u64,
    evaluated: u64,
}

impl Summary {
    fn empty(dim: usize) -> Self {
        Self {
            lo: None,
            hi: None,
            nearest: None,
            axis_lo: vec![f64::INFINITY; dim],
            axis_hi: vec![f64::NEG_INFINITY; dim],
            y_sn_lo: f64::INFINITY,
            y_sp_lo: f64::INFINITY,
            feasible: 0,
            evaluated: 0,
        }
    }

    fn observe(mut self, p: &Problem, idx: u64, theta: &[f64]) -> Self {
        let e = p.eval(theta);
        self.evaluated += 1;
        if e.violation.is_finite() {
            let better = |cur: &Option<(f64, u64, Vec<f64>)>, v: f64| match cur {
                None => true,
                Some((b, i, _)) => v < *b || (v == *b && idx < *i),
            };
            if !p.feasible(&e) {
                if better(&self.nearest, e.violation) {
                    self.nearest = Some((e.violation, idx, theta.to_vec()));
                }
                return self;
            }
            self.feasible += 1;
            if better(&self.lo, e.lo) {
                self.lo = Some((e.lo, idx, theta.to_vec()));
            }
            if better(&self.hi, -e.hi) {
                self.hi = Some((-e.hi, idx, theta.to_vec()));
            }
            for (k, &t) in theta.iter().enumerate() {
                self.axis_lo[k] = self.axis_lo[k].min(t);
                self.axis_hi[k] = self.axis_hi[k].max(t);
            }
            if let Some((hx, lx)) = e.y_box {
                self.y_sn_lo = self.y_sn_lo.min(hx.max(0.0));
                self.y_sp_lo = self.y_sp_lo.min((1.0 - lx).max(0.0));
            }
        }
        self
    }

    fn merge(mut self, o: Summary) -> Self {
        self.lo = pick(self.lo, o.lo);
        self.hi = pick(self.hi, o.hi);
        self.nearest = pick(self.nearest, o.nearest);
        for k in 0..self.axis_lo.len() {
            self.axis_lo[k] = self.axis_lo[k].min(o.axis_lo[k]);
            self.axis_hi[k] = self.axis_hi[k].max(o.axis_hi[k]);
        }
        self.y_sn_lo = self.y_sn_lo.min(o.y_sn_lo);
        self.y_sp_lo = self.y_sp_lo.min(o.y_sp_lo);
        self.feasible += o.feasible;
        self.evaluated += o.evaluated;
        self
    }
}

type Incumbent = Option<(f64, u64, Vec<f64>)>;

/// Smaller score wins; ties go to the lower point index.
fn pick(a: Incumbent, b: Incumbent) -> Incumbent {
    match (a, b) {
        (None, x) | (x, None) => x,
        (Some(x), Some(y)) => {
            if y.0 < x.0 || (y.0 == x.0 && y.1 < x.1) {
                Some(y)
            } else {
                Some(x)
            }
        }
    }
}

/// Evaluates the tensor grid `axes[0] × axes[1] × ...`; `offset` keeps point
/// indices distinct across passes.
fn scan(p: &Problem, axes: &[Vec<f64>], offset: u64) -> Summary {
    let dim = axes.len();
    let total: u64 = axes.iter().map(|a| a.len() as u64).product();
    (0..total)
        .into_par_iter()
        .fold(
            || (Summary::empty(dim), vec![0.0; dim]),
            |(acc, mut theta), i| {
                let mut rem = i;
                for k in (0..dim).rev() {
                    let n = axes[k].len() as u64;
                    theta[k] = axes[k][(rem % n) as usize];
                    rem /= n;
                }
                (acc.observe(p, offset + i, &theta), theta)
            },
        )
        .map(|(s, _)| s)
        .reduce(|| Summary::empty(dim), Summary::merge)
}

fn unit_axis(g: usize) -> Vec<f64> {
    (0..g).map(|j| if j + 1 == g { 1.0 } else { j as f64 / (g - 1) as f64 }).collect()
}

fn local_axes(center: &[f64], half: f64, pts: usize) -> Vec<Vec<f64>> {
    center
        .iter()
        .map(|&c| {
            let mut v: Vec<f64> = (0..pts)
                .map(|j| (c - half + 2.0 * half * j as f64 / (pts - 1) as f64).clamp(0.0, 1.0))
                .collect();
            v.dedup();
            v
        })
        .collect()
}

/// Pattern search over all `3^k - 1` directions with step halving.
fn polish(p: &Problem, start: &[f64], step: f64, maximize: bool) -> (f64, Vec<f64>) {
    let score = |e: &Eval| if maximize { -e.hi } else { e.lo };
    let dim = start.len();
    let mut best = start.to_vec();
    let mut best_score = score(&p.eval(&best));
    let dirs: Vec<Vec<f64>> = (0..3usize.pow(dim as u32))
        .map(|mut k| {
            (0..dim)
                .map(|_| {
                    let d = (k % 3) as f64 - 1.0;
                    k /= 3;
                    d
                })
                .collect::<Vec<f64>>()
        })
        .filter(|d| d.iter().any(|&x| x != 0.0))
        .collect();
    let mut h = step;
    let mut iters = 0;
    while h > POLISH_MIN_STEP && iters < POLISH_MAX_ITERS {
        iters += 1;
        let mut improved: Option<(f64, Vec<f64>)> = None;
        for d in &dirs {
            let cand: Vec<f64> = best.iter().zip(d).map(|(&b, &s)| (b + h * s).clamp(0.0, 1.0)).collect();
            let e = p.eval(&cand);
            if p.feasible(&e) {
                let s = score(&e);
                if s < improved.as_ref().map_or(best_score, |x| x.0) {
                    improved = Some((s, cand));
                }
            }
        }
        match improved {
            Some((s, c)) => {
                best_score = s;
                best = c;
            }
            None => h /= 2.0,
        }
    }
    (best_score, best)
}

/// Numeric bounds on CACE by grid search over misclassification rates.
///
/// The interval is an inner approximation: every endpoint has a feasible
/// witness in the report.
pub fn numeric_bounds(dist: &ObservedDistribution, cfg: &SearchConfig) -> Result<BoundsReport> {
    cfg.validate()?;
    let mm = cfg.mismeasured;
    let eliminate_y = mm.y && mm.count() >= 2;
    let mut axes = Vec::new();
    if mm.z {
        axes.extend([Axis::SnZ, Axis::SpZ]);
    }
    if mm.d {
        axes.extend([Axis::SnD, Axis::SpD]);
    }
    if mm.y && !eliminate_y {
        axes.extend([Axis::SnY, Axis::SpY]);
    }
    let p = Problem {
        q: dist.pz(),
        cells: dist.cells(),
        axes,
        eliminate_y,
        strong_mono: cfg.strong_mono,
        tol: cfg.feasibility_tol,
    };
    let dim = p.dim();
    let g = cfg.grid_resolution;

    let grid: Vec<Vec<f64>> = (0..dim).map(|_| unit_axis(g)).collect();
    let mut summary = scan(&p, &grid, 0);
    let mut offset = (g as u64).pow(dim as u32);

    let pts = (LOCAL_GRID_BUDGET.powf(1.0 / dim as f64).floor() as usize).clamp(5, g.max(5));
    let mut step = 1.0 / (g - 1) as f64;
    for _ in 0..cfg.refinement_rounds {
        let half = 2.0 * step;
        let centers: Vec<Vec<f64>> = if summary.feasible > 0 {
            [&summary.lo, &summary.hi].iter().filter_map(|x| x.as_ref().map(|t| t.2.clone())).collect()
        } else {
            summary.nearest.iter().map(|t| t.2.clone()).collect()
        };
        for c in centers {
            let local = local_axes(&c, half, pts);
            let n: u64 = local.iter().map(|a| a.len() as u64).product();
            summary = summary.merge(scan(&p, &local, offset));
            offset += n;
        }
        step = 2.0 * half / (pts - 1) as f64;
    }

    if summary.feasible == 0 {
        return Err(Error::NoFeasiblePoint {
            nearest_violation: summary.nearest.map_or(f64::INFINITY, |t| t.0),
        });
    }
    let (mut lo, _, mut lo_theta) = summary.lo.clone().expect("feasible point");
    let (neg_hi, _, mut hi_theta) = summary.hi.clone().expect("feasible point");
    let mut hi = -neg_hi;
    if cfg.refinement_rounds > 0 && dim > 0 {
        let (s, t) = polish(&p, &lo_theta, step, false);
        if s < lo {
            lo = s;
            lo_theta = t;
        }
        let (s, t) = polish(&p, &hi_theta, step, true);
        if -s > hi {
            hi = -s;
            hi_theta = t;
        }
    }

    let mut report = BoundsReport::new(BoundsMethod::Numeric);
    report.naive_cace = if dist.rd_d() != 0.0 { dist.rd_y() / dist.rd_d() } else { f64::NAN };
    report.set_cace(Interval::new(lo, hi));
    report.set("grid_resolution", g as f64);
    report.set("refinement_rounds", cfg.refinement_rounds as f64);
    report.set("points_evaluated", summary.evaluated as f64);
    report.set("feasible_points", summary.feasible as f64);
    for (k, axis) in p.axes.iter().enumerate() {
        report.push_rate(axis.name(cfg.strong_mono), summary.axis_lo[k], summary.axis_hi[k]);
    }
    if eliminate_y {
        report.push_rate("SN_Y", summary.y_sn_lo, 1.0);
        report.push_rate("SP_Y", summary.y_sp_lo, 1.0);
    }
    report.binding.push(format!("lower attained at {}", describe(&p, &lo_theta, cfg.strong_mono)));
    report.binding.push(format!("upper attained at {}", describe(&p, &hi_theta, cfg.strong_mono)));
    report.witnesses.push(make_witness(dist, &p, "lower", &lo_theta, false));
    report.witnesses.push(make_witness(dist, &p, "upper", &hi_theta, true));
    Ok(report)
}

fn describe(p: &Problem, theta: &[f64], strong_mono: bool) -> String {
    let parts: Vec<String> =
        p.axes.iter().zip(theta).map(|(a, v)| format!("{}={v:.6}", a.name(strong_mono))).collect();
    if parts.is_empty() {
        "perfect measurement of the remaining variables".into()
    } else {
        parts.join(", ")
    }
}

/// Full channel set at a grid point; with the outcome eliminated, the
/// outcome channel attaining the requested end is filled in.
fn make_witness(dist: &ObservedDistribution, p: &Problem, label: &str, theta: &[f64], upper: bool) -> Witness {
    let mut ch = p.channels(theta);
    let e = p.eval(theta);
    if let Some((hx, lx)) = e.y_box {
        let cx = if e.lo >= 0.0 { e.lo } else { e.hi };
        // |CACE| is largest at the corner of the outcome box
        let use_box = upper == (cx >= 0.0) && hx - lx > 0.0;
        ch.y = if use_box { [Channel::new(hx, 1.0 - lx); 2] } else { [Channel::PERFECT; 2] };
    }
    let tol = p.tol.max(FEASIBILITY_TOL);
    match inverse_map_channels(dist, &ch) {
        Ok(model) => Witness {
            label: label.into(),
            channels: ch,
            feasible: check_feasibility_tol(&model, tol).feasible && (!p.strong_mono || model.pi_a.abs() <= tol),
            cace: model.cace(),
            model: Some(model),
        },
        Err(_) => Witness { label: label.into(), channels: ch, model: None, cace: f64::NAN, feasible: false },
    }
}
