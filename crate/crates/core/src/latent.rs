//! The latent binary IV model and its one-to-one correspondence with the
//! observed law of `(Z', D', Y')` under misclassification channels.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::identify::NondiffRates;
use crate::observed::ObservedDistribution;

/// Principal strata indices into [`LatentIvModel::py`].
pub const ALWAYS: usize = 0;
pub const NEVER: usize = 1;
pub const COMPLIER: usize = 2;
pub const STRATUM_NAMES: [&str; 3] = ["a", "n", "c"];

/// Default tolerance below which constraint violations are ignored.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Denominators at or below this magnitude are treated as zero.
const DEGENERATE_TOL: f64 = 1e-12;

/// A binary misclassification channel.
///
/// For `D` and `Y` this is `sn = P(obs=1|true=1)`, `sp = P(obs=0|true=0)`.
/// For `Z` it is the reverse, `sn = P(Z=1|Z'=1)`, `sp = P(Z=0|Z'=0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    pub sn: f64,
    pub sp: f64,
}

impl Channel {
    pub const PERFECT: Channel = Channel { sn: 1.0, sp: 1.0 };

    pub const fn new(sn: f64, sp: f64) -> Self {
        Self { sn, sp }
    }

    pub fn r(&self) -> f64 {
        self.sn + self.sp - 1.0
    }

    /// `P(out = o | in = i)`.
    #[inline]
    pub fn prob(&self, out: usize, input: usize) -> f64 {
        match (input, out) {
            (1, 1) => self.sn,
            (1, _) => 1.0 - self.sn,
            (_, 0) => self.sp,
            _ => 1.0 - self.sp,
        }
    }

    fn is_perfect(&self) -> bool {
        self.sn == 1.0 && self.sp == 1.0
    }
}

/// The full measurement model: one instrument channel and, per true arm,
/// one channel each for treatment and outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Channels {
    pub z: Channel,
    pub d: [Channel; 2],
    pub y: [Channel; 2],
}

impl Default for Channels {
    fn default() -> Self {
        Self::PERFECT
    }
}

impl From<NondiffRates> for Channels {
    fn from(r: NondiffRates) -> Self {
        let d = Channel::new(r.sn_d, r.sp_d);
        let y = Channel::new(r.sn_y, r.sp_y);
        Self { z: Channel::new(r.sn_z, r.sp_z), d: [d; 2], y: [y; 2] }
    }
}

impl From<&NondiffRates> for Channels {
    fn from(r: &NondiffRates) -> Self {
        Self::from(*r)
    }
}

impl From<StrongMonoRates> for Channels {
    fn from(r: StrongMonoRates) -> Self {
        Self {
            d: [Channel::PERFECT, Channel::new(r.sn_d1, r.sp_d1)],
            ..Self::PERFECT
        }
    }
}

impl Channels {
    pub const PERFECT: Channels =
        Channels { z: Channel::PERFECT, d: [Channel::PERFECT; 2], y: [Channel::PERFECT; 2] };

    fn validate(&self) -> Result<()> {
        let named = [
            ("z", self.z),
            ("d[0]", self.d[0]),
            ("d[1]", self.d[1]),
            ("y[0]", self.y[0]),
            ("y[1]", self.y[1]),
        ];
        for (name, ch) in named {
            for v in [ch.sn, ch.sp] {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::InvalidInput(format!("channel {name} has rate {v} outside [0, 1]")));
                }
            }
            if ch.r() <= 0.0 {
                return Err(Error::NonInformativeRates { what: format!("r_{name}"), value: ch.r() });
            }
        }
        Ok(())
    }
}

/// Treatment rates in the treated arm under one-sided noncompliance;
/// `P(D'=0 | D=0, Z=0) = 1` is implied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrongMonoRates {
    pub sn_d1: f64,
    pub sp_d1: f64,
}

/// Strata shares and stratum-wise potential outcome probabilities
/// `py[u][z] = P(Y_z = 1 | U = u)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatentIvModel {
    pub pz: f64,
    pub pi_a: f64,
    pub pi_n: f64,
    pub pi_c: f64,
    pub py: [[f64; 2]; 3],
}

impl LatentIvModel {
    /// Builds a model with the exclusion restriction imposed.
    pub fn new(pz: f64, pi: [f64; 3], py_a: f64, py_n: f64, py_c: [f64; 2]) -> Self {
        Self {
            pz,
            pi_a: pi[ALWAYS],
            pi_n: pi[NEVER],
            pi_c: pi[COMPLIER],
            py: [[py_a; 2], [py_n; 2], py_c],
        }
    }

    pub fn pi(&self) -> [f64; 3] {
        [self.pi_a, self.pi_n, self.pi_c]
    }

    pub fn cace(&self) -> f64 {
        self.py[COMPLIER][1] - self.py[COMPLIER][0]
    }

    /// Treatment received by stratum `u` in arm `z`.
    pub fn treatment(u: usize, z: usize) -> usize {
        match u {
            ALWAYS => 1,
            NEVER => 0,
            _ => z,
        }
    }

    /// `P(D=d, Y=y | Z=z)` implied by the model, without misclassification.
    pub fn true_cells(&self) -> [[[f64; 2]; 2]; 2] {
        let pi = self.pi();
        let mut p = [[[0.0; 2]; 2]; 2];
        for z in 0..2 {
            for u in 0..3 {
                let d = Self::treatment(u, z);
                p[z][d][1] += pi[u] * self.py[u][z];
                p[z][d][0] += pi[u] * (1.0 - self.py[u][z]);
            }
        }
        p
    }

    /// Largest constraint violation; zero when all constraints hold.
    pub fn max_violation(&self) -> f64 {
        let mut worst: f64 = 0.0;
        let mut unit = |v: f64| worst = worst.max(-v).max(v - 1.0);
        unit(self.pz);
        unit(self.pi_a);
        unit(self.pi_n);
        unit(self.pi_c);
        for row in &self.py {
            unit(row[0]);
            unit(row[1]);
        }
        worst
            .max((self.pi_a + self.pi_n + self.pi_c - 1.0).abs())
            .max((self.py[ALWAYS][1] - self.py[ALWAYS][0]).abs())
            .max((self.py[NEVER][1] - self.py[NEVER][0]).abs())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub feasible: bool,
    pub violations: Vec<Violation>,
}

pub fn check_feasibility(model: &LatentIvModel) -> FeasibilityReport {
    check_feasibility_tol(model, FEASIBILITY_TOL)
}

/// Lists every violated constraint; violations up to `tol` are ignored.
pub fn check_feasibility_tol(model: &LatentIvModel, tol: f64) -> FeasibilityReport {
    let mut violations = Vec::new();
    let mut unit = |name: String, v: f64| {
        if v < -tol {
            violations.push(Violation { name: format!("{name} < 0"), value: v });
        } else if v > 1.0 + tol {
            violations.push(Violation { name: format!("{name} > 1"), value: v });
        }
    };
    unit("pz".into(), model.pz);
    for (u, p) in model.pi().into_iter().enumerate() {
        unit(format!("pi_{}", STRATUM_NAMES[u]), p);
    }
    for (u, row) in model.py.iter().enumerate() {
        for (z, &v) in row.iter().enumerate() {
            unit(format!("py[{}][{z}]", STRATUM_NAMES[u]), v);
        }
    }
    let total = model.pi_a + model.pi_n + model.pi_c;
    if (total - 1.0).abs() > tol {
        violations.push(Violation { name: "pi_a + pi_n + pi_c != 1".into(), value: total });
    }
    for u in [ALWAYS, NEVER] {
        let gap = model.py[u][1] - model.py[u][0];
        if gap.abs() > tol {
            violations.push(Violation {
                name: format!("exclusion py[{0}][1] != py[{0}][0]", STRATUM_NAMES[u]),
                value: gap,
            });
        }
    }
    FeasibilityReport { feasible: violations.is_empty(), violations }
}

/// Law of the observed `(Z', D', Y')` under non-differential channels.
pub fn forward_map(model: &LatentIvModel, rates: &NondiffRates) -> Result<ObservedDistribution> {
    forward_map_channels(model, &Channels::from(rates))
}

/// Law of the observed `(Z', D', Y')` under arbitrary per-arm channels.
pub fn forward_map_channels(model: &LatentIvModel, ch: &Channels) -> Result<ObservedDistribution> {
    for v in [ch.z, ch.d[0], ch.d[1], ch.y[0], ch.y[1]].iter().flat_map(|c| [c.sn, c.sp]) {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::InvalidInput(format!("rate {v} outside [0, 1]")));
        }
    }
    let report = check_feasibility(model);
    if !report.feasible {
        let names: Vec<_> = report.violations.iter().map(|v| v.name.as_str()).collect();
        return Err(Error::InfeasibleModel(names.join(", ")));
    }

    let truth = model.true_cells();
    let mut by_arm = [[[0.0; 2]; 2]; 2];
    for z in 0..2 {
        for d in 0..2 {
            for y in 0..2 {
                let mass = truth[z][d][y];
                for dp in 0..2 {
                    for yp in 0..2 {
                        by_arm[z][dp][yp] += mass * ch.d[z].prob(dp, d) * ch.y[z].prob(yp, y);
                    }
                }
            }
        }
    }

    if ch.z.is_perfect() {
        return Ok(ObservedDistribution::from_raw(model.pz, by_arm));
    }
    let r = ch.z.r();
    let q = (model.pz - (1.0 - ch.z.sp)) / r;
    if r <= 0.0 || !(q > 0.0 && q < 1.0) {
        return Err(Error::InfeasibleZChannel { implied: q });
    }
    // P(Z=z | Z'=z') with the channel stored in that direction.
    let z_given = |zp: usize, z: usize| ch.z.prob(z, zp);
    let mut p = [[[0.0; 2]; 2]; 2];
    for zp in 0..2 {
        for z in 0..2 {
            let w = z_given(zp, z);
            for d in 0..2 {
                for y in 0..2 {
                    p[zp][d][y] += w * by_arm[z][d][y];
                }
            }
        }
    }
    Ok(ObservedDistribution::from_raw(q, p))
}

/// Recovers the latent model from an observed law and known channels.
///
/// The result is not checked for feasibility; see [`check_feasibility`].
pub fn inverse_map(dist: &ObservedDistribution, rates: &NondiffRates) -> Result<LatentIvModel> {
    inverse_map_channels(dist, &Channels::from(rates))
}

pub fn inverse_map_channels(dist: &ObservedDistribution, ch: &Channels) -> Result<LatentIvModel> {
    ch.validate()?;
    inverse_unchecked(dist.pz(), dist.cells(), ch)
}

/// Inverse map without rate validation; callers guarantee `r > 0` on every
/// channel.
pub(crate) fn inverse_unchecked(
    q: f64,
    obs: &[[[f64; 2]; 2]; 2],
    ch: &Channels,
) -> Result<LatentIvModel> {
    // Undo the instrument channel.
    let (zc, r_z) = (ch.z, ch.z.r());
    let mut p = [[[0.0; 2]; 2]; 2];
    for d in 0..2 {
        for y in 0..2 {
            let (a, b) = (obs[1][d][y], obs[0][d][y]);
            p[1][d][y] = (zc.sp * a - (1.0 - zc.sn) * b) / r_z;
            p[0][d][y] = (zc.sn * b - (1.0 - zc.sp) * a) / r_z;
        }
    }
    let pz = zc.sn * q + (1.0 - zc.sp) * (1.0 - q);

    for z in 0..2 {
        // Undo the outcome channel within each observed treatment level.
        let cy = ch.y[z];
        for d in 0..2 {
            let marg = p[z][d][0] + p[z][d][1];
            let y1 = (p[z][d][1] - (1.0 - cy.sp) * marg) / cy.r();
            p[z][d] = [marg - y1, y1];
        }
        // Undo the treatment channel within each outcome level.
        let cd = ch.d[z];
        for y in 0..2 {
            let marg = p[z][0][y] + p[z][1][y];
            let d1 = (p[z][1][y] - (1.0 - cd.sp) * marg) / cd.r();
            p[z][1][y] = d1;
            p[z][0][y] = marg - d1;
        }
    }

    let pi_a = p[0][1][0] + p[0][1][1];
    let pi_n = p[1][0][0] + p[1][0][1];
    let pi_c = 1.0 - pi_a - pi_n;
    let ratio = |num: f64, den: f64, what: &'static str| -> Result<f64> {
        if den.abs() > DEGENERATE_TOL {
            Ok(num / den)
        } else if num.abs() <= DEGENERATE_TOL {
            // empty stratum; its outcome probability is set to 0
            Ok(0.0)
        } else {
            Err(Error::DegenerateDenominator { what })
        }
    };
    let py_a = ratio(p[0][1][1], pi_a, "pi_a")?;
    let py_n = ratio(p[1][0][1], pi_n, "pi_n")?;
    if pi_c.abs() <= DEGENERATE_TOL {
        return Err(Error::DegenerateDenominator { what: "pi_c" });
    }
    let py_c1 = (p[1][1][1] - p[0][1][1]) / pi_c;
    let py_c0 = (p[0][0][1] - p[1][0][1]) / pi_c;
    Ok(LatentIvModel {
        pz,
        pi_a,
        pi_n,
        pi_c,
        py: [[py_a; 2], [py_n; 2], [py_c0, py_c1]],
    })
}
