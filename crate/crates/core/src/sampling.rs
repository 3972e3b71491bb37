//! Seeded random streams and multinomial draws shared by the bootstrap and
//! the simulator.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use crate::observed::ObservedCounts;

/// Independent stream `stream` of the generator seeded by `seed`; replicate
/// `i` always sees the same numbers regardless of scheduling.
pub(crate) fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Multinomial draw by sequential conditional binomials.
pub(crate) fn multinomial<R: Rng + ?Sized>(rng: &mut R, n: u64, probs: &[f64]) -> Vec<u64> {
    let mut out = vec![0; probs.len()];
    let mut left = n;
    let mut mass: f64 = probs.iter().sum();
    for (k, &p) in probs.iter().enumerate() {
        if left == 0 {
            break;
        }
        if k + 1 == probs.len() {
            out[k] = left;
            break;
        }
        let q = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 0.0 };
        let draw = Binomial::new(left, q).expect("probability in [0, 1]").sample(rng);
        out[k] = draw;
        left -= draw;
        mass -= p;
    }
    out
}

/// Resamples each arm's cells with the arm total held fixed.
pub(crate) fn resample_arms<R: Rng + ?Sized>(rng: &mut R, counts: &ObservedCounts) -> ObservedCounts {
    let mut out = ObservedCounts::default();
    for z in 0..2 {
        let n = counts.arm_total(z);
        if n == 0 {
            continue;
        }
        let probs: Vec<f64> = (0..4).map(|k| counts.get(z, k / 2, k % 2) as f64 / n as f64).collect();
        for (k, c) in multinomial(rng, n, &probs).into_iter().enumerate() {
            out.set(z, k / 2, k % 2, c);
        }
    }
    out
}
