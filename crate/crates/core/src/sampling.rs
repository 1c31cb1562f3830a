//! Deterministic sampling: Halton sequences for domain audits and a seeded
//! ChaCha generator for randomized ensembles.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

/// Halton points in the open unit cube `(0,1)^dim`, starting at index `skip + 1`.
pub fn halton(dim: usize, count: usize, skip: u64) -> Vec<Vec<f64>> {
    assert!(dim <= PRIMES.len(), "halton supports up to {} dimensions", PRIMES.len());
    (0..count as u64)
        .map(|k| (0..dim).map(|d| radical_inverse(skip + k + 1, PRIMES[d])).collect())
        .collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Standard normal draw by Box–Muller.
pub fn normal(rng: &mut impl Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn halton_stays_open_and_starts_at_one() {
        let pts = halton(3, 1000, 0);
        assert_eq!(pts[0], vec![0.5, 1.0 / 3.0, 0.2]);
        assert!(pts.iter().flatten().all(|&u| u > 0.0 && u < 1.0));
    }

    #[test]
    fn rng_is_deterministic() {
        let a: Vec<f64> = (0..5).map(|_| 0.0).scan(rng(7), |r, _| Some(normal(r))).collect();
        let b: Vec<f64> = (0..5).map(|_| 0.0).scan(rng(7), |r, _| Some(normal(r))).collect();
        assert_eq!(a, b);
    }
}
