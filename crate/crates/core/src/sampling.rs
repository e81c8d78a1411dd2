//! Deterministic quasi-uniform point sets.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PRIMES: [u32; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

fn radical_inverse(mut index: u64, base: u32) -> f64 {
    let b = base as u64;
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut acc = 0.0;
    while index > 0 {
        acc += f * (index % b) as f64;
        index /= b;
        f *= inv;
    }
    acc
}

/// `count` points of a Halton sequence in `[lower, upper]^dim`, rotated
/// (Cranley–Patterson) by a shift drawn from `seed`.
///
/// # Panics
/// If `dim` exceeds the number of tabulated prime bases (8).
pub fn shifted_halton(dim: usize, count: usize, lower: &[f64], upper: &[f64], seed: u64) -> Vec<f64> {
    assert!(
        dim <= PRIMES.len(),
        "Halton sequence supports at most {} dimensions",
        PRIMES.len()
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
    let mut out = Vec::with_capacity(dim * count);
    for i in 0..count {
        for j in 0..dim {
            let mut u = radical_inverse(i as u64 + 1, PRIMES[j]) + shift[j];
            if u >= 1.0 {
                u -= 1.0;
            }
            out.push(lower[j] + (upper[j] - lower[j]) * u);
        }
    }
    out
}
