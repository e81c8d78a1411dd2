//! Fixed Gauss–Legendre rules and composite panels.

use alloc::vec::Vec;

/// Eight-point Gauss–Legendre nodes on `[-1, 1]`.
#[allow(clippy::excessive_precision)]
const GL8_NODES: [f64; 8] = [
    -0.960_289_856_497_536_3,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329_0,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329_0,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];

#[allow(clippy::excessive_precision)]
const GL8_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_26,
    0.222_381_034_453_374_47,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_47,
    0.101_228_536_290_376_26,
];

/// Composite rule: `panels` equal panels on `[a, b]`, eight points each.
pub fn composite_gauss_legendre(a: f64, b: f64, panels: usize) -> Vec<(f64, f64)> {
    let width = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(panels * 8);
    for p in 0..panels {
        let lo = a + p as f64 * width;
        let mid = lo + 0.5 * width;
        for (x, w) in GL8_NODES.iter().zip(GL8_WEIGHTS.iter()) {
            out.push((mid + 0.5 * width * x, 0.5 * width * w));
        }
    }
    out
}

/// `∫_a^b f` by a composite eight-point rule.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    crate::sum::sum(
        composite_gauss_legendre(a, b, panels)
            .into_iter()
            .map(|(x, w)| w * f(x)),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_exactly() {
        let v = integrate(|x| x.powi(15) + 3.0 * x * x, -1.0, 2.0, 1);
        let exact = (2f64.powi(16) - 1.0) / 16.0 + (8.0 + 1.0);
        assert!((v - exact).abs() < 1e-10 * exact);
    }

    #[test]
    fn weights_sum_to_interval_length() {
        let s: f64 = composite_gauss_legendre(-3.0, 5.0, 7).iter().map(|p| p.1).sum();
        assert!((s - 8.0).abs() < 1e-13);
    }
}
