use std::f64::consts::PI;

use sublap_core::eigen::EigenOptions;
use sublap_core::spectral::{
    frac_power_apply, functional_calculus_check, improved_spectrum, poincare_spectrum, quadratic_functional,
    DenseSpectrum, QuadratureGrid,
};
use sublap_core::weight::{gaussian, quartic};
use sublap_core::{assemble, build_grid, AssembledForms, GroupInstance};

fn ou(resolution: usize, radius: f64) -> AssembledForms {
    let g = GroupInstance::euclidean(1).unwrap();
    let w = gaussian(&g);
    let grid = build_grid(&g, &w, resolution, radius).unwrap();
    assemble(&grid, &w).unwrap()
}

fn opts(count: usize) -> EigenOptions {
    EigenOptions {
        count,
        ..EigenOptions::default()
    }
}

#[test]
fn ou_spectrum_is_hermite() {
    let forms = ou(201, 8.0);
    let eig = poincare_spectrum(&forms, 4, &opts(4)).unwrap();
    for (k, v) in eig.values.iter().enumerate() {
        let exact = (k + 1) as f64;
        assert!((v - exact).abs() < 2e-3 * exact, "λ_{} = {v}", k + 1);
    }
    for v in &eig.vectors {
        assert!(forms.mean(v).abs() < 1e-10);
        assert!((forms.norm(v) - 1.0).abs() < 1e-10);
    }
}

#[test]
fn planar_ou_spectrum_is_sums_of_hermite() {
    let g = GroupInstance::euclidean(2).unwrap();
    let w = gaussian(&g);
    let grid = build_grid(&g, &w, 49, 7.0).unwrap();
    let forms = assemble(&grid, &w).unwrap();
    let eig = poincare_spectrum(&forms, 5, &opts(5)).unwrap();
    for (v, exact) in eig.values.iter().zip([1.0, 1.0, 2.0, 2.0, 2.0]) {
        assert!((v - exact).abs() < 0.03 * exact, "{:?}", eig.values);
    }
}

#[test]
fn dense_and_iterative_spectra_agree() {
    let forms = ou(101, 8.0);
    let dense = DenseSpectrum::new(&forms).unwrap();
    let eig = poincare_spectrum(&forms, 3, &opts(3)).unwrap();
    assert_eq!(dense.values[0], 0.0);
    for k in 0..3 {
        assert!((dense.values[k + 1] - eig.values[k]).abs() < 1e-8 * eig.values[k]);
    }
    assert!(dense.error_bound < 1e-9);
    // L^{1/2} applied twice is L.
    let f = forms.project_mean_zero(&(0..101).map(|k| ((k * 37 % 11) as f64).sin()).collect::<Vec<_>>());
    let half = frac_power_apply(&dense, &f, 0.5).unwrap();
    let twice = frac_power_apply(&dense, &half, 0.5).unwrap();
    let once = frac_power_apply(&dense, &f, 1.0).unwrap();
    let scale = once.iter().map(|v| v.abs()).fold(0.0, f64::max);
    for (a, b) in twice.iter().zip(&once) {
        assert!((a - b).abs() < 1e-8 * scale);
    }
    // ‖L^{1/2} f‖² equals the Dirichlet energy.
    let e = forms.energy(&f);
    assert!((dense.power_norm_squared(&f, 1.0) - e).abs() < 1e-9 * e);
}

/// `Γ(z) Γ(2 − z) = (1 − z) π / sin(πz)`.
fn gamma_product(z: f64) -> f64 {
    (1.0 - z) * PI / (PI * z).sin()
}

#[test]
fn quadratic_functional_on_an_eigenvector() {
    let forms = ou(201, 8.0);
    let eig = poincare_spectrum(&forms, 2, &opts(2)).unwrap();
    let grid = QuadratureGrid::spanning(eig.values[0], forms.spectral_upper_bound(), 200).unwrap();
    for (k, v) in eig.vectors.iter().enumerate() {
        let lambda = eig.values[k];
        for alpha in [0.5, 1.0, 1.5] {
            let q = quadratic_functional(&forms, v, alpha, &grid).unwrap();
            let want = gamma_product(0.5 * alpha) * lambda.powf(0.5 * alpha);
            assert!((q / want - 1.0).abs() < 1e-4, "k = {k}, α = {alpha}: {q} vs {want}");
        }
    }
}

#[test]
fn functional_calculus_detects_a_too_large_constant() {
    let forms = ou(101, 8.0);
    let dense = DenseSpectrum::new(&forms).unwrap();
    let lw = improved_spectrum(&forms, 1, &opts(1)).unwrap().values[0];
    for alpha in [1.0, 2.0] {
        let ok = functional_calculus_check(&dense, &forms, lw, alpha).unwrap();
        assert!(ok.assessable && ok.holds, "{ok:?}");
        let bad = functional_calculus_check(&dense, &forms, 50.0 * lw, alpha).unwrap();
        assert!(bad.assessable && !bad.holds, "{bad:?}");
    }
    assert!(functional_calculus_check(&dense, &forms, lw, 2.5).is_err());
}

#[test]
fn quartic_weight_has_a_gap() {
    let g = GroupInstance::euclidean(1).unwrap();
    let w = quartic(&g);
    let grid = build_grid(&g, &w, 201, 6.0).unwrap();
    let forms = assemble(&grid, &w).unwrap();
    let a = poincare_spectrum(&forms, 1, &opts(1)).unwrap().values[0];
    let grid = build_grid(&g, &w, 401, 6.0).unwrap();
    let b = poincare_spectrum(&assemble(&grid, &w).unwrap(), 1, &opts(1))
        .unwrap()
        .values[0];
    assert!(a > 0.0 && (a - b).abs() < 1e-3 * b, "{a} vs {b}");
}
