use std::f64::consts::PI;

use proptest::prelude::*;
use sublap_core::group::heisenberg::monte_carlo_ball_volume;
use sublap_core::group::unit_ball_volume;
use sublap_core::quadrature::integrate;
use sublap_core::weight::{flat, gaussian, Polynomial, WeightSpec};
use sublap_core::{GroupInstance, GroupPoint};

fn heis() -> GroupInstance {
    GroupInstance::heisenberg1_with_volume_constant(1.0).unwrap()
}

fn pt(c: &[f64]) -> GroupPoint {
    GroupPoint::new(c.to_vec())
}

fn close(a: &GroupPoint, b: &GroupPoint, tol: f64) -> bool {
    a.coords()
        .iter()
        .zip(b.coords())
        .all(|(x, y)| (x - y).abs() <= tol * (1.0 + x.abs().max(y.abs())))
}

/// RK4 on the horizontal curve of speed `d` whose velocity turns at rate
/// `phi`, started at heading `h`: `ṫ = (xẏ − yẋ)/2`.
fn shoot(d: f64, phi: f64, h: f64) -> [f64; 3] {
    let rhs = |s: f64, p: [f64; 3]| {
        let a = h + phi * s;
        let (vx, vy) = (d * a.cos(), d * a.sin());
        [vx, vy, 0.5 * (p[0] * vy - p[1] * vx)]
    };
    let steps = 2000;
    let dt = 1.0 / steps as f64;
    let mut p = [0.0; 3];
    let add = |p: [f64; 3], k: [f64; 3], c: f64| [p[0] + c * k[0], p[1] + c * k[1], p[2] + c * k[2]];
    for i in 0..steps {
        let s = i as f64 * dt;
        let k1 = rhs(s, p);
        let k2 = rhs(s + 0.5 * dt, add(p, k1, 0.5 * dt));
        let k3 = rhs(s + 0.5 * dt, add(p, k2, 0.5 * dt));
        let k4 = rhs(s + dt, add(p, k3, dt));
        for j in 0..3 {
            p[j] += dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
    }
    p
}

#[test]
fn shooting_endpoints_are_at_their_length() {
    let g = heis();
    let e = g.identity();
    for &(d, phi, h) in &[
        (1.0, 0.3, 0.0),
        (2.0, 1.5, 0.7),
        (0.7, 3.0, -2.0),
        (3.0, 5.0, 1.1),
        (1.3, 6.0, 2.5),
        (2.2, -4.0, 0.2),
    ] {
        let p = shoot(d, phi, h);
        let got = g.cc_distance(&e, &pt(&p)).unwrap();
        assert!((got - d).abs() <= 1e-7 * d, "d = {d}, φ = {phi}: {got}");
    }
}

#[test]
fn center_and_horizontal_distances() {
    let g = heis();
    let e = g.identity();
    assert!((g.cc_distance(&e, &pt(&[3.0, 4.0, 0.0])).unwrap() - 5.0).abs() < 1e-12);
    for t in [1.0, -1.0, 0.01, 25.0] {
        let d = g.cc_distance(&e, &pt(&[0.0, 0.0, t])).unwrap();
        assert!((d - (4.0 * PI * t.abs()).sqrt()).abs() < 1e-9 * d, "t = {t}: {d}");
    }
}

#[test]
fn small_heights_cost_their_square_root() {
    let g = heis();
    let d = g.cc_norm(&pt(&[0.0, 0.0, 1e-10])).unwrap();
    assert!((d - (4.0 * PI * 1e-10f64).sqrt()).abs() < 1e-12);
}

/// The unit sphere is the surface of revolution of `(ρ(φ), ±τ(φ))`,
/// `φ ∈ [0, 2π]`, with `ρ = 2 sin(φ/2)/φ` and `τ = (φ − sin φ)/(2φ²)`.
fn unit_ball_volume_by_revolution() -> f64 {
    let rho = |p: f64| 2.0 * (0.5 * p).sin() / p;
    let dtau = |p: f64| ((1.0 - p.cos()) * p - 2.0 * (p - p.sin())) / (2.0 * p * p * p);
    2.0 * PI * integrate(|p| rho(p) * rho(p) * dtau(p), 1e-6, 2.0 * PI, 64)
}

#[test]
fn monte_carlo_volume_matches_revolution_integral() {
    let exact = unit_ball_volume_by_revolution();
    let mc = monte_carlo_ball_volume(1.0, 2_000_000, 0x5eed_0001).unwrap();
    assert!((mc / exact - 1.0).abs() < 0.01, "{mc} vs {exact}");
    let ratio =
        monte_carlo_ball_volume(2.0, 2_000_000, 3).unwrap() / monte_carlo_ball_volume(1.0, 2_000_000, 4).unwrap();
    assert!((ratio / 16.0 - 1.0).abs() < 0.02, "{ratio}");
    let g = GroupInstance::heisenberg1_calibrated(1_000_000, 9).unwrap();
    assert!((g.ball_volume(1.5).unwrap() / (exact * 1.5f64.powi(4)) - 1.0).abs() < 0.02);
}

#[test]
fn euclidean_volumes_and_distances() {
    assert!((unit_ball_volume(1) - 2.0).abs() < 1e-14);
    assert!((unit_ball_volume(2) - PI).abs() < 1e-14);
    assert!((unit_ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-14);
    let g = GroupInstance::euclidean(3).unwrap();
    assert!((g.ball_volume(2.0).unwrap() - 32.0 * PI / 3.0).abs() < 1e-12);
    let d = g.cc_distance(&pt(&[1.0, 2.0, 3.0]), &pt(&[4.0, 6.0, 3.0])).unwrap();
    assert!((d - 5.0).abs() < 1e-14);
    assert_eq!(g.growth_exponents().kappa, 3.0);
    assert_eq!(heis().growth_exponents().kappa, 4.0);
}

#[test]
fn flat_heisenberg_operator_on_polynomials() {
    let g = heis();
    let w = flat(&g);
    let lm = |terms: &[(f64, &[u32])], p: &[f64]| {
        let f = Polynomial::from_terms(3, terms).unwrap();
        w.apply_lm_analytic(&g, &f, p)
    };
    for p in [[0.3, -1.2, 0.5], [2.0, 1.0, -3.0]] {
        // −(X² + Y²) with X = ∂x − (y/2)∂t, Y = ∂y + (x/2)∂t.
        assert!((lm(&[(1.0, &[2, 0, 0]), (1.0, &[0, 2, 0])], &p) + 4.0).abs() < 1e-12);
        assert!(lm(&[(1.0, &[0, 0, 1])], &p).abs() < 1e-12);
        let want = -0.5 * (p[0] * p[0] + p[1] * p[1]);
        assert!((lm(&[(1.0, &[0, 0, 2])], &p) - want).abs() < 1e-12);
    }
}

#[test]
fn ornstein_uhlenbeck_operator_on_hermite_polynomials() {
    let g = GroupInstance::euclidean(1).unwrap();
    let w = gaussian(&g);
    // He₂ = x² − 1 and He₃ = x³ − 3x are eigenfunctions with eigenvalues 2, 3.
    let he2 = Polynomial::from_terms(1, &[(1.0, &[2]), (-1.0, &[0])]).unwrap();
    let he3 = Polynomial::from_terms(1, &[(1.0, &[3]), (-3.0, &[1])]).unwrap();
    for x in [-2.0, -0.3, 0.0, 1.7] {
        assert!((w.apply_lm_analytic(&g, &he2, &[x]) - 2.0 * (x * x - 1.0)).abs() < 1e-12);
        assert!((w.apply_lm_analytic(&g, &he3, &[x]) - 3.0 * (x * x * x - 3.0 * x)).abs() < 1e-12);
    }
    assert!((w.mu(&g, &[2.0]) - 5.0).abs() < 1e-14);
    let custom = WeightSpec::new(
        "shifted",
        Polynomial::from_terms(1, &[(0.5, &[2]), (1.0, &[0])]).unwrap(),
    );
    assert!((custom.weight(&[0.0]) - (-1.0f64).exp()).abs() < 1e-15);
}

fn coord() -> impl Strategy<Value = f64> {
    -5.0..5.0f64
}

fn heis_point() -> impl Strategy<Value = GroupPoint> {
    (coord(), coord(), coord()).prop_map(|(x, y, t)| pt(&[x, y, t]))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn heisenberg_group_axioms(a in heis_point(), b in heis_point(), c in heis_point()) {
        let g = heis();
        let ab_c = g.multiply(&g.multiply(&a, &b).unwrap(), &c).unwrap();
        let a_bc = g.multiply(&a, &g.multiply(&b, &c).unwrap()).unwrap();
        prop_assert!(close(&ab_c, &a_bc, 1e-12));
        let inv = g.inverse(&a).unwrap();
        prop_assert!(close(&g.multiply(&a, &inv).unwrap(), &g.identity(), 1e-12));
        prop_assert!(close(&g.multiply(&g.identity(), &a).unwrap(), &a, 0.0));
    }

    #[test]
    fn distance_is_left_invariant_and_symmetric(a in heis_point(), b in heis_point(), c in heis_point()) {
        let g = heis();
        let d = g.cc_distance(&b, &c).unwrap();
        let moved = g.cc_distance(&g.multiply(&a, &b).unwrap(), &g.multiply(&a, &c).unwrap()).unwrap();
        prop_assert!((d - moved).abs() <= 1e-8 * (1.0 + d));
        let back = g.cc_distance(&c, &b).unwrap();
        prop_assert!((d - back).abs() <= 1e-8 * (1.0 + d));
    }

    #[test]
    fn triangle_inequality(a in heis_point(), b in heis_point(), c in heis_point()) {
        let g = heis();
        let ab = g.cc_distance(&a, &b).unwrap();
        let bc = g.cc_distance(&b, &c).unwrap();
        let ac = g.cc_distance(&a, &c).unwrap();
        prop_assert!(ac <= ab + bc + 1e-8 * (1.0 + ac));
    }

    #[test]
    fn dilations_scale_the_norm(p in heis_point(), lambda in 0.1..10.0f64) {
        let g = heis();
        let n = g.cc_norm(&p).unwrap();
        let scaled = g.cc_norm(&g.dilate(lambda, &p).unwrap()).unwrap();
        prop_assert!((scaled - lambda * n).abs() <= 1e-8 * (1.0 + lambda * n));
    }

    #[test]
    fn euclidean_axioms(a in prop::collection::vec(coord(), 2), b in prop::collection::vec(coord(), 2)) {
        let g = GroupInstance::euclidean(2).unwrap();
        let (a, b) = (pt(&a), pt(&b));
        let s = g.multiply(&a, &b).unwrap();
        prop_assert!(close(&s, &g.multiply(&b, &a).unwrap(), 0.0));
        let d = g.cc_distance(&a, &b).unwrap();
        let direct = a.coords().iter().zip(b.coords()).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        prop_assert!((d - direct).abs() <= 1e-12 * (1.0 + d));
    }
}
