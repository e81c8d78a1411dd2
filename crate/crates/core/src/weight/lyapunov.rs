//! Lyapunov sufficient conditions and the exponential Lyapunov function
//! `W = e^{γ(v − inf v)}`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::WeightSpec;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::group::{GroupInstance, GroupKind, ScalarField};
use crate::sampling::shifted_halton;

/// Sample points of a shell `R < |x|`.
#[derive(Debug, Clone, PartialEq)]
pub struct Shell {
    dim: usize,
    inner_radius: f64,
    outer_radius: f64,
    points: Vec<f64>,
}

impl Shell {
    /// Quasi-uniform points of `R < |x| ≤ R_max` plus every grid node with
    /// `|x| > R`.
    ///
    /// The candidate set does not depend on `R`, so infima over shells built
    /// with the same `R_max`, count, seed and grid are monotone in `R`.
    pub fn sample(
        group: &GroupInstance,
        inner_radius: f64,
        outer_radius: f64,
        count: usize,
        seed: u64,
        grid: Option<&Grid>,
    ) -> Result<Self> {
        if !(inner_radius >= 0.0) || !(outer_radius > inner_radius) {
            return Err(Error::Domain(format!(
                "empty shell: inner radius {inner_radius} must be below outer radius {outer_radius}"
            )));
        }
        let dim = group.dim();
        let (lower, upper) = bounding_box(group, outer_radius);
        let candidates = shifted_halton(dim, count, &lower, &upper, seed);
        let mut points = Vec::new();
        for p in candidates.chunks(dim) {
            let r = group.norm_coords(p)?;
            if r > inner_radius && r <= outer_radius {
                points.extend_from_slice(p);
            }
        }
        if let Some(grid) = grid {
            for p in grid.nodes() {
                if group.norm_coords(p)? > inner_radius {
                    points.extend_from_slice(p);
                }
            }
        }
        if points.is_empty() {
            return Err(Error::Domain(format!(
                "no sample falls in the shell {inner_radius} < |x| <= {outer_radius}"
            )));
        }
        Ok(Shell {
            dim,
            inner_radius,
            outer_radius,
            points,
        })
    }

    pub fn inner_radius(&self) -> f64 {
        self.inner_radius
    }

    pub fn outer_radius(&self) -> f64 {
        self.outer_radius
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.points.chunks(self.dim)
    }
}

/// Coordinate box containing the CC ball of radius `r` about the identity.
pub fn bounding_box(group: &GroupInstance, r: f64) -> (Vec<f64>, Vec<f64>) {
    match group.kind() {
        GroupKind::Euclidean { n } => (vec![-r; n], vec![r; n]),
        GroupKind::Heisenberg1 => {
            // The highest point of the sphere of radius r sits at t = r²/(2π).
            let tmax = r * r / (2.0 * core::f64::consts::PI);
            (vec![-r, -r, -tmax], vec![r, r, tmax])
        }
    }
}

/// A sampled infimum and where it was attained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Infimum {
    pub value: f64,
    pub minimizer: Vec<f64>,
    pub samples: usize,
}

fn shell_infimum<F: Fn(&[f64]) -> f64>(shell: &Shell, f: F) -> Infimum {
    let mut best = f64::INFINITY;
    let mut arg: &[f64] = &[];
    for p in shell.points() {
        let v = f(p);
        if v < best || arg.is_empty() {
            best = v;
            arg = p;
        }
    }
    Infimum {
        value: best,
        minimizer: arg.to_vec(),
        samples: shell.len(),
    }
}

/// `a Σ|X_i v|² − Σ X_i² v` at one point.
pub fn condition_expression(group: &GroupInstance, spec: &WeightSpec, a: f64, p: &[f64]) -> f64 {
    let xv = spec.frame_gradient(group, p);
    let xxv = spec.frame_second(group, p);
    a * xv.iter().map(|g| g * g).sum::<f64>() - xxv.iter().sum::<f64>()
}

/// Sampled infimum of `a Σ|X_i v|² − Σ X_i² v` over the shell; the sufficient
/// condition holds numerically iff the value is positive.
pub fn condition_infimum(group: &GroupInstance, spec: &WeightSpec, a: f64, shell: &Shell) -> Result<Infimum> {
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::Domain(format!("a must lie in (0, 1), got {a}")));
    }
    Ok(shell_infimum(shell, |p| condition_expression(group, spec, a, p)))
}

/// As [`condition_infimum`] with coefficient `(1 − ε)/2`.
pub fn improved_condition_infimum(
    group: &GroupInstance,
    spec: &WeightSpec,
    epsilon: f64,
    shell: &Shell,
) -> Result<Infimum> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Domain(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    let coeff = 0.5 * (1.0 - epsilon);
    Ok(shell_infimum(shell, |p| condition_expression(group, spec, coeff, p)))
}

/// `W = e^{γ(v − v_inf)}` with exact coordinate derivatives.
#[derive(Debug, Clone, Copy)]
pub struct ExponentialLyapunov<'a> {
    pub spec: &'a WeightSpec,
    pub gamma: f64,
    pub v_inf: f64,
}

impl ScalarField for ExponentialLyapunov<'_> {
    fn value(&self, p: &[f64]) -> f64 {
        (self.gamma * (self.spec.v(p) - self.v_inf)).exp()
    }

    fn gradient(&self, p: &[f64], out: &mut [f64]) {
        let w = self.value(p);
        self.spec.potential.gradient(p, out);
        for g in out.iter_mut() {
            *g *= self.gamma * w;
        }
    }

    fn hessian(&self, p: &[f64], out: &mut [f64]) {
        let n = self.spec.dim();
        let w = self.value(p);
        let mut grad = vec![0.0; n];
        self.spec.potential.gradient(p, &mut grad);
        self.spec.potential.hessian(p, out);
        for r in 0..n {
            for c in 0..n {
                out[r * n + c] = self.gamma * w * (out[r * n + c] + self.gamma * grad[r] * grad[c]);
            }
        }
    }
}

/// Node values of a Lyapunov function, for the discrete checks.
pub trait LyapunovFunction {
    fn eval(&self, p: &[f64]) -> f64;
    /// `−L_M W(p)`.
    fn minus_lm(&self, group: &GroupInstance, p: &[f64]) -> f64;
}

impl LyapunovFunction for ExponentialLyapunov<'_> {
    fn eval(&self, p: &[f64]) -> f64 {
        self.value(p)
    }

    fn minus_lm(&self, group: &GroupInstance, p: &[f64]) -> f64 {
        -self.spec.apply_lm_analytic(group, self, p)
    }
}

impl ExponentialLyapunov<'_> {
    /// `γ(Σ X_i² v − (1 − γ) Σ |X_i v|²) W`, the closed form of `−L_M W`.
    pub fn minus_lm_closed_form(&self, group: &GroupInstance, p: &[f64]) -> f64 {
        let xv = self.spec.frame_gradient(group, p);
        let xxv = self.spec.frame_second(group, p);
        let s2: f64 = xv.iter().map(|g| g * g).sum();
        let s1: f64 = xxv.iter().sum();
        self.gamma * (s1 - (1.0 - self.gamma) * s2) * self.value(p)
    }
}

/// A Lyapunov certificate `−L_M W ≤ −θ W + b 1_{B(e,R)}` on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovCertificate {
    pub a: f64,
    pub c: f64,
    pub radius: f64,
    pub gamma: f64,
    pub theta: f64,
    pub b: f64,
    /// Grid minimum of `v`, standing in for `inf_G v`.
    pub v_inf: f64,
    pub epsilon: Option<f64>,
    /// Sampled infimum of the sufficient condition on the shell.
    pub condition: Infimum,
    /// Node attaining `b`.
    pub b_witness: Vec<f64>,
}

impl LyapunovCertificate {
    pub fn lyapunov<'a>(&self, spec: &'a WeightSpec) -> ExponentialLyapunov<'a> {
        ExponentialLyapunov {
            spec,
            gamma: self.gamma,
            v_inf: self.v_inf,
        }
    }
}

/// Builds the exponential certificate with `γ = 1 − a`, `θ = cγ` and `b` the
/// grid maximum of `−L_M W + θW` over the open ball `B(e, R)`.
pub fn build_lyapunov(spec: &WeightSpec, grid: &Grid, a: f64, c: f64, shell: &Shell) -> Result<LyapunovCertificate> {
    let group = grid.instance();
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::CertificateRefused {
            reason: format!("a must lie in (0, 1), got {a}; a = 1 gives γ = 0 and W ≡ 1"),
            witness: None,
        });
    }
    if !(c > 0.0) {
        return Err(Error::CertificateRefused {
            reason: format!("c must be positive, got {c}"),
            witness: None,
        });
    }
    let radius = shell.inner_radius();
    let condition = condition_infimum(group, spec, a, shell)?;
    if !(condition.value >= c) {
        return Err(Error::CertificateRefused {
            reason: format!(
                "sufficient condition infimum {} over |x| > {radius} is below c = {c}",
                condition.value
            ),
            witness: Some(condition.minimizer),
        });
    }
    let v_inf = grid.nodes().map(|p| spec.v(p)).fold(f64::INFINITY, f64::min);
    let gamma = 1.0 - a;
    let theta = c * gamma;
    let w = ExponentialLyapunov { spec, gamma, v_inf };
    let mut b = 0.0;
    let mut b_witness = group.identity().0;
    for p in grid.nodes() {
        if group.norm_coords(p)? < radius {
            let val = w.minus_lm(group, p) + theta * w.eval(p);
            if val > b {
                b = val;
                b_witness = p.to_vec();
            }
        }
    }
    Ok(LyapunovCertificate {
        a,
        c,
        radius,
        gamma,
        theta,
        b,
        v_inf,
        epsilon: None,
        condition,
        b_witness,
    })
}

/// Outcome of checking a certificate at every grid node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovCheck {
    /// `max (−L_M W + θW − b 1_{B(e,R)})`; `≤ 0` (up to roundoff) means the
    /// inequality holds on the grid.
    pub max_violation: f64,
    pub witness: Vec<f64>,
    /// Smallest value of `W` on the grid.
    pub w_min: f64,
    /// `W` is constant, so the certificate carries no information.
    pub non_informative: bool,
}

pub fn verify_lyapunov(cert: &LyapunovCertificate, spec: &WeightSpec, grid: &Grid) -> Result<LyapunovCheck> {
    let group = grid.instance();
    let w = cert.lyapunov(spec);
    let mut max_violation = f64::NEG_INFINITY;
    let mut witness = group.identity().0;
    let mut w_min = f64::INFINITY;
    for p in grid.nodes() {
        let wp = w.eval(p);
        w_min = w_min.min(wp);
        let inside = group.norm_coords(p)? < cert.radius;
        let val = w.minus_lm(group, p) + cert.theta * wp - if inside { cert.b } else { 0.0 };
        if val > max_violation {
            max_violation = val;
            witness = p.to_vec();
        }
    }
    Ok(LyapunovCheck {
        max_violation,
        witness,
        w_min,
        non_informative: cert.gamma == 0.0 || spec.potential.is_constant(),
    })
}
