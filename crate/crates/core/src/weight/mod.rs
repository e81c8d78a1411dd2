//! Weights `M = e^{-v}` with polynomial potentials `v`.
//!
//! Polynomials give exact coordinate gradients and Hessians, hence exact
//! frame derivatives `X_i v` and `X_i² v`.

pub mod lyapunov;

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{GroupInstance, GroupKind, ScalarField};

pub use lyapunov::{
    build_lyapunov, condition_infimum, improved_condition_infimum, verify_lyapunov, ExponentialLyapunov, Infimum,
    LyapunovCertificate, LyapunovCheck, LyapunovFunction, Shell,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coefficient: f64,
    pub powers: Vec<u32>,
}

/// Multivariate polynomial in group coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    dim: usize,
    terms: Vec<Monomial>,
}

fn ipow(x: f64, e: u32) -> f64 {
    let mut acc = 1.0;
    for _ in 0..e {
        acc *= x;
    }
    acc
}

/// `d^k/dx^k x^e`.
fn dpow(x: f64, e: u32, k: u32) -> f64 {
    if k > e {
        return 0.0;
    }
    let mut falling = 1.0;
    for j in 0..k {
        falling *= (e - j) as f64;
    }
    falling * ipow(x, e - k)
}

impl Polynomial {
    pub fn new(dim: usize, terms: Vec<Monomial>) -> Result<Self> {
        for t in &terms {
            if t.powers.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: t.powers.len(),
                });
            }
            if !t.coefficient.is_finite() {
                return Err(Error::Domain("polynomial coefficients must be finite".into()));
            }
        }
        Ok(Polynomial { dim, terms })
    }

    pub fn zero(dim: usize) -> Self {
        Polynomial { dim, terms: Vec::new() }
    }

    /// Builds from `(coefficient, powers)` pairs.
    pub fn from_terms(dim: usize, terms: &[(f64, &[u32])]) -> Result<Self> {
        Self::new(
            dim,
            terms
                .iter()
                .map(|(c, p)| Monomial {
                    coefficient: *c,
                    powers: p.to_vec(),
                })
                .collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[Monomial] {
        &self.terms
    }

    pub fn is_constant(&self) -> bool {
        self.terms
            .iter()
            .all(|t| t.coefficient == 0.0 || t.powers.iter().all(|&e| e == 0))
    }

    fn term_partial(&self, t: &Monomial, p: &[f64], orders: &[u32]) -> f64 {
        let mut acc = t.coefficient;
        for j in 0..self.dim {
            acc *= dpow(p[j], t.powers[j], orders[j]);
            if acc == 0.0 {
                break;
            }
        }
        acc
    }
}

impl ScalarField for Polynomial {
    fn value(&self, p: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| t.coefficient * t.powers.iter().zip(p).map(|(&e, &x)| ipow(x, e)).product::<f64>())
            .sum()
    }

    fn gradient(&self, p: &[f64], out: &mut [f64]) {
        let mut orders = vec![0u32; self.dim];
        for j in 0..self.dim {
            orders[j] = 1;
            out[j] = self.terms.iter().map(|t| self.term_partial(t, p, &orders)).sum();
            orders[j] = 0;
        }
    }

    fn hessian(&self, p: &[f64], out: &mut [f64]) {
        let n = self.dim;
        let mut orders = vec![0u32; n];
        for j in 0..n {
            for k in j..n {
                orders[j] += 1;
                orders[k] += 1;
                let v: f64 = self.terms.iter().map(|t| self.term_partial(t, p, &orders)).sum();
                orders[j] -= 1;
                orders[k] -= 1;
                out[j * n + k] = v;
                out[k * n + j] = v;
            }
        }
    }
}

/// Weight `M = e^{-v}` with a named polynomial potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    pub name: String,
    pub potential: Polynomial,
}

impl WeightSpec {
    pub fn new(name: impl Into<String>, potential: Polynomial) -> Self {
        WeightSpec {
            name: name.into(),
            potential,
        }
    }

    pub fn dim(&self) -> usize {
        self.potential.dim()
    }

    pub fn v(&self, p: &[f64]) -> f64 {
        self.potential.value(p)
    }

    pub fn weight(&self, p: &[f64]) -> f64 {
        (-self.v(p)).exp()
    }

    /// `X_i v(p)` for every frame field.
    pub fn frame_gradient(&self, group: &GroupInstance, p: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut grad = vec![0.0; n];
        let mut a = vec![0.0; n];
        self.potential.gradient(p, &mut grad);
        (0..group.frame_size())
            .map(|i| {
                group.frame_coefficients(i, p, &mut a);
                a.iter().zip(&grad).map(|(x, y)| x * y).sum()
            })
            .collect()
    }

    /// `X_i² v(p)` for every frame field.
    pub fn frame_second(&self, group: &GroupInstance, p: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut hess = vec![0.0; n * n];
        let mut a = vec![0.0; n];
        self.potential.hessian(p, &mut hess);
        (0..group.frame_size())
            .map(|i| {
                group.frame_coefficients(i, p, &mut a);
                let mut acc = 0.0;
                for r in 0..n {
                    for c in 0..n {
                        acc += a[r] * hess[r * n + c] * a[c];
                    }
                }
                acc
            })
            .collect()
    }

    /// `μ(p) = 1 + Σ |X_i v(p)|²`.
    pub fn mu(&self, group: &GroupInstance, p: &[f64]) -> f64 {
        1.0 + self.frame_gradient(group, p).iter().map(|g| g * g).sum::<f64>()
    }

    /// `(L_M f)(p) = −Σ (X_i² f − X_i v · X_i f)` from analytic derivatives of `f`.
    pub fn apply_lm_analytic<F: ScalarField + ?Sized>(&self, group: &GroupInstance, f: &F, p: &[f64]) -> f64 {
        let n = self.dim();
        let mut grad_f = vec![0.0; n];
        let mut hess_f = vec![0.0; n * n];
        let mut grad_v = vec![0.0; n];
        let mut a = vec![0.0; n];
        f.gradient(p, &mut grad_f);
        f.hessian(p, &mut hess_f);
        self.potential.gradient(p, &mut grad_v);
        let mut acc = 0.0;
        for i in 0..group.frame_size() {
            group.frame_coefficients(i, p, &mut a);
            let xf: f64 = a.iter().zip(&grad_f).map(|(x, y)| x * y).sum();
            let xv: f64 = a.iter().zip(&grad_v).map(|(x, y)| x * y).sum();
            let mut xxf = 0.0;
            for r in 0..n {
                for c in 0..n {
                    xxf += a[r] * hess_f[r * n + c] * a[c];
                }
            }
            acc += xxf - xv * xf;
        }
        -acc
    }
}

/// Names accepted by [`library`].
pub const LIBRARY_NAMES: [&str; 5] = [
    "gaussian",
    "quartic",
    "heisenberg_anisotropic",
    "heisenberg_saddle",
    "flat",
];

fn squared_norm_terms(dim: usize, scale: f64) -> Vec<Monomial> {
    (0..dim)
        .map(|j| {
            let mut powers = vec![0; dim];
            powers[j] = 2;
            Monomial {
                coefficient: scale,
                powers,
            }
        })
        .collect()
}

/// `v = |x|²/2` in the coordinate norm.
pub fn gaussian(group: &GroupInstance) -> WeightSpec {
    let dim = group.dim();
    WeightSpec::new(
        "gaussian",
        Polynomial::new(dim, squared_norm_terms(dim, 0.5)).expect("valid"),
    )
}

/// `v = |x|⁴/4` in the coordinate norm.
pub fn quartic(group: &GroupInstance) -> WeightSpec {
    let dim = group.dim();
    let mut terms = Vec::new();
    for j in 0..dim {
        for k in 0..dim {
            let mut powers = vec![0; dim];
            powers[j] += 2;
            powers[k] += 2;
            terms.push(Monomial {
                coefficient: 0.25,
                powers,
            });
        }
    }
    WeightSpec::new("quartic", Polynomial::new(dim, terms).expect("valid"))
}

/// `v = (x² + y²)/2 + t²/2` on `H¹`.
pub fn heisenberg_anisotropic() -> WeightSpec {
    WeightSpec::new(
        "heisenberg_anisotropic",
        Polynomial::from_terms(3, &[(0.5, &[2, 0, 0]), (0.5, &[0, 2, 0]), (0.5, &[0, 0, 2])]).expect("valid"),
    )
}

/// `v = (x² + y²)²/16 − (x² + y²)/2 + t²` on `H¹`.
///
/// Rotation-invariant potentials have `X_i v = 0` on the `t`-axis, so the
/// Lyapunov condition there needs `Σ X_i² v < 0`: this weight is a saddle in
/// the horizontal directions near the axis and confining at infinity.
pub fn heisenberg_saddle() -> WeightSpec {
    WeightSpec::new(
        "heisenberg_saddle",
        Polynomial::from_terms(
            3,
            &[
                (1.0 / 16.0, &[4, 0, 0]),
                (2.0 / 16.0, &[2, 2, 0]),
                (1.0 / 16.0, &[0, 4, 0]),
                (-0.5, &[2, 0, 0]),
                (-0.5, &[0, 2, 0]),
                (1.0, &[0, 0, 2]),
            ],
        )
        .expect("valid"),
    )
}

/// `v = 0`, `M ≡ 1`.
pub fn flat(group: &GroupInstance) -> WeightSpec {
    WeightSpec::new("flat", Polynomial::zero(group.dim()))
}

/// Looks up a shipped weight by name.
pub fn library(name: &str, group: &GroupInstance) -> Result<WeightSpec> {
    let heis_only = |w: WeightSpec| match group.kind() {
        GroupKind::Heisenberg1 => Ok(w),
        GroupKind::Euclidean { .. } => Err(Error::Domain(alloc::format!(
            "weight `{name}` is defined on heisenberg1 only"
        ))),
    };
    match name {
        "gaussian" => Ok(gaussian(group)),
        "quartic" => Ok(quartic(group)),
        "heisenberg_anisotropic" => heis_only(heisenberg_anisotropic()),
        "heisenberg_saddle" => heis_only(heisenberg_saddle()),
        "flat" => Ok(flat(group)),
        other => Err(Error::Domain(alloc::format!(
            "unknown weight `{other}`; known: {}",
            LIBRARY_NAMES.join(", ")
        ))),
    }
    .map(|mut w| {
        w.name = name.to_string();
        w
    })
}
