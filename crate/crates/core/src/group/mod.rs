//! Concrete unimodular Lie groups with polynomial volume growth.

pub mod heisenberg;

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Monte-Carlo sample count used for the default Heisenberg volume calibration.
pub const DEFAULT_VOLUME_SAMPLES: usize = 10_000_000;
/// Seed used for the default Heisenberg volume calibration.
pub const DEFAULT_VOLUME_SEED: u64 = 0x5eed_0001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GroupKind {
    Euclidean { n: usize },
    Heisenberg1,
}

/// A group element, stored by its coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupPoint(pub Vec<f64>);

impl GroupPoint {
    pub fn new(coords: Vec<f64>) -> Self {
        GroupPoint(coords)
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }
}

impl From<Vec<f64>> for GroupPoint {
    fn from(v: Vec<f64>) -> Self {
        GroupPoint(v)
    }
}

impl<const N: usize> From<[f64; N]> for GroupPoint {
    fn from(v: [f64; N]) -> Self {
        GroupPoint(v.to_vec())
    }
}

/// Growth exponents: local dimension `d`, dimension at infinity `D` and the
/// exponent `κ` in `V(θr) ≤ C θ^κ V(r)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Growth {
    pub local: f64,
    pub infinity: f64,
    pub kappa: f64,
}

/// Smooth scalar function given with its coordinate gradient and Hessian.
pub trait ScalarField {
    fn value(&self, p: &[f64]) -> f64;
    fn gradient(&self, p: &[f64], out: &mut [f64]);
    /// Row-major `dim × dim` Hessian in coordinates.
    fn hessian(&self, p: &[f64], out: &mut [f64]);
}

/// A group instance. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupInstance {
    kind: GroupKind,
    volume_constant: f64,
}

/// Volume of the Euclidean unit ball in `ℝⁿ`.
pub fn unit_ball_volume(n: usize) -> f64 {
    let half = n as f64 / 2.0;
    PI.powf(half) / libm::tgamma(half + 1.0)
}

impl GroupInstance {
    pub fn euclidean(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("Euclidean dimension must be positive".into()));
        }
        Ok(GroupInstance {
            kind: GroupKind::Euclidean { n },
            volume_constant: unit_ball_volume(n),
        })
    }

    /// Heisenberg group with `V(r) = c_V r⁴`, `c_V` calibrated by Monte-Carlo
    /// integration of the unit CC ball.
    pub fn heisenberg1_calibrated(samples: usize, seed: u64) -> Result<Self> {
        let c = heisenberg::monte_carlo_ball_volume(1.0, samples, seed)?;
        Self::heisenberg1_with_volume_constant(c)
    }

    /// Heisenberg group with a previously calibrated volume constant.
    pub fn heisenberg1_with_volume_constant(volume_constant: f64) -> Result<Self> {
        if !(volume_constant > 0.0 && volume_constant.is_finite()) {
            return Err(Error::Domain(alloc::format!(
                "volume constant must be positive, got {volume_constant}"
            )));
        }
        Ok(GroupInstance {
            kind: GroupKind::Heisenberg1,
            volume_constant,
        })
    }

    pub fn kind(&self) -> GroupKind {
        self.kind
    }

    /// `c_V` in `V(r) = c_V r^d`.
    pub fn volume_constant(&self) -> f64 {
        self.volume_constant
    }

    /// Number of coordinates.
    pub fn dim(&self) -> usize {
        match self.kind {
            GroupKind::Euclidean { n } => n,
            GroupKind::Heisenberg1 => 3,
        }
    }

    /// Number of frame fields `k`.
    pub fn frame_size(&self) -> usize {
        match self.kind {
            GroupKind::Euclidean { n } => n,
            GroupKind::Heisenberg1 => 2,
        }
    }

    fn check(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: p.len(),
            });
        }
        Ok(())
    }

    fn check_field(&self, i: usize) -> Result<()> {
        if i >= self.frame_size() {
            return Err(Error::FrameIndex {
                index: i,
                size: self.frame_size(),
            });
        }
        Ok(())
    }

    pub fn identity(&self) -> GroupPoint {
        GroupPoint(vec![0.0; self.dim()])
    }

    pub fn multiply(&self, g: &GroupPoint, h: &GroupPoint) -> Result<GroupPoint> {
        self.check(&g.0)?;
        self.check(&h.0)?;
        Ok(GroupPoint(self.multiply_coords(&g.0, &h.0)))
    }

    pub(crate) fn multiply_coords(&self, g: &[f64], h: &[f64]) -> Vec<f64> {
        match self.kind {
            GroupKind::Euclidean { .. } => g.iter().zip(h).map(|(a, b)| a + b).collect(),
            GroupKind::Heisenberg1 => vec![
                g[0] + h[0],
                g[1] + h[1],
                g[2] + h[2] + 0.5 * (g[0] * h[1] - g[1] * h[0]),
            ],
        }
    }

    pub fn inverse(&self, g: &GroupPoint) -> Result<GroupPoint> {
        self.check(&g.0)?;
        // Both laws have inverse −g: the Heisenberg cocycle vanishes on (g, −g).
        Ok(GroupPoint(g.0.iter().map(|c| -c).collect()))
    }

    /// Homogeneous dilation `δ_λ`; `(λx, λy, λ²t)` on `H¹`.
    pub fn dilate(&self, lambda: f64, p: &GroupPoint) -> Result<GroupPoint> {
        self.check(&p.0)?;
        Ok(GroupPoint(match self.kind {
            GroupKind::Euclidean { .. } => p.0.iter().map(|c| lambda * c).collect(),
            GroupKind::Heisenberg1 => vec![lambda * p.0[0], lambda * p.0[1], lambda * lambda * p.0[2]],
        }))
    }

    /// Coordinate coefficients `a` of `X_i = Σ_j a_j(p) ∂_j`.
    ///
    /// For both instances `a` is constant along the integral curves of `X_i`
    /// itself, so `X_i² f = aᵀ (∇²f) a`.
    pub fn frame_coefficients(&self, i: usize, p: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|c| *c = 0.0);
        match self.kind {
            GroupKind::Euclidean { .. } => out[i] = 1.0,
            GroupKind::Heisenberg1 => {
                if i == 0 {
                    out[0] = 1.0;
                    out[2] = -0.5 * p[1];
                } else {
                    out[1] = 1.0;
                    out[2] = 0.5 * p[0];
                }
            }
        }
    }

    /// Exponential flow of `X_i` for time `s`: `p · exp(s e_i)`.
    pub fn flow(&self, i: usize, p: &GroupPoint, s: f64) -> Result<GroupPoint> {
        self.check(&p.0)?;
        self.check_field(i)?;
        let mut q = p.0.clone();
        self.flow_in_place(i, &mut q, s);
        Ok(GroupPoint(q))
    }

    pub(crate) fn flow_in_place(&self, i: usize, q: &mut [f64], s: f64) {
        match self.kind {
            GroupKind::Euclidean { .. } => q[i] += s,
            GroupKind::Heisenberg1 => {
                if i == 0 {
                    q[2] -= 0.5 * q[1] * s;
                    q[0] += s;
                } else {
                    q[2] += 0.5 * q[0] * s;
                    q[1] += s;
                }
            }
        }
    }

    /// `(X_i f)(p)`.
    pub fn frame_apply<F: ScalarField + ?Sized>(&self, i: usize, f: &F, p: &GroupPoint) -> Result<f64> {
        self.check(&p.0)?;
        self.check_field(i)?;
        let n = self.dim();
        let mut grad = vec![0.0; n];
        let mut a = vec![0.0; n];
        f.gradient(&p.0, &mut grad);
        self.frame_coefficients(i, &p.0, &mut a);
        Ok(a.iter().zip(&grad).map(|(x, y)| x * y).sum())
    }

    /// `(X_i² f)(p)`.
    pub fn frame_apply_twice<F: ScalarField + ?Sized>(&self, i: usize, f: &F, p: &GroupPoint) -> Result<f64> {
        self.check(&p.0)?;
        self.check_field(i)?;
        let n = self.dim();
        let mut hess = vec![0.0; n * n];
        let mut a = vec![0.0; n];
        f.hessian(&p.0, &mut hess);
        self.frame_coefficients(i, &p.0, &mut a);
        let mut acc = 0.0;
        for r in 0..n {
            for c in 0..n {
                acc += a[r] * hess[r * n + c] * a[c];
            }
        }
        Ok(acc)
    }

    /// `|p|`, the CC distance from the identity.
    pub fn cc_norm(&self, p: &GroupPoint) -> Result<f64> {
        self.check(&p.0)?;
        self.norm_coords(&p.0)
    }

    pub(crate) fn norm_coords(&self, p: &[f64]) -> Result<f64> {
        match self.kind {
            GroupKind::Euclidean { .. } => Ok(p.iter().map(|c| c * c).sum::<f64>().sqrt()),
            GroupKind::Heisenberg1 => heisenberg::distance_from_identity(p[0], p[1], p[2]),
        }
    }

    /// `d(g, h) = |h⁻¹ g|`.
    pub fn cc_distance(&self, g: &GroupPoint, h: &GroupPoint) -> Result<f64> {
        self.check(&g.0)?;
        self.check(&h.0)?;
        self.distance_coords(&g.0, &h.0)
    }

    pub(crate) fn distance_coords(&self, g: &[f64], h: &[f64]) -> Result<f64> {
        match self.kind {
            GroupKind::Euclidean { .. } => Ok(g.iter().zip(h).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()),
            GroupKind::Heisenberg1 => {
                // h⁻¹ g = (g − h) with the cocycle of (−h, g).
                let x = g[0] - h[0];
                let y = g[1] - h[1];
                let t = g[2] - h[2] + 0.5 * (h[1] * g[0] - h[0] * g[1]);
                heisenberg::distance_from_identity(x, y, t)
            }
        }
    }

    /// Haar volume `V(r)` of a ball of radius `r`.
    pub fn ball_volume(&self, r: f64) -> Result<f64> {
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::Domain(alloc::format!("ball radius must be positive, got {r}")));
        }
        Ok(self.volume_constant * r.powf(self.growth_exponents().local))
    }

    pub fn growth_exponents(&self) -> Growth {
        let d = match self.kind {
            GroupKind::Euclidean { n } => n as f64,
            GroupKind::Heisenberg1 => 4.0,
        };
        Growth {
            local: d,
            infinity: d,
            kappa: d,
        }
    }

    /// Doubling constant `C` in `V(2r) ≤ C V(r)` for the volume model.
    pub fn doubling_constant(&self) -> f64 {
        2.0.powf(self.growth_exponents().local)
    }
}
