//! Spectral gaps, fractional powers, the resolvent quadratic functional and
//! off-diagonal resolvent decay.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::eigen::{constrained_smallest, EigenOptions, EigenResult};
use crate::error::{Error, Result};
use crate::grid::{apply_lm, AssembledForms, Grid, Resolvent};
use crate::solver::{BandedCholesky, LinearSolver};
use crate::sum::CompensatedSum;

/// Node ceiling for dense eigendecompositions.
pub const DENSE_CEILING: usize = 5_000;

/// Smallest `count` eigenpairs of `D u = λ B u` on the `B`-mean-zero subspace.
pub fn poincare_spectrum(forms: &AssembledForms, count: usize, opts: &EigenOptions) -> Result<EigenResult> {
    let opts = EigenOptions { count, ..opts.clone() };
    constrained_smallest(&forms.dirichlet, &forms.mass, &forms.mass, &opts)
}

/// `λ₁`, the spectral gap of `(D, B)` on mean-zero vectors.
pub fn poincare_gap(forms: &AssembledForms) -> Result<f64> {
    Ok(poincare_spectrum(forms, 1, &EigenOptions::default())?.values[0])
}

/// Smallest `count` eigenpairs of `D u = λ B_μ u` on the `B`-mean-zero
/// subspace, the subspace on which the improved inequality is stated.
pub fn improved_spectrum(forms: &AssembledForms, count: usize, opts: &EigenOptions) -> Result<EigenResult> {
    let opts = EigenOptions { count, ..opts.clone() };
    constrained_smallest(&forms.dirichlet, &forms.weighted_mass, &forms.mass, &opts)
}

/// `λ_weighted`, the largest `λ` with `D ⪰ λ B_μ` on mean-zero vectors.
pub fn improved_gap(forms: &AssembledForms) -> Result<f64> {
    Ok(improved_spectrum(forms, 1, &EigenOptions::default())?.values[0])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormInequality {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// `Σ (L_M W / W) f² dμ_M ≤ fᵀ D f` with the left sum over interior nodes.
pub fn lempoinc_check(forms: &AssembledForms, w: &[f64], f: &[f64]) -> Result<FormInequality> {
    let n = forms.len();
    for v in [w, f] {
        if v.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: v.len(),
            });
        }
    }
    if let Some(k) = w.iter().position(|x| !(*x >= 1.0 - 1e-12)) {
        return Err(Error::Precondition(alloc::format!(
            "W must be at least 1, got {} at node {k}",
            w[k]
        )));
    }
    let lw = apply_lm(forms, w);
    let mut lhs = CompensatedSum::new();
    for k in 0..n {
        if forms.interior[k] {
            lhs.add(lw[k] / w[k] * f[k] * f[k] * forms.mass[k]);
        }
    }
    let lhs = lhs.value();
    let rhs = forms.energy(f);
    let tol = 1e-10 * (lhs.abs() + rhs.abs()) + 1e-300;
    Ok(FormInequality {
        lhs,
        rhs,
        holds: lhs <= rhs + tol,
    })
}

/// Orthonormal basis (columns) of the complement of `b`, from a Householder
/// reflection that maps `e₁` to `±b/|b|`.
pub fn orthonormal_complement(b: &DVector<f64>) -> DMatrix<f64> {
    let n = b.len();
    let norm = b.norm();
    let mut v = b / norm;
    let sign = if v[0] >= 0.0 { 1.0 } else { -1.0 };
    v[0] += sign;
    let vv = v.dot(&v);
    let mut h = DMatrix::<f64>::identity(n, n);
    h -= (&v * v.transpose()) * (2.0 / vv);
    h.columns(1, n - 1).into_owned()
}

/// `(P A P)` without its first row and column, for the Householder
/// reflection `P = I − β v vᵀ`. `O(n²)`.
fn reflect_compress(a: &DMatrix<f64>, v: &DVector<f64>, beta: f64) -> DMatrix<f64> {
    let n = v.len();
    let p = a * v * beta;
    let k = 0.5 * beta * v.dot(&p);
    let q = p - v * k;
    DMatrix::from_fn(n - 1, n - 1, |r, c| {
        let (i, j) = (r + 1, c + 1);
        a[(i, j)] - q[i] * v[j] - v[i] * q[j]
    })
}

/// Householder vector and `β` of the reflection mapping `e₁` to `±b/|b|`.
fn householder(b: &DVector<f64>) -> (DVector<f64>, f64) {
    let mut v = b / b.norm();
    let sign = if v[0] >= 0.0 { 1.0 } else { -1.0 };
    v[0] += sign;
    let beta = 2.0 / v.dot(&v);
    (v, beta)
}

/// Dense eigendecomposition of `Â = B^{-1/2} D B^{-1/2}`.
///
/// The constant mode is deflated exactly: `Â` is compressed to the
/// orthogonal complement of `B^{1/2} 𝟙` before the eigensolve, and the
/// constant is prepended with eigenvalue 0.
#[derive(Debug, Clone)]
pub struct DenseSpectrum {
    /// Ascending eigenvalues of `B⁻¹D`; `values[0] = 0` is the constant mode.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors of `Â` (columns).
    pub vectors: DMatrix<f64>,
    /// Backward-error bound `n · ε · max λ` on every eigenvalue.
    pub error_bound: f64,
    sqrt_mass: Vec<f64>,
}

impl DenseSpectrum {
    pub fn new(forms: &AssembledForms) -> Result<Self> {
        let n = forms.len();
        if n > DENSE_CEILING {
            return Err(Error::Ceiling {
                what: "dense eigendecomposition (use the quadrature route)",
                size: n,
                ceiling: DENSE_CEILING,
            });
        }
        if n < 2 {
            return Err(Error::Domain("dense spectrum needs at least two nodes".into()));
        }
        let sqrt_mass: Vec<f64> = forms.mass.iter().map(|b| b.sqrt()).collect();
        let mut a = DMatrix::<f64>::zeros(n, n);
        for (r, c, v) in forms.dirichlet.triplets() {
            a[(r, c)] = v / (sqrt_mass[r] * sqrt_mass[c]);
        }
        let a = (&a + a.transpose()) * 0.5;
        let q0 = DVector::from_vec(sqrt_mass.clone());
        let (hv, beta) = householder(&q0);
        let reduced = reflect_compress(&a, &hv, beta);
        drop(a);
        let eig = SymmetricEigen::new(reduced);
        let mut order: Vec<usize> = (0..n - 1).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let mut values = Vec::with_capacity(n);
        values.push(0.0);
        values.extend(order.iter().map(|&i| eig.eigenvalues[i]));
        let top = values.iter().cloned().fold(0.0, f64::max);
        let q0n = q0.norm();
        // Column 0 is the constant mode; column c > 0 is P [0; y_c].
        let mut vectors = DMatrix::<f64>::zeros(n, n);
        for r in 0..n {
            vectors[(r, 0)] = sqrt_mass[r] / q0n;
        }
        for (c, &col) in order.iter().enumerate() {
            let y = eig.eigenvectors.column(col);
            let mut s = 0.0;
            for r in 1..n {
                s += hv[r] * y[r - 1];
            }
            s *= beta;
            vectors[(0, c + 1)] = -s * hv[0];
            for r in 1..n {
                vectors[(r, c + 1)] = y[r - 1] - s * hv[r];
            }
        }
        Ok(DenseSpectrum {
            values,
            vectors,
            error_bound: n as f64 * f64::EPSILON * top,
            sqrt_mass,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Coefficients of `f` in the `B`-orthonormal eigenbasis.
    pub fn coefficients(&self, f: &[f64]) -> DVector<f64> {
        let w = DVector::from_iterator(f.len(), f.iter().zip(&self.sqrt_mass).map(|(a, s)| a * s));
        self.vectors.transpose() * w
    }

    /// `φ(L) f` for a function `φ` of the spectrum.
    pub fn apply_function<F: Fn(f64) -> f64>(&self, f: &[f64], phi: F) -> Vec<f64> {
        let mut c = self.coefficients(f);
        for (k, x) in c.iter_mut().enumerate() {
            *x *= phi(self.values[k]);
        }
        let w = &self.vectors * c;
        w.iter().zip(&self.sqrt_mass).map(|(a, s)| a / s).collect()
    }

    /// Generalized eigenvector `k`, `B`-normalized.
    pub fn eigenvector(&self, k: usize) -> Vec<f64> {
        self.vectors
            .column(k)
            .iter()
            .zip(&self.sqrt_mass)
            .map(|(a, s)| a / s)
            .collect()
    }

    /// `‖L^{s/2} f‖²_B = Σ λ_k^s c_k²`.
    pub fn power_norm_squared(&self, f: &[f64], s: f64) -> f64 {
        let c = self.coefficients(f);
        crate::sum::sum(
            c.iter()
                .zip(&self.values)
                .map(|(ck, &l)| if l > 0.0 { l.powf(s) * ck * ck } else { 0.0 }),
        )
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::Domain(alloc::format!("power must be positive, got {beta}")));
    }
    Ok(())
}

/// `L^β f` by spectral calculus. Defined for every `β > 0`.
pub fn frac_power_apply(spectrum: &DenseSpectrum, f: &[f64], beta: f64) -> Result<Vec<f64>> {
    check_beta(beta)?;
    if f.len() != spectrum.len() {
        return Err(Error::DimensionMismatch {
            expected: spectrum.len(),
            got: f.len(),
        });
    }
    Ok(spectrum.apply_function(f, |l| if l > 0.0 { l.powf(beta) } else { 0.0 }))
}

/// Tolerance of the functional-calculus inequality.
pub const CALCULUS_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalCalculusCheck {
    pub alpha: f64,
    pub lambda: f64,
    /// Absent when the error bound exceeds the tolerance.
    pub min_eig: Option<f64>,
    /// Roundoff bound on `min_eig` from the dense decomposition.
    pub error_bound: f64,
    /// The error bound is below [`CALCULUS_TOLERANCE`], so the sign of
    /// `min_eig + tolerance` is meaningful.
    pub assessable: bool,
    pub holds: bool,
}

/// Smallest eigenvalue of `L^{α/2} − λ^{α/2} μ^{α/2}` as a form on the
/// mean-zero subspace of `L²(B)`; the inequality holds iff it is `≥ −1e−8`.
///
/// When the dense decomposition cannot resolve `1e−8` (its backward error
/// scales with the largest eigenvalue), the check is reported as not
/// assessable and the eigenvalue is not computed.
pub fn functional_calculus_check(
    spectrum: &DenseSpectrum,
    forms: &AssembledForms,
    lambda: f64,
    alpha: f64,
) -> Result<FunctionalCalculusCheck> {
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(Error::Domain(alloc::format!("alpha must lie in (0, 2], got {alpha}")));
    }
    let n = spectrum.len();
    let s = 0.5 * alpha;
    let scale = lambda.powf(s);
    let top = spectrum.values.last().copied().unwrap_or(0.0).max(0.0);
    let mu_top = forms.mu.iter().cloned().fold(0.0, f64::max);
    let lambda1 = spectrum.values.get(1).copied().unwrap_or(0.0);
    let propagated = spectrum.error_bound * s * lambda1.max(spectrum.error_bound).powf(s - 1.0);
    let error_bound = n as f64 * f64::EPSILON * (top.powf(s) + scale * mu_top.powf(s)) + propagated;
    if !(error_bound <= CALCULUS_TOLERANCE) {
        return Ok(FunctionalCalculusCheck {
            alpha,
            lambda,
            min_eig: None,
            error_bound,
            assessable: false,
            holds: false,
        });
    }
    let pw = DVector::from_iterator(
        n,
        spectrum.values.iter().map(|&l| if l > 0.0 { l.powf(s) } else { 0.0 }),
    );
    let v = &spectrum.vectors;
    let vs = DMatrix::from_fn(n, n, |r, c| v[(r, c)] * pw[c]);
    let mut m = vs * v.transpose();
    for k in 0..n {
        m[(k, k)] -= scale * forms.mu[k].powf(s);
    }
    let (hv, beta) = householder(&DVector::from_vec(spectrum.sqrt_mass.clone()));
    let reduced = reflect_compress(&m, &hv, beta);
    drop(m);
    let reduced = (&reduced + reduced.transpose()) * 0.5;
    let min_eig = reduced
        .symmetric_eigenvalues()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    Ok(FunctionalCalculusCheck {
        alpha,
        lambda,
        min_eig: Some(min_eig),
        error_bound,
        assessable: true,
        holds: min_eig >= -CALCULUS_TOLERANCE,
    })
}

/// Log-spaced `t` nodes with trapezoid weights in `ln t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureGrid {
    pub nodes: Vec<f64>,
    pub log_weights: Vec<f64>,
}

impl QuadratureGrid {
    pub fn log_spaced(t_min: f64, t_max: f64, count: usize) -> Result<Self> {
        if !(t_min > 0.0 && t_max > t_min && count >= 2) {
            return Err(Error::Domain(alloc::format!(
                "need 0 < t_min < t_max and at least two nodes, got [{t_min}, {t_max}] with {count}"
            )));
        }
        let (a, b) = (t_min.ln(), t_max.ln());
        let step = (b - a) / (count - 1) as f64;
        let nodes = (0..count).map(|k| (a + k as f64 * step).exp()).collect();
        let log_weights = (0..count)
            .map(|k| if k == 0 || k + 1 == count { 0.5 * step } else { step })
            .collect();
        Ok(QuadratureGrid { nodes, log_weights })
    }

    /// `count` nodes over `[1e−6/λ_max, 1e6/λ_min]`.
    pub fn spanning(lambda_min: f64, lambda_max: f64, count: usize) -> Result<Self> {
        Self::log_spaced(1e-6 / lambda_max, 1e6 / lambda_min, count)
    }

    pub fn t_min(&self) -> f64 {
        self.nodes[0]
    }

    pub fn t_max(&self) -> f64 {
        *self.nodes.last().expect("nonempty")
    }
}

/// Default number of quadrature nodes.
pub const QUADRATURE_NODES: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticValue {
    pub alpha: f64,
    /// `∫₀^∞ t^{−1−α/2} ‖tL(I + tL)⁻¹ f‖²_B dt`.
    pub value: f64,
    /// Analytic tail contributions appended beyond the node range.
    pub tail_small: f64,
    pub tail_large: f64,
}

/// Values of the quadratic functional for every `f` and every `α`, sharing
/// one factorization per quadrature node. Indexed `[f][α]`.
pub fn quadratic_functional_multi(
    forms: &AssembledForms,
    fs: &[Vec<f64>],
    alphas: &[f64],
    t_grid: &QuadratureGrid,
    solver: LinearSolver,
) -> Result<Vec<Vec<QuadraticValue>>> {
    for &alpha in alphas {
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(Error::Domain(alloc::format!("alpha must lie in (0, 2), got {alpha}")));
        }
    }
    let nt = t_grid.nodes.len();
    // g[f][k] = ‖f − u_{t_k}‖²_B
    let mut g = vec![vec![0.0; nt]; fs.len()];
    for (k, &t) in t_grid.nodes.iter().enumerate() {
        let res = Resolvent::new(forms, t, solver)?;
        for (j, f) in fs.iter().enumerate() {
            let u = res.apply(f)?;
            let diff: Vec<f64> = f.iter().zip(&u).map(|(a, b)| a - b).collect();
            g[j][k] = forms.inner(&diff, &diff);
        }
    }
    let (t0, t1) = (t_grid.t_min(), t_grid.t_max());
    Ok(g.iter()
        .map(|gj| {
            alphas
                .iter()
                .map(|&alpha| {
                    let s = 0.5 * alpha;
                    let mut acc = CompensatedSum::new();
                    for k in 0..nt {
                        acc.add(t_grid.log_weights[k] * t_grid.nodes[k].powf(-s) * gj[k]);
                    }
                    // g ~ t² near 0 and g → const at ∞.
                    let tail_small = gj[0] * t0.powf(-s) / (2.0 - s);
                    let tail_large = gj[nt - 1] * t1.powf(-s) / s;
                    QuadraticValue {
                        alpha,
                        value: acc.value() + tail_small + tail_large,
                        tail_small,
                        tail_large,
                    }
                })
                .collect()
        })
        .collect())
}

pub fn quadratic_functional(forms: &AssembledForms, f: &[f64], alpha: f64, t_grid: &QuadratureGrid) -> Result<f64> {
    let out = quadratic_functional_multi(forms, &[f.to_vec()], &[alpha], t_grid, LinearSolver::Auto)?;
    Ok(out[0][0].value)
}

/// `Γ(α/2) Γ(2 − α/2)`, the per-mode constant of the quadratic functional.
pub fn quadratic_constant(alpha: f64) -> f64 {
    libm::tgamma(0.5 * alpha) * libm::tgamma(2.0 - 0.5 * alpha)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares `y ≈ slope·x + intercept`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return Err(Error::Domain("a linear fit needs at least two paired samples".into()));
    }
    let mx = crate::sum::sum(x.iter().copied()) / n as f64;
    let my = crate::sum::sum(y.iter().copied()) / n as f64;
    let sxx = crate::sum::sum(x.iter().map(|a| (a - mx) * (a - mx)));
    let sxy = crate::sum::sum(x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)));
    let syy = crate::sum::sum(y.iter().map(|b| (b - my) * (b - my)));
    if !(sxx > 0.0) {
        return Err(Error::Domain("abscissae of a linear fit must not all coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Ok(LinearFit {
        slope,
        intercept,
        r_squared,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffdiagSample {
    pub t: f64,
    pub r1: f64,
    pub r2: f64,
    /// `8 exp(slope · d/√t + intercept)`.
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffdiagResult {
    /// Smallest CC distance between `E` and `F`.
    pub distance: f64,
    pub samples: Vec<OffdiagSample>,
    pub fit: LinearFit,
    pub dominated: bool,
    /// `|⟨f⟩| ‖1_F‖`, the `t → ∞` limit of `r₁`.
    pub r1_limit: f64,
    pub r_squared_min: f64,
    pub holds: bool,
}

/// Resolvent decay from `E` to `F` for the normalized indicator of `E`.
///
/// Solves `(B + tD) u = B f` directly, without splitting off the mean, so
/// that exponentially small values on `F` keep their relative accuracy.
pub fn offdiag_experiment(
    grid: &Grid,
    forms: &AssembledForms,
    e: &[bool],
    f_set: &[bool],
    t_list: &[f64],
    r_squared_min: f64,
) -> Result<OffdiagResult> {
    let n = forms.len();
    if e.len() != n || f_set.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: if e.len() != n { e.len() } else { f_set.len() },
        });
    }
    if e.iter().zip(f_set).any(|(a, b)| *a && *b) {
        return Err(Error::Precondition("E and F must be disjoint".into()));
    }
    if !e.iter().any(|x| *x) || !f_set.iter().any(|x| *x) {
        return Err(Error::Precondition("E and F must be nonempty".into()));
    }
    if t_list.len() < 2 || t_list.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::Domain("need at least two positive t values".into()));
    }
    let group = grid.instance();
    let mut distance = f64::INFINITY;
    for i in (0..n).filter(|&i| e[i]) {
        for j in (0..n).filter(|&j| f_set[j]) {
            distance = distance.min(group.distance_coords(grid.node(i), grid.node(j))?);
        }
    }
    let indicator: Vec<f64> = e.iter().map(|&x| if x { 1.0 } else { 0.0 }).collect();
    let norm = forms.norm(&indicator);
    let f: Vec<f64> = indicator.iter().map(|x| x / norm).collect();
    let rhs: Vec<f64> = f.iter().zip(&forms.mass).map(|(a, b)| a * b).collect();
    let restricted = |v: &[f64]| -> f64 {
        crate::sum::sum((0..n).filter(|&k| f_set[k]).map(|k| v[k] * v[k] * forms.mass[k])).sqrt()
    };
    let one_f: Vec<f64> = f_set.iter().map(|&x| if x { 1.0 } else { 0.0 }).collect();
    let r1_limit = forms.mean(&f).abs() * restricted(&one_f);

    let mut samples = Vec::with_capacity(t_list.len());
    for &t in t_list {
        let chol = BandedCholesky::factor(&forms.dirichlet, t, &forms.mass)?;
        let mut u = chol.solve(&rhs);
        for _ in 0..2 {
            let du = forms.dirichlet.mul_vec(&u);
            let r: Vec<f64> = (0..n).map(|k| rhs[k] - (forms.mass[k] * u[k] + t * du[k])).collect();
            let c = chol.solve(&r);
            for (a, b) in u.iter_mut().zip(&c) {
                *a += b;
            }
        }
        let split: Vec<f64> = f.iter().zip(&u).map(|(a, b)| a - b).collect();
        samples.push(OffdiagSample {
            t,
            r1: restricted(&u),
            r2: restricted(&split),
            bound: 0.0,
        });
    }
    let x: Vec<f64> = samples.iter().map(|s| distance / s.t.sqrt()).collect();
    let y: Vec<f64> = samples.iter().map(|s| (s.r1 + s.r2).ln()).collect();
    let fit = linear_fit(&x, &y)?;
    let mut dominated = true;
    for (s, xk) in samples.iter_mut().zip(&x) {
        s.bound = 8.0 * (fit.slope * xk + fit.intercept).exp();
        dominated &= s.r1 + s.r2 <= s.bound;
    }
    let holds = fit.slope < 0.0 && fit.r_squared >= r_squared_min && dominated;
    Ok(OffdiagResult {
        distance,
        samples,
        fit,
        dominated,
        r1_limit,
        r_squared_min,
        holds,
    })
}

/// One `(α, lhs, rhs, ratio)` row of a spectral report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticRow {
    pub alpha: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct SpectralReport {
    pub lambda1: Option<f64>,
    pub poincare_constant: Option<f64>,
    pub eigenvalues: Vec<f64>,
    pub lambda_weighted: Option<f64>,
    pub offdiag_fit: Option<LinearFit>,
    pub quadratic_values: Vec<QuadraticRow>,
    pub config_hash: String,
}
