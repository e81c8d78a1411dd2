//! Truncated tensor grids and the assembled form triple `(D, B, B_μ)`.
//!
//! The frame operators are forward differences along the exponential flows,
//! `(G_i f)(p) = (f(p · exp(h_i X_i)) − f(p)) / h_i`, with the weight of each
//! difference taken at the flow midpoint. This is the staggered analogue of a
//! centered scheme: `D = Σ G_iᵀ diag(M_half · w) G_i` is symmetric, positive
//! semidefinite and has only constants in its kernel, whereas centered
//! differences leave a checkerboard mode in the kernel. Off-lattice flow
//! targets (the `t` coordinate on `H¹`) are interpolated by cubic Lagrange
//! stencils along `t`.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{GroupInstance, GroupKind};
use crate::quadrature::composite_gauss_legendre;
use crate::solver::{conjugate_gradient, BandedCholesky, LinearSolver};
use crate::sparse::CsrMatrix;
use crate::sum::CompensatedSum;
use crate::weight::WeightSpec;

/// Largest admissible relative weight mass outside the grid box.
pub const TAIL_THRESHOLD: f64 = 1e-8;
/// Node ceiling for the sparse path.
pub const MAX_NODES: usize = 250_000;
/// Smallest admissible per-axis resolution.
pub const MIN_RESOLUTION: usize = 8;
/// Relative residual required of resolvent solves.
pub const RESOLVENT_TOLERANCE: f64 = 1e-10;

/// What to do when the weight tail outside the box exceeds [`TAIL_THRESHOLD`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TailPolicy {
    /// Refuse to build the grid.
    #[default]
    Enforce,
    /// Build anyway and record the estimate. For non-confining weights on a
    /// box, where the box itself is the domain.
    Record,
}

/// Box and resolution of a tensor grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub resolution: Vec<usize>,
    pub tail_policy: TailPolicy,
    pub max_nodes: usize,
}

impl GridSpec {
    /// `[−radius, radius]^dim` with `resolution` nodes per axis.
    pub fn symmetric(dim: usize, resolution: usize, radius: f64) -> Self {
        GridSpec {
            lower: vec![-radius; dim],
            upper: vec![radius; dim],
            resolution: vec![resolution; dim],
            tail_policy: TailPolicy::Enforce,
            max_nodes: MAX_NODES,
        }
    }
}

/// Tensor lattice on a coordinate box. The last coordinate varies fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    instance: GroupInstance,
    lower: Vec<f64>,
    upper: Vec<f64>,
    shape: Vec<usize>,
    spacing: Vec<f64>,
    strides: Vec<usize>,
    coords: Vec<f64>,
    node_measure: f64,
    tail_estimate: f64,
}

impl Grid {
    pub fn instance(&self) -> &GroupInstance {
        &self.instance
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    /// Number of nodes `N`.
    pub fn len(&self) -> usize {
        self.coords.len() / self.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn max_spacing(&self) -> f64 {
        self.spacing.iter().cloned().fold(0.0, f64::max)
    }

    /// Haar weight of every node, the product of the spacings.
    pub fn node_measure(&self) -> f64 {
        self.node_measure
    }

    /// Relative mass of `e^{-v}` outside the box, as estimated at build time.
    pub fn tail_estimate(&self) -> f64 {
        self.tail_estimate
    }

    /// Flat coordinates, `dim` per node.
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn node(&self, k: usize) -> &[f64] {
        let d = self.dim();
        &self.coords[k * d..(k + 1) * d]
    }

    pub fn nodes(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.coords.chunks(self.dim())
    }

    pub fn multi_index(&self, mut k: usize) -> Vec<usize> {
        let mut m = vec![0; self.dim()];
        for j in (0..self.dim()).rev() {
            m[j] = k % self.shape[j];
            k /= self.shape[j];
        }
        m
    }

    pub fn index(&self, m: &[usize]) -> usize {
        m.iter().zip(&self.strides).map(|(a, s)| a * s).sum()
    }

    /// Node values of a function of the coordinates.
    pub fn sample<F: FnMut(&[f64]) -> f64>(&self, f: F) -> Vec<f64> {
        self.nodes().map(f).collect()
    }

    /// CC distance from the identity for every node.
    pub fn cc_norms(&self) -> Result<Vec<f64>> {
        self.nodes().map(|p| self.instance.norm_coords(p)).collect()
    }

    /// Whether the node lies on the boundary of the box.
    pub fn is_boundary(&self, k: usize) -> bool {
        self.multi_index(k)
            .iter()
            .zip(&self.shape)
            .any(|(&m, &n)| m == 0 || m + 1 == n)
    }
}

/// Builds `[−radius, radius]^dim` with `resolution` nodes per axis, refusing
/// when the weight tail outside the box exceeds [`TAIL_THRESHOLD`].
pub fn build_grid(
    instance: &GroupInstance,
    weight: &WeightSpec,
    resolution: usize,
    domain_radius: f64,
) -> Result<Grid> {
    build_grid_with(
        instance,
        weight,
        &GridSpec::symmetric(instance.dim(), resolution, domain_radius),
    )
}

pub fn build_grid_with(instance: &GroupInstance, weight: &WeightSpec, spec: &GridSpec) -> Result<Grid> {
    let dim = instance.dim();
    if weight.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: weight.dim(),
        });
    }
    for len in [spec.lower.len(), spec.upper.len(), spec.resolution.len()] {
        if len != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: len,
            });
        }
    }
    for j in 0..dim {
        if !(spec.lower[j] < spec.upper[j]) || !spec.lower[j].is_finite() || !spec.upper[j].is_finite() {
            return Err(Error::Domain(alloc::format!(
                "axis {j}: bounds [{}, {}] are not a finite nonempty interval",
                spec.lower[j],
                spec.upper[j]
            )));
        }
        if spec.resolution[j] < MIN_RESOLUTION {
            return Err(Error::Domain(alloc::format!(
                "axis {j}: resolution {} is below the minimum of {MIN_RESOLUTION}",
                spec.resolution[j]
            )));
        }
    }
    let count = spec.resolution.iter().try_fold(1usize, |acc, &n| acc.checked_mul(n));
    let count = count.unwrap_or(usize::MAX);
    if count > spec.max_nodes {
        return Err(Error::Ceiling {
            what: "grid",
            size: count,
            ceiling: spec.max_nodes,
        });
    }

    let tail = relative_tail_mass(weight, &spec.lower, &spec.upper);
    if spec.tail_policy == TailPolicy::Enforce && !(tail < TAIL_THRESHOLD) {
        let radius = spec
            .lower
            .iter()
            .chain(&spec.upper)
            .map(|b| b.abs())
            .fold(0.0, f64::max);
        return Err(Error::TailCriterion {
            tail,
            threshold: TAIL_THRESHOLD,
            radius,
            suggested_radius: suggest_radius(weight, radius),
        });
    }

    let shape = spec.resolution.clone();
    let spacing: Vec<f64> = (0..dim)
        .map(|j| (spec.upper[j] - spec.lower[j]) / (shape[j] - 1) as f64)
        .collect();
    let mut strides = vec![1usize; dim];
    for j in (0..dim.saturating_sub(1)).rev() {
        strides[j] = strides[j + 1] * shape[j + 1];
    }
    let mut coords = Vec::with_capacity(count * dim);
    let mut m = vec![0usize; dim];
    for _ in 0..count {
        for j in 0..dim {
            coords.push(if m[j] + 1 == shape[j] {
                spec.upper[j]
            } else {
                spec.lower[j] + m[j] as f64 * spacing[j]
            });
        }
        for j in (0..dim).rev() {
            m[j] += 1;
            if m[j] < shape[j] {
                break;
            }
            m[j] = 0;
        }
    }
    Ok(Grid {
        instance: instance.clone(),
        lower: spec.lower.clone(),
        upper: spec.upper.clone(),
        shape,
        node_measure: spacing.iter().product(),
        spacing,
        strides,
        coords,
        tail_estimate: tail,
    })
}

fn tail_panels(dim: usize) -> usize {
    match dim {
        1 => 16,
        2 => 6,
        _ => 3,
    }
}

/// Relative mass of `e^{-v}` outside `[lower, upper]`, by tensor
/// Gauss–Legendre quadrature on an enclosing box `[−L, L]^dim` that is doubled
/// until `e^{-(v − v_min)}` is below `1e−30` on its faces. Returns `+∞` when
/// no such box is found, i.e. for weights without detectable decay.
pub fn relative_tail_mass(weight: &WeightSpec, lower: &[f64], upper: &[f64]) -> f64 {
    let dim = lower.len();
    let panels = tail_panels(dim);
    let extent = lower.iter().chain(upper).map(|b| b.abs()).fold(0.0, f64::max);
    let mut far = 2.0 * extent.max(1.0);
    for _ in 0..6 {
        // Per axis: (node, weight, inside the box).
        let axes: Vec<Vec<(f64, f64, bool)>> = (0..dim)
            .map(|j| {
                let mut a = Vec::new();
                for &(x, w) in &composite_gauss_legendre(-far, lower[j], panels) {
                    a.push((x, w, false));
                }
                for &(x, w) in &composite_gauss_legendre(lower[j], upper[j], panels) {
                    a.push((x, w, true));
                }
                for &(x, w) in &composite_gauss_legendre(upper[j], far, panels) {
                    a.push((x, w, false));
                }
                a
            })
            .collect();
        let mut values = Vec::new();
        let mut p = vec![0.0; dim];
        let mut vmin = f64::INFINITY;
        for_each_tensor(&axes, |idx| {
            let mut w = 1.0;
            let mut inside = true;
            for j in 0..dim {
                let (x, wj, ins) = axes[j][idx[j]];
                p[j] = x;
                w *= wj;
                inside &= ins;
            }
            let v = weight.v(&p);
            vmin = vmin.min(v);
            values.push((v, w, inside));
        });
        if !vmin.is_finite() {
            return f64::INFINITY;
        }
        // Faces of the far box.
        let mut face_max = 0.0f64;
        for j in 0..dim {
            for side in [-far, far] {
                let mut others = axes.clone();
                others[j] = vec![(side, 1.0, false)];
                for_each_tensor(&others, |idx| {
                    for (jj, ax) in others.iter().enumerate() {
                        p[jj] = ax[idx[jj]].0;
                    }
                    face_max = face_max.max((-(weight.v(&p) - vmin)).exp());
                });
            }
        }
        if face_max < 1e-30 {
            let mut inner = CompensatedSum::new();
            let mut outer = CompensatedSum::new();
            for (v, w, inside) in values {
                let m = w * (-(v - vmin)).exp();
                if inside {
                    inner.add(m);
                } else {
                    outer.add(m);
                }
            }
            let (i, o) = (inner.value(), outer.value());
            return o / (i + o);
        }
        far *= 2.0;
    }
    f64::INFINITY
}

fn for_each_tensor<T, F: FnMut(&[usize])>(axes: &[Vec<T>], mut f: F) {
    let dim = axes.len();
    if axes.iter().any(|a| a.is_empty()) {
        return;
    }
    let mut idx = vec![0usize; dim];
    loop {
        f(&idx);
        let mut j = dim;
        loop {
            if j == 0 {
                return;
            }
            j -= 1;
            idx[j] += 1;
            if idx[j] < axes[j].len() {
                break;
            }
            idx[j] = 0;
        }
    }
}

fn suggest_radius(weight: &WeightSpec, radius: f64) -> f64 {
    let dim = weight.dim();
    let mut r = radius.max(1.0);
    for _ in 0..8 {
        r *= 1.5;
        if relative_tail_mass(weight, &vec![-r; dim], &vec![r; dim]) < TAIL_THRESHOLD {
            return r;
        }
    }
    f64::INFINITY
}

/// The assembled form triple and the pieces it is built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssembledForms {
    /// Dirichlet form `D`, symmetric positive semidefinite, `D𝟙 = 0`.
    pub dirichlet: CsrMatrix,
    /// Diagonal of the mass form `B`: `M(x_k) · w`.
    pub mass: Vec<f64>,
    /// Diagonal of the weighted mass form `B_μ`: `μ(x_k) M(x_k) · w`.
    pub weighted_mass: Vec<f64>,
    /// Forward flow differences `G_i`.
    pub frame_ops: Vec<CsrMatrix>,
    /// `M · w` at the flow midpoints, one vector per frame field.
    pub half_weights: Vec<Vec<f64>>,
    /// `M` at the nodes.
    pub weight_diag: Vec<f64>,
    /// `μ = 1 + Σ |X_i v|²` at the nodes.
    pub mu: Vec<f64>,
    /// Nodes at least two lattice steps from the boundary whose stencils
    /// needed no clamping; consistency with `L_M` is expected there.
    pub interior: Vec<bool>,
}

impl AssembledForms {
    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    /// `𝟙ᵀ B 𝟙`, the discrete total mass.
    pub fn total_mass(&self) -> f64 {
        crate::sum::sum(self.mass.iter().copied())
    }

    /// `⟨f, g⟩_B`.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        crate::sum::sum(f.iter().zip(g).zip(&self.mass).map(|((a, b), m)| a * b * m))
    }

    /// `‖f‖_B`.
    pub fn norm(&self, f: &[f64]) -> f64 {
        self.inner(f, f).sqrt()
    }

    /// `𝟙ᵀ B f / 𝟙ᵀ B 𝟙`.
    pub fn mean(&self, f: &[f64]) -> f64 {
        crate::sum::sum(f.iter().zip(&self.mass).map(|(a, m)| a * m)) / self.total_mass()
    }

    /// `f − mean(f)`.
    pub fn project_mean_zero(&self, f: &[f64]) -> Vec<f64> {
        let m = self.mean(f);
        f.iter().map(|x| x - m).collect()
    }

    /// `fᵀ D f`.
    pub fn energy(&self, f: &[f64]) -> f64 {
        self.dirichlet.bilinear(f, f)
    }

    /// Gershgorin upper bound on the spectrum of `B⁻¹D`.
    pub fn spectral_upper_bound(&self) -> f64 {
        (0..self.len())
            .map(|k| self.dirichlet.row(k).map(|(_, v)| v.abs()).sum::<f64>() / self.mass[k])
            .fold(0.0, f64::max)
    }
}

/// Cubic Lagrange weights at fractional position `s` along an axis of `n`
/// nodes, as `(first node, weights)`. Exact nodes and out-of-range targets
/// collapse to one node.
fn axis_stencil(s: f64, n: usize) -> (usize, [f64; 4], usize) {
    if s <= 0.0 {
        return (0, [1.0, 0.0, 0.0, 0.0], 1);
    }
    let last = (n - 1) as f64;
    if s >= last {
        return (n - 1, [1.0, 0.0, 0.0, 0.0], 1);
    }
    let r = s.round();
    if (s - r).abs() < 1e-12 {
        return (r as usize, [1.0, 0.0, 0.0, 0.0], 1);
    }
    let base = (s.floor() as isize - 1).clamp(0, n as isize - 4) as usize;
    let mut w = [0.0; 4];
    for (a, wa) in w.iter_mut().enumerate() {
        let xa = (base + a) as f64;
        let mut l = 1.0;
        for b in 0..4 {
            if b != a {
                let xb = (base + b) as f64;
                l *= (s - xb) / (xa - xb);
            }
        }
        *wa = l;
    }
    (base, w, 4)
}

/// Axis along which frame field `i` advances by one lattice step.
fn principal_axis(kind: GroupKind, i: usize) -> usize {
    match kind {
        GroupKind::Euclidean { .. } => i,
        GroupKind::Heisenberg1 => i,
    }
}

/// Assembles `G_i`, `D`, `B` and `B_μ` on the grid.
pub fn assemble(grid: &Grid, weight: &WeightSpec) -> Result<AssembledForms> {
    let group = grid.instance();
    if weight.dim() != grid.dim() {
        return Err(Error::DimensionMismatch {
            expected: grid.dim(),
            got: weight.dim(),
        });
    }
    let n = grid.len();
    let dim = grid.dim();
    let w = grid.node_measure();
    let kind = group.kind();
    let weight_diag: Vec<f64> = grid.nodes().map(|p| weight.weight(p)).collect();
    let mu: Vec<f64> = grid.nodes().map(|p| weight.mu(group, p)).collect();
    let mass: Vec<f64> = weight_diag.iter().map(|m| m * w).collect();
    let weighted_mass: Vec<f64> = mass.iter().zip(&mu).map(|(m, u)| m * u).collect();
    let mut interior = vec![true; n];

    let mut frame_ops = Vec::with_capacity(group.frame_size());
    let mut half_weights = Vec::with_capacity(group.frame_size());
    let mut d_triplets = Vec::new();
    let mut q = vec![0.0; dim];
    for i in 0..group.frame_size() {
        let axis = principal_axis(kind, i);
        let h = grid.spacing()[axis];
        let mut g_triplets = Vec::with_capacity(n * 5);
        let mut half = vec![0.0; n];
        for k in 0..n {
            let m = grid.multi_index(k);
            let p = grid.node(k);
            q.copy_from_slice(p);
            group.flow_in_place(i, &mut q, 0.5 * h);
            half[k] = weight.weight(&q) * w;
            if m[axis] + 1 == grid.shape()[axis] {
                interior[k] = false;
                continue;
            }
            if m[axis] == 0 {
                interior[k] = false;
            }
            q.copy_from_slice(p);
            group.flow_in_place(i, &mut q, h);
            // Target node: lattice step along the principal axis, then
            // interpolation in the coordinates the flow moved off-lattice.
            let mut target = m.clone();
            target[axis] += 1;
            let mut row: Vec<(usize, f64)> = Vec::with_capacity(5);
            match kind {
                GroupKind::Euclidean { .. } => row.push((grid.index(&target), 1.0)),
                GroupKind::Heisenberg1 => {
                    let nt = grid.shape()[2];
                    let s = (q[2] - grid.lower()[2]) / grid.spacing()[2];
                    if s < 0.0 || s > (nt - 1) as f64 {
                        interior[k] = false;
                    }
                    let (base, lw, len) = axis_stencil(s, nt);
                    if len == 4 && (base + 1 > s.floor() as usize || base + 2 < s.floor() as usize) {
                        interior[k] = false;
                    }
                    for (a, &c) in lw.iter().enumerate().take(len) {
                        target[2] = base + a;
                        row.push((grid.index(&target), c));
                    }
                }
            }
            row.push((k, -1.0));
            let scale = 1.0 / h;
            for &(c, v) in &row {
                g_triplets.push((k, c, v * scale));
            }
            let ck = half[k];
            for &(a, va) in &row {
                for &(b, vb) in &row {
                    d_triplets.push((a, b, ck * va * vb * scale * scale));
                }
            }
        }
        frame_ops.push(CsrMatrix::from_triplets(n, n, g_triplets));
        half_weights.push(half);
    }
    for (k, flag) in interior.iter_mut().enumerate() {
        let m = grid.multi_index(k);
        if m.iter().zip(grid.shape()).any(|(&c, &len)| c < 2 || c + 3 > len) {
            *flag = false;
        }
    }
    Ok(AssembledForms {
        dirichlet: CsrMatrix::from_triplets(n, n, d_triplets),
        mass,
        weighted_mass,
        frame_ops,
        half_weights,
        weight_diag,
        mu,
        interior,
    })
}

/// `B⁻¹ D f`, the discrete `L_M f`.
pub fn apply_lm(forms: &AssembledForms, f: &[f64]) -> Vec<f64> {
    let mut out = forms.dirichlet.mul_vec(f);
    for (o, b) in out.iter_mut().zip(&forms.mass) {
        *o /= b;
    }
    out
}

/// `(I + tL)⁻¹` for one `t`, factored or preconditioned once and reusable.
pub struct Resolvent<'a> {
    forms: &'a AssembledForms,
    t: f64,
    kind: ResolventKind,
}

enum ResolventKind {
    Direct(BandedCholesky),
    Iterative { sqrt_mass: Vec<f64>, precond: Vec<f64> },
}

impl<'a> Resolvent<'a> {
    pub fn new(forms: &'a AssembledForms, t: f64, solver: LinearSolver) -> Result<Self> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::Domain(alloc::format!(
                "resolvent parameter must be positive, got {t}"
            )));
        }
        let n = forms.len();
        let kind = match solver.resolve(n, forms.dirichlet.bandwidth()) {
            LinearSolver::Direct => ResolventKind::Direct(BandedCholesky::factor(&forms.dirichlet, t, &forms.mass)?),
            _ => {
                let sqrt_mass: Vec<f64> = forms.mass.iter().map(|b| b.sqrt()).collect();
                let diag = forms.dirichlet.diagonal();
                let precond = (0..n).map(|k| 1.0 + t * diag[k] / forms.mass[k]).collect();
                ResolventKind::Iterative { sqrt_mass, precond }
            }
        };
        Ok(Resolvent { forms, t, kind })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn is_direct(&self) -> bool {
        matches!(self.kind, ResolventKind::Direct(_))
    }

    fn residual(&self, u: &[f64], rhs: &[f64]) -> Vec<f64> {
        let du = self.forms.dirichlet.mul_vec(u);
        (0..u.len())
            .map(|k| rhs[k] - (self.forms.mass[k] * u[k] + self.t * du[k]))
            .collect()
    }

    /// `u = (I + tL)⁻¹ f`, i.e. `(B + tD) u = B f`.
    ///
    /// The `B`-mean passes through unchanged; only the mean-zero part is
    /// solved for, so `f ≡ c` returns `u ≡ c` exactly.
    pub fn apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        let forms = self.forms;
        let n = forms.len();
        if f.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: f.len(),
            });
        }
        let mean = forms.mean(f);
        let f0: Vec<f64> = f.iter().map(|x| x - mean).collect();
        let rhs: Vec<f64> = f0.iter().zip(&forms.mass).map(|(a, b)| a * b).collect();
        let rnorm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let bnorm = rnorm(&rhs);
        let mut u0 = match &self.kind {
            ResolventKind::Direct(chol) => {
                let mut u = chol.solve(&rhs);
                let mut history = Vec::new();
                for _ in 0..4 {
                    let r = self.residual(&u, &rhs);
                    let rel = if bnorm > 0.0 { rnorm(&r) / bnorm } else { 0.0 };
                    history.push(rel);
                    if rel <= 1e-14 {
                        break;
                    }
                    let du = chol.solve(&r);
                    for (a, b) in u.iter_mut().zip(&du) {
                        *a += b;
                    }
                }
                let r = self.residual(&u, &rhs);
                let rel = if bnorm > 0.0 { rnorm(&r) / bnorm } else { 0.0 };
                history.push(rel);
                if !(rel <= RESOLVENT_TOLERANCE) {
                    return Err(Error::SolverNonConvergence {
                        iterations: history.len(),
                        residual_history: history,
                    });
                }
                u
            }
            ResolventKind::Iterative { sqrt_mass, precond } => {
                // Symmetric scaling w = B^{1/2} u: (I + t B^{-1/2} D B^{-1/2}) w = B^{1/2} f0.
                let total = forms.total_mass();
                let q0: Vec<f64> = sqrt_mass.iter().map(|s| s / total.sqrt()).collect();
                let project = |v: &mut [f64]| {
                    let c: f64 = v.iter().zip(&q0).map(|(a, b)| a * b).sum();
                    for (a, b) in v.iter_mut().zip(&q0) {
                        *a -= c * b;
                    }
                };
                let t = self.t;
                let d = &forms.dirichlet;
                let apply = |x: &[f64], y: &mut [f64]| {
                    let scaled: Vec<f64> = x.iter().zip(sqrt_mass).map(|(a, s)| a / s).collect();
                    d.mul_vec_into(&scaled, y);
                    for k in 0..y.len() {
                        y[k] = x[k] + t * y[k] / sqrt_mass[k];
                    }
                };
                let b: Vec<f64> = f0.iter().zip(sqrt_mass).map(|(a, s)| a * s).collect();
                let out = conjugate_gradient(apply, precond, &b, 1e-12, 20 * n + 1000, project)?;
                out.solution.iter().zip(sqrt_mass).map(|(a, s)| a / s).collect()
            }
        };
        for x in u0.iter_mut() {
            *x += mean;
        }
        Ok(u0)
    }
}

/// `(I + tL)⁻¹ f` with automatic solver selection.
pub fn solve_resolvent(forms: &AssembledForms, f: &[f64], t: f64) -> Result<Vec<f64>> {
    solve_resolvent_with(forms, f, t, LinearSolver::Auto)
}

pub fn solve_resolvent_with(forms: &AssembledForms, f: &[f64], t: f64, solver: LinearSolver) -> Result<Vec<f64>> {
    Resolvent::new(forms, t, solver)?.apply(f)
}

#[cfg(test)]
mod tests {
    extern crate std;

    use super::*;
    use crate::weight;

    fn ou(n: usize, radius: f64) -> (Grid, AssembledForms) {
        let g = GroupInstance::euclidean(1).unwrap();
        let w = weight::gaussian(&g);
        let grid = build_grid(&g, &w, n, radius).unwrap();
        let forms = assemble(&grid, &w).unwrap();
        (grid, forms)
    }

    #[test]
    fn gaussian_tail_matches_erfc() {
        let g = GroupInstance::euclidean(1).unwrap();
        let w = weight::gaussian(&g);
        let tail = relative_tail_mass(&w, &[-3.0], &[3.0]);
        let exact = libm::erfc(3.0 / 2f64.sqrt());
        assert!((tail - exact).abs() < 1e-6 * exact, "{tail} vs {exact}");
        let grid = build_grid(&g, &w, 401, 8.0).unwrap();
        assert!(grid.tail_estimate() < 1e-14);
        assert_eq!(grid.len(), 401);
    }

    #[test]
    fn small_radius_is_refused_with_a_suggestion() {
        let g = GroupInstance::euclidean(1).unwrap();
        let w = weight::gaussian(&g);
        match build_grid(&g, &w, 101, 1.0) {
            Err(Error::TailCriterion {
                tail, suggested_radius, ..
            }) => {
                assert!((tail - 0.3173).abs() < 1e-3);
                assert!(suggested_radius > 5.0 && suggested_radius.is_finite());
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn flat_weight_needs_record_policy() {
        let g = GroupInstance::euclidean(1).unwrap();
        let w = weight::flat(&g);
        assert!(build_grid(&g, &w, 11, 1.0).is_err());
        let mut spec = GridSpec::symmetric(1, 11, 1.0);
        spec.tail_policy = TailPolicy::Record;
        let grid = build_grid_with(&g, &w, &spec).unwrap();
        assert!(grid.tail_estimate().is_infinite());
    }

    #[test]
    fn lattice_layout() {
        let g = GroupInstance::heisenberg1_with_volume_constant(1.0).unwrap();
        let w = weight::heisenberg_saddle();
        let grid = build_grid(&g, &w, 13, 6.0).unwrap();
        assert_eq!(grid.len(), 2197);
        let k = grid.index(&[3, 5, 7]);
        assert_eq!(grid.multi_index(k), vec![3, 5, 7]);
        assert_eq!(grid.node(k), &[-3.0, -1.0, 1.0]);
        assert_eq!(grid.node(grid.len() - 1), &[6.0, 6.0, 6.0]);
    }

    #[test]
    fn constants_span_the_kernel() {
        let (_, forms) = ou(101, 7.0);
        let d1 = forms.dirichlet.mul_vec(&vec![1.0; forms.len()]);
        assert!(d1.iter().all(|x| x.abs() < 1e-14));
        assert!(forms.dirichlet.asymmetry() == 0.0);
    }

    #[test]
    fn flat_box_is_the_stiffness_matrix() {
        let g = GroupInstance::euclidean(1).unwrap();
        let w = weight::flat(&g);
        let mut spec = GridSpec::symmetric(1, 11, 1.0);
        spec.lower = vec![0.0];
        spec.upper = vec![1.0];
        spec.tail_policy = TailPolicy::Record;
        let grid = build_grid_with(&g, &w, &spec).unwrap();
        let forms = assemble(&grid, &w).unwrap();
        let h = 0.1;
        for k in 0..11 {
            let diag = if k == 0 || k == 10 { 1.0 } else { 2.0 };
            assert!((forms.dirichlet.get(k, k) - diag / h).abs() < 1e-12);
            if k + 1 < 11 {
                assert!((forms.dirichlet.get(k, k + 1) + 1.0 / h).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ou_operator_on_hermite_polynomials() {
        let (grid, forms) = ou(401, 8.0);
        let x = grid.sample(|p| p[0]);
        let h2 = grid.sample(|p| p[0] * p[0] - 1.0);
        let lx = apply_lm(&forms, &x);
        let lh2 = apply_lm(&forms, &h2);
        let h = grid.spacing()[0];
        for k in 0..grid.len() {
            let p = grid.node(k)[0];
            if forms.interior[k] && p.abs() < 6.0 {
                assert!((lx[k] - p).abs() < 2.0 * h * h * (1.0 + p * p), "x at {p}");
                assert!(
                    (lh2[k] - 2.0 * (p * p - 1.0)).abs() < 2.0 * h * h * (1.0 + p.powi(4)),
                    "h2 at {p}"
                );
            }
        }
    }

    #[test]
    fn heisenberg_bracket_of_difference_operators() {
        let g = GroupInstance::heisenberg1_with_volume_constant(1.0).unwrap();
        let w = weight::heisenberg_saddle();
        let grid = build_grid(&g, &w, 13, 6.0).unwrap();
        let forms = assemble(&grid, &w).unwrap();
        let t = grid.sample(|p| p[2]);
        let (g1, g2) = (&forms.frame_ops[0], &forms.frame_ops[1]);
        let b = g1.mul_vec(&g2.mul_vec(&t));
        let a = g2.mul_vec(&g1.mul_vec(&t));
        let mut checked = 0;
        for k in 0..grid.len() {
            let m = grid.multi_index(k);
            if (2..10).contains(&m[0]) && (2..10).contains(&m[1]) && (5..8).contains(&m[2]) {
                assert!((b[k] - a[k] - 1.0).abs() < 1e-10, "{m:?} {} {}", b[k], a[k]);
                checked += 1;
            }
        }
        assert!(checked > 150);
    }

    #[test]
    fn resolvent_fixes_constants_and_solvers_agree() {
        let (grid, forms) = ou(201, 8.0);
        let one = vec![1.0; grid.len()];
        let u = solve_resolvent(&forms, &one, 3.0).unwrap();
        assert!(u.iter().all(|x| (x - 1.0).abs() < 1e-14));
        let f = grid.sample(|p| (p[0]).sin() + 0.3 * p[0]);
        let a = solve_resolvent_with(&forms, &f, 0.7, LinearSolver::Direct).unwrap();
        let b = solve_resolvent_with(&forms, &f, 0.7, LinearSolver::ConjugateGradient).unwrap();
        let diff: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        assert!(forms.norm(&diff) < 1e-9 * forms.norm(&a));
    }

    #[test]
    fn stencil_weights_reproduce_cubics() {
        for &s in &[0.3, 2.5, 6.9, 8.2] {
            let (base, w, len) = axis_stencil(s, 10);
            assert_eq!(len, 4);
            let val: f64 = (0..4).map(|a| w[a] * ((base + a) as f64).powi(3)).sum();
            assert!((val - s.powi(3)).abs() < 1e-10);
        }
        assert_eq!(axis_stencil(-1.0, 10).0, 0);
        assert_eq!(axis_stencil(12.0, 10).0, 9);
    }
}
