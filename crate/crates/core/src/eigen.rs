//! Constrained symmetric-definite eigenproblems `D u = λ C u`, `bᵀu = 0`.
//!
//! Shift-invert subspace iteration with Rayleigh–Ritz. The linear constraint
//! is imposed on every shifted solve through the Schur complement of the
//! bordered system
//!
//! ```text
//! [ D + σC   b ] [x]   [C y]
//! [ bᵀ       0 ] [ν] = [ 0 ]
//! ```
//!
//! so the iteration acts on the compressed pencil and never sees the
//! constant mode of `D`.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::{conjugate_gradient, BandedCholesky, LinearSolver};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenOptions {
    /// Number of wanted eigenpairs (smallest first).
    pub count: usize,
    /// Extra block vectors that speed up convergence of the wanted ones.
    pub guard: usize,
    /// Relative residual `‖P(Du − θCu)‖ / (θ‖Cu‖)` declared converged.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub seed: u64,
    pub solver: LinearSolver,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            count: 1,
            guard: 6,
            tolerance: 1e-8,
            max_iterations: 400,
            seed: 0x00e1_6e75,
            solver: LinearSolver::Auto,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenResult {
    /// Ascending eigenvalues.
    pub values: Vec<f64>,
    /// Eigenvectors, normalized to `uᵀCu = 1`.
    pub vectors: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub shift: f64,
}

/// Number of times the shift may move down toward the smallest Ritz value.
const MAX_RESHIFTS: usize = 8;

enum ShiftedSolver {
    Direct(BandedCholesky),
    Iterative { diag: Vec<f64> },
}

struct Shifted<'a> {
    d: &'a CsrMatrix,
    c: &'a [f64],
    sigma: f64,
    solver: ShiftedSolver,
    /// `K⁻¹ b` and `bᵀ K⁻¹ b`.
    kb: Vec<f64>,
    bkb: f64,
    b: &'a [f64],
}

impl<'a> Shifted<'a> {
    fn new(d: &'a CsrMatrix, c: &'a [f64], b: &'a [f64], sigma: f64, solver: LinearSolver) -> Result<Self> {
        let n = c.len();
        let shifted_diag: Vec<f64> = c.iter().map(|x| sigma * x).collect();
        let solver = match solver.resolve(n, d.bandwidth()) {
            LinearSolver::Direct => ShiftedSolver::Direct(BandedCholesky::factor(d, 1.0, &shifted_diag)?),
            _ => {
                let dd = d.diagonal();
                ShiftedSolver::Iterative {
                    diag: dd.iter().zip(&shifted_diag).map(|(a, s)| a + s).collect(),
                }
            }
        };
        let mut me = Shifted {
            d,
            c,
            sigma,
            solver,
            kb: Vec::new(),
            bkb: 0.0,
            b,
        };
        me.kb = me.solve(b)?;
        me.bkb = crate::sum::dot(b, &me.kb);
        Ok(me)
    }

    fn apply_k(&self, x: &[f64], y: &mut [f64]) {
        self.d.mul_vec_into(x, y);
        for k in 0..y.len() {
            y[k] += self.sigma * self.c[k] * x[k];
        }
    }

    fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        match &self.solver {
            ShiftedSolver::Direct(chol) => {
                let mut x = chol.solve(rhs);
                // One step of refinement keeps small components accurate.
                let mut kx = vec![0.0; x.len()];
                self.apply_k(&x, &mut kx);
                let r: Vec<f64> = rhs.iter().zip(&kx).map(|(a, b)| a - b).collect();
                let dx = chol.solve(&r);
                for (a, b) in x.iter_mut().zip(&dx) {
                    *a += b;
                }
                Ok(x)
            }
            ShiftedSolver::Iterative { diag } => {
                let out = conjugate_gradient(
                    |x, y| self.apply_k(x, y),
                    diag,
                    rhs,
                    1e-12,
                    20 * rhs.len() + 1000,
                    |_| {},
                )?;
                Ok(out.solution)
            }
        }
    }

    /// `x = K⁻¹(C y − b ν)` with `ν` chosen so that `bᵀx = 0`.
    fn apply(&self, y: &[f64]) -> Result<Vec<f64>> {
        let cy: Vec<f64> = y.iter().zip(self.c).map(|(a, b)| a * b).collect();
        let mut x = self.solve(&cy)?;
        let nu = crate::sum::dot(self.b, &x) / self.bkb;
        for (a, z) in x.iter_mut().zip(&self.kb) {
            *a -= nu * z;
        }
        Ok(x)
    }
}

/// `C`-orthogonal projection onto `{bᵀu = 0}`.
fn project(u: &mut [f64], b: &[f64], cinv_b: &[f64], b_cinv_b: f64) {
    let s = crate::sum::dot(b, u) / b_cinv_b;
    for (a, q) in u.iter_mut().zip(cinv_b) {
        *a -= s * q;
    }
}

fn c_dot(x: &[f64], y: &[f64], c: &[f64]) -> f64 {
    crate::sum::sum(x.iter().zip(y).zip(c).map(|((a, b), w)| a * b * w))
}

/// Modified Gram–Schmidt (twice) in the `C` inner product. Columns that
/// collapse are replaced by fresh random vectors.
fn c_orthonormalize(block: &mut [Vec<f64>], c: &[f64], refill: &mut dyn FnMut() -> Vec<f64>) {
    for j in 0..block.len() {
        for attempt in 0..4 {
            let before = c_dot(&block[j], &block[j], c).sqrt();
            for _ in 0..2 {
                for i in 0..j {
                    let r = c_dot(&block[i], &block[j], c);
                    let (head, tail) = block.split_at_mut(j);
                    for (a, q) in tail[0].iter_mut().zip(&head[i]) {
                        *a -= r * q;
                    }
                }
            }
            let norm = c_dot(&block[j], &block[j], c).sqrt();
            if norm > 1e-10 * before && norm > 0.0 {
                for a in block[j].iter_mut() {
                    *a /= norm;
                }
                break;
            }
            if attempt == 3 {
                panic!("could not complete an orthonormal block");
            }
            block[j] = refill();
        }
    }
}

/// Smallest `opts.count` eigenpairs of `D u = λ C u` on `{bᵀu = 0}`, for
/// symmetric positive semidefinite `D` and positive diagonal `C`.
pub fn constrained_smallest(d: &CsrMatrix, c: &[f64], b: &[f64], opts: &EigenOptions) -> Result<EigenResult> {
    let n = c.len();
    if d.nrows() != n || b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: if d.nrows() != n { d.nrows() } else { b.len() },
        });
    }
    if c.iter().any(|x| !(*x > 0.0)) {
        return Err(Error::Precondition("mass diagonal must be strictly positive".into()));
    }
    if opts.count == 0 || opts.count + 1 >= n {
        return Err(Error::Domain(alloc::format!(
            "cannot compute {} constrained eigenpairs on {n} nodes",
            opts.count
        )));
    }
    let p = (opts.count + opts.guard).min(n - 1);
    let cinv_b: Vec<f64> = b.iter().zip(c).map(|(x, w)| x / w).collect();
    let b_cinv_b = crate::sum::dot(b, &cinv_b);

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut random_vector = || -> Vec<f64> {
        let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        project(&mut v, b, &cinv_b, b_cinv_b);
        v
    };
    let mut block: Vec<Vec<f64>> = (0..p).map(|_| random_vector()).collect();

    // Gershgorin bound on the spectrum of C⁻¹D gives a safe first shift.
    let upper = (0..n)
        .map(|k| d.row(k).map(|(_, v)| v.abs()).sum::<f64>() / c[k])
        .fold(0.0, f64::max);
    let mut sigma = (1e-3 * upper).max(1e-12);
    let mut op = Shifted::new(d, c, b, sigma, opts.solver)?;
    let mut history: Vec<Vec<f64>> = Vec::new();
    let mut reshifts = 0;

    for it in 1..=opts.max_iterations {
        let mut next = Vec::with_capacity(p);
        for y in &block {
            let mut x = op.apply(y)?;
            project(&mut x, b, &cinv_b, b_cinv_b);
            next.push(x);
        }
        c_orthonormalize(&mut next, c, &mut random_vector);
        // Rayleigh–Ritz on span(next); the block is C-orthonormal.
        let dx: Vec<Vec<f64>> = next.iter().map(|x| d.mul_vec(x)).collect();
        let mut a = DMatrix::<f64>::zeros(p, p);
        for i in 0..p {
            for j in i..p {
                let v = 0.5 * (crate::sum::dot(&next[i], &dx[j]) + crate::sum::dot(&next[j], &dx[i]));
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
        }
        let eig = SymmetricEigen::new(a);
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let theta: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let mut ritz = Vec::with_capacity(p);
        let mut dritz = Vec::with_capacity(p);
        for &col in &order {
            let mut u = vec![0.0; n];
            let mut du = vec![0.0; n];
            for i in 0..p {
                let w = eig.eigenvectors[(i, col)];
                for k in 0..n {
                    u[k] += w * next[i][k];
                    du[k] += w * dx[i][k];
                }
            }
            ritz.push(u);
            dritz.push(du);
        }
        let residuals: Vec<f64> = (0..opts.count)
            .map(|j| {
                let mut r: Vec<f64> = (0..n).map(|k| dritz[j][k] - theta[j] * c[k] * ritz[j][k]).collect();
                // Remove the multiplier direction b (Euclidean projection).
                let bb = crate::sum::dot(b, b);
                let s = crate::sum::dot(b, &r) / bb;
                for (x, bk) in r.iter_mut().zip(b) {
                    *x -= s * bk;
                }
                let rn = crate::sum::dot(&r, &r).sqrt();
                let cu: f64 = ritz[j]
                    .iter()
                    .zip(c)
                    .map(|(u, w)| (u * w) * (u * w))
                    .sum::<f64>()
                    .sqrt();
                rn / (theta[j].abs() * cu)
            })
            .collect();
        history.push(theta[..opts.count].to_vec());
        block = ritz;
        if residuals.iter().all(|r| *r <= opts.tolerance) {
            return Ok(EigenResult {
                values: theta[..opts.count].to_vec(),
                vectors: block.into_iter().take(opts.count).collect(),
                residuals,
                iterations: it,
                shift: sigma,
            });
        }
        // Move the shift toward the bottom of the spectrum while the first
        // shift is far above it.
        if reshifts < MAX_RESHIFTS && it >= 3 && theta[0] > 0.0 && 0.2 * theta[0] < 0.5 * sigma {
            sigma = 0.2 * theta[0];
            op = Shifted::new(d, c, b, sigma, opts.solver)?;
            reshifts += 1;
        }
    }
    Err(Error::EigenStagnation {
        iterations: opts.max_iterations,
        ritz_history: history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Path-graph Laplacian with unit masses: eigenvalues 2 − 2cos(πk/n).
    fn path(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n - 1 {
            t.push((i, i, 1.0));
            t.push((i + 1, i + 1, 1.0));
            t.push((i, i + 1, -1.0));
            t.push((i + 1, i, -1.0));
        }
        CsrMatrix::from_triplets(n, n, t)
    }

    #[test]
    fn path_graph_spectrum() {
        let n = 60;
        let d = path(n);
        let c = vec![1.0; n];
        let opts = EigenOptions {
            count: 3,
            ..EigenOptions::default()
        };
        let res = constrained_smallest(&d, &c, &c, &opts).unwrap();
        for (k, v) in res.values.iter().enumerate() {
            let exact = 2.0 - 2.0 * (core::f64::consts::PI * (k + 1) as f64 / n as f64).cos();
            assert!((v - exact).abs() < 1e-9 * exact, "{k}: {v} vs {exact}");
        }
        for u in &res.vectors {
            assert!(u.iter().sum::<f64>().abs() < 1e-10);
        }
    }

    #[test]
    fn agrees_with_dense_compressed_pencil() {
        let n = 40;
        let d = path(n);
        let c: Vec<f64> = (0..n).map(|k| 1.0 + 0.05 * k as f64).collect();
        let b: Vec<f64> = (0..n).map(|k| 1.0 + (k as f64 * 0.3).sin().abs()).collect();
        let opts = EigenOptions {
            count: 2,
            ..EigenOptions::default()
        };
        let res = constrained_smallest(&d, &c, &b, &opts).unwrap();
        // Dense oracle: basis of b⊥, then the reduced symmetric problem.
        let bvec = nalgebra::DVector::from_vec(b.clone());
        let q = crate::spectral::orthonormal_complement(&bvec);
        let dd = d.to_dense();
        let cd = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(c.clone()));
        let a = q.transpose() * &dd * &q;
        let m = q.transpose() * &cd * &q;
        let l = m.cholesky().unwrap();
        let linv = l.l().try_inverse().unwrap();
        let red = &linv * a * linv.transpose();
        let mut ev: Vec<f64> = SymmetricEigen::new(red).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        for k in 0..2 {
            assert!(
                (res.values[k] - ev[k]).abs() < 1e-9 * ev[k],
                "{} vs {}",
                res.values[k],
                ev[k]
            );
        }
    }
}
