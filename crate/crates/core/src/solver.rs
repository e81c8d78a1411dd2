//! Symmetric positive-definite linear solvers.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Solver selection for SPD systems built from the assembled forms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LinearSolver {
    /// Banded Cholesky when the band is small enough, conjugate gradients otherwise.
    #[default]
    Auto,
    Direct,
    ConjugateGradient,
}

/// Band storage ceiling (entries) for the direct path.
pub const DIRECT_STORAGE_CEILING: usize = 20_000_000;
/// Factorization work ceiling (`n · bw²`) for the direct path under `Auto`.
pub const DIRECT_WORK_CEILING: usize = 200_000_000;

impl LinearSolver {
    /// Resolves `Auto` for a system of size `n` and half-bandwidth `bw`.
    pub fn resolve(self, n: usize, bw: usize) -> LinearSolver {
        match self {
            LinearSolver::Auto => {
                let storage = n.saturating_mul(bw + 1);
                let work = n.saturating_mul(bw).saturating_mul(bw);
                if storage <= DIRECT_STORAGE_CEILING && work <= DIRECT_WORK_CEILING {
                    LinearSolver::Direct
                } else {
                    LinearSolver::ConjugateGradient
                }
            }
            other => other,
        }
    }
}

/// Cholesky factor of `diag(d) + s·A` for symmetric banded `A`, stored by
/// lower band: `band[i * (bw + 1) + (i − j)] = L_ij` for `i − bw ≤ j ≤ i`.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    bw: usize,
    band: Vec<f64>,
}

impl BandedCholesky {
    pub fn factor(matrix: &CsrMatrix, scale: f64, diag: &[f64]) -> Result<Self> {
        let n = matrix.nrows();
        let bw = matrix.bandwidth();
        let w = bw + 1;
        if n.saturating_mul(w) > DIRECT_STORAGE_CEILING {
            return Err(Error::Ceiling {
                what: "banded Cholesky storage",
                size: n.saturating_mul(w),
                ceiling: DIRECT_STORAGE_CEILING,
            });
        }
        let mut band = vec![0.0; n * w];
        for (r, c, v) in matrix.triplets() {
            if c <= r {
                band[r * w + (r - c)] += scale * v;
            }
        }
        for (i, d) in diag.iter().enumerate() {
            band[i * w] += d;
        }
        for j in 0..n {
            // L_jj
            let mut acc = band[j * w];
            let kmin = j.saturating_sub(bw);
            for k in kmin..j {
                let l = band[j * w + (j - k)];
                acc -= l * l;
            }
            if !(acc > 0.0) {
                return Err(Error::Precondition(alloc::format!(
                    "matrix is not positive definite (pivot {acc:e} at row {j})"
                )));
            }
            let ljj = acc.sqrt();
            band[j * w] = ljj;
            let imax = (j + bw).min(n - 1);
            for i in (j + 1)..=imax {
                let mut acc = band[i * w + (i - j)];
                let kmin = i.saturating_sub(bw);
                for k in kmin..j {
                    acc -= band[i * w + (i - k)] * band[j * w + (j - k)];
                }
                band[i * w + (i - j)] = acc / ljj;
            }
        }
        Ok(BandedCholesky { n, bw, band })
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let w = self.bw + 1;
        for i in 0..self.n {
            let mut acc = x[i];
            for k in i.saturating_sub(self.bw)..i {
                acc -= self.band[i * w + (i - k)] * x[k];
            }
            x[i] = acc / self.band[i * w];
        }
        for i in (0..self.n).rev() {
            let mut acc = x[i];
            let kmax = (i + self.bw).min(self.n - 1);
            for k in (i + 1)..=kmax {
                acc -= self.band[k * w + (k - i)] * x[k];
            }
            x[i] = acc / self.band[i * w];
        }
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = rhs.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// Outcome of a conjugate-gradient solve.
#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub solution: Vec<f64>,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
}

/// Jacobi-preconditioned conjugate gradients for `K x = b`.
///
/// `project`, when given, is applied to every residual and search direction,
/// which keeps the iteration inside an invariant subspace. Convergence is
/// declared at `‖r‖ ≤ tol · ‖b‖` in the Euclidean norm.
pub fn conjugate_gradient<A, P>(
    apply: A,
    precond_diag: &[f64],
    rhs: &[f64],
    tol: f64,
    max_iter: usize,
    mut project: P,
) -> Result<CgOutcome>
where
    A: Fn(&[f64], &mut [f64]),
    P: FnMut(&mut [f64]),
{
    let n = rhs.len();
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let bnorm = norm(rhs);
    let mut x = vec![0.0; n];
    let mut history = Vec::new();
    if bnorm == 0.0 {
        return Ok(CgOutcome {
            solution: x,
            iterations: 0,
            residual_history: history,
        });
    }
    let mut r = rhs.to_vec();
    project(&mut r);
    let mut z: Vec<f64> = r.iter().zip(precond_diag).map(|(a, d)| a / d).collect();
    project(&mut z);
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut ap = vec![0.0; n];
    for it in 1..=max_iter {
        apply(&p, &mut ap);
        project(&mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if !(pap > 0.0) {
            break;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        // Recompute the true residual periodically to stop drift.
        if it % 50 == 0 {
            apply(&x, &mut ap);
            for i in 0..n {
                r[i] = rhs[i] - ap[i];
            }
            project(&mut r);
        }
        let rel = norm(&r) / bnorm;
        history.push(rel);
        if rel <= tol {
            apply(&x, &mut ap);
            let mut true_r: Vec<f64> = rhs.iter().zip(&ap).map(|(b, a)| b - a).collect();
            project(&mut true_r);
            let true_rel = norm(&true_r) / bnorm;
            if true_rel <= tol {
                return Ok(CgOutcome {
                    solution: x,
                    iterations: it,
                    residual_history: history,
                });
            }
            r = true_r;
        }
        for i in 0..n {
            z[i] = r[i] / precond_diag[i];
        }
        project(&mut z);
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::SolverNonConvergence {
        iterations: history.len(),
        residual_history: history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, n, t)
    }

    #[test]
    fn banded_cholesky_solves_shifted_laplacian() {
        let a = laplacian(20);
        let d = vec![0.5; 20];
        let chol = BandedCholesky::factor(&a, 3.0, &d).unwrap();
        let x_true: Vec<f64> = (0..20).map(|i| (i as f64).sin()).collect();
        let mut b = a.mul_vec(&x_true);
        for i in 0..20 {
            b[i] = 3.0 * b[i] + 0.5 * x_true[i];
        }
        let x = chol.solve(&b);
        for i in 0..20 {
            assert!((x[i] - x_true[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = laplacian(5);
        let d = vec![-10.0; 5];
        assert!(BandedCholesky::factor(&a, 1.0, &d).is_err());
    }

    #[test]
    fn cg_agrees_with_cholesky() {
        let a = laplacian(50);
        let d: Vec<f64> = (0..50).map(|i| 0.1 + i as f64 * 0.01).collect();
        let b: Vec<f64> = (0..50).map(|i| ((i * 7) % 5) as f64 - 2.0).collect();
        let chol = BandedCholesky::factor(&a, 2.0, &d).unwrap();
        let x_direct = chol.solve(&b);
        let diag: Vec<f64> = a.diagonal().iter().zip(&d).map(|(x, y)| 2.0 * x + y).collect();
        let out = conjugate_gradient(
            |x, y| {
                a.mul_vec_into(x, y);
                for i in 0..50 {
                    y[i] = 2.0 * y[i] + d[i] * x[i];
                }
            },
            &diag,
            &b,
            1e-13,
            500,
            |_| {},
        )
        .unwrap();
        for i in 0..50 {
            assert!((out.solution[i] - x_direct[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn cg_reports_nonconvergence() {
        let a = laplacian(200);
        let d = vec![1e-6; 200];
        let b = vec![1.0; 200];
        let err = conjugate_gradient(
            |x, y| {
                a.mul_vec_into(x, y);
                for i in 0..200 {
                    y[i] += d[i] * x[i];
                }
            },
            &vec![2.0; 200],
            &b,
            1e-14,
            3,
            |_| {},
        )
        .unwrap_err();
        assert!(matches!(err, Error::SolverNonConvergence { iterations: 3, .. }));
    }
}
