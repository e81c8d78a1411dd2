//! Weighted sub-Laplacians `L_M = -M^{-1} Σ X_i (M X_i ·)` on concrete unimodular
//! Lie groups with polynomial volume growth.
//!
//! The crate is `no_std` (with `alloc`) and contains only the numerical
//! machinery:
//!
//! - [`group`]: group laws, left-invariant Hörmander frames, Carnot–Carathéodory
//!   distances and ball volumes for `ℝⁿ` and the first Heisenberg group.
//! - [`weight`]: polynomial potentials `v`, the weight `M = e^{-v}`, the
//!   Lyapunov sufficient conditions and certificate construction.
//! - [`grid`]: truncated tensor grids and the assembled form pair
//!   (Dirichlet form, mass form, weighted mass form).
//! - [`spectral`]: spectral gaps, fractional powers, the resolvent quadratic
//!   functional and off-diagonal decay experiments.
//! - [`nonlocal`]: the non-local double-sum energy, covering nets, overlap
//!   counts and annulus estimates.
//!
//! File formats, configuration and the command line live in the `sublap`
//! companion crate.

#![no_std]
// `!(x <= y)` is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod eigen;
pub mod error;
pub mod grid;
pub mod group;
pub mod nonlocal;
pub mod quadrature;
pub mod sampling;
pub mod solver;
pub mod sparse;
pub mod spectral;
pub mod sum;
pub mod weight;

pub use error::{Error, Result};
pub use grid::{assemble, build_grid, AssembledForms, Grid, TailPolicy};
pub use group::{GroupInstance, GroupKind, GroupPoint, Growth};
pub use weight::{Polynomial, WeightSpec};
