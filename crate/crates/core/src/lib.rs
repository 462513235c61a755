//! Sparse iterative solvers for singular, inconsistent, and rectangular
//! least-squares problems: GMRES, range-restricted GMRES (RRGMRES), and their
//! right-preconditioned variants driven by NR-SSOR inner iterations on the
//! normal equations. A normal-equation residual ratio ‖Aᵀr‖₂/‖Aᵀb‖₂ is the
//! convergence measure throughout, since it vanishes exactly at least-squares
//! solutions even when the plain residual cannot.
//!
//! The crate also ships the dense desk-scale oracles (Jacobi eigendecomposition
//! and SVD, Cholesky), test-problem generators, spectrum-clustering
//! verification for the preconditioned operator, and CSV convergence-history
//! export; the `rrgmres` binary wires all of it into a CLI.

pub mod analysis;
pub mod dense;
mod error;
pub mod krylov;
pub mod market;
pub mod precond;
pub mod problems;
pub mod sparse;

pub use error::{Error, Result};

pub use dense::{DenseMatrix, DenseVector};
pub use sparse::SparseMatrixCSR;
