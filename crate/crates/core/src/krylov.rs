//! GMRES-type Krylov solvers for square systems and, through right
//! preconditioning with B = CAᵀ, for general least-squares problems.
//!
//! Four methods share one Arnoldi engine:
//!   - `gmres`: search space K_k(A, r₀), first vector r₀/‖r₀‖;
//!   - `rrgmres`: range-restricted, K_k(A, Ar₀), first vector Ar₀/‖Ar₀‖.
//!     Starting from Ar₀ keeps the search space inside the range of A, which
//!     is what makes the method reliable on singular inconsistent systems;
//!   - `ab_solve`: either variant applied to the composed operator A·B with
//!     B a [`RightPreconditioner`]. Iterates are mapped back by x = x₀ + Bz.
//!
//! Stopping is driven by the normal-equations residual ratio ‖Aᵀr_k‖/‖Aᵀb‖,
//! which reaches zero exactly at least-squares solutions, with an optional
//! plain residual test for consistent systems. The iterate x_k is assembled
//! every outer step because the stopping rule needs the true residual.

use std::time::Instant;

use crate::analysis::ConvergenceHistory;
use crate::dense::{dot, hessenberg_least_squares, norm2, DenseMatrix};
use crate::error::{Error, Result};
use crate::precond::RightPreconditioner;
use crate::sparse::SparseMatrixCSR;

pub const DEFAULT_TOL_NE: f64 = 1e-7;
pub const DEFAULT_BREAKDOWN_TOL: f64 = 1e-14;

/// Iterations without any decrease of the stopping ratio before the solver
/// reports stagnation.
pub const STAGNATION_WINDOW: usize = 30;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Orthogonalization {
    /// Modified Gram-Schmidt, the default.
    Mgs,
    /// Classical Gram-Schmidt (two passes against the original vector).
    Cgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KrylovVariant {
    /// Start the space from the initial residual.
    Residual,
    /// Start the space from the operator applied to the initial residual.
    RangeRestricted,
}

#[derive(Clone, Debug)]
pub struct SolverOptions {
    pub max_iters: usize,
    /// Threshold on ‖Aᵀr_k‖/‖Aᵀb‖.
    pub tol_ne: f64,
    /// Optional threshold on ‖r_k‖/‖b‖ for consistent systems.
    pub tol_res: Option<f64>,
    /// A subdiagonal entry at or below this fraction of the operator scale
    /// ends the Arnoldi process (the search space became invariant).
    pub breakdown_tol: f64,
    pub orthogonalization: Orthogonalization,
    /// When false, neither per-iteration rows nor Arnoldi internals are kept.
    pub record_history: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iters: 10_000,
            tol_ne: DEFAULT_TOL_NE,
            tol_res: None,
            breakdown_tol: DEFAULT_BREAKDOWN_TOL,
            orthogonalization: Orthogonalization::Mgs,
            record_history: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    /// Normal-equations residual ratio reached `tol_ne`.
    ConvergedNe,
    /// Residual ratio reached `tol_res`.
    ConvergedRes,
    /// The search space became exactly invariant (`h_{k+1,k} = 0`); the
    /// returned iterate minimizes the residual over the full reachable space.
    HappyBreakdown,
    /// No decrease of the stopping ratio for [`STAGNATION_WINDOW`] iterations,
    /// or `h_{k+1,k}` fell under `breakdown_tol` without hitting exact zero,
    /// so the basis could not be extended reliably.
    Stagnated,
    MaxIters,
}

impl SolveStatus {
    pub fn name(&self) -> &'static str {
        match self {
            SolveStatus::ConvergedNe => "converged-ne",
            SolveStatus::ConvergedRes => "converged-res",
            SolveStatus::HappyBreakdown => "breakdown",
            SolveStatus::Stagnated => "stagnated",
            SolveStatus::MaxIters => "max-iters",
        }
    }

    /// Whether the run ended by solving the problem as well as the reachable
    /// space allows, rather than by giving up.
    pub fn is_success(&self) -> bool {
        matches!(
            self,
            SolveStatus::ConvergedNe | SolveStatus::ConvergedRes | SolveStatus::HappyBreakdown
        )
    }
}

/// Arnoldi internals kept when `record_history` is on.
#[derive(Clone, Debug)]
pub struct ArnoldiDiagnostics {
    /// Raw Hessenberg columns; column j holds rows 0..=j+1.
    pub hessenberg: Vec<Vec<f64>>,
    /// Orthonormal basis vectors of the search space (one more than the
    /// number of columns, except after a breakdown).
    pub basis: Vec<Vec<f64>>,
    /// Least-squares residual of the projected problem at each iteration.
    pub subspace_residuals: Vec<f64>,
    /// ‖(I − V_{k+1}V_{k+1}ᵀ) r₀‖ at each iteration: the part of the initial
    /// residual the search space cannot represent. Squared and added to the
    /// squared projected residual it reproduces the true residual norm.
    pub complement_norms: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct SolveOutcome {
    /// Computed solution. When a tolerance was met this is the iterate that
    /// met it; otherwise it is the iterate with the smallest stopping ratio
    /// encountered, which on semiconvergent problems can predate the exit.
    pub x: Vec<f64>,
    /// Number of outer iterations performed.
    pub iterations: usize,
    pub status: SolveStatus,
    /// Stopping ratio at the returned iterate.
    pub final_ne: f64,
    pub history: ConvergenceHistory,
    diagnostics: Option<ArnoldiDiagnostics>,
}

impl SolveOutcome {
    pub fn diagnostics(&self) -> Result<&ArnoldiDiagnostics> {
        self.diagnostics.as_ref().ok_or_else(|| {
            Error::Contract("diagnostics require record_history = true".into())
        })
    }

    /// The raw (k+1) x k Hessenberg matrix produced by the Arnoldi process.
    pub fn extract_hessenberg(&self) -> Result<DenseMatrix> {
        let diag = self.diagnostics()?;
        let k = diag.hessenberg.len();
        if k == 0 {
            return Ok(DenseMatrix::zeros(0, 0));
        }
        let mut h = DenseMatrix::zeros(k + 1, k);
        for (j, col) in diag.hessenberg.iter().enumerate() {
            for (i, v) in col.iter().enumerate() {
                h.set(i, j, *v);
            }
        }
        Ok(h)
    }
}

enum Op<'a> {
    Plain(&'a SparseMatrixCSR),
    Composed(&'a SparseMatrixCSR, &'a RightPreconditioner<'a>),
}

impl Op<'_> {
    fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        match self {
            Op::Plain(a) => a.matvec(v),
            Op::Composed(a, b) => a.matvec(&b.apply(v)?),
        }
    }
}

/// GMRES for square systems.
pub fn gmres(
    a: &SparseMatrixCSR,
    b: &[f64],
    x0: Option<&[f64]>,
    opts: &SolverOptions,
) -> Result<SolveOutcome> {
    require_square(a)?;
    solve_engine(Op::Plain(a), a, KrylovVariant::Residual, b, x0, opts)
}

/// Range-restricted GMRES for square systems, suited to singular or
/// inconsistent ones.
pub fn rrgmres(
    a: &SparseMatrixCSR,
    b: &[f64],
    x0: Option<&[f64]>,
    opts: &SolverOptions,
) -> Result<SolveOutcome> {
    require_square(a)?;
    solve_engine(Op::Plain(a), a, KrylovVariant::RangeRestricted, b, x0, opts)
}

/// GMRES (`Residual`) or its range-restricted variant (`RangeRestricted`)
/// applied to the composed operator A·B, where `precond` supplies B = CAᵀ.
/// Works for any matrix shape; with C symmetric positive definite the
/// returned iterate converges to a least-squares solution for arbitrary b,
/// and with B = Aᵀ started from x₀ = 0 to the minimum-norm one.
pub fn ab_solve(
    a: &SparseMatrixCSR,
    precond: &RightPreconditioner,
    variant: KrylovVariant,
    b: &[f64],
    x0: Option<&[f64]>,
    opts: &SolverOptions,
) -> Result<SolveOutcome> {
    let pm = precond.matrix();
    if pm.nrows() != a.nrows() || pm.ncols() != a.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "preconditioner was built for a {}x{} matrix, solving with {}x{}",
            pm.nrows(),
            pm.ncols(),
            a.nrows(),
            a.ncols()
        )));
    }
    solve_engine(Op::Composed(a, precond), a, variant, b, x0, opts)
}

fn require_square(a: &SparseMatrixCSR) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "plain solvers need a square matrix, got {}x{}; use ab_solve for rectangular problems",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(())
}

fn require_finite(name: &str, v: &[f64]) -> Result<()> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Precondition(format!("{name} contains a non-finite value")));
    }
    Ok(())
}

/// Orthogonalizes w against the basis in place. Returns the projection
/// coefficients and the norm of the remainder. A second pass runs whenever
/// the first one removes more than half of the vector's norm.
fn orthogonalize(
    basis: &[Vec<f64>],
    w: &mut [f64],
    mode: Orthogonalization,
) -> (Vec<f64>, f64) {
    let norm_before = norm2(w);
    let mut coeffs = Vec::with_capacity(basis.len());
    let pass = |w: &mut [f64], acc: &mut dyn FnMut(usize, f64)| match mode {
        Orthogonalization::Mgs => {
            for (i, v) in basis.iter().enumerate() {
                let h = dot(v, w);
                for (wj, vj) in w.iter_mut().zip(v) {
                    *wj -= h * vj;
                }
                acc(i, h);
            }
        }
        Orthogonalization::Cgs => {
            let hs: Vec<f64> = basis.iter().map(|v| dot(v, w)).collect();
            for (i, (v, h)) in basis.iter().zip(&hs).enumerate() {
                for (wj, vj) in w.iter_mut().zip(v) {
                    *wj -= h * vj;
                }
                acc(i, *h);
            }
        }
    };
    pass(w, &mut |_, h| coeffs.push(h));
    if norm2(w) < 0.5 * norm_before {
        pass(w, &mut |i, h| coeffs[i] += h);
    }
    (coeffs, norm2(w))
}

fn solve_engine(
    op: Op,
    a: &SparseMatrixCSR,
    variant: KrylovVariant,
    b: &[f64],
    x0: Option<&[f64]>,
    opts: &SolverOptions,
) -> Result<SolveOutcome> {
    let m = a.nrows();
    let n = a.ncols();
    if b.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "right-hand side has length {}, expected {m}",
            b.len()
        )));
    }
    require_finite("right-hand side", b)?;
    let x0v = match x0 {
        Some(v) => {
            if v.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "initial guess has length {}, expected {n}",
                    v.len()
                )));
            }
            require_finite("initial guess", v)?;
            v.to_vec()
        }
        None => vec![0.0; n],
    };

    // cumulative solver work; the per-iteration residual and ratio
    // evaluation is bookkeeping and stays out of the clock
    let mut work_secs = 0.0f64;
    let mut history = ConvergenceHistory::new();
    let nb = norm2(b);
    if nb == 0.0 && x0v.iter().all(|&v| v == 0.0) {
        if opts.record_history {
            history.push(0, 0.0, 0.0, 0.0);
        }
        return Ok(SolveOutcome {
            x: x0v,
            iterations: 0,
            status: SolveStatus::ConvergedNe,
            final_ne: 0.0,
            history,
            diagnostics: opts.record_history.then(empty_diagnostics),
        });
    }
    let natb = norm2(&a.matvec_transpose(b)?);
    if natb == 0.0 {
        return Err(Error::DegenerateInput(
            "right-hand side is orthogonal to the range of the matrix".into(),
        ));
    }

    let ax0 = a.matvec(&x0v)?;
    let r0: Vec<f64> = b.iter().zip(&ax0).map(|(bi, ai)| bi - ai).collect();
    let res0 = norm2(&r0);
    let ne0 = norm2(&a.matvec_transpose(&r0)?) / natb;
    if opts.record_history {
        history.push(0, res0, ne0, 0.0);
    }
    let done0 = if ne0 <= opts.tol_ne {
        Some(SolveStatus::ConvergedNe)
    } else if opts.tol_res.is_some_and(|t| res0 <= t * nb) {
        Some(SolveStatus::ConvergedRes)
    } else {
        None
    };
    if let Some(status) = done0 {
        return Ok(SolveOutcome {
            x: x0v,
            iterations: 0,
            status,
            final_ne: ne0,
            history,
            diagnostics: opts.record_history.then(empty_diagnostics),
        });
    }

    let setup = Instant::now();
    let w0 = match variant {
        KrylovVariant::Residual => r0.clone(),
        KrylovVariant::RangeRestricted => op.apply(&r0)?,
    };
    let nw0 = norm2(&w0);
    if nw0 == 0.0 {
        // the operator annihilates r0: the range-restricted space is empty
        return Ok(SolveOutcome {
            x: x0v,
            iterations: 0,
            status: SolveStatus::Stagnated,
            final_ne: ne0,
            history,
            diagnostics: opts.record_history.then(empty_diagnostics),
        });
    }

    let v1: Vec<f64> = w0.iter().map(|x| x / nw0).collect();
    let t1 = dot(&v1, &r0);
    // p tracks the part of r0 outside the search space; subtracting each new
    // basis vector's projection as it appears avoids cancellation later
    let mut p = r0.clone();
    for (pj, vj) in p.iter_mut().zip(&v1) {
        *pj -= t1 * vj;
    }
    let mut basis = vec![v1];
    let mut t = vec![t1];
    work_secs += setup.elapsed().as_secs_f64();

    let frob = a.frobenius_norm();
    let mut running_scale = 0.0f64;
    let mut hcols: Vec<Vec<f64>> = Vec::new();
    let mut sub_res: Vec<f64> = Vec::new();
    let mut comp_norms: Vec<f64> = Vec::new();

    let mut x = x0v.clone();
    let mut iterations = 0;
    let mut status = SolveStatus::MaxIters;
    let mut final_ne = ne0;
    // on singular or ill-conditioned problems the stopping ratio
    // semiconverges: it bottoms out and then degrades as the search
    // directions sink into roundoff, so the best iterate is kept
    let mut best_ne = ne0;
    let mut best_x = x0v.clone();
    let mut last_improvement = 0usize;

    for k in 1..=opts.max_iters {
        let iter_start = Instant::now();
        let mut w = op.apply(basis.last().expect("basis is never empty"))?;
        let (mut col, hk1) = orthogonalize(&basis, &mut w, opts.orthogonalization);
        let scale = match &op {
            Op::Plain(_) => frob,
            Op::Composed(..) => {
                let col_norm = (dot(&col, &col) + hk1 * hk1).sqrt();
                running_scale = running_scale.max(col_norm);
                running_scale
            }
        };
        // exact invariance is a clean stop; a merely tiny pivot means the
        // next direction is roundoff and extending the basis would poison it
        let exhausted = hk1 <= opts.breakdown_tol * scale;
        col.push(hk1);
        hcols.push(col);

        if !exhausted {
            let vnew: Vec<f64> = w.iter().map(|x| x / hk1).collect();
            let c = dot(&vnew, &p);
            for (pj, vj) in p.iter_mut().zip(&vnew) {
                *pj -= c * vj;
            }
            t.push(c);
            basis.push(vnew);
        }
        comp_norms.push(norm2(&p));

        let mut hbar = DenseMatrix::zeros(k + 1, k);
        for (j, cj) in hcols.iter().enumerate() {
            for (i, v) in cj.iter().enumerate() {
                hbar.set(i, j, *v);
            }
        }
        let mut rhs = t.clone();
        if rhs.len() == k {
            rhs.push(0.0); // breakdown step produced no new basis vector
        }
        let (y, lsres) = hessenberg_least_squares(&hbar, &rhs)?;
        sub_res.push(lsres);
        work_secs += iter_start.elapsed().as_secs_f64();

        let mut u = vec![0.0; m];
        for (vj, yj) in basis.iter().zip(&y) {
            for (ui, vi) in u.iter_mut().zip(vj) {
                *ui += yj * vi;
            }
        }
        x = match &op {
            Op::Plain(_) => x0v.iter().zip(&u).map(|(x0i, ui)| x0i + ui).collect(),
            Op::Composed(_, prec) => {
                let bu = prec.apply(&u)?;
                x0v.iter().zip(&bu).map(|(x0i, ui)| x0i + ui).collect()
            }
        };
        let ax = a.matvec(&x)?;
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let res = norm2(&r);
        let ne = norm2(&a.matvec_transpose(&r)?) / natb;
        iterations = k;
        final_ne = ne;
        if opts.record_history {
            history.push(k, res, ne, work_secs);
        }

        if ne <= opts.tol_ne {
            status = SolveStatus::ConvergedNe;
            break;
        }
        if opts.tol_res.is_some_and(|tr| res <= tr * nb) {
            status = SolveStatus::ConvergedRes;
            break;
        }
        if exhausted {
            status = if hk1 == 0.0 {
                SolveStatus::HappyBreakdown
            } else {
                SolveStatus::Stagnated
            };
            break;
        }
        if ne < best_ne {
            best_ne = ne;
            best_x = x.clone();
            last_improvement = k;
        } else if k - last_improvement >= STAGNATION_WINDOW {
            status = SolveStatus::Stagnated;
            break;
        }
    }

    // when no tolerance was met, hand back the best iterate instead of a
    // possibly degraded final one
    if !matches!(
        status,
        SolveStatus::ConvergedNe | SolveStatus::ConvergedRes
    ) && best_ne < final_ne
    {
        x = best_x;
        final_ne = best_ne;
    }

    let diagnostics = opts.record_history.then(|| ArnoldiDiagnostics {
        hessenberg: hcols,
        basis,
        subspace_residuals: sub_res,
        complement_norms: comp_norms,
    });
    Ok(SolveOutcome {
        x,
        iterations,
        status,
        final_ne,
        history,
        diagnostics,
    })
}

fn empty_diagnostics() -> ArnoldiDiagnostics {
    ArnoldiDiagnostics {
        hessenberg: Vec::new(),
        basis: Vec::new(),
        subspace_residuals: Vec::new(),
        complement_norms: Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::precond::{PrecondKind, RightPreconditioner};
    use rand_chacha::rand_core::{RngCore, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn uniform(rng: &mut ChaCha12Rng) -> f64 {
        (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    fn random_square(rng: &mut ChaCha12Rng, n: usize) -> SparseMatrixCSR {
        let mut trips = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let v = 2.0 * uniform(rng) - 1.0 + if i == j { 3.0 } else { 0.0 };
                trips.push((i, j, v));
            }
        }
        SparseMatrixCSR::from_coordinates(&trips, n, n).unwrap()
    }

    /// Gaussian elimination with partial pivoting, as an independent check.
    fn lu_solve(a: &SparseMatrixCSR, b: &[f64]) -> Vec<f64> {
        let n = a.nrows();
        let mut m = a.to_dense();
        let mut rhs = b.to_vec();
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&i, &j| m.get(i, col).abs().total_cmp(&m.get(j, col).abs()))
                .unwrap();
            if piv != col {
                for j in 0..n {
                    let tmp = m.get(col, j);
                    m.set(col, j, m.get(piv, j));
                    m.set(piv, j, tmp);
                }
                rhs.swap(col, piv);
            }
            for i in (col + 1)..n {
                let f = m.get(i, col) / m.get(col, col);
                for j in col..n {
                    m.set(i, j, m.get(i, j) - f * m.get(col, j));
                }
                rhs[i] -= f * rhs[col];
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut acc = rhs[i];
            for j in (i + 1)..n {
                acc -= m.get(i, j) * x[j];
            }
            x[i] = acc / m.get(i, i);
        }
        x
    }

    #[test]
    fn identity_converges_in_one_iteration() {
        let a = SparseMatrixCSR::identity(5);
        let b = [1.0, -2.0, 3.0, 0.5, -0.25];
        let out = gmres(&a, &b, None, &SolverOptions::default()).unwrap();
        assert_eq!(out.status, SolveStatus::ConvergedNe);
        assert_eq!(out.iterations, 1);
        for (xi, bi) in out.x.iter().zip(&b) {
            assert!((xi - bi).abs() < 1e-14);
        }
    }

    #[test]
    fn nilpotent_matrix_breaks_down_at_step_one() {
        let a = SparseMatrixCSR::from_coordinates(&[(0, 1, 1.0)], 2, 2).unwrap();
        let out = gmres(&a, &[1.0, 0.0], None, &SolverOptions::default()).unwrap();
        assert_eq!(out.status, SolveStatus::HappyBreakdown);
        assert_eq!(out.iterations, 1);
        assert_eq!(out.x, vec![0.0, 0.0], "iterate must stay at the initial guess");
    }

    #[test]
    fn range_restricted_stagnates_when_start_vector_vanishes() {
        let a = SparseMatrixCSR::from_coordinates(&[(0, 1, 1.0)], 2, 2).unwrap();
        // b lies in the nullspace, so A r0 = 0
        let out = rrgmres(&a, &[1.0, 0.0], None, &SolverOptions::default()).unwrap();
        assert_eq!(out.status, SolveStatus::Stagnated);
        assert_eq!(out.iterations, 0);
        assert_eq!(out.x, vec![0.0, 0.0]);
    }

    #[test]
    fn zero_rhs_returns_zero_immediately() {
        let a = SparseMatrixCSR::identity(3);
        let out = gmres(&a, &[0.0; 3], None, &SolverOptions::default()).unwrap();
        assert_eq!(out.iterations, 0);
        assert_eq!(out.x, vec![0.0; 3]);
        assert_eq!(out.status, SolveStatus::ConvergedNe);
    }

    #[test]
    fn rhs_orthogonal_to_range_is_rejected() {
        let a = SparseMatrixCSR::from_coordinates(&[(0, 1, 1.0)], 2, 2).unwrap();
        let err = gmres(&a, &[0.0, 1.0], None, &SolverOptions::default()).unwrap_err();
        assert!(matches!(err, Error::DegenerateInput(_)));
    }

    #[test]
    fn matches_direct_solver_on_nonsingular_system() {
        let mut rng = ChaCha12Rng::seed_from_u64(101);
        let a = random_square(&mut rng, 5);
        let b: Vec<f64> = (0..5).map(|_| 2.0 * uniform(&mut rng) - 1.0).collect();
        let reference = lu_solve(&a, &b);
        let opts = SolverOptions {
            tol_ne: 1e-13,
            ..SolverOptions::default()
        };
        for out in [
            gmres(&a, &b, None, &opts).unwrap(),
            rrgmres(&a, &b, None, &opts).unwrap(),
        ] {
            assert!(out.status.is_success(), "status {:?}", out.status);
            for (xi, ri) in out.x.iter().zip(&reference) {
                assert!((xi - ri).abs() < 1e-8, "{xi} vs {ri}");
            }
        }
    }

    #[test]
    fn nonzero_initial_guess_is_honored() {
        let mut rng = ChaCha12Rng::seed_from_u64(103);
        let a = random_square(&mut rng, 6);
        let b: Vec<f64> = (0..6).map(|_| 2.0 * uniform(&mut rng) - 1.0).collect();
        let x0 = vec![1.0; 6];
        let reference = lu_solve(&a, &b);
        let opts = SolverOptions {
            tol_ne: 1e-13,
            ..SolverOptions::default()
        };
        let out = gmres(&a, &b, Some(&x0), &opts).unwrap();
        for (xi, ri) in out.x.iter().zip(&reference) {
            assert!((xi - ri).abs() < 1e-8);
        }
    }

    #[test]
    fn residual_norms_never_increase() {
        let mut rng = ChaCha12Rng::seed_from_u64(107);
        let a = random_square(&mut rng, 12);
        let b: Vec<f64> = (0..12).map(|_| 2.0 * uniform(&mut rng) - 1.0).collect();
        let opts = SolverOptions {
            tol_ne: 1e-13,
            ..SolverOptions::default()
        };
        for out in [
            gmres(&a, &b, None, &opts).unwrap(),
            rrgmres(&a, &b, None, &opts).unwrap(),
        ] {
            let rows = out.history.rows();
            for pair in rows.windows(2) {
                assert!(
                    pair[1].res_norm <= pair[0].res_norm * (1.0 + 1e-12),
                    "residual grew: {} -> {}",
                    pair[0].res_norm,
                    pair[1].res_norm
                );
            }
        }
    }

    #[test]
    fn basis_stays_orthonormal() {
        let mut rng = ChaCha12Rng::seed_from_u64(109);
        let a = random_square(&mut rng, 20);
        let b: Vec<f64> = (0..20).map(|_| 2.0 * uniform(&mut rng) - 1.0).collect();
        for mode in [Orthogonalization::Mgs, Orthogonalization::Cgs] {
            let opts = SolverOptions {
                tol_ne: 1e-13,
                orthogonalization: mode,
                ..SolverOptions::default()
            };
            let out = gmres(&a, &b, None, &opts).unwrap();
            let basis = &out.diagnostics().unwrap().basis;
            let mut worst = 0.0f64;
            for (i, vi) in basis.iter().enumerate() {
                for (j, vj) in basis.iter().enumerate() {
                    let want = if i == j { 1.0 } else { 0.0 };
                    worst = worst.max((dot(vi, vj) - want).abs());
                }
            }
            assert!(worst <= 1e-8, "orthonormality defect {worst} with {mode:?}");
        }
    }

    #[test]
    fn gram_schmidt_variants_agree() {
        let mut rng = ChaCha12Rng::seed_from_u64(113);
        let a = random_square(&mut rng, 10);
        let b: Vec<f64> = (0..10).map(|_| 2.0 * uniform(&mut rng) - 1.0).collect();
        let mgs = gmres(
            &a,
            &b,
            None,
            &SolverOptions {
                tol_ne: 1e-13,
                ..SolverOptions::default()
            },
        )
        .unwrap();
        let cgs = gmres(
            &a,
            &b,
            None,
            &SolverOptions {
                tol_ne: 1e-13,
                orthogonalization: Orthogonalization::Cgs,
                ..SolverOptions::default()
            },
        )
        .unwrap();
        for (xi, yi) in mgs.x.iter().zip(&cgs.x) {
            assert!((xi - yi).abs() < 1e-10);
        }
    }

    #[test]
    fn both_plain_methods_reach_the_same_solution() {
        let mut rng = ChaCha12Rng::seed_from_u64(127);
        let a = random_square(&mut rng, 9);
        let b: Vec<f64> = (0..9).map(|_| 2.0 * uniform(&mut rng) - 1.0).collect();
        let opts = SolverOptions {
            tol_ne: 1e-13,
            ..SolverOptions::default()
        };
        let g = gmres(&a, &b, None, &opts).unwrap();
        let r = rrgmres(&a, &b, None, &opts).unwrap();
        for (xi, yi) in g.x.iter().zip(&r.x) {
            assert!((xi - yi).abs() < 1e-8);
        }
    }

    #[test]
    fn ab_solver_finds_minimum_norm_least_squares_solution() {
        // rank-2 diagonal with an inconsistent third component
        let a = SparseMatrixCSR::from_coordinates(&[(0, 0, 1.0), (1, 1, 2.0)], 3, 3).unwrap();
        let b = [1.0, 2.0, 5.0];
        let prec = RightPreconditioner::new(PrecondKind::At, &a, 1.0, 1).unwrap();
        for variant in [KrylovVariant::Residual, KrylovVariant::RangeRestricted] {
            let out = ab_solve(&a, &prec, variant, &b, None, &SolverOptions::default()).unwrap();
            assert_eq!(out.status, SolveStatus::ConvergedNe, "{variant:?}");
            assert!(out.iterations <= 2, "{variant:?} took {}", out.iterations);
            let want = [1.0, 1.0, 0.0];
            for (xi, wi) in out.x.iter().zip(&want) {
                assert!((xi - wi).abs() < 1e-10, "{variant:?}: {xi} vs {wi}");
            }
        }
    }

    #[test]
    fn ab_solver_handles_rectangular_least_squares() {
        let mut rng = ChaCha12Rng::seed_from_u64(131);
        let mut trips = Vec::new();
        for i in 0..8 {
            for j in 0..5 {
                trips.push((i, j, 2.0 * uniform(&mut rng) - 1.0));
            }
        }
        let a = SparseMatrixCSR::from_coordinates(&trips, 8, 5).unwrap();
        let b: Vec<f64> = (0..8).map(|_| 2.0 * uniform(&mut rng) - 1.0).collect();
        // reference: solve the normal equations directly
        let k = crate::precond::normal_matrix(&a);
        let atb = a.matvec_transpose(&b).unwrap();
        let dense_sol = {
            let kk = SparseMatrixCSR::from_coordinates(
                &(0..5)
                    .flat_map(|i| (0..5).map(move |j| (i, j)))
                    .map(|(i, j)| (i, j, k.get(i, j)))
                    .filter(|&(_, _, v)| v != 0.0)
                    .collect::<Vec<_>>(),
                5,
                5,
            )
            .unwrap();
            lu_solve(&kk, &atb)
        };
        let opts = SolverOptions {
            tol_ne: 1e-10,
            ..SolverOptions::default()
        };
        for kind in [PrecondKind::At, PrecondKind::DiagAt, PrecondKind::Nrssor] {
            let prec = RightPreconditioner::new(kind, &a, 1.0, 2).unwrap();
            let out =
                ab_solve(&a, &prec, KrylovVariant::Residual, &b, None, &opts).unwrap();
            assert!(out.status.is_success(), "{kind:?}: {:?}", out.status);
            for (xi, ri) in out.x.iter().zip(&dense_sol) {
                assert!((xi - ri).abs() < 1e-7, "{kind:?}: {xi} vs {ri}");
            }
        }
    }

    #[test]
    fn residual_splits_into_subspace_and_complement_parts() {
        // singular (three zero rows and columns) and inconsistent rhs
        let mut rng = ChaCha12Rng::seed_from_u64(149);
        let mut trips = Vec::new();
        for i in 0..6 {
            for j in 0..6 {
                let v = 2.0 * uniform(&mut rng) - 1.0 + if i == j { 3.0 } else { 0.0 };
                trips.push((i, j, v));
            }
        }
        let a = SparseMatrixCSR::from_coordinates(&trips, 9, 9).unwrap();
        let b: Vec<f64> = (0..9).map(|_| 1.0 + uniform(&mut rng)).collect();
        let opts = SolverOptions {
            tol_ne: 1e-12,
            ..SolverOptions::default()
        };
        let out = rrgmres(&a, &b, None, &opts).unwrap();
        assert!(out.iterations >= 3, "want several iterations to check");
        let diag = out.diagnostics().unwrap();
        let r0_sq = {
            let rows = out.history.rows();
            rows[0].res_norm * rows[0].res_norm
        };
        for (idx, row) in out.history.rows().iter().skip(1).enumerate() {
            let lhs = row.res_norm * row.res_norm;
            let rhs = diag.subspace_residuals[idx] * diag.subspace_residuals[idx]
                + diag.complement_norms[idx] * diag.complement_norms[idx];
            assert!(
                (lhs - rhs).abs() <= 1e-12 * r0_sq,
                "iteration {}: {lhs} vs {rhs}",
                row.iteration
            );
        }
    }

    #[test]
    fn hessenberg_extraction_reproduces_arnoldi_relation() {
        let mut rng = ChaCha12Rng::seed_from_u64(137);
        let a = random_square(&mut rng, 8);
        let b: Vec<f64> = (0..8).map(|_| 2.0 * uniform(&mut rng) - 1.0).collect();
        let opts = SolverOptions {
            tol_ne: 1e-13,
            max_iters: 5,
            ..SolverOptions::default()
        };
        let out = gmres(&a, &b, None, &opts).unwrap();
        let h = out.extract_hessenberg().unwrap();
        let diag = out.diagnostics().unwrap();
        let k = h.ncols();
        assert_eq!(h.nrows(), k + 1);
        // A v_j must equal the Hessenberg combination of v_1..v_{j+1}
        for j in 0..k {
            let av = a.matvec(&diag.basis[j]).unwrap();
            let mut want = vec![0.0; 8];
            for i in 0..=(j + 1) {
                if let Some(vi) = diag.basis.get(i) {
                    for (wl, vl) in want.iter_mut().zip(vi) {
                        *wl += h.get(i, j) * vl;
                    }
                }
            }
            for (x, y) in av.iter().zip(&want) {
                assert!((x - y).abs() <= 1e-10 * a.frobenius_norm());
            }
        }
    }

    #[test]
    fn hessenberg_requires_recorded_history() {
        let a = SparseMatrixCSR::identity(3);
        let opts = SolverOptions {
            record_history: false,
            ..SolverOptions::default()
        };
        let out = gmres(&a, &[1.0, 1.0, 1.0], None, &opts).unwrap();
        assert!(out.history.is_empty());
        assert!(matches!(out.extract_hessenberg(), Err(Error::Contract(_))));
        assert!(matches!(out.diagnostics(), Err(Error::Contract(_))));
    }

    #[test]
    fn residual_tolerance_stops_consistent_systems() {
        let mut rng = ChaCha12Rng::seed_from_u64(139);
        let a = random_square(&mut rng, 7);
        let xstar: Vec<f64> = (0..7).map(|_| uniform(&mut rng)).collect();
        let b = a.matvec(&xstar).unwrap();
        let opts = SolverOptions {
            tol_ne: 0.0,
            tol_res: Some(1e-10),
            max_iters: 100,
            ..SolverOptions::default()
        };
        let out = gmres(&a, &b, None, &opts).unwrap();
        assert_eq!(out.status, SolveStatus::ConvergedRes);
        let last = out.history.last().unwrap();
        assert!(last.res_norm <= 1e-10 * norm2(&b));
    }

    #[test]
    fn mismatched_preconditioner_is_rejected() {
        let a = SparseMatrixCSR::identity(3);
        let other = SparseMatrixCSR::identity(4);
        let prec = RightPreconditioner::new(PrecondKind::At, &other, 1.0, 1).unwrap();
        let err = ab_solve(
            &a,
            &prec,
            KrylovVariant::Residual,
            &[1.0; 3],
            None,
            &SolverOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch(_)));
    }
}

