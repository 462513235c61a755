//! Small dense linear algebra: row-major matrices, Cholesky, cyclic Jacobi
//! eigendecomposition, one-sided Jacobi SVD, and the Hessenberg least-squares
//! solve used by the Krylov solvers.
//!
//! Everything here is desk-scale (dimensions are capped at 512 where noted)
//! and serves as the reference side for the iterative code: rank and
//! condition estimates, spectra for the clustering checks, nullspace bases.

use crate::error::{Error, Result};

pub type DenseVector = Vec<f64>;

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Largest dimension accepted by the dense eig/SVD routines.
pub const MAX_DENSE_DIM: usize = 512;

/// Relative asymmetry tolerated by routines that require symmetric input.
const SYMMETRY_RTOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    nrows: usize,
    ncols: usize,
    data: Vec<f64>, // row-major
}

impl DenseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        DenseMatrix {
            nrows,
            ncols,
            data: vec![0.0; nrows * ncols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = DenseMatrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Builds a matrix from row slices. All rows must have equal length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(nrows * ncols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != ncols {
                return Err(Error::DimensionMismatch(format!(
                    "row {} has length {}, expected {}",
                    i,
                    r.len(),
                    ncols
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(DenseMatrix { nrows, ncols, data })
    }

    pub fn from_fn(nrows: usize, ncols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = DenseMatrix::zeros(nrows, ncols);
        for i in 0..nrows {
            for j in 0..ncols {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.ncols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.ncols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.ncols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.nrows).map(|i| self.get(i, j)).collect()
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut t = DenseMatrix::zeros(self.ncols, self.nrows);
        for i in 0..self.nrows {
            for j in 0..self.ncols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(
            self.ncols, other.nrows,
            "matmul shape mismatch: {}x{} * {}x{}",
            self.nrows, self.ncols, other.nrows, other.ncols
        );
        let mut out = DenseMatrix::zeros(self.nrows, other.ncols);
        for i in 0..self.nrows {
            for k in 0..self.ncols {
                let aik = self.get(i, k);
                if aik == 0.0 {
                    continue;
                }
                for j in 0..other.ncols {
                    let v = out.get(i, j) + aik * other.get(k, j);
                    out.set(i, j, v);
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.ncols, x.len(), "matvec shape mismatch");
        (0..self.nrows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Leading `rows` x `cols` block, copied.
    pub fn leading_block(&self, rows: usize, cols: usize) -> DenseMatrix {
        assert!(rows <= self.nrows && cols <= self.ncols);
        DenseMatrix::from_fn(rows, cols, |i, j| self.get(i, j))
    }

    fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.nrows {
            for j in (i + 1)..self.ncols {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }
}

fn require_symmetric(s: &DenseMatrix, who: &str) -> Result<()> {
    if s.nrows != s.ncols {
        return Err(Error::Contract(format!(
            "{who} requires a square matrix, got {}x{}",
            s.nrows, s.ncols
        )));
    }
    let scale = s.max_abs();
    if scale > 0.0 && s.max_asymmetry() > SYMMETRY_RTOL * scale {
        return Err(Error::Contract(format!(
            "{who} requires symmetric input (asymmetry {:.3e} exceeds {:.3e})",
            s.max_asymmetry(),
            SYMMETRY_RTOL * scale
        )));
    }
    Ok(())
}

/// Plane rotation (c, s) zeroing `b` in the pair (a, b):
/// [c s; -s c]ᵀ... applied as (a, b) -> (c*a + s*b, -s*a + c*b) = (r, 0).
pub(crate) fn givens(a: f64, b: f64) -> (f64, f64) {
    if b == 0.0 {
        return (1.0, 0.0);
    }
    let r = a.hypot(b);
    (a / r, b / r)
}

/// Result of a Cholesky attempt. A non-positive pivot is a report, not a panic:
/// the positive-definiteness checks in the preconditioner test suite rely on
/// observing the failing pivot.
#[derive(Clone, Debug)]
pub enum CholeskyOutcome {
    /// Lower-triangular L with L·Lᵀ equal to the input.
    Factor(DenseMatrix),
    /// Factorization stopped: `pivot_value` (the compensated diagonal entry,
    /// <= 0) was found at zero-based row `pivot_index`.
    Indefinite { pivot_index: usize, pivot_value: f64 },
}

impl CholeskyOutcome {
    pub fn factor(self) -> Option<DenseMatrix> {
        match self {
            CholeskyOutcome::Factor(l) => Some(l),
            CholeskyOutcome::Indefinite { .. } => None,
        }
    }

    pub fn is_positive_definite(&self) -> bool {
        matches!(self, CholeskyOutcome::Factor(_))
    }
}

pub fn cholesky(s: &DenseMatrix) -> Result<CholeskyOutcome> {
    require_symmetric(s, "cholesky")?;
    let n = s.nrows;
    let mut l = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = s.get(j, j);
        for k in 0..j {
            d -= l.get(j, k) * l.get(j, k);
        }
        if d <= 0.0 {
            return Ok(CholeskyOutcome::Indefinite {
                pivot_index: j,
                pivot_value: d,
            });
        }
        let ljj = d.sqrt();
        l.set(j, j, ljj);
        for i in (j + 1)..n {
            let mut v = s.get(i, j);
            for k in 0..j {
                v -= l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, v / ljj);
        }
    }
    Ok(CholeskyOutcome::Factor(l))
}

/// Solves L y = b for lower-triangular L.
pub(crate) fn forward_substitute(l: &DenseMatrix, b: &[f64]) -> Vec<f64> {
    let n = l.nrows();
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            y[i] -= l.get(i, k) * y[k];
        }
        y[i] /= l.get(i, i);
    }
    y
}

/// Solves Lᵀ x = y for lower-triangular L.
pub(crate) fn backward_substitute_transposed(l: &DenseMatrix, y: &[f64]) -> Vec<f64> {
    let n = l.nrows();
    let mut x = y.to_vec();
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            x[i] -= l.get(k, i) * x[k];
        }
        x[i] /= l.get(i, i);
    }
    x
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues in descending order and the matching orthonormal
/// eigenvector columns, S ≈ V diag(λ) Vᵀ.
pub fn dense_symmetric_eig(s: &DenseMatrix) -> Result<(DenseVector, DenseMatrix)> {
    require_symmetric(s, "dense_symmetric_eig")?;
    let n = s.nrows;
    if n > MAX_DENSE_DIM {
        return Err(Error::Contract(format!(
            "dense_symmetric_eig is capped at {MAX_DENSE_DIM}, got {n}"
        )));
    }
    let mut a = s.clone();
    // enforce exact symmetry of the working copy so rotations stay consistent
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (a.get(i, j) + a.get(j, i));
            a.set(i, j, avg);
            a.set(j, i, avg);
        }
    }
    let mut v = DenseMatrix::identity(n);
    let fro = a.frobenius_norm();
    if fro > 0.0 {
        let stop = 1e-15 * fro;
        for _sweep in 0..60 {
            let mut off = 0.0f64;
            for p in 0..n {
                for q in (p + 1)..n {
                    off += a.get(p, q) * a.get(p, q);
                }
            }
            if (2.0 * off).sqrt() <= stop {
                break;
            }
            for p in 0..n - 1 {
                for q in (p + 1)..n {
                    let apq = a.get(p, q);
                    if apq == 0.0 {
                        continue;
                    }
                    let app = a.get(p, p);
                    let aqq = a.get(q, q);
                    // skip rotations that cannot move the result
                    if apq.abs() <= f64::EPSILON * 1e-2 * (app.abs() + aqq.abs()) {
                        a.set(p, q, 0.0);
                        a.set(q, p, 0.0);
                        continue;
                    }
                    let theta = (aqq - app) / (2.0 * apq);
                    let t = if theta >= 0.0 {
                        1.0 / (theta + (1.0 + theta * theta).sqrt())
                    } else {
                        1.0 / (theta - (1.0 + theta * theta).sqrt())
                    };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let sn = t * c;
                    let tau = sn / (1.0 + c);
                    a.set(p, p, app - t * apq);
                    a.set(q, q, aqq + t * apq);
                    a.set(p, q, 0.0);
                    a.set(q, p, 0.0);
                    for i in 0..n {
                        if i != p && i != q {
                            let aip = a.get(i, p);
                            let aiq = a.get(i, q);
                            let nip = aip - sn * (aiq + tau * aip);
                            let niq = aiq + sn * (aip - tau * aiq);
                            a.set(i, p, nip);
                            a.set(p, i, nip);
                            a.set(i, q, niq);
                            a.set(q, i, niq);
                        }
                    }
                    for i in 0..n {
                        let vip = v.get(i, p);
                        let viq = v.get(i, q);
                        v.set(i, p, vip - sn * (viq + tau * vip));
                        v.set(i, q, viq + sn * (vip - tau * viq));
                    }
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a.get(j, j).partial_cmp(&a.get(i, i)).unwrap());
    let eigenvalues: Vec<f64> = order.iter().map(|&i| a.get(i, i)).collect();
    let eigenvectors = DenseMatrix::from_fn(n, n, |i, j| v.get(i, order[j]));
    Ok((eigenvalues, eigenvectors))
}

/// Singular value decomposition by one-sided Jacobi: M = U diag(σ) Vᵀ with
/// σ descending. U is economy-size (nrows x min-dim after orientation), V is
/// square; columns of U belonging to zero singular values are zero vectors.
///
/// One-sided Jacobi keeps small singular values accurate relative to
/// themselves, which the rank decisions at condition numbers near 1e12 need.
pub fn dense_svd(m: &DenseMatrix) -> Result<(DenseMatrix, DenseVector, DenseMatrix)> {
    if m.nrows.min(m.ncols) > MAX_DENSE_DIM {
        return Err(Error::Contract(format!(
            "dense_svd needs min(m, n) <= {MAX_DENSE_DIM}, got {}x{}",
            m.nrows, m.ncols
        )));
    }
    if m.nrows < m.ncols {
        // Mᵀ = V Σ Uᵀ: factor the transpose and swap the orthogonal factors.
        let (u_t, sigma, v_t) = dense_svd(&m.transpose())?;
        return Ok((v_t, sigma, u_t));
    }
    let nrows = m.nrows;
    let ncols = m.ncols;
    let mut u: Vec<Vec<f64>> = (0..ncols).map(|j| m.column(j)).collect();
    let mut v: Vec<Vec<f64>> = (0..ncols)
        .map(|j| {
            let mut e = vec![0.0; ncols];
            e[j] = 1.0;
            e
        })
        .collect();
    const PAIR_TOL: f64 = 1e-14;
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..ncols.saturating_sub(1) {
            for q in (p + 1)..ncols {
                let (alpha, beta, gamma) = {
                    let (up, uq) = (&u[p], &u[q]);
                    let mut a = 0.0;
                    let mut b = 0.0;
                    let mut g = 0.0;
                    for i in 0..nrows {
                        a += up[i] * up[i];
                        b += uq[i] * uq[i];
                        g += up[i] * uq[i];
                    }
                    (a, b, g)
                };
                if gamma.abs() <= PAIR_TOL * alpha.sqrt() * beta.sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = if zeta >= 0.0 {
                    1.0 / (zeta + (1.0 + zeta * zeta).sqrt())
                } else {
                    1.0 / (zeta - (1.0 + zeta * zeta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (lo, hi) = (p.min(q), p.max(q));
                let (head, tail) = u.split_at_mut(hi);
                let (up, uq) = (&mut head[lo], &mut tail[0]);
                for i in 0..nrows {
                    let a = up[i];
                    let b = uq[i];
                    up[i] = c * a - s * b;
                    uq[i] = s * a + c * b;
                }
                let (head, tail) = v.split_at_mut(hi);
                let (vp, vq) = (&mut head[lo], &mut tail[0]);
                for i in 0..ncols {
                    let a = vp[i];
                    let b = vq[i];
                    vp[i] = c * a - s * b;
                    vq[i] = s * a + c * b;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut order: Vec<usize> = (0..ncols).collect();
    let norms: Vec<f64> = u
        .iter()
        .map(|col| col.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap());
    let mut sigma = Vec::with_capacity(ncols);
    let mut u_mat = DenseMatrix::zeros(nrows, ncols);
    let mut v_mat = DenseMatrix::zeros(ncols, ncols);
    for (newj, &oldj) in order.iter().enumerate() {
        let s = norms[oldj];
        sigma.push(s);
        if s > 0.0 {
            for i in 0..nrows {
                u_mat.set(i, newj, u[oldj][i] / s);
            }
        }
        for i in 0..ncols {
            v_mat.set(i, newj, v[oldj][i]);
        }
    }
    Ok((u_mat, sigma, v_mat))
}

/// Least squares for the (k+1) x k Hessenberg system min_y ‖H y − g‖₂ via
/// Givens rotations. Returns (y, residual_norm) where residual_norm is the
/// magnitude of the rotated trailing right-hand-side entry.
///
/// A numerically zero diagonal pivot (|pivot| < 1e-14 ‖H‖) gets y component 0:
/// the minimum-norm completion taken on the breakdown path of the solvers.
pub fn hessenberg_least_squares(h: &DenseMatrix, g: &[f64]) -> Result<(DenseVector, f64)> {
    let k = h.ncols;
    if h.nrows != k + 1 {
        return Err(Error::DimensionMismatch(format!(
            "expected a (k+1) x k Hessenberg matrix, got {}x{}",
            h.nrows, h.ncols
        )));
    }
    if g.len() != h.nrows {
        return Err(Error::DimensionMismatch(format!(
            "right-hand side has length {}, expected {}",
            g.len(),
            h.nrows
        )));
    }
    for i in 0..h.nrows {
        for j in 0..k {
            if i > j + 1 && h.get(i, j) != 0.0 {
                return Err(Error::Contract(format!(
                    "entry ({i},{j}) below the subdiagonal is nonzero"
                )));
            }
        }
    }
    let mut r = h.clone();
    let mut rhs = g.to_vec();
    for j in 0..k {
        // rotations from previous columns were applied in place already
        let (c, s) = givens(r.get(j, j), r.get(j + 1, j));
        for col in j..k {
            let a = r.get(j, col);
            let b = r.get(j + 1, col);
            r.set(j, col, c * a + s * b);
            r.set(j + 1, col, -s * a + c * b);
        }
        let a = rhs[j];
        let b = rhs[j + 1];
        rhs[j] = c * a + s * b;
        rhs[j + 1] = -s * a + c * b;
    }
    let pivot_floor = 1e-14 * h.frobenius_norm();
    let mut y = vec![0.0; k];
    for i in (0..k).rev() {
        let mut acc = rhs[i];
        for j in (i + 1)..k {
            acc -= r.get(i, j) * y[j];
        }
        let pivot = r.get(i, i);
        y[i] = if pivot.abs() <= pivot_floor {
            0.0
        } else {
            acc / pivot
        };
    }
    Ok((y, rhs[k].abs()))
}
