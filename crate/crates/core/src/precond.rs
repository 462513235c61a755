//! Right preconditioners B = C Aᵀ mapping R^m -> R^n: plain transpose
//! (C = I), diagonally scaled transpose (C = diag(AᵀA)⁻¹), and NR-SSOR inner
//! iterations (C applied matrix-free by forward+backward column sweeps on the
//! normal equations). With C symmetric positive definite the composed operator
//! A·B is symmetric, which is what lets the outer Krylov method reach a
//! least-squares solution for arbitrary right-hand sides.
//!
//! The `materialize_*` functions build dense M, C, and the inner-iteration
//! matrix spectrum at desk scale so the spectral claims about the
//! preconditioned operator can be checked against explicit eigenvalues.

use crate::dense::{
    backward_substitute_transposed, cholesky, dense_symmetric_eig, forward_substitute,
    CholeskyOutcome, DenseMatrix,
};
use crate::error::{Error, Result};
use crate::sparse::SparseMatrixCSR;

pub const MAX_MATERIALIZE_DIM: usize = 512;

/// Default relaxation parameter for NR-SSOR.
pub const DEFAULT_OMEGA: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PrecondKind {
    /// B = Aᵀ
    At,
    /// B = diag(AᵀA)⁻¹ Aᵀ
    DiagAt,
    /// B = C^(ℓ) Aᵀ applied by ℓ NR-SSOR forward+backward sweeps
    Nrssor,
}

impl PrecondKind {
    pub fn name(&self) -> &'static str {
        match self {
            PrecondKind::At => "at",
            PrecondKind::DiagAt => "diag-at",
            PrecondKind::Nrssor => "nrssor",
        }
    }
}

pub struct RightPreconditioner<'a> {
    kind: PrecondKind,
    a: &'a SparseMatrixCSR,
    /// Aᵀ in CSR, so row j enumerates column j of A. Only built for NR-SSOR,
    /// whose sweeps walk columns.
    at: Option<SparseMatrixCSR>,
    omega: f64,
    inner_iters: usize,
    col_sq_norms: Vec<f64>,
}

impl<'a> RightPreconditioner<'a> {
    pub fn new(
        kind: PrecondKind,
        a: &'a SparseMatrixCSR,
        omega: f64,
        inner_iters: usize,
    ) -> Result<RightPreconditioner<'a>> {
        let col_sq_norms = a.column_sq_norms();
        match kind {
            PrecondKind::At => {}
            PrecondKind::DiagAt => {
                if let Some(j) = col_sq_norms.iter().position(|&s| s <= 0.0) {
                    return Err(Error::Precondition(format!(
                        "diag-at: diagonal of AᵀA is zero at column {j}"
                    )));
                }
            }
            PrecondKind::Nrssor => {
                if !(0.0 < omega && omega < 2.0) {
                    return Err(Error::Precondition(format!(
                        "nrssor: omega must lie strictly inside (0, 2), got {omega}"
                    )));
                }
                if inner_iters < 1 {
                    return Err(Error::Precondition(
                        "nrssor: at least one inner iteration is required".into(),
                    ));
                }
                if let Some(j) = col_sq_norms.iter().position(|&s| s <= 0.0) {
                    return Err(Error::Precondition(format!(
                        "nrssor: column {j} of the matrix is zero"
                    )));
                }
            }
        }
        let at = match kind {
            PrecondKind::Nrssor => Some(a.transpose()),
            _ => None,
        };
        Ok(RightPreconditioner {
            kind,
            a,
            at,
            omega,
            inner_iters,
            col_sq_norms,
        })
    }

    pub fn kind(&self) -> PrecondKind {
        self.kind
    }

    pub fn matrix(&self) -> &SparseMatrixCSR {
        self.a
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn inner_iters(&self) -> usize {
        self.inner_iters
    }

    pub fn col_sq_norms(&self) -> &[f64] {
        &self.col_sq_norms
    }

    /// Applies B to c ∈ R^m, producing z ∈ R^n.
    pub fn apply(&self, c: &[f64]) -> Result<Vec<f64>> {
        if c.len() != self.a.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "preconditioner input has length {}, expected {}",
                c.len(),
                self.a.nrows()
            )));
        }
        match self.kind {
            PrecondKind::At => self.a.matvec_transpose(c),
            PrecondKind::DiagAt => {
                let mut z = self.a.matvec_transpose(c)?;
                for (zj, d) in z.iter_mut().zip(&self.col_sq_norms) {
                    *zj /= d;
                }
                Ok(z)
            }
            PrecondKind::Nrssor => Ok(self.nr_ssor(c)),
        }
    }

    /// ℓ sweeps of SSOR on the normal equations, each a forward pass over the
    /// columns followed by a backward pass. The residual r starts at c and is
    /// updated in place one column step at a time:
    ///   d_j = ω (r, a_j) / ‖a_j‖₂²,  z_j += d_j,  r -= d_j a_j.
    fn nr_ssor(&self, c: &[f64]) -> Vec<f64> {
        let at = self.at.as_ref().expect("nrssor caches the transpose");
        let n = self.a.ncols();
        let mut z = vec![0.0; n];
        let mut r = c.to_vec();
        let step = |j: usize, z: &mut [f64], r: &mut [f64]| {
            let lo = at.row_ptr()[j];
            let hi = at.row_ptr()[j + 1];
            let rows = &at.col_idx()[lo..hi];
            let vals = &at.values()[lo..hi];
            let mut dot = 0.0;
            for (i, v) in rows.iter().zip(vals) {
                dot += r[*i] * v;
            }
            let d = self.omega * dot / self.col_sq_norms[j];
            z[j] += d;
            for (i, v) in rows.iter().zip(vals) {
                r[*i] -= d * v;
            }
        };
        for _ in 0..self.inner_iters {
            for j in 0..n {
                step(j, &mut z, &mut r);
            }
            for j in (0..n).rev() {
                step(j, &mut z, &mut r);
            }
        }
        z
    }
}

fn check_materialize_pre(a: &SparseMatrixCSR, omega: f64) -> Result<Vec<f64>> {
    if a.ncols() > MAX_MATERIALIZE_DIM {
        return Err(Error::Contract(format!(
            "materialization is capped at {MAX_MATERIALIZE_DIM} columns, got {}",
            a.ncols()
        )));
    }
    if !(0.0 < omega && omega < 2.0) {
        return Err(Error::Precondition(format!(
            "omega must lie strictly inside (0, 2), got {omega}"
        )));
    }
    let norms = a.column_sq_norms();
    if let Some(j) = norms.iter().position(|&s| s <= 0.0) {
        return Err(Error::Precondition(format!("column {j} of the matrix is zero")));
    }
    Ok(norms)
}

/// Dense AᵀA assembled row-by-row from the sparse matrix.
pub(crate) fn normal_matrix(a: &SparseMatrixCSR) -> DenseMatrix {
    let n = a.ncols();
    let mut k = DenseMatrix::zeros(n, n);
    for i in 0..a.nrows() {
        let entries: Vec<(usize, f64)> = a.row_entries(i).collect();
        for &(j1, v1) in &entries {
            for &(j2, v2) in &entries {
                k.set(j1, j2, k.get(j1, j2) + v1 * v2);
            }
        }
    }
    k
}

/// The SSOR splitting matrix M = ω⁻¹(2−ω)⁻¹ (D + ωL) D⁻¹ (D + ωLᵀ), where
/// AᵀA = L + D + Lᵀ with D diagonal and L strictly lower triangular.
pub fn materialize_m(a: &SparseMatrixCSR, omega: f64) -> Result<DenseMatrix> {
    check_materialize_pre(a, omega)?;
    let k = normal_matrix(a);
    let n = k.nrows();
    // P = D + ωL, lower triangular with the diagonal of AᵀA on its diagonal
    let mut p = DenseMatrix::zeros(n, n);
    for i in 0..n {
        p.set(i, i, k.get(i, i));
        for j in 0..i {
            p.set(i, j, omega * k.get(i, j));
        }
    }
    let scale = 1.0 / (omega * (2.0 - omega));
    let mut m = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut acc = 0.0;
            for l in 0..=j.min(i) {
                acc += p.get(i, l) * p.get(j, l) / k.get(l, l);
            }
            let v = scale * acc;
            m.set(i, j, v);
            m.set(j, i, v);
        }
    }
    Ok(m)
}

/// Dense C^(ℓ) = Σ_{i=0}^{ℓ−1} H^i M⁻¹ with H = I − M⁻¹AᵀA. This is the
/// operator the NR-SSOR sweeps apply implicitly: ℓ sweeps on input Aᵀc equal
/// C^(ℓ)Aᵀc in exact arithmetic.
pub fn materialize_c(a: &SparseMatrixCSR, omega: f64, ell: usize) -> Result<DenseMatrix> {
    if ell < 1 {
        return Err(Error::Precondition(
            "at least one inner iteration is required".into(),
        ));
    }
    let m = materialize_m(a, omega)?;
    let l = match cholesky(&m)? {
        CholeskyOutcome::Factor(l) => l,
        CholeskyOutcome::Indefinite { pivot_index, .. } => {
            return Err(Error::Precondition(format!(
                "splitting matrix M is not positive definite (pivot {pivot_index})"
            )));
        }
    };
    let n = m.nrows();
    let k = normal_matrix(a);
    let solve_m = |col: &[f64]| -> Vec<f64> {
        backward_substitute_transposed(&l, &forward_substitute(&l, col))
    };
    let mut m_inv = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let x = solve_m(&e);
        for i in 0..n {
            m_inv.set(i, j, x[i]);
        }
    }
    let mut c = m_inv.clone();
    let mut term = m_inv;
    for _ in 1..ell {
        // term <- H·term = term − M⁻¹(K·term)
        let kt = k.matmul(&term);
        let mut next = term.clone();
        for j in 0..n {
            let col = solve_m(&kt.column(j));
            for i in 0..n {
                next.set(i, j, next.get(i, j) - col[i]);
            }
        }
        term = next;
        for i in 0..n {
            for j in 0..n {
                c.set(i, j, c.get(i, j) + term.get(i, j));
            }
        }
    }
    // the exact operator is symmetric; average away the per-column solve noise
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (c.get(i, j) + c.get(j, i));
            c.set(i, j, avg);
            c.set(j, i, avg);
        }
    }
    Ok(c)
}

/// Semiconvergence radius of the inner-iteration matrix H = I − M⁻¹AᵀA,
/// computed through the symmetric similarity L⁻¹(AᵀA)L⁻ᵀ with M = LLᵀ.
/// When A is rank deficient H holds exact unit eigenvalues on N(AᵀA); those
/// stationary directions carry no error and are excluded, so the returned
/// radius is the one that actually bounds the nonzero eigenvalue cluster.
/// For full column rank this is plainly max |eig(H)|.
pub fn spectral_radius_h(a: &SparseMatrixCSR, omega: f64) -> Result<f64> {
    let m = materialize_m(a, omega)?;
    let l = match cholesky(&m)? {
        CholeskyOutcome::Factor(l) => l,
        CholeskyOutcome::Indefinite { pivot_index, .. } => {
            return Err(Error::Precondition(format!(
                "splitting matrix M is not positive definite (pivot {pivot_index})"
            )));
        }
    };
    let k = normal_matrix(a);
    let n = k.nrows();
    // S = L⁻¹ K L⁻ᵀ, assembled column by column
    let mut x = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let col = forward_substitute(&l, &k.column(j));
        for i in 0..n {
            x.set(i, j, col[i]);
        }
    }
    let mut s = DenseMatrix::zeros(n, n);
    for i in 0..n {
        let row = forward_substitute(&l, x.row(i));
        for j in 0..n {
            s.set(i, j, row[j]);
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (s.get(i, j) + s.get(j, i));
            s.set(i, j, avg);
            s.set(j, i, avg);
        }
    }
    let (mu, _) = dense_symmetric_eig(&s)?; // descending, eig(H) = 1 − μ
    let rank = crate::analysis::numerical_rank(a, None)?;
    let rho = mu
        .iter()
        .take(rank)
        .fold(0.0f64, |r, &m| r.max((1.0 - m).abs()));
    Ok(rho.min(1.0))
}
