//! Deterministic generators for the test problems: a 128x128 singular matrix
//! with graded spectrum whose range and nullspace intersect trivially (the
//! "GP" matrix, for group-invertible), an index-2 variant of it, seeded
//! right-hand sides with a controlled inconsistent part, and random
//! range-symmetric matrices for property tests.
//!
//! Reproducibility contract: all randomness comes from ChaCha12 seeded with
//! the given 64-bit value; uniform doubles are `(next_u64() >> 11) * 2^-53`,
//! so outputs are bit-identical across platforms.

use std::path::PathBuf;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::dense::{norm2, DenseMatrix};
use crate::error::{Error, Result};
use crate::market::read_matrix_market;
use crate::sparse::SparseMatrixCSR;

pub const DEFAULT_NOISE: f64 = 0.01;

/// Exact-arithmetic rank of the graded test matrix, any exponents.
pub const GP_STRUCTURAL_RANK: usize = 64;
/// Exact-arithmetic rank of the index-2 variant. With strong grading some
/// graded diagonal entries fall below the default rank tolerance, so the
/// numerical rank is reported separately.
pub const INDEX2_STRUCTURAL_RANK: usize = 80;

/// k x k Jordan block: `lambda` on the diagonal, 1 on the superdiagonal.
pub fn jordan_block(k: usize, lambda: f64) -> DenseMatrix {
    assert!(k >= 1, "jordan_block needs k >= 1");
    let mut m = DenseMatrix::zeros(k, k);
    for i in 0..k {
        m.set(i, i, lambda);
        if i + 1 < k {
            m.set(i, i + 1, 1.0);
        }
    }
    m
}

/// 16 values interpolating from 1 down to 10^-rho with a 0.7 decay factor.
fn alpha_seq(rho: f64) -> [f64; 16] {
    let first = 1.0;
    let last = 10f64.powf(-rho);
    std::array::from_fn(|idx| {
        let j = idx + 1;
        last + ((16 - j) as f64 / 15.0) * (first - last) * 0.7f64.powi(j as i32 - 1)
    })
}

/// 32 values interpolating from 1 down to 10^-gamma with a 0.2 decay factor.
fn beta_seq(gamma: f64) -> [f64; 32] {
    let first = 1.0;
    let last = 10f64.powf(-gamma);
    std::array::from_fn(|idx| {
        let i = idx + 1;
        last + ((32 - i) as f64 / 31.0) * (first - last) * 0.2f64.powi(i as i32 - 1)
    })
}

/// Upper block triangular test matrix
///
///   A = | A11 A12 |   A11 = diag(W, D),  W = blockdiag(J2(a1)..J2(a16)),
///       |  0   0  |   D = diag(b1..b32), A12 = blockdiag(J2(b1)..J2(b32)),
///
/// 128x128 with rank 64. The alphas run from 1 to 10^-rho and the betas from
/// 1 to 10^-gamma, so rho and gamma set the effective condition number. The
/// range and nullspace intersect only at zero (index 1), which makes the
/// matrix group invertible, but it is not range symmetric.
pub fn gp_matrix(rho: f64, gamma: f64) -> SparseMatrixCSR {
    assert!(rho.is_finite() && gamma.is_finite(), "exponents must be finite");
    SparseMatrixCSR::from_coordinates(&gp_triplets(rho, gamma), 128, 128)
        .expect("generator emits finite in-range entries")
}

fn gp_triplets(rho: f64, gamma: f64) -> Vec<(usize, usize, f64)> {
    let alphas = alpha_seq(rho);
    let betas = beta_seq(gamma);
    let mut trips = Vec::with_capacity(176);
    for (j, &al) in alphas.iter().enumerate() {
        let o = 2 * j;
        trips.push((o, o, al));
        trips.push((o, o + 1, 1.0));
        trips.push((o + 1, o + 1, al));
    }
    for (i, &be) in betas.iter().enumerate() {
        trips.push((32 + i, 32 + i, be));
    }
    for (i, &be) in betas.iter().enumerate() {
        let r = 2 * i;
        let c = 64 + 2 * i;
        trips.push((r, c, be));
        trips.push((r, c + 1, 1.0));
        trips.push((r + 1, c + 1, be));
    }
    trips
}

/// The index-2 variant: same upper blocks, plus a nilpotent lower-right block
/// with unit entries at the (2i-1, 2i) positions (1-based, i = 1..16), so
/// rank(A^2) = rank(A^3) < rank(A).
pub fn index2_matrix(rho: f64, gamma: f64) -> SparseMatrixCSR {
    assert!(rho.is_finite() && gamma.is_finite(), "exponents must be finite");
    let mut trips = gp_triplets(rho, gamma);
    for i in 1..=16usize {
        trips.push((64 + 2 * i - 2, 64 + 2 * i - 1, 1.0));
    }
    SparseMatrixCSR::from_coordinates(&trips, 128, 128)
        .expect("generator emits finite in-range entries")
}

/// n i.i.d. uniform [0,1) samples from the seeded generator.
pub fn uniform_vector(n: usize, seed: u64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::Precondition("uniform_vector needs n >= 1".into()));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    Ok((0..n).map(|_| next_unit(&mut rng)).collect())
}

fn next_unit(rng: &mut ChaCha12Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal sample by Box-Muller; the uniform is shifted into (0,1]
/// so the logarithm is always finite.
fn next_gaussian(rng: &mut ChaCha12Rng) -> f64 {
    let u1 = ((rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
    let u2 = next_unit(rng);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// b = A1/‖A1‖ + noise · u/‖u‖ with 1 the all-ones vector and u seeded
/// uniform noise: a consistent part at unit norm plus a perturbation of
/// exactly the requested size, generally not in the range of A.
pub fn make_rhs_inconsistent(a: &SparseMatrixCSR, noise: f64, seed: u64) -> Result<Vec<f64>> {
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::Precondition(format!(
            "noise must be finite and nonnegative, got {noise}"
        )));
    }
    let ones = vec![1.0; a.ncols()];
    let a1 = a.matvec(&ones)?;
    let na1 = norm2(&a1);
    if na1 == 0.0 {
        return Err(Error::DegenerateInput(
            "the all-ones vector lies in the nullspace, no consistent part".into(),
        ));
    }
    let mut b: Vec<f64> = a1.iter().map(|v| v / na1).collect();
    if noise > 0.0 {
        let u = uniform_vector(a.nrows(), seed)?;
        let nu = norm2(&u);
        if nu == 0.0 {
            return Err(Error::DegenerateInput("noise vector came out zero".into()));
        }
        for (bi, ui) in b.iter_mut().zip(&u) {
            *bi += noise * ui / nu;
        }
    }
    Ok(b)
}

/// Random orthogonal matrix as a product of `dim` Householder reflections.
fn random_orthogonal(dim: usize, rng: &mut ChaCha12Rng) -> DenseMatrix {
    let mut q = DenseMatrix::identity(dim);
    for _ in 0..dim {
        let v: Vec<f64> = (0..dim).map(|_| next_gaussian(rng)).collect();
        let vv = crate::dense::dot(&v, &v);
        if vv == 0.0 {
            continue;
        }
        // q <- (I - 2vv^T/v^Tv) q, column by column
        for j in 0..dim {
            let mut vc = 0.0;
            for i in 0..dim {
                vc += v[i] * q.get(i, j);
            }
            let f = 2.0 * vc / vv;
            for i in 0..dim {
                q.set(i, j, q.get(i, j) - f * v[i]);
            }
        }
    }
    q
}

/// A = Q diag(A11, 0) Qᵀ with Q random orthogonal and A11 an r x r
/// nonsingular block with log-spaced singular values from 1 down to 1/cond.
/// The range and transposed range coincide by construction.
pub fn random_range_symmetric(
    n: usize,
    r: usize,
    cond: f64,
    seed: u64,
) -> Result<SparseMatrixCSR> {
    if r < 1 || r > n {
        return Err(Error::Precondition(format!(
            "rank must satisfy 1 <= r <= n, got r={r}, n={n}"
        )));
    }
    if !(cond >= 1.0 && cond.is_finite()) {
        return Err(Error::Precondition(format!(
            "condition target must be finite and >= 1, got {cond}"
        )));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let u = random_orthogonal(r, &mut rng);
    let v = random_orthogonal(r, &mut rng);
    let mut a11 = DenseMatrix::zeros(r, r);
    for i in 0..r {
        for j in 0..r {
            let mut acc = 0.0;
            for k in 0..r {
                let sigma = if r == 1 {
                    1.0
                } else {
                    cond.powf(-(k as f64) / (r as f64 - 1.0))
                };
                acc += u.get(i, k) * sigma * v.get(j, k);
            }
            a11.set(i, j, acc);
        }
    }
    let q = random_orthogonal(n, &mut rng);
    // full = Q [[A11, 0], [0, 0]] Qᵀ assembled as (Q_r A11) (Q_r)ᵀ with Q_r
    // the first r columns of Q
    let mut qa = DenseMatrix::zeros(n, r);
    for i in 0..n {
        for j in 0..r {
            let mut acc = 0.0;
            for k in 0..r {
                acc += q.get(i, k) * a11.get(k, j);
            }
            qa.set(i, j, acc);
        }
    }
    let mut trips = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for k in 0..r {
                acc += qa.get(i, k) * q.get(j, k);
            }
            if acc != 0.0 {
                trips.push((i, j, acc));
            }
        }
    }
    SparseMatrixCSR::from_coordinates(&trips, n, n)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProblemFamily {
    Gp,
    Index2,
    MatrixMarket,
    RandomRangeSym,
}

/// Everything needed to build a test instance deterministically.
#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub family: ProblemFamily,
    pub rho: f64,
    pub gamma: f64,
    pub noise: f64,
    pub seed: u64,
    pub path: Option<PathBuf>,
    /// Rank of the random range-symmetric family.
    pub rank_r: usize,
    /// Dimension of the random range-symmetric family.
    pub dim: usize,
    /// Condition target of the random range-symmetric family.
    pub cond: f64,
}

impl Default for ProblemSpec {
    fn default() -> Self {
        ProblemSpec {
            family: ProblemFamily::Gp,
            rho: 12.0,
            gamma: 12.0,
            noise: DEFAULT_NOISE,
            seed: 1,
            path: None,
            rank_r: 0,
            dim: 0,
            cond: 1.0,
        }
    }
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<()> {
        match self.family {
            ProblemFamily::Gp | ProblemFamily::Index2 => {
                if !(self.rho > 0.0 && self.rho.is_finite())
                    || !(self.gamma > 0.0 && self.gamma.is_finite())
                {
                    return Err(Error::Precondition(format!(
                        "rho and gamma must be positive and finite, got {} and {}",
                        self.rho, self.gamma
                    )));
                }
            }
            ProblemFamily::MatrixMarket => {
                if self.path.is_none() {
                    return Err(Error::Precondition(
                        "matrix-market problems need a file path".into(),
                    ));
                }
            }
            ProblemFamily::RandomRangeSym => {
                if self.rank_r < 1 || self.rank_r > self.dim {
                    return Err(Error::Precondition(format!(
                        "rank must satisfy 1 <= r <= n, got r={}, n={}",
                        self.rank_r, self.dim
                    )));
                }
            }
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::Precondition(format!(
                "noise must be finite and nonnegative, got {}",
                self.noise
            )));
        }
        Ok(())
    }

    pub fn build_matrix(&self) -> Result<SparseMatrixCSR> {
        self.validate()?;
        match self.family {
            ProblemFamily::Gp => Ok(gp_matrix(self.rho, self.gamma)),
            ProblemFamily::Index2 => Ok(index2_matrix(self.rho, self.gamma)),
            ProblemFamily::MatrixMarket => {
                read_matrix_market(self.path.as_ref().expect("validated above"))
            }
            ProblemFamily::RandomRangeSym => {
                random_range_symmetric(self.dim, self.rank_r, self.cond, self.seed)
            }
        }
    }
}
