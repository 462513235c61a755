//! Convergence diagnostics and spectral verification: per-iteration history
//! with CSV export and lossless re-import, normal-equations residual ratios,
//! numerical rank, nullspace components of computed solutions, and an
//! eigenvalue clustering check for the inner-iteration preconditioned
//! operator.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::dense::{cholesky, dense_svd, dense_symmetric_eig, dot, norm2};
use crate::error::{Error, Result};
use crate::precond::{materialize_c, normal_matrix, spectral_radius_h};
use crate::sparse::SparseMatrixCSR;

pub const HISTORY_CSV_HEADER: &str = "iteration,res_norm,ne_res_rel,elapsed_sec";

/// Rows this close (relatively) to the global minimum count as attaining it,
/// so plateaus report their first iteration instead of a roundoff-chosen one.
const MIN_NE_BAND: f64 = 1e-6;

/// Eigenvalues at most this fraction of the largest one are classified as the
/// stationary (nullspace) group before the clustering interval is applied.
const ZERO_EIG_RTOL: f64 = 1e-8;

/// Absolute padding added to both clustering interval endpoints to absorb
/// eigensolver roundoff.
const INTERVAL_PAD: f64 = 1e-8;

/// One record per outer iteration: the true residual norm ‖b − Ax_k‖₂, the
/// stopping ratio ‖Aᵀr_k‖₂/‖Aᵀb‖₂, and cumulative solver work in seconds.
/// The work clock covers the matrix products, orthogonalization, and the
/// small least-squares update, not the evaluation of the two norms above.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HistoryRow {
    pub iteration: usize,
    pub res_norm: f64,
    pub ne_res_rel: f64,
    pub elapsed_sec: f64,
}

#[derive(Clone, Debug, Default)]
pub struct ConvergenceHistory {
    rows: Vec<HistoryRow>,
}

impl ConvergenceHistory {
    pub fn new() -> Self {
        ConvergenceHistory { rows: Vec::new() }
    }

    pub fn push(&mut self, iteration: usize, res_norm: f64, ne_res_rel: f64, elapsed_sec: f64) {
        self.rows.push(HistoryRow {
            iteration,
            res_norm,
            ne_res_rel,
            elapsed_sec,
        });
    }

    pub fn rows(&self) -> &[HistoryRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn last(&self) -> Option<&HistoryRow> {
        self.rows.last()
    }

    /// Smallest normal-equations residual ratio and the iteration that first
    /// attains it, where "attains" means within a small relative band of the
    /// global minimum. Long flat plateaus therefore report their first
    /// iteration rather than whichever later row roundoff happened to favor.
    pub fn min_ne(&self) -> Option<(f64, usize)> {
        if self.rows.is_empty() {
            return None;
        }
        let min = self
            .rows
            .iter()
            .map(|r| r.ne_res_rel)
            .fold(f64::INFINITY, f64::min);
        self.rows
            .iter()
            .find(|r| r.ne_res_rel <= min * (1.0 + MIN_NE_BAND))
            .map(|r| (r.ne_res_rel, r.iteration))
    }

    /// Clears the elapsed-time column. Exported files become byte-identical
    /// across runs with identical inputs.
    pub fn zero_elapsed(&mut self) {
        for r in &mut self.rows {
            r.elapsed_sec = 0.0;
        }
    }
}

/// ‖Aᵀ(b − Ax)‖ / ‖Aᵀb‖, the stopping quantity for least-squares problems.
/// Errors with `DegenerateInput` when Aᵀb = 0 (b orthogonal to the range of
/// A), since then x = 0 is already a least-squares solution and the ratio is
/// undefined.
pub fn ne_residual_ratio(a: &SparseMatrixCSR, b: &[f64], x: &[f64]) -> Result<f64> {
    let atb = a.matvec_transpose(b)?;
    let natb = norm2(&atb);
    if natb == 0.0 {
        return Err(Error::DegenerateInput(
            "right-hand side is orthogonal to the range of the matrix".into(),
        ));
    }
    let ax = a.matvec(x)?;
    let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let atr = a.matvec_transpose(&r)?;
    Ok(norm2(&atr) / natb)
}

/// Number of singular values above the tolerance, which defaults to
/// max(m, n) · ε · σ₁.
pub fn numerical_rank(a: &SparseMatrixCSR, tol: Option<f64>) -> Result<usize> {
    let (_, sigma, _) = dense_svd(&a.to_dense())?;
    if sigma.is_empty() || sigma[0] == 0.0 {
        return Ok(0);
    }
    let tol = tol.unwrap_or(a.nrows().max(a.ncols()) as f64 * f64::EPSILON * sigma[0]);
    Ok(sigma.iter().filter(|&&s| s > tol).count())
}

/// Norm of the nullspace component of x, measured against the numerical
/// nullspace of A (right singular vectors past the numerical rank).
pub fn nullspace_component(a: &SparseMatrixCSR, x: &[f64]) -> Result<f64> {
    let n = a.ncols();
    if x.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "vector has length {}, expected {n}",
            x.len()
        )));
    }
    let (_, sigma, v) = dense_svd(&a.to_dense())?;
    let rank = if sigma.is_empty() || sigma[0] == 0.0 {
        0
    } else {
        let tol = a.nrows().max(n) as f64 * f64::EPSILON * sigma[0];
        sigma.iter().filter(|&&s| s > tol).count()
    };
    let mut p = x.to_vec();
    for i in 0..rank {
        let vi = v.column(i);
        let c = dot(&vi, &p);
        for (pj, vj) in p.iter_mut().zip(&vi) {
            *pj -= c * vj;
        }
    }
    Ok(norm2(&p))
}

#[derive(Clone, Copy, Debug)]
pub struct SpectralReport {
    /// Numerical rank of the matrix; the expected number of nonzero
    /// eigenvalues of the preconditioned normal operator.
    pub rank: usize,
    /// Semiconvergence radius of the inner-iteration matrix.
    pub rho: f64,
    /// Clustering interval endpoints, padded by a small absolute slack.
    pub lo: f64,
    pub hi: f64,
    /// How many of the `rank` largest eigenvalues land inside [lo, hi].
    pub inside: usize,
    /// Violations: top-`rank` eigenvalues off the interval plus remainder
    /// eigenvalues that are not numerically zero. Zero when the clustering
    /// claim holds.
    pub outside: usize,
    /// Remainder (nullspace-group) eigenvalues that are numerically zero.
    pub zero_count: usize,
    /// Largest magnitude within the nullspace group, 0 when it is empty.
    pub zero_max_magnitude: f64,
}

/// Computes the spectrum of C^(ℓ)AᵀA for the NR-SSOR inner iteration and
/// classifies it: the `rank` largest eigenvalues must fall in [1 − ρ^ℓ, 1]
/// (ℓ even) or [1 − ρ^ℓ, 1 + ρ^ℓ] (ℓ odd) with ρ the semiconvergence radius,
/// and the remaining ones belong to the nullspace of A and must vanish. The
/// spectrum is obtained from the symmetric form Lᵀ(AᵀA)L with C = LLᵀ, which
/// shares it.
pub fn verify_clustering(a: &SparseMatrixCSR, omega: f64, ell: usize) -> Result<SpectralReport> {
    let c = materialize_c(a, omega, ell)?;
    let l = match cholesky(&c)? {
        crate::dense::CholeskyOutcome::Factor(l) => l,
        crate::dense::CholeskyOutcome::Indefinite { pivot_index, .. } => {
            return Err(Error::Precondition(format!(
                "inner-iteration operator is not positive definite (pivot {pivot_index})"
            )));
        }
    };
    let k = normal_matrix(a);
    let s = {
        let kl = k.matmul(&l);
        let mut s = l.transpose().matmul(&kl);
        let n = s.nrows();
        for i in 0..n {
            for j in (i + 1)..n {
                let avg = 0.5 * (s.get(i, j) + s.get(j, i));
                s.set(i, j, avg);
                s.set(j, i, avg);
            }
        }
        s
    };
    let (eigs, _) = dense_symmetric_eig(&s)?;
    let lambda_max = eigs.iter().fold(0.0f64, |m, &e| m.max(e.abs()));
    let rank = numerical_rank(a, None)?;
    let rho = spectral_radius_h(a, omega)?;
    let spread = rho.powi(ell as i32);
    let lo = 1.0 - spread - INTERVAL_PAD;
    let hi = 1.0 + if ell % 2 == 1 { spread } else { 0.0 } + INTERVAL_PAD;
    // split by rank, not magnitude: the smallest clustered eigenvalue sits at
    // the interval endpoint 1 - rho^ell, which for strongly graded spectra is
    // numerically indistinguishable from zero, yet it still counts as
    // clustered as long as it stays inside the padded interval
    let mut inside = 0;
    let mut outside = 0;
    let mut zero_count = 0;
    let mut zero_max: f64 = 0.0;
    for (idx, &e) in eigs.iter().enumerate() {
        if idx < rank {
            if lo <= e && e <= hi {
                inside += 1;
            } else {
                outside += 1;
            }
        } else if e.abs() <= ZERO_EIG_RTOL * lambda_max {
            zero_count += 1;
            zero_max = zero_max.max(e.abs());
        } else {
            outside += 1;
        }
    }
    Ok(SpectralReport {
        rank,
        rho,
        lo,
        hi,
        inside,
        outside,
        zero_count,
        zero_max_magnitude: zero_max,
    })
}

fn write_history<W: Write>(history: &ConvergenceHistory, out: &mut W) -> io::Result<()> {
    writeln!(out, "{HISTORY_CSV_HEADER}")?;
    for r in history.rows() {
        writeln!(
            out,
            "{},{:e},{:e},{:e}",
            r.iteration, r.res_norm, r.ne_res_rel, r.elapsed_sec
        )?;
    }
    Ok(())
}

pub fn export_history_csv(history: &ConvergenceHistory, path: &Path) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    let mut out = BufWriter::new(file);
    write_history(history, &mut out).map_err(io_err)?;
    out.flush().map_err(io_err)
}

/// Parses text produced by [`export_history_csv`]. Float fields round-trip
/// exactly because the writer emits shortest-form scientific notation.
pub fn parse_history_csv(text: &str) -> Result<ConvergenceHistory> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, first)) if first.trim_end() == HISTORY_CSV_HEADER => {}
        Some((_, first)) => {
            return Err(Error::Parse {
                line: 1,
                msg: format!("expected header '{HISTORY_CSV_HEADER}', got '{}'", first.trim_end()),
            })
        }
        None => {
            return Err(Error::Parse {
                line: 1,
                msg: "empty file".into(),
            })
        }
    }
    let mut history = ConvergenceHistory::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected 4 comma-separated fields, got {}", fields.len()),
            });
        }
        let iteration: usize = fields[0].parse().map_err(|e| Error::Parse {
            line: line_no,
            msg: format!("bad iteration index '{}': {e}", fields[0]),
        })?;
        let mut nums = [0.0f64; 3];
        for (slot, field) in nums.iter_mut().zip(&fields[1..]) {
            let v: f64 = field.parse().map_err(|e| Error::Parse {
                line: line_no,
                msg: format!("bad float '{field}': {e}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("non-finite value '{field}'"),
                });
            }
            *slot = v;
        }
        history.push(iteration, nums[0], nums[1], nums[2]);
    }
    Ok(history)
}

pub fn read_history_csv(path: &Path) -> Result<ConvergenceHistory> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut text = String::new();
    BufReader::new(file)
        .read_to_string(&mut text)
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
    parse_history_csv(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::{RngCore, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn uniform(rng: &mut ChaCha12Rng) -> f64 {
        (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    #[test]
    fn min_ne_picks_first_row_on_a_plateau() {
        let mut h = ConvergenceHistory::new();
        h.push(0, 1.0, 1e-3, 0.0);
        h.push(1, 0.5, 5.0e-7, 0.0);
        h.push(2, 0.4, 5.0000001e-7, 0.0);
        h.push(3, 0.3, 4.9999999e-7, 0.0);
        let (value, iter) = h.min_ne().unwrap();
        assert_eq!(iter, 1, "first iteration within the plateau band");
        assert_eq!(value, 5.0e-7);
    }

    #[test]
    fn min_ne_empty_and_single() {
        assert!(ConvergenceHistory::new().min_ne().is_none());
        let mut h = ConvergenceHistory::new();
        h.push(0, 1.0, 0.25, 0.0);
        assert_eq!(h.min_ne().unwrap(), (0.25, 0));
    }

    #[test]
    fn ne_ratio_is_zero_at_solution_and_one_at_origin() {
        let a = SparseMatrixCSR::from_coordinates(&[(0, 0, 1.0), (1, 1, 2.0)], 2, 2).unwrap();
        let b = [1.0, 2.0];
        assert_eq!(ne_residual_ratio(&a, &b, &[1.0, 1.0]).unwrap(), 0.0);
        assert_eq!(ne_residual_ratio(&a, &b, &[0.0, 0.0]).unwrap(), 1.0);
    }

    #[test]
    fn ne_ratio_rejects_rhs_orthogonal_to_range() {
        let a = SparseMatrixCSR::from_coordinates(&[(0, 0, 1.0)], 2, 2).unwrap();
        let err = ne_residual_ratio(&a, &[0.0, 1.0], &[0.0, 0.0]).unwrap_err();
        assert!(matches!(err, Error::DegenerateInput(_)));
    }

    #[test]
    fn numerical_rank_counts_significant_directions() {
        let a = SparseMatrixCSR::from_coordinates(
            &[(0, 0, 1.0), (1, 1, 1e-20), (2, 2, 0.0)],
            3,
            3,
        )
        .unwrap();
        assert_eq!(numerical_rank(&a, None).unwrap(), 1);
        assert_eq!(numerical_rank(&SparseMatrixCSR::identity(4), None).unwrap(), 4);
    }

    #[test]
    fn nullspace_component_of_diagonal_matrix() {
        let a =
            SparseMatrixCSR::from_coordinates(&[(0, 0, 1.0), (1, 1, 2.0), (2, 2, 0.0)], 3, 3)
                .unwrap();
        let full = nullspace_component(&a, &[1.0, 1.0, 1.0]).unwrap();
        assert!((full - 1.0).abs() < 1e-12);
        let none = nullspace_component(&a, &[1.0, 1.0, 0.0]).unwrap();
        assert!(none < 1e-12);
    }

    #[test]
    fn clustering_holds_for_full_rank_matrix() {
        let mut rng = ChaCha12Rng::seed_from_u64(71);
        let mut trips = Vec::new();
        for i in 0..6 {
            for j in 0..4 {
                trips.push((i, j, 2.0 * uniform(&mut rng) - 1.0));
            }
        }
        let a = SparseMatrixCSR::from_coordinates(&trips, 6, 4).unwrap();
        for ell in [1, 2, 3] {
            let rep = verify_clustering(&a, 1.0, ell).unwrap();
            assert_eq!(rep.rank, 4);
            assert_eq!(rep.zero_count, 0, "ell={ell}");
            assert_eq!(rep.outside, 0, "ell={ell}");
            assert_eq!(rep.inside, 4, "ell={ell}");
            assert!(rep.rho < 1.0);
        }
    }

    #[test]
    fn clustering_separates_nullspace_group_for_rank_deficient_matrix() {
        // third column is the sum of the first two: rank 2, no zero column
        let mut trips = Vec::new();
        let rows = [
            [1.0, 0.5, 1.5],
            [0.2, 1.0, 1.2],
            [0.0, 0.3, 0.3],
            [0.7, 0.1, 0.8],
        ];
        for (i, r) in rows.iter().enumerate() {
            for (j, &v) in r.iter().enumerate() {
                trips.push((i, j, v));
            }
        }
        let a = SparseMatrixCSR::from_coordinates(&trips, 4, 3).unwrap();
        let rep = verify_clustering(&a, 1.2, 2).unwrap();
        assert_eq!(rep.rank, 2);
        assert_eq!(rep.zero_count, 1);
        assert_eq!(rep.inside, 2);
        assert_eq!(rep.outside, 0);
        assert!(rep.zero_max_magnitude <= 1e-8 * 3.0);
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let mut rng = ChaCha12Rng::seed_from_u64(73);
        let mut h = ConvergenceHistory::new();
        for k in 0..40 {
            h.push(
                k,
                uniform(&mut rng) * 10f64.powi(k as i32 % 17 - 8),
                uniform(&mut rng) * 10f64.powi(-(k as i32 % 9)),
                uniform(&mut rng),
            );
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("history.csv");
        export_history_csv(&h, &path).unwrap();
        let back = read_history_csv(&path).unwrap();
        assert_eq!(back.len(), h.len());
        for (a, b) in h.rows().iter().zip(back.rows()) {
            assert_eq!(a.iteration, b.iteration);
            assert_eq!(a.res_norm.to_bits(), b.res_norm.to_bits());
            assert_eq!(a.ne_res_rel.to_bits(), b.ne_res_rel.to_bits());
            assert_eq!(a.elapsed_sec.to_bits(), b.elapsed_sec.to_bits());
        }
    }

    #[test]
    fn csv_parser_reports_line_numbers() {
        assert!(matches!(
            parse_history_csv("wrong,header\n"),
            Err(Error::Parse { line: 1, .. })
        ));
        let text = format!("{HISTORY_CSV_HEADER}\n0,1e0,1e0,0e0\n1,2e0,oops,0e0\n");
        match parse_history_csv(&text) {
            Err(Error::Parse { line, msg }) => {
                assert_eq!(line, 3);
                assert!(msg.contains("oops"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
        let text = format!("{HISTORY_CSV_HEADER}\n0,1e0,1e0\n");
        assert!(matches!(
            parse_history_csv(&text),
            Err(Error::Parse { line: 2, .. })
        ));
        let text = format!("{HISTORY_CSV_HEADER}\n0,inf,1e0,0e0\n");
        assert!(matches!(
            parse_history_csv(&text),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn zero_elapsed_clears_only_time_column() {
        let mut h = ConvergenceHistory::new();
        h.push(0, 2.0, 1.0, 0.5);
        h.push(1, 1.0, 0.5, 0.9);
        h.zero_elapsed();
        assert!(h.rows().iter().all(|r| r.elapsed_sec == 0.0));
        assert_eq!(h.rows()[1].res_norm, 1.0);
    }
}
