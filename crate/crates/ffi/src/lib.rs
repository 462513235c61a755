//! C ABI for the solver library: opaque handles, integer status codes, and a
//! thread-local error message. No Rust type crosses the boundary; every
//! fallible entry point returns an `RRG_*` code and stores a message
//! retrievable with `rrg_last_error_message`. Panics are caught at the
//! boundary and reported as `RRG_ERR_PANIC` instead of unwinding into C.
//!
//! The matching header lives in `include/rrgmres.h`.

use std::cell::RefCell;
use std::ffi::{c_char, c_double, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use rrgmres::krylov::{
    ab_solve, gmres, rrgmres as rrgmres_solve, KrylovVariant, SolveOutcome, SolveStatus,
    SolverOptions,
};
use rrgmres::precond::{PrecondKind, RightPreconditioner};
use rrgmres::{Error, SparseMatrixCSR};

pub const RRG_OK: c_int = 0;
pub const RRG_ERR_DIMENSION: c_int = 1;
pub const RRG_ERR_INDEX: c_int = 2;
pub const RRG_ERR_PARSE: c_int = 3;
pub const RRG_ERR_PRECONDITION: c_int = 4;
pub const RRG_ERR_DEGENERATE: c_int = 5;
pub const RRG_ERR_CONTRACT: c_int = 6;
pub const RRG_ERR_IO: c_int = 7;
pub const RRG_ERR_NULL_ARGUMENT: c_int = 8;
pub const RRG_ERR_INVALID_ENUM: c_int = 9;
pub const RRG_ERR_UTF8: c_int = 10;
pub const RRG_ERR_PANIC: c_int = 11;

pub const RRG_METHOD_GMRES: c_int = 0;
pub const RRG_METHOD_RRGMRES: c_int = 1;
pub const RRG_METHOD_AB_GMRES: c_int = 2;
pub const RRG_METHOD_AB_RRGMRES: c_int = 3;

pub const RRG_PRECOND_NONE: c_int = 0;
pub const RRG_PRECOND_AT: c_int = 1;
pub const RRG_PRECOND_DIAG_AT: c_int = 2;
pub const RRG_PRECOND_NRSSOR: c_int = 3;

pub const RRG_STATUS_CONVERGED_NE: c_int = 0;
pub const RRG_STATUS_CONVERGED_RES: c_int = 1;
pub const RRG_STATUS_BREAKDOWN: c_int = 2;
pub const RRG_STATUS_STAGNATED: c_int = 3;
pub const RRG_STATUS_MAX_ITERS: c_int = 4;

/// Opaque sparse matrix handle.
pub struct RrgMatrix(SparseMatrixCSR);

/// Opaque solve-result handle.
pub struct RrgOutcome(SolveOutcome);

/// Plain-old-data options block; `rrg_solve_options_default` fills it.
/// `tol_res <= 0` disables the plain-residual stop; `max_iters == 0` means
/// min(rows, 10000).
#[repr(C)]
pub struct RrgSolveOptions {
    pub method: c_int,
    pub precond: c_int,
    pub inner_iters: usize,
    pub omega: c_double,
    pub tol_ne: c_double,
    pub tol_res: c_double,
    pub max_iters: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let owned = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = owned);
}

fn error_code(e: &Error) -> c_int {
    match e {
        Error::DimensionMismatch(_) => RRG_ERR_DIMENSION,
        Error::IndexOutOfRange(_) => RRG_ERR_INDEX,
        Error::Parse { .. } => RRG_ERR_PARSE,
        Error::Precondition(_) => RRG_ERR_PRECONDITION,
        Error::DegenerateInput(_) => RRG_ERR_DEGENERATE,
        Error::Contract(_) => RRG_ERR_CONTRACT,
        Error::Io { .. } => RRG_ERR_IO,
    }
}

fn fail(e: &Error) -> c_int {
    set_error(&e.to_string());
    error_code(e)
}

fn null_arg(what: &str) -> c_int {
    set_error(&format!("null pointer passed for {what}"));
    RRG_ERR_NULL_ARGUMENT
}

fn guard(f: impl FnOnce() -> c_int) -> c_int {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(code) => code,
        Err(_) => {
            set_error("internal panic caught at the boundary");
            RRG_ERR_PANIC
        }
    }
}

/// Message for the most recent failure on this thread. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn rrg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Builds a matrix from coordinate triplets (duplicate positions are summed).
///
/// # Safety
/// `rows`, `cols`, `values` must point to `nnz` readable elements; `out`
/// must be a valid destination for one pointer.
#[no_mangle]
pub unsafe extern "C" fn rrg_matrix_from_triplets(
    rows: *const usize,
    cols: *const usize,
    values: *const c_double,
    nnz: usize,
    nrows: usize,
    ncols: usize,
    out: *mut *mut RrgMatrix,
) -> c_int {
    if out.is_null() {
        return null_arg("out");
    }
    if nnz > 0 && (rows.is_null() || cols.is_null() || values.is_null()) {
        return null_arg("triplet arrays");
    }
    guard(|| {
        let trips: Vec<(usize, usize, f64)> = (0..nnz)
            .map(|k| (*rows.add(k), *cols.add(k), *values.add(k)))
            .collect();
        match SparseMatrixCSR::from_coordinates(&trips, nrows, ncols) {
            Ok(a) => {
                *out = Box::into_raw(Box::new(RrgMatrix(a)));
                RRG_OK
            }
            Err(e) => fail(&e),
        }
    })
}

/// Reads a Matrix Market coordinate file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be a valid destination
/// for one pointer.
#[no_mangle]
pub unsafe extern "C" fn rrg_matrix_read_market(
    path: *const c_char,
    out: *mut *mut RrgMatrix,
) -> c_int {
    if path.is_null() {
        return null_arg("path");
    }
    if out.is_null() {
        return null_arg("out");
    }
    guard(|| {
        let Ok(path) = CStr::from_ptr(path).to_str() else {
            set_error("path is not valid UTF-8");
            return RRG_ERR_UTF8;
        };
        match rrgmres::market::read_matrix_market(path) {
            Ok(a) => {
                *out = Box::into_raw(Box::new(RrgMatrix(a)));
                RRG_OK
            }
            Err(e) => fail(&e),
        }
    })
}

/// # Safety
/// `m` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn rrg_matrix_nrows(m: *const RrgMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.0.nrows())
}

/// # Safety
/// `m` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn rrg_matrix_ncols(m: *const RrgMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.0.ncols())
}

/// # Safety
/// `m` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn rrg_matrix_nnz(m: *const RrgMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.0.nnz())
}

/// Releases a matrix handle; null is accepted and ignored.
///
/// # Safety
/// `m` must be null or a live handle from this library, not freed before.
#[no_mangle]
pub unsafe extern "C" fn rrg_matrix_free(m: *mut RrgMatrix) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Fills the default configuration: range-restricted composed method with
/// one inner sweep, omega 1, stopping ratio 1e-7.
///
/// # Safety
/// `opts` must be a valid destination for one options block.
#[no_mangle]
pub unsafe extern "C" fn rrg_solve_options_default(opts: *mut RrgSolveOptions) -> c_int {
    if opts.is_null() {
        return null_arg("opts");
    }
    *opts = RrgSolveOptions {
        method: RRG_METHOD_AB_RRGMRES,
        precond: RRG_PRECOND_NRSSOR,
        inner_iters: 1,
        omega: 1.0,
        tol_ne: 1e-7,
        tol_res: 0.0,
        max_iters: 0,
    };
    RRG_OK
}

/// Runs the configured solver on `b` and hands back an outcome handle.
///
/// # Safety
/// `matrix` must be a live handle; `b` must point to `b_len` readable
/// doubles; `opts` may be null for defaults; `out` must be a valid
/// destination for one pointer.
#[no_mangle]
pub unsafe extern "C" fn rrg_solve(
    matrix: *const RrgMatrix,
    b: *const c_double,
    b_len: usize,
    opts: *const RrgSolveOptions,
    out: *mut *mut RrgOutcome,
) -> c_int {
    let Some(matrix) = matrix.as_ref() else {
        return null_arg("matrix");
    };
    if b.is_null() {
        return null_arg("b");
    }
    if out.is_null() {
        return null_arg("out");
    }
    let mut defaults = RrgSolveOptions {
        method: 0,
        precond: 0,
        inner_iters: 0,
        omega: 0.0,
        tol_ne: 0.0,
        tol_res: 0.0,
        max_iters: 0,
    };
    rrg_solve_options_default(&mut defaults);
    let opts = opts.as_ref().unwrap_or(&defaults);
    guard(|| {
        let a = &matrix.0;
        let rhs = std::slice::from_raw_parts(b, b_len);
        let solver_opts = SolverOptions {
            tol_ne: opts.tol_ne,
            tol_res: (opts.tol_res > 0.0).then_some(opts.tol_res),
            max_iters: if opts.max_iters == 0 {
                a.nrows().min(10_000)
            } else {
                opts.max_iters
            },
            ..SolverOptions::default()
        };
        let kind = match opts.precond {
            RRG_PRECOND_NONE => None,
            RRG_PRECOND_AT => Some(PrecondKind::At),
            RRG_PRECOND_DIAG_AT => Some(PrecondKind::DiagAt),
            RRG_PRECOND_NRSSOR => Some(PrecondKind::Nrssor),
            other => {
                set_error(&format!("unknown preconditioner code {other}"));
                return RRG_ERR_INVALID_ENUM;
            }
        };
        let result = match (opts.method, kind) {
            (RRG_METHOD_GMRES, None) => gmres(a, rhs, None, &solver_opts),
            (RRG_METHOD_RRGMRES, None) => rrgmres_solve(a, rhs, None, &solver_opts),
            (RRG_METHOD_AB_GMRES | RRG_METHOD_AB_RRGMRES, Some(kind)) => {
                let variant = if opts.method == RRG_METHOD_AB_GMRES {
                    KrylovVariant::Residual
                } else {
                    KrylovVariant::RangeRestricted
                };
                RightPreconditioner::new(kind, a, opts.omega, opts.inner_iters)
                    .and_then(|prec| ab_solve(a, &prec, variant, rhs, None, &solver_opts))
            }
            (RRG_METHOD_GMRES | RRG_METHOD_RRGMRES, Some(_)) => {
                set_error("plain methods run unpreconditioned; use an ab method");
                return RRG_ERR_PRECONDITION;
            }
            (RRG_METHOD_AB_GMRES | RRG_METHOD_AB_RRGMRES, None) => {
                set_error("composed methods need a preconditioner");
                return RRG_ERR_PRECONDITION;
            }
            (other, _) => {
                set_error(&format!("unknown method code {other}"));
                return RRG_ERR_INVALID_ENUM;
            }
        };
        match result {
            Ok(o) => {
                *out = Box::into_raw(Box::new(RrgOutcome(o)));
                RRG_OK
            }
            Err(e) => fail(&e),
        }
    })
}

/// # Safety
/// `o` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn rrg_outcome_status(o: *const RrgOutcome) -> c_int {
    match o.as_ref() {
        None => -1,
        Some(o) => match o.0.status {
            SolveStatus::ConvergedNe => RRG_STATUS_CONVERGED_NE,
            SolveStatus::ConvergedRes => RRG_STATUS_CONVERGED_RES,
            SolveStatus::HappyBreakdown => RRG_STATUS_BREAKDOWN,
            SolveStatus::Stagnated => RRG_STATUS_STAGNATED,
            SolveStatus::MaxIters => RRG_STATUS_MAX_ITERS,
        },
    }
}

/// # Safety
/// `o` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn rrg_outcome_iterations(o: *const RrgOutcome) -> usize {
    o.as_ref().map_or(0, |o| o.0.iterations)
}

/// Final stopping ratio; NaN for a null handle.
///
/// # Safety
/// `o` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn rrg_outcome_final_ne(o: *const RrgOutcome) -> c_double {
    o.as_ref().map_or(f64::NAN, |o| o.0.final_ne)
}

/// # Safety
/// `o` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn rrg_outcome_solution_len(o: *const RrgOutcome) -> usize {
    o.as_ref().map_or(0, |o| o.0.x.len())
}

/// Copies the solution into `buf`, which must hold exactly
/// `rrg_outcome_solution_len` doubles.
///
/// # Safety
/// `o` must be a live handle; `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn rrg_outcome_solution(
    o: *const RrgOutcome,
    buf: *mut c_double,
    len: usize,
) -> c_int {
    let Some(o) = o.as_ref() else {
        return null_arg("outcome");
    };
    if buf.is_null() {
        return null_arg("buf");
    }
    if len != o.0.x.len() {
        set_error(&format!(
            "buffer holds {len} entries, the solution has {}",
            o.0.x.len()
        ));
        return RRG_ERR_DIMENSION;
    }
    std::slice::from_raw_parts_mut(buf, len).copy_from_slice(&o.0.x);
    RRG_OK
}

/// # Safety
/// `o` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn rrg_outcome_history_len(o: *const RrgOutcome) -> usize {
    o.as_ref().map_or(0, |o| o.0.history.len())
}

/// Reads one history record. Any of the output pointers may be null to skip
/// that field.
///
/// # Safety
/// `o` must be a live handle; non-null output pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn rrg_outcome_history_row(
    o: *const RrgOutcome,
    idx: usize,
    iteration: *mut usize,
    res_norm: *mut c_double,
    ne_res_rel: *mut c_double,
    elapsed_sec: *mut c_double,
) -> c_int {
    let Some(o) = o.as_ref() else {
        return null_arg("outcome");
    };
    let Some(row) = o.0.history.rows().get(idx) else {
        set_error(&format!(
            "history index {idx} out of range 0..{}",
            o.0.history.len()
        ));
        return RRG_ERR_INDEX;
    };
    if !iteration.is_null() {
        *iteration = row.iteration;
    }
    if !res_norm.is_null() {
        *res_norm = row.res_norm;
    }
    if !ne_res_rel.is_null() {
        *ne_res_rel = row.ne_res_rel;
    }
    if !elapsed_sec.is_null() {
        *elapsed_sec = row.elapsed_sec;
    }
    RRG_OK
}

/// Releases an outcome handle; null is accepted and ignored.
///
/// # Safety
/// `o` must be null or a live handle from this library, not freed before.
#[no_mangle]
pub unsafe extern "C" fn rrg_outcome_free(o: *mut RrgOutcome) {
    if !o.is_null() {
        drop(Box::from_raw(o));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ptr;

    unsafe fn build_nilpotent() -> *mut RrgMatrix {
        let rows = [0usize];
        let cols = [1usize];
        let vals = [1.0f64];
        let mut m: *mut RrgMatrix = ptr::null_mut();
        let code = rrg_matrix_from_triplets(
            rows.as_ptr(),
            cols.as_ptr(),
            vals.as_ptr(),
            1,
            2,
            2,
            &mut m,
        );
        assert_eq!(code, RRG_OK);
        m
    }

    #[test]
    fn solves_the_least_squares_problem_through_the_c_surface() {
        unsafe {
            let m = build_nilpotent();
            assert_eq!(rrg_matrix_nrows(m), 2);
            assert_eq!(rrg_matrix_nnz(m), 1);
            let b = [1.0f64, 0.0];
            let mut opts = std::mem::zeroed::<RrgSolveOptions>();
            assert_eq!(rrg_solve_options_default(&mut opts), RRG_OK);
            // the test matrix has a zero column, which the default inner
            // sweep rejects; the plain transpose preconditioner accepts it
            opts.precond = RRG_PRECOND_AT;
            opts.tol_ne = 1e-12;
            let mut out: *mut RrgOutcome = ptr::null_mut();
            assert_eq!(rrg_solve(m, b.as_ptr(), 2, &opts, &mut out), RRG_OK);
            assert_eq!(rrg_outcome_status(out), RRG_STATUS_CONVERGED_NE);
            let mut x = [0.0f64; 2];
            assert_eq!(rrg_outcome_solution(out, x.as_mut_ptr(), 2), RRG_OK);
            assert!(x[0].abs() < 1e-10 && (x[1] - 1.0).abs() < 1e-10, "{x:?}");
            assert!(rrg_outcome_history_len(out) >= 1);
            let mut ne = 0.0f64;
            assert_eq!(
                rrg_outcome_history_row(
                    out,
                    rrg_outcome_history_len(out) - 1,
                    ptr::null_mut(),
                    ptr::null_mut(),
                    &mut ne,
                    ptr::null_mut()
                ),
                RRG_OK
            );
            assert!(ne <= 1e-12);
            rrg_outcome_free(out);
            rrg_matrix_free(m);
        }
    }

    #[test]
    fn null_and_enum_misuse_come_back_as_codes() {
        unsafe {
            let mut out: *mut RrgOutcome = ptr::null_mut();
            let b = [1.0f64, 0.0];
            assert_eq!(
                rrg_solve(ptr::null(), b.as_ptr(), 2, ptr::null(), &mut out),
                RRG_ERR_NULL_ARGUMENT
            );
            let m = build_nilpotent();
            let mut opts = std::mem::zeroed::<RrgSolveOptions>();
            rrg_solve_options_default(&mut opts);
            opts.method = 99;
            assert_eq!(
                rrg_solve(m, b.as_ptr(), 2, &opts, &mut out),
                RRG_ERR_INVALID_ENUM
            );
            let msg = std::ffi::CStr::from_ptr(rrg_last_error_message());
            assert!(msg.to_string_lossy().contains("99"));
            rrg_solve_options_default(&mut opts);
            opts.precond = RRG_PRECOND_NONE;
            assert_eq!(
                rrg_solve(m, b.as_ptr(), 2, &opts, &mut out),
                RRG_ERR_PRECONDITION
            );
            // wrong rhs length surfaces the library's dimension error
            rrg_solve_options_default(&mut opts);
            opts.precond = RRG_PRECOND_AT;
            assert_eq!(
                rrg_solve(m, b.as_ptr(), 1, &opts, &mut out),
                RRG_ERR_DIMENSION
            );
            rrg_matrix_free(m);
            rrg_matrix_free(ptr::null_mut());
            rrg_outcome_free(ptr::null_mut());
        }
    }

    #[test]
    fn market_reader_reports_missing_files() {
        unsafe {
            let mut m: *mut RrgMatrix = ptr::null_mut();
            let path = std::ffi::CString::new("/no/such/file.mtx").unwrap();
            assert_eq!(rrg_matrix_read_market(path.as_ptr(), &mut m), RRG_ERR_IO);
            let msg = std::ffi::CStr::from_ptr(rrg_last_error_message());
            assert!(msg.to_string_lossy().contains("file.mtx"));
        }
    }
}
