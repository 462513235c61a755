/* C interface for the rrgmres solver library.
 *
 * Link against the static or shared library built from the rrgmres-ffi
 * crate (librrgmres_ffi.a / librrgmres_ffi.so). All fallible calls return
 * an RRG_* code; on failure, rrg_last_error_message() describes what went
 * wrong. Handles are opaque and must be released with the matching _free
 * function exactly once; passing NULL to a _free function is a no-op.
 */

#ifndef RRGMRES_H
#define RRGMRES_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

/* Error codes. */
#define RRG_OK 0
#define RRG_ERR_DIMENSION 1
#define RRG_ERR_INDEX 2
#define RRG_ERR_PARSE 3
#define RRG_ERR_PRECONDITION 4
#define RRG_ERR_DEGENERATE 5
#define RRG_ERR_CONTRACT 6
#define RRG_ERR_IO 7
#define RRG_ERR_NULL_ARGUMENT 8
#define RRG_ERR_INVALID_ENUM 9
#define RRG_ERR_UTF8 10
#define RRG_ERR_PANIC 11

/* Solver methods. The plain methods take RRG_PRECOND_NONE; the ab methods
 * require one of the other preconditioners. */
#define RRG_METHOD_GMRES 0
#define RRG_METHOD_RRGMRES 1
#define RRG_METHOD_AB_GMRES 2
#define RRG_METHOD_AB_RRGMRES 3

/* Right preconditioners for the composed (ab) methods. */
#define RRG_PRECOND_NONE 0
#define RRG_PRECOND_AT 1
#define RRG_PRECOND_DIAG_AT 2
#define RRG_PRECOND_NRSSOR 3

/* Termination status of a solve (see rrg_outcome_status). */
#define RRG_STATUS_CONVERGED_NE 0
#define RRG_STATUS_CONVERGED_RES 1
#define RRG_STATUS_BREAKDOWN 2
#define RRG_STATUS_STAGNATED 3
#define RRG_STATUS_MAX_ITERS 4

/* Opaque sparse matrix handle. */
typedef struct RrgMatrix RrgMatrix;

/* Opaque solve-result handle. */
typedef struct RrgOutcome RrgOutcome;

/* Solver configuration. Fill with rrg_solve_options_default first, then
 * override fields as needed. tol_res <= 0 disables the plain-residual
 * stopping test; max_iters == 0 means min(rows, 10000). */
typedef struct RrgSolveOptions {
  int method;
  int precond;
  size_t inner_iters;
  double omega;
  double tol_ne;
  double tol_res;
  size_t max_iters;
} RrgSolveOptions;

/* Message for the most recent failure on the calling thread. The pointer
 * stays valid until the next failing call on the same thread. Never NULL. */
const char *rrg_last_error_message(void);

/* Builds an nrows-by-ncols matrix from nnz coordinate triplets
 * (rows[k], cols[k], values[k]); duplicate positions are summed. On success
 * stores a new handle in *out. */
int rrg_matrix_from_triplets(const size_t *rows, const size_t *cols,
                             const double *values, size_t nnz, size_t nrows,
                             size_t ncols, RrgMatrix **out);

/* Reads a Matrix Market coordinate file (general real, 1-based indices). */
int rrg_matrix_read_market(const char *path, RrgMatrix **out);

/* Shape and fill queries; all return 0 for a NULL handle. */
size_t rrg_matrix_nrows(const RrgMatrix *m);
size_t rrg_matrix_ncols(const RrgMatrix *m);
size_t rrg_matrix_nnz(const RrgMatrix *m);

void rrg_matrix_free(RrgMatrix *m);

/* Fills *opts with the default configuration: RRG_METHOD_AB_RRGMRES with
 * RRG_PRECOND_NRSSOR, one inner sweep, omega 1.0, tol_ne 1e-7. */
int rrg_solve_options_default(RrgSolveOptions *opts);

/* Runs the configured solver on the right-hand side b (b_len entries,
 * which must match the matrix row count). opts may be NULL for defaults.
 * On success stores a new outcome handle in *out; inspect its status to
 * see how the iteration ended. Convergence failure is not an error code:
 * the call still returns RRG_OK with status RRG_STATUS_STAGNATED or
 * RRG_STATUS_MAX_ITERS and the best iterate found. */
int rrg_solve(const RrgMatrix *matrix, const double *b, size_t b_len,
              const RrgSolveOptions *opts, RrgOutcome **out);

/* RRG_STATUS_* value, or -1 for a NULL handle. */
int rrg_outcome_status(const RrgOutcome *o);

/* Number of outer iterations performed. */
size_t rrg_outcome_iterations(const RrgOutcome *o);

/* Final stopping ratio (normal-equations residual over its initial value);
 * NaN for a NULL handle. */
double rrg_outcome_final_ne(const RrgOutcome *o);

/* Length of the solution vector (the matrix column count). */
size_t rrg_outcome_solution_len(const RrgOutcome *o);

/* Copies the solution into buf, which must hold exactly
 * rrg_outcome_solution_len(o) doubles. */
int rrg_outcome_solution(const RrgOutcome *o, double *buf, size_t len);

/* Number of per-iteration history records (iteration 0 is the start). */
size_t rrg_outcome_history_len(const RrgOutcome *o);

/* Reads history record idx. Each output pointer may be NULL to skip that
 * field: iteration index, true residual norm, stopping ratio, and the
 * cumulative solver-work clock in seconds. */
int rrg_outcome_history_row(const RrgOutcome *o, size_t idx,
                            size_t *iteration, double *res_norm,
                            double *ne_res_rel, double *elapsed_sec);

void rrg_outcome_free(RrgOutcome *o);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* RRGMRES_H */
