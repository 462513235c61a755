//! Command-line harness: generate test matrices, run a solver configuration,
//! verify the preconditioned spectrum, and benchmark preconditioner sweeps.
//!
//! Exit codes: 0 when the solver met a tolerance or hit a happy breakdown,
//! 2 when it ran out of iterations or stagnated (results are still written),
//! 1 for usage and structural errors.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use rrgmres::analysis::{export_history_csv, numerical_rank, verify_clustering};
use rrgmres::krylov::{
    ab_solve, gmres, rrgmres, KrylovVariant, SolveOutcome, SolverOptions,
};
use rrgmres::market::{read_matrix_market, write_matrix_market};
use rrgmres::precond::{PrecondKind, RightPreconditioner, DEFAULT_OMEGA};
use rrgmres::problems::{
    make_rhs_inconsistent, ProblemFamily, ProblemSpec, DEFAULT_NOISE, GP_STRUCTURAL_RANK,
    INDEX2_STRUCTURAL_RANK,
};
use rrgmres::{Error, Result, SparseMatrixCSR};

const DEFAULT_TOL: f64 = 1e-7;
const MAX_ITERS_CAP: usize = 10_000;

#[derive(Parser)]
#[command(
    name = "rrgmres",
    version,
    about = "Sparse iterative least-squares solvers with inner-iteration preconditioning"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a test matrix and write it in Matrix Market format
    Generate(GenerateArgs),
    /// Run one solver configuration and print `method precond iters min_ne elapsed`
    Solve(SolveArgs),
    /// Report the eigenvalue clustering of the preconditioned normal operator
    Verify(VerifyArgs),
    /// Run one problem across several preconditioners and tabulate the results
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ProblemName {
    /// 128x128 graded singular matrix with trivial range/nullspace overlap
    Gp,
    /// The index-2 variant with a nilpotent lower-right block
    Index2,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodName {
    Gmres,
    Rrgmres,
    AbGmres,
    AbRrgmres,
}

impl MethodName {
    fn name(self) -> &'static str {
        match self {
            MethodName::Gmres => "gmres",
            MethodName::Rrgmres => "rrgmres",
            MethodName::AbGmres => "ab-gmres",
            MethodName::AbRrgmres => "ab-rrgmres",
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PrecondName {
    None,
    At,
    DiagAt,
    Nrssor,
}

impl PrecondName {
    fn name(self) -> &'static str {
        match self {
            PrecondName::None => "none",
            PrecondName::At => "at",
            PrecondName::DiagAt => "diag-at",
            PrecondName::Nrssor => "nrssor",
        }
    }

    fn kind(self) -> Option<PrecondKind> {
        match self {
            PrecondName::None => None,
            PrecondName::At => Some(PrecondKind::At),
            PrecondName::DiagAt => Some(PrecondKind::DiagAt),
            PrecondName::Nrssor => Some(PrecondKind::Nrssor),
        }
    }
}

#[derive(Args)]
struct ProblemArgs {
    /// Built-in problem family
    #[arg(long, value_enum)]
    problem: Option<ProblemName>,
    /// Matrix Market file with the system matrix
    #[arg(long, conflicts_with = "problem")]
    matrix: Option<PathBuf>,
    /// Grading exponent for the 16 paired diagonal values (10^-rho at the low end)
    #[arg(long, default_value_t = 12.0)]
    rho: f64,
    /// Grading exponent for the 32 plain diagonal values (10^-gamma at the low end)
    #[arg(long, default_value_t = 12.0)]
    gamma: f64,
    /// Norm of the right-hand-side component outside the range
    #[arg(long, default_value_t = DEFAULT_NOISE)]
    noise: f64,
    /// Seed for all randomness
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Drop zero rows and columns after loading a matrix file
    #[arg(long)]
    compact: bool,
}

impl ProblemArgs {
    fn load(&self) -> Result<SparseMatrixCSR> {
        let a = match (self.problem, &self.matrix) {
            (Some(p), None) => self.spec_for(p).build_matrix()?,
            (None, Some(path)) => read_matrix_market(path)?,
            (None, None) => {
                return Err(Error::Precondition(
                    "one of --problem or --matrix is required".into(),
                ))
            }
            (Some(_), Some(_)) => unreachable!("clap rejects the combination"),
        };
        if self.compact {
            let (m0, n0) = (a.nrows(), a.ncols());
            let (c, rows, cols) = a.compact()?;
            eprintln!(
                "compacted {m0}x{n0} to {}x{} (dropped {} zero rows, {} zero columns)",
                c.nrows(),
                c.ncols(),
                m0 - rows.len(),
                n0 - cols.len()
            );
            return Ok(c);
        }
        Ok(a)
    }

    fn spec_for(&self, p: ProblemName) -> ProblemSpec {
        ProblemSpec {
            family: match p {
                ProblemName::Gp => ProblemFamily::Gp,
                ProblemName::Index2 => ProblemFamily::Index2,
            },
            rho: self.rho,
            gamma: self.gamma,
            noise: self.noise,
            seed: self.seed,
            ..ProblemSpec::default()
        }
    }

    fn rhs(&self, a: &SparseMatrixCSR) -> Result<Vec<f64>> {
        make_rhs_inconsistent(a, self.noise, self.seed)
    }
}

#[derive(Args)]
struct GenerateArgs {
    /// Built-in problem family
    #[arg(long, value_enum)]
    problem: ProblemName,
    /// Grading exponent for the 16 paired diagonal values
    #[arg(long, default_value_t = 12.0)]
    rho: f64,
    /// Grading exponent for the 32 plain diagonal values
    #[arg(long, default_value_t = 12.0)]
    gamma: f64,
    /// Matrix Market output path
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long, value_enum, default_value_t = MethodName::AbRrgmres)]
    method: MethodName,
    #[arg(long, value_enum, default_value_t = PrecondName::Nrssor)]
    precond: PrecondName,
    /// Inner sweeps per preconditioner application
    #[arg(long, default_value_t = 1)]
    inner_iters: usize,
    /// Relaxation parameter of the inner sweeps
    #[arg(long, default_value_t = DEFAULT_OMEGA)]
    omega: f64,
    /// Stopping threshold on the ratio of transposed-residual norms
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    /// Cap on outer iterations (default: min(rows, 10000))
    #[arg(long)]
    max_iters: Option<usize>,
    /// Write the per-iteration history as CSV
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Relaxation parameter of the inner sweeps
    #[arg(long, default_value_t = DEFAULT_OMEGA)]
    omega: f64,
    /// Inner sweeps per preconditioner application
    #[arg(long, default_value_t = 1)]
    inner_iters: usize,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long, value_enum, default_value_t = MethodName::AbRrgmres)]
    method: MethodName,
    /// Comma-separated preconditioners to compare
    #[arg(long, value_enum, value_delimiter = ',', required = true)]
    preconds: Vec<PrecondName>,
    /// Inner sweeps per preconditioner application
    #[arg(long, default_value_t = 1)]
    inner_iters: usize,
    /// Relaxation parameter of the inner sweeps
    #[arg(long, default_value_t = DEFAULT_OMEGA)]
    omega: f64,
    /// Stopping threshold on the ratio of transposed-residual norms
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    /// Cap on outer iterations (default: min(rows, 10000))
    #[arg(long)]
    max_iters: Option<usize>,
}

pub fn run() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    let result = match cli.command {
        Command::Generate(args) => cmd_generate(args),
        Command::Solve(args) => cmd_solve(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Bench(args) => cmd_bench(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn cmd_generate(args: GenerateArgs) -> Result<ExitCode> {
    let (spec, structural) = match args.problem {
        ProblemName::Gp => (ProblemFamily::Gp, GP_STRUCTURAL_RANK),
        ProblemName::Index2 => (ProblemFamily::Index2, INDEX2_STRUCTURAL_RANK),
    };
    let problem = ProblemSpec {
        family: spec,
        rho: args.rho,
        gamma: args.gamma,
        ..ProblemSpec::default()
    };
    let a = problem.build_matrix()?;
    write_matrix_market(&a, &args.output)?;
    let numerical = numerical_rank(&a, None)?;
    println!(
        "{} {}x{} nnz {} structural_rank {structural} numerical_rank {numerical} -> {}",
        match args.problem {
            ProblemName::Gp => "gp",
            ProblemName::Index2 => "index2",
        },
        a.nrows(),
        a.ncols(),
        a.nnz(),
        args.output.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn build_options(tol: f64, max_iters: Option<usize>, nrows: usize) -> SolverOptions {
    SolverOptions {
        tol_ne: tol,
        max_iters: max_iters.unwrap_or_else(|| nrows.min(MAX_ITERS_CAP)),
        ..SolverOptions::default()
    }
}

fn run_method(
    a: &SparseMatrixCSR,
    b: &[f64],
    method: MethodName,
    precond: PrecondName,
    omega: f64,
    inner_iters: usize,
    opts: &SolverOptions,
) -> Result<SolveOutcome> {
    match (method, precond.kind()) {
        (MethodName::Gmres, None) => gmres(a, b, None, opts),
        (MethodName::Rrgmres, None) => rrgmres(a, b, None, opts),
        (MethodName::AbGmres | MethodName::AbRrgmres, Some(kind)) => {
            let prec = RightPreconditioner::new(kind, a, omega, inner_iters)?;
            let variant = if method == MethodName::AbGmres {
                KrylovVariant::Residual
            } else {
                KrylovVariant::RangeRestricted
            };
            ab_solve(a, &prec, variant, b, None, opts)
        }
        (MethodName::Gmres | MethodName::Rrgmres, Some(_)) => Err(Error::Precondition(
            "gmres and rrgmres run unpreconditioned; pass --precond none or switch to an ab- method"
                .into(),
        )),
        (MethodName::AbGmres | MethodName::AbRrgmres, None) => Err(Error::Precondition(
            "ab methods need a preconditioner: at, diag-at, or nrssor".into(),
        )),
    }
}

fn status_code(outcome: &SolveOutcome) -> ExitCode {
    if outcome.status.is_success() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}

fn cmd_solve(args: SolveArgs) -> Result<ExitCode> {
    let a = args.problem.load()?;
    let b = args.problem.rhs(&a)?;
    let opts = build_options(args.tol, args.max_iters, a.nrows());
    let wall = Instant::now();
    let outcome = run_method(
        &a,
        &b,
        args.method,
        args.precond,
        args.omega,
        args.inner_iters,
        &opts,
    )?;
    let elapsed = wall.elapsed().as_secs_f64();
    if let Some(path) = &args.output {
        let mut history = outcome.history.clone();
        // wall time varies run to run; the exported artifact must not
        history.zero_elapsed();
        export_history_csv(&history, path)?;
    }
    let (min_ne, at_iter) = outcome
        .history
        .min_ne()
        .unwrap_or((outcome.final_ne, outcome.iterations));
    println!(
        "{} {} {} {:e} {:.4}",
        args.method.name(),
        args.precond.name(),
        outcome.iterations,
        min_ne,
        elapsed
    );
    eprintln!(
        "status {} min_ne {:e} at iteration {at_iter}",
        outcome.status.name(),
        min_ne
    );
    Ok(status_code(&outcome))
}

fn cmd_verify(args: VerifyArgs) -> Result<ExitCode> {
    let a = args.problem.load()?;
    let report = verify_clustering(&a, args.omega, args.inner_iters)?;
    println!(
        "rank {} radius {:e} interval [{:e}, {:e}] inside {} outside {} zeros {}",
        report.rank,
        report.rho,
        report.lo,
        report.hi,
        report.inside,
        report.outside,
        report.zero_count
    );
    if report.outside == 0 && report.inside == report.rank {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(2))
    }
}

fn cmd_bench(args: BenchArgs) -> Result<ExitCode> {
    if args.preconds.is_empty() {
        return Err(Error::Precondition("--preconds must name at least one".into()));
    }
    let a = args.problem.load()?;
    let b = args.problem.rhs(&a)?;
    let opts = build_options(args.tol, args.max_iters, a.nrows());
    println!(
        "{:<10} {:>13} {:>7} {:>13} {:>10} {:>10}",
        "precond", "status", "iters", "min_ne", "work_s", "wall_s"
    );
    let mut worst = ExitCode::SUCCESS;
    for &p in &args.preconds {
        let wall = Instant::now();
        let outcome = run_method(&a, &b, args.method, p, args.omega, args.inner_iters, &opts)?;
        let elapsed = wall.elapsed().as_secs_f64();
        let (min_ne, _) = outcome
            .history
            .min_ne()
            .unwrap_or((outcome.final_ne, outcome.iterations));
        let work = outcome
            .history
            .last()
            .map(|r| r.elapsed_sec)
            .unwrap_or(0.0);
        println!(
            "{:<10} {:>13} {:>7} {:>13.3e} {:>10.4} {:>10.4}",
            p.name(),
            outcome.status.name(),
            outcome.iterations,
            min_ne,
            work,
            elapsed
        );
        if !outcome.status.is_success() {
            worst = ExitCode::from(2);
        }
    }
    Ok(worst)
}
