//! `icls`: run preconditioned LSQR and LSQR-IR experiments on Matrix Market
//! problems and tabulate the results.

mod plan;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use icls_core::icfact::MemLimits;
use icls_core::io::OutputFormat;
use icls_core::krylov::{Criterion, LsqrConfig, ReorthPolicy};
use icls_core::pipeline::{Precond, SolveSetup};
use icls_core::precision::{FpFormat, FP64};
use icls_core::refine::RefineConfig;

use plan::{Job, JobKind, Plan};
use report::Layout;

#[derive(Parser, Debug)]
#[command(
    name = "icls",
    version,
    about = "Low-precision incomplete Cholesky preconditioned LSQR experiments"
)]
struct Cli {
    /// Maximum number of runs executed concurrently (all cores when unset).
    #[arg(long, env = "ICLS_THREADS", global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Preconditioned LSQR for every matrix, factorization precision and tolerance.
    Solve(SolveArgs),
    /// LSQR-IR: mixed-precision iterative refinement with LSQR inner solves.
    Refine(RefineArgs),
    /// Memory-limited IC over a range of lsize values.
    SweepLsize(SweepLsizeArgs),
    /// Level-based IC over a range of levels.
    SweepLevel(SweepLevelArgs),
    /// The same solve under each stopping criterion.
    CompareStop(CompareStopArgs),
}

#[derive(Args, Debug)]
struct ProblemArgs {
    /// Matrix Market file; repeat for several problems.
    #[arg(long, required = true)]
    matrix: Vec<PathBuf>,
    /// Seed of the random right-hand side.
    #[arg(long, default_value_t = 1)]
    rhs_seed: u64,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum PrecondKind {
    None,
    IcLevel,
    IcMem,
}

#[derive(Args, Debug)]
struct PrecondArgs {
    #[arg(long, value_enum, default_value = "ic-mem")]
    precond: PrecondKind,
    /// Level of fill for `ic-level`.
    #[arg(long, default_value_t = 0)]
    level: usize,
    /// Off-diagonal entries kept per column of L.
    #[arg(long, default_value_t = 10)]
    lsize: usize,
    /// Entries per column of the intermediate factor R (defaults to lsize).
    #[arg(long)]
    rsize: Option<usize>,
}

impl PrecondArgs {
    fn precond(&self) -> Precond {
        match self.precond {
            PrecondKind::None => Precond::None,
            PrecondKind::IcLevel => Precond::Level(self.level),
            PrecondKind::IcMem => {
                Precond::Memory(MemLimits::new(self.lsize, self.rsize.unwrap_or(self.lsize)))
            }
        }
    }
}

#[derive(Args, Debug)]
struct PrecisionArgs {
    /// Factorization precision; a comma-separated list gives one run each.
    #[arg(long, value_delimiter = ',', default_value = "fp64")]
    fact: Vec<FpFormat>,
    /// Precision of preconditioner applications.
    #[arg(long, default_value = "fp64")]
    apply: FpFormat,
    /// Precision of products with A and A^T.
    #[arg(long, default_value = "fp64")]
    matvec: FpFormat,
}

#[derive(Args, Debug)]
struct IterArgs {
    /// Iteration limit; runs reaching it are marked with a dagger.
    #[arg(long, default_value_t = 3000)]
    maxit: usize,
    /// none, full, one-sided or partial:K.
    #[arg(long, default_value = "none")]
    reorth: ReorthPolicy,
}

#[derive(Args, Debug)]
struct OutputArgs {
    /// Summary file; per-run histories are written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: OutputFormat,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[command(flatten)]
    precond: PrecondArgs,
    #[command(flatten)]
    precision: PrecisionArgs,
    #[arg(long, default_value = "pt")]
    stop: Criterion,
    /// Stopping tolerance; a comma-separated list gives one run each.
    #[arg(long, value_delimiter = ',', default_value = "1e-6")]
    delta: Vec<f64>,
    #[command(flatten)]
    iter: IterArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct RefineArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[command(flatten)]
    precond: PrecondArgs,
    /// Factorization precision u_l; a comma-separated list gives one run each.
    #[arg(long, value_delimiter = ',', default_value = "fp32")]
    fact: Vec<FpFormat>,
    /// Working precision u_w of the inner solves and the update.
    #[arg(long, default_value = "fp64")]
    apply: FpFormat,
    /// Residual precision u_r.
    #[arg(long, default_value = "fp64")]
    matvec: FpFormat,
    /// Stopping criterion of the inner LSQR solves.
    #[arg(long, default_value = "pt")]
    stop: Criterion,
    /// Inner tolerance.
    #[arg(long, default_value_t = 1e-5)]
    delta: f64,
    /// Outer tolerance on ratio_GS.
    #[arg(long, default_value_t = 1e-8)]
    delta2: f64,
    /// Outer stagnation threshold on the relative residual decrease.
    #[arg(long, default_value_t = 1e3 * FP64.unit_roundoff())]
    eta: f64,
    #[arg(long, default_value_t = 20)]
    itmax_outer: usize,
    #[command(flatten)]
    iter: IterArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct SweepLsizeArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long, default_value_t = 5)]
    from: usize,
    #[arg(long, default_value_t = 60)]
    to: usize,
    #[arg(long, default_value_t = 5)]
    step: usize,
    /// Fixed rsize for every run (defaults to the lsize of the run).
    #[arg(long)]
    rsize: Option<usize>,
    #[command(flatten)]
    precision: PrecisionArgs,
    #[arg(long, default_value = "pt")]
    stop: Criterion,
    #[arg(long, value_delimiter = ',', default_value = "1e-6")]
    delta: Vec<f64>,
    #[command(flatten)]
    iter: IterArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct SweepLevelArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long, default_value_t = 0)]
    from: usize,
    #[arg(long, default_value_t = 5)]
    to: usize,
    #[arg(long, default_value_t = 1)]
    step: usize,
    #[command(flatten)]
    precision: PrecisionArgs,
    #[arg(long, default_value = "pt")]
    stop: Criterion,
    #[arg(long, value_delimiter = ',', default_value = "1e-6")]
    delta: Vec<f64>,
    #[command(flatten)]
    iter: IterArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct CompareStopArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[command(flatten)]
    precond: PrecondArgs,
    #[command(flatten)]
    precision: PrecisionArgs,
    /// Criteria to compare, comma-separated.
    #[arg(long, value_delimiter = ',', default_value = "gs,ps,pt")]
    stop: Vec<Criterion>,
    #[arg(long, default_value_t = 1e-10)]
    delta: f64,
    #[command(flatten)]
    iter: IterArgs,
    #[command(flatten)]
    output: OutputArgs,
}

fn lsqr_config(stop: Criterion, delta: f64, matvec: FpFormat, iter: &IterArgs) -> LsqrConfig {
    LsqrConfig {
        criterion: stop,
        delta,
        max_iter: iter.maxit,
        reorth: iter.reorth,
        matvec_format: matvec,
        ..Default::default()
    }
}

/// One LSQR job per (problem, preconditioner, tolerance, factorization precision).
fn lsqr_jobs(
    problems: usize,
    preconds: &[Precond],
    precision: &PrecisionArgs,
    stop: Criterion,
    deltas: &[f64],
    iter: &IterArgs,
) -> Vec<Job> {
    let mut jobs = Vec::new();
    for problem in 0..problems {
        for &precond in preconds {
            for &delta in deltas {
                for &fact in &precision.fact {
                    let setup = SolveSetup {
                        precond,
                        fact,
                        apply: precision.apply,
                        lsqr: lsqr_config(stop, delta, precision.matvec, iter),
                        ..Default::default()
                    };
                    jobs.push(Job {
                        problem,
                        kind: JobKind::Lsqr(setup),
                    });
                }
            }
        }
    }
    jobs
}

fn range(from: usize, to: usize, step: usize) -> anyhow::Result<Vec<usize>> {
    anyhow::ensure!(step > 0, "--step must be positive");
    anyhow::ensure!(from <= to, "--from must not exceed --to");
    Ok((from..=to).step_by(step).collect())
}

fn build(command: Command) -> anyhow::Result<(Plan, Layout, OutputArgs)> {
    let (problem, jobs, layout, output) = match command {
        Command::Solve(a) => {
            let n = a.problem.matrix.len();
            let jobs = lsqr_jobs(
                n,
                &[a.precond.precond()],
                &a.precision,
                a.stop,
                &a.delta,
                &a.iter,
            );
            (a.problem, jobs, Layout::Iterations, a.output)
        }
        Command::SweepLsize(a) => {
            let preconds: Vec<Precond> = range(a.from, a.to, a.step)?
                .into_iter()
                .map(|l| Precond::Memory(MemLimits::new(l, a.rsize.unwrap_or(l))))
                .collect();
            let jobs = lsqr_jobs(
                a.problem.matrix.len(),
                &preconds,
                &a.precision,
                a.stop,
                &a.delta,
                &a.iter,
            );
            (a.problem, jobs, Layout::Iterations, a.output)
        }
        Command::SweepLevel(a) => {
            let preconds: Vec<Precond> = range(a.from, a.to, a.step)?
                .into_iter()
                .map(Precond::Level)
                .collect();
            let jobs = lsqr_jobs(
                a.problem.matrix.len(),
                &preconds,
                &a.precision,
                a.stop,
                &a.delta,
                &a.iter,
            );
            (a.problem, jobs, Layout::Iterations, a.output)
        }
        Command::CompareStop(a) => {
            let mut jobs = Vec::new();
            for problem in 0..a.problem.matrix.len() {
                for &fact in &a.precision.fact {
                    for &stop in &a.stop {
                        let mut lsqr = lsqr_config(stop, a.delta, a.precision.matvec, &a.iter);
                        // ratio_PT is reported whatever the criterion.
                        lsqr.track_all = true;
                        let setup = SolveSetup {
                            precond: a.precond.precond(),
                            fact,
                            apply: a.precision.apply,
                            lsqr,
                            ..Default::default()
                        };
                        jobs.push(Job {
                            problem,
                            kind: JobKind::Lsqr(setup),
                        });
                    }
                }
            }
            (a.problem, jobs, Layout::Criteria, a.output)
        }
        Command::Refine(a) => {
            let Precond::Memory(limits) = a.precond.precond() else {
                anyhow::bail!("refine needs --precond ic-mem");
            };
            let mut jobs = Vec::new();
            for problem in 0..a.problem.matrix.len() {
                for &fact in &a.fact {
                    let cfg = RefineConfig {
                        fact,
                        work: a.apply,
                        residual: a.matvec,
                        itmax: a.itmax_outer,
                        inner: lsqr_config(a.stop, a.delta, a.apply, &a.iter),
                        delta2: a.delta2,
                        eta: a.eta,
                        ..Default::default()
                    };
                    cfg.validate().map_err(anyhow::Error::msg)?;
                    jobs.push(Job {
                        problem,
                        kind: JobKind::Refine(cfg, limits),
                    });
                }
            }
            (a.problem, jobs, Layout::Refinement, a.output)
        }
    };
    let plan = Plan {
        matrices: problem.matrix,
        rhs_seed: problem.rhs_seed,
        jobs,
    };
    Ok((plan, layout, output))
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    let (plan, layout, output) = build(cli.command)?;
    let problems = plan.load()?;
    let outcomes = plan.execute(&problems, cli.threads)?;
    print!("{}", report::render(layout, &plan, &problems, &outcomes));
    let mut ok = true;
    for (job, outcome) in plan.jobs.iter().zip(&outcomes) {
        if let Err(e) = outcome {
            ok = false;
            eprintln!(
                "error: {} ({}): {e}",
                problems[job.problem].name,
                job.describe()
            );
        }
    }
    if let Some(out) = &output.out {
        let written = plan::write(&outcomes, out, output.format)?;
        eprintln!("wrote {} and {} history files", out.display(), written);
    }
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
