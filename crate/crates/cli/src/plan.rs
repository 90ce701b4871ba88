//! Run lists: loading problems, executing runs across threads and writing
//! their records.

use std::path::{Path, PathBuf};

use anyhow::Context;
use icls_core::icfact::MemLimits;
use icls_core::io::{
    history_path, load_problem, write_history, write_outer_history, write_summary, HistoryRow,
    OutputFormat, ProblemSpec, RunRecord,
};
use icls_core::pipeline::{refine_record, solve, Precond, SolveSetup};
use icls_core::refine::{OuterRecord, RefineConfig, RefineTermination};
use icls_core::sparsela::SparseMatrix;
use rayon::prelude::*;

#[derive(Debug, Clone)]
pub enum JobKind {
    Lsqr(SolveSetup),
    Refine(RefineConfig, MemLimits),
}

#[derive(Debug, Clone)]
pub struct Job {
    /// Index into [`Plan::matrices`].
    pub problem: usize,
    pub kind: JobKind,
}

impl Job {
    pub fn precond(&self) -> Precond {
        match &self.kind {
            JobKind::Lsqr(s) => s.precond,
            JobKind::Refine(_, limits) => Precond::Memory(*limits),
        }
    }

    pub fn describe(&self) -> String {
        match &self.kind {
            JobKind::Lsqr(s) => format!(
                "{} {}/{}/{} {} delta={:e}",
                s.precond, s.fact, s.apply, s.lsqr.matvec_format, s.lsqr.criterion, s.lsqr.delta
            ),
            JobKind::Refine(c, limits) => {
                format!(
                    "lsqr-ir {} {}/{}/{}",
                    Precond::Memory(*limits),
                    c.fact,
                    c.work,
                    c.residual
                )
            }
        }
    }
}

/// Every run is independent, and the outcome list follows the job order.
#[derive(Debug, Clone)]
pub struct Plan {
    pub matrices: Vec<PathBuf>,
    pub rhs_seed: u64,
    pub jobs: Vec<Job>,
}

pub struct Problem {
    pub name: String,
    pub a: SparseMatrix,
    pub b: Vec<f64>,
}

pub enum History {
    Inner(Vec<HistoryRow>),
    Outer(Vec<OuterRecord>),
}

pub struct RunOutput {
    pub record: RunRecord,
    pub history: History,
    /// Table marker for outcomes that are data rather than failures.
    pub marker: &'static str,
}

pub type Outcome = Result<RunOutput, icls_core::Error>;

impl Plan {
    pub fn load(&self) -> anyhow::Result<Vec<Problem>> {
        self.matrices
            .iter()
            .map(|path| {
                let spec = ProblemSpec {
                    rhs_seed: self.rhs_seed,
                    ..ProblemSpec::new(path)
                };
                let (a, b) =
                    load_problem(&spec).with_context(|| format!("reading {}", path.display()))?;
                Ok(Problem {
                    name: spec.id(),
                    a,
                    b,
                })
            })
            .collect()
    }

    pub fn execute(
        &self,
        problems: &[Problem],
        threads: Option<usize>,
    ) -> anyhow::Result<Vec<Outcome>> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads.unwrap_or(0))
            .build()?;
        Ok(pool.install(|| {
            self.jobs
                .par_iter()
                .map(|job| run_job(job, &problems[job.problem]))
                .collect()
        }))
    }
}

fn run_job(job: &Job, p: &Problem) -> Outcome {
    match &job.kind {
        JobKind::Lsqr(setup) => {
            let out = solve(&p.a, &p.b, setup)?;
            Ok(RunOutput {
                record: out.record(&p.name, &p.a, setup),
                history: History::Inner(out.history()),
                marker: out.report.termination.marker(),
            })
        }
        JobKind::Refine(cfg, limits) => {
            let (_, rep, record) = refine_record(&p.name, &p.a, &p.b, cfg, *limits)?;
            let marker = match rep.termination {
                RefineTermination::ConvergedGs => "",
                _ => "∗",
            };
            Ok(RunOutput {
                record,
                history: History::Outer(rep.outer),
                marker,
            })
        }
    }
}

/// Write the summary of the successful runs and one history file each.
/// Returns the number of history files.
pub fn write(outcomes: &[Outcome], summary: &Path, format: OutputFormat) -> anyhow::Result<usize> {
    let done: Vec<&RunOutput> = outcomes.iter().filter_map(|o| o.as_ref().ok()).collect();
    let records: Vec<RunRecord> = done.iter().map(|r| r.record.clone()).collect();
    write_summary(&records, summary, format)
        .with_context(|| format!("writing {}", summary.display()))?;
    for (k, run) in done.iter().enumerate() {
        let path = history_path(summary, k, format);
        match &run.history {
            History::Inner(rows) => write_history(rows, &path, format),
            History::Outer(rows) => write_outer_history(rows, &path, format),
        }
        .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(done.len())
}
