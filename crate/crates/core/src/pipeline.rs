//! One preconditioned solve from matrix to solution: scale, convert, factor,
//! iterate.

use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::icfact::{ic_level, ic_memory_limited, IcFactor, MemLimits, ShiftPolicy};
use crate::io::{history_rows, HistoryRow, RunRecord};
use crate::krylov::{
    lsqr, CholeskyPreconditioner, IdentityPreconditioner, LsqrConfig, SolveReport,
};
use crate::precision::{FpFormat, FP64};
use crate::refine::{lsqr_ir, RefineConfig, RefineReport};
use crate::sparsela::{form_normal, scale_columns, squeeze_matrix, SparseMatrix};
use crate::Result;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Precond {
    None,
    Level(usize),
    Memory(MemLimits),
}

impl Precond {
    pub fn kind(&self) -> &'static str {
        match self {
            Precond::None => "none",
            Precond::Level(_) => "ic-level",
            Precond::Memory(_) => "ic-mem",
        }
    }
}

impl fmt::Display for Precond {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Precond::None => f.write_str("none"),
            Precond::Level(l) => write!(f, "ic-level({l})"),
            Precond::Memory(m) if m.is_unlimited() => f.write_str("ic-mem(complete)"),
            Precond::Memory(m) => write!(f, "ic-mem({},{})", m.lsize, m.rsize),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveSetup {
    pub precond: Precond,
    /// Precision of the normal matrix and the factorization.
    pub fact: FpFormat,
    /// Precision of preconditioner applications.
    pub apply: FpFormat,
    /// `lsqr.matvec_format` sets the precision of products with `B`.
    pub lsqr: LsqrConfig,
    pub shifts: ShiftPolicy,
}

impl Default for SolveSetup {
    fn default() -> Self {
        Self {
            precond: Precond::Memory(MemLimits::new(10, 10)),
            fact: FP64,
            apply: FP64,
            lsqr: LsqrConfig::default(),
            shifts: ShiftPolicy::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub x: Vec<f64>,
    pub report: SolveReport,
    pub factor: Option<IcFactor>,
    /// Entries of `B` lost when converting to the factorization precision.
    pub squeeze_lost: usize,
    /// Entries of the normal matrix lost to underflow.
    pub normal_lost: usize,
    pub factor_seconds: f64,
    pub solve_seconds: f64,
}

impl SolveOutcome {
    pub fn nnz_l(&self) -> usize {
        self.factor.as_ref().map_or(0, IcFactor::nnz)
    }

    pub fn history(&self) -> Vec<HistoryRow> {
        history_rows(&self.report.history, self.report.final_residual.as_ref())
    }

    pub fn record(&self, problem: &str, a: &SparseMatrix, setup: &SolveSetup) -> RunRecord {
        let (level, lsize, rsize) = match setup.precond {
            Precond::None => (None, None, None),
            Precond::Level(l) => (Some(l), None, None),
            Precond::Memory(m) if m.is_unlimited() => (None, None, None),
            Precond::Memory(m) => (None, Some(m.lsize), Some(m.rsize)),
        };
        let rep = &self.report;
        RunRecord {
            problem: problem.to_string(),
            m: a.nrows(),
            n: a.ncols(),
            precond: setup.precond.to_string(),
            level,
            lsize,
            rsize,
            fact: setup.fact.to_string(),
            apply: setup.apply.to_string(),
            matvec: setup.lsqr.matvec_format.to_string(),
            criterion: setup.lsqr.criterion.to_string(),
            delta: setup.lsqr.delta,
            reorth: setup.lsqr.reorth.to_string(),
            iterations: rep.iterations,
            termination: rep.termination.to_string(),
            ratio_pt: rep.ratio_pt,
            ratio_ps: Some(rep.ratio_ps),
            ratio_gs: rep.final_residual.map(|f| f.ratio_gs).or(rep.ratio_gs),
            rnorm: rep.final_residual.map(|f| f.rnorm),
            alpha: self.factor.as_ref().map_or(0.0, |f| f.alpha),
            restarts: self.factor.as_ref().map_or(0, |f| f.restarts),
            nnz_l: self.nnz_l(),
            nout: None,
            nsol: None,
            wall_time_s: self.factor_seconds + self.solve_seconds,
        }
    }
}

/// Factor the normal matrix of the scaled `B` as configured.
pub fn build_factor(
    b: &SparseMatrix,
    setup: &SolveSetup,
) -> Result<(Option<IcFactor>, usize, usize)> {
    if setup.precond == Precond::None {
        return Ok((None, 0, 0));
    }
    let (b_fact, audit) = squeeze_matrix(b, setup.fact);
    let c = form_normal(&b_fact, setup.fact);
    let factor = match setup.precond {
        Precond::Level(l) => ic_level(&c, l, setup.fact, &setup.shifts)?,
        Precond::Memory(lim) => ic_memory_limited(&c, lim, setup.fact, &setup.shifts)?,
        Precond::None => unreachable!(),
    };
    Ok((Some(factor), audit.lost(), c.lost_entries))
}

/// Solve `min ||b - A x||_2` with preconditioned LSQR.
pub fn solve(a: &SparseMatrix, b: &[f64], setup: &SolveSetup) -> Result<SolveOutcome> {
    let scaling = scale_columns(a)?;
    let t0 = Instant::now();
    let (factor, squeeze_lost, normal_lost) = build_factor(&scaling.matrix, setup)?;
    let factor_seconds = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let report = match &factor {
        Some(f) => lsqr(
            &scaling.matrix,
            b,
            &CholeskyPreconditioner::new(f, setup.apply),
            &setup.lsqr,
        )?,
        None => lsqr(
            &scaling.matrix,
            b,
            &IdentityPreconditioner { n: a.ncols() },
            &setup.lsqr,
        )?,
    };
    let solve_seconds = t1.elapsed().as_secs_f64();
    Ok(SolveOutcome {
        x: scaling.unscale(&report.y),
        report,
        factor,
        squeeze_lost,
        normal_lost,
        factor_seconds,
        solve_seconds,
    })
}

/// Run LSQR-IR and summarize it as a [`RunRecord`].
pub fn refine_record(
    problem: &str,
    a: &SparseMatrix,
    b: &[f64],
    cfg: &RefineConfig,
    limits: MemLimits,
) -> Result<(Vec<f64>, RefineReport, RunRecord)> {
    let t0 = Instant::now();
    let (x, rep) = lsqr_ir(a, b, cfg, limits)?;
    let secs = t0.elapsed().as_secs_f64();
    let last = rep.outer.last();
    let unlimited = limits.is_unlimited();
    let record = RunRecord {
        problem: problem.to_string(),
        m: a.nrows(),
        n: a.ncols(),
        precond: Precond::Memory(limits).to_string(),
        level: None,
        lsize: (!unlimited).then_some(limits.lsize),
        rsize: (!unlimited).then_some(limits.rsize),
        fact: cfg.fact.to_string(),
        apply: cfg.work.to_string(),
        matvec: cfg.residual.to_string(),
        criterion: cfg.inner.criterion.to_string(),
        delta: cfg.inner.delta,
        reorth: cfg.inner.reorth.to_string(),
        iterations: rep.outer.iter().map(|o| o.inner_iterations).sum(),
        termination: rep.termination.to_string(),
        ratio_pt: None,
        ratio_ps: None,
        ratio_gs: last.map(|o| o.ratio_gs),
        rnorm: last.map(|o| o.rnorm),
        alpha: rep.alpha,
        restarts: 0,
        nnz_l: rep.nnz_l,
        nout: Some(rep.nout),
        nsol: Some(rep.nsol),
        wall_time_s: secs,
    };
    Ok((x, rep, record))
}
