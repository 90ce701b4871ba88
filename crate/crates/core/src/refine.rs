//! LSQR-based iterative refinement in three precisions.
//!
//! The factor is computed in `fact`, corrections are solved by preconditioned
//! LSQR in `work`, and residuals are formed in `residual`.

use serde::{Deserialize, Serialize};

use crate::icfact::{ic_memory_limited, MemLimits, ShiftPolicy};
use crate::krylov::{
    estimate_norm2, gradient_ratio, lsqr, CholeskyPreconditioner, Criterion, LsqrConfig,
    Preconditioner, Termination,
};
use crate::precision::{FpFormat, FP32, FP64};
use crate::sparsela::{
    form_normal, matvec, matvec_t, norm2, scale_columns, solve_lower_in_place,
    solve_upper_t_in_place, squeeze_matrix, SparseMatrix,
};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineConfig {
    /// Precision of the normal matrix and its factor (`u_l`).
    pub fact: FpFormat,
    /// Precision of the inner solves and the solution update (`u_w`).
    pub work: FpFormat,
    /// Precision of the residual computation (`u_r`).
    pub residual: FpFormat,
    pub itmax: usize,
    /// Inner LSQR settings; `matvec_format` is overridden by `work`.
    pub inner: LsqrConfig,
    /// Outer acceptance threshold on `ratio_GS`.
    pub delta2: f64,
    /// Stagnation threshold on the relative residual decrease.
    pub eta: f64,
    pub shifts: ShiftPolicy,
    /// Start from the solution of `L L^T y = B^T b` when the factor is complete.
    pub warm_start: bool,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            fact: FP32,
            work: FP64,
            residual: FP64,
            itmax: 20,
            inner: LsqrConfig {
                criterion: Criterion::Pt,
                delta: 1e-5,
                ..LsqrConfig::default()
            },
            delta2: 1e-8,
            eta: 1e3 * FP64.unit_roundoff(),
            shifts: ShiftPolicy::default(),
            warm_start: true,
        }
    }
}

impl RefineConfig {
    pub fn validate(&self) -> Result<(), String> {
        let u = |f: FpFormat| f.unit_roundoff();
        if !(u(self.fact) >= u(self.work) && u(self.work) >= u(self.residual)) {
            return Err(format!(
                "precisions must satisfy fact >= work >= residual, got {} / {} / {}",
                self.fact, self.work, self.residual
            ));
        }
        if !(self.delta2 > 0.0 && self.eta > 0.0 && self.inner.delta > 0.0) {
            return Err("delta2, eta and the inner tolerance must be positive".into());
        }
        if self.itmax == 0 {
            return Err("itmax must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefineTermination {
    ConvergedGs,
    Stagnated,
    ResidualIncrease,
    Itmax,
}

impl std::fmt::Display for RefineTermination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RefineTermination::ConvergedGs => "converged_gs",
            RefineTermination::Stagnated => "stagnated",
            RefineTermination::ResidualIncrease => "residual_increase",
            RefineTermination::Itmax => "itmax",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuterRecord {
    pub inner_iterations: usize,
    pub inner_termination: Termination,
    /// `ratio_GS` of the updated iterate.
    pub ratio_gs: f64,
    /// `||r||` of the updated iterate.
    pub rnorm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineReport {
    pub nout: usize,
    /// Solves with `L` and `L^T` (counted as one per pair).
    pub nsol: usize,
    /// Products with `A` and `A^T`, counted per pair: one per inner
    /// iteration, one per outer residual update and one for a warm start.
    pub matvecs: usize,
    pub outer: Vec<OuterRecord>,
    pub termination: RefineTermination,
    pub warm_started: bool,
    pub alpha: f64,
    pub nnz_l: usize,
}

/// Refine on an already scaled matrix `B` with a given preconditioner.
///
/// Returns the solution `y` of `min ||rhs - B y||`.
pub fn refine_scaled<P: Preconditioner>(
    b_mat: &SparseMatrix,
    rhs: &[f64],
    m: &P,
    cfg: &RefineConfig,
    y0: Option<Vec<f64>>,
) -> Result<(Vec<f64>, RefineReport)> {
    cfg.validate().map_err(Error::Config)?;
    let (w, rf) = (cfg.work, cfg.residual);
    let n = b_mat.ncols();
    let mut inner = cfg.inner.clone();
    inner.matvec_format = w;
    inner.final_residual = false;
    if inner.criterion == Criterion::Pt || inner.track_all {
        inner
            .norm2
            .get_or_insert_with(|| estimate_norm2(b_mat, inner.norm_tol, inner.norm_maxit));
    }

    let warm_started = y0.is_some();
    let mut report = RefineReport {
        nout: 0,
        nsol: usize::from(warm_started),
        matvecs: usize::from(warm_started),
        outer: Vec::new(),
        termination: RefineTermination::Itmax,
        warm_started,
        alpha: 0.0,
        nnz_l: 0,
    };
    let mut y = y0.unwrap_or_else(|| vec![0.0; n]);
    let residual = |y: &[f64]| -> Vec<f64> {
        let by = matvec(b_mat, y, rf);
        rhs.iter().zip(&by).map(|(bi, v)| rf.sub(*bi, *v)).collect()
    };
    let mut r = if warm_started {
        residual(&y)
    } else {
        rhs.iter().map(|&v| rf.round(v)).collect()
    };
    let mut rnorm = norm2(&r);
    let r0_ratio = gradient_ratio(b_mat, rhs);

    for _ in 0..cfg.itmax {
        let rw: Vec<f64> = r.iter().map(|&v| w.round(v)).collect();
        let sol = lsqr(b_mat, &rw, m, &inner)?;
        report.nout += 1;
        report.nsol += sol.solves;
        report.matvecs += sol.products_b + 1;
        let y_prev = y.clone();
        y.iter_mut()
            .zip(&sol.y)
            .for_each(|(yi, d)| *yi = w.add(*yi, *d));

        let r_next = residual(&y);
        let rn_next = norm2(&r_next);
        let gs = if rn_next == 0.0 || r0_ratio == 0.0 {
            0.0
        } else {
            gradient_ratio(b_mat, &r_next) / r0_ratio
        };
        report.outer.push(OuterRecord {
            inner_iterations: sol.iterations,
            inner_termination: sol.termination,
            ratio_gs: gs,
            rnorm: rn_next,
        });
        if gs < cfg.delta2 {
            report.termination = RefineTermination::ConvergedGs;
            return Ok((y, report));
        }
        if rn_next > rnorm {
            report.termination = RefineTermination::ResidualIncrease;
            return Ok((y_prev, report));
        }
        if (rnorm - rn_next) / rn_next <= cfg.eta {
            report.termination = RefineTermination::Stagnated;
            return Ok((y, report));
        }
        r = r_next;
        rnorm = rn_next;
    }
    Ok((y, report))
}

/// Solve `min ||b - A x||_2` by LSQR-based iterative refinement.
///
/// `A` is column-scaled, converted to `cfg.fact`, and its normal matrix is
/// factorized there under `limits`; that factor preconditions every inner
/// solve.
pub fn lsqr_ir(
    a: &SparseMatrix,
    b: &[f64],
    cfg: &RefineConfig,
    limits: MemLimits,
) -> Result<(Vec<f64>, RefineReport)> {
    cfg.validate().map_err(Error::Config)?;
    let scaling = scale_columns(a)?;
    let (b_fact, _) = squeeze_matrix(&scaling.matrix, cfg.fact);
    let c = form_normal(&b_fact, cfg.fact);
    let factor = ic_memory_limited(&c, limits, cfg.fact, &cfg.shifts)?;
    let m = CholeskyPreconditioner::new(&factor, cfg.work);
    let y0 = if cfg.warm_start && limits.is_unlimited() {
        let mut t = matvec_t(&scaling.matrix, b, cfg.work);
        solve_lower_in_place(&factor.l, &mut t, cfg.work)?;
        solve_upper_t_in_place(&factor.l, &mut t, cfg.work)?;
        Some(t)
    } else {
        None
    };
    let (y, mut report) = refine_scaled(&scaling.matrix, b, &m, cfg, y0)?;
    report.alpha = factor.alpha;
    report.nnz_l = factor.nnz();
    Ok((scaling.unscale(&y), report))
}
