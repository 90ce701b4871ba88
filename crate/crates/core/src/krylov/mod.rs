//! Preconditioned LSQR with selectable stopping criteria.
//!
//! The solver works on the column-scaled matrix `B` and a right
//! preconditioner `M`, running Golub–Kahan bidiagonalization on `B M^{-1}`.
//! Recurrence scalars and stopping arithmetic are always fp64; only the
//! products with `B` and the applications of `M^{-1}` may be rounded into a
//! narrower format.

mod norm;
mod reorth;
mod stopping;

pub use norm::estimate_norm2;
pub use reorth::{collapsed, reorthogonalize, Basis, ReorthPolicy, UnknownPolicy};
pub use stopping::{gradient_ratio, ratio_gs, ratio_ps, ratio_pt, EstimatorParams, EstimatorState};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::icfact::IcFactor;
use crate::precision::{FpFormat, FP64};
use crate::sparsela::{
    matvec_into, matvec_t_into, norm2, solve_lower_in_place, solve_upper_t_in_place, SparseError,
    SparseMatrix,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolveError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("right-hand side contains non-finite values")]
    NonFinite,
    #[error(transparent)]
    Sparse(#[from] SparseError),
}

/// A right preconditioner `M`, accessed only through its inverse.
pub trait Preconditioner {
    fn dim(&self) -> usize;

    /// `v <- M^{-1} v`.
    fn apply_inv(&self, v: &mut [f64]) -> Result<(), SparseError>;

    /// `v <- M^{-T} v`.
    fn apply_inv_t(&self, v: &mut [f64]) -> Result<(), SparseError>;

    /// Precision in which applications are carried out.
    fn format(&self) -> FpFormat;
}

#[derive(Debug, Clone, Copy)]
pub struct IdentityPreconditioner {
    pub n: usize,
}

impl Preconditioner for IdentityPreconditioner {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply_inv(&self, _v: &mut [f64]) -> Result<(), SparseError> {
        Ok(())
    }

    fn apply_inv_t(&self, _v: &mut [f64]) -> Result<(), SparseError> {
        Ok(())
    }

    fn format(&self) -> FpFormat {
        FP64
    }
}

/// `M = L^T` for an incomplete Cholesky factor `L`, so that
/// `(B M^{-1})^T (B M^{-1}) = L^{-1} B^T B L^{-T}`.
#[derive(Debug, Clone)]
pub struct CholeskyPreconditioner<'a> {
    pub l: &'a SparseMatrix,
    pub format: FpFormat,
}

impl<'a> CholeskyPreconditioner<'a> {
    pub fn new(factor: &'a IcFactor, format: FpFormat) -> Self {
        Self {
            l: &factor.l,
            format,
        }
    }
}

impl Preconditioner for CholeskyPreconditioner<'_> {
    fn dim(&self) -> usize {
        self.l.ncols()
    }

    fn apply_inv(&self, v: &mut [f64]) -> Result<(), SparseError> {
        solve_upper_t_in_place(self.l, v, self.format)
    }

    fn apply_inv_t(&self, v: &mut [f64]) -> Result<(), SparseError> {
        solve_lower_in_place(self.l, v, self.format)
    }

    fn format(&self) -> FpFormat {
        self.format
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    /// Explicit gradient ratio `ratio_GS`.
    Gs,
    /// Recurrence-estimated backward error `ratio_PS`.
    Ps,
    /// Estimated `A^T A`-norm error `ratio_PT`.
    Pt,
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Criterion::Gs => "gs",
            Criterion::Ps => "ps",
            Criterion::Pt => "pt",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown stopping criterion `{0}` (expected gs, ps or pt)")]
pub struct UnknownCriterion(pub String);

impl FromStr for Criterion {
    type Err = UnknownCriterion;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gs" => Ok(Criterion::Gs),
            "ps" => Ok(Criterion::Ps),
            "pt" => Ok(Criterion::Pt),
            _ => Err(UnknownCriterion(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LsqrConfig {
    pub criterion: Criterion,
    pub delta: f64,
    /// Absolute residual tolerance for consistent systems under `Gs`.
    pub delta1: Option<f64>,
    pub max_iter: usize,
    /// Evaluate the explicit gradient ratio every this many iterations.
    pub gs_period: usize,
    pub reorth: ReorthPolicy,
    pub matvec_format: FpFormat,
    pub estimator: EstimatorParams,
    /// Use the square root of the estimator in `ratio_PT`.
    pub pt_sqrt: bool,
    /// Precomputed `||B||_2`; estimated when needed and absent.
    pub norm2: Option<f64>,
    pub norm_tol: f64,
    pub norm_maxit: usize,
    /// Record every ratio in the history, not only the one driving termination.
    pub track_all: bool,
    /// Compute the true residual and gradient once at exit.
    pub final_residual: bool,
    /// Upper bound on memory for stored bases, in bytes.
    pub basis_cap_bytes: usize,
}

impl Default for LsqrConfig {
    fn default() -> Self {
        Self {
            criterion: Criterion::Pt,
            delta: 1e-10,
            delta1: None,
            max_iter: 3000,
            gs_period: 1,
            reorth: ReorthPolicy::None,
            matvec_format: FP64,
            estimator: EstimatorParams::default(),
            pt_sqrt: true,
            norm2: None,
            norm_tol: 1e-4,
            norm_maxit: 100,
            track_all: false,
            final_residual: true,
            basis_cap_bytes: 1 << 31,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIter,
    /// `beta` or `mu` vanished: the Krylov space is exhausted and the
    /// current iterate is exact in exact arithmetic.
    LuckyBreakdown,
    /// A preconditioner application overflowed.
    ApplyBreakdown,
    /// Stored bases would exceed the configured memory cap.
    MemoryCap,
}

impl Termination {
    /// Short marker used in summary tables.
    pub fn marker(&self) -> &'static str {
        match self {
            Termination::Converged | Termination::LuckyBreakdown => "",
            Termination::MaxIter => "†",
            Termination::ApplyBreakdown => "‡",
            Termination::MemoryCap => "∗",
        }
    }
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::Converged => "converged",
            Termination::MaxIter => "max_iter",
            Termination::LuckyBreakdown => "lucky_breakdown",
            Termination::ApplyBreakdown => "apply_breakdown",
            Termination::MemoryCap => "memory_cap",
        })
    }
}

/// Per-iteration record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub iter: usize,
    /// Estimate of `||r||`.
    pub phibar: f64,
    /// Estimate of `||(B M^{-1})^T r||`.
    pub est_normt_r: f64,
    pub ratio_pt: Option<f64>,
    pub ratio_ps: f64,
    pub ratio_gs: Option<f64>,
    /// Index of the iterate the error estimate refers to (1-based `l_i`).
    pub ell: Option<usize>,
    /// Squared error-norm estimate for the iterate after `l_i - 1` steps.
    pub error_estimate: Option<f64>,
}

/// True quantities computed once at exit in fp64.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FinalResidual {
    pub rnorm: f64,
    pub normt_r: f64,
    pub ratio_gs: f64,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub iterations: usize,
    pub termination: Termination,
    pub history: Vec<IterRecord>,
    /// Solution of the scaled problem, `y = M^{-1} z`; `x = S y`.
    pub y: Vec<f64>,
    pub ratio_pt: Option<f64>,
    pub ratio_ps: f64,
    pub ratio_gs: Option<f64>,
    pub norm2_estimate: Option<f64>,
    pub frobenius_estimate: f64,
    /// Products `B v` and `B^T u` performed by the iteration itself.
    pub products_b: usize,
    pub products_bt: usize,
    /// Extra products spent on explicit gradient checks and exit diagnostics.
    pub monitor_products: usize,
    /// Applications of `M^{-1}` (each paired with one of `M^{-T}`).
    pub solves: usize,
    pub breakdown_position: Option<usize>,
    pub final_residual: Option<FinalResidual>,
    /// `max |P^T P - I|` over the stored `p` basis, when tracked.
    pub basis_orthogonality: Option<f64>,
}

struct Workspace<'a, P: Preconditioner> {
    b: &'a SparseMatrix,
    m: &'a P,
    fmt: FpFormat,
    products_b: usize,
    products_bt: usize,
    solves: usize,
}

impl<P: Preconditioner> Workspace<'_, P> {
    /// `out = B M^{-1} p`, also returning `M^{-1} p` in `t`.
    fn forward(&mut self, p: &[f64], t: &mut [f64], out: &mut [f64]) -> Result<(), SparseError> {
        t.copy_from_slice(p);
        self.m.apply_inv(t)?;
        self.solves += 1;
        matvec_into(self.b, t, self.fmt, out);
        self.products_b += 1;
        Ok(())
    }

    /// `out = M^{-T} B^T q`.
    fn adjoint(&mut self, q: &[f64], out: &mut [f64]) -> Result<(), SparseError> {
        matvec_t_into(self.b, q, self.fmt, out);
        self.products_bt += 1;
        self.m.apply_inv_t(out)
    }
}

fn residual(b_mat: &SparseMatrix, rhs: &[f64], y: &[f64]) -> Vec<f64> {
    let mut r = vec![0.0; rhs.len()];
    matvec_into(b_mat, y, FP64, &mut r);
    r.iter_mut().zip(rhs).for_each(|(ri, bi)| *ri = bi - *ri);
    r
}

/// Solve `min ||rhs - B y||_2` by LSQR on `B M^{-1}`.
pub fn lsqr<P: Preconditioner>(
    b_mat: &SparseMatrix,
    rhs: &[f64],
    m: &P,
    cfg: &LsqrConfig,
) -> Result<SolveReport, SolveError> {
    let (nrows, n) = (b_mat.nrows(), b_mat.ncols());
    if rhs.len() != nrows {
        return Err(SolveError::Dimension(format!(
            "rhs has length {}, matrix has {nrows} rows",
            rhs.len()
        )));
    }
    if m.dim() != n {
        return Err(SolveError::Dimension(format!(
            "preconditioner of order {} for {n} columns",
            m.dim()
        )));
    }
    if rhs.iter().any(|v| !v.is_finite()) {
        return Err(SolveError::NonFinite);
    }

    let mut report = SolveReport {
        iterations: 0,
        termination: Termination::Converged,
        history: Vec::new(),
        y: vec![0.0; n],
        ratio_pt: None,
        ratio_ps: 0.0,
        ratio_gs: None,
        norm2_estimate: None,
        frobenius_estimate: 0.0,
        products_b: 0,
        products_bt: 0,
        monitor_products: 0,
        solves: 0,
        breakdown_position: None,
        final_residual: None,
        basis_orthogonality: None,
    };
    let norm_b = norm2(rhs);
    let need_pt = cfg.criterion == Criterion::Pt || cfg.track_all;
    let need_gs = cfg.criterion == Criterion::Gs || cfg.track_all;
    let norm_a2 = if need_pt {
        let v = cfg
            .norm2
            .unwrap_or_else(|| estimate_norm2(b_mat, cfg.norm_tol, cfg.norm_maxit));
        report.norm2_estimate = Some(v);
        v
    } else {
        0.0
    };
    // ||B^T r0|| / ||r0|| with r0 = rhs.
    let r0_ratio = if need_gs {
        report.monitor_products += 1;
        gradient_ratio(b_mat, rhs)
    } else {
        0.0
    };

    if norm_b == 0.0 {
        report.ratio_pt = Some(0.0);
        report.ratio_gs = Some(0.0);
        report.final_residual = Some(FinalResidual {
            rnorm: 0.0,
            normt_r: 0.0,
            ratio_gs: 0.0,
        });
        return Ok(report);
    }

    let mut ws = Workspace {
        b: b_mat,
        m,
        fmt: cfg.matvec_format,
        products_b: 0,
        products_bt: 0,
        solves: 0,
    };
    let finish = |mut report: SolveReport,
                  ws: &Workspace<'_, P>,
                  pb: &Basis,
                  term: Termination|
     -> SolveReport {
        if cfg.track_all && !pb.is_empty() {
            report.basis_orthogonality = Some(orthogonality_loss(pb));
        }
        report.termination = term;
        report.products_b = ws.products_b;
        report.products_bt = ws.products_bt;
        report.solves = ws.solves;
        if cfg.final_residual {
            let r = residual(b_mat, rhs, &report.y);
            let rnorm = norm2(&r);
            let mut g = vec![0.0; n];
            matvec_t_into(b_mat, &r, FP64, &mut g);
            let normt_r = norm2(&g);
            let gs0 = if r0_ratio > 0.0 {
                r0_ratio
            } else {
                gradient_ratio(b_mat, rhs)
            };
            let ratio_gs = if rnorm == 0.0 {
                0.0
            } else {
                (normt_r / rnorm) / gs0
            };
            report.monitor_products += 2 + usize::from(r0_ratio == 0.0);
            report.final_residual = Some(FinalResidual {
                rnorm,
                normt_r,
                ratio_gs,
            });
        }
        report
    };

    let mut qb = Basis::new(cfg.reorth.window());
    let mut pb = Basis::new(cfg.reorth.window());
    let mut basis_bytes = 0usize;

    // Initialization.
    let beta1 = norm_b;
    let mut q: Vec<f64> = rhs.iter().map(|v| v / beta1).collect();
    let mut p = vec![0.0; n];
    if let Err(e) = ws.adjoint(&q, &mut p) {
        report.breakdown_position = apply_position(&e);
        return Ok(finish(report, &ws, &pb, Termination::ApplyBreakdown));
    }
    let mut mu = norm2(&p);
    if mu == 0.0 {
        // rhs is orthogonal to the range of B: y = 0 is the solution.
        report.ratio_pt = Some(0.0);
        report.ratio_gs = Some(0.0);
        return Ok(finish(report, &ws, &pb, Termination::LuckyBreakdown));
    }
    p.iter_mut().for_each(|v| *v /= mu);
    if cfg.reorth.reorth_q() {
        qb.push(&q);
        basis_bytes += q.len() * 8;
    }
    if cfg.reorth.reorth_p() {
        pb.push(&p);
        basis_bytes += p.len() * 8;
    }
    let mut rhobar = mu;
    let mut phibar = beta1;
    // w_hat = M^{-1} w, tracked so that y = M^{-1} z needs no final solve.
    let mut w_hat = vec![0.0; n];
    let mut theta_prev = 0.0;
    let mut t = vec![0.0; n];
    let mut u = vec![0.0; nrows];
    let mut v = vec![0.0; n];
    let mut estimator = EstimatorState::new(cfg.estimator);
    let mut frob2 = 0.0;

    for i in 1..=cfg.max_iter {
        // beta_{i+1} q_{i+1} = B M^{-1} p_i - mu_i q_i
        if let Err(e) = ws.forward(&p, &mut t, &mut u) {
            report.breakdown_position = apply_position(&e);
            return Ok(finish(report, &ws, &pb, Termination::ApplyBreakdown));
        }
        let bp_norm = norm2(&u);
        u.iter_mut().zip(&q).for_each(|(ui, qi)| *ui -= mu * qi);
        let mut beta = norm2(&u);
        let mut lucky = collapsed(bp_norm, beta);
        if cfg.reorth.reorth_q() && !lucky {
            let (before, after) = reorthogonalize(&qb, &mut u);
            lucky = collapsed(before, after);
            beta = after;
        }
        if !lucky {
            u.iter_mut().for_each(|x| *x /= beta);
        } else {
            beta = 0.0;
        }
        std::mem::swap(&mut q, &mut u);

        // mu_{i+1} p_{i+1} = M^{-T} B^T q_{i+1} - beta_{i+1} p_i
        let mut mu_next = 0.0;
        if !lucky {
            if let Err(e) = ws.adjoint(&q, &mut v) {
                report.breakdown_position = apply_position(&e);
                return Ok(finish(report, &ws, &pb, Termination::ApplyBreakdown));
            }
            let atq_norm = norm2(&v);
            v.iter_mut().zip(&p).for_each(|(vi, pi)| *vi -= beta * pi);
            mu_next = norm2(&v);
            if collapsed(atq_norm, mu_next) {
                mu_next = 0.0;
            }
            if cfg.reorth.reorth_p() && mu_next != 0.0 {
                let (before, after) = reorthogonalize(&pb, &mut v);
                mu_next = if collapsed(before, after) { 0.0 } else { after };
            }
            if mu_next != 0.0 {
                v.iter_mut().for_each(|x| *x /= mu_next);
            } else {
                lucky = true;
            }
        }

        // Plane rotation eliminating beta_{i+1}.
        let rho = rhobar.hypot(beta);
        let c = rhobar / rho;
        let s = beta / rho;
        let gamma = s * mu_next;
        rhobar = -c * mu_next;
        let phi = c * phibar;
        phibar *= s;

        // w_hat_i = M^{-1} p_i - theta_{i-1} w_hat_{i-1}; y += (phi/rho) w_hat_i
        w_hat
            .iter_mut()
            .zip(&t)
            .for_each(|(w, ti)| *w = ti - theta_prev * *w);
        let step = phi / rho;
        report
            .y
            .iter_mut()
            .zip(&w_hat)
            .for_each(|(y, w)| *y += step * w);
        theta_prev = gamma / rho;

        frob2 += mu * mu + beta * beta;
        let frob = frob2.sqrt();
        report.frobenius_estimate = frob;
        let est_normt_r = phibar * mu_next * c.abs();
        let ps = ratio_ps(est_normt_r, frob, phibar);
        report.ratio_ps = ps;
        let (ell, estim) = estimator.push(phi);
        let norm_y = norm2(&report.y);
        let pt = if lucky {
            Some(0.0)
        } else if need_pt {
            estim.map(|e| ratio_pt(e, norm_a2, norm_y, norm_b, cfg.pt_sqrt))
        } else {
            None
        };
        if pt.is_some() {
            report.ratio_pt = pt;
        }
        let gs = if need_gs && (i % cfg.gs_period.max(1) == 0 || lucky) {
            report.monitor_products += 2;
            let r = residual(b_mat, rhs, &report.y);
            Some((ratio_gs(b_mat, &r, r0_ratio), norm2(&r)))
        } else {
            None
        };
        if let Some((g, _)) = gs {
            report.ratio_gs = Some(g);
        }
        report.history.push(IterRecord {
            iter: i,
            phibar,
            est_normt_r,
            ratio_pt: pt,
            ratio_ps: ps,
            ratio_gs: gs.map(|x| x.0),
            ell: if lucky { None } else { estim.map(|_| ell) },
            error_estimate: if lucky { None } else { estim },
        });
        report.iterations = i;

        if lucky {
            return Ok(finish(report, &ws, &pb, Termination::LuckyBreakdown));
        }
        let converged = match cfg.criterion {
            Criterion::Pt => pt.is_some_and(|r| r < cfg.delta),
            Criterion::Ps => ps <= cfg.delta || phibar <= cfg.delta * (frob * norm_y + norm_b),
            Criterion::Gs => {
                gs.is_some_and(|(g, rn)| g < cfg.delta || cfg.delta1.is_some_and(|d1| rn < d1))
            }
        };
        if converged {
            return Ok(finish(report, &ws, &pb, Termination::Converged));
        }

        std::mem::swap(&mut p, &mut v);
        mu = mu_next;
        if i == cfg.max_iter {
            break;
        }
        let grow = if cfg.reorth.reorth_q() {
            qb.growth_bytes(nrows)
        } else {
            0
        } + if cfg.reorth.reorth_p() {
            pb.growth_bytes(n)
        } else {
            0
        };
        if basis_bytes + grow > cfg.basis_cap_bytes {
            return Ok(finish(report, &ws, &pb, Termination::MemoryCap));
        }
        basis_bytes += grow;
        if cfg.reorth.reorth_q() {
            qb.push(&q);
        }
        if cfg.reorth.reorth_p() {
            pb.push(&p);
        }
    }
    Ok(finish(report, &ws, &pb, Termination::MaxIter))
}

fn orthogonality_loss(basis: &Basis) -> f64 {
    let vs: Vec<&Vec<f64>> = basis.iter().collect();
    let mut worst = 0.0f64;
    for (a, u) in vs.iter().enumerate() {
        for (b, w) in vs.iter().enumerate().skip(a) {
            let target = if a == b { 1.0 } else { 0.0 };
            worst = worst.max((crate::sparsela::dot(u, w) - target).abs());
        }
    }
    worst
}

fn apply_position(e: &SparseError) -> Option<usize> {
    match e {
        SparseError::ApplyBreakdown { position } => Some(*position),
        _ => None,
    }
}
