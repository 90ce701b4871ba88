//! Incomplete Cholesky factorizations of a normal matrix in a chosen precision.
//!
//! Both variants share one left-looking engine. Column `j` is gathered from
//! `C`, updated by earlier columns through row lists of `L` and `R`, pruned,
//! and scaled by its pivot. Every arithmetic operation is rounded into the
//! factorization format. A breakdown restarts the whole factorization on
//! `C + alpha I` with a larger shift.

mod guard;
mod levels;

pub use guard::{b3_safe, BreakdownKind, RowMax};
pub use levels::{symbolic_levels, LevelPattern};

use serde::{Deserialize, Serialize};

use crate::precision::FpFormat;
use crate::sparsela::{NormalMatrix, SparseMatrix};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum IcError {
    #[error("shift {alpha:e} needed to avoid breakdown exceeds the cap {cap:e}")]
    ShiftBudgetExceeded {
        alpha: f64,
        cap: f64,
        log: Vec<BreakdownEvent>,
    },
    #[error("normal matrix is not a square lower triangle: {0}")]
    NotSymmetric(String),
    #[error("invalid memory limits: lsize must be at least 1")]
    InvalidLimits,
}

/// Per-column storage limits for the memory-limited factorization.
///
/// `lsize` counts off-diagonal entries; the pivot is always kept.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemLimits {
    pub lsize: usize,
    pub rsize: usize,
}

impl MemLimits {
    pub fn new(lsize: usize, rsize: usize) -> Self {
        Self { lsize, rsize }
    }

    /// Keep everything: the result is a complete Cholesky factor.
    pub fn unlimited() -> Self {
        Self {
            lsize: usize::MAX,
            rsize: 0,
        }
    }

    pub fn is_unlimited(&self) -> bool {
        self.lsize == usize::MAX
    }
}

/// Global diagonal shift strategy used after a breakdown.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftPolicy {
    /// First shift as a multiple of the largest diagonal entry.
    pub initial_factor: f64,
    pub growth: f64,
    /// Largest admissible shift as a multiple of the largest diagonal entry.
    pub cap_factor: f64,
}

impl Default for ShiftPolicy {
    fn default() -> Self {
        Self {
            initial_factor: 1e-3,
            growth: 2.0,
            cap_factor: 1.0,
        }
    }
}

/// Shift to use after a breakdown at shift `alpha`.
pub fn next_shift(policy: &ShiftPolicy, alpha: f64, max_diag: f64) -> Result<f64, f64> {
    let cap = policy.cap_factor * max_diag;
    let next = if alpha == 0.0 {
        policy.initial_factor * max_diag
    } else {
        policy.growth * alpha
    };
    if next > cap || next <= 0.0 || !next.is_finite() {
        Err(cap)
    } else {
        Ok(next)
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BreakdownEvent {
    pub column: usize,
    pub kind: BreakdownKind,
    /// Shift in effect when the breakdown happened.
    pub alpha: f64,
    /// Shift used for the restart, if one was admissible.
    pub restart_alpha: Option<f64>,
}

/// An incomplete Cholesky factor `C + alpha I ≈ L L^T`.
#[derive(Debug, Clone)]
pub struct IcFactor {
    pub l: SparseMatrix,
    pub format: FpFormat,
    pub alpha: f64,
    pub restarts: usize,
    pub breakdown_log: Vec<BreakdownEvent>,
}

impl IcFactor {
    pub fn nnz(&self) -> usize {
        self.l.nnz()
    }
}

/// Diagnostics for one column of a traced factorization.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct ColumnTrace {
    pub column: usize,
    /// Outcome of the a-priori overflow test.
    pub b3_safe: bool,
    /// Some update rounded to a non-finite value.
    pub overflow_seen: bool,
    /// Pivot computed in the column loop.
    pub pivot: f64,
    /// Pivot predicted by look-ahead.
    pub lookahead_pivot: f64,
}

/// A factorization together with everything the engine discarded.
#[derive(Debug, Clone)]
pub struct TracedFactor {
    pub factor: IcFactor,
    /// Scaled columns of `R` from the final, successful attempt.
    pub r: SparseMatrix,
    /// Column diagnostics of every attempt, in order.
    pub columns: Vec<ColumnTrace>,
}

#[derive(Clone, Copy)]
enum Mode<'a> {
    Memory(MemLimits),
    Level(&'a LevelPattern),
}

/// Level-based IC(ℓ): the factor is restricted to the level-`level` fill pattern.
pub fn ic_level(
    c: &NormalMatrix,
    level: usize,
    format: FpFormat,
    shifts: &ShiftPolicy,
) -> Result<IcFactor, IcError> {
    validate(&c.matrix)?;
    let pattern = symbolic_levels(&c.matrix, level);
    Ok(factorize(&c.matrix, Mode::Level(&pattern), format, shifts, None)?.0)
}

/// Memory-limited IC keeping the `lsize` largest off-diagonals of each column
/// in `L` and the next `rsize` in a temporary `R` used only during the
/// factorization.
pub fn ic_memory_limited(
    c: &NormalMatrix,
    limits: MemLimits,
    format: FpFormat,
    shifts: &ShiftPolicy,
) -> Result<IcFactor, IcError> {
    validate(&c.matrix)?;
    if limits.lsize == 0 {
        return Err(IcError::InvalidLimits);
    }
    Ok(factorize(&c.matrix, Mode::Memory(limits), format, shifts, None)?.0)
}

/// As [`ic_memory_limited`], checking every update for overflow and keeping
/// `R` and per-column diagnostics.
pub fn ic_memory_limited_traced(
    c: &NormalMatrix,
    limits: MemLimits,
    format: FpFormat,
    shifts: &ShiftPolicy,
) -> Result<TracedFactor, (IcError, Vec<ColumnTrace>)> {
    validate(&c.matrix).map_err(|e| (e, Vec::new()))?;
    if limits.lsize == 0 {
        return Err((IcError::InvalidLimits, Vec::new()));
    }
    let mut trace = Vec::new();
    match factorize(
        &c.matrix,
        Mode::Memory(limits),
        format,
        shifts,
        Some(&mut trace),
    ) {
        Ok((factor, r)) => Ok(TracedFactor {
            factor,
            r: r.expect("traced run keeps R"),
            columns: trace,
        }),
        Err(e) => Err((e, trace)),
    }
}

fn validate(c: &SparseMatrix) -> Result<(), IcError> {
    if c.nrows() != c.ncols() {
        return Err(IcError::NotSymmetric(format!(
            "{}x{} matrix",
            c.nrows(),
            c.ncols()
        )));
    }
    if !c.is_lower_triangular() {
        return Err(IcError::NotSymmetric("entries above the diagonal".into()));
    }
    Ok(())
}

fn factorize(
    c: &SparseMatrix,
    mode: Mode<'_>,
    format: FpFormat,
    shifts: &ShiftPolicy,
    mut trace: Option<&mut Vec<ColumnTrace>>,
) -> Result<(IcFactor, Option<SparseMatrix>), IcError> {
    let n = c.ncols();
    let max_diag = (0..n).map(|j| c.get(j, j)).fold(0.0f64, f64::max);
    let mut alpha = 0.0;
    let mut log = Vec::new();
    let mut engine = Engine::new(c, mode, format);
    loop {
        match engine.run(alpha, trace.as_deref_mut()) {
            Ok(()) => {
                let keep_r = trace.is_some();
                let (l, r) = engine.finish(keep_r);
                let factor = IcFactor {
                    l,
                    format,
                    alpha,
                    restarts: log.len(),
                    breakdown_log: log,
                };
                return Ok((factor, r));
            }
            Err((column, kind)) => match next_shift(shifts, alpha, max_diag) {
                Ok(next) => {
                    log.push(BreakdownEvent {
                        column,
                        kind,
                        alpha,
                        restart_alpha: Some(next),
                    });
                    alpha = next;
                }
                Err(cap) => {
                    log.push(BreakdownEvent {
                        column,
                        kind,
                        alpha,
                        restart_alpha: None,
                    });
                    let next = if alpha == 0.0 {
                        shifts.initial_factor * max_diag
                    } else {
                        shifts.growth * alpha
                    };
                    return Err(IcError::ShiftBudgetExceeded {
                        alpha: next,
                        cap,
                        log,
                    });
                }
            },
        }
    }
}

type Breakdown = (usize, BreakdownKind);

struct Engine<'a> {
    c: &'a SparseMatrix,
    mode: Mode<'a>,
    format: FpFormat,
    n: usize,
    l_cols: Vec<Vec<(usize, f64)>>,
    r_cols: Vec<Vec<(usize, f64)>>,
    /// Entries of `L` (resp. `R`) by row, in increasing column order.
    l_rows: Vec<Vec<(usize, f64)>>,
    r_rows: Vec<Vec<(usize, f64)>>,
    /// Look-ahead estimates of the remaining pivots.
    diag: Vec<f64>,
    /// Shifted diagonal of `C`, the reference for the small-pivot test.
    shifted: Vec<f64>,
    rowmax: RowMax,
    w: Vec<f64>,
    mark: Vec<usize>,
    touched: Vec<usize>,
    allowed: Vec<usize>,
}

impl<'a> Engine<'a> {
    fn new(c: &'a SparseMatrix, mode: Mode<'a>, format: FpFormat) -> Self {
        let n = c.ncols();
        Self {
            c,
            mode,
            format,
            n,
            l_cols: Vec::with_capacity(n),
            r_cols: Vec::with_capacity(n),
            l_rows: vec![Vec::new(); n],
            r_rows: vec![Vec::new(); n],
            diag: vec![0.0; n],
            shifted: vec![0.0; n],
            rowmax: RowMax::new(n),
            w: vec![0.0; n],
            mark: vec![usize::MAX; n],
            touched: Vec::new(),
            allowed: vec![usize::MAX; n],
        }
    }

    fn reset(&mut self, alpha: f64) {
        let f = self.format;
        self.l_cols.clear();
        self.r_cols.clear();
        self.l_rows.iter_mut().for_each(Vec::clear);
        self.r_rows.iter_mut().for_each(Vec::clear);
        self.rowmax = RowMax::new(self.n);
        self.mark.iter_mut().for_each(|m| *m = usize::MAX);
        self.allowed.iter_mut().for_each(|m| *m = usize::MAX);
        for j in 0..self.n {
            let d = f.add(self.c.get(j, j), alpha);
            self.shifted[j] = d;
            self.diag[j] = d;
        }
    }

    #[inline]
    fn pivot_ok(&self, j: usize, value: f64) -> bool {
        let d = self.shifted[j];
        d.is_finite() && value.is_finite() && value > self.format.unit_roundoff() * d
    }

    fn run(
        &mut self,
        alpha: f64,
        mut trace: Option<&mut Vec<ColumnTrace>>,
    ) -> Result<(), Breakdown> {
        self.reset(alpha);
        for j in 0..self.n {
            if !self.pivot_ok(j, self.diag[j]) {
                return Err((j, BreakdownKind::B1));
            }
            self.column(j, trace.as_deref_mut())?;
        }
        Ok(())
    }

    /// Accumulate `w_i -= a*b`; returns `false` if the result is not finite.
    #[inline]
    fn update(&mut self, j: usize, i: usize, a: f64, b: f64) -> bool {
        if let Mode::Level(_) = self.mode {
            if self.allowed[i] != j {
                return true;
            }
        }
        if self.mark[i] != j {
            self.mark[i] = j;
            self.w[i] = 0.0;
            self.touched.push(i);
        }
        let v = if self.format.is_fp64() {
            self.w[i] - a * b
        } else {
            self.format.mul_sub(self.w[i], a, b)
        };
        self.w[i] = v;
        v.is_finite()
    }

    fn column(&mut self, j: usize, trace: Option<&mut Vec<ColumnTrace>>) -> Result<(), Breakdown> {
        let f = self.format;
        self.touched.clear();
        let (rows, vals) = self.c.col(j);
        let mut cmax = self.shifted[j].abs();
        self.mark[j] = j;
        self.w[j] = self.shifted[j];
        self.touched.push(j);
        for (&i, &v) in rows.iter().zip(vals) {
            if i > j {
                self.mark[i] = j;
                self.w[i] = v;
                self.touched.push(i);
                cmax = cmax.max(v.abs());
            }
        }
        if let Mode::Level(p) = self.mode {
            for &i in &p.columns[j] {
                self.allowed[i] = j;
            }
        }

        let safe = b3_safe(j, cmax, &self.rowmax, f);
        let checked = !safe || trace.is_some();
        let mut overflow = false;

        // Updates from columns k with l_jk != 0, through both L and R.
        let l_row = std::mem::take(&mut self.l_rows[j]);
        for &(k, ljk) in &l_row {
            let lk = std::mem::take(&mut self.l_cols[k]);
            let start = lk.partition_point(|&(i, _)| i < j);
            for &(i, lik) in &lk[start..] {
                overflow |= !self.update(j, i, lik, ljk);
            }
            self.l_cols[k] = lk;
            let rk = std::mem::take(&mut self.r_cols[k]);
            let start = rk.partition_point(|&(i, _)| i < j);
            for &(i, rik) in &rk[start..] {
                overflow |= !self.update(j, i, rik, ljk);
            }
            self.r_cols[k] = rk;
            if checked && overflow {
                break;
            }
        }
        self.l_rows[j] = l_row;
        // Updates from columns k with r_jk != 0, through L only.
        if !(checked && overflow) {
            let r_row = std::mem::take(&mut self.r_rows[j]);
            for &(k, rjk) in &r_row {
                let lk = std::mem::take(&mut self.l_cols[k]);
                let start = lk.partition_point(|&(i, _)| i < j);
                for &(i, lik) in &lk[start..] {
                    overflow |= !self.update(j, i, lik, rjk);
                }
                self.l_cols[k] = lk;
                if checked && overflow {
                    break;
                }
            }
            self.r_rows[j] = r_row;
        }

        let pivot = self.w[j];
        if let Some(t) = trace {
            t.push(ColumnTrace {
                column: j,
                b3_safe: safe,
                overflow_seen: overflow,
                pivot,
                lookahead_pivot: self.diag[j],
            });
        }
        if checked && overflow {
            return Err((j, BreakdownKind::B3));
        }
        if !self.pivot_ok(j, pivot) {
            return Err((j, BreakdownKind::B1));
        }

        // Candidates for L and R: nonzero off-diagonals by decreasing magnitude,
        // ties going to the smaller row index.
        let mut cand: Vec<(usize, f64)> = self
            .touched
            .iter()
            .filter(|&&i| i != j && self.w[i] != 0.0)
            .map(|&i| (i, self.w[i]))
            .collect();
        let (lcount, rcount) = match self.mode {
            Mode::Memory(lim) => {
                cand.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()).then(a.0.cmp(&b.0)));
                let lc = lim.lsize.min(cand.len());
                (lc, lim.rsize.min(cand.len() - lc))
            }
            Mode::Level(_) => (cand.len(), 0),
        };
        cand.truncate(lcount + rcount);
        let (lpart, rpart) = cand.split_at_mut(lcount);

        let s = f.sqrt(pivot);
        let scale = |part: &mut [(usize, f64)]| -> Result<Vec<(usize, f64)>, Breakdown> {
            let mut out = Vec::with_capacity(part.len());
            for &mut (i, v) in part.iter_mut() {
                let x = f.div(v, s);
                if !x.is_finite() {
                    return Err((j, BreakdownKind::B2));
                }
                if x != 0.0 {
                    out.push((i, x));
                }
            }
            out.sort_unstable_by_key(|e| e.0);
            Ok(out)
        };
        let lnew = scale(lpart)?;
        let rnew = scale(rpart)?;

        // Look-ahead on the remaining pivots.
        let mut lookahead_fail = None;
        for &(i, v) in &lnew {
            let d = f.sub(self.diag[i], f.mul(v, v));
            self.diag[i] = d;
            if lookahead_fail.is_none() && !self.pivot_ok(i, d) {
                lookahead_fail = Some(i);
            }
        }
        for &(i, v) in &lnew {
            self.l_rows[i].push((j, v));
            self.rowmax.insert(i, v, true);
        }
        for &(i, v) in &rnew {
            self.r_rows[i].push((j, v));
            self.rowmax.insert(i, v, false);
        }
        let mut col = Vec::with_capacity(lnew.len() + 1);
        col.push((j, s));
        col.extend(lnew);
        self.l_cols.push(col);
        self.r_cols.push(rnew);
        match lookahead_fail {
            Some(i) => Err((i, BreakdownKind::B1)),
            None => Ok(()),
        }
    }

    fn finish(&mut self, keep_r: bool) -> (SparseMatrix, Option<SparseMatrix>) {
        let l = SparseMatrix::from_sorted_columns(self.n, std::mem::take(&mut self.l_cols));
        let r = keep_r
            .then(|| SparseMatrix::from_sorted_columns(self.n, std::mem::take(&mut self.r_cols)));
        (l, r)
    }
}
