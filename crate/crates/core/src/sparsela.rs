//! Compressed sparse column storage and the least-squares kernels built on it.

use serde::{Deserialize, Serialize};

use crate::precision::{ConversionAudit, FpFormat, FP64};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SparseError {
    #[error("column {0} of the matrix is entirely zero")]
    ZeroColumn(usize),
    #[error("triangular solve overflowed at position {position}")]
    ApplyBreakdown { position: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("malformed sparse matrix: {0}")]
    Malformed(String),
}

/// An `nrows x ncols` matrix in compressed sparse column form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Build from raw CSC arrays, validating the structural invariants.
    pub fn new(
        nrows: usize,
        ncols: usize,
        col_ptr: Vec<usize>,
        row_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self, SparseError> {
        if col_ptr.len() != ncols + 1 || col_ptr[0] != 0 {
            return Err(SparseError::Malformed(
                "col_ptr must have length ncols+1 and start at 0".into(),
            ));
        }
        if row_idx.len() != values.len() || *col_ptr.last().unwrap() != row_idx.len() {
            return Err(SparseError::Malformed(
                "col_ptr[ncols] must equal nnz".into(),
            ));
        }
        for j in 0..ncols {
            if col_ptr[j] > col_ptr[j + 1] {
                return Err(SparseError::Malformed(format!(
                    "col_ptr decreases at column {j}"
                )));
            }
            let rows = &row_idx[col_ptr[j]..col_ptr[j + 1]];
            if rows.windows(2).any(|w| w[0] >= w[1]) {
                return Err(SparseError::Malformed(format!(
                    "rows of column {j} not strictly increasing"
                )));
            }
            if rows.last().is_some_and(|&r| r >= nrows) {
                return Err(SparseError::Malformed(format!(
                    "row index out of range in column {j}"
                )));
            }
        }
        if values.contains(&0.0) {
            return Err(SparseError::Malformed("explicit zero stored".into()));
        }
        Ok(Self {
            nrows,
            ncols,
            col_ptr,
            row_idx,
            values,
        })
    }

    /// Assemble from `(row, col, value)` triplets; duplicates are summed and
    /// zeros dropped.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self, SparseError> {
        let mut sorted: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len());
        for &(i, j, v) in triplets {
            if i >= nrows || j >= ncols {
                return Err(SparseError::Dimension(format!(
                    "entry ({i}, {j}) outside a {nrows}x{ncols} matrix"
                )));
            }
            sorted.push((i, j, v));
        }
        sorted.sort_by_key(|&(i, j, _)| (j, i));
        let mut col_ptr = vec![0usize; ncols + 1];
        let mut row_idx = Vec::with_capacity(sorted.len());
        let mut values = Vec::with_capacity(sorted.len());
        let mut k = 0;
        while k < sorted.len() {
            let (i, j, mut v) = sorted[k];
            k += 1;
            while k < sorted.len() && sorted[k].0 == i && sorted[k].1 == j {
                v += sorted[k].2;
                k += 1;
            }
            if v != 0.0 {
                row_idx.push(i);
                values.push(v);
                col_ptr[j + 1] += 1;
            }
        }
        for j in 0..ncols {
            col_ptr[j + 1] += col_ptr[j];
        }
        Ok(Self {
            nrows,
            ncols,
            col_ptr,
            row_idx,
            values,
        })
    }

    /// Build from per-column `(row, value)` lists that are already sorted by row.
    pub(crate) fn from_sorted_columns(nrows: usize, columns: Vec<Vec<(usize, f64)>>) -> Self {
        let ncols = columns.len();
        let nnz = columns.iter().map(Vec::len).sum();
        let mut col_ptr = Vec::with_capacity(ncols + 1);
        let mut row_idx = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        col_ptr.push(0);
        for col in columns {
            for (i, v) in col {
                debug_assert!(v != 0.0);
                row_idx.push(i);
                values.push(v);
            }
            col_ptr.push(row_idx.len());
        }
        Self {
            nrows,
            ncols,
            col_ptr,
            row_idx,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            col_ptr: (0..=n).collect(),
            row_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Dense row-major input; zeros are not stored.
    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let mut trip = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    trip.push((i, j, v));
                }
            }
        }
        Self::from_triplets(nrows, ncols, &trip).expect("dense input is always in range")
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn col_ptr(&self) -> &[usize] {
        &self.col_ptr
    }

    pub fn row_idx(&self) -> &[usize] {
        &self.row_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Row indices and values of column `j`.
    #[inline]
    pub fn col(&self, j: usize) -> (&[usize], &[f64]) {
        let r = self.col_ptr[j]..self.col_ptr[j + 1];
        (&self.row_idx[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (rows, vals) = self.col(j);
        rows.binary_search(&i).map_or(0.0, |k| vals[k])
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.ncols).flat_map(move |j| {
            let (rows, vals) = self.col(j);
            rows.iter().zip(vals).map(move |(&i, &v)| (i, j, v))
        })
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut counts = vec![0usize; self.nrows + 1];
        for &i in &self.row_idx {
            counts[i + 1] += 1;
        }
        for i in 0..self.nrows {
            counts[i + 1] += counts[i];
        }
        let col_ptr = counts.clone();
        let mut next = counts;
        let mut row_idx = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for j in 0..self.ncols {
            let (rows, vals) = self.col(j);
            for (&i, &v) in rows.iter().zip(vals) {
                row_idx[next[i]] = j;
                values[next[i]] = v;
                next[i] += 1;
            }
        }
        SparseMatrix {
            nrows: self.ncols,
            ncols: self.nrows,
            col_ptr,
            row_idx,
            values,
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, j, v) in self.triplets() {
            d[i][j] = v;
        }
        d
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn column_norm(&self, j: usize) -> f64 {
        self.col(j).1.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Whether every stored entry lies on or below the diagonal.
    pub fn is_lower_triangular(&self) -> bool {
        (0..self.ncols).all(|j| self.col(j).0.first().is_none_or(|&i| i >= j))
    }

    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> SparseMatrix {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v = f(*v));
        out.compact();
        out
    }

    /// Drop explicitly stored zeros.
    fn compact(&mut self) {
        if !self.values.contains(&0.0) {
            return;
        }
        let mut w = 0;
        let mut start = 0;
        for j in 0..self.ncols {
            let end = self.col_ptr[j + 1];
            for k in start..end {
                if self.values[k] != 0.0 {
                    self.row_idx[w] = self.row_idx[k];
                    self.values[w] = self.values[k];
                    w += 1;
                }
            }
            start = end;
            self.col_ptr[j + 1] = w;
        }
        self.row_idx.truncate(w);
        self.values.truncate(w);
    }
}

/// `B = A diag(S)` with unit 2-norm columns.
#[derive(Debug, Clone)]
pub struct ColumnScaling {
    pub matrix: SparseMatrix,
    /// `S[j] = 1 / ||A(:, j)||_2`.
    pub scale: Vec<f64>,
}

impl ColumnScaling {
    /// Map a solution of the scaled problem back: `x = S y`.
    pub fn unscale(&self, y: &[f64]) -> Vec<f64> {
        y.iter().zip(&self.scale).map(|(a, s)| a * s).collect()
    }
}

/// A scaled least-squares problem together with its right-hand side.
#[derive(Debug, Clone)]
pub struct ScaledProblem {
    pub scaling: ColumnScaling,
    pub rhs: Vec<f64>,
}

pub fn scale_columns(a: &SparseMatrix) -> Result<ColumnScaling, SparseError> {
    let mut matrix = a.clone();
    let mut scale = Vec::with_capacity(a.ncols());
    for j in 0..a.ncols() {
        let norm = a.column_norm(j);
        if norm == 0.0 || !norm.is_finite() {
            return Err(SparseError::ZeroColumn(j));
        }
        let s = 1.0 / norm;
        scale.push(s);
        let r = matrix.col_ptr[j]..matrix.col_ptr[j + 1];
        for v in &mut matrix.values[r] {
            *v *= s;
        }
    }
    Ok(ColumnScaling { matrix, scale })
}

/// Convert a matrix into `format`, dropping entries that round to zero.
pub fn squeeze_matrix(a: &SparseMatrix, format: FpFormat) -> (SparseMatrix, ConversionAudit) {
    let mut audit = ConversionAudit::default();
    let mut out = a.clone();
    for v in &mut out.values {
        let (r, flags) = format.round_flagged(*v);
        audit.record(*v, flags);
        *v = r;
    }
    out.compact();
    (out, audit)
}

/// Lower triangle of `B^T B` rounded into `format`.
#[derive(Debug, Clone)]
pub struct NormalMatrix {
    pub matrix: SparseMatrix,
    pub format: FpFormat,
    /// Entries whose fp64 inner product is nonzero but round to zero in `format`.
    pub lost_entries: usize,
}

impl NormalMatrix {
    pub fn n(&self) -> usize {
        self.matrix.ncols()
    }

    /// Wrap an explicitly given SPD matrix (lower triangle taken) in `format`.
    pub fn from_lower(matrix: &SparseMatrix, format: FpFormat) -> Self {
        let lower: Vec<_> = matrix.triplets().filter(|&(i, j, _)| i >= j).collect();
        let m = SparseMatrix::from_triplets(matrix.nrows(), matrix.ncols(), &lower)
            .expect("indices come from a valid matrix");
        let (matrix, audit) = squeeze_matrix(&m, format);
        NormalMatrix {
            matrix,
            format,
            lost_entries: audit.underflowed_to_zero,
        }
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.n()).map(|j| self.matrix.get(j, j)).collect()
    }

    /// Full symmetric dense copy.
    pub fn to_dense_symmetric(&self) -> Vec<Vec<f64>> {
        let mut d = self.matrix.to_dense();
        for (i, j, v) in self.matrix.triplets() {
            d[j][i] = v;
        }
        d
    }
}

/// Form the lower triangle of `B^T B`, accumulating each inner product in
/// fp64 and rounding once into `format`.
pub fn form_normal(b: &SparseMatrix, format: FpFormat) -> NormalMatrix {
    let n = b.ncols();
    let bt = b.transpose();
    let mut acc = vec![0.0f64; n];
    let mut mark = vec![usize::MAX; n];
    let mut touched: Vec<usize> = Vec::new();
    let mut columns = Vec::with_capacity(n);
    let mut lost = 0;
    for j in 0..n {
        touched.clear();
        let (rows, vals) = b.col(j);
        for (&r, &brj) in rows.iter().zip(vals) {
            let (cols, rvals) = bt.col(r);
            let start = cols.partition_point(|&k| k < j);
            for (&k, &brk) in cols[start..].iter().zip(&rvals[start..]) {
                if mark[k] != j {
                    mark[k] = j;
                    acc[k] = 0.0;
                    touched.push(k);
                }
                acc[k] += brj * brk;
            }
        }
        touched.sort_unstable();
        let mut col = Vec::with_capacity(touched.len());
        for &k in &touched {
            let exact = acc[k];
            let r = format.round(exact);
            if r != 0.0 {
                col.push((k, r));
            } else if exact != 0.0 {
                lost += 1;
            }
        }
        columns.push(col);
    }
    NormalMatrix {
        matrix: SparseMatrix::from_sorted_columns(n, columns),
        format,
        lost_entries: lost,
    }
}

/// `out = A x`, accumulated in fp64 and rounded once into `format`.
/// Returns `true` if any component overflowed.
pub fn matvec_into(a: &SparseMatrix, x: &[f64], format: FpFormat, out: &mut [f64]) -> bool {
    assert_eq!(x.len(), a.ncols(), "matvec: x has wrong length");
    assert_eq!(out.len(), a.nrows(), "matvec: output has wrong length");
    out.iter_mut().for_each(|v| *v = 0.0);
    for (j, &xj) in x.iter().enumerate() {
        if xj == 0.0 {
            continue;
        }
        let (rows, vals) = a.col(j);
        for (&i, &v) in rows.iter().zip(vals) {
            out[i] += v * xj;
        }
    }
    round_in_place(out, format)
}

/// `out = A^T y`, accumulated in fp64 and rounded once into `format`.
pub fn matvec_t_into(a: &SparseMatrix, y: &[f64], format: FpFormat, out: &mut [f64]) -> bool {
    assert_eq!(y.len(), a.nrows(), "matvec_t: y has wrong length");
    assert_eq!(out.len(), a.ncols(), "matvec_t: output has wrong length");
    for (j, o) in out.iter_mut().enumerate() {
        let (rows, vals) = a.col(j);
        *o = rows.iter().zip(vals).map(|(&i, &v)| v * y[i]).sum();
    }
    round_in_place(out, format)
}

pub fn matvec(a: &SparseMatrix, x: &[f64], format: FpFormat) -> Vec<f64> {
    let mut out = vec![0.0; a.nrows()];
    matvec_into(a, x, format, &mut out);
    out
}

pub fn matvec_t(a: &SparseMatrix, y: &[f64], format: FpFormat) -> Vec<f64> {
    let mut out = vec![0.0; a.ncols()];
    matvec_t_into(a, y, format, &mut out);
    out
}

/// Round a vector into `format`; returns `true` if anything is infinite afterwards.
pub fn round_in_place(v: &mut [f64], format: FpFormat) -> bool {
    if format != FP64 {
        v.iter_mut().for_each(|x| *x = format.round(*x));
    }
    v.iter().any(|x| x.is_infinite())
}

fn check_triangular(l: &SparseMatrix, len: usize) -> Result<(), SparseError> {
    if l.nrows() != l.ncols() || len != l.ncols() {
        return Err(SparseError::Dimension(format!(
            "triangular solve with a {}x{} factor and a vector of length {len}",
            l.nrows(),
            l.ncols()
        )));
    }
    Ok(())
}

#[inline]
fn diag_of(l: &SparseMatrix, j: usize) -> Result<(f64, usize), SparseError> {
    let (rows, vals) = l.col(j);
    match rows.first() {
        Some(&r) if r == j && vals[0] > 0.0 => Ok((vals[0], l.col_ptr[j])),
        _ => Err(SparseError::Malformed(format!(
            "factor column {j} lacks a positive diagonal"
        ))),
    }
}

/// Solve `L x = rhs` in place by forward substitution, rounding every
/// elementary operation into `format`.
pub fn solve_lower_in_place(
    l: &SparseMatrix,
    x: &mut [f64],
    format: FpFormat,
) -> Result<(), SparseError> {
    check_triangular(l, x.len())?;
    if round_in_place(x, format) {
        return Err(SparseError::ApplyBreakdown { position: 0 });
    }
    let fp64 = format.is_fp64();
    for j in 0..l.ncols() {
        let (d, start) = diag_of(l, j)?;
        let xj = format.div(x[j], d);
        if !xj.is_finite() {
            return Err(SparseError::ApplyBreakdown { position: j });
        }
        x[j] = xj;
        if xj == 0.0 {
            continue;
        }
        let end = l.col_ptr[j + 1];
        for k in start + 1..end {
            let i = l.row_idx[k];
            let v = if fp64 {
                x[i] - l.values[k] * xj
            } else {
                format.mul_sub(x[i], l.values[k], xj)
            };
            x[i] = v;
        }
        if !fp64 {
            for k in start + 1..end {
                if !x[l.row_idx[k]].is_finite() {
                    return Err(SparseError::ApplyBreakdown { position: j });
                }
            }
        }
    }
    if fp64 && x.iter().any(|v| !v.is_finite()) {
        return Err(SparseError::ApplyBreakdown {
            position: l.ncols().saturating_sub(1),
        });
    }
    Ok(())
}

/// Solve `L^T x = rhs` in place by backward substitution, rounding every
/// elementary operation into `format`.
pub fn solve_upper_t_in_place(
    l: &SparseMatrix,
    x: &mut [f64],
    format: FpFormat,
) -> Result<(), SparseError> {
    check_triangular(l, x.len())?;
    if round_in_place(x, format) {
        return Err(SparseError::ApplyBreakdown {
            position: l.ncols().saturating_sub(1),
        });
    }
    let fp64 = format.is_fp64();
    for j in (0..l.ncols()).rev() {
        let (d, start) = diag_of(l, j)?;
        let mut s = x[j];
        for k in start + 1..l.col_ptr[j + 1] {
            let i = l.row_idx[k];
            s = if fp64 {
                s - l.values[k] * x[i]
            } else {
                format.mul_sub(s, l.values[k], x[i])
            };
        }
        let xj = format.div(s, d);
        if !xj.is_finite() {
            return Err(SparseError::ApplyBreakdown { position: j });
        }
        x[j] = xj;
    }
    Ok(())
}

pub fn solve_lower(
    l: &SparseMatrix,
    rhs: &[f64],
    format: FpFormat,
) -> Result<Vec<f64>, SparseError> {
    let mut x = rhs.to_vec();
    solve_lower_in_place(l, &mut x, format)?;
    Ok(x)
}

pub fn solve_upper_t(
    l: &SparseMatrix,
    rhs: &[f64],
    format: FpFormat,
) -> Result<Vec<f64>, SparseError> {
    let mut x = rhs.to_vec();
    solve_upper_t_in_place(l, &mut x, format)?;
    Ok(x)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
