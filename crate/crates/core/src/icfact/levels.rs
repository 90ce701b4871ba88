//! Symbolic level-of-fill patterns for IC(ℓ).

use crate::sparsela::SparseMatrix;

/// Lower-triangular fill pattern admitted at a given level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelPattern {
    pub level: usize,
    /// Sorted row indices per column, diagonal first.
    pub columns: Vec<Vec<usize>>,
    /// Fill level of each entry, parallel to `columns`.
    pub levels: Vec<Vec<usize>>,
}

impl LevelPattern {
    pub fn n(&self) -> usize {
        self.columns.len()
    }

    pub fn nnz(&self) -> usize {
        self.columns.iter().map(Vec::len).sum()
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.columns[j].binary_search(&i).is_ok()
    }
}

/// Level-ℓ fill pattern of the Cholesky factor of a matrix whose lower
/// triangle is `c`.
///
/// Original entries and the diagonal have level 0; a fill entry created
/// through pivot `k` has level `lev(i,k) + lev(j,k) + 1`, minimized over `k`,
/// and is admitted when that is at most `level`.
pub fn symbolic_levels(c: &SparseMatrix, level: usize) -> LevelPattern {
    let n = c.ncols();
    let mut lev = vec![usize::MAX; n];
    let mut touched: Vec<usize> = Vec::new();
    // Per-row list of (column, level) for admitted strictly-lower entries.
    let mut rows: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    let mut columns = Vec::with_capacity(n);
    let mut levels = Vec::with_capacity(n);
    for j in 0..n {
        touched.clear();
        lev[j] = 0;
        touched.push(j);
        let (ci, _) = c.col(j);
        for &i in ci.iter().filter(|&&i| i > j) {
            lev[i] = 0;
            touched.push(i);
        }
        for &(k, ljk) in &rows[j] {
            let col_k: &Vec<usize> = &columns[k];
            let lev_k: &Vec<usize> = &levels[k];
            let start = col_k.partition_point(|&i| i <= j);
            for (&i, &lik) in col_k[start..].iter().zip(&lev_k[start..]) {
                let cand = lik + ljk + 1;
                if cand > level {
                    continue;
                }
                if lev[i] == usize::MAX {
                    touched.push(i);
                }
                lev[i] = lev[i].min(cand);
            }
        }
        touched.sort_unstable();
        let col: Vec<usize> = touched.clone();
        let col_lev: Vec<usize> = col.iter().map(|&i| lev[i]).collect();
        for (&i, &l) in col.iter().zip(&col_lev).skip(1) {
            rows[i].push((j, l));
        }
        for &i in &touched {
            lev[i] = usize::MAX;
        }
        columns.push(col);
        levels.push(col_lev);
    }
    LevelPattern {
        level,
        columns,
        levels,
    }
}
