//! Breakdown classification and the a-priori update-overflow test.

use serde::{Deserialize, Serialize};

use crate::precision::FpFormat;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BreakdownKind {
    /// Pivot nonpositive, non-finite, or too small relative to the diagonal.
    B1,
    /// Scaling a column by its pivot overflowed.
    B2,
    /// An update `w_i - a*b` overflowed.
    B3,
}

/// Max-tree over a fixed number of slots supporting point raises and
/// suffix-maximum queries in `O(log n)`.
#[derive(Debug, Clone)]
struct SuffixMax {
    size: usize,
    tree: Vec<f64>,
}

impl SuffixMax {
    fn new(n: usize) -> Self {
        let size = n.next_power_of_two().max(1);
        Self {
            size,
            tree: vec![0.0; 2 * size],
        }
    }

    fn set(&mut self, i: usize, v: f64) {
        let mut p = i + self.size;
        self.tree[p] = v;
        while p > 1 {
            p /= 2;
            self.tree[p] = self.tree[2 * p].max(self.tree[2 * p + 1]);
        }
    }

    /// Maximum over slots `from..`.
    fn suffix(&self, from: usize) -> f64 {
        let mut lo = from + self.size;
        let mut hi = 2 * self.size;
        let mut best = 0.0f64;
        while lo < hi {
            if lo & 1 == 1 {
                best = best.max(self.tree[lo]);
                lo += 1;
            }
            if hi & 1 == 1 {
                hi -= 1;
                best = best.max(self.tree[hi]);
            }
            lo /= 2;
            hi /= 2;
        }
        best
    }
}

/// Per-row statistics of the columns of `L + R` computed so far.
#[derive(Debug, Clone)]
pub struct RowMax {
    mu: Vec<f64>,
    lcount: Vec<usize>,
    rcount: Vec<usize>,
    mu_tree: SuffixMax,
    lr_tree: SuffixMax,
    l_tree: SuffixMax,
}

impl RowMax {
    pub fn new(n: usize) -> Self {
        Self {
            mu: vec![0.0; n],
            lcount: vec![0; n],
            rcount: vec![0; n],
            mu_tree: SuffixMax::new(n),
            lr_tree: SuffixMax::new(n),
            l_tree: SuffixMax::new(n),
        }
    }

    /// Record a stored off-diagonal entry in row `i`; `in_l` selects L or R.
    pub fn insert(&mut self, i: usize, value: f64, in_l: bool) {
        let a = value.abs();
        if a > self.mu[i] {
            self.mu[i] = a;
            self.mu_tree.set(i, a);
        }
        if in_l {
            self.lcount[i] += 1;
            self.l_tree.set(i, self.lcount[i] as f64);
        } else {
            self.rcount[i] += 1;
        }
        self.lr_tree
            .set(i, (self.lcount[i] + self.rcount[i]) as f64);
    }

    /// Largest magnitude stored so far in row `i`.
    pub fn mu(&self, i: usize) -> f64 {
        self.mu[i]
    }

    pub fn l_count(&self, i: usize) -> usize {
        self.lcount[i]
    }

    pub fn r_count(&self, i: usize) -> usize {
        self.rcount[i]
    }

    /// Upper bound on the magnitude any entry of column `j` can reach during
    /// its update phase, starting from entries bounded by `cmax_j`.
    pub fn update_bound(&self, j: usize, cmax_j: f64) -> f64 {
        let mu_i = self.mu_tree.suffix(j);
        let max_lr = self.lr_tree.suffix(j);
        let max_l = self.l_tree.suffix(j);
        let lj = self.lcount[j] as f64;
        let rj = self.rcount[j] as f64;
        cmax_j + mu_i * self.mu[j] * (lj.min(max_lr) + rj.min(max_l))
    }
}

/// Whether no update of column `j` can overflow in `format`.
///
/// The bound is evaluated in fp64 and inflated by `(1 + u)` per possible
/// update so that rounding in the emulated format cannot push a partial
/// result past `x_max` when the bound sits within a few ulps of it.
pub fn b3_safe(j: usize, cmax_j: f64, rowmax: &RowMax, format: FpFormat) -> bool {
    let bound = rowmax.update_bound(j, cmax_j);
    let updates = (rowmax.l_count(j) + rowmax.r_count(j) + 1) as f64;
    let slack = 1.0 + 2.0 * updates * format.unit_roundoff();
    bound.is_finite() && bound * slack <= format.x_max()
}
