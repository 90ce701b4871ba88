//! Stopping quantities for LSQR and the adaptive error-norm estimator.

use serde::{Deserialize, Serialize};

use crate::precision::FP64;
use crate::sparsela::{matvec_t, norm2, SparseMatrix};

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorParams {
    /// Required relative accuracy of the estimate.
    pub tau: f64,
    /// Terms smaller than `tol` times the current tail are ignored when
    /// choosing how far back to look.
    pub tol: f64,
}

impl Default for EstimatorParams {
    fn default() -> Self {
        Self {
            tau: 0.25,
            tol: 1e-4,
        }
    }
}

/// Running state of the adaptive estimator of `||x - x_k||^2` in the `A^T A`
/// norm, driven by the LSQR scalars `phi_i`.
///
/// Indices are 1-based as in the recurrence: `delta(j) = phi_j^2`. The sum
/// `delta(l) + ... + delta(i)` is a lower bound on the squared error of the
/// iterate obtained after `l - 1` steps.
#[derive(Debug, Clone)]
pub struct EstimatorState {
    params: EstimatorParams,
    delta: Vec<f64>,
    ell: usize,
    estimate: Option<f64>,
    suffix: Vec<f64>,
}

impl EstimatorState {
    pub fn new(params: EstimatorParams) -> Self {
        Self {
            params,
            delta: Vec::new(),
            ell: 1,
            estimate: None,
            suffix: Vec::new(),
        }
    }

    /// Index `l_i` of the most recent estimate.
    pub fn ell(&self) -> usize {
        self.ell
    }

    /// Most recent finite estimate, if any has been produced yet.
    pub fn estimate(&self) -> Option<f64> {
        self.estimate
    }

    pub fn deltas(&self) -> &[f64] {
        &self.delta
    }

    /// Append `phi_i` and run one step of the adaptive rule.
    ///
    /// Returns `(l_i, estim)` where `estim` is `None` when the rule could not
    /// certify an estimate in this step.
    pub fn push(&mut self, phi: f64) -> (usize, Option<f64>) {
        self.delta.push(phi * phi);
        let i = self.delta.len();
        if i < 2 {
            return (self.ell, None);
        }
        let d = |j: usize| self.delta[j - 1];
        // suffix[j] = delta(j) + ... + delta(i), accumulated from the back.
        self.suffix.clear();
        self.suffix.resize(i + 2, 0.0);
        for j in (1..=i).rev() {
            self.suffix[j] = self.suffix[j + 1] + d(j);
        }
        let sum = |a: usize, b: usize| -> f64 {
            // delta(a) + ... + delta(b) for a <= b <= i; exact when b == i.
            if b == i {
                self.suffix[a]
            } else {
                (a..=b).rev().map(d).sum()
            }
        };

        let mut ell = self.ell;
        let tail = self.suffix[ell];
        // Largest p < i with tail / sum(p..i) <= tol.
        let p = (1..i)
            .rev()
            .find(|&j| tail <= self.params.tol * self.suffix[j])
            .unwrap_or(1);
        let mut s = 0.0f64;
        for j in p..i {
            let r = if d(j) == 0.0 {
                if self.suffix[j] == 0.0 {
                    1.0
                } else {
                    f64::INFINITY
                }
            } else {
                self.suffix[j] / d(j)
            };
            s = s.max(r);
        }
        let mut estim = None;
        while ell < i {
            let den = sum(ell, i - 1);
            let num = s * d(i);
            let q = if num == 0.0 {
                0.0
            } else if den == 0.0 {
                f64::INFINITY
            } else {
                num / den
            };
            if q > self.params.tau {
                break;
            }
            estim = Some(self.suffix[ell]);
            ell += 1;
        }
        if let Some(e) = estim {
            self.ell = self.ell.max(ell - 1);
            self.estimate = Some(e);
            (self.ell, Some(e))
        } else {
            (self.ell, None)
        }
    }
}

/// `(||B^T r|| / ||r||) / (||B^T r0|| / ||r0||)` with explicit fp64 products.
pub fn ratio_gs(b: &SparseMatrix, r: &[f64], r0_ratio: f64) -> f64 {
    let rn = norm2(r);
    if rn == 0.0 {
        return 0.0;
    }
    gradient_ratio(b, r) / r0_ratio
}

/// `||B^T r|| / ||r||`.
pub fn gradient_ratio(b: &SparseMatrix, r: &[f64]) -> f64 {
    let rn = norm2(r);
    if rn == 0.0 {
        return 0.0;
    }
    norm2(&matvec_t(b, r, FP64)) / rn
}

/// `||A^T r|| / (||A|| ||r||)` from recurrence estimates only.
pub fn ratio_ps(est_normt_r: f64, est_norm_a: f64, est_norm_r: f64) -> f64 {
    if est_normt_r == 0.0 {
        return 0.0;
    }
    est_normt_r / (est_norm_a * est_norm_r)
}

/// Error estimate relative to `||A|| ||x|| + ||b||`.
///
/// `estim` is a squared-norm estimate; with `sqrt` set its square root is
/// used, giving a ratio of norms.
pub fn ratio_pt(estim: f64, norm_a: f64, norm_x: f64, norm_b: f64, sqrt: bool) -> f64 {
    let num = if sqrt { estim.sqrt() } else { estim };
    num / (norm_a * norm_x + norm_b)
}
