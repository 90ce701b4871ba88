//! Stored Krylov bases and Gram–Schmidt reorthogonalization against them.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::sparsela::{dot, norm2};

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ReorthPolicy {
    #[default]
    None,
    /// Both bases, against every stored vector.
    Full,
    /// Only the `p` basis, against every stored vector.
    OneSided,
    /// Both bases, against the most recent `k` vectors.
    Partial(usize),
}

impl ReorthPolicy {
    pub fn reorth_q(&self) -> bool {
        matches!(self, ReorthPolicy::Full | ReorthPolicy::Partial(_))
    }

    pub fn reorth_p(&self) -> bool {
        !matches!(self, ReorthPolicy::None)
    }

    /// Number of vectors to keep, `None` for all.
    pub fn window(&self) -> Option<usize> {
        match self {
            ReorthPolicy::Partial(k) => Some(*k),
            _ => None,
        }
    }
}

impl fmt::Display for ReorthPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReorthPolicy::None => f.write_str("none"),
            ReorthPolicy::Full => f.write_str("full"),
            ReorthPolicy::OneSided => f.write_str("one-sided"),
            ReorthPolicy::Partial(k) => write!(f, "partial:{k}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown reorthogonalization policy `{0}` (expected none, full, one-sided or partial:K)")]
pub struct UnknownPolicy(pub String);

impl FromStr for ReorthPolicy {
    type Err = UnknownPolicy;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "none" => Ok(ReorthPolicy::None),
            "full" => Ok(ReorthPolicy::Full),
            "one-sided" | "onesided" => Ok(ReorthPolicy::OneSided),
            other => other
                .strip_prefix("partial:")
                .and_then(|k| k.parse().ok())
                .map(ReorthPolicy::Partial)
                .ok_or_else(|| UnknownPolicy(s.to_string())),
        }
    }
}

impl TryFrom<String> for ReorthPolicy {
    type Error = UnknownPolicy;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<ReorthPolicy> for String {
    fn from(p: ReorthPolicy) -> String {
        p.to_string()
    }
}

/// Dense column-appended basis with an optional sliding window.
#[derive(Debug, Clone, Default)]
pub struct Basis {
    vectors: VecDeque<Vec<f64>>,
    window: Option<usize>,
}

impl Basis {
    pub fn new(window: Option<usize>) -> Self {
        Self {
            vectors: VecDeque::new(),
            window,
        }
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn push(&mut self, v: &[f64]) {
        if self.window == Some(0) {
            return;
        }
        if let Some(k) = self.window {
            if self.vectors.len() == k {
                self.vectors.pop_front();
            }
        }
        self.vectors.push_back(v.to_vec());
    }

    /// Bytes needed to store one more vector of length `len`, if it is kept.
    pub fn growth_bytes(&self, len: usize) -> usize {
        match self.window {
            Some(k) if self.vectors.len() >= k => 0,
            _ => len * std::mem::size_of::<f64>(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.vectors.iter()
    }
}

/// One classical Gram–Schmidt pass `v <- v - V (V^T v)`.
///
/// Returns `(norm before, norm after)`.
pub fn reorthogonalize(basis: &Basis, v: &mut [f64]) -> (f64, f64) {
    let before = norm2(v);
    let coeffs: Vec<f64> = basis.iter().map(|u| dot(u, v)).collect();
    for (u, c) in basis.iter().zip(coeffs) {
        for (x, &ui) in v.iter_mut().zip(u) {
            *x -= c * ui;
        }
    }
    (before, norm2(v))
}

/// Whether a projected vector has collapsed into the span of the basis.
pub fn collapsed(before: f64, after: f64) -> bool {
    after <= 64.0 * f64::EPSILON * before
}
