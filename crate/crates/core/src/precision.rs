//! Emulated IEEE binary floating-point formats.
//!
//! Every value is stored as an `f64` that is exactly representable in the
//! target format. Arithmetic is performed in `f64` and rounded once to the
//! target with round-to-nearest-even. For binary16 and binary32 this is the
//! correctly rounded result for `+ - * / sqrt`, because 53 >= 2p + 2 makes
//! the intermediate double rounding innocuous.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// An IEEE-style binary format described by its significand and exponent widths.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct FpFormat {
    /// Significand precision, including the implicit leading bit.
    pub significand_bits: u32,
    pub exponent_bits: u32,
}

pub const FP16: FpFormat = FpFormat {
    significand_bits: 11,
    exponent_bits: 5,
};
pub const FP32: FpFormat = FpFormat {
    significand_bits: 24,
    exponent_bits: 8,
};
pub const FP64: FpFormat = FpFormat {
    significand_bits: 53,
    exponent_bits: 11,
};
/// Not exercised by the solvers; available for experiments.
pub const BF16: FpFormat = FpFormat {
    significand_bits: 8,
    exponent_bits: 8,
};

/// Exact power of two for exponents in the normal `f64` range.
#[inline]
fn pow2(k: i32) -> f64 {
    debug_assert!((-1022..=1023).contains(&k));
    f64::from_bits(((k + 1023) as u64) << 52)
}

impl FpFormat {
    pub const fn is_fp64(&self) -> bool {
        self.significand_bits == 53 && self.exponent_bits == 11
    }

    /// Largest unbiased exponent of a finite number.
    pub const fn max_exponent(&self) -> i32 {
        (1 << (self.exponent_bits - 1)) - 1
    }

    /// Unbiased exponent of the smallest normal number.
    pub const fn min_exponent(&self) -> i32 {
        1 - self.max_exponent()
    }

    /// `2^-p`: half the gap between 1 and the next representable number.
    pub fn unit_roundoff(&self) -> f64 {
        2f64.powi(-(self.significand_bits as i32))
    }

    pub fn x_min_subnormal(&self) -> f64 {
        let k = self.min_exponent() - (self.significand_bits as i32 - 1);
        // powi loses 2^-1074 in unoptimized builds.
        if k < -1022 {
            f64::from_bits(1u64 << (k + 1074))
        } else {
            pow2(k)
        }
    }

    pub fn x_min_normal(&self) -> f64 {
        2f64.powi(self.min_exponent())
    }

    pub fn x_max(&self) -> f64 {
        let p = self.significand_bits as i32;
        (2.0 - 2f64.powi(1 - p)) * 2f64.powi(self.max_exponent())
    }

    pub fn name(&self) -> String {
        match *self {
            FP16 => "fp16".to_string(),
            FP32 => "fp32".to_string(),
            FP64 => "fp64".to_string(),
            BF16 => "bf16".to_string(),
            FpFormat {
                significand_bits,
                exponent_bits,
            } => {
                format!("p{significand_bits}e{exponent_bits}")
            }
        }
    }

    /// Round `x` to the nearest representable value (ties to even).
    #[inline]
    pub fn round(&self, x: f64) -> f64 {
        self.round_flagged(x).0
    }

    /// Round `x` and report overflow, underflow-to-zero and subnormal results.
    pub fn round_flagged(&self, x: f64) -> (f64, RoundFlags) {
        if self.is_fp64() || x == 0.0 || !x.is_finite() {
            return (x, RoundFlags::default());
        }
        let ax = x.abs();
        let biased = ((ax.to_bits() >> 52) & 0x7ff) as i32;
        // f64 subnormals sit far below the subnormal range of any narrower format.
        let e = if biased == 0 { -1023 } else { biased - 1023 };
        let p = self.significand_bits as i32;
        let quantum = e.max(self.min_exponent()) - (p - 1);
        let r = if quantum > 1023 - 64 {
            // Far beyond x_max; any format narrower than fp64 overflows.
            f64::INFINITY
        } else if quantum < -1022 {
            0.0
        } else {
            (ax * pow2(-quantum)).round_ties_even() * pow2(quantum)
        };
        let mut flags = RoundFlags::default();
        let r = if r > self.x_max() {
            flags.overflow = true;
            f64::INFINITY
        } else if r == 0.0 {
            flags.underflow = true;
            0.0
        } else {
            if r < self.x_min_normal() {
                flags.subnormal = true;
            }
            r
        };
        (r.copysign(x), flags)
    }

    #[inline]
    pub fn mul(&self, a: f64, b: f64) -> f64 {
        self.round(a * b)
    }

    #[inline]
    pub fn add(&self, a: f64, b: f64) -> f64 {
        self.round(a + b)
    }

    #[inline]
    pub fn sub(&self, a: f64, b: f64) -> f64 {
        self.round(a - b)
    }

    #[inline]
    pub fn div(&self, a: f64, b: f64) -> f64 {
        self.round(a / b)
    }

    #[inline]
    pub fn sqrt(&self, a: f64) -> f64 {
        self.round(a.sqrt())
    }

    /// `acc - a*b` with the product and the difference rounded separately.
    #[inline]
    pub fn mul_sub(&self, acc: f64, a: f64, b: f64) -> f64 {
        self.sub(acc, self.mul(a, b))
    }
}

impl fmt::Display for FpFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown floating-point format `{0}` (expected fp16, fp32 or fp64)")]
pub struct UnknownFormat(pub String);

impl FromStr for FpFormat {
    type Err = UnknownFormat;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fp16" | "half" => Ok(FP16),
            "fp32" | "single" => Ok(FP32),
            "fp64" | "double" => Ok(FP64),
            "bf16" | "bfloat16" => Ok(BF16),
            _ => Err(UnknownFormat(s.to_string())),
        }
    }
}

impl TryFrom<String> for FpFormat {
    type Error = UnknownFormat;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<FpFormat> for String {
    fn from(f: FpFormat) -> String {
        f.name()
    }
}

/// Exception flags raised by a single rounding.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq)]
pub struct RoundFlags {
    pub overflow: bool,
    /// A nonzero input rounded to zero.
    pub underflow: bool,
    /// The result is nonzero and below the smallest normal number.
    pub subnormal: bool,
}

impl RoundFlags {
    pub fn merge(self, other: RoundFlags) -> RoundFlags {
        RoundFlags {
            overflow: self.overflow || other.overflow,
            underflow: self.underflow || other.underflow,
            subnormal: self.subnormal || other.subnormal,
        }
    }
}

/// `round_to(format, x)`.
pub fn round_to(format: FpFormat, x: f64) -> f64 {
    format.round(x)
}

/// `round(acc - round(a*b))`, with the flags of both roundings merged.
pub fn fma_rounded(format: FpFormat, acc: f64, a: f64, b: f64) -> (f64, RoundFlags) {
    let (prod, f1) = format.round_flagged(a * b);
    if prod.is_infinite() {
        // acc is finite by precondition, so the difference is the same infinity.
        return (-prod, f1);
    }
    let (r, f2) = format.round_flagged(acc - prod);
    (r, f1.merge(f2))
}

/// Counts of what happened to a batch of values converted into a narrower format.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConversionAudit {
    pub total: usize,
    pub underflowed_to_zero: usize,
    pub became_subnormal: usize,
    pub overflowed: usize,
}

impl ConversionAudit {
    pub fn record(&mut self, original: f64, flags: RoundFlags) {
        self.total += 1;
        if flags.overflow && original.is_finite() {
            self.overflowed += 1;
        } else if flags.underflow && original != 0.0 {
            self.underflowed_to_zero += 1;
        } else if flags.subnormal {
            self.became_subnormal += 1;
        }
    }

    pub fn lost(&self) -> usize {
        self.underflowed_to_zero
    }
}

/// Round every value into `format` and audit the conversion.
pub fn squeeze_values(format: FpFormat, values: &[f64]) -> (Vec<f64>, ConversionAudit) {
    let mut audit = ConversionAudit::default();
    let out = values
        .iter()
        .map(|&v| {
            let (r, flags) = format.round_flagged(v);
            audit.record(v, flags);
            r
        })
        .collect();
    (out, audit)
}
