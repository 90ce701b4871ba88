//! Incomplete Cholesky preconditioned LSQR for sparse linear least squares,
//! with factorizations computed in emulated low precision.
//!
//! The pipeline: scale the columns of `A`, form the normal matrix in a chosen
//! precision, compute an incomplete Cholesky factor guarded against
//! breakdown, and solve with preconditioned LSQR or LSQR-based iterative
//! refinement.

pub mod icfact;
pub mod io;
pub mod krylov;
pub mod pipeline;
pub mod precision;
pub mod refine;
pub mod rng;
pub mod sparsela;

#[cfg(test)]
mod testutil;

pub use icfact::{IcError, IcFactor, MemLimits, ShiftPolicy};
pub use krylov::{lsqr, Criterion, LsqrConfig, ReorthPolicy, SolveReport, Termination};
pub use precision::{FpFormat, FP16, FP32, FP64};
pub use refine::{lsqr_ir, RefineConfig, RefineReport, RefineTermination};
pub use sparsela::{NormalMatrix, SparseMatrix};

/// Any failure of a library operation.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Sparse(#[from] sparsela::SparseError),
    #[error(transparent)]
    Factor(#[from] icfact::IcError),
    #[error(transparent)]
    Io(#[from] io::IoError),
    #[error(transparent)]
    Solve(#[from] krylov::SolveError),
    #[error(transparent)]
    Format(#[from] precision::UnknownFormat),
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
