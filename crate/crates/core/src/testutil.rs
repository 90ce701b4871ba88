//! Shared generators and dense oracles for unit tests.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::precision::FP64;
use crate::sparsela::{NormalMatrix, SparseMatrix};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn dense(a: &SparseMatrix) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(a.nrows(), a.ncols());
    for (i, j, v) in a.triplets() {
        d[(i, j)] = v;
    }
    d
}

/// Full symmetric dense matrix from a lower triangle.
pub fn dense_sym(lower: &SparseMatrix) -> DMatrix<f64> {
    let mut d = dense(lower);
    for (i, j, v) in lower.triplets() {
        d[(j, i)] = v;
    }
    d
}

/// Random `m x n` sparse matrix with a guaranteed nonzero diagonal block.
pub fn random_full_rank(rng: &mut ChaCha8Rng, m: usize, n: usize, density: f64) -> SparseMatrix {
    assert!(m >= n);
    let mut trip = Vec::new();
    for j in 0..n {
        trip.push((j, j, rng.random_range(1.0..3.0)));
        for i in 0..m {
            if i != j && rng.random::<f64>() < density {
                trip.push((i, j, rng.random_range(-1.0..1.0)));
            }
        }
    }
    SparseMatrix::from_triplets(m, n, &trip).unwrap()
}

/// Random sparse SPD matrix (lower triangle), strictly diagonally dominant.
pub fn random_spd(rng: &mut ChaCha8Rng, n: usize, density: f64) -> NormalMatrix {
    let mut trip = Vec::new();
    let mut rowsum = vec![0.0; n];
    for j in 0..n {
        for i in j + 1..n {
            if rng.random::<f64>() < density {
                let v: f64 = rng.random_range(-1.0..1.0);
                trip.push((i, j, v));
                rowsum[i] += v.abs();
                rowsum[j] += v.abs();
            }
        }
    }
    for (j, s) in rowsum.iter().enumerate() {
        trip.push((j, j, s + rng.random_range(0.1..1.0)));
    }
    let m = SparseMatrix::from_triplets(n, n, &trip).unwrap();
    NormalMatrix::from_lower(&m, FP64)
}

/// Random SPD matrix with lower bandwidth `band`.
pub fn random_banded_spd(rng: &mut ChaCha8Rng, n: usize, band: usize) -> NormalMatrix {
    let mut trip = Vec::new();
    let mut rowsum = vec![0.0; n];
    for j in 0..n {
        for i in j + 1..(j + band + 1).min(n) {
            let v: f64 = rng.random_range(-1.0..1.0);
            trip.push((i, j, v));
            rowsum[i] += v.abs();
            rowsum[j] += v.abs();
        }
    }
    for (j, s) in rowsum.iter().enumerate() {
        trip.push((j, j, s + rng.random_range(0.1..1.0)));
    }
    let m = SparseMatrix::from_triplets(n, n, &trip).unwrap();
    NormalMatrix::from_lower(&m, FP64)
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |a, v| a.max(v.abs()))
}

/// Dense least-squares solution through a QR factorization.
pub fn dense_lstsq(a: &DMatrix<f64>, b: &[f64]) -> Vec<f64> {
    let qr = a.clone().qr();
    let qtb = qr.q().transpose() * nalgebra::DVector::from_column_slice(b);
    let x = qr.r().solve_upper_triangular(&qtb).expect("full rank");
    x.iter().copied().collect()
}
