//! Generators and dense oracles shared by the integration tests.
#![allow(dead_code)]

use icls_core::precision::FP64;
use icls_core::sparsela::{NormalMatrix, SparseMatrix};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

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

pub fn dense_sym(lower: &SparseMatrix) -> DMatrix<f64> {
    let mut d = dense(lower);
    for (i, j, v) in lower.triplets() {
        d[(j, i)] = v;
    }
    d
}

pub fn from_dense(d: &DMatrix<f64>) -> SparseMatrix {
    let rows: Vec<Vec<f64>> = (0..d.nrows())
        .map(|i| d.row(i).iter().copied().collect())
        .collect();
    SparseMatrix::from_dense(&rows)
}

/// Random sparse `m x n` matrix with a nonzero leading diagonal, so full rank
/// with high probability and well conditioned.
pub fn random_full_rank(g: &mut ChaCha8Rng, m: usize, n: usize, density: f64) -> SparseMatrix {
    let mut trip = Vec::new();
    for j in 0..n {
        trip.push((j, j, g.random_range(1.0..3.0)));
        for i in 0..m {
            if i != j && g.random::<f64>() < density {
                trip.push((i, j, g.random_range(-1.0..1.0)));
            }
        }
    }
    SparseMatrix::from_triplets(m, n, &trip).unwrap()
}

pub fn random_vec(g: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    (0..m).map(|_| g.random_range(-1.0..1.0)).collect()
}

/// Diagonally dominant sparse SPD matrix (lower triangle) with bandwidth `band`.
pub fn random_banded_spd(g: &mut ChaCha8Rng, n: usize, band: usize) -> NormalMatrix {
    let mut trip = Vec::new();
    let mut rowsum = vec![0.0; n];
    for j in 0..n {
        for i in j + 1..(j + band + 1).min(n) {
            let v: f64 = g.random_range(-1.0..1.0);
            trip.push((i, j, v));
            rowsum[i] += v.abs();
            rowsum[j] += v.abs();
        }
    }
    for (j, s) in rowsum.iter().enumerate() {
        trip.push((j, j, s + g.random_range(0.1..1.0)));
    }
    NormalMatrix::from_lower(&SparseMatrix::from_triplets(n, n, &trip).unwrap(), FP64)
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |a, v| a.max(v.abs()))
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&d) / norm(b)
}

/// Least-squares solution through a dense Householder QR.
pub fn dense_lstsq(a: &DMatrix<f64>, b: &[f64]) -> Vec<f64> {
    let qr = a.clone().qr();
    let qtb = qr.q().transpose() * DVector::from_column_slice(b);
    qr.r()
        .solve_upper_triangular(&qtb)
        .expect("full rank")
        .iter()
        .copied()
        .collect()
}

/// Sparse `m x n` matrix whose column pairs `(2k, 2k + 1)` differ by
/// perturbations shrinking geometrically to `10^-decades`, so the condition
/// number grows to about `10^decades` while `B^T B` stays sparse.
pub fn near_collinear(
    g: &mut ChaCha8Rng,
    m: usize,
    n: usize,
    density: f64,
    decades: f64,
) -> SparseMatrix {
    let base = random_full_rank(g, m, n, density);
    let pairs = n / 2;
    let mut trip: Vec<(usize, usize, f64)> = Vec::new();
    for k in 0..pairs {
        let eps = 10f64.powf(-decades * k as f64 / (pairs - 1).max(1) as f64);
        let (rows, vals) = base.col(2 * k);
        for (&i, &v) in rows.iter().zip(vals) {
            trip.push((i, 2 * k, v));
            trip.push((i, 2 * k + 1, v));
        }
        let (rows, vals) = base.col(2 * k + 1);
        for (&i, &v) in rows.iter().zip(vals) {
            trip.push((i, 2 * k + 1, eps * v));
        }
    }
    if n % 2 == 1 {
        let (rows, vals) = base.col(n - 1);
        trip.extend(rows.iter().zip(vals).map(|(&i, &v)| (i, n - 1, v)));
    }
    SparseMatrix::from_triplets(m, n, &trip).unwrap()
}
