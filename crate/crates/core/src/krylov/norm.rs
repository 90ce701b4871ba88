//! Largest singular value by power iteration on `A^T A`.

use crate::precision::FP64;
use crate::rng::Lcg64;
use crate::sparsela::{matvec_into, matvec_t_into, norm2, SparseMatrix};

/// Seed of the start vector; fixed so repeated runs agree.
const START_SEED: u64 = 0x5eed_2c0f_fee0_0001;

/// Estimate `||A||_2`, stopping when successive estimates agree to a
/// relative `tol` or after `maxit` iterations.
pub fn estimate_norm2(a: &SparseMatrix, tol: f64, maxit: usize) -> f64 {
    let n = a.ncols();
    if n == 0 || a.nnz() == 0 {
        return 0.0;
    }
    let mut g = Lcg64::new(START_SEED);
    let mut v: Vec<f64> = (0..n).map(|_| g.next_symmetric()).collect();
    let nv = norm2(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut u = vec![0.0; a.nrows()];
    let mut sigma = 0.0;
    for _ in 0..maxit.max(1) {
        matvec_into(a, &v, FP64, &mut u);
        let next = norm2(&u);
        if next == 0.0 {
            return sigma;
        }
        matvec_t_into(a, &u, FP64, &mut v);
        let nv = norm2(&v);
        v.iter_mut().for_each(|x| *x /= nv);
        let done = (next - sigma).abs() <= tol * next;
        sigma = next;
        if done {
            break;
        }
    }
    sigma
}
