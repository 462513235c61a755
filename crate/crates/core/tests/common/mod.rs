#![allow(dead_code)]

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

use rrgmres::SparseMatrixCSR;

pub fn rng(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha12Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Random m x n sparse matrix with a guaranteed entry in every column, so
/// all column norms are positive.
pub fn random_no_zero_columns(m: usize, n: usize, rng: &mut ChaCha12Rng) -> SparseMatrixCSR {
    let mut trips = Vec::new();
    for j in 0..n {
        trips.push((j % m, j, 1.0 + uniform(rng)));
    }
    for i in 0..m {
        for j in 0..n {
            if uniform(rng) < 0.3 {
                trips.push((i, j, 2.0 * uniform(rng) - 1.0));
            }
        }
    }
    SparseMatrixCSR::from_coordinates(&trips, m, n).expect("valid triplets")
}

/// Random diagonally dominant n x n matrix, comfortably nonsingular.
pub fn random_nonsingular(n: usize, rng: &mut ChaCha12Rng) -> SparseMatrixCSR {
    let mut trips = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let mut v = 2.0 * uniform(rng) - 1.0;
            if i == j {
                v += n as f64;
            }
            trips.push((i, j, v));
        }
    }
    SparseMatrixCSR::from_coordinates(&trips, n, n).expect("valid triplets")
}

pub fn random_vector(len: usize, rng: &mut ChaCha12Rng) -> Vec<f64> {
    (0..len).map(|_| 2.0 * uniform(rng) - 1.0).collect()
}

pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
