#![allow(dead_code)]

use paraexp::fitwave::{clear_masked, FitOperators};
use paraexp::{SparseMatrix, TripletBuilder};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Random state with masked electric entries cleared.
pub fn random_field(rng: &mut ChaCha8Rng, ops: &FitOperators) -> Vec<f64> {
    let n = ops.n_h() + ops.n_e();
    let mut u: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    // balance h and e so both blocks carry comparable energy
    let ratio = (ops.m_eps()[0] / ops.m_mu()[0]).sqrt();
    u[..ops.n_h()].iter_mut().for_each(|x| *x *= ratio);
    clear_masked(&mut u, ops);
    u
}

/// Sparse matrix with about `density·n²` uniform entries plus a random diagonal.
pub fn random_sparse(rng: &mut ChaCha8Rng, n: usize, density: f64) -> SparseMatrix {
    let mut b = TripletBuilder::new(n, n);
    for i in 0..n {
        b.push(i, i, rng.random_range(-1.0..1.0));
        for j in 0..n {
            if i != j && rng.random_bool(density) {
                b.push(i, j, rng.random_range(-1.0..1.0));
            }
        }
    }
    b.build()
}

pub fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}
