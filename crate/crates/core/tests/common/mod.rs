#![allow(dead_code)]

use std::sync::Arc;

use dial_core::graph::{LaplacianOperator, SimilarityGraph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Connected graph: a random spanning tree plus `extra` random edges,
/// weights in `[0.1, 1]`.
pub fn random_connected(n: usize, extra: usize, seed: u64) -> SimilarityGraph<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for i in 1..n {
        let j = rng.random_range(0..i);
        edges.push((i, j, rng.random_range(0.1..=1.0)));
    }
    for _ in 0..extra {
        let (i, j) = (rng.random_range(0..n), rng.random_range(0..n));
        edges.push((i, j, rng.random_range(0.1..=1.0)));
    }
    SimilarityGraph::from_edges(n, edges).unwrap()
}

pub fn operator(g: SimilarityGraph<f64>) -> LaplacianOperator<f64> {
    LaplacianOperator::new(Arc::new(g))
}

pub fn to_na(m: &dial_core::linalg::DenseMatrix<f64>) -> nalgebra::DMatrix<f64> {
    nalgebra::DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}
