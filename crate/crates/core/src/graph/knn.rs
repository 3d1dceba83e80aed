use rayon::prelude::*;

use super::{Dataset, SimilarityGraph};
use crate::error::{Error, Result};
use crate::scalar::{dot, Real};

/// Similarity used for k-NN edges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Metric<T> {
    /// `⟨a,b⟩ / (‖a‖‖b‖)` clamped to `[0, 1]`.
    Cosine,
    /// `exp(−‖a−b‖² / 2σ²)`; `None` picks σ as the mean distance to the
    /// k-th neighbor.
    Rbf { sigma: Option<T> },
}

pub fn cosine_weight<T: Real>(a: &[T], b: &[T]) -> T {
    let denom = dot(a, a).sqrt() * dot(b, b).sqrt();
    (dot(a, b) / denom).max(T::zero()).min(T::one())
}

pub fn rbf_weight<T: Real>(a: &[T], b: &[T], sigma: T) -> T {
    let d2 = sq_dist(a, b);
    (-d2 / (T::of(2.0) * sigma * sigma)).exp()
}

fn sq_dist<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| {
        let d = x - y;
        acc + d * d
    })
}

/// Exact k-nearest-neighbor graph, symmetrized by elementwise max.
///
/// Neighbors are ranked by cosine similarity (descending) or Euclidean
/// distance (ascending); ties go to the smaller node index.
pub fn build_knn_graph<T: Real>(
    data: &Dataset<T>,
    k: usize,
    metric: Metric<T>,
) -> Result<SimilarityGraph<T>> {
    let n = data.n();
    if k == 0 || k >= n {
        return Err(Error::domain(format!("k = {k} must satisfy 0 < k < n = {n}")));
    }
    match metric {
        Metric::Cosine => {
            let norms: Vec<T> = (0..n).map(|i| dot(data.row(i), data.row(i)).sqrt()).collect();
            if let Some(i) = norms.iter().position(|&v| v == T::zero()) {
                return Err(Error::domain(format!("row {i} has zero norm under cosine metric")));
            }
            let rows: Vec<Vec<(usize, T)>> = (0..n)
                .into_par_iter()
                .map(|i| {
                    let xi = data.row(i);
                    let mut cand: Vec<(T, usize)> = (0..n)
                        .filter(|&j| j != i)
                        .map(|j| (dot(xi, data.row(j)) / (norms[i] * norms[j]), j))
                        .collect();
                    take_k(&mut cand, k, |a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
                    cand.into_iter()
                        .map(|(s, j)| (j, s.max(T::zero()).min(T::one())))
                        .collect()
                })
                .collect();
            to_graph(n, rows)
        }
        Metric::Rbf { sigma } => {
            let rows: Vec<Vec<(usize, T)>> = (0..n)
                .into_par_iter()
                .map(|i| {
                    let xi = data.row(i);
                    let mut cand: Vec<(T, usize)> = (0..n)
                        .filter(|&j| j != i)
                        .map(|j| (sq_dist(xi, data.row(j)), j))
                        .collect();
                    take_k(&mut cand, k, |a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
                    cand.into_iter().map(|(d2, j)| (j, d2)).collect()
                })
                .collect();
            let sigma = match sigma {
                Some(s) if s > T::zero() => s,
                Some(s) => return Err(Error::domain(format!("rbf bandwidth {s} must be positive"))),
                None => {
                    let total: T = rows.iter().map(|r| r[k - 1].1.sqrt()).sum();
                    let mean = total / T::from_count(n);
                    if mean > T::zero() {
                        mean
                    } else {
                        T::one()
                    }
                }
            };
            let two_s2 = T::of(2.0) * sigma * sigma;
            let rows = rows
                .into_iter()
                .map(|r| r.into_iter().map(|(j, d2)| (j, (-d2 / two_s2).exp())).collect())
                .collect();
            to_graph(n, rows)
        }
    }
}

fn take_k<T: Copy>(cand: &mut Vec<T>, k: usize, cmp: impl Fn(&T, &T) -> std::cmp::Ordering) {
    if cand.len() > k {
        cand.select_nth_unstable_by(k - 1, &cmp);
        cand.truncate(k);
    }
    cand.sort_unstable_by(&cmp);
}

fn to_graph<T: Real>(n: usize, rows: Vec<Vec<(usize, T)>>) -> Result<SimilarityGraph<T>> {
    let edges = rows
        .into_iter()
        .enumerate()
        .flat_map(|(i, r)| r.into_iter().map(move |(j, w)| (i, j, w)));
    SimilarityGraph::from_edges(n, edges)
}
