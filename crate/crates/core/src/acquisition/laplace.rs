use crate::error::{Error, Result};
use crate::graph::LaplacianOperator;
use crate::linalg::{pcg, LinearOperator};
use crate::propagation::CgOptions;
use crate::scalar::Real;

/// Harmonic extension of one-hot labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplaceOutput<T> {
    /// Row-major n×K.
    pub scores: Vec<T>,
    /// Nodes in components without any label; their rows hold the mean label.
    pub unreached: Vec<usize>,
}

// L restricted to the solvable unlabeled nodes.
struct Restricted<'a, T> {
    lap: &'a LaplacianOperator<T>,
    nodes: &'a [usize],
    pos: &'a [Option<usize>],
}

impl<T: Real> LinearOperator<T> for Restricted<'_, T> {
    fn dim(&self) -> usize {
        self.nodes.len()
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        let g = self.lap.graph();
        for (i, &node) in self.nodes.iter().enumerate() {
            let mut acc = g.degrees()[node] * x[i];
            for (j, w) in g.neighbors(node) {
                if let Some(p) = self.pos[j] {
                    acc -= w * x[p];
                }
            }
            y[i] = acc;
        }
    }

    fn diagonal(&self) -> Vec<T> {
        self.nodes.iter().map(|&i| self.lap.graph().degrees()[i]).collect()
    }
}

/// Solves `L_uu U = W_ul Y` per class with labeled rows fixed to one-hot.
pub fn laplace_learning<T: Real>(
    lap: &LaplacianOperator<T>,
    labeled: &[(usize, usize)],
    k: usize,
    opts: &CgOptions,
) -> Result<LaplaceOutput<T>> {
    let n = lap.n();
    if labeled.is_empty() {
        return Err(Error::domain("Laplace learning needs at least one label"));
    }
    let mut label_of: Vec<Option<usize>> = vec![None; n];
    let mut mean = vec![T::zero(); k];
    for &(x, c) in labeled {
        if c >= k || x >= n {
            return Err(Error::domain(format!("label ({x}, {c}) out of range")));
        }
        label_of[x] = Some(c);
        mean[c] += T::one();
    }
    let total = T::from_count(labeled.len());
    mean.iter_mut().for_each(|m| *m /= total);

    let conn = lap.graph().connectivity();
    let mut has_label = vec![false; conn.components];
    for &(x, _) in labeled {
        has_label[conn.component_of[x]] = true;
    }

    let mut scores = vec![T::zero(); n * k];
    let mut nodes = Vec::new();
    let mut pos = vec![None; n];
    let mut unreached = Vec::new();
    for x in 0..n {
        match label_of[x] {
            Some(c) => scores[x * k + c] = T::one(),
            None if has_label[conn.component_of[x]] => {
                pos[x] = Some(nodes.len());
                nodes.push(x);
            }
            None => {
                scores[x * k..(x + 1) * k].copy_from_slice(&mean);
                unreached.push(x);
            }
        }
    }
    if nodes.is_empty() {
        return Ok(LaplaceOutput { scores, unreached });
    }

    let op = Restricted {
        lap,
        nodes: &nodes,
        pos: &pos,
    };
    let maxit = opts.maxit.unwrap_or(10 * n).max(1);
    for c in 0..k {
        let rhs: Vec<T> = nodes
            .iter()
            .map(|&x| {
                lap.graph()
                    .neighbors(x)
                    .filter(|&(j, _)| label_of[j] == Some(c))
                    .map(|(_, w)| w)
                    .sum()
            })
            .collect();
        let sol = pcg(&op, &rhs, T::of(opts.tol), maxit)?;
        for (&x, &v) in nodes.iter().zip(&sol.x) {
            scores[x * k + c] = v;
        }
    }
    Ok(LaplaceOutput { scores, unreached })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::graph::SimilarityGraph;

    fn path(n: usize) -> LaplacianOperator<f64> {
        let edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1, 1.0)).collect();
        LaplacianOperator::new(Arc::new(SimilarityGraph::from_edges(n, edges).unwrap()))
    }

    const TIGHT: CgOptions = CgOptions {
        tol: 1e-14,
        maxit: None,
    };

    #[test]
    fn harmonic_midpoint() {
        let out = laplace_learning(&path(3), &[(0, 0), (2, 1)], 2, &TIGHT).unwrap();
        assert!((out.scores[2 + 1] - 0.5).abs() < 1e-12);
        assert!((out.scores[2] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn four_node_path_thirds() {
        let out = laplace_learning(&path(4), &[(0, 0), (3, 1)], 2, &TIGHT).unwrap();
        assert!((out.scores[2 + 1] - 1.0 / 3.0).abs() < 1e-12);
        assert!((out.scores[4 + 1] - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn fully_labeled_returns_labels() {
        let out = laplace_learning(&path(3), &[(0, 1), (1, 0), (2, 1)], 2, &TIGHT).unwrap();
        assert_eq!(out.scores, vec![0.0, 1.0, 1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn unlabeled_component_gets_mean() {
        let g = SimilarityGraph::<f64>::from_edges(5, [(0, 1, 1.0), (1, 2, 1.0), (3, 4, 1.0)]).unwrap();
        let lap = LaplacianOperator::new(Arc::new(g));
        let out = laplace_learning(&lap, &[(0, 0), (2, 1), (1, 1)], 2, &TIGHT).unwrap();
        assert_eq!(out.unreached, vec![3, 4]);
        assert!((out.scores[6] - 1.0 / 3.0).abs() < 1e-15);
        assert!((out.scores[9] - 2.0 / 3.0).abs() < 1e-15);
    }
}
