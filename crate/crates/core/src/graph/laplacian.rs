use std::io::Write;
use std::sync::Arc;

use super::SpectralCache;
use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, LinearOperator};
use crate::scalar::Real;

/// Sparse symmetric nonnegative weight matrix in CSR form with cached degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityGraph<T> {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
    degrees: Vec<T>,
}

impl<T: Real> SimilarityGraph<T> {
    /// Builds a graph from directed weighted edges.
    ///
    /// The result is symmetrized with `W ← max(W, Wᵀ)`, self-loops and zero
    /// weights are dropped. Negative or non-finite weights are rejected.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize, T)>) -> Result<Self> {
        let mut trip: Vec<(usize, usize, T)> = Vec::new();
        for (i, j, w) in edges {
            if i >= n || j >= n {
                return Err(Error::Structure(format!("edge ({i},{j}) outside {n} nodes")));
            }
            if !(w >= T::zero()) || !w.is_finite() {
                return Err(Error::Structure(format!("edge ({i},{j}) has weight {w}")));
            }
            if i == j || w == T::zero() {
                continue;
            }
            trip.push((i, j, w));
            trip.push((j, i, w));
        }
        trip.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(trip.len());
        let mut values: Vec<T> = Vec::with_capacity(trip.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, w) in trip {
            if last == Some((i, j)) {
                let v = values.last_mut().expect("duplicate follows an entry");
                *v = v.max(w);
                continue;
            }
            last = Some((i, j));
            row_ptr[i + 1] += 1;
            col_idx.push(j);
            values.push(w);
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        let mut g = Self {
            n,
            row_ptr,
            col_idx,
            values,
            degrees: Vec::new(),
        };
        g.degrees = g.compute_degrees();
        Ok(g)
    }

    /// Builds a graph from a dense symmetric weight matrix (rows of length n).
    pub fn from_dense(weights: &[Vec<T>]) -> Result<Self> {
        let n = weights.len();
        let mut edges = Vec::new();
        for (i, row) in weights.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Structure("dense weight matrix is not square".into()));
            }
            for (j, &w) in row.iter().enumerate() {
                if w != weights[j][i] {
                    return Err(Error::Structure(format!("weights ({i},{j}) not symmetric")));
                }
                if j > i {
                    edges.push((i, j, w));
                }
            }
        }
        Self::from_edges(n, edges)
    }

    fn compute_degrees(&self) -> Vec<T> {
        (0..self.n).map(|i| self.row_values(i).iter().copied().sum()).collect()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of stored (directed) entries.
    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn degrees(&self) -> &[T] {
        &self.degrees
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn row_indices(&self, i: usize) -> &[usize] {
        &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    pub fn row_values(&self, i: usize) -> &[T] {
        &self.values[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        self.row_indices(i).iter().copied().zip(self.row_values(i).iter().copied())
    }

    pub fn weight(&self, i: usize, j: usize) -> T {
        match self.row_indices(i).binary_search(&j) {
            Ok(p) => self.row_values(i)[p],
            Err(_) => T::zero(),
        }
    }

    /// Checks symmetry, nonnegativity, empty diagonal and degree consistency.
    pub fn check_invariants(&self) -> Result<()> {
        for i in 0..self.n {
            for (j, w) in self.neighbors(i) {
                if i == j {
                    return Err(Error::Structure(format!("self loop at {i}")));
                }
                if w < T::zero() {
                    return Err(Error::Structure(format!("negative weight ({i},{j})")));
                }
                if self.weight(j, i) != w {
                    return Err(Error::Structure(format!("asymmetric weight ({i},{j})")));
                }
            }
        }
        let tol = T::of(1e-12);
        for (i, (&stored, fresh)) in self.degrees.iter().zip(self.compute_degrees()).enumerate() {
            let scale = stored.abs().max(T::min_positive_value());
            if (stored - fresh).abs() > tol * scale {
                return Err(Error::Structure(format!("degree mismatch at node {i}")));
            }
        }
        Ok(())
    }

    /// Connected components by union-find.
    pub fn connectivity(&self) -> ConnectivityReport {
        let mut parent: Vec<usize> = (0..self.n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for i in 0..self.n {
            for &j in self.row_indices(i) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
        let mut label = vec![usize::MAX; self.n];
        let mut component_of = vec![0; self.n];
        let mut count = 0;
        for i in 0..self.n {
            let r = find(&mut parent, i);
            if label[r] == usize::MAX {
                label[r] = count;
                count += 1;
            }
            component_of[i] = label[r];
        }
        ConnectivityReport {
            components: count,
            component_of,
        }
    }

    /// Dense weight matrix, for small-graph oracles.
    pub fn to_dense(&self) -> DenseMatrix<T> {
        let mut w = DenseMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.neighbors(i) {
                w[(i, j)] = v;
            }
        }
        w
    }

    /// Writes the upper triangle as `i,j,w` lines.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "i,j,w")?;
        for i in 0..self.n {
            for (j, w) in self.neighbors(i).filter(|&(j, _)| j > i) {
                writeln!(out, "{i},{j},{w}")?;
            }
        }
        Ok(())
    }
}

/// Connected-component summary of a graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConnectivityReport {
    pub components: usize,
    pub component_of: Vec<usize>,
}

impl ConnectivityReport {
    pub fn is_connected(&self) -> bool {
        self.components <= 1
    }
}

/// Combinatorial Laplacian `L = D − W` applied matrix-free.
#[derive(Debug, Clone)]
pub struct LaplacianOperator<T> {
    graph: Arc<SimilarityGraph<T>>,
    spectral: Option<SpectralCache<T>>,
}

impl<T: Real> LaplacianOperator<T> {
    pub fn new(graph: Arc<SimilarityGraph<T>>) -> Self {
        Self {
            graph,
            spectral: None,
        }
    }

    pub fn graph(&self) -> &SimilarityGraph<T> {
        &self.graph
    }

    pub fn shared_graph(&self) -> Arc<SimilarityGraph<T>> {
        Arc::clone(&self.graph)
    }

    pub fn n(&self) -> usize {
        self.graph.n
    }

    pub fn spectral_cache(&self) -> Option<&SpectralCache<T>> {
        self.spectral.as_ref()
    }

    pub fn set_spectral_cache(&mut self, cache: SpectralCache<T>) {
        self.spectral = Some(cache);
    }

    /// `out = (L + shift·I) v`.
    pub fn apply_shifted(&self, shift: T, v: &[T], out: &mut [T]) {
        let g = &*self.graph;
        for (i, o) in out.iter_mut().enumerate().take(g.n) {
            let mut acc = (g.degrees[i] + shift) * v[i];
            for (j, w) in g.neighbors(i) {
                acc -= w * v[j];
            }
            *o = acc;
        }
    }

    /// `vᵀ L v`, computed edge-wise so it is nonnegative up to rounding.
    pub fn quadratic_form(&self, v: &[T]) -> T {
        let g = &*self.graph;
        let mut acc = T::zero();
        for i in 0..g.n {
            for (j, w) in g.neighbors(i).filter(|&(j, _)| j > i) {
                let d = v[i] - v[j];
                acc += w * d * d;
            }
        }
        acc
    }

    /// Dense `L + shift·I`.
    pub fn to_dense_shifted(&self, shift: T) -> DenseMatrix<T> {
        let g = &*self.graph;
        let mut l = DenseMatrix::zeros(g.n, g.n);
        for i in 0..g.n {
            l[(i, i)] = g.degrees[i] + shift;
            for (j, w) in g.neighbors(i) {
                l[(i, j)] -= w;
            }
        }
        l
    }

    /// View of `L + shift·I` as a linear operator.
    pub fn shifted(&self, shift: T) -> ShiftedLaplacian<'_, T> {
        ShiftedLaplacian { lap: self, shift }
    }
}

impl<T: Real> LinearOperator<T> for LaplacianOperator<T> {
    fn dim(&self) -> usize {
        self.n()
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        self.apply_shifted(T::zero(), x, y);
    }

    fn diagonal(&self) -> Vec<T> {
        self.graph.degrees.clone()
    }
}

/// `L + τI` borrowed from a [`LaplacianOperator`].
#[derive(Debug, Clone, Copy)]
pub struct ShiftedLaplacian<'a, T> {
    lap: &'a LaplacianOperator<T>,
    shift: T,
}

impl<T: Real> LinearOperator<T> for ShiftedLaplacian<'_, T> {
    fn dim(&self) -> usize {
        self.lap.n()
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        self.lap.apply_shifted(self.shift, x, y);
    }

    fn diagonal(&self) -> Vec<T> {
        self.lap.graph.degrees.iter().map(|&d| d + self.shift).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn path3() -> SimilarityGraph<f64> {
        SimilarityGraph::from_edges(3, [(0, 1, 1.0), (1, 2, 1.0)]).unwrap()
    }

    #[test]
    fn symmetrization_takes_max() {
        let g = SimilarityGraph::from_edges(2, [(0, 1, 0.3), (1, 0, 0.7)]).unwrap();
        assert_eq!(g.weight(0, 1), 0.7);
        assert_eq!(g.weight(1, 0), 0.7);
        g.check_invariants().unwrap();
    }

    #[test]
    fn self_loops_dropped() {
        let g = SimilarityGraph::from_edges(2, [(0, 0, 1.0), (0, 1, 0.5)]).unwrap();
        assert_eq!(g.weight(0, 0), 0.0);
        assert_eq!(g.degrees(), &[0.5, 0.5]);
    }

    #[test]
    fn negative_weight_rejected() {
        assert!(SimilarityGraph::from_edges(2, [(0, 1, -0.1)]).is_err());
    }

    #[test]
    fn laplacian_row_sums_vanish() {
        let g = Arc::new(path3());
        let lap = LaplacianOperator::new(g);
        let mut out = vec![0.0; 3];
        lap.apply(&[1.0, 1.0, 1.0], &mut out);
        assert!(out.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn connectivity_counts_components() {
        let g = SimilarityGraph::from_edges(5, [(0, 1, 1.0), (3, 4, 1.0)]).unwrap();
        let rep = g.connectivity();
        assert_eq!(rep.components, 3);
        assert_eq!(rep.component_of, vec![0, 0, 1, 2, 2]);
    }

    #[test]
    fn edge_list_export() {
        let mut buf = Vec::new();
        path3().write_edge_list(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "i,j,w\n0,1,1\n1,2,1\n");
    }
}
