//! Propagation operators `K(source, ·)` that spread one label's influence.
//!
//! Every column is normalized to 1 at its source and attains its maximum
//! there. The graph Poisson operator solves `(L + τI) g = e_source` and
//! rescales `g`; the RBF operator ignores the data density; the heat operator
//! uses a truncated spectral expansion.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{Dataset, LaplacianOperator};
use crate::linalg::pcg;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PropagationKind<T> {
    Poisson { tau: T },
    Rbf { sigma: T },
    Heat { t: T, rank: usize },
}

/// One propagation column, normalized so `values[source] == 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationColumn<T> {
    pub source: usize,
    pub values: Vec<T>,
    pub kind: PropagationKind<T>,
}

impl<T: Real> PropagationColumn<T> {
    /// Normalization at the source, maximum at the source, entries in [0,1].
    pub fn verify(&self) -> Result<()> {
        let at_source = self.values.get(self.source).copied();
        if at_source != Some(T::one()) {
            return Err(Error::Numerical(format!(
                "column from {} is {:?} at its source",
                self.source, at_source
            )));
        }
        if let Some((i, v)) = self
            .values
            .iter()
            .enumerate()
            .find(|(_, &v)| !(v >= T::zero() && v <= T::one()))
        {
            return Err(Error::Numerical(format!(
                "column from {} has value {v} at node {i}",
                self.source
            )));
        }
        Ok(())
    }

    /// Index of the largest entry; ties resolve to the source.
    pub fn argmax(&self) -> usize {
        let mut best = self.source;
        for (i, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = i;
            }
        }
        best
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "node,value")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(out, "{i},{v}")?;
        }
        Ok(())
    }
}

/// Conjugate-gradient settings for Poisson solves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOptions {
    pub tol: f64,
    /// Defaults to `10·n` when `None`.
    pub maxit: Option<usize>,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            maxit: None,
        }
    }
}

/// Solver record for one Poisson column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub source: usize,
    pub iterations: usize,
    pub residual: f64,
    /// Unshifted solution at the source, bounded above by `1/τ`.
    pub raw_source_value: f64,
}

/// Raw solution `g` of `(L + τI) g = e_source`.
pub fn poisson_solve<T: Real>(
    lap: &LaplacianOperator<T>,
    tau: T,
    source: usize,
    opts: &CgOptions,
) -> Result<(Vec<T>, SolveStats)> {
    let n = lap.n();
    if !(tau > T::zero()) {
        return Err(Error::domain(format!("tau = {tau} must be positive")));
    }
    if source >= n {
        return Err(Error::domain(format!("source {source} outside {n} nodes")));
    }
    let mut rhs = vec![T::zero(); n];
    rhs[source] = T::one();
    let maxit = opts.maxit.unwrap_or(10 * n).max(1);
    let sol = pcg(&lap.shifted(tau), &rhs, T::of(opts.tol), maxit)?;
    let stats = SolveStats {
        source,
        iterations: sol.iterations,
        residual: sol.residual.to_f64_lossy(),
        raw_source_value: sol.x[source].to_f64_lossy(),
    };
    Ok((sol.x, stats))
}

/// Shift-scaled Poisson column `(g − min g) / (g(source) − min g)`.
pub fn poisson_propagate<T: Real>(
    lap: &LaplacianOperator<T>,
    tau: T,
    source: usize,
    opts: &CgOptions,
) -> Result<PropagationColumn<T>> {
    poisson_propagate_with_stats(lap, tau, source, opts).map(|(c, _)| c)
}

pub fn poisson_propagate_with_stats<T: Real>(
    lap: &LaplacianOperator<T>,
    tau: T,
    source: usize,
    opts: &CgOptions,
) -> Result<(PropagationColumn<T>, SolveStats)> {
    let (g, stats) = poisson_solve(lap, tau, source, opts)?;
    let values = shift_scale(&g, source)?;
    Ok((
        PropagationColumn {
            source,
            values,
            kind: PropagationKind::Poisson { tau },
        },
        stats,
    ))
}

fn shift_scale<T: Real>(g: &[T], source: usize) -> Result<Vec<T>> {
    let min = g.iter().copied().fold(T::infinity(), T::min);
    let span = g[source] - min;
    if !(span > T::zero()) {
        return Err(Error::DegenerateColumn {
            source_node: source,
        });
    }
    // CG error can leave near-source entries a hair above g(source).
    Ok(g.iter().map(|&v| ((v - min) / span).min(T::one())).collect())
}

/// `exp(−‖x − x_source‖² / 2σ²)`.
pub fn rbf_propagate<T: Real>(data: &Dataset<T>, sigma: T, source: usize) -> Result<PropagationColumn<T>> {
    if !(sigma > T::zero()) {
        return Err(Error::domain(format!("sigma = {sigma} must be positive")));
    }
    if source >= data.n() {
        return Err(Error::domain(format!("source {source} outside {} points", data.n())));
    }
    let xs = data.row(source);
    let values = (0..data.n())
        .map(|i| crate::graph::rbf_weight(xs, data.row(i), sigma))
        .collect();
    Ok(PropagationColumn {
        source,
        values,
        kind: PropagationKind::Rbf { sigma },
    })
}

/// Truncated spectral heat kernel `Σ_k e^{−λ_k t} e_k(source) e_k(·)`.
///
/// Truncation can create small negative entries (clamped to 0) and entries
/// above the source value (clamped to 1).
pub fn heat_propagate<T: Real>(lap: &LaplacianOperator<T>, t: T, source: usize) -> Result<PropagationColumn<T>> {
    let cache = lap
        .spectral_cache()
        .ok_or_else(|| Error::domain("heat propagation needs a spectral cache"))?;
    if cache.rank() < 2 {
        return Err(Error::domain("heat propagation needs at least 2 spectral modes"));
    }
    if t < T::zero() {
        return Err(Error::domain(format!("heat time {t} must be nonnegative")));
    }
    let n = lap.n();
    let mut h = vec![T::zero(); n];
    for (lambda, e) in cache.values.iter().zip(&cache.vectors) {
        let c = (-*lambda * t).exp() * e[source];
        for (hi, &ei) in h.iter_mut().zip(e) {
            *hi += c * ei;
        }
    }
    h.iter_mut().for_each(|v| *v = v.max(T::zero()));
    let hs = h[source];
    if !(hs > T::zero()) {
        return Err(Error::DegenerateColumn {
            source_node: source,
        });
    }
    let values = h.iter().map(|&v| (v / hs).min(T::one())).collect();
    Ok(PropagationColumn {
        source,
        values,
        kind: PropagationKind::Heat {
            t,
            rank: cache.rank(),
        },
    })
}

/// Poisson columns keyed by labeled node, with solver records.
#[derive(Debug, Clone, Default)]
pub struct PropagationCache<T> {
    columns: BTreeMap<usize, PropagationColumn<T>>,
    stats: BTreeMap<usize, SolveStats>,
}

impl<T: Real> PropagationCache<T> {
    pub fn new() -> Self {
        Self {
            columns: BTreeMap::new(),
            stats: BTreeMap::new(),
        }
    }

    pub fn get(&self, source: usize) -> Option<&PropagationColumn<T>> {
        self.columns.get(&source)
    }

    pub fn contains(&self, source: usize) -> bool {
        self.columns.contains_key(&source)
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn insert(&mut self, column: PropagationColumn<T>, stats: Option<SolveStats>) {
        if let Some(s) = stats {
            self.stats.insert(column.source, s);
        }
        self.columns.insert(column.source, column);
    }

    pub fn stats(&self) -> impl Iterator<Item = &SolveStats> {
        self.stats.values()
    }

    /// Computes Poisson columns for the missing sources in parallel and
    /// inserts them; returns the sources in the given order.
    pub fn ensure_poisson(
        &mut self,
        lap: &LaplacianOperator<T>,
        tau: T,
        sources: &[usize],
        opts: &CgOptions,
    ) -> Result<()> {
        let missing: Vec<usize> = sources.iter().copied().filter(|s| !self.contains(*s)).collect();
        let solved: Vec<Result<(PropagationColumn<T>, SolveStats)>> = missing
            .par_iter()
            .map(|&s| poisson_propagate_with_stats(lap, tau, s, opts))
            .collect();
        for r in solved {
            let (c, s) = r?;
            self.insert(c, Some(s));
        }
        Ok(())
    }
}

/// Empirical `(δ, ζ, ε)` class-separation estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeparationEstimate {
    pub delta: f64,
    /// Minimum within-cluster kernel value over retained pairs.
    pub zeta: f64,
    /// Maximum cross-cluster kernel value over retained pairs.
    pub epsilon: f64,
}

/// Estimates separator parameters from the columns of a probe sample.
///
/// `columns[a]` is the column whose source is probe node `a`; kernel values
/// between probes are read as `columns[a].values[columns[b].source]`. For each
/// δ, each cluster keeps at least `(1 − δ)` of its probes, dropping greedily
/// the member with the weakest within-cluster kernel value. The δ with the
/// largest `ζ − ε` wins (ties to the smaller δ).
pub fn measure_class_separation<T: Real>(
    columns: &[PropagationColumn<T>],
    cluster_ids: &[usize],
    deltas: &[f64],
) -> Result<SeparationEstimate> {
    let m = columns.len();
    let probe_cluster: Vec<usize> = columns.iter().map(|c| cluster_ids[c.source]).collect();
    let mut clusters: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (a, &c) in probe_cluster.iter().enumerate() {
        clusters.entry(c).or_default().push(a);
    }
    if clusters.len() < 2 {
        return Err(Error::domain("class separation needs probes from at least 2 clusters"));
    }
    let kern = |a: usize, b: usize| columns[a].values[columns[b].source].to_f64_lossy();
    let sym = |a: usize, b: usize| kern(a, b).min(kern(b, a));

    let mut best: Option<SeparationEstimate> = None;
    for &delta in deltas {
        if !(0.0..1.0).contains(&delta) {
            return Err(Error::domain(format!("delta = {delta} outside [0, 1)")));
        }
        let mut retained = vec![false; m];
        for members in clusters.values() {
            let keep = (((1.0 - delta) * members.len() as f64).ceil() as usize).max(1);
            let mut set = members.clone();
            while set.len() > keep {
                let (worst, _) = set
                    .iter()
                    .enumerate()
                    .map(|(pos, &a)| {
                        let w = set
                            .iter()
                            .filter(|&&b| b != a)
                            .map(|&b| sym(a, b))
                            .fold(f64::INFINITY, f64::min);
                        (pos, w)
                    })
                    .min_by(|x, y| x.1.total_cmp(&y.1).then(x.0.cmp(&y.0)))
                    .expect("nonempty set");
                set.remove(worst);
            }
            for a in set {
                retained[a] = true;
            }
        }
        let mut zeta = f64::INFINITY;
        let mut eps = 0.0f64;
        for a in (0..m).filter(|&a| retained[a]) {
            for b in (0..m).filter(|&b| retained[b] && b != a) {
                let v = kern(a, b);
                if probe_cluster[a] == probe_cluster[b] {
                    zeta = zeta.min(v);
                } else {
                    eps = eps.max(v);
                }
            }
        }
        if zeta == f64::INFINITY {
            zeta = 1.0;
        }
        let est = SeparationEstimate {
            delta,
            zeta,
            epsilon: eps,
        };
        if best.is_none_or(|b| est.zeta - est.epsilon > b.zeta - b.epsilon) {
            best = Some(est);
        }
    }
    best.ok_or_else(|| Error::domain("empty delta grid"))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::graph::{smallest_eigenpairs, EigenOptions, SimilarityGraph};

    fn path(n: usize) -> LaplacianOperator<f64> {
        let edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1, 1.0)).collect();
        LaplacianOperator::new(Arc::new(SimilarityGraph::from_edges(n, edges).unwrap()))
    }

    fn tight() -> CgOptions {
        CgOptions {
            tol: 1e-14,
            maxit: None,
        }
    }

    #[test]
    fn path3_poisson_values() {
        let lap = path(3);
        let (g, stats) = poisson_solve(&lap, 1.0, 0, &tight()).unwrap();
        for (v, want) in g.iter().zip([5.0 / 8.0, 0.25, 0.125]) {
            assert!((v - want).abs() < 1e-12);
        }
        assert!(stats.raw_source_value <= 1.0);
        let col = poisson_propagate(&lap, 1.0, 0, &tight()).unwrap();
        for (v, want) in col.values.iter().zip([1.0, 0.25, 0.0]) {
            assert!((v - want).abs() < 1e-12);
        }
        col.verify().unwrap();
    }

    #[test]
    fn path3_poisson_in_f32() {
        let g = SimilarityGraph::<f32>::from_edges(3, [(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        let lap = LaplacianOperator::new(Arc::new(g));
        let col = poisson_propagate(&lap, 1.0f32, 0, &CgOptions { tol: 1e-6, maxit: None }).unwrap();
        assert!((col.values[1] - 0.25).abs() < 1e-5);
        col.verify().unwrap();
    }

    #[test]
    fn isolated_node_is_degenerate() {
        let lap = LaplacianOperator::new(Arc::new(SimilarityGraph::<f64>::from_edges(1, []).unwrap()));
        let (g, _) = poisson_solve(&lap, 2.0, 0, &tight()).unwrap();
        assert!((g[0] - 0.5).abs() < 1e-15);
        assert!(matches!(
            poisson_propagate(&lap, 2.0, 0, &tight()),
            Err(Error::DegenerateColumn { source_node: 0 })
        ));
    }

    #[test]
    fn nonpositive_tau_rejected() {
        assert!(poisson_propagate(&path(3), 0.0, 0, &tight()).is_err());
    }

    #[test]
    fn rbf_values() {
        let d = Dataset::new("l", vec![0.0, 2.0f64.sqrt(), 3.0], 1, None, None).unwrap();
        let col = rbf_propagate(&d, 1.0, 0).unwrap();
        assert_eq!(col.values[0], 1.0);
        assert!((col.values[1] - (-1.0f64).exp()).abs() < 1e-15);
        assert!(col.values[2] < col.values[1]);
        col.verify().unwrap();
    }

    #[test]
    fn heat_at_time_zero_is_indicator() {
        let mut lap = path(6);
        let cache = smallest_eigenpairs(&lap, 6, 1e-10, &EigenOptions::default()).unwrap();
        lap.set_spectral_cache(cache);
        let col = heat_propagate(&lap, 0.0, 2).unwrap();
        for (i, v) in col.values.iter().enumerate() {
            let want = if i == 2 { 1.0 } else { 0.0 };
            assert!((v - want).abs() < 1e-10, "{:?}", col.values);
        }
    }

    #[test]
    fn heat_long_time_tends_to_constant() {
        let mut lap = path(6);
        let cache = smallest_eigenpairs(&lap, 3, 1e-10, &EigenOptions::default()).unwrap();
        lap.set_spectral_cache(cache);
        let col = heat_propagate(&lap, 200.0, 0).unwrap();
        assert!(col.values.iter().all(|v| (v - 1.0).abs() < 1e-8));
    }

    #[test]
    fn heat_stays_in_block() {
        let g = SimilarityGraph::from_edges(6, [(0, 1, 1.0), (1, 2, 1.0), (3, 4, 1.0), (4, 5, 1.0)]).unwrap();
        let mut lap = LaplacianOperator::new(Arc::new(g));
        let cache = smallest_eigenpairs(&lap, 6, 1e-10, &EigenOptions::default()).unwrap();
        lap.set_spectral_cache(cache);
        for t in [0.1, 1.0, 10.0] {
            let col = heat_propagate(&lap, t, 0).unwrap();
            assert!(col.values[3..].iter().all(|v: &f64| v.abs() < 1e-10));
        }
    }

    #[test]
    fn heat_requires_cache() {
        assert!(heat_propagate(&path(3), 1.0, 0).is_err());
    }

    fn block_columns(value_in: f64, value_out: f64, sizes: &[usize]) -> (Vec<PropagationColumn<f64>>, Vec<usize>) {
        let clusters: Vec<usize> = sizes.iter().enumerate().flat_map(|(c, &s)| std::iter::repeat_n(c, s)).collect();
        let n = clusters.len();
        let cols = (0..n)
            .map(|s| PropagationColumn {
                source: s,
                values: (0..n)
                    .map(|x| {
                        if x == s {
                            1.0
                        } else if clusters[x] == clusters[s] {
                            value_in
                        } else {
                            value_out
                        }
                    })
                    .collect(),
                kind: PropagationKind::Rbf { sigma: 1.0 },
            })
            .collect();
        (cols, clusters)
    }

    #[test]
    fn perfect_separator() {
        let (cols, clusters) = block_columns(1.0, 0.0, &[4, 5]);
        let est = measure_class_separation(&cols, &clusters, &[0.0, 0.1, 0.2]).unwrap();
        assert_eq!((est.delta, est.zeta, est.epsilon), (0.0, 1.0, 0.0));
    }

    #[test]
    fn constant_kernel_has_no_separation() {
        let (cols, clusters) = block_columns(0.5, 0.5, &[3, 3]);
        let est = measure_class_separation(&cols, &clusters, &[0.0, 0.2]).unwrap();
        assert_eq!((est.zeta, est.epsilon), (0.5, 0.5));
    }

    #[test]
    fn single_cluster_probe_rejected() {
        let (cols, clusters) = block_columns(1.0, 0.0, &[4]);
        assert!(measure_class_separation(&cols, &clusters, &[0.0]).is_err());
    }

    #[test]
    fn cache_is_insertion_order_independent() {
        let lap = path(5);
        let mut a = PropagationCache::new();
        let mut b = PropagationCache::new();
        a.ensure_poisson(&lap, 0.1, &[0, 3], &CgOptions::default()).unwrap();
        b.ensure_poisson(&lap, 0.1, &[3], &CgOptions::default()).unwrap();
        b.ensure_poisson(&lap, 0.1, &[0], &CgOptions::default()).unwrap();
        assert_eq!(a.get(0), b.get(0));
        assert_eq!(a.get(3), b.get(3));
        assert_eq!(a.len(), 2);
    }
}
