//! Dirichlet random field: pseudolabel totals `α(x)`, posterior mean,
//! classification and the Dirichlet Variance `Tr[C(x)]`.

use std::io::Write;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::LaplacianOperator;
use crate::propagation::{poisson_propagate, CgOptions, PropagationColumn};
use crate::scalar::Real;

/// Pseudolabel accumulator with a uniform `Dir(α₀, …, α₀)` prior.
///
/// `alpha` stores totals without the prior; `α̃ = alpha + α₀` is formed on
/// demand.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletField<T> {
    n: usize,
    k: usize,
    alpha: Vec<T>,
    alpha0: T,
    labeled: Vec<(usize, usize)>,
    repeats: bool,
}

impl<T: Real> DirichletField<T> {
    pub fn new(n: usize, k: usize, alpha0: T) -> Result<Self> {
        if !(alpha0 >= T::zero()) || !alpha0.is_finite() {
            return Err(Error::domain(format!("alpha0 = {alpha0} must be finite and nonnegative")));
        }
        if k == 0 {
            return Err(Error::domain("a field needs at least one class"));
        }
        Ok(Self {
            n,
            k,
            alpha: vec![T::zero(); n * k],
            alpha0,
            labeled: Vec::new(),
            repeats: false,
        })
    }

    /// Allows repeated observations at one node (continuum mode).
    pub fn with_repeat_observations(mut self) -> Self {
        self.repeats = true;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_classes(&self) -> usize {
        self.k
    }

    pub fn alpha0(&self) -> T {
        self.alpha0
    }

    pub fn labeled(&self) -> &[(usize, usize)] {
        &self.labeled
    }

    pub fn is_labeled(&self, node: usize) -> bool {
        self.labeled.iter().any(|&(l, _)| l == node)
    }

    /// Pseudolabel totals at `x`, prior excluded.
    pub fn alpha(&self, x: usize) -> &[T] {
        &self.alpha[x * self.k..(x + 1) * self.k]
    }

    pub fn add_label(&mut self, column: &PropagationColumn<T>, class: usize) -> Result<()> {
        self.add_label_values(column.source, &column.values, class)
    }

    /// Adds `values` to the class-`class` totals as an observation at `source`.
    pub fn add_label_values(&mut self, source: usize, values: &[T], class: usize) -> Result<()> {
        if class >= self.k {
            return Err(Error::domain(format!("class {class} outside 0..{}", self.k)));
        }
        if values.len() != self.n {
            return Err(Error::domain(format!(
                "column of length {} for a field on {} nodes",
                values.len(),
                self.n
            )));
        }
        if !self.repeats && self.is_labeled(source) {
            return Err(Error::domain(format!("node {source} is already labeled")));
        }
        for (x, &v) in values.iter().enumerate() {
            self.alpha[x * self.k + class] += v;
        }
        self.labeled.push((source, class));
        Ok(())
    }

    /// `β(x) = Σ_k α̃_k(x)`.
    pub fn beta(&self, x: usize) -> T {
        self.alpha(x).iter().copied().sum::<T>() + T::from_count(self.k) * self.alpha0
    }

    fn checked_beta(&self, x: usize) -> Result<T> {
        let b = self.beta(x);
        if b > T::zero() {
            Ok(b)
        } else {
            Err(Error::DegenerateField { node: x })
        }
    }

    /// `p̂_k(x) = (α_k + α₀) / (Kα₀ + Σ_m α_m)`, row-major n×K.
    pub fn posterior_mean(&self) -> Result<Vec<T>> {
        let mut out = Vec::with_capacity(self.n * self.k);
        for x in 0..self.n {
            let b = self.checked_beta(x)?;
            out.extend(self.alpha(x).iter().map(|&a| (a + self.alpha0) / b));
        }
        Ok(out)
    }

    /// `argmax_k α_k(x)`, ties to the smallest class.
    pub fn classify(&self) -> Result<Vec<usize>> {
        (0..self.n)
            .map(|x| {
                self.checked_beta(x)?;
                Ok(argmax(self.alpha(x)))
            })
            .collect()
    }

    /// Dirichlet Variance at one node; O(K).
    pub fn variance_at(&self, x: usize) -> Result<T> {
        self.checked_beta(x)?;
        Ok(trace_covariance_shifted(self.alpha(x), self.alpha0))
    }

    pub fn dirichlet_variance(&self) -> Result<Vec<T>> {
        (0..self.n).map(|x| self.variance_at(x)).collect()
    }

    pub fn summary(&self) -> Result<PosteriorSummary<T>> {
        Ok(PosteriorSummary {
            k: self.k,
            p_hat: self.posterior_mean()?,
            y_hat: self.classify()?,
            variance: self.dirichlet_variance()?,
        })
    }

    /// CSV snapshot `node, alpha_*, p_hat_*, variance, y_hat`.
    pub fn write_snapshot<W: Write>(&self, mut out: W) -> Result<()> {
        let s = self.summary()?;
        let io = |e| Error::io("<snapshot>", e);
        let mut header = vec!["node".to_string()];
        header.extend((0..self.k).map(|c| format!("alpha_{c}")));
        header.extend((0..self.k).map(|c| format!("p_hat_{c}")));
        header.push("variance".into());
        header.push("y_hat".into());
        writeln!(out, "{}", header.join(",")).map_err(io)?;
        for x in 0..self.n {
            let mut row = vec![x.to_string()];
            row.extend(self.alpha(x).iter().map(|v| v.to_string()));
            row.extend(s.p_hat(x).iter().map(|v| v.to_string()));
            row.push(s.variance[x].to_string());
            row.push(s.y_hat[x].to_string());
            writeln!(out, "{}", row.join(",")).map_err(io)?;
        }
        Ok(())
    }
}

/// Posterior mean, hard labels and variance for every node.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSummary<T> {
    k: usize,
    /// Row-major n×K.
    pub p_hat: Vec<T>,
    pub y_hat: Vec<usize>,
    pub variance: Vec<T>,
}

impl<T: Real> PosteriorSummary<T> {
    pub fn p_hat(&self, x: usize) -> &[T] {
        &self.p_hat[x * self.k..(x + 1) * self.k]
    }
}

pub(crate) fn argmax<T: Real>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// `Tr[C] = (β² − Σ α̃_k²) / (β²(β+1))` for the full parameter vector `α̃`.
pub fn trace_covariance<T: Real>(alpha_tilde: &[T]) -> T {
    trace_covariance_shifted(alpha_tilde, T::zero())
}

// Σ_k a_k(β − a_k) is the same numerator without cancellation.
fn trace_covariance_shifted<T: Real>(alpha: &[T], alpha0: T) -> T {
    let beta: T = alpha.iter().map(|&a| a + alpha0).sum();
    let num: T = alpha
        .iter()
        .map(|&a| {
            let at = a + alpha0;
            at * (beta - at)
        })
        .sum();
    (num / (beta * beta * (beta + T::one()))).max(T::zero())
}

/// Order statistic at index `⌈q(n−1)⌉` of the sorted values.
pub fn percentile_higher<T: Real>(values: &[T], q: f64) -> T {
    let mut v = values.to_vec();
    let idx = ((q * (v.len() - 1) as f64).ceil() as usize).min(v.len() - 1);
    let (_, nth, _) = v.select_nth_unstable_by(idx, |a, b| a.partial_cmp(b).expect("finite"));
    *nth
}

/// Maximum over columns of their `100(K̂−1)/K̂` percentile.
pub fn alpha0_from_columns<T: Real>(columns: &[&[T]], k_hat: usize) -> Result<T> {
    if k_hat < 2 {
        return Err(Error::domain(format!("K_hat = {k_hat} must be at least 2")));
    }
    let q = (k_hat - 1) as f64 / k_hat as f64;
    columns
        .iter()
        .filter(|c| !c.is_empty())
        .map(|c| percentile_higher(c, q))
        .fold(None, |m: Option<T>, v| Some(m.map_or(v, |m| m.max(v))))
        .ok_or_else(|| Error::domain("alpha0 heuristic needs at least one column"))
}

/// Prior strength from `5·K̂` random Poisson columns.
///
/// On a disconnected graph each column's percentile is taken over its
/// source's component only; isolated sources are skipped.
pub fn alpha0_heuristic<T: Real>(
    lap: &LaplacianOperator<T>,
    tau: T,
    k_hat: usize,
    seed: u64,
    opts: &CgOptions,
) -> Result<T> {
    if k_hat < 2 {
        return Err(Error::domain(format!("K_hat = {k_hat} must be at least 2")));
    }
    let n = lap.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sources = index::sample(&mut rng, n, (5 * k_hat).min(n)).into_vec();
    let comps = lap.graph().connectivity();
    let mut restricted: Vec<Vec<T>> = Vec::with_capacity(sources.len());
    for s in sources {
        let col = match poisson_propagate(lap, tau, s, opts) {
            Ok(c) => c,
            Err(Error::DegenerateColumn { .. }) => continue,
            Err(e) => return Err(e),
        };
        let own = comps.component_of[s];
        restricted.push(
            col.values
                .iter()
                .zip(&comps.component_of)
                .filter(|(_, &c)| c == own)
                .map(|(&v, _)| v)
                .collect(),
        );
    }
    let refs: Vec<&[T]> = restricted.iter().map(Vec::as_slice).collect();
    alpha0_from_columns(&refs, k_hat)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::graph::SimilarityGraph;
    use crate::propagation::PropagationKind;

    fn col(source: usize, values: Vec<f64>) -> PropagationColumn<f64> {
        PropagationColumn {
            source,
            values,
            kind: PropagationKind::Poisson { tau: 1.0 },
        }
    }

    #[test]
    fn prior_only_is_uniform() {
        let f = DirichletField::<f64>::new(4, 3, 1.0).unwrap();
        assert!(f.posterior_mean().unwrap().iter().all(|&p| (p - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn zero_prior_without_labels_is_degenerate() {
        let f = DirichletField::<f64>::new(4, 3, 0.0).unwrap();
        assert!(matches!(f.posterior_mean(), Err(Error::DegenerateField { node: 0 })));
        assert!(DirichletField::<f64>::new(4, 3, -1.0).is_err());
    }

    #[test]
    fn prior_variance_is_one_sixth() {
        let f = DirichletField::<f64>::new(5, 2, 1.0).unwrap();
        assert!(f.dirichlet_variance().unwrap().iter().all(|v| (v - 1.0 / 6.0).abs() < 1e-15));
    }

    #[test]
    fn path_column_accumulates() {
        let mut f = DirichletField::<f64>::new(3, 2, 0.0).unwrap();
        f.add_label(&col(0, vec![1.0, 0.25, 0.0]), 0).unwrap();
        assert_eq!([f.alpha(0)[0], f.alpha(1)[0], f.alpha(2)[0]], [1.0, 0.25, 0.0]);
        assert!(f.add_label(&col(0, vec![1.0, 0.25, 0.0]), 1).is_err());
        assert!(f.add_label(&col(1, vec![0.0; 3]), 2).is_err());
    }

    #[test]
    fn repeat_mode_doubles() {
        let c = col(0, vec![1.0, 0.25, 0.0]);
        let mut f = DirichletField::<f64>::new(3, 2, 0.0).unwrap().with_repeat_observations();
        f.add_label(&c, 0).unwrap();
        f.add_label(&c, 0).unwrap();
        assert_eq!(f.alpha(1)[0], 0.5);
    }

    #[test]
    fn order_independent() {
        let a = col(0, vec![1.0, 0.3, 0.1]);
        let b = col(2, vec![0.2, 0.6, 1.0]);
        let mut f = DirichletField::<f64>::new(3, 2, 0.5).unwrap();
        let mut g = f.clone();
        f.add_label(&a, 0).unwrap();
        f.add_label(&b, 1).unwrap();
        g.add_label(&b, 1).unwrap();
        g.add_label(&a, 0).unwrap();
        assert_eq!(f.posterior_mean().unwrap(), g.posterior_mean().unwrap());
    }

    #[test]
    fn mean_by_hand() {
        let mut f = DirichletField::<f64>::new(1, 2, 1.0).unwrap();
        f.add_label_values(0, &[2.0], 0).unwrap();
        f.add_label_values(1, &[1.0], 1).unwrap();
        let p = f.posterior_mean().unwrap();
        assert!((p[0] - 0.6).abs() < 1e-15 && (p[1] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn classify_ties_to_smallest() {
        let mut f = DirichletField::<f64>::new(1, 3, 0.0).unwrap();
        f.add_label_values(10, &[0.2], 0).unwrap();
        f.add_label_values(11, &[0.7], 1).unwrap();
        f.add_label_values(12, &[0.1], 2).unwrap();
        assert_eq!(f.classify().unwrap(), vec![1]);
        let mut g = DirichletField::<f64>::new(1, 2, 0.0).unwrap();
        g.add_label_values(10, &[0.5], 0).unwrap();
        g.add_label_values(11, &[0.5], 1).unwrap();
        assert_eq!(g.classify().unwrap(), vec![0]);
    }

    #[test]
    fn variance_slice_is_non_monotone() {
        let v = |a2: f64| trace_covariance(&[1.6, a2]);
        assert!(v(0.93) > v(0.4) && v(0.93) > v(3.0));
        let (best, _) = (1..=4000)
            .map(|i| i as f64 * 0.001)
            .map(|a| (a, v(a)))
            .fold((0.0, f64::MIN), |b, p| if p.1 > b.1 { p } else { b });
        assert!((best - 0.932).abs() < 2e-3, "{best}");
    }

    #[test]
    fn variance_decays_like_one_over_t() {
        for t in [1e2f64, 1e4, 1e6] {
            let v = trace_covariance(&[t, t]);
            assert!((v * t - 0.25).abs() < 1.0 / t);
        }
    }

    #[test]
    fn dirichlet_monte_carlo_trace() {
        use rand_distr::{Distribution, Gamma};
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = [0.7, 2.0, 3.5];
        let draws = 200_000;
        let gammas: Vec<Gamma<f64>> = a.iter().map(|&s| Gamma::new(s, 1.0).unwrap()).collect();
        let mut sum = [0.0; 3];
        let mut sq = [0.0; 3];
        for _ in 0..draws {
            let g: Vec<f64> = gammas.iter().map(|d| d.sample(&mut rng)).collect();
            let t: f64 = g.iter().sum();
            for k in 0..3 {
                let p = g[k] / t;
                sum[k] += p;
                sq[k] += p * p;
            }
        }
        let m = draws as f64;
        let emp: f64 = (0..3).map(|k| sq[k] / m - (sum[k] / m).powi(2)).sum();
        assert!((emp - trace_covariance(&a)).abs() < 2e-3, "{emp}");
    }

    #[test]
    fn percentile_higher_rule() {
        let half = [0.0, 0.0, 1.0, 1.0];
        assert_eq!(percentile_higher(&half, 0.5), 1.0);
        assert_eq!(percentile_higher(&[3.0, 1.0, 2.0], 0.5), 2.0);
        assert_eq!(percentile_higher(&[5.0], 0.9), 5.0);
    }

    #[test]
    fn alpha0_block_kernel() {
        let c: Vec<f64> = (0..10).map(|i| if i < 5 { 1.0 } else { 0.0 }).collect();
        assert_eq!(alpha0_from_columns(&[&c], 2).unwrap(), 1.0);
        let flat = vec![0.3; 8];
        assert_eq!(alpha0_from_columns(&[&flat, &flat], 4).unwrap(), 0.3);
        assert!(alpha0_from_columns::<f64>(&[&flat], 1).is_err());
    }

    #[test]
    fn alpha0_heuristic_on_disconnected_graph_is_positive() {
        let g = SimilarityGraph::from_edges(6, [(0, 1, 1.0), (1, 2, 1.0), (3, 4, 1.0), (4, 5, 1.0)]).unwrap();
        let lap = LaplacianOperator::new(Arc::new(g));
        let a = alpha0_heuristic(&lap, 0.1, 2, 3, &CgOptions::default()).unwrap();
        assert!(a > 0.0 && a <= 1.0);
        assert_eq!(a, alpha0_heuristic(&lap, 0.1, 2, 3, &CgOptions::default()).unwrap());
    }

    #[test]
    fn snapshot_csv_shape() {
        let mut f = DirichletField::<f64>::new(2, 2, 1.0).unwrap();
        f.add_label_values(0, &[1.0, 0.5], 1).unwrap();
        let mut buf = Vec::new();
        f.write_snapshot(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "node,alpha_0,alpha_1,p_hat_0,p_hat_1,variance,y_hat");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].ends_with(",1"));
    }
}
