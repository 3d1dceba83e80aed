//! Continuum and Monte-Carlo checks of the exploration and exploitation
//! behaviour of Dirichlet active learning. Everything here is plain `f64`.

mod bound;
mod consistency;
mod ode;
mod prior;

pub use bound::{
    exploration_bound, exploration_constant, exploration_constant_expanded, monte_carlo_discovery,
    simplified_bound, BoundParams, DiscoveryParams, DiscoveryResult, ExplorationBound,
};
pub use consistency::{empirical_consistency, ConsistencyOptions, ConsistencyRow};
pub use ode::{
    evolve_alpha, fixed_point_qbar, FixedPoint, FixedPointOptions, GridField, LambdaSchedule, OdeOptions,
    Trajectory,
};
pub use prior::{alignment_score, centrality_weight};

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: f64,
    pub std: f64,
    pub class: usize,
}

/// Gaussian mixture on an interval with a uniform evaluation grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Mixture1D {
    components: Vec<MixtureComponent>,
    domain: (f64, f64),
    grid: usize,
}

impl Mixture1D {
    /// Weights are normalized to sum to one.
    pub fn new(components: Vec<MixtureComponent>, domain: (f64, f64), grid: usize) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::domain("mixture has no components"));
        }
        if !(domain.0 < domain.1) || grid < 2 {
            return Err(Error::domain("mixture needs a < b and at least 2 grid points"));
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if components.iter().any(|c| !(c.weight >= 0.0) || !(c.std > 0.0)) || !(total > 0.0) {
            return Err(Error::domain("mixture weights must be nonnegative and stds positive"));
        }
        let components = components
            .into_iter()
            .map(|c| MixtureComponent {
                weight: c.weight / total,
                ..c
            })
            .collect();
        Ok(Self { components, domain, grid })
    }

    /// Four alternating clusters with three class boundaries, the leftmost
    /// between a small class-1 cluster and a large class-0 cluster.
    pub fn boundary_example() -> Self {
        let c = |weight, mean, std, class| MixtureComponent { weight, mean, std, class };
        Self::new(
            vec![
                c(0.15, -3.0, 0.5, 1),
                c(0.35, -1.0, 0.6, 0),
                c(0.30, 1.2, 0.6, 1),
                c(0.20, 3.0, 0.5, 0),
            ],
            (-5.0, 5.0),
            401,
        )
        .expect("valid mixture")
    }

    /// Two mirrored equal-weight clusters at ±1.
    pub fn symmetric_pair() -> Self {
        let c = |mean, class| MixtureComponent {
            weight: 0.5,
            mean,
            std: 0.6,
            class,
        };
        Self::new(vec![c(-1.0, 0), c(1.0, 1)], (-4.0, 4.0), 401).expect("valid mixture")
    }

    pub fn components(&self) -> &[MixtureComponent] {
        &self.components
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn num_classes(&self) -> usize {
        self.components.iter().map(|c| c.class).max().unwrap_or(0) + 1
    }

    pub fn grid_points(&self) -> Vec<f64> {
        let (a, b) = self.domain;
        let h = (b - a) / (self.grid - 1) as f64;
        (0..self.grid).map(|i| a + h * i as f64).collect()
    }

    /// Weighted class densities `w_k ρ_k(x)` summed per class.
    pub fn class_densities(&self, x: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.num_classes()];
        for c in &self.components {
            out[c.class] += c.weight * gaussian_pdf(x, c.mean, c.std);
        }
        out
    }

    pub fn density(&self, x: f64) -> f64 {
        self.class_densities(x).iter().sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, usize) {
        let mut u: f64 = rng.random();
        let mut pick = self.components.len() - 1;
        for (i, c) in self.components.iter().enumerate() {
            if u < c.weight {
                pick = i;
                break;
            }
            u -= c.weight;
        }
        let c = self.components[pick];
        let x = Normal::new(c.mean, c.std).expect("positive std").sample(rng);
        (x, c.class)
    }
}

fn gaussian_pdf(x: f64, mean: f64, std: f64) -> f64 {
    let z = (x - mean) / std;
    (-0.5 * z * z).exp() / (std * (2.0 * std::f64::consts::PI).sqrt())
}

/// Trapezoid quadrature weights for a sorted grid.
pub fn trapezoid_weights(xs: &[f64]) -> Vec<f64> {
    let m = xs.len();
    let mut w = vec![0.0; m];
    for i in 0..m.saturating_sub(1) {
        let h = 0.5 * (xs[i + 1] - xs[i]);
        w[i] += h;
        w[i + 1] += h;
    }
    w
}

/// Class-conditional probabilities `η_k(x) = w_kρ_k(x)/ρ(x)`, one row per grid point.
pub fn eval_eta(mixture: &Mixture1D, xs: &[f64]) -> Result<Vec<Vec<f64>>> {
    xs.iter()
        .map(|&x| {
            let d = mixture.class_densities(x);
            let rho: f64 = d.iter().sum();
            if !(rho > f64::MIN_POSITIVE) {
                return Err(Error::Domain(format!(
                    "mixture density vanishes at x = {x}; use a tighter domain"
                )));
            }
            Ok(d.iter().map(|v| v / rho).collect())
        })
        .collect()
}

/// `G = Σ η_k(1 − η_k)`, zero for one-hot rows and `1 − 1/K` for uniform ones.
pub fn population_uncertainty(eta: &[f64]) -> f64 {
    eta.iter().map(|e| e * (1.0 - e)).sum()
}
