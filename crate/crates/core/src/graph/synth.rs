use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::Dataset;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// One Gaussian component with diagonal covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureComponent<T> {
    pub weight: T,
    pub mean: Vec<T>,
    pub var_diag: Vec<T>,
    pub class: usize,
}

/// Draws `n` i.i.d. samples from a diagonal Gaussian mixture.
///
/// The component index becomes the cluster id and the component's class the
/// label. Weights are normalized internally.
pub fn generate_mixture<T: Real>(
    components: &[MixtureComponent<T>],
    n: usize,
    seed: u64,
) -> Result<Dataset<T>> {
    let first = components
        .first()
        .ok_or_else(|| Error::domain("mixture needs at least one component"))?;
    let dim = first.mean.len();
    for (c, comp) in components.iter().enumerate() {
        if !(comp.weight > T::zero()) {
            return Err(Error::domain(format!("component {c} has non-positive weight")));
        }
        if comp.mean.len() != dim || comp.var_diag.len() != dim {
            return Err(Error::domain(format!("component {c} has inconsistent dimension")));
        }
        if comp.var_diag.iter().any(|&v| !(v > T::zero())) {
            return Err(Error::domain(format!(
                "component {c} has a non-positive covariance entry"
            )));
        }
    }
    let weights: Vec<f64> = components.iter().map(|c| c.weight.to_f64_lossy()).collect();
    let pick = WeightedIndex::new(&weights).map_err(|e| Error::domain(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    let mut clusters = Vec::with_capacity(n);
    for _ in 0..n {
        let c = pick.sample(&mut rng);
        let comp = &components[c];
        for (&m, &v) in comp.mean.iter().zip(&comp.var_diag) {
            let z: f64 = rng.sample(StandardNormal);
            features.push(m + v.sqrt() * T::of(z));
        }
        labels.push(comp.class);
        clusters.push(c);
    }
    let k = components.iter().map(|c| c.class).max().unwrap_or(0) + 1;
    Dataset::new("mixture", features, dim, Some(labels), Some(clusters))?.with_num_classes(k)
}

/// Two interleaved half circles with isotropic Gaussian noise.
pub fn two_moons<T: Real>(n: usize, noise: f64, seed: u64) -> Result<Dataset<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let moon = i % 2;
        let t = rng.random::<f64>() * std::f64::consts::PI;
        let (x, y) = if moon == 0 {
            (t.cos(), t.sin())
        } else {
            (1.0 - t.cos(), 0.5 - t.sin())
        };
        let nx: f64 = rng.sample(StandardNormal);
        let ny: f64 = rng.sample(StandardNormal);
        features.push(T::of(x + noise * nx));
        features.push(T::of(y + noise * ny));
        labels.push(moon);
    }
    Dataset::new("two-moons", features, 2, Some(labels.clone()), Some(labels))?.with_num_classes(2)
}

/// Equal-weight isotropic blobs centered on a square 2D grid with spacing
/// `separation`. Component `c` has class `c`.
pub fn grid_blobs<T: Real>(
    num_clusters: usize,
    separation: f64,
    std: f64,
    n: usize,
    seed: u64,
) -> Result<Dataset<T>> {
    if num_clusters == 0 {
        return Err(Error::domain("grid_blobs needs at least one cluster"));
    }
    let cols = (num_clusters as f64).sqrt().ceil() as usize;
    let comps: Vec<MixtureComponent<T>> = (0..num_clusters)
        .map(|c| MixtureComponent {
            weight: T::one(),
            mean: vec![
                T::of((c % cols) as f64 * separation),
                T::of((c / cols) as f64 * separation),
            ],
            var_diag: vec![T::of(std * std); 2],
            class: c,
        })
        .collect();
    generate_mixture(&comps, n, seed)
}
