use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{eval_eta, trapezoid_weights, Mixture1D};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyOptions {
    pub sizes: Vec<usize>,
    pub trials: usize,
    /// Bandwidth schedule `t(n) = n^{-exponent}`.
    pub bandwidth_exponent: f64,
    pub seed: u64,
}

impl Default for ConsistencyOptions {
    fn default() -> Self {
        Self {
            sizes: vec![100, 1000, 10_000],
            trials: 20,
            bandwidth_exponent: 1.0 / 3.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsistencyRow {
    pub n: usize,
    pub t: f64,
    pub mean_l1: f64,
    /// Standard error of `mean_l1` across trials.
    pub std_error: f64,
    pub trials: usize,
}

/// L1(ρ) error of the kernel trend estimate `η̂(x) = Σ Y_i 𝒦_t(X_i,x) / (n E_ρ[𝒦_t(·,x)])`
/// against the true `η` of the highest class, with `𝒦_t(x,z) = exp(−|x−z|²/(4t))`.
///
/// Labels are `Y = 1` for the highest class id and 0 otherwise, so the mixture
/// may carry one or two classes.
pub fn empirical_consistency(mixture: &Mixture1D, opts: &ConsistencyOptions) -> Result<Vec<ConsistencyRow>> {
    let classes = mixture.num_classes();
    if classes > 2 {
        return Err(Error::domain("consistency check needs a binary mixture"));
    }
    if opts.trials == 0 || opts.sizes.iter().any(|&n| n == 0) {
        return Err(Error::domain("need at least one trial and positive sizes"));
    }
    let target = classes - 1;
    let xs = mixture.grid_points();
    let w = trapezoid_weights(&xs);
    let eta: Vec<f64> = eval_eta(mixture, &xs)?.iter().map(|r| r[target]).collect();
    let rho: Vec<f64> = xs.iter().map(|&x| mixture.density(x)).collect();

    opts.sizes
        .iter()
        .enumerate()
        .map(|(si, &n)| {
            let t = (n as f64).powf(-opts.bandwidth_exponent);
            let kern = |d: f64| (-d * d / (4.0 * t)).exp();
            let expect: Vec<f64> = xs
                .iter()
                .map(|&x| xs.iter().zip(&w).zip(&rho).map(|((&z, w), r)| kern(x - z) * r * w).sum())
                .collect();
            let errors: Vec<f64> = (0..opts.trials)
                .into_par_iter()
                .map(|trial| {
                    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
                    rng.set_stream(((si as u64) << 32) | trial as u64);
                    let mut sum = vec![0.0; xs.len()];
                    for _ in 0..n {
                        let (xi, class) = mixture.sample(&mut rng);
                        if class == target {
                            for (s, &x) in sum.iter_mut().zip(&xs) {
                                *s += kern(xi - x);
                            }
                        }
                    }
                    (0..xs.len())
                        .map(|i| (sum[i] / (n as f64 * expect[i]) - eta[i]).abs() * rho[i] * w[i])
                        .sum()
                })
                .collect();
            let m = errors.len() as f64;
            let mean = errors.iter().sum::<f64>() / m;
            let var = if errors.len() > 1 {
                errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (m - 1.0)
            } else {
                0.0
            };
            Ok(ConsistencyRow {
                n,
                t,
                mean_l1: mean,
                std_error: (var / m).sqrt(),
                trials: opts.trials,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::theory::MixtureComponent;

    fn binary() -> Mixture1D {
        let c = |weight, mean, class| MixtureComponent {
            weight,
            mean,
            std: 0.7,
            class,
        };
        Mixture1D::new(vec![c(0.6, -1.0, 0), c(0.4, 1.0, 1)], (-4.0, 4.0), 161).unwrap()
    }

    #[test]
    fn error_decreases_with_n() {
        let opts = ConsistencyOptions {
            trials: 8,
            ..Default::default()
        };
        let rows = empirical_consistency(&binary(), &opts).unwrap();
        assert!(rows[0].mean_l1 > rows[1].mean_l1 && rows[1].mean_l1 > rows[2].mean_l1, "{rows:?}");
    }

    #[test]
    fn single_class_error_vanishes() {
        let one = Mixture1D::new(
            vec![MixtureComponent {
                weight: 1.0,
                mean: 0.0,
                std: 1.0,
                class: 0,
            }],
            (-4.0, 4.0),
            161,
        )
        .unwrap();
        let opts = ConsistencyOptions {
            sizes: vec![100, 10_000],
            trials: 4,
            ..Default::default()
        };
        let rows = empirical_consistency(&one, &opts).unwrap();
        assert!(rows[1].mean_l1 < rows[0].mean_l1);
        assert!(rows[1].mean_l1 < 0.05, "{rows:?}");
    }

    #[test]
    fn quadrupling_trials_halves_standard_error() {
        let run = |trials| {
            let opts = ConsistencyOptions {
                sizes: vec![200],
                trials,
                seed: 5,
                ..Default::default()
            };
            empirical_consistency(&binary(), &opts).unwrap()[0].std_error
        };
        let ratio = run(160) / run(40);
        assert!((ratio - 0.5).abs() < 0.15, "{ratio}");
    }

    #[test]
    fn rejects_three_classes() {
        let c = |class| MixtureComponent {
            weight: 1.0,
            mean: class as f64,
            std: 1.0,
            class,
        };
        let m = Mixture1D::new(vec![c(0), c(1), c(2)], (-3.0, 5.0), 11).unwrap();
        assert!(empirical_consistency(&m, &ConsistencyOptions::default()).is_err());
    }
}
