use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dirichlet::trace_covariance;
use crate::error::{Error, Result};

/// Parameters of the K-step discovery bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundParams {
    pub alpha0: f64,
    pub epsilon: f64,
    pub zeta: f64,
    pub delta: f64,
    pub k: usize,
    pub lambda: f64,
    pub w_min: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExplorationBound {
    pub c: f64,
    /// Lower bound on the probability of sampling all K classes in K steps.
    pub probability: f64,
}

fn check_constant_args(alpha0: f64, epsilon: f64, zeta: f64, k: usize) -> Result<()> {
    if !(alpha0 > 0.0) {
        return Err(Error::domain("alpha0 must be positive"));
    }
    if !(epsilon >= 0.0) || !(zeta >= 0.0) || k < 1 {
        return Err(Error::domain("need epsilon ≥ 0, zeta ≥ 0 and K ≥ 1"));
    }
    Ok(())
}

/// `C(α₀, ε, ζ, K) = (1 + 4(α₀+1)/(K(α₀+ε))) · (K−1)(α₀+ε)⁴ / ((K+1)α₀²(α₀+ζ/K)²)`.
pub fn exploration_constant(alpha0: f64, epsilon: f64, zeta: f64, k: usize) -> Result<f64> {
    check_constant_args(alpha0, epsilon, zeta, k)?;
    let kf = k as f64;
    let ae = alpha0 + epsilon;
    let first = 1.0 + 4.0 * (alpha0 + 1.0) / (kf * ae);
    let second = (kf - 1.0) * ae.powi(4) / ((kf + 1.0) * alpha0 * alpha0 * (alpha0 + zeta / kf).powi(2));
    Ok(first * second)
}

/// Same constant as a single rational expression.
pub fn exploration_constant_expanded(alpha0: f64, epsilon: f64, zeta: f64, k: usize) -> Result<f64> {
    check_constant_args(alpha0, epsilon, zeta, k)?;
    let kf = k as f64;
    let ae = alpha0 + epsilon;
    let num = kf * (kf - 1.0) * ae * ae * ae * (kf * ae + 4.0 * alpha0 + 4.0);
    let den = (kf + 1.0) * alpha0 * alpha0 * (kf * alpha0 + zeta) * (kf * alpha0 + zeta);
    Ok(num / den)
}

/// Evaluates the constant and the full probability bound. A negative
/// per-step bracket is clamped to zero before taking the K-th power.
pub fn exploration_bound(p: &BoundParams) -> Result<ExplorationBound> {
    let c = exploration_constant(p.alpha0, p.epsilon, p.zeta, p.k)?;
    if !(0.0..1.0).contains(&p.delta) || !(p.w_min > 0.0 && p.w_min <= 1.0) || !(p.lambda >= 0.0) {
        return Err(Error::domain("need 0 ≤ delta < 1, 0 < w_min ≤ 1 and lambda ≥ 0"));
    }
    let (k, a0, ae) = (p.k as f64, p.alpha0, p.alpha0 + p.epsilon);
    let kept = (1.0 - p.delta) * p.w_min;
    let background = if p.delta == 0.0 {
        0.0
    } else {
        p.delta / kept * (p.lambda * (k + 1.0) * (2.0 * a0 + 1.0) / (k * a0 * a0 * (k * a0 + 1.0))).exp()
    };
    let a_unl = k * (k + 1.0) * a0 * a0 / (k * k * ae * ae * (k * ae + 1.0));
    let labeled = (1.0 - kept) / kept * (p.lambda * (c - 1.0) * a_unl).exp();
    let bracket = (1.0 - background - labeled).max(0.0);
    Ok(ExplorationBound {
        c,
        probability: bracket.powi(p.k as i32),
    })
}

/// The perfect-separator special case `(1 − w_min⁻¹ exp(−λ(K+1)/(2K(Kα₀+1))))^K`
/// at `α₀ = 1/K²`, clamped at zero like the full bound.
pub fn simplified_bound(k: usize, lambda: f64, w_min: f64) -> f64 {
    let kf = k as f64;
    let a0 = 1.0 / (kf * kf);
    let inner = 1.0 - (-lambda * (kf + 1.0) / (2.0 * kf * (kf * a0 + 1.0))).exp() / w_min;
    inner.max(0.0).powi(k as i32)
}

/// Worst-case discretization of a separator kernel for simulated discovery runs.
///
/// Each of the K clusters holds `points_per_cluster` equal point masses, the
/// first `round(δ·m)` of which are background points with kernel value 1 to
/// everything. Retained points see ζ within their cluster and ε across; every
/// point sees 1 at itself. Cluster `k` carries class `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscoveryParams {
    pub delta: f64,
    pub zeta: f64,
    pub epsilon: f64,
    pub alpha0: f64,
    pub lambda: f64,
    /// Cluster weights; their count is K.
    pub weights: Vec<f64>,
    pub points_per_cluster: usize,
    pub trials: usize,
    pub seed: u64,
}

impl DiscoveryParams {
    pub fn equal_weights(k: usize, alpha0: f64, lambda: f64, trials: usize, seed: u64) -> Self {
        Self {
            delta: 0.0,
            zeta: 1.0,
            epsilon: 0.0,
            alpha0,
            lambda,
            weights: vec![1.0 / k as f64; k],
            points_per_cluster: 200,
            trials,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscoveryResult {
    pub successes: usize,
    pub trials: usize,
    pub frequency: f64,
    /// Binomial standard error of `frequency`.
    pub std_error: f64,
}

/// Runs K proportional-sampling steps per trial (draws with replacement from
/// the point masses) and counts trials that labeled every class.
pub fn monte_carlo_discovery(p: &DiscoveryParams) -> Result<DiscoveryResult> {
    let k = p.weights.len();
    if k == 0 || p.points_per_cluster == 0 || p.trials == 0 {
        return Err(Error::domain("need at least one cluster, point and trial"));
    }
    if !(p.alpha0 > 0.0) || !(0.0..1.0).contains(&p.delta) || p.weights.iter().any(|w| !(*w > 0.0)) {
        return Err(Error::domain("need alpha0 > 0, 0 ≤ delta < 1 and positive weights"));
    }
    let total: f64 = p.weights.iter().sum();
    let m = p.points_per_cluster;
    let background = ((p.delta * m as f64).round() as usize).min(m - 1);
    let masses: Vec<f64> = p.weights.iter().map(|w| w / total / m as f64).collect();

    let kernel = |(sc, si): (usize, usize), (pc, pi): (usize, usize)| -> f64 {
        if sc == pc && si == pi {
            1.0
        } else if si < background || pi < background {
            1.0
        } else if sc == pc {
            p.zeta
        } else {
            p.epsilon
        }
    };

    let successes: usize = (0..p.trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
            rng.set_stream(trial as u64);
            let mut labeled: Vec<(usize, usize)> = Vec::with_capacity(k);
            let mut score = vec![0.0; k * m];
            let mut alpha = vec![0.0; k];
            for _ in 0..k {
                for c in 0..k {
                    for i in 0..m {
                        alpha.iter_mut().for_each(|a| *a = p.alpha0);
                        for &s in &labeled {
                            alpha[s.0] += kernel(s, (c, i));
                        }
                        score[c * m + i] = p.lambda * trace_covariance(&alpha);
                    }
                }
                let top = score.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mut cum = 0.0;
                for (j, s) in score.iter_mut().enumerate() {
                    cum += masses[j / m] * (*s - top).exp();
                    *s = cum;
                }
                let u = rng.random::<f64>() * cum;
                let j = score.partition_point(|&c| c <= u).min(k * m - 1);
                labeled.push((j / m, j % m));
            }
            let mut seen = vec![false; k];
            labeled.iter().for_each(|s| seen[s.0] = true);
            usize::from(seen.iter().all(|&s| s))
        })
        .sum();
    let frequency = successes as f64 / p.trials as f64;
    Ok(DiscoveryResult {
        successes,
        trials: p.trials,
        frequency,
        std_error: (frequency * (1.0 - frequency) / p.trials as f64).sqrt(),
    })
}
