use rand::Rng;

use super::AcquisitionScores;
use crate::dirichlet::percentile_higher;
use crate::error::{Error, Result};
use crate::scalar::Real;

const LAMBDA_CAP: f64 = 1e6;
const TARGET_MASS: f64 = 0.75;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PolicyKind {
    #[default]
    MaxValue,
    Proportional,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaMode {
    Fixed(f64),
    /// Mass-target heuristic with the given `K̂`.
    Heuristic { k_hat: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyConfig {
    pub kind: PolicyKind,
    pub lambda: LambdaMode,
}

impl PolicyConfig {
    pub fn max_value() -> Self {
        Self {
            kind: PolicyKind::MaxValue,
            lambda: LambdaMode::Fixed(0.0),
        }
    }

    pub fn proportional(lambda: LambdaMode) -> Self {
        Self {
            kind: PolicyKind::Proportional,
            lambda,
        }
    }

    /// Picks one candidate; returns the node and the λ used (0 for max value).
    pub fn select<T: Real, R: Rng + ?Sized>(&self, scores: &AcquisitionScores<T>, rng: &mut R) -> Result<(usize, f64)> {
        match self.kind {
            PolicyKind::MaxValue => Ok((select_max(scores)?, 0.0)),
            PolicyKind::Proportional => {
                let lambda = match self.lambda {
                    LambdaMode::Fixed(l) if l >= 0.0 => l,
                    LambdaMode::Fixed(l) => return Err(Error::domain(format!("lambda = {l} must be nonnegative"))),
                    LambdaMode::Heuristic { k_hat } => {
                        let v: Vec<f64> = scores.values.iter().map(|s| s.to_f64_lossy()).collect();
                        lambda_heuristic(&v, k_hat)?
                    }
                };
                Ok((select_proportional(scores, lambda, rng)?, lambda))
            }
        }
    }
}

/// Maximizer over the pool, ties to the smallest node id.
pub fn select_max<T: Real>(scores: &AcquisitionScores<T>) -> Result<usize> {
    scores.check_finite()?;
    let mut best: Option<(T, usize)> = None;
    for (&x, &v) in scores.candidates.iter().zip(&scores.values) {
        best = match best {
            Some((bv, bx)) if bv > v || (bv == v && bx < x) => Some((bv, bx)),
            _ => Some((v, x)),
        };
    }
    best.map(|(_, x)| x).ok_or_else(|| Error::domain("empty candidate pool"))
}

/// Softmax probabilities `exp(λ a(x))` normalized over the pool.
pub fn softmax_probabilities(values: &[f64], lambda: f64) -> Vec<f64> {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = values.iter().map(|&v| (lambda * (v - max)).exp()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// Samples from `softmax(λ·scores)`.
pub fn select_proportional<T: Real, R: Rng + ?Sized>(
    scores: &AcquisitionScores<T>,
    lambda: f64,
    rng: &mut R,
) -> Result<usize> {
    scores.check_finite()?;
    if scores.is_empty() {
        return Err(Error::domain("empty candidate pool"));
    }
    if !(lambda >= 0.0) {
        return Err(Error::domain(format!("lambda = {lambda} must be nonnegative")));
    }
    let v: Vec<f64> = scores.values.iter().map(|s| s.to_f64_lossy()).collect();
    let p = softmax_probabilities(&v, lambda);
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, pi) in p.iter().enumerate() {
        acc += pi;
        if u < acc {
            return Ok(scores.candidates[i]);
        }
    }
    // Rounding left the cumulative sum just below 1.
    let last = p.iter().rposition(|&pi| pi > 0.0).expect("some positive mass");
    Ok(scores.candidates[last])
}

fn top_mass(values: &[f64], threshold: f64, lambda: f64) -> f64 {
    let p = softmax_probabilities(values, lambda);
    values.iter().zip(&p).filter(|(&v, _)| v >= threshold).map(|(_, &pi)| pi).sum()
}

/// λ such that candidates at or above the `100(K̂−1)/K̂` percentile carry
/// softmax mass 0.75; 0 for constant scores, capped at 10⁶.
pub fn lambda_heuristic(values: &[f64], k_hat: usize) -> Result<f64> {
    if k_hat < 2 {
        return Err(Error::domain(format!("K_hat = {k_hat} must be at least 2")));
    }
    if values.is_empty() {
        return Ok(0.0);
    }
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if !(max > min) {
        return Ok(0.0);
    }
    let threshold = percentile_higher(values, (k_hat - 1) as f64 / k_hat as f64);
    if top_mass(values, threshold, 0.0) >= TARGET_MASS {
        return Ok(0.0);
    }
    let mut hi = 1.0 / (max - min);
    while top_mass(values, threshold, hi) < TARGET_MASS {
        hi *= 2.0;
        if hi >= LAMBDA_CAP {
            return Ok(LAMBDA_CAP);
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if top_mass(values, threshold, mid) < TARGET_MASS {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}
