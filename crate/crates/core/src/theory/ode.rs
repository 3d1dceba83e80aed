use std::str::FromStr;

use super::{eval_eta, population_uncertainty, trapezoid_weights, Mixture1D};
use crate::dirichlet::trace_covariance;
use crate::error::{Error, Result};

/// Inverse temperature as a function of continuum time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaSchedule {
    Constant(f64),
    /// `λ₀ t^p`
    Power { lambda0: f64, p: f64 },
    /// `λ₀ t`
    Linear(f64),
}

impl LambdaSchedule {
    pub fn at(&self, t: f64) -> f64 {
        match *self {
            LambdaSchedule::Constant(l) => l,
            LambdaSchedule::Power { lambda0, p } => lambda0 * t.powf(p),
            LambdaSchedule::Linear(l) => l * t,
        }
    }
}

/// Parses `constant`, `constant:<λ>`, `power:<p>` and `linear:<λ₀>`.
impl FromStr for LambdaSchedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k, Some(a)),
            None => (s, None),
        };
        let num = |a: Option<&str>, default: Option<f64>| -> Result<f64> {
            match (a, default) {
                (Some(a), _) => a
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("bad schedule parameter '{a}'"))),
                (None, Some(d)) => Ok(d),
                (None, None) => Err(Error::Config(format!("schedule '{s}' needs a parameter"))),
            }
        };
        match kind {
            "constant" => Ok(LambdaSchedule::Constant(num(arg, Some(1.0))?)),
            "power" => Ok(LambdaSchedule::Power {
                lambda0: 1.0,
                p: num(arg, None)?,
            }),
            "linear" => Ok(LambdaSchedule::Linear(num(arg, None)?)),
            _ => Err(Error::Config(format!(
                "unknown schedule '{s}' (expected constant, power:p or linear:l0)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub steps_per_decade: usize,
    pub t_start: f64,
    /// Initial seeding `α(x, t_start) = ε₀ η(x)`.
    pub eps0: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            steps_per_decade: 400,
            t_start: 1e-6,
            eps0: 1e-6,
        }
    }
}

/// State of the continuum model at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub t: f64,
    pub lambda: f64,
    /// Pseudolabel densities, one row of length K per grid point.
    pub alpha: Vec<Vec<f64>>,
    /// Sampling density; integrates to one under the trapezoid rule.
    pub q: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub x: Vec<f64>,
    pub weights: Vec<f64>,
    pub eta: Vec<Vec<f64>>,
    pub g: Vec<f64>,
    /// One snapshot per decade of time plus the final state.
    pub snapshots: Vec<GridField>,
}

impl Trajectory {
    pub fn last(&self) -> &GridField {
        self.snapshots.last().expect("at least one snapshot")
    }
}

/// `exp(e)` normalized to a density under `weights`, computed stably.
pub(crate) fn normalized_exp(exponent: &[f64], weights: &[f64]) -> Option<Vec<f64>> {
    let top = exponent.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return None;
    }
    let f: Vec<f64> = exponent.iter().map(|e| (e - top).exp()).collect();
    let z: f64 = f.iter().zip(weights).map(|(f, w)| f * w).sum();
    let q: Vec<f64> = f.iter().map(|v| v / z).collect();
    q.iter().all(|v| v.is_finite()).then_some(q)
}

fn sampling_density(alpha: &[Vec<f64>], lambda: f64, weights: &[f64], t: f64) -> Result<Vec<f64>> {
    let exponent: Vec<f64> = alpha.iter().map(|a| lambda * trace_covariance(a)).collect();
    normalized_exp(&exponent, weights).ok_or_else(|| {
        Error::Integration(format!(
            "sampling density is not finite at t = {t:e}; increase steps per decade"
        ))
    })
}

/// Integrates `∂_t α(x,t) = q(x,t) η(x)` in log-time, with `q ∝ exp(λ(t) V(α))`.
///
/// Each step freezes `q` over `[t_n, t_{n+1}]` and advances `α` by the exact
/// integral `(t_{n+1} − t_n) q η`, so steady states `β = t q̄` carry no step bias.
pub fn evolve_alpha(
    mixture: &Mixture1D,
    schedule: LambdaSchedule,
    t_end: f64,
    opts: &OdeOptions,
) -> Result<Trajectory> {
    if !(t_end > opts.t_start) || !(opts.t_start > 0.0) || !(opts.eps0 > 0.0) {
        return Err(Error::domain("need 0 < t_start < t_end and eps0 > 0"));
    }
    if opts.steps_per_decade == 0 {
        return Err(Error::domain("steps_per_decade must be positive"));
    }
    let x = mixture.grid_points();
    let weights = trapezoid_weights(&x);
    let eta = eval_eta(mixture, &x)?;
    let g: Vec<f64> = eta.iter().map(|e| population_uncertainty(e)).collect();
    let mut alpha: Vec<Vec<f64>> = eta.iter().map(|e| e.iter().map(|v| opts.eps0 * v).collect()).collect();

    let (s0, s1) = (opts.t_start.log10(), t_end.log10());
    let steps = ((s1 - s0) * opts.steps_per_decade as f64).ceil().max(1.0) as usize;
    let ds = (s1 - s0) / steps as f64;
    let mut snapshots = Vec::new();
    let mut next_decade = s0.floor() + 1.0;
    for n in 0..steps {
        let s = s0 + ds * n as f64;
        let t = 10f64.powf(s);
        let lambda = schedule.at(t);
        let q = sampling_density(&alpha, lambda, &weights, t)?;
        if n == 0 || s >= next_decade - 1e-9 {
            while next_decade <= s + 1e-9 {
                next_decade += 1.0;
            }
            snapshots.push(GridField {
                t,
                lambda,
                alpha: alpha.clone(),
                q: q.clone(),
            });
        }
        let dt = 10f64.powf(s + ds) - t;
        for ((a, e), qi) in alpha.iter_mut().zip(&eta).zip(&q) {
            for (ak, ek) in a.iter_mut().zip(e) {
                *ak += dt * qi * ek;
            }
        }
    }
    let lambda = schedule.at(t_end);
    let q = sampling_density(&alpha, lambda, &weights, t_end)?;
    snapshots.push(GridField {
        t: t_end,
        lambda,
        alpha,
        q,
    });
    Ok(Trajectory {
        x,
        weights,
        eta,
        g,
        snapshots,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointOptions {
    pub gamma: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self {
            gamma: 0.1,
            tol: 1e-9,
            max_iter: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPoint {
    pub q: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

/// Solves `q̄ ∝ exp(λ₀ G / q̄)` by damped iteration from the uniform density.
pub fn fixed_point_qbar(lambda0: f64, g: &[f64], weights: &[f64], opts: &FixedPointOptions) -> Result<FixedPoint> {
    if !(lambda0 > 0.0) {
        return Err(Error::domain("lambda0 must be positive"));
    }
    let length: f64 = weights.iter().sum();
    let mut q = vec![1.0 / length; g.len()];
    let map = |q: &[f64]| -> Result<Vec<f64>> {
        let e: Vec<f64> = g.iter().zip(q).map(|(g, q)| lambda0 * g / q).collect();
        normalized_exp(&e, weights).ok_or_else(|| Error::Numerical("fixed-point map overflowed".into()))
    };
    let mut residual = f64::INFINITY;
    for it in 0..opts.max_iter {
        let f = map(&q)?;
        residual = q.iter().zip(&f).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if residual < opts.tol {
            return Ok(FixedPoint {
                q,
                residual,
                iterations: it,
            });
        }
        for (qi, fi) in q.iter_mut().zip(&f) {
            *qi = (1.0 - opts.gamma) * *qi + opts.gamma * fi;
        }
    }
    Err(Error::Convergence {
        what: "fixed-point q̄ iteration",
        iterations: opts.max_iter,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sup_dist(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    fn correlation(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    #[test]
    fn schedules_parse() {
        assert_eq!("constant".parse::<LambdaSchedule>().unwrap(), LambdaSchedule::Constant(1.0));
        assert_eq!(
            "power:0.5".parse::<LambdaSchedule>().unwrap(),
            LambdaSchedule::Power { lambda0: 1.0, p: 0.5 }
        );
        assert_eq!("linear:5".parse::<LambdaSchedule>().unwrap(), LambdaSchedule::Linear(5.0));
        assert!("linear".parse::<LambdaSchedule>().is_err());
        assert!("cubic:1".parse::<LambdaSchedule>().is_err());
        assert_eq!(LambdaSchedule::Linear(5.0).at(2.0), 10.0);
    }

    #[test]
    fn constant_lambda_tends_to_uniform() {
        let mix = Mixture1D::boundary_example();
        let traj = evolve_alpha(&mix, LambdaSchedule::Constant(1.0), 1e10, &OdeOptions::default()).unwrap();
        let (a, b) = mix.domain();
        let dev = traj.last().q.iter().map(|q| (q - 1.0 / (b - a)).abs()).fold(0.0, f64::max);
        assert!(dev < 1e-3, "{dev}");
    }

    #[test]
    fn linear_lambda_matches_fixed_point() {
        let mix = Mixture1D::boundary_example();
        let traj = evolve_alpha(&mix, LambdaSchedule::Linear(5.0), 1e10, &OdeOptions::default()).unwrap();
        let fp = fixed_point_qbar(5.0, &traj.g, &traj.weights, &FixedPointOptions::default()).unwrap();
        let q = &traj.last().q;
        assert!(sup_dist(q, &fp.q) < 1e-3, "{}", sup_dist(q, &fp.q));
        assert!(correlation(q, &traj.g) > 0.9, "{}", correlation(q, &traj.g));
    }

    #[test]
    fn snapshots_are_densities_on_rays() {
        let mix = Mixture1D::boundary_example();
        let opts = OdeOptions {
            steps_per_decade: 200,
            ..Default::default()
        };
        let traj = evolve_alpha(&mix, LambdaSchedule::Power { lambda0: 1.0, p: 0.5 }, 1e6, &opts).unwrap();
        assert!(traj.snapshots.len() >= 12);
        for snap in &traj.snapshots {
            let mass: f64 = snap.q.iter().zip(&traj.weights).map(|(q, w)| q * w).sum();
            assert!((mass - 1.0).abs() < 1e-10);
            assert!(snap.q.iter().all(|&q| q >= 0.0));
            for (a, e) in snap.alpha.iter().zip(&traj.eta) {
                let beta: f64 = a.iter().sum();
                for (ak, ek) in a.iter().zip(e) {
                    assert!((ak / beta - ek).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn variance_on_ray_is_g_over_beta_plus_one() {
        let mix = Mixture1D::boundary_example();
        let x = mix.grid_points();
        let eta = eval_eta(&mix, &x).unwrap();
        for (i, a) in [(7usize, 0.3), (150, 2.0), (200, 17.5), (333, 1e3)] {
            let alpha: Vec<f64> = eta[i].iter().map(|e| a * e).collect();
            let lhs = trace_covariance(&alpha);
            let rhs = population_uncertainty(&eta[i]) / (a + 1.0);
            assert!((lhs - rhs).abs() < 1e-12, "{lhs} {rhs}");
        }
    }

    #[test]
    fn symmetric_mixture_gives_symmetric_q() {
        let mix = Mixture1D::symmetric_pair();
        let traj = evolve_alpha(&mix, LambdaSchedule::Linear(5.0), 1e8, &OdeOptions::default()).unwrap();
        let q = &traj.last().q;
        let m = q.len();
        for i in 0..m {
            assert!((q[i] - q[m - 1 - i]).abs() < 1e-6);
        }
    }

    #[test]
    fn fixed_point_limits() {
        let w = trapezoid_weights(&(0..51).map(|i| i as f64 / 50.0).collect::<Vec<_>>());
        let flat = fixed_point_qbar(3.0, &[0.25; 51], &w, &FixedPointOptions::default()).unwrap();
        assert!(flat.q.iter().all(|q| (q - 1.0).abs() < 1e-9));
        let g: Vec<f64> = (0..51).map(|i| 0.5 * (std::f64::consts::PI * i as f64 / 50.0).sin()).collect();
        let small = fixed_point_qbar(1e-6, &g, &w, &FixedPointOptions::default()).unwrap();
        assert!(small.q.iter().all(|q| (q - 1.0).abs() < 1e-5));
        let strong = fixed_point_qbar(5.0, &g, &w, &FixedPointOptions::default()).unwrap();
        assert!(strong.residual < 1e-9);
        assert!(strong.q[25] > strong.q[0]);
    }

    #[test]
    fn fixed_point_reports_nonconvergence() {
        let w = trapezoid_weights(&[0.0, 0.5, 1.0]);
        let opts = FixedPointOptions {
            max_iter: 3,
            ..Default::default()
        };
        match fixed_point_qbar(5.0, &[0.0, 0.5, 0.0], &w, &opts) {
            Err(Error::Convergence { iterations, residual, .. }) => {
                assert_eq!(iterations, 3);
                assert!(residual > 0.0);
            }
            other => panic!("{other:?}"),
        }
    }
}
