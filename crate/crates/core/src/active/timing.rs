use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use crate::acquisition::{
    dir_var_scores, laplace_learning, smallest_margin_scores, AcquisitionName, AcquisitionScores,
    GaussianFieldCovariance,
};
use crate::dirichlet::DirichletField;
use crate::error::Result;
use crate::graph::{build_knn_graph, grid_blobs, smallest_eigenpairs, EigenOptions, LaplacianOperator, Metric};
use crate::propagation::{CgOptions, PropagationCache};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingOptions {
    pub repetitions: usize,
    /// Passes are repeated until a batch lasts at least this long.
    pub min_batch_seconds: f64,
    pub knn: usize,
    pub rank: usize,
    pub tau: f64,
    pub sigma2: f64,
    pub seed: u64,
}

impl Default for TimingOptions {
    fn default() -> Self {
        Self {
            repetitions: 7,
            min_batch_seconds: 2e-2,
            knn: 10,
            rank: 50,
            tau: 0.1,
            sigma2: 0.01,
            seed: 0,
        }
    }
}

/// Median time of one full pool scoring pass.
#[derive(Debug, Clone, PartialEq)]
pub struct TimingRow {
    pub n: usize,
    pub acquisition: AcquisitionName,
    pub seconds: f64,
    pub candidates: usize,
    /// Model scalars read per pass.
    pub work: usize,
}

impl TimingRow {
    pub fn work_per_candidate(&self) -> f64 {
        self.work as f64 / self.candidates.max(1) as f64
    }
}

fn time_pass(opts: &TimingOptions, mut pass: impl FnMut() -> Result<AcquisitionScores<f64>>) -> Result<(f64, usize, usize)> {
    let first = pass()?;
    let (work, candidates) = (first.work, first.len());
    let mut samples = Vec::with_capacity(opts.repetitions);
    for _ in 0..opts.repetitions.max(1) {
        let start = Instant::now();
        let mut count = 0usize;
        loop {
            std::hint::black_box(pass()?);
            count += 1;
            if start.elapsed().as_secs_f64() >= opts.min_batch_seconds {
                break;
            }
        }
        samples.push(start.elapsed().as_secs_f64() / count as f64);
    }
    samples.sort_by(f64::total_cmp);
    Ok((samples[samples.len() / 2], work, candidates))
}

/// Times one scoring pass per (size, acquisition) on 10-blob synthetic graphs
/// with one labeled node per blob.
pub fn timing_benchmark(
    sizes: &[usize],
    acquisitions: &[AcquisitionName],
    opts: &TimingOptions,
) -> Result<Vec<TimingRow>> {
    let mut rows = Vec::new();
    let cg = CgOptions::default();
    for &n in sizes {
        let data = grid_blobs::<f64>(10, 6.0, 1.0, n, opts.seed)?;
        let graph = build_knn_graph(&data, opts.knn.min(n - 1), Metric::Rbf { sigma: None })?;
        let lap = LaplacianOperator::new(Arc::new(graph));
        let clusters = data.cluster_ids().expect("generated");
        let mut labeled = Vec::new();
        for c in 0..10 {
            if let Some(x) = (0..n).find(|&x| clusters[x] == c) {
                labeled.push((x, c % 3));
            }
        }
        let pool: Vec<usize> = (0..n).filter(|x| !labeled.iter().any(|(l, _)| l == x)).collect();
        for &acq in acquisitions {
            let (seconds, work, candidates) = match acq {
                AcquisitionName::DirVar | AcquisitionName::DirVarProp => {
                    let mut field = DirichletField::new(n, 3, 0.1)?;
                    let mut cache = PropagationCache::new();
                    let sources: Vec<usize> = labeled.iter().map(|p| p.0).collect();
                    cache.ensure_poisson(&lap, opts.tau, &sources, &cg)?;
                    for &(x, c) in &labeled {
                        field.add_label(cache.get(x).expect("computed"), c)?;
                    }
                    time_pass(opts, || dir_var_scores(&field, &pool))?
                }
                AcquisitionName::UncSm => time_pass(opts, || {
                    let out = laplace_learning(&lap, &labeled, 3, &cg)?;
                    Ok(smallest_margin_scores(&out.scores, 3, &pool))
                })?,
                AcquisitionName::Random => time_pass(opts, || {
                    Ok(AcquisitionScores {
                        name: "random",
                        candidates: pool.clone(),
                        values: vec![0.0; pool.len()],
                        work: 0,
                    })
                })?,
                _ => {
                    let mut cov = if acq.is_low_rank() {
                        let cache = smallest_eigenpairs(&lap, opts.rank.min(n), 1e-8, &EigenOptions::default())?;
                        GaussianFieldCovariance::low_rank(&cache, opts.tau, opts.sigma2)?
                    } else {
                        GaussianFieldCovariance::dense(&lap, opts.tau, opts.sigma2)?
                    };
                    for &(x, _) in &labeled {
                        cov.condition_on(x)?;
                    }
                    let sigma = matches!(acq, AcquisitionName::SigmaOpt | AcquisitionName::SigmaOptLowRank);
                    time_pass(opts, || {
                        if sigma {
                            cov.sigmaopt_scores(&pool)
                        } else {
                            cov.vopt_scores(&pool)
                        }
                    })?
                }
            };
            rows.push(TimingRow {
                n,
                acquisition: acq,
                seconds,
                candidates,
                work,
            });
        }
    }
    Ok(rows)
}

/// Least-squares slope of `ln t` against `ln n`.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let m = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

pub fn write_timing<W: Write>(rows: &[TimingRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "n,acquisition,seconds,work")?;
    for r in rows {
        writeln!(out, "{},{},{},{}", r.n, r.acquisition, r.seconds, r.work)?;
    }
    Ok(())
}
