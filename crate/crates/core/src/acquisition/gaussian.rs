use rayon::prelude::*;

use super::AcquisitionScores;
use crate::error::{Error, Result};
use crate::graph::{LaplacianOperator, SpectralCache};
use crate::linalg::DenseMatrix;
use crate::scalar::{dot, Real};

/// Gaussian-field covariance used by VOpt and ΣOpt.
///
/// Dense form keeps `C = (L + τI)⁻¹`; low-rank form keeps
/// `C = V S Vᵀ` with `S = diag(1/(λ_k + τ))` and the rows of `U = V S`
/// so that one candidate costs O(r).
#[derive(Debug, Clone)]
pub enum GaussianFieldCovariance<T> {
    Dense {
        c: DenseMatrix<T>,
        sigma2: T,
    },
    LowRank {
        /// n×r eigenvector rows `v_x`.
        v: DenseMatrix<T>,
        s: DenseMatrix<T>,
        /// n×r rows `S v_x`.
        u: DenseMatrix<T>,
        /// `Vᵀ 1`.
        col_sums: Vec<T>,
        sigma2: T,
    },
}

impl<T: Real> GaussianFieldCovariance<T> {
    pub fn dense(lap: &LaplacianOperator<T>, tau: T, sigma2: T) -> Result<Self> {
        check_params(tau, sigma2)?;
        Ok(Self::Dense {
            c: lap.to_dense_shifted(tau).spd_inverse()?,
            sigma2,
        })
    }

    pub fn low_rank(cache: &SpectralCache<T>, tau: T, sigma2: T) -> Result<Self> {
        check_params(tau, sigma2)?;
        let r = cache.rank();
        if r == 0 {
            return Err(Error::domain("low-rank covariance needs at least one eigenpair"));
        }
        let n = cache.vectors[0].len();
        let mut v = DenseMatrix::zeros(n, r);
        for (k, e) in cache.vectors.iter().enumerate() {
            for (x, &ex) in e.iter().enumerate() {
                v[(x, k)] = ex;
            }
        }
        let mut s = DenseMatrix::zeros(r, r);
        for (k, &lambda) in cache.values.iter().enumerate() {
            s[(k, k)] = (lambda.max(T::zero()) + tau).recip();
        }
        let mut u = DenseMatrix::zeros(n, r);
        for x in 0..n {
            for k in 0..r {
                u[(x, k)] = s[(k, k)] * v[(x, k)];
            }
        }
        let col_sums = (0..r).map(|k| (0..n).map(|x| v[(x, k)]).sum()).collect();
        Ok(Self::LowRank {
            v,
            s,
            u,
            col_sums,
            sigma2,
        })
    }

    pub fn n(&self) -> usize {
        match self {
            Self::Dense { c, .. } => c.rows(),
            Self::LowRank { v, .. } => v.rows(),
        }
    }

    pub fn sigma2(&self) -> T {
        match self {
            Self::Dense { sigma2, .. } | Self::LowRank { sigma2, .. } => *sigma2,
        }
    }

    /// `C_{xx}`.
    pub fn variance(&self, x: usize) -> T {
        match self {
            Self::Dense { c, .. } => c[(x, x)],
            Self::LowRank { v, u, .. } => dot(v.row(x), u.row(x)),
        }
    }

    /// Full covariance, for testing against dense oracles.
    pub fn to_dense(&self) -> DenseMatrix<T> {
        match self {
            Self::Dense { c, .. } => c.clone(),
            Self::LowRank { v, u, .. } => {
                let n = v.rows();
                let mut out = DenseMatrix::zeros(n, n);
                for i in 0..n {
                    for j in 0..n {
                        out[(i, j)] = dot(v.row(i), u.row(j));
                    }
                }
                out
            }
        }
    }

    /// Conditions on a noisy observation at `x`:
    /// `C ← C − C_{:x} C_{x:} / (C_{xx} + σ²)`.
    pub fn condition_on(&mut self, x: usize) -> Result<()> {
        match self {
            Self::Dense { c, sigma2 } => {
                let col: Vec<T> = c.row(x).to_vec();
                let d = col[x] + *sigma2;
                if !(d > T::zero()) {
                    return Err(Error::Numerical(format!("covariance diagonal {} at node {x}", col[x])));
                }
                let n = c.rows();
                for i in 0..n {
                    let f = col[i] / d;
                    if f != T::zero() {
                        for (cij, &cj) in c.row_mut(i).iter_mut().zip(&col) {
                            *cij -= f * cj;
                        }
                    }
                }
            }
            Self::LowRank { v, s, u, sigma2, .. } => {
                let ux: Vec<T> = u.row(x).to_vec();
                let d = dot(v.row(x), &ux) + *sigma2;
                if !(d > T::zero()) {
                    return Err(Error::Numerical(format!("covariance diagonal at node {x} is negative")));
                }
                let r = ux.len();
                for a in 0..r {
                    for b in 0..r {
                        s[(a, b)] -= ux[a] * ux[b] / d;
                    }
                }
                for y in 0..v.rows() {
                    let f = dot(v.row(y), &ux) / d;
                    for (uy, &uxk) in u.row_mut(y).iter_mut().zip(&ux) {
                        *uy -= f * uxk;
                    }
                }
            }
        }
        Ok(())
    }

    fn scores(&self, pool: &[usize], name: &'static str, sigma_opt: bool) -> Result<AcquisitionScores<T>> {
        let sigma2 = self.sigma2();
        let values: Vec<T> = match self {
            Self::Dense { c, .. } => pool
                .par_iter()
                .map(|&x| {
                    let col = c.row(x);
                    let num = if sigma_opt {
                        let s: T = col.iter().copied().sum();
                        s * s
                    } else {
                        dot(col, col)
                    };
                    (num, col[x])
                })
                .map(|(num, cxx)| check_diag(cxx).map(|_| num / (cxx + sigma2)))
                .collect::<Result<_>>()?,
            Self::LowRank { v, u, col_sums, .. } => pool
                .par_iter()
                .map(|&x| {
                    let ux = u.row(x);
                    let cxx = dot(v.row(x), ux);
                    // V has orthonormal columns, so ‖V u‖² = ‖u‖².
                    let num = if sigma_opt {
                        let s = dot(col_sums, ux);
                        s * s
                    } else {
                        dot(ux, ux)
                    };
                    check_diag(cxx).map(|_| num / (cxx + sigma2))
                })
                .collect::<Result<_>>()?,
        };
        let per = match self {
            Self::Dense { c, .. } => c.rows(),
            Self::LowRank { v, .. } => v.cols(),
        };
        Ok(AcquisitionScores {
            name,
            candidates: pool.to_vec(),
            values,
            work: pool.len() * per,
        })
    }

    /// `Σ_j C_{jx}² / (C_{xx} + σ²)`.
    pub fn vopt_scores(&self, pool: &[usize]) -> Result<AcquisitionScores<T>> {
        self.scores(pool, "vopt", false)
    }

    /// `(Σ_j C_{jx})² / (C_{xx} + σ²)`.
    pub fn sigmaopt_scores(&self, pool: &[usize]) -> Result<AcquisitionScores<T>> {
        self.scores(pool, "sigmaopt", true)
    }
}

fn check_params<T: Real>(tau: T, sigma2: T) -> Result<()> {
    if !(tau > T::zero()) {
        return Err(Error::domain(format!("tau = {tau} must be positive")));
    }
    if !(sigma2 >= T::zero()) {
        return Err(Error::domain(format!("observation noise {sigma2} must be nonnegative")));
    }
    Ok(())
}

fn check_diag<T: Real>(cxx: T) -> Result<()> {
    if cxx < T::zero() {
        Err(Error::Numerical(format!("negative covariance diagonal {cxx}")))
    } else {
        Ok(())
    }
}
