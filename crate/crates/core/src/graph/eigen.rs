use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::LaplacianOperator;
use crate::error::{Error, Result};
use crate::linalg::{symmetric_eigen, tridiagonal_eigen};
use crate::scalar::{axpy, dot, norm2, Real};

/// The `r` smallest eigenpairs of a Laplacian, eigenvalues ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralCache<T> {
    pub values: Vec<T>,
    /// Unit-norm eigenvectors, one `Vec` of length n per eigenvalue.
    pub vectors: Vec<Vec<T>>,
}

impl<T: Real> SpectralCache<T> {
    pub fn rank(&self) -> usize {
        self.values.len()
    }

    /// Truncates to the first `r` modes.
    pub fn truncated(&self, r: usize) -> Self {
        Self {
            values: self.values[..r.min(self.rank())].to_vec(),
            vectors: self.vectors[..r.min(self.rank())].to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EigenMethod {
    /// Dense for small problems, Lanczos otherwise with a dense retry when
    /// n ≤ 2000.
    #[default]
    Auto,
    Dense,
    Lanczos,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EigenOptions {
    pub method: EigenMethod,
    /// Cap on the Krylov dimension of a single Lanczos pass.
    pub max_krylov: usize,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            method: EigenMethod::Auto,
            max_krylov: 600,
            seed: 0x5eed,
        }
    }
}

const DENSE_FALLBACK_MAX_N: usize = 2000;
const DENSE_DIRECT_MAX_N: usize = 200;

/// Computes the `r` smallest eigenpairs of `L` with residuals `‖Le − λe‖ ≤ tol`.
pub fn smallest_eigenpairs<T: Real>(
    lap: &LaplacianOperator<T>,
    r: usize,
    tol: T,
    opts: &EigenOptions,
) -> Result<SpectralCache<T>> {
    let n = lap.n();
    if r > n {
        return Err(Error::domain(format!("requested {r} eigenpairs of a {n}-node graph")));
    }
    if r == 0 {
        return Ok(SpectralCache {
            values: Vec::new(),
            vectors: Vec::new(),
        });
    }
    let mut cache = match opts.method {
        EigenMethod::Dense => dense(lap, r, tol)?,
        EigenMethod::Lanczos => lanczos(lap, r, tol, opts)?,
        EigenMethod::Auto => {
            if n <= DENSE_DIRECT_MAX_N || 3 * r >= n {
                dense(lap, r, tol)?
            } else {
                match lanczos(lap, r, tol, opts) {
                    Err(Error::Convergence { .. }) if n <= DENSE_FALLBACK_MAX_N => dense(lap, r, tol)?,
                    other => other?,
                }
            }
        }
    };
    for v in &mut cache.vectors {
        fix_sign(v);
    }
    Ok(cache)
}

fn residual<T: Real>(lap: &LaplacianOperator<T>, lambda: T, v: &[T], scratch: &mut [T]) -> T {
    lap.apply_shifted(-lambda, v, scratch);
    norm2(scratch)
}

fn fix_sign<T: Real>(v: &mut [T]) {
    let mut best = T::zero();
    let mut sign = T::one();
    for &x in v.iter() {
        if x.abs() > best * T::of(1.0 + 1e-9) {
            best = x.abs();
            sign = x.signum();
        }
    }
    if sign < T::zero() {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

fn dense<T: Real>(lap: &LaplacianOperator<T>, r: usize, tol: T) -> Result<SpectralCache<T>> {
    let n = lap.n();
    let (vals, vecs) = symmetric_eigen(&lap.to_dense_shifted(T::zero()))?;
    let mut scratch = vec![T::zero(); n];
    let mut out = SpectralCache {
        values: Vec::with_capacity(r),
        vectors: Vec::with_capacity(r),
    };
    for k in 0..r {
        let v: Vec<T> = (0..n).map(|i| vecs[(i, k)]).collect();
        let res = residual(lap, vals[k], &v, &mut scratch);
        if res > tol {
            return Err(Error::Convergence {
                what: "dense symmetric eigensolver",
                iterations: 1,
                residual: res.to_f64_lossy(),
            });
        }
        out.values.push(vals[k]);
        out.vectors.push(v);
    }
    Ok(out)
}

struct Pass<T> {
    pairs: Vec<(T, Vec<T>)>,
    best_residual: T,
}

fn project_out<T: Real>(basis: &[Vec<T>], w: &mut [T]) {
    for v in basis {
        let c = dot(v, w);
        axpy(-c, v, w);
    }
}

// One Lanczos run restricted to the orthogonal complement of `locked`.
// Returns the converged prefix of the `want` smallest Ritz pairs.
fn lanczos_pass<T: Real>(
    lap: &LaplacianOperator<T>,
    locked: &[Vec<T>],
    want: usize,
    tol: T,
    max_dim: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Pass<T>> {
    let n = lap.n();
    let m_max = max_dim.min(n - locked.len());
    let mut q: Vec<T> = (0..n).map(|_| T::of(rng.sample::<f64, _>(StandardNormal))).collect();
    project_out(locked, &mut q);
    project_out(locked, &mut q);
    let qn = norm2(&q);
    if qn == T::zero() || m_max == 0 {
        return Ok(Pass {
            pairs: Vec::new(),
            best_residual: T::infinity(),
        });
    }
    q.iter_mut().for_each(|x| *x /= qn);

    let mut basis: Vec<Vec<T>> = vec![q];
    let mut alphas: Vec<T> = Vec::new();
    let mut betas: Vec<T> = Vec::new();
    let mut w = vec![T::zero(); n];
    let mut scratch = vec![T::zero(); n];
    let mut next_check = m_max.min((2 * want).max(10));
    let mut best_residual = T::infinity();
    let half = T::of(0.5);

    for j in 0..m_max {
        lap.apply_shifted(T::zero(), &basis[j], &mut w);
        let a = dot(&basis[j], &w);
        axpy(-a, &basis[j], &mut w);
        if j > 0 {
            axpy(-betas[j - 1], &basis[j - 1], &mut w);
        }
        for _ in 0..2 {
            project_out(locked, &mut w);
            project_out(&basis, &mut w);
        }
        let b = norm2(&w);
        alphas.push(a);
        let m = j + 1;
        let scale = alphas.iter().chain(&betas).fold(T::zero(), |s, &x| s.max(x.abs()));
        let invariant = b <= T::of(1e-10) * scale.max(T::one());

        if m == next_check || invariant || m == m_max {
            let (theta, s) = tridiagonal_eigen(&alphas, &betas)?;
            let count = want.min(m);
            let estimates_ok = (0..count).all(|i| (b * s[(m - 1, i)]).abs() <= tol * half);
            if estimates_ok || invariant || m == m_max {
                let mut pairs = Vec::with_capacity(count);
                for i in 0..count {
                    let mut y = vec![T::zero(); n];
                    for (k, qk) in basis.iter().enumerate() {
                        axpy(s[(k, i)], qk, &mut y);
                    }
                    let yn = norm2(&y);
                    y.iter_mut().for_each(|x| *x /= yn);
                    let res = residual(lap, theta[i], &y, &mut scratch);
                    best_residual = best_residual.min(res);
                    if res > tol {
                        break;
                    }
                    pairs.push((theta[i], y));
                }
                if pairs.len() == count || invariant || m == m_max {
                    return Ok(Pass {
                        pairs,
                        best_residual,
                    });
                }
            }
            next_check = m_max.min((m + 5).max((m as f64 * 1.3).ceil() as usize));
        }
        if invariant {
            break;
        }
        betas.push(b);
        let next: Vec<T> = w.iter().map(|&x| x / b).collect();
        basis.push(next);
    }
    Ok(Pass {
        pairs: Vec::new(),
        best_residual,
    })
}

fn lanczos<T: Real>(
    lap: &LaplacianOperator<T>,
    r: usize,
    tol: T,
    opts: &EigenOptions,
) -> Result<SpectralCache<T>> {
    let n = lap.n();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let max_dim = opts.max_krylov.max(4 * r + 40);
    let mut vals: Vec<T> = Vec::new();
    let mut vecs: Vec<Vec<T>> = Vec::new();
    let mut stalls = 0;
    let mut passes = 0;
    while vals.len() < r {
        passes += 1;
        let pass = lanczos_pass(lap, &vecs, r - vals.len(), tol, max_dim, &mut rng)?;
        if pass.pairs.is_empty() {
            stalls += 1;
            if stalls >= 3 {
                return Err(Error::Convergence {
                    what: "lanczos",
                    iterations: passes,
                    residual: pass.best_residual.to_f64_lossy(),
                });
            }
            continue;
        }
        for (v, y) in pass.pairs {
            vals.push(v);
            vecs.push(y);
        }
    }
    // A single Krylov sequence sees one direction per eigenspace; look for
    // eigenvalues hidden behind the locked set.
    for _ in 0..(r + 8) {
        if vecs.len() >= n {
            break;
        }
        let pass = lanczos_pass(lap, &vecs, 1, tol, max_dim, &mut rng)?;
        let Some((v, y)) = pass.pairs.into_iter().next() else {
            break;
        };
        let (imax, &vmax) = vals
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .expect("nonempty");
        if v < vmax - tol {
            vals[imax] = v;
            vecs[imax] = y;
        } else {
            break;
        }
    }
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap());
    Ok(SpectralCache {
        values: order.iter().map(|&i| vals[i]).collect(),
        vectors: order.iter().map(|&i| vecs[i].clone()).collect(),
    })
}
