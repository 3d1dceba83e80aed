use statrs::function::gamma::ln_gamma;

use crate::linalg::DenseMatrix;

/// `s(P, 𝒦ₓ) = Σ_y P_y(x) Π_z P_y(z)^{𝒦(x,z)}` with `0⁰ = 1`.
///
/// `p` is n×K row-stochastic, `kernel` is n×n with row `x` holding `𝒦(x, ·)`.
pub fn alignment_score(p: &DenseMatrix<f64>, kernel: &DenseMatrix<f64>, x: usize) -> f64 {
    let kx = kernel.row(x);
    (0..p.cols())
        .map(|y| {
            let mut log_prod = 0.0;
            for (z, &kv) in kx.iter().enumerate() {
                if kv == 0.0 {
                    continue;
                }
                let pz = p[(z, y)];
                if pz <= 0.0 {
                    return 0.0;
                }
                log_prod += kv * pz.ln();
            }
            p[(x, y)] * log_prod.exp()
        })
        .sum()
}

/// `w(x) = Π_z Γ(α₀ + 𝒦(x,z)) / Γ(Kα₀ + 𝒦(x,z))`, accumulated in log space.
/// Requires `α₀ > 0`.
pub fn centrality_weight(kernel: &DenseMatrix<f64>, alpha0: f64, num_classes: usize, x: usize) -> f64 {
    let ka0 = num_classes as f64 * alpha0;
    kernel
        .row(x)
        .iter()
        .map(|&kv| ln_gamma(alpha0 + kv) - ln_gamma(ka0 + kv))
        .sum::<f64>()
        .exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    // Two clusters {0,1,2} and {3,4,5}; the misaligned split is {0,1,3} / {2,4,5}.
    fn block_kernel() -> DenseMatrix<f64> {
        let mut k = DenseMatrix::zeros(6, 6);
        for i in 0..6 {
            for j in 0..6 {
                if i / 3 == j / 3 {
                    k[(i, j)] = 1.0;
                }
            }
        }
        k
    }

    fn indicator(rows: &[usize]) -> DenseMatrix<f64> {
        DenseMatrix::from_rows(&rows.iter().map(|&c| if c == 0 { vec![1.0, 0.0] } else { vec![0.0, 1.0] }).collect::<Vec<_>>())
    }

    #[test]
    fn aligned_and_misaligned_examples() {
        let k = block_kernel();
        let aligned = indicator(&[0, 0, 0, 1, 1, 1]);
        let split = indicator(&[0, 0, 1, 0, 1, 1]);
        for x in 0..6 {
            assert_eq!(alignment_score(&aligned, &k, x), 1.0);
            assert_eq!(alignment_score(&split, &k, x), 0.0);
        }
    }

    #[test]
    fn zero_kernel_gives_one() {
        let p = DenseMatrix::from_rows(&[vec![0.2, 0.8], vec![0.6, 0.4]]);
        let k = DenseMatrix::zeros(2, 2);
        assert!((alignment_score(&p, &k, 0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn centrality_matches_gamma_ratios() {
        let mut k = DenseMatrix::zeros(3, 3);
        for i in 0..3 {
            k[(i, i)] = 1.0;
        }
        k[(0, 1)] = 0.8;
        k[(0, 2)] = 0.8;
        let (w0, w1) = (centrality_weight(&k, 0.5, 2, 0), centrality_weight(&k, 0.5, 2, 1));
        let g = statrs::function::gamma::gamma;
        assert!((w0 - g(1.5) / g(2.0) * (g(1.3) / g(1.8)).powi(2)).abs() < 1e-12);
        // Row 1 has a single unit entry and two zeros: Γ(1.5)/Γ(2) · (Γ(.5)/Γ(1))².
        let want = (ln_gamma(1.5) - ln_gamma(2.0) + 2.0 * ln_gamma(0.5)).exp();
        assert!((w1 - want).abs() < 1e-12);
    }

    #[test]
    fn centrality_underflow_saturates() {
        let k = DenseMatrix::from_rows(&[vec![0.0; 5000]]);
        assert_eq!(centrality_weight(&k, 5.0, 10, 0), 0.0);
    }
}
