mod common;

use common::{operator, random_connected};
use dial_core::graph::{build_knn_graph, smallest_eigenpairs, Dataset, EigenMethod, EigenOptions, Metric};
use dial_core::linalg::symmetric_eigen;
use proptest::prelude::*;

fn points(max_n: usize) -> impl Strategy<Value = (usize, Vec<f64>)> {
    (8..max_n, 1..4usize).prop_flat_map(|(n, dim)| (Just(dim), prop::collection::vec(-5.0..5.0f64, n * dim)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn knn_build_is_deterministic_and_well_formed((dim, feats) in points(60), k in 1..6usize) {
        let data = Dataset::new("p", feats, dim, None, None).unwrap();
        let metric = Metric::Rbf { sigma: None };
        let a = build_knn_graph(&data, k, metric).unwrap();
        let b = build_knn_graph(&data, k, metric).unwrap();
        prop_assert_eq!(a.row_ptr(), b.row_ptr());
        prop_assert_eq!(a.col_idx(), b.col_idx());
        prop_assert_eq!(a.values(), b.values());
        prop_assert!(a.check_invariants().is_ok());
        for i in 0..a.n() {
            prop_assert_eq!(a.weight(i, i), 0.0);
            let mut row_sum = 0.0;
            for (j, w) in a.neighbors(i) {
                prop_assert!(w >= 0.0);
                prop_assert_eq!(w, a.weight(j, i));
                row_sum += w;
            }
            prop_assert!((row_sum - a.degrees()[i]).abs() <= 1e-12 * row_sum.max(1.0));
        }
    }

    #[test]
    fn sparse_matvec_matches_dense(n in 2..50usize, extra in 0..100usize, seed: u64, shift in 0.0..2.0f64) {
        let lap = operator(random_connected(n, extra, seed));
        let v: Vec<f64> = (0..n).map(|i| ((i as f64 + 1.0) * 0.37 + seed as f64 * 1e-3).sin()).collect();
        let mut sparse = vec![0.0; n];
        lap.apply_shifted(shift, &v, &mut sparse);
        let mut dense = vec![0.0; n];
        lap.to_dense_shifted(shift).matvec(&v, &mut dense);
        for (a, b) in sparse.iter().zip(&dense) {
            prop_assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn lanczos_eigenvalues_match_dense(n in 20..200usize, extra in 0..300usize, seed: u64) {
        let lap = operator(random_connected(n, extra, seed));
        let opts = EigenOptions { method: EigenMethod::Lanczos, ..Default::default() };
        let r = 6;
        let cache = smallest_eigenpairs(&lap, r, 1e-10, &opts).unwrap();
        let (dense_vals, _) = symmetric_eigen(&lap.to_dense_shifted(0.0)).unwrap();
        for (k, (a, b)) in cache.values.iter().zip(&dense_vals).enumerate() {
            prop_assert!((a - b).abs() <= 1e-8, "mode {k}: {a} vs {b}");
        }
        for (k, e) in cache.vectors.iter().enumerate() {
            let mut le = vec![0.0; n];
            lap.apply_shifted(0.0, e, &mut le);
            let res: f64 = le.iter().zip(e).map(|(l, x)| (l - cache.values[k] * x).powi(2)).sum::<f64>().sqrt();
            prop_assert!(res <= 1e-8, "mode {k} residual {res}");
        }
    }
}
