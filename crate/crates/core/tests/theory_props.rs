use dial_core::dirichlet::trace_covariance;
use dial_core::linalg::DenseMatrix;
use dial_core::theory::{
    alignment_score, eval_eta, exploration_bound, exploration_constant, exploration_constant_expanded,
    population_uncertainty, trapezoid_weights, BoundParams, Mixture1D, MixtureComponent,
};
use proptest::prelude::*;

fn simplex(k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..1.0f64, k).prop_filter_map("positive mass", |w| {
        let s: f64 = w.iter().sum();
        (s > 1e-6).then(|| w.iter().map(|x| x / s).collect())
    })
}

fn component() -> impl Strategy<Value = MixtureComponent> {
    (0.1..1.0f64, -3.0..3.0f64, 0.3..1.5f64, 0..3usize).prop_map(|(weight, mean, std, class)| MixtureComponent {
        weight,
        mean,
        std,
        class,
    })
}

proptest! {
    #[test]
    fn constant_forms_agree(alpha0 in 0.01..10.0f64, eps in 0.0..5.0f64, zeta in 0.0..5.0f64, k in 1..20usize) {
        let a = exploration_constant(alpha0, eps, zeta, k).unwrap();
        let b = exploration_constant_expanded(alpha0, eps, zeta, k).unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0), "{a} vs {b}");
    }

    #[test]
    fn bound_is_probability_and_grows_with_lambda(alpha0 in 0.05..2.0f64, k in 2..8usize, lambda in 0.0..100.0f64, step in 0.0..50.0f64, w in 0.1..1.0f64) {
        let params = BoundParams { alpha0, epsilon: 0.0, zeta: 1.0, delta: 0.0, k, lambda, w_min: w / k as f64 };
        let lo = exploration_bound(&params).unwrap().probability;
        let hi = exploration_bound(&BoundParams { lambda: lambda + step, ..params }).unwrap().probability;
        prop_assert!((0.0..=1.0).contains(&lo));
        prop_assert!(hi >= lo - 1e-15);
    }

    #[test]
    fn variance_on_ray_is_uncertainty_over_beta_plus_one(eta in (2..6usize).prop_flat_map(simplex), beta in 0.01..1e4f64) {
        let alpha: Vec<f64> = eta.iter().map(|e| beta * e).collect();
        let want = population_uncertainty(&eta) / (beta + 1.0);
        prop_assert!((trace_covariance(&alpha) - want).abs() <= 1e-12 * want.max(1e-300) + 1e-300);
    }

    #[test]
    fn eta_rows_are_densities(comps in prop::collection::vec(component(), 1..5), grid in 3..200usize) {
        let mix = Mixture1D::new(comps, (-4.0, 4.0), grid).unwrap();
        let xs = mix.grid_points();
        let w = trapezoid_weights(&xs);
        prop_assert!((w.iter().sum::<f64>() - 8.0).abs() < 1e-12);
        for row in eval_eta(&mix, &xs).unwrap() {
            prop_assert_eq!(row.len(), mix.num_classes());
            prop_assert!(row.iter().all(|&p| (0.0..=1.0).contains(&p)));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn alignment_lies_in_unit_interval(n in 1..8usize, k in 1..4usize, seed in prop::collection::vec(0.0..1.0f64, 64 * 2)) {
        let mut p = DenseMatrix::zeros(n, k);
        let mut kern = DenseMatrix::zeros(n, n);
        for i in 0..n {
            let row: Vec<f64> = (0..k).map(|c| seed[(i * k + c) % seed.len()] + 1e-3).collect();
            let s: f64 = row.iter().sum();
            for c in 0..k {
                p[(i, c)] = row[c] / s;
            }
            for j in 0..n {
                kern[(i, j)] = 2.0 * seed[(64 + i * n + j) % seed.len()];
            }
        }
        for x in 0..n {
            let s = alignment_score(&p, &kern, x);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&s), "{s}");
        }
    }
}
