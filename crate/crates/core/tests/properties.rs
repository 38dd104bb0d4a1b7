use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use wiener_core::bla::{estimate_weighting, fit_bla, BlaEstimate};
use wiener_core::indirect::{
    beta_jacobian_gaussian, beta_jacobian_uniform, beta_map_gaussian, beta_map_uniform, solve_monotone_cubic, step2, BetaMap,
    Weighting,
};
use wiener_core::numerics::{log_sum_exp, OptimizerSettings};
use wiener_core::pem::{predict, prediction_variance};
use wiener_core::signals::gen_white;
use wiener_core::system::{linear_output, simulate_record};
use wiener_core::{DataRecord, Distribution, FirStructure, Seed, SystemSpec};

fn exact_bla(beta: &DVector<f64>) -> BlaEstimate {
    BlaEstimate {
        lags: vec![0, 1],
        beta_hat: beta.clone(),
        residuals: DVector::zeros(1000),
        n_obs: 1000,
        sandwich: None,
    }
}

fn pd_matrix(a: f64, b: f64, c: f64) -> DMatrix<f64> {
    // LLᵀ with a positive diagonal.
    let l = DMatrix::from_row_slice(2, 2, &[a, 0.0, b, c]);
    &l * l.transpose()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn white_noise_is_reproducible(seed in any::<u64>(), n in 1usize..500, var in 0.0f64..5.0, uniform in any::<bool>()) {
        let dist = if uniform { Distribution::uniform(var) } else { Distribution::gaussian(var) };
        let a = gen_white(&dist, n, Seed(seed)).unwrap();
        let b = gen_white(&dist, n, Seed(seed)).unwrap();
        prop_assert_eq!(a.len(), n);
        prop_assert_eq!(&a, &b);
        if uniform {
            let h = (3.0 * var).sqrt();
            prop_assert!(a.iter().all(|x| x.abs() <= h));
        }
    }

    #[test]
    fn record_csv_round_trip(seed in any::<u64>(), n in 2usize..200) {
        let spec = SystemSpec::cubic_example(0.5, 0.2, 0.1, Distribution::gaussian(1.0 / 3.0));
        let (rec, _) = simulate_record(&spec, n, Seed(seed)).unwrap();
        let mut buf = Vec::new();
        rec.write_csv(&mut buf).unwrap();
        let back = DataRecord::read_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back, rec);
    }

    #[test]
    fn linear_block_is_linear(theta in -3.0f64..3.0, k in -4.0f64..4.0, seed in any::<u64>()) {
        let fir = FirStructure::first_order_example();
        let u = gen_white(&Distribution::gaussian(1.0), 51, Seed(seed)).unwrap();
        let scaled: Vec<f64> = u.iter().map(|x| k * x).collect();
        let a = linear_output(&fir, &[theta], &u, 1).unwrap();
        let b = linear_output(&fir, &[theta], &scaled, 1).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((k * x - y).abs() <= 1e-12 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn predictor_expansion(theta in -3.0f64..3.0, u in -3.0f64..3.0, u1 in -3.0f64..3.0, s2 in 0.0f64..2.0, e2 in 0.0f64..1.0) {
        let a = theta * u + u1;
        let expanded = theta.powi(3) * u.powi(3) + 3.0 * theta * theta * u * u * u1 + 3.0 * theta * u * u1 * u1 + u1.powi(3) + 3.0 * s2 * a;
        prop_assert!((predict(theta, u, u1, s2) - expanded).abs() <= 1e-9 * (1.0 + expanded.abs()));
        prop_assert!(prediction_variance(theta, u, u1, s2, e2) >= e2);
    }

    #[test]
    fn gaussian_map_shape(theta in -3.0f64..3.0, su2 in 0.01f64..2.0, sv2 in 0.0f64..2.0) {
        let (b1, b2) = beta_map_gaussian(theta, su2, sv2);
        prop_assert!((b1 / b2 - theta).abs() <= 1e-12 * (1.0 + theta.abs()));
        prop_assert_eq!(b2, beta_map_gaussian(-theta, su2, sv2).1);
        prop_assert_eq!(beta_map_uniform(theta, su2, sv2).1, beta_map_uniform(-theta, su2, sv2).1);
    }

    #[test]
    fn analytic_jacobians(theta in -3.0f64..3.0, su2 in 0.01f64..2.0, sv2 in 0.0f64..2.0) {
        let h = 1e-5;
        for (map, jac) in [
            (beta_map_gaussian as fn(f64, f64, f64) -> (f64, f64), beta_jacobian_gaussian as fn(f64, f64, f64) -> (f64, f64)),
            (beta_map_uniform, beta_jacobian_uniform),
        ] {
            let (p1, p2) = map(theta + h, su2, sv2);
            let (m1, m2) = map(theta - h, su2, sv2);
            let (d1, d2) = jac(theta, su2, sv2);
            prop_assert!(((p1 - m1) / (2.0 * h) - d1).abs() <= 1e-6 * (1.0 + d1.abs()));
            prop_assert!(((p2 - m2) / (2.0 * h) - d2).abs() <= 1e-6 * (1.0 + d2.abs()));
        }
    }

    #[test]
    fn step2_inverts_the_map(theta in -2.9f64..2.9, a in 0.1f64..3.0, b in -2.0f64..2.0, c in 0.1f64..3.0, uniform in any::<bool>()) {
        let map = if uniform {
            BetaMap::AnalyticUniform { sigma_u2: 1.0 / 3.0, sigma_v2: 0.2 }
        } else {
            BetaMap::AnalyticGaussian { sigma_u2: 1.0 / 3.0, sigma_v2: 0.2 }
        };
        let beta = map.evaluate(&[theta]).unwrap();
        let r = step2(&exact_bla(&beta), &Weighting::Custom(pd_matrix(a, b, c)), &map, &OptimizerSettings::default()).unwrap();
        prop_assert!((r.theta_hat[0] - theta).abs() < 1e-6, "{} vs {}", r.theta_hat[0], theta);
        prop_assert!(r.predicted_cov[(0, 0)] >= 0.0);
    }

    #[test]
    fn step2_weight_scale_invariance(b1 in 0.0f64..3.0, b2 in 1.0f64..3.0, k in 0.01f64..100.0) {
        let map = BetaMap::AnalyticGaussian { sigma_u2: 1.0 / 3.0, sigma_v2: 0.2 };
        let bla = exact_bla(&DVector::from_vec(vec![b1, b2]));
        let w = pd_matrix(1.0, 0.3, 0.8);
        let s = OptimizerSettings::default();
        let x = step2(&bla, &Weighting::Custom(w.clone()), &map, &s).unwrap();
        let y = step2(&bla, &Weighting::Custom(w * k), &map, &s).unwrap();
        prop_assert!((x.theta_hat[0] - y.theta_hat[0]).abs() < 1e-6);
    }

    #[test]
    fn monotone_cubic_back_substitution(c3 in 0.0f64..5.0, c1 in 0.01f64..5.0, target in -100.0f64..100.0) {
        let (x, _) = solve_monotone_cubic(c3, c1, target).unwrap();
        prop_assert!((c3 * x.powi(3) + c1 * x - target).abs() <= 1e-10 * (1.0 + target.abs()));
    }

    #[test]
    fn log_sum_exp_shift(xs in proptest::collection::vec(-700.0f64..700.0, 1..50), c in -500.0f64..500.0) {
        let a = log_sum_exp(xs.iter().copied());
        let b = log_sum_exp(xs.iter().map(|x| x + c));
        prop_assert!((a + c - b).abs() <= 1e-10 * (1.0 + b.abs()));
        prop_assert!(a >= xs.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    }

    #[test]
    fn sandwich_weighting_is_normalized(seed in any::<u64>()) {
        let spec = SystemSpec::cubic_example(0.5, 0.2, 0.1, Distribution::gaussian(1.0 / 3.0));
        let (data, _) = simulate_record(&spec, 300, Seed(seed)).unwrap();
        let est = estimate_weighting(&data, &fit_bla(&data, &[0, 1]).unwrap()).unwrap();
        let s = est.sandwich.unwrap();
        let prod = &s.w * &s.cov_beta * 300.0;
        prop_assert!((prod - DMatrix::<f64>::identity(2, 2)).amax() < 1e-8);
        prop_assert!(s.w.clone().cholesky().is_some());
    }

    #[test]
    fn realization_seeds_are_distinct(master in any::<u64>(), r in 0u64..1_000_000) {
        prop_assert_ne!(Seed(master).for_realization(r), Seed(master).for_realization(r + 1));
    }
}
