//! Prediction-error minimization with the conditional-mean predictor.
//!
//! For `z = a + v`, `v ~ N(0, σ_v²)`, the predictor is `ŷ = E{f(a + v)}` and
//! the prediction-error variance is `Var{f(a + v)} + σ_e²`. The weighted cost
//! divides each squared error by that variance, evaluated once at the
//! unweighted estimate and then held fixed.

use crate::error::{Error, Result};
use crate::numerics::{gauss_hermite_shared, try_minimize_scalar, OptimizerSettings};
use crate::report::{EstimateReport, Method, OptimizerDiagnostics};
use crate::system::{linear_output, DataRecord, Nonlinearity, SystemSpec};

/// Quadrature order for non-closed-form predictor moments.
const MOMENT_QUAD_ORDER: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictorMoments {
    /// `ŷ = E{f(a + v)}`
    pub mean: f64,
    /// `E{ε²} = Var{f(a + v)} + σ_e²`
    pub variance: f64,
    /// `E{f'(a + v)} = dŷ/da`
    pub slope: f64,
}

/// Predictor moments for linear-block output `a`.
pub fn conditional_moments(nl: &Nonlinearity, a: f64, sigma_v2: f64, sigma_e2: f64) -> Result<PredictorMoments> {
    let s2 = sigma_v2;
    Ok(match nl {
        Nonlinearity::Cubic => {
            let a2 = a * a;
            PredictorMoments {
                mean: a * a2 + 3.0 * a * s2,
                variance: 9.0 * s2 * a2 * a2 + 36.0 * s2 * s2 * a2 + 15.0 * s2 * s2 * s2 + sigma_e2,
                slope: 3.0 * (a2 + s2),
            }
        }
        Nonlinearity::Identity => PredictorMoments {
            mean: a,
            variance: s2 + sigma_e2,
            slope: 1.0,
        },
        f @ Nonlinearity::Polynomial(_) => {
            let rule = gauss_hermite_shared(MOMENT_QUAD_ORDER)?;
            let sd = s2.sqrt();
            let mean = rule.expect_std_normal(|x| f.value(a + sd * x));
            let var = rule.expect_std_normal(|x| (f.value(a + sd * x) - mean).powi(2));
            let slope = rule.expect_std_normal(|x| f.derivative(a + sd * x));
            PredictorMoments {
                mean,
                variance: var.max(0.0) + sigma_e2,
                slope,
            }
        }
    })
}

/// `ŷ(t, θ)` for the cubic example with `a = θ u(t) + u(t-1)`.
pub fn predict(theta: f64, u_t: f64, u_tm1: f64, sigma_v2: f64) -> f64 {
    let a = theta * u_t + u_tm1;
    a * a * a + 3.0 * a * sigma_v2
}

/// `E{ε²(t, θ)}` for the cubic example.
pub fn prediction_variance(theta: f64, u_t: f64, u_tm1: f64, sigma_v2: f64, sigma_e2: f64) -> f64 {
    let a = theta * u_t + u_tm1;
    let a2 = a * a;
    let s2 = sigma_v2;
    9.0 * s2 * a2 * a2 + 36.0 * s2 * s2 * a2 + 15.0 * s2 * s2 * s2 + sigma_e2
}

fn moments_at(theta: f64, data: &DataRecord, spec: &SystemSpec) -> Result<Vec<PredictorMoments>> {
    let lin = linear_output(&spec.fir, &[theta], data.u(), data.history())?;
    lin.iter()
        .map(|&a| conditional_moments(&spec.nonlinearity, a, spec.sigma_v2, spec.sigma_e2))
        .collect()
}

/// `(1/N) Σ ε²(t, θ) / w(t)`, with unit weights when `weights` is `None`.
pub fn pem_cost(theta: f64, data: &DataRecord, spec: &SystemSpec, weights: Option<&[f64]>) -> Result<f64> {
    let lin = linear_output(&spec.fir, &[theta], data.u(), data.history())?;
    let n = data.n();
    if let Some(w) = weights {
        if w.len() != n {
            return Err(Error::LengthMismatch {
                what: "PEM weights",
                expected: n,
                got: w.len(),
            });
        }
    }
    let mut total = 0.0;
    for (t, (&a, &y)) in lin.iter().zip(data.y()).enumerate() {
        let yhat = match spec.nonlinearity {
            Nonlinearity::Cubic => a * a * a + 3.0 * a * spec.sigma_v2,
            _ => conditional_moments(&spec.nonlinearity, a, spec.sigma_v2, spec.sigma_e2)?.mean,
        };
        let eps = y - yhat;
        total += match weights {
            Some(w) => eps * eps / w[t],
            None => eps * eps,
        };
    }
    Ok(total / n as f64)
}

/// Prediction-error estimate; with `weighted`, a second search under variance
/// weights frozen at the unweighted estimate.
pub fn pem_estimate(
    data: &DataRecord,
    spec_template: &SystemSpec,
    weighted: bool,
    settings: &OptimizerSettings,
) -> Result<EstimateReport> {
    spec_template.validate()?;
    spec_template.scalar_theta()?;
    let free_lag = spec_template.fir.free_lags[0];
    let regressor = data.lagged_input(free_lag)?;

    let initial = try_minimize_scalar(|th| pem_cost(th, data, spec_template, None), settings)?;
    let (minimum, weights) = if weighted {
        let w: Vec<f64> = moments_at(initial.argmin, data, spec_template)?
            .iter()
            .map(|m| m.variance)
            .collect();
        if w.iter().any(|&x| !(x > 0.0)) {
            return Err(Error::InvalidArgument(
                "prediction variance vanished; weighted PEM needs σ_e² > 0 or σ_v² > 0".into(),
            ));
        }
        let m = try_minimize_scalar(|th| pem_cost(th, data, spec_template, Some(&w)), settings)?;
        (m, Some(w))
    } else {
        (initial, None)
    };

    // Asymptotic variance from the predictor gradient ψ = dŷ/dθ:
    // weighted (optimal) 1/Σψ²/w, unweighted Σψ²λ/(Σψ²)².
    let moments = moments_at(minimum.argmin, data, spec_template)?;
    let mut info = 0.0;
    let mut meat = 0.0;
    for (t, m) in moments.iter().enumerate() {
        let psi = m.slope * regressor[t];
        match &weights {
            Some(w) => info += psi * psi / w[t],
            None => {
                info += psi * psi;
                meat += psi * psi * m.variance;
            }
        }
    }
    let var = match weights {
        Some(_) => 1.0 / info,
        None => meat / (info * info),
    };

    Ok(EstimateReport {
        method: if weighted { Method::PemW } else { Method::Pem },
        theta_hat: vec![minimum.argmin],
        diagnostics: OptimizerDiagnostics::from(minimum),
        predicted_std: var.is_finite().then(|| vec![var.sqrt()]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::{Distribution, Seed};
    use crate::system::simulate_record;

    #[test]
    fn predictor_examples() {
        assert_eq!(predict(0.5, 1.0, 1.0, 0.0), 1.5f64.powi(3));
        assert!((predict(0.5, 1.0, 1.0, 0.2) - 4.275).abs() < 1e-12);
        assert_eq!(predict(0.5, 2.0, -1.0, 0.7), 0.0);
    }

    #[test]
    fn variance_examples() {
        assert!((prediction_variance(0.5, 0.0, 0.0, 0.2, 0.1) - 0.22).abs() < 1e-12);
        assert_eq!(prediction_variance(0.3, 1.2, -0.4, 0.0, 0.1), 0.1);
        assert!((prediction_variance(0.5, 1.0, 1.0, 0.2, 0.1) - 12.5725).abs() < 1e-10);
    }

    #[test]
    fn expanded_predictor_form() {
        // θ³u³ + 3θ²u²u₁ + 3θu u₁² + u₁³ + 3σ²(θu + u₁)
        let (th, u, u1, s2): (f64, f64, f64, f64) = (0.7, -1.3, 0.4, 0.25);
        let expanded = th.powi(3) * u.powi(3)
            + 3.0 * th * th * u * u * u1
            + 3.0 * th * u * u1 * u1
            + u1.powi(3)
            + 3.0 * s2 * (th * u + u1);
        assert!((predict(th, u, u1, s2) - expanded).abs() < 1e-12);
    }

    #[test]
    fn polynomial_fallback_matches_closed_form() {
        let poly = Nonlinearity::Polynomial(vec![0.0, 0.0, 0.0, 1.0]);
        for a in [-1.7, 0.0, 0.4, 2.2] {
            let c = conditional_moments(&Nonlinearity::Cubic, a, 0.2, 0.1).unwrap();
            let p = conditional_moments(&poly, a, 0.2, 0.1).unwrap();
            assert!((c.mean - p.mean).abs() < 1e-10);
            assert!((c.variance - p.variance).abs() < 1e-9 * c.variance);
            assert!((c.slope - p.slope).abs() < 1e-10);
        }
    }

    #[test]
    fn variance_floor() {
        for a in [-2.0, -0.1, 0.0, 0.5, 3.0] {
            let m = conditional_moments(&Nonlinearity::Cubic, a, 0.2, 0.1).unwrap();
            assert!(m.variance > 0.1);
            let m = conditional_moments(&Nonlinearity::Cubic, a, 0.0, 0.1).unwrap();
            assert_eq!(m.variance, 0.1);
        }
    }

    #[test]
    fn noise_free_data_gives_truth() {
        let truth = SystemSpec::cubic_example(0.5, 0.0, 0.0, Distribution::gaussian(1.0 / 3.0));
        let (data, _) = simulate_record(&truth, 300, Seed(8)).unwrap();
        let mut template = truth.clone();
        template.sigma_e2 = 0.1;
        let s = OptimizerSettings::default();
        for weighted in [false, true] {
            let r = pem_estimate(&data, &template, weighted, &s).unwrap();
            assert!((r.scalar() - 0.5).abs() <= 1e-6, "{weighted}: {}", r.scalar());
        }
    }

    #[test]
    fn constant_weights_reduce_to_unweighted() {
        let truth = SystemSpec::cubic_example(0.5, 0.0, 0.1, Distribution::gaussian(1.0 / 3.0));
        let (data, _) = simulate_record(&truth, 500, Seed(9)).unwrap();
        let s = OptimizerSettings::default();
        let a = pem_estimate(&data, &truth, false, &s).unwrap();
        let b = pem_estimate(&data, &truth, true, &s).unwrap();
        assert!((a.scalar() - b.scalar()).abs() < 1e-8);
    }

    #[test]
    fn noisy_estimate_is_close() {
        let truth = SystemSpec::cubic_example(0.5, 0.2, 0.1, Distribution::gaussian(1.0 / 3.0));
        let (data, _) = simulate_record(&truth, 1000, Seed(10)).unwrap();
        let r = pem_estimate(&data, &truth, true, &OptimizerSettings::default()).unwrap();
        let sd = r.predicted_std.as_ref().unwrap()[0];
        assert!(sd > 0.01 && sd < 0.1, "{sd}");
        assert!((r.scalar() - 0.5).abs() < 5.0 * sd);
        assert_eq!(r.method, Method::PemW);
    }
}
