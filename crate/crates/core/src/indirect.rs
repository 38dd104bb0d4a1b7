//! Step 2 of indirect inference: match the structured model to a fitted BLA.
//!
//! The binding function `β(θ)` is either the closed form for the first-order
//! cubic example (gaussian or uniform input, joint expectation over input and
//! process noise) or a simulated least-squares fit on the observed input with
//! `S` process-noise realizations held fixed across θ.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bla::{check_weighting, estimate_weighting, fit_bla, regressor_matrix, BlaEstimate};
use crate::error::{Error, Result};
use crate::numerics::{jacobian_fd, least_squares, spd_inverse, symmetrize, try_minimize_scalar, OptimizerSettings};
use crate::report::{EstimateReport, Method, OptimizerDiagnostics};
use crate::signals::{gen_white, Distribution, DistributionKind, Seed, StreamRole};
use crate::system::{linear_output, DataRecord, SystemSpec};

/// `β(θ)` for gaussian input: `[3σ_u²θ² + 3(σ_u² + σ_v²)] · (θ, 1)`.
pub fn beta_map_gaussian(theta: f64, sigma_u2: f64, sigma_v2: f64) -> (f64, f64) {
    let gain = 3.0 * sigma_u2 * theta * theta + 3.0 * (sigma_u2 + sigma_v2);
    (gain * theta, gain)
}

/// `dβ/dθ` for gaussian input.
pub fn beta_jacobian_gaussian(theta: f64, sigma_u2: f64, sigma_v2: f64) -> (f64, f64) {
    (
        9.0 * sigma_u2 * theta * theta + 3.0 * (sigma_u2 + sigma_v2),
        6.0 * sigma_u2 * theta,
    )
}

/// `β(θ)` for uniform input:
/// `β₁ = (9/5)σ_u²θ³ + 3(σ_u² + σ_v²)θ`, `β₂ = 3σ_u²θ² + 3((3/5)σ_u² + σ_v²)`.
pub fn beta_map_uniform(theta: f64, sigma_u2: f64, sigma_v2: f64) -> (f64, f64) {
    (
        1.8 * sigma_u2 * theta.powi(3) + 3.0 * (sigma_u2 + sigma_v2) * theta,
        3.0 * sigma_u2 * theta * theta + 3.0 * (0.6 * sigma_u2 + sigma_v2),
    )
}

/// `dβ/dθ` for uniform input.
pub fn beta_jacobian_uniform(theta: f64, sigma_u2: f64, sigma_v2: f64) -> (f64, f64) {
    (
        5.4 * sigma_u2 * theta * theta + 3.0 * (sigma_u2 + sigma_v2),
        6.0 * sigma_u2 * theta,
    )
}

/// Simulated binding function on a fixed input with common random numbers.
///
/// Measurement noise is not simulated. Because every realization shares the
/// regressors, the least-squares fit on the `S` stacked blocks equals the fit
/// on their averaged targets, which is what is computed.
#[derive(Debug, Clone)]
pub struct SimulatedMap {
    spec: SystemSpec,
    u: Vec<f64>,
    history: usize,
    lags: Vec<usize>,
    phi: DMatrix<f64>,
    noise: Vec<Vec<f64>>,
    seed: Seed,
}

impl SimulatedMap {
    /// `u` carries `history` pre-sample values ahead of the `N` samples.
    pub fn new(u: &[f64], history: usize, spec_template: &SystemSpec, s: usize, seed: Seed, lags: &[usize]) -> Result<Self> {
        spec_template.validate()?;
        if s == 0 {
            return Err(Error::InvalidArgument("S must be at least 1".into()));
        }
        if u.len() <= history {
            return Err(Error::InvalidArgument("input has no samples after the history".into()));
        }
        let n = u.len() - history;
        let record = DataRecord::new(u.to_vec(), vec![0.0; n], history)?;
        let phi = regressor_matrix(&record, lags)?;
        let noise_dist = Distribution::gaussian(spec_template.sigma_v2);
        let noise = (0..s)
            .map(|k| {
                let role = StreamRole::Simulation(u32::try_from(k).expect("S fits in u32"));
                gen_white(&noise_dist, n, seed.stream(role))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SimulatedMap {
            spec: spec_template.clone(),
            u: u.to_vec(),
            history,
            lags: lags.to_vec(),
            phi,
            noise,
            seed,
        })
    }

    pub fn realizations(&self) -> usize {
        self.noise.len()
    }

    pub fn seed(&self) -> Seed {
        self.seed
    }

    pub fn lags(&self) -> &[usize] {
        &self.lags
    }

    /// `β̂_{N,S}(θ)`.
    pub fn evaluate(&self, theta: &[f64]) -> Result<DVector<f64>> {
        let a = linear_output(&self.spec.fir, theta, &self.u, self.history)?;
        let mut target = DVector::zeros(a.len());
        for v in &self.noise {
            for (t, (&at, &vt)) in a.iter().zip(v).enumerate() {
                target[t] += self.spec.nonlinearity.value(at + vt);
            }
        }
        target /= self.noise.len() as f64;
        Ok(least_squares(&self.phi, &target)?.coefficients)
    }
}

/// `β̂_{N,S}(θ)` built from scratch; see [`SimulatedMap`].
pub fn beta_map_simulated(
    theta: &[f64],
    u: &[f64],
    history: usize,
    spec_template: &SystemSpec,
    s: usize,
    seed: Seed,
    lags: &[usize],
) -> Result<DVector<f64>> {
    SimulatedMap::new(u, history, spec_template, s, seed, lags)?.evaluate(theta)
}

/// Binding function used in Step 2.
#[derive(Debug, Clone)]
pub enum BetaMap {
    AnalyticGaussian { sigma_u2: f64, sigma_v2: f64 },
    AnalyticUniform { sigma_u2: f64, sigma_v2: f64 },
    Simulated(Box<SimulatedMap>),
}

impl BetaMap {
    /// Closed-form map for the cubic first-order example under `kind` input.
    pub fn analytic(spec_template: &SystemSpec, kind: DistributionKind) -> Result<Self> {
        if !spec_template.is_cubic_example() {
            return Err(Error::Unsupported(
                "closed-form binding functions exist only for θu(t) + u(t-1) followed by a cubic; use the simulated map".into(),
            ));
        }
        let sigma_u2 = spec_template.input_dist.variance;
        let sigma_v2 = spec_template.sigma_v2;
        Ok(match kind {
            DistributionKind::GaussianWhite => BetaMap::AnalyticGaussian { sigma_u2, sigma_v2 },
            DistributionKind::UniformWhite => BetaMap::AnalyticUniform { sigma_u2, sigma_v2 },
        })
    }

    /// `(m, n)`
    pub fn dims(&self) -> (usize, usize) {
        match self {
            BetaMap::AnalyticGaussian { .. } | BetaMap::AnalyticUniform { .. } => (2, 1),
            BetaMap::Simulated(map) => (map.lags.len(), map.spec.fir.n_free()),
        }
    }

    /// Variance factor relative to an exact binding function.
    pub fn inflation(&self) -> f64 {
        match self {
            BetaMap::Simulated(map) => 1.0 + 1.0 / map.realizations() as f64,
            _ => 1.0,
        }
    }

    pub fn evaluate(&self, theta: &[f64]) -> Result<DVector<f64>> {
        match *self {
            BetaMap::AnalyticGaussian { sigma_u2, sigma_v2 } => {
                let (b1, b2) = beta_map_gaussian(scalar(theta)?, sigma_u2, sigma_v2);
                Ok(DVector::from_vec(vec![b1, b2]))
            }
            BetaMap::AnalyticUniform { sigma_u2, sigma_v2 } => {
                let (b1, b2) = beta_map_uniform(scalar(theta)?, sigma_u2, sigma_v2);
                Ok(DVector::from_vec(vec![b1, b2]))
            }
            BetaMap::Simulated(ref map) => map.evaluate(theta),
        }
    }

    /// `G = dβ/dθ`, analytic where available and central differences otherwise.
    pub fn jacobian(&self, theta: &[f64]) -> Result<DMatrix<f64>> {
        match *self {
            BetaMap::AnalyticGaussian { sigma_u2, sigma_v2 } => {
                let (d1, d2) = beta_jacobian_gaussian(scalar(theta)?, sigma_u2, sigma_v2);
                Ok(DMatrix::from_column_slice(2, 1, &[d1, d2]))
            }
            BetaMap::AnalyticUniform { sigma_u2, sigma_v2 } => {
                let (d1, d2) = beta_jacobian_uniform(scalar(theta)?, sigma_u2, sigma_v2);
                Ok(DMatrix::from_column_slice(2, 1, &[d1, d2]))
            }
            BetaMap::Simulated(ref map) => {
                let point = DVector::from_column_slice(theta);
                jacobian_fd(|p: &DVector<f64>| map.evaluate(p.as_slice()), &point, 1e-5)
            }
        }
    }
}

fn scalar(theta: &[f64]) -> Result<f64> {
    match theta {
        [t] => Ok(*t),
        _ => Err(Error::LengthMismatch {
            what: "θ",
            expected: 1,
            got: theta.len(),
        }),
    }
}

/// Step-2 weighting matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum Weighting {
    Identity,
    /// The optimal `W` from the BLA sandwich.
    Sandwich,
    Custom(DMatrix<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WeightingKind {
    Identity,
    Sandwich,
    Custom,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndirectReport {
    pub theta_hat: Vec<f64>,
    /// Jacobian of the binding function at `theta_hat`.
    pub g: DMatrix<f64>,
    /// Predicted covariance of `theta_hat` (not scaled by `N`).
    pub predicted_cov: DMatrix<f64>,
    pub inflation: f64,
    pub weighting_used: WeightingKind,
    pub diagnostics: OptimizerDiagnostics,
}

impl IndirectReport {
    pub fn predicted_std(&self) -> Vec<f64> {
        self.predicted_cov.diagonal().iter().map(|v| v.max(0.0).sqrt()).collect()
    }

    pub fn to_estimate(&self, method: Method) -> EstimateReport {
        EstimateReport {
            method,
            theta_hat: self.theta_hat.clone(),
            diagnostics: self.diagnostics,
            predicted_std: Some(self.predicted_std()),
        }
    }
}

/// Minimizes `[β(θ) - β̂]ᵀ W [β(θ) - β̂]` over the optimizer bracket.
///
/// The predicted covariance is the sandwich
/// `inflation · (GᵀWG)⁻¹ GᵀW Cov(β̂) WG (GᵀWG)⁻¹`, which reduces to
/// `inflation · [GᵀWG]⁻¹ / N` for the optimal `W = [N Cov(β̂)]⁻¹`. Without a
/// BLA sandwich the reduced form is used for any `W`.
pub fn step2(bla: &BlaEstimate, weighting: &Weighting, map: &BetaMap, settings: &OptimizerSettings) -> Result<IndirectReport> {
    let (m, n) = map.dims();
    if bla.order() != m {
        return Err(Error::LengthMismatch {
            what: "BLA order vs binding function",
            expected: m,
            got: bla.order(),
        });
    }
    if m < n {
        return Err(Error::InvalidArgument(format!("{m} BLA coefficients cannot identify {n} parameters")));
    }
    if n != 1 {
        return Err(Error::Unsupported("Step 2 searches a scalar θ only".into()));
    }
    let (w, kind) = match weighting {
        Weighting::Identity => (DMatrix::identity(m, m), WeightingKind::Identity),
        Weighting::Sandwich => {
            let s = bla
                .sandwich
                .as_ref()
                .ok_or_else(|| Error::InvalidArgument("sandwich weighting requested before estimate_weighting".into()))?;
            (s.w.clone(), WeightingKind::Sandwich)
        }
        Weighting::Custom(w) => (w.clone(), WeightingKind::Custom),
    };
    check_weighting(&w, m)?;

    let beta_hat = &bla.beta_hat;
    let cost = |th: f64| -> Result<f64> {
        let r = map.evaluate(&[th])? - beta_hat;
        Ok((r.transpose() * &w * &r)[(0, 0)])
    };
    let minimum = try_minimize_scalar(cost, settings)?;
    let theta_hat = vec![minimum.argmin];

    let g = map.jacobian(&theta_hat)?;
    let gwg = symmetrize(&(g.transpose() * &w * &g));
    let gwg_inv = spd_inverse(&gwg, "GᵀWG")?;
    let inflation = map.inflation();
    let predicted_cov = match &bla.sandwich {
        Some(s) => {
            let a = &gwg_inv * g.transpose() * &w;
            symmetrize(&(&a * &s.cov_beta * a.transpose() * inflation))
        }
        None => gwg_inv * (inflation / bla.n_obs as f64),
    };

    Ok(IndirectReport {
        theta_hat,
        g,
        predicted_cov,
        inflation,
        weighting_used: kind,
        diagnostics: OptimizerDiagnostics::from(minimum),
    })
}

/// Coefficients `(c₃, c₁)` of `β₁(θ) = c₃θ³ + c₁θ`.
fn beta1_cubic_coefficients(kind: DistributionKind, sigma_u2: f64, sigma_v2: f64) -> (f64, f64) {
    let c1 = 3.0 * (sigma_u2 + sigma_v2);
    match kind {
        DistributionKind::GaussianWhite => (3.0 * sigma_u2, c1),
        DistributionKind::UniformWhite => (1.8 * sigma_u2, c1),
    }
}

/// Real root of the strictly increasing `c₃θ³ + c₁θ = target`.
///
/// Returns the root and the number of iterations used.
pub fn solve_monotone_cubic(c3: f64, c1: f64, target: f64) -> Result<(f64, usize)> {
    if !(c3 >= 0.0 && c1 >= 0.0) || (c3 == 0.0 && c1 == 0.0) || !target.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "cubic {c3}θ³ + {c1}θ = {target} is not strictly increasing or not finite"
        )));
    }
    if target == 0.0 {
        return Ok((0.0, 0));
    }
    let p = |x: f64| c3 * x * x * x + c1 * x - target;
    let dp = |x: f64| 3.0 * c3 * x * x + c1;
    // Either term alone reaching |target| bounds the root.
    let mag = target.abs();
    let mut bound = f64::INFINITY;
    if c1 > 0.0 {
        bound = bound.min(mag / c1);
    }
    if c3 > 0.0 {
        bound = bound.min((mag / c3).cbrt());
    }
    let (mut lo, mut hi) = if target > 0.0 { (0.0, bound) } else { (-bound, 0.0) };
    let mut x = 0.5 * (lo + hi);
    for iter in 1..=200 {
        let fx = p(x);
        if fx == 0.0 {
            return Ok((x, iter));
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - fx / dp(x);
        let next = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if (next - x).abs() <= 4.0 * f64::EPSILON * x.abs().max(f64::MIN_POSITIVE) || hi - lo <= 4.0 * f64::EPSILON * hi.abs().max(lo.abs()) {
            return Ok((next, iter));
        }
        x = next;
    }
    Ok((x, 200))
}

/// Zero-order indirect inference: fit `β̂₁` on `u(t)` alone and invert
/// `β₁(θ) = β̂₁`.
///
/// The predicted standard deviation is the delta method applied to the
/// robust variance of `β̂₁`.
pub fn zero_order_estimate(data: &DataRecord, spec_template: &SystemSpec, input_kind: DistributionKind) -> Result<EstimateReport> {
    BetaMap::analytic(spec_template, input_kind)?;
    let bla = estimate_weighting(data, &fit_bla(data, &[0])?)?;
    let (c3, c1) = beta1_cubic_coefficients(input_kind, spec_template.input_dist.variance, spec_template.sigma_v2);
    let target = bla.beta_hat[0];
    let (theta, iterations) = solve_monotone_cubic(c3, c1, target)?;
    let slope = 3.0 * c3 * theta * theta + c1;
    let var_beta = bla.sandwich.as_ref().map(|s| s.cov_beta[(0, 0)]);
    let residual = c3 * theta.powi(3) + c1 * theta - target;
    Ok(EstimateReport {
        method: Method::Ii0,
        theta_hat: vec![theta],
        diagnostics: OptimizerDiagnostics {
            iterations,
            evaluations: iterations,
            min_value: residual * residual,
            degenerate: false,
            converged: true,
        },
        predicted_std: var_beta.map(|v| vec![v.max(0.0).sqrt() / slope]),
    })
}

/// First-order indirect inference with the closed-form binding function.
pub fn first_order_estimate(
    data: &DataRecord,
    spec_template: &SystemSpec,
    input_kind: DistributionKind,
    weighted: bool,
    settings: &OptimizerSettings,
) -> Result<IndirectReport> {
    let map = BetaMap::analytic(spec_template, input_kind)?;
    let bla = estimate_weighting(data, &fit_bla(data, &[0, 1])?)?;
    let weighting = if weighted { Weighting::Sandwich } else { Weighting::Identity };
    step2(&bla, &weighting, &map, settings)
}

/// First-order indirect inference with the simulated binding function on the
/// observed input, `S` process-noise realizations drawn from `seed`.
pub fn first_order_simulated(
    data: &DataRecord,
    spec_template: &SystemSpec,
    s: usize,
    seed: Seed,
    weighted: bool,
    settings: &OptimizerSettings,
) -> Result<IndirectReport> {
    let lags: Vec<usize> = (0..=spec_template.fir.max_lag()).collect();
    let map = SimulatedMap::new(data.u(), data.history(), spec_template, s, seed, &lags)?;
    let bla = estimate_weighting(data, &fit_bla(data, &lags)?)?;
    let weighting = if weighted { Weighting::Sandwich } else { Weighting::Identity };
    step2(&bla, &weighting, &BetaMap::Simulated(Box::new(map)), settings)
}
