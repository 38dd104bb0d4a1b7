//! Maximum likelihood through Gauss-Hermite evaluation of the marginal
//! likelihood.
//!
//! With `a(t) = G(q, θ) u(t)` and standardized process noise `v̄`, each sample
//! contributes
//!
//! ```text
//! ln E_v̄{ exp(-[y(t) - f(a(t) + σ_v v̄)]² / (2σ_e²)) }
//! ```
//!
//! and `l(θ)` is minus their sum; θ-independent normalizing constants are
//! dropped. For the cubic map the integrand behaves like `exp(-x⁶)` and can
//! be a spike far narrower than the node spacing near the origin, or a flat
//! plateau closed off by a steep wall. By default the rule is therefore
//! recentred on the integrand's mode and rescaled by its width
//! (`v̄ = μ + s√2 x`) before the sum is taken. The sum itself is always a
//! max-shifted log-sum-exp when `log_space` is on.

use std::f64::consts::{PI, SQRT_2};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::optimize::refine_bracketed;
use crate::numerics::{gauss_hermite_shared, log_sum_exp, try_minimize_scalar, OptimizerSettings, QuadratureRule};
use crate::report::{EstimateReport, Method, OptimizerDiagnostics};
use crate::system::{linear_output, DataRecord, Nonlinearity, SystemSpec};

/// Where the quadrature nodes are placed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QuadratureCentering {
    /// Standard nodes around `v̄ = 0`.
    Origin,
    /// Nodes centred on the mode of each integrand and scaled by its width.
    Mode,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlSettings {
    pub quad_order: usize,
    pub optimizer: OptimizerSettings,
    pub log_space: bool,
    pub centering: QuadratureCentering,
}

impl Default for MlSettings {
    fn default() -> Self {
        MlSettings {
            quad_order: 1000,
            optimizer: OptimizerSettings::default(),
            log_space: true,
            centering: QuadratureCentering::Mode,
        }
    }
}

impl MlSettings {
    pub fn with_order(quad_order: usize) -> Self {
        MlSettings {
            quad_order,
            ..Default::default()
        }
    }
}

/// Half-width and step of the mode search grid in `v̄`.
const MODE_SCAN_HALF_WIDTH: f64 = 12.0;
const MODE_SCAN_STEP: f64 = 0.25;

/// Global maximizer of `h` over a grid covering the default window and
/// `extra`, refined by Brent between the neighbouring grid points. Beyond the
/// window the grid spacing grows geometrically.
fn mode<H: Fn(f64) -> f64>(h: &H, extra: Option<f64>) -> (f64, f64) {
    let steps = (2.0 * MODE_SCAN_HALF_WIDTH / MODE_SCAN_STEP).round() as usize;
    let mut grid: Vec<f64> = (0..=steps)
        .map(|k| -MODE_SCAN_HALF_WIDTH + MODE_SCAN_STEP * k as f64)
        .collect();
    if let Some(v) = extra {
        let reach = v.abs() + MODE_SCAN_STEP;
        let sign = v.signum();
        let mut x = MODE_SCAN_HALF_WIDTH;
        while x < reach {
            x = (x * 1.05).min(reach);
            grid.push(sign * x);
        }
        grid.sort_by(f64::total_cmp);
    }
    let values: Vec<f64> = grid.iter().map(|&v| h(v)).collect();
    let best = (0..grid.len())
        .max_by(|&i, &j| values[i].total_cmp(&values[j]).then(j.cmp(&i)))
        .expect("grid is non-empty");
    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(grid.len() - 1)];
    let (x, neg) = refine_bracketed(|vb| -h(vb), lo, hi, grid[best], -values[best], 1e-10, 100);
    (x, -neg)
}

/// Half the distance between the points where `h` falls 1/2 below its peak
/// on either side of the mode; equals σ for a gaussian. The curvature at the
/// mode is no substitute: on the plateau of a cubic it is close to zero.
fn half_drop_width<H: Fn(f64) -> f64>(h: &H, mu: f64, h_max: f64) -> f64 {
    let level = h_max - 0.5;
    let crossing = |dir: f64| -> Option<f64> {
        let mut step = MODE_SCAN_STEP;
        let mut inside = mu;
        let mut outside = mu + dir * step;
        while h(outside) > level {
            inside = outside;
            step *= 2.0;
            outside = mu + dir * step;
            if step > 1e3 {
                return None;
            }
        }
        // The scale only needs to be roughly right.
        for _ in 0..20 {
            let mid = 0.5 * (inside + outside);
            if h(mid) > level {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        Some(0.5 * (inside + outside))
    };
    match (crossing(-1.0), crossing(1.0)) {
        (Some(lo), Some(hi)) if hi > lo => 0.5 * (hi - lo),
        _ => 1.0,
    }
}

/// Evaluates `l(θ)` with a fixed quadrature rule.
#[derive(Debug, Clone)]
pub struct LikelihoodEvaluator {
    rule: Arc<QuadratureRule>,
    settings: MlSettings,
}

impl LikelihoodEvaluator {
    pub fn new(settings: MlSettings) -> Result<Self> {
        if settings.quad_order == 0 {
            return Err(Error::InvalidArgument("quad_order must be at least 1".into()));
        }
        Ok(LikelihoodEvaluator {
            rule: gauss_hermite_shared(settings.quad_order)?,
            settings,
        })
    }

    pub fn settings(&self) -> &MlSettings {
        &self.settings
    }

    /// `ln E_v̄{exp(-[y - f(a + σ_v v̄)]² / (2σ_e²))}` for one sample.
    ///
    /// Returns `-inf` when every quadrature term underflows.
    pub fn log_term(&self, nl: &Nonlinearity, y: f64, a: f64, sigma_v: f64, sigma_e2: f64) -> f64 {
        let inv2 = 0.5 / sigma_e2;
        if sigma_v == 0.0 {
            let r = y - nl.value(a);
            return -r * r * inv2;
        }
        let log_g = |vb: f64| {
            let r = y - nl.value(a + sigma_v * vb);
            -r * r * inv2
        };
        match (self.settings.centering, self.settings.log_space) {
            (QuadratureCentering::Origin, true) => self.rule.log_expect_std_normal(log_g),
            (QuadratureCentering::Origin, false) => self.rule.expect_std_normal(|vb| log_g(vb).exp()).ln(),
            (QuadratureCentering::Mode, log_space) => {
                // h(v̄) = ln g(v̄) - v̄²/2, the log integrand against dv̄.
                let h = |vb: f64| log_g(vb) - 0.5 * vb * vb;
                // For invertible f the mode lies between 0 and the point where
                // f(a + σ_v v̄) = y, which can be far outside the default window.
                let exact_fit = nl.inverse(y).map(|z| (z - a) / sigma_v).filter(|v| v.is_finite());
                let (mu, h_max) = mode(&h, exact_fit);
                let s = half_drop_width(&h, mu, h_max);
                // E{g} = (s/√π) Σ w_i exp(h(μ + s√2 x_i) + x_i²)
                let terms = self
                    .rule
                    .nodes
                    .iter()
                    .zip(&self.rule.log_weights)
                    .map(|(&x, &lw)| lw + x * x + h(mu + s * SQRT_2 * x));
                let log_sum = if log_space {
                    log_sum_exp(terms)
                } else {
                    terms.map(f64::exp).sum::<f64>().ln()
                };
                log_sum + s.ln() - 0.5 * PI.ln()
            }
        }
    }


    /// `l(θ)` up to a θ-independent constant.
    pub fn neg_log_likelihood(&self, theta: &[f64], data: &DataRecord, spec: &SystemSpec) -> Result<f64> {
        if !(spec.sigma_e2 > 0.0) {
            return Err(Error::InvalidArgument("likelihood needs σ_e² > 0".into()));
        }
        let lin = linear_output(&spec.fir, theta, data.u(), data.history())?;
        let sigma_v = spec.sigma_v2.sqrt();
        let mut total = 0.0;
        for (t, (&a, &y)) in lin.iter().zip(data.y()).enumerate() {
            let lt = self.log_term(&spec.nonlinearity, y, a, sigma_v, spec.sigma_e2);
            if !lt.is_finite() {
                return Err(Error::QuadratureUnderflow {
                    t: t + 1,
                    theta: theta.first().copied().unwrap_or(f64::NAN),
                });
            }
            total -= lt;
        }
        Ok(total)
    }
}

/// `l(θ)` up to a θ-independent constant.
pub fn neg_log_likelihood(theta: &[f64], data: &DataRecord, spec_template: &SystemSpec, settings: &MlSettings) -> Result<f64> {
    LikelihoodEvaluator::new(*settings)?.neg_log_likelihood(theta, data, spec_template)
}

/// Minimizes `l(θ)` over the optimizer bracket.
pub fn ml_estimate(data: &DataRecord, spec_template: &SystemSpec, settings: &MlSettings) -> Result<EstimateReport> {
    let eval = LikelihoodEvaluator::new(*settings)?;
    ml_estimate_with(&eval, data, spec_template)
}

pub fn ml_estimate_with(eval: &LikelihoodEvaluator, data: &DataRecord, spec_template: &SystemSpec) -> Result<EstimateReport> {
    spec_template.validate()?;
    spec_template.scalar_theta()?;
    let cost = |th: f64| eval.neg_log_likelihood(&[th], data, spec_template);
    let minimum = try_minimize_scalar(cost, &eval.settings.optimizer)?;

    // Observed information from a central second difference.
    let th = minimum.argmin;
    let h = 1e-3 * th.abs().max(0.1);
    let curvature = (cost(th + h)? - 2.0 * minimum.min_value + cost(th - h)?) / (h * h);
    let predicted_std = (curvature > 0.0).then(|| vec![1.0 / curvature.sqrt()]);

    Ok(EstimateReport {
        method: Method::Ml,
        theta_hat: vec![th],
        diagnostics: OptimizerDiagnostics::from(minimum),
        predicted_std,
    })
}
