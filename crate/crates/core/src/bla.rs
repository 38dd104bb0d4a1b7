//! Best linear approximation (Step 1 of indirect inference).
//!
//! The auxiliary model is the FIR output-error predictor
//! `y(t) ≈ Σ_k β_k u(t - lag_k)`, fitted by least squares. Its covariance is the
//! heteroskedasticity-robust sandwich `J⁻¹ (4I) J⁻¹ / N` with
//!
//! ```text
//! I = (1/N) Σ ε̂(t)² φ(t) φ(t)ᵀ      J = (2/N) Σ φ(t) φ(t)ᵀ
//! ```
//!
//! and the optimal Step-2 weighting is `W = [N · Cov(β̂)]⁻¹`, the inverse
//! asymptotic covariance of `√N (β̂ - β_o)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{condition_number, gauss_hermite_shared, is_symmetric, least_squares, spd_inverse, symmetrize};
use crate::signals::DistributionKind;
use crate::system::{DataRecord, Nonlinearity, SystemSpec};

/// Condition number of `Î` above which a ridge is added.
pub const RIDGE_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct Sandwich {
    pub i_hat: DMatrix<f64>,
    pub j_hat: DMatrix<f64>,
    pub w: DMatrix<f64>,
    pub cov_beta: DMatrix<f64>,
    /// `Î` was ill-conditioned and regularized before use.
    pub ridge_applied: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlaEstimate {
    pub lags: Vec<usize>,
    pub beta_hat: DVector<f64>,
    pub residuals: DVector<f64>,
    pub n_obs: usize,
    /// Filled by [`estimate_weighting`].
    pub sandwich: Option<Sandwich>,
}

impl BlaEstimate {
    pub fn order(&self) -> usize {
        self.beta_hat.len()
    }

    pub fn residual_variance(&self) -> f64 {
        self.residuals.norm_squared() / self.n_obs as f64
    }

    /// Structured text report: coefficients, row-major matrices and `N`.
    pub fn to_report(&self) -> String {
        let rows = |m: &DMatrix<f64>| -> Vec<Vec<f64>> {
            (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
        };
        let report = BlaReport {
            n: self.n_obs,
            lags: self.lags.clone(),
            beta_hat: self.beta_hat.iter().copied().collect(),
            residual_variance: self.residual_variance(),
            i_hat: self.sandwich.as_ref().map(|s| rows(&s.i_hat)),
            j_hat: self.sandwich.as_ref().map(|s| rows(&s.j_hat)),
            w: self.sandwich.as_ref().map(|s| rows(&s.w)),
            cov_beta: self.sandwich.as_ref().map(|s| rows(&s.cov_beta)),
            ridge_applied: self.sandwich.as_ref().map(|s| s.ridge_applied),
        };
        serde_json::to_string_pretty(&report).expect("report serializes")
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct BlaReport {
    #[serde(rename = "N")]
    pub n: usize,
    pub lags: Vec<usize>,
    pub beta_hat: Vec<f64>,
    pub residual_variance: f64,
    pub i_hat: Option<Vec<Vec<f64>>>,
    pub j_hat: Option<Vec<Vec<f64>>>,
    pub w: Option<Vec<Vec<f64>>>,
    pub cov_beta: Option<Vec<Vec<f64>>>,
    pub ridge_applied: Option<bool>,
}

/// `N × m` matrix with columns `u(t - lag)`, `t = 1..=N`.
pub fn regressor_matrix(data: &DataRecord, lags: &[usize]) -> Result<DMatrix<f64>> {
    if lags.is_empty() {
        return Err(Error::InvalidArgument("BLA needs at least one lag".into()));
    }
    let n = data.n();
    let mut phi = DMatrix::zeros(n, lags.len());
    for (j, &lag) in lags.iter().enumerate() {
        let col = data.lagged_input(lag)?;
        phi.column_mut(j).copy_from_slice(col);
    }
    Ok(phi)
}

/// Least-squares BLA coefficients for the given lags.
pub fn fit_bla(data: &DataRecord, lags: &[usize]) -> Result<BlaEstimate> {
    if data.n() <= lags.len() {
        return Err(Error::InvalidArgument(format!(
            "need more than {} samples for {} BLA coefficients",
            lags.len(),
            lags.len()
        )));
    }
    let phi = regressor_matrix(data, lags)?;
    let fit = least_squares(&phi, &DVector::from_column_slice(data.y()))?;
    Ok(BlaEstimate {
        lags: lags.to_vec(),
        beta_hat: fit.coefficients,
        residuals: fit.residuals,
        n_obs: data.n(),
        sandwich: None,
    })
}

/// Fills in `Î`, `Ĵ`, `Cov(β̂)` and `W` from the BLA residuals.
pub fn estimate_weighting(data: &DataRecord, est: &BlaEstimate) -> Result<BlaEstimate> {
    let phi = regressor_matrix(data, &est.lags)?;
    if phi.nrows() != est.residuals.len() {
        return Err(Error::LengthMismatch {
            what: "BLA residuals",
            expected: phi.nrows(),
            got: est.residuals.len(),
        });
    }
    let n = est.n_obs as f64;
    let m = est.order();

    let gram = phi.transpose() * &phi;
    let j_hat = symmetrize(&(&gram * (2.0 / n)));
    let mut weighted = phi.clone();
    for (mut row, &eps) in weighted.row_iter_mut().zip(est.residuals.iter()) {
        row *= eps;
    }
    let mut i_hat = symmetrize(&(weighted.transpose() * &weighted / n));

    let mut ridge_applied = false;
    if condition_number(&i_hat) > RIDGE_CONDITION {
        let ridge = 1e-10 * i_hat.trace() / m as f64;
        for k in 0..m {
            i_hat[(k, k)] += ridge;
        }
        ridge_applied = true;
    }

    let j_inv = spd_inverse(&j_hat, "Ĵ")?;
    let cov_beta = symmetrize(&(&j_inv * (&i_hat * 4.0) * &j_inv / n));
    let w = spd_inverse(&(&cov_beta * n), "N · Cov(β̂)")?;

    Ok(BlaEstimate {
        sandwich: Some(Sandwich {
            i_hat,
            j_hat,
            w,
            cov_beta,
            ridge_applied,
        }),
        ..est.clone()
    })
}

/// `b₀ = E{f'(z)}` together with whether the gaussian premise holds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BussgangGain {
    pub value: f64,
    /// False when the input is not gaussian; `value` is then only the
    /// gaussian-formula number, not the BLA scaling.
    pub gaussian_input: bool,
}

/// Bussgang gain for `z ~ N(0, ‖G‖² σ_u² + σ_v²)`.
pub fn bussgang_gain(spec: &SystemSpec) -> Result<BussgangGain> {
    spec.validate()?;
    let sigma_z2 = spec.fir.norm_sq(&spec.theta)? * spec.input_dist.variance + spec.sigma_v2;
    let value = match &spec.nonlinearity {
        Nonlinearity::Cubic => 3.0 * sigma_z2,
        Nonlinearity::Identity => 1.0,
        f @ Nonlinearity::Polynomial(_) => {
            let sd = sigma_z2.sqrt();
            gauss_hermite_shared(50)?.expect_std_normal(|x| f.derivative(sd * x))
        }
    };
    Ok(BussgangGain {
        value,
        gaussian_input: spec.input_dist.kind == DistributionKind::GaussianWhite,
    })
}

pub(crate) fn check_weighting(w: &DMatrix<f64>, m: usize) -> Result<()> {
    if w.shape() != (m, m) {
        return Err(Error::LengthMismatch {
            what: "weighting matrix",
            expected: m,
            got: w.nrows(),
        });
    }
    if !is_symmetric(w) || w.clone().cholesky().is_none() {
        return Err(Error::NotPositiveDefinite);
    }
    Ok(())
}
