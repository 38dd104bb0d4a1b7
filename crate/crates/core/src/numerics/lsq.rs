//! Linear least squares through a Householder QR of the regressors.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquaresFit {
    pub coefficients: DVector<f64>,
    pub residuals: DVector<f64>,
    /// Singular values of the regressor matrix, largest first.
    pub singular_values: DVector<f64>,
}

/// Minimizes `‖targets - regressors · c‖²`.
///
/// Rank is decided on the singular values of the triangular factor (equal to
/// those of the regressor matrix) with the usual `max(N, m) · eps · σ_max`
/// threshold.
pub fn least_squares(regressors: &DMatrix<f64>, targets: &DVector<f64>) -> Result<LeastSquaresFit> {
    let (n, m) = regressors.shape();
    if targets.len() != n {
        return Err(Error::LengthMismatch {
            what: "targets",
            expected: n,
            got: targets.len(),
        });
    }
    if m == 0 || n < m {
        return Err(Error::InvalidArgument(format!(
            "least squares needs N >= m >= 1, got N = {n}, m = {m}"
        )));
    }
    if regressors.iter().chain(targets.iter()).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite regression data".into()));
    }

    let qr = regressors.clone().qr();
    let r = qr.r();
    let mut sv = r.clone().singular_values();
    sv.as_mut_slice().sort_by(|a, b| b.total_cmp(a));
    let largest = sv[0];
    let smallest = sv[m - 1];
    if !(smallest > n.max(m) as f64 * f64::EPSILON * largest) {
        return Err(Error::RankDeficient {
            smallest_singular_value: smallest,
        });
    }

    let mut qtb = targets.clone();
    qr.q_tr_mul(&mut qtb);
    let rhs = qtb.rows(0, m).into_owned();
    let coefficients = r
        .solve_upper_triangular(&rhs)
        .ok_or_else(|| Error::Singular("triangular factor".into()))?;
    let residuals = targets - regressors * &coefficients;
    Ok(LeastSquaresFit {
        coefficients,
        residuals,
        singular_values: sv,
    })
}
