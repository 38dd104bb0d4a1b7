//! Numeric kernels shared by the estimators.

pub mod jacobian;
pub mod lsq;
pub mod optimize;
pub mod quadrature;

pub use jacobian::jacobian_fd;
pub use lsq::{least_squares, LeastSquaresFit};
pub use optimize::{minimize_scalar, try_minimize_scalar, OptimizerSettings, ScalarMinimum};
pub use quadrature::{gauss_hermite, gauss_hermite_shared, log_sum_exp, QuadratureRule};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Inverse of a symmetric positive definite matrix, symmetrized.
pub(crate) fn spd_inverse(a: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let inv = a
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Singular(format!("{what} is not positive definite")))?
        .inverse();
    Ok(symmetrize(&inv))
}

pub(crate) fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

pub(crate) fn is_symmetric(a: &DMatrix<f64>) -> bool {
    a.is_square() && (a - a.transpose()).abs().max() <= 1e-10 * a.abs().max().max(f64::MIN_POSITIVE)
}

/// `λ_max / λ_min` of a symmetric matrix; infinite when not positive definite.
pub(crate) fn condition_number(a: &DMatrix<f64>) -> f64 {
    let ev = a.clone().symmetric_eigenvalues();
    let max = ev.max();
    let min = ev.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}
