use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Central-difference Jacobian of `map` at `point`.
pub fn jacobian_fd<F>(mut map: F, point: &DVector<f64>, step: f64) -> Result<DMatrix<f64>>
where
    F: FnMut(&DVector<f64>) -> Result<DVector<f64>>,
{
    if !(step > 0.0) {
        return Err(Error::InvalidArgument("finite-difference step must be positive".into()));
    }
    let mut checked = |p: &DVector<f64>| -> Result<DVector<f64>> {
        let v = map(p)?;
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteMap {
                point: p.iter().copied().collect(),
            });
        }
        Ok(v)
    };
    let n = point.len();
    let mut columns = Vec::with_capacity(n);
    for j in 0..n {
        let mut plus = point.clone();
        let mut minus = point.clone();
        plus[j] += step;
        minus[j] -= step;
        let fp = checked(&plus)?;
        let fm = checked(&minus)?;
        if fp.len() != fm.len() {
            return Err(Error::InvalidArgument("map output size changed".into()));
        }
        columns.push((fp - fm) / (2.0 * step));
    }
    let m = columns.first().map_or(0, |c| c.len());
    Ok(DMatrix::from_fn(m, n, |i, j| columns[j][i]))
}
