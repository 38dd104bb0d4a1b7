//! Bounded scalar minimization: a uniform grid scan picks the basin, then
//! Brent's golden-section/parabolic search refines inside the neighbouring
//! grid cells.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// (3 - √5) / 2
const GOLDEN: f64 = 0.381_966_011_250_105_1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSettings {
    pub bracket: (f64, f64),
    pub abs_tol: f64,
    pub max_iter: usize,
    pub grid_points: usize,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        OptimizerSettings {
            bracket: (-3.0, 3.0),
            abs_tol: 1e-6,
            max_iter: 200,
            grid_points: 61,
        }
    }
}

impl OptimizerSettings {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.bracket;
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidArgument(format!("bad bracket ({lo}, {hi})")));
        }
        if !(self.abs_tol > 0.0) {
            return Err(Error::InvalidArgument("abs_tol must be positive".into()));
        }
        if self.grid_points < 2 {
            return Err(Error::InvalidArgument("grid_points must be at least 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarMinimum {
    pub argmin: f64,
    pub min_value: f64,
    /// Brent iterations after the grid scan.
    pub iterations: usize,
    pub evaluations: usize,
    /// The cost was flat over the whole grid.
    pub degenerate: bool,
    pub converged: bool,
}

pub fn minimize_scalar<F: FnMut(f64) -> f64>(mut cost: F, settings: &OptimizerSettings) -> Result<ScalarMinimum> {
    try_minimize_scalar(|x| Ok(cost(x)), settings)
}

/// As [`minimize_scalar`] for a fallible cost.
///
/// Grid ties are broken toward the smallest `|x|`.
pub fn try_minimize_scalar<F>(mut cost: F, settings: &OptimizerSettings) -> Result<ScalarMinimum>
where
    F: FnMut(f64) -> Result<f64>,
{
    settings.validate()?;
    let mut evaluations = 0usize;
    let mut eval = |x: f64| -> Result<f64> {
        evaluations += 1;
        let v = cost(x)?;
        if !v.is_finite() {
            return Err(Error::NonFiniteCost { theta: x });
        }
        Ok(v)
    };

    let (lo, hi) = settings.bracket;
    let m = settings.grid_points;
    let step = (hi - lo) / (m - 1) as f64;
    let grid: Vec<f64> = (0..m)
        .map(|i| if i == m - 1 { hi } else { lo + step * i as f64 })
        .collect();
    let mut values = Vec::with_capacity(m);
    for &x in &grid {
        values.push(eval(x)?);
    }

    let vmin = values.iter().copied().fold(f64::INFINITY, f64::min);
    let vmax = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tie = |v: f64| v - vmin <= 1e-12 * (1.0 + vmin.abs());
    let best = (0..m)
        .filter(|&i| tie(values[i]))
        .min_by(|&i, &j| grid[i].abs().total_cmp(&grid[j].abs()))
        .expect("grid is non-empty");

    if vmax - vmin <= 1e-14 * (1.0 + vmin.abs()) {
        return Ok(ScalarMinimum {
            argmin: grid[best],
            min_value: values[best],
            iterations: 0,
            evaluations,
            degenerate: true,
            converged: true,
        });
    }

    let a = grid[best.saturating_sub(1)];
    let b = grid[(best + 1).min(m - 1)];
    let (x, fx, iterations, converged) =
        brent(&mut eval, a, b, grid[best], values[best], settings.abs_tol, settings.max_iter)?;
    // Brent only ever returns the best point it has seen, so it cannot lose
    // to the grid point it started from.
    Ok(ScalarMinimum {
        argmin: x,
        min_value: fx,
        iterations,
        evaluations,
        degenerate: false,
        converged,
    })
}

/// Brent refinement of `f` on `[a, b]` from a known interior point.
///
/// Returns `(argmin, min_value)`.
pub(crate) fn refine_bracketed<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    x0: f64,
    f0: f64,
    abs_tol: f64,
    max_iter: usize,
) -> (f64, f64) {
    let (x, fx, _, _) = brent(&mut |x| Ok(f(x)), a, b, x0, f0, abs_tol, max_iter).expect("infallible cost");
    (x, fx)
}

/// Brent's minimizer on `[a, b]` started from the known point `(x0, f0)`.
fn brent<F>(
    f: &mut F,
    mut a: f64,
    mut b: f64,
    x0: f64,
    f0: f64,
    abs_tol: f64,
    max_iter: usize,
) -> Result<(f64, f64, usize, bool)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let sqrt_eps = f64::EPSILON.sqrt();
    let (mut x, mut w, mut v) = (x0, x0, x0);
    let (mut fx, mut fw, mut fv) = (f0, f0, f0);
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;

    for iter in 0..max_iter {
        let mid = 0.5 * (a + b);
        let tol1 = sqrt_eps * x.abs() + abs_tol / 3.0;
        let tol2 = 2.0 * tol1;
        if (x - mid).abs() <= tol2 - 0.5 * (b - a) {
            return Ok((x, fx, iter, true));
        }

        let mut golden = true;
        if e.abs() > tol1 {
            // Parabola through x, w, v.
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let e_prev = e;
            if p.abs() < (0.5 * q * e_prev).abs() && p > q * (a - x) && p < q * (b - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if mid >= x { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= mid { a - x } else { b - x };
            d = GOLDEN * e;
        }

        let u = if d.abs() >= tol1 {
            x + d
        } else if d > 0.0 {
            x + tol1
        } else {
            x - tol1
        };
        let fu = f(u)?;

        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    Ok((x, fx, max_iter, false))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_bowl() {
        let s = OptimizerSettings::default();
        let r = minimize_scalar(|t| (t - 0.5).powi(2), &s).unwrap();
        assert!((r.argmin - 0.5).abs() <= s.abs_tol);
        assert!(r.converged && !r.degenerate);
    }

    #[test]
    fn quartic_stationary_point() {
        let s = OptimizerSettings {
            bracket: (0.0, 2.0),
            ..Default::default()
        };
        let r = minimize_scalar(|t| t.powi(4) - t * t, &s).unwrap();
        assert!((r.argmin - 0.5f64.sqrt()).abs() <= s.abs_tol, "{}", r.argmin);
    }

    #[test]
    fn tight_tolerance() {
        let s = OptimizerSettings {
            abs_tol: 1e-10,
            ..Default::default()
        };
        let r = minimize_scalar(|t| (t - 1.234_567_89).powi(2) + (3.0 * t).cos() * 1e-3, &s).unwrap();
        let fd = |t: f64| 2.0 * (t - 1.234_567_89) - 3e-3 * (3.0 * t).sin();
        assert!(fd(r.argmin).abs() < 1e-8);
    }

    #[test]
    fn flat_cost_is_degenerate() {
        let r = minimize_scalar(|_| 4.0, &OptimizerSettings::default()).unwrap();
        assert!(r.degenerate);
        assert!((-3.0..=3.0).contains(&r.argmin));
        assert_eq!(r.argmin, 0.0);
    }

    #[test]
    fn symmetric_tie_prefers_small_magnitude() {
        let r = minimize_scalar(|t| (t * t - 1.0).powi(2), &OptimizerSettings::default()).unwrap();
        assert!((r.argmin.abs() - 1.0).abs() < 1e-6);
        let r2 = minimize_scalar(|t| (t * t - 1.0).powi(2), &OptimizerSettings::default()).unwrap();
        assert_eq!(r.argmin, r2.argmin);
    }

    #[test]
    fn minimum_on_edge() {
        let r = minimize_scalar(|t| t, &OptimizerSettings::default()).unwrap();
        assert!((r.argmin + 3.0).abs() <= 1e-6);
    }

    #[test]
    fn non_finite_cost_reports_theta() {
        let err = minimize_scalar(|t| if t > 1.0 { f64::NAN } else { t * t }, &OptimizerSettings::default())
            .unwrap_err();
        match err {
            Error::NonFiniteCost { theta } => assert!(theta > 1.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn invalid_settings() {
        let bad = OptimizerSettings {
            bracket: (1.0, 1.0),
            ..Default::default()
        };
        assert!(minimize_scalar(|t| t, &bad).is_err());
        let bad = OptimizerSettings {
            abs_tol: 0.0,
            ..Default::default()
        };
        assert!(minimize_scalar(|t| t, &bad).is_err());
    }
}
