//! Gauss-Hermite quadrature for `∫ e^{-x²} g(x) dx`.
//!
//! Nodes are the eigenvalues of the symmetric tridiagonal Jacobi matrix of the
//! physicists' Hermite polynomials (Golub-Welsch). Weights are carried in log
//! form: at order 1000 the outermost weights are around `1e-840`, far below
//! the smallest `f64`, so the eigenvector formula `w_i = √π v_{0i}²` cannot be
//! used directly. The equivalent Christoffel form `w_i = 1 / (n p_{n-1}(x_i)²)`
//! with the orthonormal Hermite polynomial `p_{n-1}` is evaluated with a
//! running log scale instead.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub const MAX_ORDER: usize = 2000;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub order: usize,
    /// Strictly increasing, symmetric about zero.
    pub nodes: Vec<f64>,
    /// `exp(log_weights)`; zero where the weight underflows.
    pub weights: Vec<f64>,
    pub log_weights: Vec<f64>,
}

/// Physicists' Gauss-Hermite rule of the given order.
pub fn gauss_hermite(order: usize) -> Result<QuadratureRule> {
    if order == 0 || order > MAX_ORDER {
        return Err(Error::InvalidArgument(format!(
            "Gauss-Hermite order must be in 1..={MAX_ORDER}, got {order}"
        )));
    }
    let n = order;
    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = (k as f64 / 2.0).sqrt();
        jacobi[(k - 1, k)] = b;
        jacobi[(k, k - 1)] = b;
    }
    let mut raw: Vec<f64> = jacobi.symmetric_eigenvalues().iter().copied().collect();
    raw.sort_by(|a, b| a.total_cmp(b));
    let mut nodes = vec![0.0; n];
    for i in 0..n {
        nodes[i] = 0.5 * (raw[i] - raw[n - 1 - i]);
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }

    let log_weights: Vec<f64> = nodes
        .iter()
        .map(|&x| -(n as f64).ln() - 2.0 * log_abs_orthonormal_hermite(n - 1, x))
        .collect();
    // Mirror so the rule is exactly symmetric.
    let log_weights: Vec<f64> = (0..n)
        .map(|i| 0.5 * (log_weights[i] + log_weights[n - 1 - i]))
        .collect();
    let weights = log_weights.iter().map(|lw| lw.exp()).collect();
    Ok(QuadratureRule {
        order,
        nodes,
        weights,
        log_weights,
    })
}

/// `ln |p_k(x)|` for the Hermite polynomial normalized so that
/// `∫ p_j p_k e^{-x²} dx = δ_jk`.
fn log_abs_orthonormal_hermite(k: usize, x: f64) -> f64 {
    const RESCALE: f64 = 1e100;
    let mut prev = 0.0;
    let mut cur = PI.powf(-0.25);
    let mut log_scale = 0.0;
    for j in 0..k {
        let next = (2.0 / (j as f64 + 1.0)).sqrt() * x * cur - (j as f64 / (j as f64 + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
        if cur.abs() > RESCALE {
            cur /= RESCALE;
            prev /= RESCALE;
            log_scale += RESCALE.ln();
        }
    }
    cur.abs().ln() + log_scale
}

/// Shared, lazily built rules. Building order 1000 takes a noticeable fraction
/// of a second, and every likelihood evaluation reuses the same rule.
pub fn gauss_hermite_shared(order: usize) -> Result<Arc<QuadratureRule>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<QuadratureRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(rule) = cache.lock().expect("quadrature cache poisoned").get(&order) {
        return Ok(Arc::clone(rule));
    }
    let rule = Arc::new(gauss_hermite(order)?);
    cache
        .lock()
        .expect("quadrature cache poisoned")
        .insert(order, Arc::clone(&rule));
    Ok(rule)
}

impl QuadratureRule {
    /// `Σ w_i g(x_i) ≈ ∫ e^{-x²} g(x) dx`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut g: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| if w == 0.0 { 0.0 } else { w * g(x) })
            .sum()
    }

    /// `E{g(V)}` for `V ~ N(0, 1)`.
    pub fn expect_std_normal<F: FnMut(f64) -> f64>(&self, mut g: F) -> f64 {
        self.integrate(|x| g(std::f64::consts::SQRT_2 * x)) / PI.sqrt()
    }

    /// `ln E{exp(h(V))}` for `V ~ N(0, 1)`, accumulated as a max-shifted
    /// exponential sum so no term underflows before the shift.
    pub fn log_expect_std_normal<F: FnMut(f64) -> f64>(&self, mut log_g: F) -> f64 {
        let terms = self
            .nodes
            .iter()
            .zip(&self.log_weights)
            .map(|(&x, &lw)| lw + log_g(std::f64::consts::SQRT_2 * x));
        log_sum_exp(terms) - 0.5 * PI.ln()
    }
}

/// `ln Σ exp(a_i)`; `-inf` for an empty or all-`-inf` input, NaN propagates.
pub fn log_sum_exp<I: IntoIterator<Item = f64>>(terms: I) -> f64 {
    let terms: Vec<f64> = terms.into_iter().collect();
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if terms.iter().any(|t| t.is_nan()) {
        return f64::NAN;
    }
    if max.is_infinite() {
        return max;
    }
    let s: f64 = terms.iter().map(|t| (t - max).exp()).sum();
    max + s.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `∫ x^{2k} e^{-x²} dx = Γ(k + 1/2) = √π (2k-1)!! / 2^k`.
    fn even_moment(k: u32) -> f64 {
        let mut v = PI.sqrt();
        for j in 1..=k {
            v *= (2 * j - 1) as f64 / 2.0;
        }
        v
    }

    #[test]
    fn low_orders() {
        let r = gauss_hermite(1).unwrap();
        assert_eq!(r.nodes, vec![0.0]);
        assert!((r.weights[0] - PI.sqrt()).abs() < 1e-15);

        let r = gauss_hermite(2).unwrap();
        let x = 1.0 / 2f64.sqrt();
        assert!((r.nodes[0] + x).abs() < 1e-15 && (r.nodes[1] - x).abs() < 1e-15);
        for w in &r.weights {
            assert!((w - PI.sqrt() / 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn sixth_gaussian_moment() {
        let r = gauss_hermite(20).unwrap();
        let m6 = r.expect_std_normal(|v| v.powi(6));
        assert!((m6 - 15.0).abs() < 1e-8, "{m6}");
    }

    #[test]
    fn exact_to_degree_2k_minus_1() {
        for k in [1usize, 2, 5, 10, 20] {
            let r = gauss_hermite(k).unwrap();
            for d in 0..(2 * k) {
                let got = r.integrate(|x| x.powi(d as i32));
                let want = if d % 2 == 1 { 0.0 } else { even_moment(d as u32 / 2) };
                // Odd moments vanish, so measure error against Σ w |x|^d.
                let scale = r.integrate(|x| x.abs().powi(d as i32));
                let tol = 1e-13 * scale.max(want.abs()).max(1.0);
                assert!((got - want).abs() <= tol, "k={k} d={d}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn structure_and_weight_sum() {
        for n in [3usize, 50, 200, 1000] {
            let r = gauss_hermite(n).unwrap();
            assert!(r.nodes.windows(2).all(|w| w[0] < w[1]));
            for i in 0..n {
                assert_eq!(r.nodes[i], -r.nodes[n - 1 - i]);
                assert_eq!(r.log_weights[i], r.log_weights[n - 1 - i]);
                assert!(r.log_weights[i].is_finite());
            }
            if n <= 200 {
                assert!(r.weights.iter().all(|&w| w > 0.0));
            }
            let total = log_sum_exp(r.log_weights.iter().copied()).exp();
            assert!((total - PI.sqrt()).abs() <= 1e-10 * PI.sqrt(), "order {n}: {total}");
        }
    }

    #[test]
    fn order_range_checked() {
        assert!(gauss_hermite(0).is_err());
        assert!(gauss_hermite(MAX_ORDER + 1).is_err());
    }

    #[test]
    fn log_space_matches_direct_sum() {
        let r = gauss_hermite(40).unwrap();
        let direct = r.expect_std_normal(|v| (-(v - 0.3).powi(2)).exp()).ln();
        let logged = r.log_expect_std_normal(|v| -(v - 0.3).powi(2));
        assert!((direct - logged).abs() < 1e-12);
    }

    #[test]
    fn log_sum_exp_edge_cases() {
        assert_eq!(log_sum_exp(Vec::new()), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp([f64::NEG_INFINITY, f64::NEG_INFINITY]), f64::NEG_INFINITY);
        assert!((log_sum_exp([-1000.0, -1000.0]) - (-1000.0 + 2f64.ln())).abs() < 1e-12);
    }
}
