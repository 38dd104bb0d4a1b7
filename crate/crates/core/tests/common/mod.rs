//! Reference computations written independently of the library code: direct
//! sampling with a separate generator, closed-form two-regressor least
//! squares and moment expansions.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution as _, Normal, Uniform};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Input {
    Gaussian,
    Uniform,
}

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

pub fn draw_input<R: Rng>(kind: Input, var: f64, n: usize, rng: &mut R) -> Vec<f64> {
    match kind {
        Input::Gaussian => {
            let d = Normal::new(0.0, var.sqrt()).unwrap();
            (0..n).map(|_| d.sample(rng)).collect()
        }
        Input::Uniform => {
            let h = (3.0 * var).sqrt();
            let d = Uniform::new_inclusive(-h, h).unwrap();
            (0..n).map(|_| d.sample(rng)).collect()
        }
    }
}

pub fn normal<R: Rng>(var: f64, n: usize, rng: &mut R) -> Vec<f64> {
    let d = Normal::new(0.0, var.sqrt()).unwrap();
    (0..n).map(|_| d.sample(rng)).collect()
}

/// Least squares on two regressors with heteroskedasticity-robust errors.
#[derive(Debug, Clone, Copy)]
pub struct Ols2 {
    pub beta: [f64; 2],
    pub se: [f64; 2],
}

pub fn ols2_robust(x1: &[f64], x2: &[f64], y: &[f64]) -> Ols2 {
    let (mut s11, mut s12, mut s22, mut s1y, mut s2y) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..y.len() {
        s11 += x1[i] * x1[i];
        s12 += x1[i] * x2[i];
        s22 += x2[i] * x2[i];
        s1y += x1[i] * y[i];
        s2y += x2[i] * y[i];
    }
    let det = s11 * s22 - s12 * s12;
    let inv = [[s22 / det, -s12 / det], [-s12 / det, s11 / det]];
    let b1 = inv[0][0] * s1y + inv[0][1] * s2y;
    let b2 = inv[1][0] * s1y + inv[1][1] * s2y;
    let (mut m11, mut m12, mut m22) = (0.0, 0.0, 0.0);
    for i in 0..y.len() {
        let r = y[i] - b1 * x1[i] - b2 * x2[i];
        let r2 = r * r;
        m11 += r2 * x1[i] * x1[i];
        m12 += r2 * x1[i] * x2[i];
        m22 += r2 * x2[i] * x2[i];
    }
    // inv · M · inv
    let a = |i: usize, j: usize| -> f64 {
        let meat = [[m11, m12], [m12, m22]];
        let mut acc = 0.0;
        for k in 0..2 {
            for l in 0..2 {
                acc += inv[i][k] * meat[k][l] * inv[l][j];
            }
        }
        acc
    };
    Ols2 {
        beta: [b1, b2],
        se: [a(0, 0).sqrt(), a(1, 1).sqrt()],
    }
}

/// Regression of simulated `y` on `(u(t), u(t-1))` for the cubic example.
pub fn monte_carlo_bla(theta: f64, kind: Input, su2: f64, sv2: f64, se2: f64, n: usize, seed: u64) -> Ols2 {
    let mut r = rng(seed);
    let u = draw_input(kind, su2, n + 1, &mut r);
    let v = normal(sv2, n, &mut r);
    let e = normal(se2, n, &mut r);
    let y: Vec<f64> = (0..n)
        .map(|t| {
            let z = theta * u[t + 1] + u[t] + v[t];
            z * z * z + e[t]
        })
        .collect();
    ols2_robust(&u[1..], &u[..n], &y)
}

/// `β(θ)` from `E{y u(t-k)} / σ_u²` expanded with the input fourth moment `m4`.
pub fn first_principles_beta(theta: f64, su2: f64, sv2: f64, m4: f64) -> (f64, f64) {
    // E{z³ u(t)} = θ³ m4 + 3θ σ_u² (σ_u² + σ_v²), and symmetrically for u(t-1).
    let b1 = theta.powi(3) * m4 / su2 + 3.0 * theta * (su2 + sv2);
    let b2 = 3.0 * theta * theta * su2 + m4 / su2 + 3.0 * sv2;
    (b1, b2)
}

/// Sample mean, its standard error, sample variance and its standard error.
pub fn moments_with_errors(x: &[f64]) -> (f64, f64, f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let (mut m2, mut m4) = (0.0, 0.0);
    for &v in x {
        let d = (v - mean) * (v - mean);
        m2 += d;
        m4 += d * d;
    }
    m2 /= n;
    m4 /= n;
    (mean, (m2 / n).sqrt(), m2, ((m4 - m2 * m2) / n).sqrt())
}

/// Adaptive Simpson integration of `f` on `[a, b]`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn step<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 50)
}
