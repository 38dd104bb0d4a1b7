//! Stochastic Wiener systems with FIR dynamics and polynomial output maps.
//!
//! ```text
//! z(t) = G(q, theta) u(t) + v(t)
//! y(t) = f(z(t)) + e(t)
//! ```

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signals::{gen_white, Distribution, Seed, StreamRole};

/// Which FIR taps are free parameters and which are fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirStructure {
    /// Lag of each free coefficient, in parameter order.
    pub free_lags: Vec<usize>,
    /// Fixed `(lag, value)` taps.
    #[serde(default)]
    pub fixed: Vec<(usize, f64)>,
}

impl FirStructure {
    pub fn new(free_lags: Vec<usize>, fixed: Vec<(usize, f64)>) -> Result<Self> {
        let fir = FirStructure { free_lags, fixed };
        fir.validate()?;
        Ok(fir)
    }

    /// `theta * u(t) + u(t-1)`.
    pub fn first_order_example() -> Self {
        FirStructure {
            free_lags: vec![0],
            fixed: vec![(1, 1.0)],
        }
    }

    pub fn is_first_order_example(&self) -> bool {
        self.free_lags == [0] && self.fixed == [(1, 1.0)]
    }

    pub fn validate(&self) -> Result<()> {
        if self.free_lags.is_empty() {
            return Err(Error::InvalidArgument(
                "FIR structure needs at least one free coefficient".into(),
            ));
        }
        let mut lags: Vec<usize> = self
            .free_lags
            .iter()
            .copied()
            .chain(self.fixed.iter().map(|&(l, _)| l))
            .collect();
        lags.sort_unstable();
        if lags.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument("FIR lags must be distinct".into()));
        }
        Ok(())
    }

    pub fn n_free(&self) -> usize {
        self.free_lags.len()
    }

    pub fn max_lag(&self) -> usize {
        self.free_lags
            .iter()
            .copied()
            .chain(self.fixed.iter().map(|&(l, _)| l))
            .max()
            .unwrap_or(0)
    }

    /// All taps as `(lag, coefficient)` for the given parameter vector.
    pub fn taps(&self, theta: &[f64]) -> Result<Vec<(usize, f64)>> {
        if theta.len() != self.free_lags.len() {
            return Err(Error::LengthMismatch {
                what: "theta",
                expected: self.free_lags.len(),
                got: theta.len(),
            });
        }
        Ok(self
            .free_lags
            .iter()
            .copied()
            .zip(theta.iter().copied())
            .chain(self.fixed.iter().copied())
            .collect())
    }

    /// Squared l2 norm of the impulse response.
    pub fn norm_sq(&self, theta: &[f64]) -> Result<f64> {
        Ok(self.taps(theta)?.iter().map(|&(_, c)| c * c).sum())
    }
}

/// Static output nonlinearity `f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Nonlinearity {
    Cubic,
    Identity,
    /// `c[0] + c[1] x + c[2] x^2 + ...`
    Polynomial(Vec<f64>),
}

impl Nonlinearity {
    pub fn value(&self, x: f64) -> f64 {
        match self {
            Nonlinearity::Cubic => x * x * x,
            Nonlinearity::Identity => x,
            Nonlinearity::Polynomial(c) => c.iter().rev().fold(0.0, |acc, &ck| acc * x + ck),
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match self {
            Nonlinearity::Cubic => 3.0 * x * x,
            Nonlinearity::Identity => 1.0,
            Nonlinearity::Polynomial(c) => c
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (k, &ck)| acc * x + k as f64 * ck),
        }
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        match self {
            Nonlinearity::Cubic => 6.0 * x,
            Nonlinearity::Identity => 0.0,
            Nonlinearity::Polynomial(c) => c
                .iter()
                .enumerate()
                .skip(2)
                .rev()
                .fold(0.0, |acc, (k, &ck)| acc * x + (k * (k - 1)) as f64 * ck),
        }
    }

    /// Inverse on the range of a strictly monotone map; `None` otherwise.
    pub fn inverse(&self, y: f64) -> Option<f64> {
        match self {
            Nonlinearity::Cubic => Some(y.cbrt()),
            Nonlinearity::Identity => Some(y),
            Nonlinearity::Polynomial(_) => None,
        }
    }
}

/// A structured stochastic Wiener model (or the true system).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub fir: FirStructure,
    pub theta: Vec<f64>,
    pub nonlinearity: Nonlinearity,
    pub sigma_v2: f64,
    pub sigma_e2: f64,
    pub input_dist: Distribution,
}

impl SystemSpec {
    /// `z = theta u(t) + u(t-1) + v`, `y = z^3 + e`.
    pub fn cubic_example(theta: f64, sigma_v2: f64, sigma_e2: f64, input_dist: Distribution) -> Self {
        SystemSpec {
            fir: FirStructure::first_order_example(),
            theta: vec![theta],
            nonlinearity: Nonlinearity::Cubic,
            sigma_v2,
            sigma_e2,
            input_dist,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.fir.validate()?;
        self.input_dist.validate()?;
        if self.theta.len() != self.fir.n_free() {
            return Err(Error::LengthMismatch {
                what: "theta",
                expected: self.fir.n_free(),
                got: self.theta.len(),
            });
        }
        for v in [self.sigma_v2, self.sigma_e2] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::NegativeVariance(v));
            }
        }
        Ok(())
    }

    pub fn with_theta(&self, theta: &[f64]) -> Self {
        SystemSpec {
            theta: theta.to_vec(),
            ..self.clone()
        }
    }

    /// Cubic nonlinearity on the `theta u(t) + u(t-1)` structure.
    pub fn is_cubic_example(&self) -> bool {
        self.fir.is_first_order_example() && self.nonlinearity == Nonlinearity::Cubic
    }

    /// Scalar parameter, for estimators that search a single coordinate.
    pub fn scalar_theta(&self) -> Result<f64> {
        match self.theta.as_slice() {
            [t] => Ok(*t),
            _ => Err(Error::Unsupported(format!(
                "scalar parameter search needs exactly one free coefficient, got {}",
                self.theta.len()
            ))),
        }
    }
}

/// One experiment: input `u(1-L..=N)` and output `y(1..=N)`.
///
/// `history` is the number `L` of input samples that precede `t = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DataRecord {
    u: Vec<f64>,
    y: Vec<f64>,
    history: usize,
}

impl DataRecord {
    pub fn new(u: Vec<f64>, y: Vec<f64>, history: usize) -> Result<Self> {
        if u.len() != y.len() + history {
            return Err(Error::LengthMismatch {
                what: "input record",
                expected: y.len() + history,
                got: u.len(),
            });
        }
        if y.is_empty() {
            return Err(Error::InvalidArgument("data record has no outputs".into()));
        }
        Ok(DataRecord { u, y, history })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn history(&self) -> usize {
        self.history
    }

    /// Raw input buffer, starting at `t = 1 - history`.
    pub fn u(&self) -> &[f64] {
        &self.u
    }

    /// Outputs for `t = 1..=N`.
    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// `u(t - lag)` for `t = 1..=N`.
    pub fn lagged_input(&self, lag: usize) -> Result<&[f64]> {
        if lag > self.history {
            return Err(Error::LagOutOfRange {
                lag,
                history: self.history,
            });
        }
        let start = self.history - lag;
        Ok(&self.u[start..start + self.n()])
    }

    /// Writes `t,u,y` rows for `t = 1-L..=N`; `y` is empty before `t = 1`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["t", "u", "y"])?;
        let first = 1 - self.history as i64;
        for (k, &u) in self.u.iter().enumerate() {
            let t = first + k as i64;
            let y = if t >= 1 {
                self.y[(t - 1) as usize].to_string()
            } else {
                String::new()
            };
            wtr.write_record([t.to_string(), u.to_string(), y])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["t", "u", "y"] {
            return Err(Error::Parse(format!("expected header t,u,y, got {headers:?}")));
        }
        let mut u = Vec::new();
        let mut y = Vec::new();
        let mut first_t: Option<i64> = None;
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let parse = |s: &str, col: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("row {}: column {col}: {e}", row + 1)))
            };
            let t: i64 = rec[0]
                .trim()
                .parse()
                .map_err(|e| Error::Parse(format!("row {}: column t: {e}", row + 1)))?;
            let t0 = *first_t.get_or_insert(t);
            if t != t0 + row as i64 {
                return Err(Error::Parse(format!("row {}: t is not consecutive", row + 1)));
            }
            u.push(parse(&rec[1], "u")?);
            if t >= 1 {
                y.push(parse(&rec[2], "y")?);
            } else if !rec[2].trim().is_empty() {
                return Err(Error::Parse(format!("row {}: y given before t = 1", row + 1)));
            }
        }
        let t0 = first_t.ok_or_else(|| Error::Parse("empty data file".into()))?;
        if t0 > 1 {
            return Err(Error::Parse("data must start at t <= 1".into()));
        }
        DataRecord::new(u, y, (1 - t0) as usize)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

/// Noise-free `G(q, theta) u(t)` for `t = 1..=N`, where `u` holds
/// `history` samples before `t = 1`.
pub fn linear_output(fir: &FirStructure, theta: &[f64], u: &[f64], history: usize) -> Result<Vec<f64>> {
    let taps = fir.taps(theta)?;
    let max_lag = fir.max_lag();
    if max_lag > history {
        return Err(Error::LagOutOfRange {
            lag: max_lag,
            history,
        });
    }
    if u.len() <= history {
        return Err(Error::InvalidArgument("input has no samples after the history".into()));
    }
    let n = u.len() - history;
    let mut out = vec![0.0; n];
    for (lag, c) in taps {
        let src = &u[history - lag..history - lag + n];
        for (o, &x) in out.iter_mut().zip(src) {
            *o += c * x;
        }
    }
    Ok(out)
}

/// Runs the system on given input and noise sequences, returning `(z, y)`.
pub fn simulate(spec: &SystemSpec, u: &[f64], history: usize, v: &[f64], e: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let lin = linear_output(&spec.fir, &spec.theta, u, history)?;
    let n = lin.len();
    for (what, s) in [("process noise", v), ("measurement noise", e)] {
        if s.len() != n {
            return Err(Error::LengthMismatch {
                what,
                expected: n,
                got: s.len(),
            });
        }
    }
    let z: Vec<f64> = lin.iter().zip(v).map(|(a, b)| a + b).collect();
    let y = z
        .iter()
        .zip(e)
        .map(|(&zt, &et)| spec.nonlinearity.value(zt) + et)
        .collect();
    Ok((z, y))
}

/// Draws input and noises from seeded substreams and simulates `N` samples.
///
/// Returns the data record and the latent `z`.
pub fn simulate_record(spec: &SystemSpec, n: usize, seed: Seed) -> Result<(DataRecord, Vec<f64>)> {
    spec.validate()?;
    let history = spec.fir.max_lag();
    let u = gen_white(&spec.input_dist, n + history, seed.stream(StreamRole::Input))?;
    let v = gen_white(
        &Distribution::gaussian(spec.sigma_v2),
        n,
        seed.stream(StreamRole::ProcessNoise),
    )?;
    let e = gen_white(
        &Distribution::gaussian(spec.sigma_e2),
        n,
        seed.stream(StreamRole::MeasurementNoise),
    )?;
    let (z, y) = simulate(spec, &u, history, &v, &e)?;
    Ok((DataRecord::new(u, y, history)?, z))
}
