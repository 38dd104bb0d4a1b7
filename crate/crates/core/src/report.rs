use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::numerics::ScalarMinimum;

/// Estimator tags used in reports and experiment configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    /// Maximum likelihood.
    #[serde(rename = "ML")]
    Ml,
    /// Unweighted prediction-error minimization (the initializer of `PEM_W`).
    #[serde(rename = "PEM")]
    Pem,
    /// Prediction-error minimization with frozen variance weights.
    #[serde(rename = "PEM_W")]
    PemW,
    /// Indirect inference on the zero-order BLA.
    #[serde(rename = "II0")]
    Ii0,
    /// First-order BLA indirect inference, identity weighting.
    #[serde(rename = "II1_UNW")]
    Ii1Unw,
    /// First-order BLA indirect inference, sandwich weighting.
    #[serde(rename = "II1_W")]
    Ii1W,
    /// As `II1_W` with the simulated binding function.
    #[serde(rename = "II1_SIM")]
    Ii1Sim,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Ml,
        Method::Pem,
        Method::PemW,
        Method::Ii0,
        Method::Ii1Unw,
        Method::Ii1W,
        Method::Ii1Sim,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Method::Ml => "ML",
            Method::Pem => "PEM",
            Method::PemW => "PEM_W",
            Method::Ii0 => "II0",
            Method::Ii1Unw => "II1_UNW",
            Method::Ii1W => "II1_W",
            Method::Ii1Sim => "II1_SIM",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.tag().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Parse(format!("unknown method {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct OptimizerDiagnostics {
    pub iterations: usize,
    pub evaluations: usize,
    pub min_value: f64,
    pub degenerate: bool,
    pub converged: bool,
}

impl From<ScalarMinimum> for OptimizerDiagnostics {
    fn from(m: ScalarMinimum) -> Self {
        OptimizerDiagnostics {
            iterations: m.iterations,
            evaluations: m.evaluations,
            min_value: m.min_value,
            degenerate: m.degenerate,
            converged: m.converged,
        }
    }
}

/// One method's estimate on one data record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub method: Method,
    pub theta_hat: Vec<f64>,
    pub diagnostics: OptimizerDiagnostics,
    /// Predicted asymptotic standard deviation of each `theta_hat` entry.
    pub predicted_std: Option<Vec<f64>>,
}

impl EstimateReport {
    pub fn scalar(&self) -> f64 {
        self.theta_hat[0]
    }
}
