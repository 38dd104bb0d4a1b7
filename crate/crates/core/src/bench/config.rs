use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::report::Method;
use crate::signals::{Distribution, DistributionKind, Seed};
use crate::system::SystemSpec;

/// Input distribution named in experiment configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InputKind {
    Gaussian,
    Uniform,
}

impl From<InputKind> for DistributionKind {
    fn from(k: InputKind) -> Self {
        match k {
            InputKind::Gaussian => DistributionKind::GaussianWhite,
            InputKind::Uniform => DistributionKind::UniformWhite,
        }
    }
}

/// Monte Carlo experiment on the first-order cubic example.
///
/// Stored as flat TOML with exactly these keys; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub theta_o: f64,
    pub sigma_v2: f64,
    pub sigma_e2: f64,
    pub sigma_u2: f64,
    pub input_kind: InputKind,
    #[serde(rename = "N")]
    pub n: usize,
    pub realizations: usize,
    pub methods: Vec<Method>,
    pub master_seed: Seed,
    pub ml_quad_order: usize,
    /// Process-noise realizations for the simulated binding function.
    #[serde(rename = "S", default, skip_serializing_if = "Option::is_none")]
    pub s: Option<usize>,
    /// Run ML at the reduced order on the leading realizations only.
    #[serde(default)]
    pub desk_scale: bool,
}

/// ML quadrature order and realization count under `desk_scale`.
pub const DESK_ML_ORDER: usize = 200;
pub const DESK_ML_REALIZATIONS: usize = 200;

impl ExperimentConfig {
    fn paper(input_kind: InputKind) -> Self {
        ExperimentConfig {
            theta_o: 0.5,
            sigma_v2: 0.2,
            sigma_e2: 0.1,
            sigma_u2: 1.0 / 3.0,
            input_kind,
            n: 1000,
            realizations: 1000,
            methods: vec![Method::Ml, Method::PemW, Method::Ii0, Method::Ii1Unw, Method::Ii1W],
            master_seed: Seed(20_150_101),
            ml_quad_order: 1000,
            s: None,
            desk_scale: false,
        }
    }

    /// Reference setup with gaussian input.
    pub fn paper_gaussian() -> Self {
        Self::paper(InputKind::Gaussian)
    }

    /// Reference setup with uniform input.
    pub fn paper_uniform() -> Self {
        Self::paper(InputKind::Uniform)
    }

    pub fn validate(&self) -> Result<()> {
        if self.realizations < 1 {
            return Err(Error::Config("realizations must be at least 1".into()));
        }
        if self.n < 2 {
            return Err(Error::Config("N must be at least 2".into()));
        }
        for (name, v) in [
            ("sigma_v2", self.sigma_v2),
            ("sigma_e2", self.sigma_e2),
            ("sigma_u2", self.sigma_u2),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be a finite non-negative number, got {v}")));
            }
        }
        if !self.theta_o.is_finite() {
            return Err(Error::Config("theta_o must be finite".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("methods must name at least one estimator".into()));
        }
        if self.ml_quad_order < 1 {
            return Err(Error::Config("ml_quad_order must be at least 1".into()));
        }
        if self.methods.contains(&Method::Ii1Sim) && !matches!(self.s, Some(s) if s >= 1) {
            return Err(Error::Config("II1_SIM needs S >= 1".into()));
        }
        let mut seen = self.methods.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.methods.len() {
            return Err(Error::Config("methods lists an estimator twice".into()));
        }
        Ok(())
    }

    pub fn input_distribution(&self) -> Distribution {
        match self.input_kind {
            InputKind::Gaussian => Distribution::gaussian(self.sigma_u2),
            InputKind::Uniform => Distribution::uniform(self.sigma_u2),
        }
    }

    /// The true system; also the template the estimators use for the known
    /// variances.
    pub fn system_spec(&self) -> SystemSpec {
        SystemSpec::cubic_example(self.theta_o, self.sigma_v2, self.sigma_e2, self.input_distribution())
    }

    /// ML quadrature order and the number of leading realizations that run ML.
    pub fn ml_schedule(&self) -> (usize, usize) {
        if self.desk_scale {
            (DESK_ML_ORDER.min(self.ml_quad_order), DESK_ML_REALIZATIONS.min(self.realizations))
        } else {
            (self.ml_quad_order, self.realizations)
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_toml_string())?;
        Ok(())
    }
}
