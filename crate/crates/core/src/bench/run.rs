use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::indirect::{first_order_estimate, first_order_simulated, zero_order_estimate};
use crate::ml::{ml_estimate_with, LikelihoodEvaluator, MlSettings};
use crate::numerics::OptimizerSettings;
use crate::pem::pem_estimate;
use crate::report::{EstimateReport, Method};
use crate::signals::Seed;
use crate::system::{simulate_record, DataRecord, SystemSpec};

/// The standard deviation quoted alongside the linear-case formula in the
/// reference tables; it matches `σ_u² = 1` rather than the stated `1/3`.
pub const QUOTED_LINEAR_BASELINE_STD: f64 = 0.0173;

/// Everything an estimator needs besides the data.
#[derive(Debug, Clone, Default)]
pub struct MethodSettings {
    pub optimizer: OptimizerSettings,
    pub ml: MlSettings,
    /// Simulated binding function: number of realizations and seed.
    pub simulation: Option<(usize, Seed)>,
}

/// Runs one estimator on one record.
///
/// `spec_template` supplies the structure and the known noise and input
/// variances.
pub fn run_method(method: Method, data: &DataRecord, spec_template: &SystemSpec, settings: &MethodSettings) -> Result<EstimateReport> {
    let kind = spec_template.input_dist.kind;
    let opt = &settings.optimizer;
    match method {
        Method::Ml => ml_estimate_with(&LikelihoodEvaluator::new(settings.ml)?, data, spec_template),
        Method::Pem => pem_estimate(data, spec_template, false, opt),
        Method::PemW => pem_estimate(data, spec_template, true, opt),
        Method::Ii0 => zero_order_estimate(data, spec_template, kind),
        Method::Ii1Unw => Ok(first_order_estimate(data, spec_template, kind, false, opt)?.to_estimate(method)),
        Method::Ii1W => Ok(first_order_estimate(data, spec_template, kind, true, opt)?.to_estimate(method)),
        Method::Ii1Sim => {
            let (s, seed) = settings
                .simulation
                .ok_or_else(|| Error::Config("II1_SIM needs S and a simulation seed".into()))?;
            Ok(first_order_simulated(data, spec_template, s, seed, true, opt)?.to_estimate(method))
        }
    }
}

/// One (realization, method) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRow {
    pub realization: usize,
    pub seed: Seed,
    pub method: Method,
    /// Empty when the estimator failed.
    pub theta_hat: Option<f64>,
    pub predicted_std: Option<f64>,
    /// Failure diagnostic; empty on success.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    /// Mean over successful realizations.
    pub mean: f64,
    /// Sample standard deviation with the `R - 1` divisor.
    pub std: f64,
    pub successes: usize,
    pub failures: usize,
    /// Total estimator time summed over realizations.
    pub wall_time_s: f64,
    /// Mean of the per-realization predicted standard deviations.
    pub mean_predicted_std: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedEntry {
    pub realization: usize,
    pub seed: Seed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub summaries: Vec<MethodSummary>,
    /// Sorted by (realization, method).
    pub rows: Vec<RawRow>,
    pub seeds: Vec<SeedEntry>,
    pub linear_baseline_std: f64,
    pub quoted_linear_baseline_std: f64,
}

impl ExperimentResult {
    pub fn summary(&self, method: Method) -> Option<&MethodSummary> {
        self.summaries.iter().find(|s| s.method == method)
    }

    /// Successful estimates of `method` in realization order.
    pub fn estimates(&self, method: Method) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.method == method)
            .filter_map(|r| r.theta_hat)
            .collect()
    }

    pub fn failure_rate(&self, method: Method) -> f64 {
        self.summary(method)
            .map(|s| s.failures as f64 / (s.failures + s.successes).max(1) as f64)
            .unwrap_or(0.0)
    }
}

/// `sqrt((σ_v² + σ_e²) / (σ_u² N))`, the standard deviation of the least-squares
/// estimate when `f` is the identity.
pub fn linear_baseline_std(config: &ExperimentConfig) -> f64 {
    let num = config.sigma_v2 + config.sigma_e2;
    if num == 0.0 {
        return 0.0;
    }
    (num / (config.sigma_u2 * config.n as f64)).sqrt()
}

fn method_settings(config: &ExperimentConfig, seed: Seed, ml_order: usize) -> MethodSettings {
    MethodSettings {
        optimizer: OptimizerSettings::default(),
        ml: MlSettings::with_order(ml_order),
        simulation: config.s.map(|s| (s, seed)),
    }
}

fn realization_cells(
    config: &ExperimentConfig,
    r: usize,
    evaluator: Option<&LikelihoodEvaluator>,
) -> Result<Vec<(RawRow, Duration)>> {
    let seed = config.master_seed.for_realization(r as u64);
    let spec = config.system_spec();
    let (data, _) = simulate_record(&spec, config.n, seed)?;
    let (ml_order, ml_runs) = config.ml_schedule();
    let settings = method_settings(config, seed, ml_order);

    let mut methods = config.methods.clone();
    methods.sort();
    let mut cells = Vec::with_capacity(methods.len());
    for method in methods {
        if method == Method::Ml && r >= ml_runs {
            continue;
        }
        let start = Instant::now();
        let outcome = match (method, evaluator) {
            (Method::Ml, Some(eval)) => ml_estimate_with(eval, &data, &spec),
            _ => run_method(method, &data, &spec, &settings),
        };
        let elapsed = start.elapsed();
        let outcome = outcome.and_then(|rep| {
            if rep.diagnostics.converged && !rep.diagnostics.degenerate {
                Ok(rep)
            } else {
                Err(Error::InvalidArgument(format!(
                    "optimizer did not converge (iterations {}, degenerate {})",
                    rep.diagnostics.iterations, rep.diagnostics.degenerate
                )))
            }
        });
        let row = match outcome {
            Ok(rep) => RawRow {
                realization: r,
                seed,
                method,
                theta_hat: Some(rep.scalar()),
                predicted_std: rep.predicted_std.as_ref().map(|s| s[0]),
                error: None,
            },
            Err(e) => RawRow {
                realization: r,
                seed,
                method,
                theta_hat: None,
                predicted_std: None,
                error: Some(e.to_string()),
            },
        };
        cells.push((row, elapsed));
    }
    Ok(cells)
}

/// Reruns realization `r` of `config`; the rows equal those of the full run.
pub fn run_realization(config: &ExperimentConfig, r: usize) -> Result<Vec<RawRow>> {
    config.validate()?;
    if r >= config.realizations {
        return Err(Error::InvalidArgument(format!(
            "realization {r} is outside 0..{}",
            config.realizations
        )));
    }
    Ok(realization_cells(config, r, None)?.into_iter().map(|(row, _)| row).collect())
}

/// Runs every requested method on freshly drawn data for each realization.
///
/// Estimator failures are recorded per cell and excluded from the summaries.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let evaluator = if config.methods.contains(&Method::Ml) {
        Some(LikelihoodEvaluator::new(MlSettings::with_order(config.ml_schedule().0))?)
    } else {
        None
    };

    let per_realization: Vec<Vec<(RawRow, Duration)>> = (0..config.realizations)
        .into_par_iter()
        .map(|r| realization_cells(config, r, evaluator.as_ref()))
        .collect::<Result<_>>()?;

    let mut methods = config.methods.clone();
    methods.sort();
    let mut summaries = Vec::with_capacity(methods.len());
    for &method in &methods {
        let cells: Vec<&(RawRow, Duration)> = per_realization
            .iter()
            .flatten()
            .filter(|(row, _)| row.method == method)
            .collect();
        let values: Vec<f64> = cells.iter().filter_map(|(row, _)| row.theta_hat).collect();
        let predicted: Vec<f64> = cells.iter().filter_map(|(row, _)| row.predicted_std).collect();
        let (mean, std) = mean_std(&values);
        summaries.push(MethodSummary {
            method,
            mean,
            std,
            successes: values.len(),
            failures: cells.len() - values.len(),
            wall_time_s: cells.iter().map(|(_, d)| d.as_secs_f64()).sum(),
            mean_predicted_std: (!predicted.is_empty()).then(|| predicted.iter().sum::<f64>() / predicted.len() as f64),
        });
    }

    let seeds = (0..config.realizations)
        .map(|r| SeedEntry {
            realization: r,
            seed: config.master_seed.for_realization(r as u64),
        })
        .collect();
    let rows = per_realization.into_iter().flatten().map(|(row, _)| row).collect();

    Ok(ExperimentResult {
        config: config.clone(),
        summaries,
        rows,
        seeds,
        linear_baseline_std: linear_baseline_std(config),
        quoted_linear_baseline_std: QUOTED_LINEAR_BASELINE_STD,
    })
}

/// Mean and `R - 1` standard deviation; NaN where undefined.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, f64::NAN);
    }
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}
