//! Seeded Monte Carlo comparison of the estimators on the first-order cubic
//! example, with TOML configs and CSV/JSON reports.

mod config;
mod output;
mod run;

pub use config::{ExperimentConfig, InputKind, DESK_ML_ORDER, DESK_ML_REALIZATIONS};
pub use output::{emit_report, read_raw, Ledger, ReportFiles, ReportFormat};
pub use run::{
    linear_baseline_std, mean_std, run_experiment, run_method, run_realization, ExperimentResult, MethodSettings,
    MethodSummary, RawRow, SeedEntry, QUOTED_LINEAR_BASELINE_STD,
};
