//! Identification of a stochastic Wiener system `y = f(G(q, θ) u + v) + e`
//! by maximum likelihood, prediction-error minimization and indirect
//! inference through the best linear approximation, plus a seeded Monte Carlo
//! harness for comparing the estimators.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod bla;
pub mod error;
pub mod indirect;
pub mod ml;
pub mod numerics;
pub mod pem;
pub mod report;
pub mod signals;
pub mod system;

pub use error::{Error, Result};
pub use report::{EstimateReport, Method, OptimizerDiagnostics};
pub use signals::{Distribution, DistributionKind, Seed};
pub use system::{DataRecord, FirStructure, Nonlinearity, SystemSpec};
