//! Recovery experiments: instance generation, metrics, file formats and
//! benchmark suites.

pub mod instance;
pub mod io;
pub mod metrics;
pub mod suite;

use std::path::PathBuf;

use thiserror::Error;

use crate::model::ModelError;
use crate::objectives::ObjectiveError;
use crate::solver::SolverError;

pub use instance::{gen_e1, instance_from_signal, E1Params, ExperimentInstance};
pub use metrics::{metric_err, metric_psnr};
pub use suite::{
    auto_reg_grid, auto_regularize, run_instance, run_suite, run_with_objective, InitialPoint, Method, RunAudit,
    RunOutcome, RunRecord, SuiteConfig, SuiteName, SUCCESS_ERR,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("instance invariant violated: {0}")]
    Instance(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}
