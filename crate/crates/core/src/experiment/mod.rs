//! Experiment driver: configuration, cached reference solutions, the
//! iteration-count table, the property-check battery and a convergence probe.

pub mod checks;
pub mod config;
pub mod convergence;
pub mod reference;
pub mod table;

use std::path::Path;

use thiserror::Error;

use crate::fem::FemError;
use crate::mesh::MeshError;
use crate::solvers::SolverError;

pub use checks::{run_checks, CheckOptions, CheckReport, CheckStatus};
pub use config::{ExperimentConfig, ReferenceMethod, ReferenceSpec, FINE_SCALE_LEVEL};
pub use convergence::{fem_convergence_probe, ProbeReport};
pub use reference::{compute_reference, compute_reference_in, ReferenceSolution};
pub use table::{run_table, TableResult};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

impl ExperimentError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
