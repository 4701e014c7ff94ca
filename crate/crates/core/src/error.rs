use thiserror::Error;

use crate::dae_core::DaeError;
use crate::grid_model::{GridError, PartitionViolation};
use crate::newton::NewtonError;
use crate::powerflow::PowerFlowError;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid partition: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", "))]
    Partition(Vec<PartitionViolation>),
    #[error("window plan mismatch: {0}")]
    PlanMismatch(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    PowerFlow(#[from] PowerFlowError),
    #[error(transparent)]
    Dae(#[from] DaeError),
    #[error("step to t = {t:.6} s failed: {source}")]
    StepFailure { t: f64, source: NewtonError },
    #[error("waveform relaxation did not converge in {iterations} iterations (last delta {delta:e})")]
    WrDivergence { iterations: usize, delta: f64 },
    #[error("window {window} failed: {source}")]
    WindowFailure {
        window: usize,
        #[source]
        source: Box<SimError>,
    },
    #[error("time grids do not match: {0}")]
    GridMismatch(String),
}

impl SimError {
    /// True for errors raised by a solver that failed to converge.
    pub fn is_divergence(&self) -> bool {
        match self {
            Self::StepFailure { .. } | Self::WrDivergence { .. } => true,
            Self::WindowFailure { source, .. } => source.is_divergence(),
            _ => false,
        }
    }
}

pub type Result<T, E = SimError> = std::result::Result<T, E>;
