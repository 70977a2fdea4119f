//! Simulation models and Monte Carlo studies.

use thiserror::Error;

use crate::km::KmError;
use crate::sample::SampleError;
use crate::tail::TailError;

pub mod clt;
pub mod decomposition;
pub mod model;

pub use clt::{monte_carlo_clt, MCReport};
pub use decomposition::{decomposition_residual_check, empirical_threshold, ResidualStats};
pub use model::{gamma_profiles, CensoringLaw, ModelConfig, ResponseLaw};

#[derive(Debug, Error)]
pub enum SimulationError {
    #[error("config: {0}")]
    Config(String),
    #[error("{reps} replicates requested, need at least {min}")]
    TooFewReplicates { reps: usize, min: usize },
    #[error("k = {k} must satisfy 2 <= k < n = {n}")]
    BadK { k: usize, n: usize },
    #[error("threshold exceedance probability {rate:.3e} is below 1e-6")]
    InfeasibleThreshold { rate: f64 },
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error(transparent)]
    Km(#[from] KmError),
    #[error(transparent)]
    Tail(#[from] TailError),
}

/// Draws a sample from the model with its own seed.
pub fn sample_model(config: &ModelConfig) -> Result<crate::sample::CensoredSample, SimulationError> {
    config.sample_with_seed(config.n, config.seed)
}
