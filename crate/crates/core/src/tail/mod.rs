//! Regular-variation machinery: closed-form families, Potter bounds, the
//! limit model of the tail counterpart and the quantities built on it.

use thiserror::Error;

pub mod bias;
pub mod covariate;
pub mod diagnostics;
pub mod family;
pub mod limit;
pub mod potter;
pub mod tables;

pub use covariate::{covariate_limit_distribution, CovariateLaw, Threshold};
pub use family::{karamata_components, BurrFamily, ParetoFamily, RVFamily};
pub use limit::{
    asymptotic_variance_oracle, limit_functional, LimitModel, VarianceEstimate, VarianceMethod,
};
pub use potter::{potter_bound_report, BoundReport};

#[derive(Debug, Error)]
pub enum TailError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("singularity: {0}")]
    Singular(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("invalid law: {0}")]
    InvalidLaw(String),
    #[error("normalizer underflowed; evaluate in the log domain")]
    Underflow,
    #[error("integrability error: {0}")]
    Integrability(String),
    #[error("inadmissible phi: {0}")]
    Inadmissible(String),
    #[error("missing capability: {0}")]
    MissingCapability(String),
}
