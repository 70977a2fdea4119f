//! Extreme Kaplan-Meier integrals: estimation of tail functionals of a
//! heavy-tailed response under random right censoring, with covariates.

// `!(x > 0.0)` style checks are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod estimators;
pub mod km;
pub mod profile;
pub mod quadrature;
pub mod sample;
pub mod seeds;
pub mod simulation;
pub mod stats;
pub mod tail;
