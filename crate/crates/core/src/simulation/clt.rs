//! Monte Carlo coverage study of EKMI confidence intervals.

use rayon::prelude::*;
use serde::Serialize;

use crate::km::{ekmi_confidence_interval, PhiFunction};
use crate::sample::sort_with_concomitants;
use crate::stats::{anderson_darling_standard_normal, median, AD_CRITICAL_1PCT};
use crate::tail::limit_functional;

use super::model::ModelConfig;
use super::SimulationError;

pub const MIN_REPLICATES: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MCReport {
    pub config: String,
    pub phi: String,
    pub n: usize,
    pub k: usize,
    pub reps: usize,
    pub level: f64,
    /// `exact_limit` or `finite_t`.
    pub center_kind: String,
    pub center: f64,
    pub seeds: Vec<u64>,
    pub thresholds: Vec<f64>,
    pub estimates: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub covered: Vec<bool>,
    pub coverage: f64,
    /// `(estimate - center) / se` for replicates with `se > 0`.
    pub standardized: Vec<f64>,
    pub anderson_darling: Option<f64>,
    pub normality_pass: Option<bool>,
}

/// Runs `reps` replicates of the model, each with a derived seed, and
/// measures how often the plug-in interval covers the center.
pub fn monte_carlo_clt(
    config: &ModelConfig,
    phi: &PhiFunction,
    k: usize,
    reps: usize,
    level: f64,
) -> Result<MCReport, SimulationError> {
    if reps < MIN_REPLICATES {
        return Err(SimulationError::TooFewReplicates {
            reps,
            min: MIN_REPLICATES,
        });
    }
    if k < 2 || k >= config.n {
        return Err(SimulationError::BadK { k, n: config.n });
    }
    let seeds: Vec<u64> = (0..reps).map(|r| config.replicate_seed(r)).collect();
    let runs: Vec<(f64, crate::km::EstimateWithCI)> = seeds
        .par_iter()
        .map(|&seed| -> Result<_, SimulationError> {
            let sample = config.sample_with_seed(config.n, seed)?;
            let sorted = sort_with_concomitants(&sample)?;
            let tail = sorted.tail(k)?;
            let ci = ekmi_confidence_interval(&tail, phi, level)?;
            Ok((tail.threshold(), ci))
        })
        .collect::<Result<_, _>>()?;
    let thresholds: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let (center_kind, center) = match config.exact_limit_model() {
        Some(model) => ("exact_limit", limit_functional(phi, &model)?),
        None => ("finite_t", config.finite_t_center(phi, median(&thresholds))?),
    };
    let mut covered = Vec::with_capacity(reps);
    let mut standardized = Vec::new();
    for (_, ci) in &runs {
        if ci.std_error > 0.0 {
            covered.push(ci.covers(center));
            standardized.push((ci.value - center) / ci.std_error);
        } else {
            // degenerate replicate: no sampling variability to cover
            covered.push(true);
        }
    }
    let coverage = covered.iter().filter(|c| **c).count() as f64 / reps as f64;
    let anderson_darling = (standardized.len() >= 8).then(|| anderson_darling_standard_normal(&standardized));
    Ok(MCReport {
        config: config.describe(),
        phi: phi.label().to_string(),
        n: config.n,
        k,
        reps,
        level,
        center_kind: center_kind.to_string(),
        center,
        seeds,
        thresholds,
        estimates: runs.iter().map(|r| r.1.value).collect(),
        std_errors: runs.iter().map(|r| r.1.std_error).collect(),
        covered,
        coverage,
        anderson_darling,
        normality_pass: anderson_darling.map(|a| a < AD_CRITICAL_1PCT),
        standardized,
    })
}
