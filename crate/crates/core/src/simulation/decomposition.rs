//! Monte Carlo check of the exchangeable-sum decomposition of the EKMI.
//!
//! With the true tail-counterpart functions `gamma0, gamma1, gamma2` at a
//! fixed threshold `t`, `S(phi) = (1/k) sum W_i + r` where
//! `W = phi gamma0 delta + gamma1 (1 - delta) - gamma2`; the remainder
//! `sqrt(k) r` should vanish as `k` grows.

use rand::distr::Open01;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::km::{km_weights, PhiFunction};
use crate::sample::TailSubsample;
use crate::seeds;
use crate::stats::{mean, median, quantile_sorted};
use crate::tail::tables::{GammaTables, TableOptions};

use super::model::ModelConfig;
use super::SimulationError;

const MIN_RATE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualStats {
    pub threshold: f64,
    pub exceedance_probability: f64,
    pub k: usize,
    pub reps: usize,
    /// `sqrt(k) r` per replicate.
    pub scaled_residuals: Vec<f64>,
    pub median_abs: f64,
    pub mean_abs: f64,
    pub max_abs: f64,
    /// Mean of `S(phi)` over replicates and the tail target `E W`.
    pub mean_estimate: f64,
    pub target: f64,
}

/// Empirical `p`-quantile of `Z` from a pilot sample of size `pilot_n`.
pub fn empirical_threshold(config: &ModelConfig, p: f64, pilot_n: usize, seed: u64) -> f64 {
    let mut z: Vec<f64> = config
        .draw_raw(pilot_n, seed)
        .into_iter()
        .map(|(_, y, c)| y.min(c))
        .collect();
    z.sort_by(f64::total_cmp);
    quantile_sorted(&z, p)
}

/// Draws `k` triples from the law of `(X, Y/t, C/t)` given `Z > t` by
/// rejection from the unconditional model.
fn conditional_triples(
    config: &ModelConfig,
    t: f64,
    k: usize,
    seed: u64,
) -> Vec<(f64, f64, bool)> {
    let mut rng = seeds::rng(seed);
    let mut out = Vec::with_capacity(k);
    while out.len() < k {
        let (x, y) = config.draw_response(rng.sample(Open01), rng.sample(Open01));
        if y <= t {
            continue;
        }
        let c = config.draw_censoring(x, rng.sample(Open01), rng.sample(Open01));
        if c <= t {
            continue;
        }
        out.push((x, y.min(c) / t, y <= c));
    }
    out
}

pub fn decomposition_residual_check(
    config: &ModelConfig,
    phi: &PhiFunction,
    t: f64,
    k: usize,
    reps: usize,
    seed: u64,
) -> Result<ResidualStats, SimulationError> {
    if k < 2 {
        return Err(SimulationError::BadK { k, n: usize::MAX });
    }
    if reps == 0 {
        return Err(SimulationError::TooFewReplicates { reps, min: 1 });
    }
    let rate = config
        .covariate
        .expectation(|x| config.log_survival_z(x, t).exp(), &[]);
    if !(rate >= MIN_RATE) {
        return Err(SimulationError::InfeasibleThreshold { rate });
    }
    let law = config.tail_law_at(t, phi)?;
    let tables = GammaTables::build(&law, phi, &TableOptions::default())?;
    let runs: Vec<(f64, f64)> = (0..reps)
        .into_par_iter()
        .map(|r| -> Result<(f64, f64), SimulationError> {
            let mut triples = conditional_triples(config, t, k, seeds::derive_seed(seed, r as u64));
            // descending in v; at ties censored first, mirroring the ascending order
            triples.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.2.cmp(&b.2)));
            let tail = TailSubsample::from_parts(
                t,
                triples.iter().map(|p| p.1).collect(),
                triples.iter().map(|p| p.2).collect(),
                triples.iter().map(|p| p.0).collect(),
                1,
            )?;
            let m = km_weights(&tail);
            let kf = k as f64;
            // both sums carry the common factor 1/k, applied once
            let mut residual = 0.0;
            let mut estimate = 0.0;
            for (i, (x, v, d)) in triples.iter().enumerate() {
                let mi = m.multipliers()[i];
                let term = if mi == 0.0 { 0.0 } else { mi * phi.eval(&[*x], *v) };
                estimate += term;
                residual += term - tables.w(phi, *x, *v, *d);
            }
            let (residual, estimate) = (residual / kf, estimate / kf);
            Ok(((k as f64).sqrt() * residual, estimate))
        })
        .collect::<Result<_, _>>()?;
    let scaled: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let abs: Vec<f64> = scaled.iter().map(|v| v.abs()).collect();
    Ok(ResidualStats {
        threshold: t,
        exceedance_probability: rate,
        k,
        reps,
        median_abs: median(&abs),
        mean_abs: mean(&abs),
        max_abs: abs.iter().cloned().fold(0.0, f64::max),
        mean_estimate: mean(&runs.iter().map(|r| r.1).collect::<Vec<_>>()),
        target: tables.target(),
        scaled_residuals: scaled,
    })
}
