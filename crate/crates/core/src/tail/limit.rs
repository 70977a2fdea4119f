//! The limit model of the tail counterpart, limit functionals and the
//! asymptotic variance of the EKMI.

use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::km::PhiFunction;
use crate::profile::IndexProfile;
use crate::quadrature::{integrate_tail, integrate_with_breaks, QuadOptions};
use crate::seeds;
use crate::stats;

use super::covariate::{argmax_set, CovariateLaw};
use super::tables::{ConditionalLaw, GammaTables, ParetoLaw, TableOptions, TailAtom, TailLaw};
use super::TailError;

/// `X` from `covariate`, `Y | X = x` Pareto with index `gamma_f(x)` on
/// `[1, inf)`, and independent Pareto censoring with index `gamma_g`
/// (`None` means no censoring).
#[derive(Debug, Clone)]
pub struct LimitModel {
    pub covariate: CovariateLaw,
    pub gamma_f: IndexProfile,
    pub gamma_g: Option<f64>,
}

impl LimitModel {
    pub fn new(
        covariate: CovariateLaw,
        gamma_f: IndexProfile,
        gamma_g: Option<f64>,
    ) -> Result<Self, TailError> {
        if let Some(g) = gamma_g {
            if !(g > 0.0) {
                return Err(TailError::InvalidLaw(format!("gamma_G must be positive, got {g}")));
            }
        }
        Ok(Self {
            covariate,
            gamma_f,
            gamma_g,
        })
    }

    /// Largest tail index over the support of the covariate law.
    pub fn gamma_u(&self) -> f64 {
        match &self.covariate {
            CovariateLaw::Discrete { atoms, probs } => atoms
                .iter()
                .zip(probs)
                .filter(|(_, p)| **p > 0.0)
                .map(|(x, _)| self.gamma_f.eval(*x))
                .fold(f64::NEG_INFINITY, f64::max),
            law => {
                let (lo, hi) = law.support();
                argmax_set(|x| self.gamma_f.eval(x), lo, hi).max
            }
        }
    }

    fn breaks(&self, phi: &PhiFunction) -> Vec<f64> {
        let mut b = self.gamma_f.features();
        b.extend_from_slice(phi.x_breaks());
        b
    }

    /// Covariate atoms used by the variance computations (continuous laws
    /// are replaced by a composite Gauss-Legendre discretization).
    pub fn atoms(&self, phi: &PhiFunction) -> (Vec<f64>, Vec<f64>) {
        self.covariate.discretize(&self.breaks(phi), 4, 8)
    }

    pub fn tail_law(&self, phi: &PhiFunction) -> Result<TailLaw, TailError> {
        let (atoms, probs) = self.atoms(phi);
        let censoring = self
            .gamma_g
            .map(|g| Arc::new(ParetoLaw { gamma: g }) as Arc<dyn ConditionalLaw>);
        TailLaw::new(
            atoms
                .iter()
                .zip(&probs)
                .map(|(x, p)| TailAtom {
                    x: *x,
                    weight: *p,
                    response: Arc::new(ParetoLaw {
                        gamma: self.gamma_f.eval(*x),
                    }),
                    censoring: censoring.clone(),
                })
                .collect(),
        )
    }
}

/// Power `p` with `envelope(w) ~ w^p`, estimated from two far points.
pub fn envelope_exponent(phi: &PhiFunction) -> Option<f64> {
    let (w1, w2) = (1e8_f64, 1e16_f64);
    let e1 = phi.envelope(w1)?;
    let e2 = phi.envelope(w2)?;
    if !(e2 > 0.0) {
        return Some(f64::NEG_INFINITY);
    }
    if !(e1 > 0.0) {
        return Some(f64::INFINITY);
    }
    Some((e2.ln() - e1.ln()) / (w2.ln() - w1.ln()))
}

/// Outcome of the finite-moment check
/// `int envelope^(2+eps) w^alpha dw < inf`, `alpha = 1/gamma_G - 1/gamma_U - 1 + eps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentCheck {
    pub envelope_power: f64,
    pub alpha: f64,
    pub eps: f64,
    /// `(2 + eps) p + alpha`; must be below `-1`.
    pub exponent: f64,
    pub pass: bool,
}

pub fn moment_check(phi: &PhiFunction, model: &LimitModel, eps: f64) -> Result<MomentCheck, TailError> {
    let p = envelope_exponent(phi).ok_or_else(|| {
        TailError::Inadmissible(format!("{} has no envelope to check", phi.label()))
    })?;
    let inv_g = model.gamma_g.map_or(0.0, |g| 1.0 / g);
    let alpha = inv_g - 1.0 / model.gamma_u() - 1.0 + eps;
    let exponent = if p == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else {
        (2.0 + eps) * p + alpha
    };
    Ok(MomentCheck {
        envelope_power: p,
        alpha,
        eps,
        exponent,
        pass: exponent < -1.0,
    })
}

pub(crate) fn inner_opts() -> QuadOptions {
    QuadOptions {
        abs_tol: 1e-12,
        rel_tol: 1e-11,
        max_panels: 2000,
    }
}

/// `int_v^inf phi(x, w) dPareto_gamma(w)` via `w = v s^(-gamma)`.
fn pareto_upper_integral<F: Fn(f64) -> f64>(f: F, gamma: f64, v: f64, y_breaks: &[f64]) -> f64 {
    let mut pts = vec![0.0, 1.0];
    for &b in y_breaks {
        if b > v {
            pts.push((b / v).powf(-1.0 / gamma));
        }
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let mass = (-v.ln() / gamma).exp();
    mass * integrate_with_breaks(
        |s| {
            if s <= 0.0 {
                return 0.0;
            }
            let w = v * s.powf(-gamma);
            if w.is_finite() {
                f(w)
            } else {
                0.0
            }
        },
        &pts,
        &inner_opts(),
    )
    .value
}

/// `S_o(phi) = int int phi(x, w) dPareto_{gamma_F(x)}(w) dF_X^o(x)`.
pub fn limit_functional(phi: &PhiFunction, model: &LimitModel) -> Result<f64, TailError> {
    if let Some(p) = envelope_exponent(phi) {
        let gu = model.gamma_u();
        if p >= 1.0 / gu {
            return Err(TailError::Integrability(format!(
                "envelope grows like w^{p:.3}, not integrable against a tail of index {gu}"
            )));
        }
    }
    let y_breaks = phi.y_breaks().to_vec();
    let value = model.covariate.expectation(
        |x| {
            let g = model.gamma_f.eval(x);
            pareto_upper_integral(|w| phi.eval(&[x], w), g, 1.0, &y_breaks)
        },
        &model.breaks(phi),
    );
    if !value.is_finite() {
        return Err(TailError::Integrability(format!(
            "limit functional of {} is not finite",
            phi.label()
        )));
    }
    Ok(value)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VarianceMethod {
    Quadrature,
    MonteCarlo { reps: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VarianceEstimate {
    pub value: f64,
    /// Monte Carlo standard error; zero for quadrature.
    pub std_error: f64,
    pub mean_w: f64,
}

/// `Var(W_o)` for `W_o = phi gamma0 delta + gamma1 (1 - delta) - gamma2`
/// under the limit model.
pub fn asymptotic_variance_oracle(
    phi: &PhiFunction,
    model: &LimitModel,
    method: VarianceMethod,
) -> Result<VarianceEstimate, TailError> {
    let check = moment_check(phi, model, 0.01)?;
    if !check.pass {
        return Err(TailError::Inadmissible(format!(
            "finite-moment check fails for {}: (2+eps)p + alpha = {:.4} >= -1",
            phi.label(),
            check.exponent
        )));
    }
    match method {
        VarianceMethod::Quadrature => variance_by_quadrature(phi, model),
        VarianceMethod::MonteCarlo { reps, seed } => variance_by_simulation(phi, model, reps, seed),
    }
}

fn variance_by_quadrature(phi: &PhiFunction, model: &LimitModel) -> Result<VarianceEstimate, TailError> {
    let (xs, ps) = model.atoms(phi);
    let gammas: Vec<f64> = xs.iter().map(|x| model.gamma_f.eval(*x)).collect();
    let y_breaks = phi.y_breaks().to_vec();
    let opts = inner_opts();

    let mean: f64 = xs
        .iter()
        .zip(&ps)
        .zip(&gammas)
        .map(|((x, p), g)| p * pareto_upper_integral(|w| phi.eval(&[*x], w), *g, 1.0, &y_breaks))
        .sum();

    let Some(gg) = model.gamma_g else {
        let second: f64 = xs
            .iter()
            .zip(&ps)
            .zip(&gammas)
            .map(|((x, p), g)| {
                p * pareto_upper_integral(|w| phi.eval(&[*x], w).powi(2), *g, 1.0, &y_breaks)
            })
            .sum();
        return Ok(VarianceEstimate {
            value: second - mean * mean,
            std_error: 0.0,
            mean_w: mean,
        });
    };
    let rg = 1.0 / gg;
    let surv_v = |v: f64| -> f64 {
        ps.iter()
            .zip(&gammas)
            .map(|(p, g)| p * (-(1.0 / g + rg) * v.ln()).exp())
            .sum()
    };
    let big_m = |v: f64| -> f64 {
        xs.iter()
            .zip(&ps)
            .zip(&gammas)
            .map(|((x, p), g)| p * pareto_upper_integral(|w| phi.eval(&[*x], w), *g, v, &y_breaks))
            .sum()
    };
    let gamma1 = |v: f64| -> f64 {
        let s = surv_v(v);
        if s > 0.0 {
            big_m(v) / s
        } else {
            0.0
        }
    };
    let gamma2 = |y: f64| -> f64 {
        if y <= 1.0 {
            return 0.0;
        }
        let ly = y.ln();
        let mut pts = vec![0.0, ly];
        pts.extend(y_breaks.iter().filter(|b| **b > 1.0 && b.ln() < ly).map(|b| b.ln()));
        pts.sort_by(f64::total_cmp);
        rg * integrate_with_breaks(|u| gamma1(u.exp()), &pts, &opts).value
    };

    let mut second = 0.0;
    for ((x, p), g) in xs.iter().zip(&ps).zip(&gammas) {
        let x = *x;
        let g = *g;
        let f = |v: f64| (-(1.0 / g + 1.0) * v.ln()).exp() / g;
        let fbar = |v: f64| (-v.ln() / g).exp();
        let gd = |v: f64| rg * (-(rg + 1.0) * v.ln()).exp();
        let gbar = |v: f64| (-rg * v.ln()).exp();
        let decay = 1.0 / g - rg;
        let q = if decay > 0.05 { 1.0 / decay } else { g };
        let t = |h: &dyn Fn(f64) -> f64| integrate_tail(h, 1.0, q, &y_breaks, &opts).value;
        let t1 = t(&|v| phi.eval(&[x], v).powi(2) * (rg * v.ln()).exp() * f(v));
        let t2 = t(&|v| gamma1(v).powi(2) * gd(v) * fbar(v));
        let t3 = t(&|v| gamma2(v) * phi.eval(&[x], v) * f(v));
        let t4 = t(&|v| gamma2(v) * gamma1(v) * gd(v) * fbar(v));
        let t5 = t(&|v| gamma2(v).powi(2) * (f(v) * gbar(v) + fbar(v) * gd(v)));
        second += p * (t1 + t2 - 2.0 * (t3 + t4) + t5);
    }
    Ok(VarianceEstimate {
        value: second - mean * mean,
        std_error: 0.0,
        mean_w: mean,
    })
}

const MC_BLOCKS: usize = 64;

fn variance_by_simulation(
    phi: &PhiFunction,
    model: &LimitModel,
    reps: usize,
    seed: u64,
) -> Result<VarianceEstimate, TailError> {
    if reps < 2 {
        return Err(TailError::Domain("Monte Carlo needs at least two draws".into()));
    }
    let law = model.tail_law(phi)?;
    let tables = GammaTables::build(&law, phi, &TableOptions::default())?;
    let per_block = reps.div_ceil(MC_BLOCKS);
    let blocks: Vec<Vec<f64>> = (0..MC_BLOCKS)
        .into_par_iter()
        .map(|b| {
            let start = b * per_block;
            let end = ((b + 1) * per_block).min(reps);
            let mut rng = seeds::rng(seeds::derive_seed(seed, b as u64));
            (start..end)
                .map(|_| {
                    let (ua, uy, uc): (f64, f64, f64) = (rng.random(), rng.random(), rng.random());
                    // (0, 1] keeps inverse survivals finite
                    let (x, v, d) = law.sample(ua, 1.0 - uy, 1.0 - uc);
                    tables.w(phi, x, v, d)
                })
                .collect()
        })
        .collect();
    let w: Vec<f64> = blocks.into_iter().flatten().collect();
    let mean = stats::mean(&w);
    let var = stats::sample_variance(&w);
    let sq: Vec<f64> = w.iter().map(|v| (v - mean) * (v - mean)).collect();
    let se = (stats::sample_variance(&sq) / w.len() as f64).sqrt();
    Ok(VarianceEstimate {
        value: var,
        std_error: se,
        mean_w: mean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::reference_gamma_f;

    fn single(gf: f64, gg: Option<f64>) -> LimitModel {
        LimitModel::new(
            CovariateLaw::discrete(vec![0.0], vec![1.0]).unwrap(),
            IndexProfile::Constant(gf),
            gg,
        )
        .unwrap()
    }

    #[test]
    fn functional_normalization_and_means() {
        let m = single(0.5, Some(1.0));
        assert!((limit_functional(&PhiFunction::constant(1.0), &m).unwrap() - 1.0).abs() < 1e-8);
        assert!((limit_functional(&PhiFunction::log_y(), &m).unwrap() - 0.5).abs() < 1e-8);
        assert!((limit_functional(&PhiFunction::y_at_most(2.0), &m).unwrap() - 0.75).abs() < 1e-10);
        let two_point = LimitModel::new(
            CovariateLaw::discrete(vec![2.0, 4.0], vec![0.5, 0.5]).unwrap(),
            reference_gamma_f(),
            None,
        )
        .unwrap();
        let v = limit_functional(&PhiFunction::log_y(), &two_point).unwrap();
        assert!((v - reference_gamma_f().eval(2.0)).abs() < 1e-7);
        let power = PhiFunction::new("y^3", |_, y| y.powi(3)).with_envelope(|y| y.powi(3));
        assert!(matches!(
            limit_functional(&power, &m),
            Err(TailError::Integrability(_))
        ));
    }

    #[test]
    fn uncensored_bernoulli_variance() {
        let m = single(0.5, None);
        let v = asymptotic_variance_oracle(&PhiFunction::y_at_most(2.0), &m, VarianceMethod::Quadrature)
            .unwrap();
        assert!((v.value - 0.1875).abs() < 1e-9);
        let c = asymptotic_variance_oracle(&PhiFunction::constant(3.0), &m, VarianceMethod::Quadrature)
            .unwrap();
        assert!(c.value.abs() < 1e-9);
    }

    #[test]
    fn censored_quadrature_matches_tables() {
        // closed-form check of the gamma2 building block through the mean of W
        let m = single(0.5, Some(1.0));
        let q = asymptotic_variance_oracle(&PhiFunction::y_at_most(2.0), &m, VarianceMethod::Quadrature)
            .unwrap();
        let mc = asymptotic_variance_oracle(
            &PhiFunction::y_at_most(2.0),
            &m,
            VarianceMethod::MonteCarlo { reps: 200_000, seed: 11 },
        )
        .unwrap();
        assert!((q.value - mc.value).abs() < 4.0 * mc.std_error, "{q:?} {mc:?}");
        assert!((mc.mean_w - 0.75).abs() < 0.01);
    }

    #[test]
    fn moment_check_flags_heavy_envelopes() {
        let m = single(0.5, Some(1.0));
        assert!(moment_check(&PhiFunction::log_y(), &m, 0.01).unwrap().pass);
        let heavy = PhiFunction::new("y", |_, y| y).with_envelope(|y| y);
        assert!(!moment_check(&heavy, &m, 0.01).unwrap().pass);
        let bare = PhiFunction::new("bare", |_, y| y);
        assert!(asymptotic_variance_oracle(&bare, &m, VarianceMethod::Quadrature).is_err());
    }
}
