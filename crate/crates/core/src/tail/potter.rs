//! Numerical check of uniform Potter bounds on grids.
//!
//! For the survival ratio `r = S(ty)/S(t)` the bounds are
//! `(1 - eps_c) y^(-1/gamma - eps_a) <= r <= (1 + eps_c) y^(-1/gamma + eps_a)`,
//! and for the quantile ratio `U(ty)/U(t)` the exponents are
//! `gamma -+ eps_a`. Violations are reported relative to the bound they
//! break, positive meaning violated.

use serde::Serialize;

use super::family::RVFamily;
use super::TailError;

/// Relative slack below which a violation is treated as rounding.
pub const ROUNDING_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundChain {
    Survival,
    Quantile,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ViolationPoint {
    pub chain: BoundChain,
    pub x: f64,
    pub t: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub family: String,
    pub grid: String,
    pub eps_a: f64,
    pub eps_c: f64,
    pub threshold_n: f64,
    pub points_checked: usize,
    pub max_violation: f64,
    pub location: Option<ViolationPoint>,
    pub survival_max_violation: f64,
    pub quantile_max_violation: f64,
    pub pass: bool,
}

fn describe(values: &[f64]) -> String {
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    format!("{} pts in [{lo}, {hi}]", values.len())
}

fn signed_violation(ratio: f64, lower: f64, upper: f64) -> f64 {
    let v = ((lower - ratio) / lower).max((ratio - upper) / upper);
    if v > ROUNDING_SLACK {
        v
    } else {
        v.min(0.0)
    }
}

/// Evaluates both Potter chains over `x_grid x t_grid x y_grid`.
pub fn potter_bound_report(
    family: &dyn RVFamily,
    eps_a: f64,
    eps_c: f64,
    n_threshold: f64,
    t_grid: &[f64],
    y_grid: &[f64],
    x_grid: &[f64],
) -> Result<BoundReport, TailError> {
    if t_grid.is_empty() || y_grid.is_empty() || x_grid.is_empty() {
        return Err(TailError::Domain("grids must be nonempty".into()));
    }
    if let Some(t) = t_grid.iter().find(|t| **t <= n_threshold) {
        return Err(TailError::Domain(format!(
            "t grid entry {t} does not exceed N = {n_threshold}"
        )));
    }
    if y_grid.iter().any(|y| *y < 1.0) {
        return Err(TailError::Domain("y grid must lie in [1, inf)".into()));
    }
    let mut surv_max = f64::NEG_INFINITY;
    let mut quant_max = f64::NEG_INFINITY;
    let mut worst = f64::NEG_INFINITY;
    let mut location = None;
    let mut count = 0;
    for &x in x_grid {
        let g = family.gamma(x);
        for &t in t_grid {
            let log_st = family.log_survival(x, t);
            let ut = family.tail_quantile(x, t)?;
            if !log_st.is_finite() || !(ut > 0.0) {
                return Err(TailError::Numeric(format!(
                    "nonpositive survival or quantile at x = {x}, t = {t}"
                )));
            }
            for &y in y_grid {
                count += 1;
                let ly = y.ln();
                let log_sty = family.log_survival(x, t * y);
                if !log_sty.is_finite() {
                    return Err(TailError::Numeric(format!(
                        "nonpositive survival at x = {x}, y = {}",
                        t * y
                    )));
                }
                let r = (log_sty - log_st).exp();
                let lo = (1.0 - eps_c) * (-(1.0 / g + eps_a) * ly).exp();
                let hi = (1.0 + eps_c) * ((-1.0 / g + eps_a) * ly).exp();
                let vs = signed_violation(r, lo, hi);
                let ru = family.tail_quantile(x, t * y)? / ut;
                let lo_u = (1.0 - eps_c) * ((g - eps_a) * ly).exp();
                let hi_u = (1.0 + eps_c) * ((g + eps_a) * ly).exp();
                let vq = signed_violation(ru, lo_u, hi_u);
                surv_max = surv_max.max(vs);
                quant_max = quant_max.max(vq);
                for (v, chain) in [(vs, BoundChain::Survival), (vq, BoundChain::Quantile)] {
                    if v > worst {
                        worst = v;
                        location = Some(ViolationPoint { chain, x, t, y });
                    }
                }
            }
        }
    }
    Ok(BoundReport {
        family: family.name(),
        grid: format!(
            "x: {}; t: {}; y: {}",
            describe(x_grid),
            describe(t_grid),
            describe(y_grid)
        ),
        eps_a,
        eps_c,
        threshold_n: n_threshold,
        points_checked: count,
        max_violation: worst,
        location,
        survival_max_violation: surv_max,
        quantile_max_violation: quant_max,
        pass: worst <= 0.0,
    })
}
