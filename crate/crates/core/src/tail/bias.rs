//! Second-order bias functional.

use crate::km::PhiFunction;
use crate::quadrature::integrate_with_breaks;

use super::family::{h_rho, RVFamily};
use super::limit::{inner_opts, LimitModel};
use super::TailError;

/// `C(gamma, rho)` at covariate `x`, integrated in `s = y^(-1/gamma)`:
/// `int_0^1 [x] phi_y(x, s^-gamma) h_rho(1/s) ds`.
pub fn bias_constant(
    phi: &PhiFunction,
    x: f64,
    gamma: f64,
    rho: f64,
    include_x_factor: bool,
) -> Result<f64, TailError> {
    if !phi.has_derivative() {
        return Err(TailError::MissingCapability(format!(
            "{} has no y-derivative",
            phi.label()
        )));
    }
    let factor = if include_x_factor { x } else { 1.0 };
    let mut pts = vec![0.0, 1.0];
    pts.extend(
        phi.y_breaks()
            .iter()
            .filter(|b| **b > 1.0)
            .map(|b| b.powf(-1.0 / gamma)),
    );
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let r = integrate_with_breaks(
        |s| {
            if s <= 0.0 || s >= 1.0 {
                return 0.0;
            }
            let y = s.powf(-gamma);
            if !y.is_finite() {
                return 0.0;
            }
            phi.derivative_y(&[x], y).unwrap_or(0.0) * h_rho(rho, 1.0 / s)
        },
        &pts,
        &inner_opts(),
    );
    Ok(factor * r.value)
}

/// `int lambda(x) C(gamma_F(x), rho(x)) dF_X^o(x)`.
///
/// `include_x_factor = false` drops the covariate factor in front of the
/// derivative.
pub fn second_order_bias<L: Fn(f64) -> f64>(
    phi: &PhiFunction,
    model: &LimitModel,
    family: &dyn RVFamily,
    lambda: L,
    include_x_factor: bool,
) -> Result<f64, TailError> {
    if !phi.has_derivative() {
        return Err(TailError::MissingCapability(format!(
            "{} has no y-derivative",
            phi.label()
        )));
    }
    let mut breaks = model.gamma_f.features();
    breaks.extend(family.x_features());
    breaks.extend_from_slice(phi.x_breaks());
    // derivative presence was checked above, so the inner call cannot fail
    Ok(model.covariate.expectation(
        |x| {
            let l = lambda(x);
            if l == 0.0 {
                return 0.0;
            }
            bias_constant(phi, x, model.gamma_f.eval(x), family.rho(x), include_x_factor)
                .map_or(f64::NAN, |c| l * c)
        },
        &breaks,
    ))
}
