//! Families of conditional response laws with regularly varying tails,
//! indexed by a scalar covariate.

use crate::profile::IndexProfile;

use super::TailError;

/// A conditional law `Y | X = x` with survival `L(x, y) y^(-1/gamma(x))`.
///
/// Karamata conventions: `survival = c(x, y) exp(-int_1^y delta(x, s)/s ds)`
/// with `delta(x, y) -> 1/gamma(x)`; `eta_x` drives the normalized tail
/// quantile `U(t) = U(T) exp(int_T^t eta_x(u)/u du)`.
pub trait RVFamily: Send + Sync {
    fn name(&self) -> String;

    fn gamma(&self, x: f64) -> f64;

    /// `log P(Y > y | X = x)`, accurate far into the tail.
    fn log_survival(&self, x: f64, y: f64) -> f64;

    fn survival(&self, x: f64, y: f64) -> f64 {
        self.log_survival(x, y).exp()
    }

    fn density(&self, x: f64, y: f64) -> f64;

    /// `U(t) = inf{y : F(y) >= 1 - 1/t}`, `t > 1`.
    fn tail_quantile(&self, x: f64, t: f64) -> Result<f64, TailError>;

    fn karamata_c(&self, x: f64, y: f64) -> f64;

    fn karamata_delta(&self, x: f64, y: f64) -> f64;

    fn eta(&self, x: f64, u: f64) -> Result<f64, TailError>;

    /// `1 - eta_x(u) / gamma(x)`, evaluated without cancellation where the
    /// family allows it.
    fn eta_relative_gap(&self, x: f64, u: f64) -> Result<f64, TailError> {
        Ok(1.0 - self.eta(x, u)? / self.gamma(x))
    }

    fn second_order_a(&self, x: f64, t: f64) -> f64;

    fn rho(&self, x: f64) -> f64;

    /// `log L(x, y) = log survival + log(y) / gamma(x)`.
    fn log_slowly_varying(&self, x: f64, y: f64) -> f64 {
        self.log_survival(x, y) + y.ln() / self.gamma(x)
    }

    /// Covariate locations where `gamma` varies fast.
    fn x_features(&self) -> Vec<f64> {
        Vec::new()
    }
}

fn check_t(t: f64) -> Result<(), TailError> {
    if t > 1.0 && t.is_finite() || t == f64::INFINITY {
        Ok(())
    } else {
        Err(TailError::Domain(format!("tail quantile needs t > 1, got {t}")))
    }
}

/// Burr distribution function `1 - (1 + y^tau)^(-kappa)`.
pub fn burr_cdf(kappa: f64, tau: f64, y: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    -(-kappa * (y.powf(tau)).ln_1p()).exp_m1()
}

/// Burr tail quantile `(t^(1/kappa) - 1)^(1/tau)`.
pub fn burr_tail_quantile(kappa: f64, tau: f64, t: f64) -> Result<f64, TailError> {
    check_t(t)?;
    Ok((t.ln() / kappa).exp_m1().powf(1.0 / tau))
}

fn burr_log_survival(kappa: f64, tau: f64, y: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    let ly = y.ln();
    if ly > 0.0 {
        -kappa * (tau * ly + (-tau * ly).exp().ln_1p())
    } else {
        -kappa * (tau * ly).exp().ln_1p()
    }
}

/// Burr family with covariate-dependent shapes `kappa(x)`, `tau(x)`;
/// `gamma(x) = 1 / (kappa(x) tau(x))`.
#[derive(Debug, Clone, PartialEq)]
pub struct BurrFamily {
    pub kappa: IndexProfile,
    pub tau: IndexProfile,
}

impl BurrFamily {
    pub fn new(kappa: IndexProfile, tau: IndexProfile) -> Self {
        Self { kappa, tau }
    }

    /// `kappa = 1`, `tau = 1 / gamma_F` for a target tail-index profile.
    pub fn with_tail_index(gamma_f: IndexProfile) -> Self {
        Self {
            kappa: IndexProfile::Constant(1.0),
            tau: IndexProfile::Reciprocal(Box::new(gamma_f)),
        }
    }

    fn shapes(&self, x: f64) -> (f64, f64) {
        (self.kappa.eval(x), self.tau.eval(x))
    }
}

impl RVFamily for BurrFamily {
    fn name(&self) -> String {
        format!("burr(kappa={}, tau={})", self.kappa, self.tau)
    }

    fn gamma(&self, x: f64) -> f64 {
        let (k, t) = self.shapes(x);
        1.0 / (k * t)
    }

    fn log_survival(&self, x: f64, y: f64) -> f64 {
        let (k, t) = self.shapes(x);
        burr_log_survival(k, t, y)
    }

    fn density(&self, x: f64, y: f64) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        let (k, t) = self.shapes(x);
        let ly = y.ln();
        // kappa tau y^(tau-1) (1 + y^tau)^(-kappa-1)
        let log_one_plus = if ly > 0.0 {
            t * ly + (-t * ly).exp().ln_1p()
        } else {
            (t * ly).exp().ln_1p()
        };
        ((k * t).ln() + (t - 1.0) * ly - (k + 1.0) * log_one_plus).exp()
    }

    fn tail_quantile(&self, x: f64, t: f64) -> Result<f64, TailError> {
        let (k, tau) = self.shapes(x);
        burr_tail_quantile(k, tau, t)
    }

    fn karamata_c(&self, x: f64, _y: f64) -> f64 {
        let (k, _) = self.shapes(x);
        (-std::f64::consts::LN_2 * k).exp()
    }

    fn karamata_delta(&self, x: f64, u: f64) -> f64 {
        let (k, t) = self.shapes(x);
        // kappa tau u^tau / (1 + u^tau) = kappa tau / (1 + u^-tau)
        k * t / (1.0 + u.powf(-t))
    }

    fn eta(&self, x: f64, u: f64) -> Result<f64, TailError> {
        let (k, t) = self.shapes(x);
        let b = 1.0 / k;
        let denom = (b * u.ln()).exp_m1();
        if !(denom > 0.0) {
            return Err(TailError::Singular(format!(
                "eta needs u^(1/kappa) > 1, got u = {u}"
            )));
        }
        Ok(u.powf(b) / (k * t * denom))
    }

    fn eta_relative_gap(&self, x: f64, u: f64) -> Result<f64, TailError> {
        // 1 - u^b/(u^b - 1) = -1/(u^b - 1)
        let (k, _) = self.shapes(x);
        let denom = (u.ln() / k).exp_m1();
        if !(denom > 0.0) {
            return Err(TailError::Singular(format!(
                "eta needs u^(1/kappa) > 1, got u = {u}"
            )));
        }
        Ok(-1.0 / denom)
    }

    fn second_order_a(&self, x: f64, t: f64) -> f64 {
        let (k, tau) = self.shapes(x);
        let tb = (t.ln() / k).exp();
        let rho = -1.0 / k;
        rho * (1.0 - (tb / (tb - 1.0)).powf(1.0 / tau))
    }

    fn rho(&self, x: f64) -> f64 {
        -1.0 / self.kappa.eval(x)
    }

    fn log_slowly_varying(&self, x: f64, y: f64) -> f64 {
        // (1 + y^-tau)^-kappa
        let (k, t) = self.shapes(x);
        -k * (-t * y.ln()).exp().ln_1p()
    }

    fn x_features(&self) -> Vec<f64> {
        let mut f = self.kappa.features();
        f.extend(self.tau.features());
        f.sort_by(f64::total_cmp);
        f.dedup();
        f
    }
}

/// Exact Pareto law on `[1, inf)`: survival `y^(-1/gamma(x))`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParetoFamily {
    pub gamma: IndexProfile,
}

impl ParetoFamily {
    pub fn new(gamma: IndexProfile) -> Self {
        Self { gamma }
    }
}

impl RVFamily for ParetoFamily {
    fn name(&self) -> String {
        format!("pareto(gamma={})", self.gamma)
    }

    fn gamma(&self, x: f64) -> f64 {
        self.gamma.eval(x)
    }

    fn log_survival(&self, x: f64, y: f64) -> f64 {
        if y <= 1.0 {
            0.0
        } else {
            -y.ln() / self.gamma(x)
        }
    }

    fn density(&self, x: f64, y: f64) -> f64 {
        if y < 1.0 {
            return 0.0;
        }
        let g = self.gamma(x);
        (-(1.0 / g + 1.0) * y.ln()).exp() / g
    }

    fn tail_quantile(&self, x: f64, t: f64) -> Result<f64, TailError> {
        check_t(t)?;
        Ok(t.powf(self.gamma(x)))
    }

    fn karamata_c(&self, _x: f64, _y: f64) -> f64 {
        1.0
    }

    fn karamata_delta(&self, x: f64, _y: f64) -> f64 {
        1.0 / self.gamma(x)
    }

    fn eta(&self, x: f64, _u: f64) -> Result<f64, TailError> {
        Ok(self.gamma(x))
    }

    fn eta_relative_gap(&self, _x: f64, _u: f64) -> Result<f64, TailError> {
        Ok(0.0)
    }

    fn second_order_a(&self, _x: f64, _t: f64) -> f64 {
        0.0
    }

    fn rho(&self, _x: f64) -> f64 {
        f64::NEG_INFINITY
    }

    fn log_slowly_varying(&self, x: f64, y: f64) -> f64 {
        if y >= 1.0 {
            0.0
        } else {
            y.ln() / self.gamma(x)
        }
    }

    fn x_features(&self) -> Vec<f64> {
        self.gamma.features()
    }
}

/// Karamata components `(c, delta, eta, a)` and `rho` at one point.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct KaramataComponents {
    pub c: f64,
    pub delta: f64,
    pub eta: f64,
    pub a: f64,
    pub rho: f64,
}

/// Evaluates the components at covariate `x`; `y` feeds `c` and `delta`,
/// `u` feeds `eta` and `t` feeds `a`.
pub fn karamata_components(
    family: &dyn RVFamily,
    x: f64,
    y: f64,
    u: f64,
    t: f64,
) -> Result<KaramataComponents, TailError> {
    Ok(KaramataComponents {
        c: family.karamata_c(x, y),
        delta: family.karamata_delta(x, y),
        eta: family.eta(x, u)?,
        a: family.second_order_a(x, t),
        rho: family.rho(x),
    })
}

/// `h_rho(y) = log y` for `rho = 0`, `(y^rho - 1)/rho` otherwise (and `0`
/// in the limit `rho = -inf`).
pub fn h_rho(rho: f64, y: f64) -> f64 {
    if rho == 0.0 {
        y.ln()
    } else if rho == f64::NEG_INFINITY {
        if y > 1.0 {
            0.0
        } else {
            f64::NAN
        }
    } else {
        (rho * y.ln()).exp_m1() / rho
    }
}
