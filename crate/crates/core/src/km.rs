//! Product-limit weights on the tail subsample and the extreme Kaplan-Meier
//! integral `S(phi) = sum_i w_i phi(X*_i, V*_i)`, with plug-in inference.
//!
//! Indexing follows [`TailSubsample`]: position `i` (0-based) holds the
//! `(i+1)`-th largest observation, so its rank from the top is `r = i + 1`.
//! Left limits of the empirical tail distribution are taken as
//! `1 - H_k(V*_r -) = r / k`.

use std::sync::Arc;

use thiserror::Error;

use crate::sample::TailSubsample;
use crate::stats;

#[derive(Debug, Error)]
pub enum KmError {
    #[error("phi is not finite at tail index {index} (value {value})")]
    NonFinite { index: usize, value: f64 },
    #[error("need k >= {min}, got {k}")]
    TooSmall { k: usize, min: usize },
    #[error("confidence level must lie in (0, 1), got {0}")]
    InvalidLevel(f64),
    #[error("evaluation point y must be >= {min}, got {y}")]
    InvalidPoint { y: f64, min: f64 },
}

type Eval = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;
type Envelope = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A test function `phi(x, y)` on covariates and rescaled responses,
/// optionally with an envelope `|phi(x, y)| <= env(y)`, a partial
/// derivative in `y`, and known jump locations in `y` for quadrature.
#[derive(Clone)]
pub struct PhiFunction {
    label: String,
    eval: Eval,
    envelope: Option<Envelope>,
    derivative_y: Option<Eval>,
    y_breaks: Vec<f64>,
    x_breaks: Vec<f64>,
}

impl std::fmt::Debug for PhiFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PhiFunction")
            .field("label", &self.label)
            .field("envelope", &self.envelope.is_some())
            .field("derivative_y", &self.derivative_y.is_some())
            .field("y_breaks", &self.y_breaks)
            .field("x_breaks", &self.x_breaks)
            .finish()
    }
}

impl PhiFunction {
    pub fn new<F>(label: impl Into<String>, f: F) -> Self
    where
        F: Fn(&[f64], f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            label: label.into(),
            eval: Arc::new(f),
            envelope: None,
            derivative_y: None,
            y_breaks: Vec::new(),
            x_breaks: Vec::new(),
        }
    }

    pub fn with_envelope<F>(mut self, env: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        self.envelope = Some(Arc::new(env));
        self
    }

    pub fn with_derivative<F>(mut self, d: F) -> Self
    where
        F: Fn(&[f64], f64) -> f64 + Send + Sync + 'static,
    {
        self.derivative_y = Some(Arc::new(d));
        self
    }

    pub fn with_y_breaks(mut self, breaks: Vec<f64>) -> Self {
        self.y_breaks = breaks;
        self
    }

    /// Jump locations in the first covariate coordinate.
    pub fn with_x_breaks(mut self, breaks: Vec<f64>) -> Self {
        self.x_breaks = breaks;
        self
    }

    /// `phi == c`.
    pub fn constant(c: f64) -> Self {
        Self::new(format!("const({c})"), move |_, _| c)
            .with_envelope(move |_| c.abs())
            .with_derivative(|_, _| 0.0)
    }

    /// `phi(x, y) = log y`.
    pub fn log_y() -> Self {
        Self::new("log(y)", |_, y| y.ln())
            .with_envelope(|y| y.max(1.0).ln())
            .with_derivative(|_, y| 1.0 / y)
    }

    /// `phi(x, y) = 1{y <= c}`.
    pub fn y_at_most(c: f64) -> Self {
        Self::new(format!("1{{y<={c}}}"), move |_, y| if y <= c { 1.0 } else { 0.0 })
            .with_envelope(|_| 1.0)
            .with_derivative(|_, _| 0.0)
            .with_y_breaks(vec![c])
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    #[inline]
    pub fn eval(&self, x: &[f64], y: f64) -> f64 {
        (self.eval)(x, y)
    }

    pub fn envelope(&self, y: f64) -> Option<f64> {
        self.envelope.as_ref().map(|e| e(y))
    }

    pub fn has_envelope(&self) -> bool {
        self.envelope.is_some()
    }

    pub fn derivative_y(&self, x: &[f64], y: f64) -> Option<f64> {
        self.derivative_y.as_ref().map(|d| d(x, y))
    }

    pub fn has_derivative(&self) -> bool {
        self.derivative_y.is_some()
    }

    pub fn y_breaks(&self) -> &[f64] {
        &self.y_breaks
    }

    pub fn x_breaks(&self) -> &[f64] {
        &self.x_breaks
    }

    /// Checks `|phi(x, y)| <= envelope(y)` at the given points; `true` when
    /// no envelope is attached.
    pub fn envelope_holds_at(&self, points: &[(Vec<f64>, f64)]) -> bool {
        match &self.envelope {
            None => true,
            Some(env) => points
                .iter()
                .all(|(x, y)| self.eval(x, *y).abs() <= env(*y) * (1.0 + 1e-12) + 1e-300),
        }
    }
}

/// Product-limit weights `W_ik`, `i = 0` for the largest observation.
///
/// Kept alongside the multipliers `k W_ik`, so sums can be divided by `k`
/// once at the end.
#[derive(Debug, Clone, PartialEq)]
pub struct KMWeights {
    w: Vec<f64>,
    m: Vec<f64>,
}

impl KMWeights {
    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }

    /// `k W_ik`; exactly `delta_i` when nothing below rank `i` is censored.
    pub fn multipliers(&self) -> &[f64] {
        &self.m
    }

    pub fn total(&self) -> f64 {
        self.m.iter().sum::<f64>() / self.m.len() as f64
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }
}

/// Point estimate with a symmetric normal-approximation interval.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct EstimateWithCI {
    pub value: f64,
    pub std_error: f64,
    pub level: f64,
    pub lower: f64,
    pub upper: f64,
}

impl EstimateWithCI {
    pub fn new(value: f64, std_error: f64, level: f64) -> Result<Self, KmError> {
        check_level(level)?;
        let half = stats::two_sided_quantile(level) * std_error;
        Ok(Self {
            value,
            std_error,
            level,
            lower: value - half,
            upper: value + half,
        })
    }

    pub fn covers(&self, target: f64) -> bool {
        self.lower <= target && target <= self.upper
    }
}

fn check_level(level: f64) -> Result<(), KmError> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(KmError::InvalidLevel(level))
    }
}

/// `W_ik = (delta_i / i) * prod_{j > i} ((j - 1) / j)^{delta_j}`.
///
/// The product telescopes over the uncensored ranks, leaving
/// `W_ik = (delta_i / k) * prod_{j > i, delta_j = 0} j / (j - 1)`, which is
/// accumulated as a log-sum from the bottom of the tail. Uncensored samples
/// get exactly `1/k`.
pub fn km_weights(tail: &TailSubsample) -> KMWeights {
    let delta = tail.delta();
    let k = delta.len();
    let mut m = vec![0.0; k];
    let mut log_prod = 0.0_f64;
    for i in (0..k).rev() {
        let rank = (i + 1) as f64;
        if delta[i] {
            m[i] = if log_prod == 0.0 { 1.0 } else { log_prod.exp() };
        } else if i > 0 {
            log_prod += (rank / (rank - 1.0)).ln();
        }
    }
    let kf = k as f64;
    let w = m.iter().map(|mi| mi / kf).collect();
    KMWeights { w, m }
}

/// EKMI distribution function at `(x, y)`; coordinates of `x` may be
/// `+inf`.
pub fn ekmi_cdf(tail: &TailSubsample, weights: &KMWeights, x: &[f64], y: f64) -> f64 {
    let v = tail.v();
    let mass: f64 = weights
        .multipliers()
        .iter()
        .enumerate()
        .filter(|&(i, _)| v[i] <= y && tail.x(i).iter().zip(x).all(|(xi, bound)| xi <= bound))
        .map(|(_, m)| m)
        .sum();
    mass / weights.len() as f64
}

fn phi_values(tail: &TailSubsample, phi: &PhiFunction) -> Result<Vec<f64>, KmError> {
    let v = tail.v();
    (0..tail.k())
        .map(|i| {
            let value = phi.eval(tail.x(i), v[i]);
            if value.is_finite() {
                Ok(value)
            } else {
                Err(KmError::NonFinite { index: i, value })
            }
        })
        .collect()
}

/// `S_{k,n}(phi) = sum_i W_ik phi(X*_i, V*_i)`.
pub fn ekmi_integral(
    tail: &TailSubsample,
    weights: &KMWeights,
    phi: &PhiFunction,
) -> Result<f64, KmError> {
    let values = phi_values(tail, phi)?;
    let sum: f64 = weights
        .multipliers()
        .iter()
        .zip(&values)
        .filter(|(m, _)| **m != 0.0)
        .map(|(m, f)| m * f)
        .sum();
    Ok(sum / weights.len() as f64)
}

/// Values of the empirical `(gamma0, gamma1, gamma2)` at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaValues {
    pub gamma0: f64,
    pub gamma1: f64,
    pub gamma2: f64,
}

/// Rank-indexed building blocks shared by the gamma functions.
struct GammaTerms {
    k: usize,
    /// `phi * gamma0 * delta` per rank.
    a: Vec<f64>,
    /// `prefix[m] = sum_{r <= m} a_r`.
    prefix: Vec<f64>,
    /// `t[m] = sum_{l > m, censored} 1 / l^2`.
    t: Vec<f64>,
    /// `tail_at[m] = sum_{j > m} a_j t[j]`.
    tail_at: Vec<f64>,
    /// `log_g0[m] = sum_{l > m, censored} log(l / (l - 1))`.
    log_g0: Vec<f64>,
}

impl GammaTerms {
    fn new(tail: &TailSubsample, phi: &[f64]) -> Self {
        let delta = tail.delta();
        let k = delta.len();
        let mut log_g0 = vec![0.0; k + 1];
        let mut t = vec![0.0; k + 1];
        for m in (0..k).rev() {
            let l = (m + 1) as f64;
            let censored = !delta[m];
            log_g0[m] = log_g0[m + 1]
                + if censored {
                    if m == 0 {
                        f64::INFINITY
                    } else {
                        (l / (l - 1.0)).ln()
                    }
                } else {
                    0.0
                };
            t[m] = t[m + 1] + if censored { 1.0 / (l * l) } else { 0.0 };
        }
        // rank r = m + 1 sees censored points strictly below it: log_g0[r]
        let a: Vec<f64> = (0..k)
            .map(|m| {
                if delta[m] {
                    phi[m] * log_g0[m + 1].exp()
                } else {
                    0.0
                }
            })
            .collect();
        let mut prefix = vec![0.0; k + 1];
        for m in 0..k {
            prefix[m + 1] = prefix[m] + a[m];
        }
        let mut tail_at = vec![0.0; k + 1];
        for m in (0..k).rev() {
            // j = m + 1
            tail_at[m] = tail_at[m + 1] + a[m] * t[m + 1];
        }
        Self {
            k,
            a,
            prefix,
            t,
            tail_at,
            log_g0,
        }
    }

    /// `above` = #{V_j > y}, `at_or_above` = #{V_j >= y}.
    fn at(&self, above: usize, at_or_above: usize) -> GammaValues {
        let gamma0 = self.log_g0[at_or_above].exp();
        let gamma1 = if above == 0 {
            0.0
        } else {
            self.prefix[above] / above as f64
        };
        let p = at_or_above;
        let gamma2 = self.t[p] * self.prefix[p] + self.tail_at[p];
        GammaValues {
            gamma0,
            gamma1,
            gamma2,
        }
    }
}

/// Empirical `gamma0`, `gamma1`, `gamma2` of the tail subsample at `y >= 1`.
pub fn empirical_gamma_functions(
    tail: &TailSubsample,
    phi: &PhiFunction,
    y: f64,
) -> Result<GammaValues, KmError> {
    if !(y >= 1.0) {
        return Err(KmError::InvalidPoint { y, min: 1.0 });
    }
    let values = phi_values(tail, phi)?;
    let terms = GammaTerms::new(tail, &values);
    let v = tail.v();
    let above = v.partition_point(|&vi| vi > y);
    let at_or_above = v.partition_point(|&vi| vi >= y);
    Ok(terms.at(above, at_or_above))
}

/// The exchangeable-sum summands
/// `W_i = phi_i gamma0(V_i) delta_i + gamma1(V_i)(1 - delta_i) - gamma2(V_i)`
/// with ties resolved by rank.
pub fn plug_in_terms(tail: &TailSubsample, phi: &PhiFunction) -> Result<Vec<f64>, KmError> {
    let values = phi_values(tail, phi)?;
    let terms = GammaTerms::new(tail, &values);
    let delta = tail.delta();
    Ok((0..terms.k)
        .map(|m| {
            let g = terms.at(m, m + 1);
            let first = terms.a[m];
            let second = if delta[m] { 0.0 } else { g.gamma1 };
            first + second - g.gamma2
        })
        .collect())
}

/// Sample variance (denominator `k - 1`) of the plug-in summands.
pub fn plug_in_variance(tail: &TailSubsample, phi: &PhiFunction) -> Result<f64, KmError> {
    if tail.k() < 2 {
        return Err(KmError::TooSmall { k: tail.k(), min: 2 });
    }
    let w = plug_in_terms(tail, phi)?;
    Ok(stats::sample_variance(&w).max(0.0))
}

/// `S(phi) +- q(level) * sqrt(sigma^2 / k)`.
pub fn ekmi_confidence_interval(
    tail: &TailSubsample,
    phi: &PhiFunction,
    level: f64,
) -> Result<EstimateWithCI, KmError> {
    check_level(level)?;
    if tail.k() < 2 {
        return Err(KmError::TooSmall { k: tail.k(), min: 2 });
    }
    let weights = km_weights(tail);
    let value = ekmi_integral(tail, &weights, phi)?;
    let variance = plug_in_variance(tail, phi)?;
    EstimateWithCI::new(value, (variance / tail.k() as f64).sqrt(), level)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tail(v: &[f64], d: &[u8]) -> TailSubsample {
        TailSubsample::from_parts(
            1.0,
            v.to_vec(),
            d.iter().map(|&d| d == 1).collect(),
            vec![0.0; v.len()],
            1,
        )
        .unwrap()
    }

    #[test]
    fn weights_small_cases() {
        let w = km_weights(&tail(&[8.0, 4.0, 2.0], &[1, 1, 1]));
        for wi in w.as_slice() {
            assert!((wi - 1.0 / 3.0).abs() < 1e-15);
        }
        let w = km_weights(&tail(&[8.0, 4.0, 2.0], &[1, 0, 1]));
        let expect = [2.0 / 3.0, 0.0, 1.0 / 3.0];
        for (a, b) in w.as_slice().iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((w.total() - 1.0).abs() < 1e-15);
        let w = km_weights(&tail(&[8.0, 4.0, 2.0], &[0, 1, 1]));
        let expect = [0.0, 1.0 / 3.0, 1.0 / 3.0];
        for (a, b) in w.as_slice().iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn cdf_and_integral_hand_values() {
        let t = tail(&[8.0, 4.0, 2.0], &[1, 0, 1]);
        let w = km_weights(&t);
        let inf = [f64::INFINITY];
        assert!((ekmi_cdf(&t, &w, &inf, 5.0) - 1.0 / 3.0).abs() < 1e-15);
        assert!((ekmi_cdf(&t, &w, &inf, f64::INFINITY) - 1.0).abs() < 1e-15);
        let s = ekmi_integral(&t, &w, &PhiFunction::log_y()).unwrap();
        assert!((s - 7.0 / 3.0 * 2f64.ln()).abs() < 1e-14);
        assert!((s - 1.61734).abs() < 1e-5);
        let one = ekmi_integral(&t, &w, &PhiFunction::constant(1.0)).unwrap();
        assert!((one - w.total()).abs() < 1e-15);
    }

    #[test]
    fn uncensored_cdf_is_empirical() {
        let t = tail(&[5.0, 3.0, 2.0, 1.5], &[1, 1, 1, 1]);
        let w = km_weights(&t);
        assert!((ekmi_cdf(&t, &w, &[f64::INFINITY], 2.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn non_finite_phi_names_index() {
        let t = tail(&[8.0, 4.0, 2.0], &[1, 0, 1]);
        let w = km_weights(&t);
        let phi = PhiFunction::new("bad", |_, y| if y == 4.0 { f64::NAN } else { 1.0 });
        assert!(matches!(
            ekmi_integral(&t, &w, &phi),
            Err(KmError::NonFinite { index: 1, .. })
        ));
    }

    #[test]
    fn gamma_functions_small_case() {
        let t = tail(&[8.0, 4.0, 2.0], &[1, 0, 1]);
        let g = empirical_gamma_functions(&t, &PhiFunction::log_y(), 8.0).unwrap();
        assert!((g.gamma0 - 2.0).abs() < 1e-14);
        // below every censored value: no inner mass
        let g = empirical_gamma_functions(&t, &PhiFunction::log_y(), 3.0).unwrap();
        assert_eq!(g.gamma2, 0.0);
        assert_eq!(g.gamma0, 1.0);
        // uncensored sample
        let t = tail(&[8.0, 4.0, 2.0], &[1, 1, 1]);
        for y in [1.0, 2.5, 9.0] {
            let g = empirical_gamma_functions(&t, &PhiFunction::log_y(), y).unwrap();
            assert_eq!(g.gamma0, 1.0);
            assert_eq!(g.gamma2, 0.0);
        }
        assert!(empirical_gamma_functions(&t, &PhiFunction::log_y(), 0.5).is_err());
    }

    #[test]
    fn gamma1_empty_upper_set_is_zero() {
        let t = tail(&[8.0, 4.0, 2.0], &[1, 0, 1]);
        let g = empirical_gamma_functions(&t, &PhiFunction::log_y(), 10.0).unwrap();
        assert_eq!(g.gamma1, 0.0);
    }

    #[test]
    fn variance_reduces_without_censoring() {
        let t = tail(&[8.0, 4.0, 2.0, 1.5], &[1, 1, 1, 1]);
        let phi = PhiFunction::log_y();
        let var = plug_in_variance(&t, &phi).unwrap();
        let logs: Vec<f64> = t.v().iter().map(|v| v.ln()).collect();
        assert!((var - stats::sample_variance(&logs)).abs() < 1e-14);
        assert_eq!(plug_in_variance(&t, &PhiFunction::constant(2.0)).unwrap(), 0.0);
        assert!(matches!(
            plug_in_variance(&tail(&[2.0], &[1]), &phi),
            Err(KmError::TooSmall { .. })
        ));
    }

    #[test]
    fn interval_width_and_degenerate_case() {
        let t = tail(&[8.0, 4.0, 2.0, 1.5], &[1, 1, 1, 1]);
        let ci = ekmi_confidence_interval(&t, &PhiFunction::log_y(), 0.95).unwrap();
        let width = ci.upper - ci.lower;
        assert!((width - 2.0 * 1.959_963_984_540_054 * ci.std_error).abs() < 1e-12);
        assert!(ci.lower <= ci.value && ci.value <= ci.upper);
        let ci = ekmi_confidence_interval(&t, &PhiFunction::constant(1.0), 0.9).unwrap();
        assert_eq!(ci.lower, ci.upper);
        assert!(ekmi_confidence_interval(&t, &PhiFunction::constant(1.0), 1.0).is_err());
    }
}
