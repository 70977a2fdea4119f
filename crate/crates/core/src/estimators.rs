//! Applied estimators built on the EKMI: region probabilities, the naive
//! benchmark, the Hill estimator, kernel-smoothed tail indices and
//! categorical covariate distributions.

use rayon::prelude::*;
use thiserror::Error;

use crate::km::{
    ekmi_confidence_interval, ekmi_integral, km_weights, plug_in_terms, EstimateWithCI, KmError,
    PhiFunction,
};
use crate::sample::{SampleError, SortedSample, TailSubsample};
use crate::stats;

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error(transparent)]
    Km(#[from] KmError),
    #[error("region has dimension {found}, sample covariates have dimension {expected}")]
    Shape { expected: usize, found: usize },
    #[error("invalid region: {0}")]
    InvalidRegion(String),
    #[error("z must be positive for the Hill estimator, found {value}")]
    Domain { value: f64 },
    #[error("degenerate data: {0}")]
    Degenerate(String),
    #[error("no local kernel mass at a = {center} (h = {bandwidth})")]
    NoLocalMass { center: f64, bandwidth: f64 },
    #[error("bandwidth must be positive and finite, got {0}")]
    InvalidBandwidth(f64),
    #[error("kernel estimator needs a scalar covariate, sample has dimension {0}")]
    NotScalar(usize),
    #[error("grid of centers is empty")]
    EmptyGrid,
}

/// A box in covariate space. Each bound is open or closed on its own;
/// the default is the half-open `(lower, upper]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    lower: Vec<f64>,
    upper: Vec<f64>,
    lower_closed: Vec<bool>,
    upper_closed: Vec<bool>,
}

impl Region {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, EstimatorError> {
        let m = lower.len();
        Self::with_closedness(lower, upper, vec![false; m], vec![true; m])
    }

    pub fn with_closedness(
        lower: Vec<f64>,
        upper: Vec<f64>,
        lower_closed: Vec<bool>,
        upper_closed: Vec<bool>,
    ) -> Result<Self, EstimatorError> {
        let m = lower.len();
        if m == 0 || upper.len() != m || lower_closed.len() != m || upper_closed.len() != m {
            return Err(EstimatorError::InvalidRegion(
                "bounds and flags must share a positive length".into(),
            ));
        }
        for (j, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if lo.is_nan() || hi.is_nan() || lo >= hi {
                return Err(EstimatorError::InvalidRegion(format!(
                    "coordinate {j}: need lower < upper, got {lo} and {hi}"
                )));
            }
        }
        Ok(Self {
            lower,
            upper,
            lower_closed,
            upper_closed,
        })
    }

    /// One-dimensional `(lower, upper]`.
    pub fn interval(lower: f64, upper: f64) -> Result<Self, EstimatorError> {
        Self::new(vec![lower], vec![upper])
    }

    /// Parses `"1.8,2.2"` or, for several coordinates, `"a,b;c,d"`. A
    /// leading `[` closes the lower bound, a trailing `)` opens the upper
    /// one, e.g. `"[1,2)"`.
    pub fn parse(text: &str) -> Result<Self, EstimatorError> {
        let mut lower = Vec::new();
        let mut upper = Vec::new();
        let mut lower_closed = Vec::new();
        let mut upper_closed = Vec::new();
        for part in text.split(';') {
            let mut part = part.trim();
            let mut lc = false;
            let mut uc = true;
            if let Some(rest) = part.strip_prefix('[') {
                lc = true;
                part = rest;
            } else if let Some(rest) = part.strip_prefix('(') {
                part = rest;
            }
            if let Some(rest) = part.strip_suffix(')') {
                uc = false;
                part = rest;
            } else if let Some(rest) = part.strip_suffix(']') {
                part = rest;
            }
            let bounds: Vec<&str> = part.split(',').map(str::trim).collect();
            if bounds.len() != 2 {
                return Err(EstimatorError::InvalidRegion(format!(
                    "expected 'lower,upper', got '{part}'"
                )));
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| EstimatorError::InvalidRegion(format!("bad number '{s}'")))
            };
            lower.push(parse(bounds[0])?);
            upper.push(parse(bounds[1])?);
            lower_closed.push(lc);
            upper_closed.push(uc);
        }
        Self::with_closedness(lower, upper, lower_closed, upper_closed)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().enumerate().all(|(j, &xj)| {
            let above = if self.lower_closed[j] {
                xj >= self.lower[j]
            } else {
                xj > self.lower[j]
            };
            let below = if self.upper_closed[j] {
                xj <= self.upper[j]
            } else {
                xj < self.upper[j]
            };
            above && below
        })
    }

    /// `phi(x, y) = 1{x in R}`.
    pub fn indicator(&self) -> PhiFunction {
        let region = self.clone();
        PhiFunction::new(self.to_string(), move |x, _| {
            if region.contains(x) {
                1.0
            } else {
                0.0
            }
        })
        .with_envelope(|_| 1.0)
        .with_derivative(|_, _| 0.0)
        .with_x_breaks(vec![self.lower[0], self.upper[0]])
    }
}

impl std::fmt::Display for Region {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for j in 0..self.dim() {
            if j > 0 {
                write!(f, ";")?;
            }
            let open = if self.lower_closed[j] { '[' } else { '(' };
            let close = if self.upper_closed[j] { ']' } else { ')' };
            write!(f, "{open}{},{}{close}", self.lower[j], self.upper[j])?;
        }
        Ok(())
    }
}

fn check_dim(sorted: &SortedSample, region: &Region) -> Result<(), EstimatorError> {
    if sorted.dim() != region.dim() {
        return Err(EstimatorError::Shape {
            expected: sorted.dim(),
            found: region.dim(),
        });
    }
    Ok(())
}

/// EKMI estimate of `P(X in R)` under the tail limit, with plug-in CI.
pub fn region_probability(
    sorted: &SortedSample,
    k: usize,
    region: &Region,
    level: f64,
) -> Result<EstimateWithCI, EstimatorError> {
    check_dim(sorted, region)?;
    let tail = sorted.tail(k)?;
    Ok(ekmi_confidence_interval(&tail, &region.indicator(), level)?)
}

/// Share of the top `k` observations (by `z`) whose covariate lies in `R`,
/// ignoring the censoring indicators.
pub fn naive_region_estimator(
    sorted: &SortedSample,
    k: usize,
    region: &Region,
) -> Result<f64, EstimatorError> {
    check_dim(sorted, region)?;
    let n = sorted.len();
    if k == 0 || k >= n {
        return Err(SampleError::KOutOfRange { k, max: n - 1 }.into());
    }
    let hits = (n - k..n)
        .filter(|&i| region.contains(sorted.x_concomitant(i)))
        .count();
    Ok(hits as f64 / k as f64)
}

/// `(1/k) sum_{i=1..k} log(Z_(n-i+1,n) / Z_(n-k,n))`.
pub fn hill_estimator(sorted: &SortedSample, k: usize) -> Result<f64, EstimatorError> {
    let n = sorted.len();
    if k == 0 || k >= n {
        return Err(SampleError::KOutOfRange { k, max: n - 1 }.into());
    }
    let z = sorted.z_sorted();
    let threshold = z[n - k - 1];
    if !(threshold > 0.0) {
        return Err(EstimatorError::Domain { value: threshold });
    }
    let log_t = threshold.ln();
    Ok(z[n - k..].iter().map(|v| v.ln() - log_t).sum::<f64>() / k as f64)
}

/// Rule-of-thumb bandwidth `0.9 min(sd, IQR/1.34) n^(-1/5)`, falling back
/// to `sd` when the IQR vanishes.
pub fn bandwidth_select(values: &[f64]) -> Result<f64, EstimatorError> {
    if values.len() < 2 {
        return Err(EstimatorError::Degenerate(
            "bandwidth selection needs at least two values".into(),
        ));
    }
    let sd = stats::sample_variance(values).sqrt();
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = stats::quantile_sorted(&sorted, 0.75) - stats::quantile_sorted(&sorted, 0.25);
    let mut spread = sd.min(iqr / 1.34);
    if !(spread > 0.0) {
        spread = sd;
    }
    if !(spread > 0.0) {
        return Err(EstimatorError::Degenerate(
            "all covariate values are identical".into(),
        ));
    }
    Ok(0.9 * spread * (values.len() as f64).powf(-0.2))
}

/// Center and bandwidth of the Gaussian kernel weight `phi((x - a) / h)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelConfig {
    pub center: f64,
    pub bandwidth: f64,
}

impl KernelConfig {
    pub fn new(center: f64, bandwidth: f64) -> Result<Self, EstimatorError> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(EstimatorError::InvalidBandwidth(bandwidth));
        }
        Ok(Self { center, bandwidth })
    }

    pub fn weight(&self) -> PhiFunction {
        let Self { center, bandwidth } = *self;
        PhiFunction::new(format!("K(a={center},h={bandwidth})"), move |x, _| {
            stats::normal_pdf((x[0] - center) / bandwidth)
        })
        .with_envelope(|_| stats::normal_pdf(0.0))
        .with_derivative(|_, _| 0.0)
    }

    pub fn weighted_log(&self) -> PhiFunction {
        let Self { center, bandwidth } = *self;
        PhiFunction::new(
            format!("K(a={center},h={bandwidth})*log(y)"),
            move |x, y| stats::normal_pdf((x[0] - center) / bandwidth) * y.ln(),
        )
        .with_envelope(|y| stats::normal_pdf(0.0) * y.max(1.0).ln())
        .with_derivative(move |x, y| stats::normal_pdf((x[0] - center) / bandwidth) / y)
    }
}

/// Ratio `S(K log y) / S(K)` on a prepared tail subsample, with a
/// delta-method standard error from the joint plug-in summands.
pub fn kernel_tail_index_on_tail(
    tail: &TailSubsample,
    cfg: &KernelConfig,
    level: f64,
) -> Result<EstimateWithCI, EstimatorError> {
    if tail.dim() != 1 {
        return Err(EstimatorError::NotScalar(tail.dim()));
    }
    if tail.k() < 2 {
        return Err(KmError::TooSmall { k: tail.k(), min: 2 }.into());
    }
    let weights = km_weights(tail);
    let num_phi = cfg.weighted_log();
    let den_phi = cfg.weight();
    let s1 = ekmi_integral(tail, &weights, &num_phi)?;
    let s2 = ekmi_integral(tail, &weights, &den_phi)?;
    if !(s2 > f64::EPSILON) {
        return Err(EstimatorError::NoLocalMass {
            center: cfg.center,
            bandwidth: cfg.bandwidth,
        });
    }
    let w1 = plug_in_terms(tail, &num_phi)?;
    let w2 = plug_in_terms(tail, &den_phi)?;
    let s11 = stats::sample_variance(&w1);
    let s22 = stats::sample_variance(&w2);
    let s12 = stats::sample_covariance(&w1, &w2);
    let var = (s11 / (s2 * s2) - 2.0 * s1 * s12 / s2.powi(3) + s1 * s1 * s22 / s2.powi(4))
        / tail.k() as f64;
    Ok(EstimateWithCI::new(s1 / s2, var.max(0.0).sqrt(), level)?)
}

/// Kernel-smoothed local tail index at the center of `cfg`.
pub fn kernel_tail_index(
    sorted: &SortedSample,
    k: usize,
    cfg: &KernelConfig,
    level: f64,
) -> Result<EstimateWithCI, EstimatorError> {
    let tail = sorted.tail(k)?;
    kernel_tail_index_on_tail(&tail, cfg, level)
}

/// Fixed bandwidth, or the rule of thumb on the top-k covariates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    Fixed(f64),
    Auto,
}

impl std::str::FromStr for Bandwidth {
    type Err = EstimatorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.trim().eq_ignore_ascii_case("auto") {
            return Ok(Self::Auto);
        }
        let h: f64 = s
            .trim()
            .parse()
            .map_err(|_| EstimatorError::InvalidRegion(format!("bad bandwidth '{s}'")))?;
        if !(h > 0.0 && h.is_finite()) {
            return Err(EstimatorError::InvalidBandwidth(h));
        }
        Ok(Self::Fixed(h))
    }
}

impl std::fmt::Display for Bandwidth {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Fixed(h) => write!(f, "{h}"),
            Self::Auto => write!(f, "AUTO"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub center: f64,
    pub bandwidth: f64,
    pub estimate: EstimateWithCI,
}

/// Kernel tail index at every center of `grid`, in grid order.
pub fn tail_index_curve(
    sorted: &SortedSample,
    k: usize,
    grid: &[f64],
    bandwidth: Bandwidth,
    level: f64,
) -> Result<Vec<CurvePoint>, EstimatorError> {
    if grid.is_empty() {
        return Err(EstimatorError::EmptyGrid);
    }
    let tail = sorted.tail(k)?;
    if tail.dim() != 1 {
        return Err(EstimatorError::NotScalar(tail.dim()));
    }
    let h = match bandwidth {
        Bandwidth::Fixed(h) => h,
        Bandwidth::Auto => bandwidth_select(&tail.x_first_coordinate())?,
    };
    grid.par_iter()
        .map(|&a| {
            let cfg = KernelConfig::new(a, h)?;
            Ok(CurvePoint {
                center: a,
                bandwidth: h,
                estimate: kernel_tail_index_on_tail(&tail, &cfg, level)?,
            })
        })
        .collect()
}

/// Raw and normalized EKMI masses of each category code.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoryDistribution {
    pub labels: Vec<f64>,
    pub raw: Vec<f64>,
    pub normalized: Vec<f64>,
}

/// Distinct values of the first covariate among the top `k`, ascending.
pub fn distinct_categories(sorted: &SortedSample, k: usize) -> Result<Vec<f64>, EstimatorError> {
    let tail = sorted.tail(k)?;
    let mut labels = tail.x_first_coordinate();
    labels.sort_by(f64::total_cmp);
    labels.dedup();
    Ok(labels)
}

/// `S(1{x = c})` for each code `c`, normalized to sum to one.
pub fn category_distribution(
    sorted: &SortedSample,
    k: usize,
    categories: &[f64],
) -> Result<CategoryDistribution, EstimatorError> {
    let tail = sorted.tail(k)?;
    if tail.dim() != 1 {
        return Err(EstimatorError::NotScalar(tail.dim()));
    }
    let weights = km_weights(&tail);
    let raw: Vec<f64> = categories
        .iter()
        .map(|&c| {
            (0..tail.k())
                .filter(|&i| tail.x(i)[0] == c)
                .map(|i| weights.multipliers()[i])
                .sum::<f64>()
                / tail.k() as f64
        })
        .collect();
    let total: f64 = raw.iter().sum();
    if !(total > 0.0) {
        return Err(EstimatorError::Degenerate(
            "no EKMI mass on the requested categories".into(),
        ));
    }
    Ok(CategoryDistribution {
        labels: categories.to_vec(),
        normalized: raw.iter().map(|r| r / total).collect(),
        raw,
    })
}
