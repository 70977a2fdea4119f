//! Laws of a scalar covariate, exponential tilting, and the law of `X`
//! given a tail event of the response.

use std::fmt;
use std::sync::Arc;

use crate::quadrature::{gauss_legendre, integrate_with_breaks, QuadOptions};

use super::family::RVFamily;
use super::TailError;

pub type DensityFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Law of a scalar covariate.
#[derive(Clone)]
pub enum CovariateLaw {
    Uniform {
        lo: f64,
        hi: f64,
    },
    /// Density on `[lo, hi]`; `breaks` lists interior points where the
    /// density is sharp or discontinuous.
    Continuous {
        lo: f64,
        hi: f64,
        density: DensityFn,
        breaks: Vec<f64>,
    },
    Discrete {
        atoms: Vec<f64>,
        probs: Vec<f64>,
    },
}

impl fmt::Debug for CovariateLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Uniform { lo, hi } => write!(f, "Uniform({lo}, {hi})"),
            Self::Continuous { lo, hi, breaks, .. } => {
                write!(f, "Continuous([{lo}, {hi}], breaks={breaks:?})")
            }
            Self::Discrete { atoms, probs } => write!(f, "Discrete({atoms:?}, {probs:?})"),
        }
    }
}

pub(crate) fn covariate_opts() -> QuadOptions {
    QuadOptions {
        abs_tol: 1e-13,
        rel_tol: 1e-11,
        max_panels: 4000,
    }
}

impl CovariateLaw {
    pub fn uniform(lo: f64, hi: f64) -> Result<Self, TailError> {
        if !(lo < hi && lo.is_finite() && hi.is_finite()) {
            return Err(TailError::InvalidLaw(format!("uniform needs lo < hi, got {lo}, {hi}")));
        }
        Ok(Self::Uniform { lo, hi })
    }

    /// Atoms with nonnegative masses, normalized to total one.
    pub fn discrete(atoms: Vec<f64>, probs: Vec<f64>) -> Result<Self, TailError> {
        if atoms.is_empty() || atoms.len() != probs.len() {
            return Err(TailError::InvalidLaw("atoms and masses must match".into()));
        }
        let total: f64 = probs.iter().sum();
        if !(total > 0.0) || probs.iter().any(|p| *p < 0.0 || !p.is_finite()) {
            return Err(TailError::InvalidLaw("masses must be nonnegative with positive sum".into()));
        }
        Ok(Self::Discrete {
            atoms,
            probs: probs.iter().map(|p| p / total).collect(),
        })
    }

    pub fn support(&self) -> (f64, f64) {
        match self {
            Self::Uniform { lo, hi } | Self::Continuous { lo, hi, .. } => (*lo, *hi),
            Self::Discrete { atoms, .. } => (
                atoms.iter().cloned().fold(f64::INFINITY, f64::min),
                atoms.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            ),
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, Self::Discrete { .. })
    }

    /// Density at `x` for continuous laws; `None` for discrete ones.
    pub fn density(&self, x: f64) -> Option<f64> {
        match self {
            Self::Uniform { lo, hi } => Some(if x >= *lo && x <= *hi {
                1.0 / (hi - lo)
            } else {
                0.0
            }),
            Self::Continuous { lo, hi, density, .. } => {
                Some(if x >= *lo && x <= *hi { density(x) } else { 0.0 })
            }
            Self::Discrete { .. } => None,
        }
    }

    fn interior_breaks(&self) -> Vec<f64> {
        match self {
            Self::Continuous { breaks, .. } => breaks.clone(),
            _ => Vec::new(),
        }
    }

    fn break_points(&self, extra: &[f64]) -> Vec<f64> {
        let (lo, hi) = self.support();
        let mut pts = vec![lo, hi];
        pts.extend(
            self.interior_breaks()
                .into_iter()
                .chain(extra.iter().copied())
                .filter(|b| *b > lo && *b < hi),
        );
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    /// `E f(X)`; `breaks` adds integration breakpoints for continuous laws.
    pub fn expectation<F: Fn(f64) -> f64>(&self, f: F, breaks: &[f64]) -> f64 {
        match self {
            Self::Discrete { atoms, probs } => {
                atoms.iter().zip(probs).map(|(x, p)| p * f(*x)).sum()
            }
            _ => {
                let pts = self.break_points(breaks);
                integrate_with_breaks(
                    |x| {
                        let d = self.density(x).unwrap_or(0.0);
                        if d == 0.0 {
                            0.0
                        } else {
                            d * f(x)
                        }
                    },
                    &pts,
                    &covariate_opts(),
                )
                .value
            }
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.expectation(|_| 1.0, &[])
    }

    /// `P(lo < X <= hi)`.
    pub fn probability(&self, lo: f64, hi: f64) -> f64 {
        match self {
            Self::Discrete { atoms, probs } => atoms
                .iter()
                .zip(probs)
                .filter(|(x, _)| **x > lo && **x <= hi)
                .map(|(_, p)| p)
                .sum(),
            _ => {
                let (a, b) = self.support();
                let (l, u) = (lo.max(a), hi.min(b));
                if l >= u {
                    return 0.0;
                }
                let mut pts = vec![l, u];
                pts.extend(self.interior_breaks().into_iter().filter(|p| *p > l && *p < u));
                pts.sort_by(f64::total_cmp);
                integrate_with_breaks(
                    |x| self.density(x).unwrap_or(0.0),
                    &pts,
                    &covariate_opts(),
                )
                .value
            }
        }
    }

    /// Composite Gauss-Legendre discretization: the support is cut at the
    /// law's breaks plus `extra`, each cell gets `cells_per_piece` equal
    /// sub-cells and each sub-cell `nodes` nodes. Discrete laws are returned
    /// unchanged.
    pub fn discretize(&self, extra: &[f64], cells_per_piece: usize, nodes: usize) -> (Vec<f64>, Vec<f64>) {
        if let Self::Discrete { atoms, probs } = self {
            return (atoms.clone(), probs.clone());
        }
        let pts = self.break_points(extra);
        let (gx, gw) = gauss_legendre(nodes);
        let mut atoms = Vec::new();
        let mut probs = Vec::new();
        for w in pts.windows(2) {
            let width = (w[1] - w[0]) / cells_per_piece as f64;
            for c in 0..cells_per_piece {
                let a = w[0] + c as f64 * width;
                for (x, wt) in gx.iter().zip(&gw) {
                    let xn = a + 0.5 * width * (x + 1.0);
                    let p = 0.5 * width * wt * self.density(xn).unwrap_or(0.0);
                    if p > 0.0 {
                        atoms.push(xn);
                        probs.push(p);
                    }
                }
            }
        }
        let total: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= total);
        (atoms, probs)
    }

    /// Draws from the law given a uniform `u` in `(0, 1)`; continuous laws
    /// other than the uniform one are sampled through a fine discretization.
    pub fn quantile(&self, u: f64) -> f64 {
        match self {
            Self::Uniform { lo, hi } => lo + u * (hi - lo),
            Self::Discrete { atoms, probs } => {
                let mut acc = 0.0;
                for (x, p) in atoms.iter().zip(probs) {
                    acc += p;
                    if u < acc {
                        return *x;
                    }
                }
                *atoms.last().expect("nonempty")
            }
            Self::Continuous { .. } => {
                let (atoms, probs) = self.discretize(&[], 64, 8);
                Self::Discrete { atoms, probs }.quantile(u)
            }
        }
    }

    /// The law tilted by `exp(log_weight(x))` and renormalized. The
    /// weights are handled in the log domain with a max shift, so tiny
    /// survival values at large thresholds do not underflow.
    pub fn tilted(
        &self,
        log_weight: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        extra_breaks: &[f64],
    ) -> Result<Self, TailError> {
        match self {
            Self::Discrete { atoms, probs } => {
                let logs: Vec<f64> = atoms
                    .iter()
                    .zip(probs)
                    .map(|(x, p)| p.ln() + log_weight(*x))
                    .collect();
                let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                if !m.is_finite() {
                    return Err(TailError::Underflow);
                }
                let w: Vec<f64> = logs.iter().map(|l| (l - m).exp()).collect();
                Self::discrete(atoms.clone(), w)
            }
            _ => {
                let (lo, hi) = self.support();
                let base = self.clone();
                let g = {
                    let base = base.clone();
                    let lw = log_weight.clone();
                    move |x: f64| base.density(x).unwrap_or(0.0).ln() + lw(x)
                };
                let n = 4000;
                let mut vals = Vec::with_capacity(n + 1);
                for i in 0..=n {
                    let x = lo + (hi - lo) * i as f64 / n as f64;
                    vals.push((x, g(x)));
                }
                let m = vals.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max);
                if !m.is_finite() {
                    return Err(TailError::Underflow);
                }
                // local maxima act as breaks so sharp peaks are not missed
                let mut breaks: Vec<f64> = extra_breaks.to_vec();
                for i in 1..n {
                    if vals[i].1 >= vals[i - 1].1 && vals[i].1 >= vals[i + 1].1 && vals[i].1 > m - 50.0 {
                        breaks.push(vals[i].0);
                    }
                }
                breaks.extend(self.interior_breaks());
                let mut pts = self.break_points(&breaks);
                pts.dedup();
                let unnorm = integrate_with_breaks(
                    |x| {
                        let v = g(x) - m;
                        if v.is_finite() {
                            v.exp()
                        } else {
                            0.0
                        }
                    },
                    &pts,
                    &covariate_opts(),
                )
                .value;
                if !(unnorm > 0.0) {
                    return Err(TailError::Underflow);
                }
                let shift = m + unnorm.ln();
                let density: DensityFn = Arc::new(move |x| {
                    let v = g(x) - shift;
                    if v.is_finite() {
                        v.exp()
                    } else {
                        0.0
                    }
                });
                let interior: Vec<f64> = pts[1..pts.len() - 1].to_vec();
                Ok(Self::Continuous {
                    lo,
                    hi,
                    density,
                    breaks: interior,
                })
            }
        }
    }
}

/// Threshold for [`covariate_limit_distribution`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    Finite(f64),
    Infinite,
}

/// Where a profile attains its maximum on `[lo, hi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArgmaxSet {
    pub max: f64,
    /// Isolated maximizers (empty when the set has positive length).
    pub points: Vec<f64>,
    pub positive_measure: bool,
}

fn golden_max<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() < 1e-12 * (1.0 + a.abs()) {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Grid scan plus golden-section refinement of `argmax gamma` on `[lo, hi]`.
pub fn argmax_set<F: Fn(f64) -> f64>(gamma: F, lo: f64, hi: f64) -> ArgmaxSet {
    let n = 20_000;
    let h = (hi - lo) / n as f64;
    let vals: Vec<f64> = (0..=n).map(|i| gamma(lo + h * i as f64)).collect();
    let gmax = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let flat = vals
        .iter()
        .filter(|v| **v >= gmax - 1e-12 * gmax.abs())
        .count();
    if flat >= 3 {
        return ArgmaxSet {
            max: gmax,
            points: Vec::new(),
            positive_measure: true,
        };
    }
    let mut cands = Vec::new();
    for i in 0..=n {
        let left = if i > 0 { vals[i - 1] } else { f64::NEG_INFINITY };
        let right = if i < n { vals[i + 1] } else { f64::NEG_INFINITY };
        if vals[i] >= left && vals[i] >= right && vals[i] >= gmax - 1e-6 * gmax.abs() {
            let a = (lo + h * (i as f64 - 1.0)).max(lo);
            let b = (lo + h * (i as f64 + 1.0)).min(hi);
            let x = golden_max(&gamma, a, b);
            cands.push((x, gamma(x)));
        }
    }
    let best = cands.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
    let mut points: Vec<f64> = cands
        .iter()
        .filter(|c| c.1 >= best - 1e-9 * best.abs())
        .map(|c| c.0)
        .collect();
    points.sort_by(f64::total_cmp);
    points.dedup_by(|a, b| (*a - *b).abs() < 1e-6);
    ArgmaxSet {
        max: best,
        points,
        positive_measure: false,
    }
}

/// Neville extrapolation of `(x_i, y_i)` to `x = 0`.
pub fn extrapolate_to_zero(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len();
    let mut p = ys.to_vec();
    for level in 1..n {
        for i in 0..n - level {
            let (xi, xj) = (xs[i], xs[i + level]);
            p[i] = (xj * p[i] - xi * p[i + 1]) / (xj - xi);
        }
    }
    p[0]
}

/// Reference point at which slowly varying parts are frozen when
/// reweighting a non-null argmax set.
const SLOW_REFERENCE_T: f64 = 1e15;

/// Law of `X` given `Y > t` (finite `t`) or its `t -> inf` limit.
///
/// For a finite threshold the covariate law is tilted by the conditional
/// survival. In the limit the mass concentrates on `argmax gamma`:
/// - atoms or a set of positive length are reweighted by the slowly varying
///   part `L(x, t)` frozen at a large reference threshold;
/// - a null set of isolated maximizers under a continuous law gets the
///   limits of the finite-threshold masses of their nearest-point cells,
///   extrapolated in `1 / log t` along `t = 10^(4 * 2^j)`.
pub fn covariate_limit_distribution(
    family: Arc<dyn RVFamily>,
    fx: &CovariateLaw,
    t: Threshold,
) -> Result<CovariateLaw, TailError> {
    let features = family.x_features();
    match t {
        Threshold::Finite(t) => {
            if !(t > 0.0) {
                return Err(TailError::Domain(format!("threshold must be positive, got {t}")));
            }
            let fam = family.clone();
            fx.tilted(Arc::new(move |x| fam.log_survival(x, t)), &features)
        }
        Threshold::Infinite => match fx {
            CovariateLaw::Discrete { atoms, probs } => {
                let gmax = atoms
                    .iter()
                    .map(|x| family.gamma(*x))
                    .fold(f64::NEG_INFINITY, f64::max);
                let mut b_atoms = Vec::new();
                let mut logs = Vec::new();
                for (x, p) in atoms.iter().zip(probs) {
                    if family.gamma(*x) >= gmax - 1e-12 * gmax && *p > 0.0 {
                        b_atoms.push(*x);
                        logs.push(p.ln() + family.log_slowly_varying(*x, SLOW_REFERENCE_T));
                    }
                }
                let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                CovariateLaw::discrete(b_atoms, logs.iter().map(|l| (l - m).exp()).collect())
            }
            _ => {
                let (lo, hi) = fx.support();
                let fam = family.clone();
                let set = argmax_set(move |x| fam.gamma(x), lo, hi);
                if set.positive_measure {
                    let fam = family.clone();
                    let gmax = set.max;
                    return fx.tilted(
                        Arc::new(move |x| {
                            if fam.gamma(x) >= gmax - 1e-12 * gmax.abs() {
                                fam.log_slowly_varying(x, SLOW_REFERENCE_T)
                            } else {
                                f64::NEG_INFINITY
                            }
                        }),
                        &features,
                    );
                }
                let points = set.points;
                if points.len() == 1 {
                    return CovariateLaw::discrete(points, vec![1.0]);
                }
                let mut edges = vec![lo];
                for w in points.windows(2) {
                    edges.push(0.5 * (w[0] + w[1]));
                }
                edges.push(hi);
                let levels = 6;
                let mut inv_log_t = Vec::with_capacity(levels);
                let mut masses: Vec<Vec<f64>> = vec![Vec::with_capacity(levels); points.len()];
                for j in 0..levels {
                    let log10_t = 4.0 * 2f64.powi(j as i32);
                    let t = 10f64.powf(log10_t);
                    let fam = family.clone();
                    let mut brk = features.clone();
                    brk.extend(points.iter().copied());
                    let law = fx.tilted(Arc::new(move |x| fam.log_survival(x, t)), &brk)?;
                    inv_log_t.push(1.0 / t.ln());
                    for (c, cell) in edges.windows(2).enumerate() {
                        // the lowest cell includes its left end
                        let lo_edge = if c == 0 { cell[0] - 1.0 } else { cell[0] };
                        masses[c].push(law.probability(lo_edge, cell[1]));
                    }
                }
                let limits: Vec<f64> = masses
                    .iter()
                    .map(|m| extrapolate_to_zero(&inv_log_t, m).max(0.0))
                    .collect();
                CovariateLaw::discrete(points, limits)
            }
        },
    }
}
