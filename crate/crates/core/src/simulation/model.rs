//! Generative models: covariate, conditional response and censoring.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use rand::distr::Open01;
use rand::Rng;
use rayon::prelude::*;

use crate::km::PhiFunction;
use crate::profile::{reference_gamma_c1, reference_gamma_f, IndexProfile};
use crate::quadrature::integrate_with_breaks;
use crate::sample::CensoredSample;
use crate::seeds;
use crate::tail::family::{BurrFamily, ParetoFamily, RVFamily};
use crate::tail::limit::{inner_opts, LimitModel};
use crate::tail::tables::{ConditionalLaw, FnLaw, ParetoLaw, TailAtom, TailLaw};
use crate::tail::CovariateLaw;

use super::SimulationError;

const BLOCK: usize = 8192;
const BLOCK_STREAM: u64 = 0xB10C_5EED_0000_0001;

#[derive(Debug, Clone, PartialEq)]
pub enum ResponseLaw {
    /// `F(y) = 1 - (1 + y^tau)^-kappa`.
    Burr { kappa: IndexProfile, tau: IndexProfile },
    /// Survival `y^(-1/gamma)` on `[1, inf)`.
    Pareto { gamma: IndexProfile },
}

/// Pareto pieces live on `[scale, inf)` with survival `(c / scale)^(-1/gamma)`.
#[derive(Debug, Clone, PartialEq)]
pub enum CensoringLaw {
    None,
    Pareto { gamma: IndexProfile, scale: f64 },
    /// `C = C1` if `C1 < cutoff`, else `C2`.
    Mixture {
        gamma_c1: IndexProfile,
        gamma_c2: f64,
        cutoff: f64,
        scale_c1: f64,
        scale_c2: f64,
    },
}

fn pareto_log_survival(gamma: f64, scale: f64, c: f64) -> f64 {
    if c <= scale {
        0.0
    } else {
        -(c / scale).ln() / gamma
    }
}

fn pareto_density(gamma: f64, scale: f64, c: f64) -> f64 {
    if c < scale {
        0.0
    } else {
        (-(1.0 / gamma + 1.0) * (c / scale).ln()).exp() / (gamma * scale)
    }
}

fn pareto_draw(gamma: f64, scale: f64, u: f64) -> f64 {
    scale * (-gamma * u.ln()).exp()
}

impl CensoringLaw {
    pub fn is_none(&self) -> bool {
        matches!(self, Self::None)
    }

    pub fn survival(&self, x: f64, c: f64) -> f64 {
        match self {
            Self::None => 1.0,
            Self::Pareto { gamma, scale } => pareto_log_survival(gamma.eval(x), *scale, c).exp(),
            Self::Mixture {
                gamma_c1,
                gamma_c2,
                cutoff,
                scale_c1,
                scale_c2,
            } => {
                let g1 = gamma_c1.eval(x);
                let s1 = |v: f64| pareto_log_survival(g1, *scale_c1, v).exp();
                let s2 = pareto_log_survival(*gamma_c2, *scale_c2, c).exp();
                let above = s1(*cutoff);
                if c < *cutoff {
                    (s1(c) - above) + above * s2
                } else {
                    above * s2
                }
            }
        }
    }

    pub fn log_survival(&self, x: f64, c: f64) -> f64 {
        match self {
            Self::Pareto { gamma, scale } => pareto_log_survival(gamma.eval(x), *scale, c),
            Self::Mixture {
                gamma_c1,
                gamma_c2,
                cutoff,
                scale_c1,
                scale_c2,
            } if c >= *cutoff => {
                pareto_log_survival(gamma_c1.eval(x), *scale_c1, *cutoff)
                    + pareto_log_survival(*gamma_c2, *scale_c2, c)
            }
            _ => self.survival(x, c).ln(),
        }
    }

    pub fn density(&self, x: f64, c: f64) -> f64 {
        match self {
            Self::None => 0.0,
            Self::Pareto { gamma, scale } => pareto_density(gamma.eval(x), *scale, c),
            Self::Mixture {
                gamma_c1,
                gamma_c2,
                cutoff,
                scale_c1,
                scale_c2,
            } => {
                let g1 = gamma_c1.eval(x);
                if c < *cutoff {
                    pareto_density(g1, *scale_c1, c)
                } else {
                    pareto_log_survival(g1, *scale_c1, *cutoff).exp()
                        * pareto_density(*gamma_c2, *scale_c2, c)
                }
            }
        }
    }

    fn breaks(&self) -> Vec<f64> {
        match self {
            Self::None => Vec::new(),
            Self::Pareto { scale, .. } => vec![*scale],
            Self::Mixture {
                cutoff,
                scale_c1,
                scale_c2,
                ..
            } => vec![*scale_c1, *scale_c2, *cutoff],
        }
    }

    fn features(&self) -> Vec<f64> {
        match self {
            Self::None => Vec::new(),
            Self::Pareto { gamma, .. } => gamma.features(),
            Self::Mixture { gamma_c1, .. } => gamma_c1.features(),
        }
    }
}

/// A full model of `(X, Y, C)` with sample size and seed.
#[derive(Debug, Clone)]
pub struct ModelConfig {
    pub name: String,
    pub covariate: CovariateLaw,
    pub response: ResponseLaw,
    pub censoring: CensoringLaw,
    pub n: usize,
    pub seed: u64,
}

/// `(gamma_F(x), gamma_C1(x))` of the reference Burr model.
pub fn gamma_profiles(x: f64) -> (f64, f64) {
    (reference_gamma_f().eval(x), reference_gamma_c1().eval(x))
}

fn parse_covariate(text: &str) -> Result<CovariateLaw, SimulationError> {
    let bad = || SimulationError::Config(format!("bad covariate law '{text}'"));
    let nums = |s: &str, sep: char| -> Result<Vec<f64>, SimulationError> {
        s.split(sep).map(|v| v.trim().parse::<f64>().map_err(|_| bad())).collect()
    };
    let law = if let Some(rest) = text.strip_prefix("uniform:") {
        let v = nums(rest, ',')?;
        if v.len() != 2 {
            return Err(bad());
        }
        CovariateLaw::uniform(v[0], v[1])
    } else if let Some(rest) = text.strip_prefix("discrete:") {
        let (a, p) = rest.split_once('|').ok_or_else(bad)?;
        CovariateLaw::discrete(nums(a, ';')?, nums(p, ';')?)
    } else {
        return Err(bad());
    };
    law.map_err(|e| SimulationError::Config(e.to_string()))
}

fn covariate_text(law: &CovariateLaw) -> String {
    let join = |v: &[f64]| v.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(";");
    match law {
        CovariateLaw::Uniform { lo, hi } => format!("uniform:{lo},{hi}"),
        CovariateLaw::Discrete { atoms, probs } => format!("discrete:{}|{}", join(atoms), join(probs)),
        CovariateLaw::Continuous { lo, hi, .. } => format!("continuous:{lo},{hi}"),
    }
}

impl ModelConfig {
    /// The reference Burr model with mixture Pareto censoring.
    pub fn burr_paper(n: usize, seed: u64) -> Self {
        Self {
            name: "burr_paper".into(),
            covariate: CovariateLaw::Uniform { lo: 1.0, hi: 5.0 },
            response: ResponseLaw::Burr {
                kappa: IndexProfile::Constant(1.0),
                tau: IndexProfile::Reciprocal(Box::new(reference_gamma_f())),
            },
            censoring: CensoringLaw::Mixture {
                gamma_c1: reference_gamma_c1(),
                gamma_c2: 14.0,
                cutoff: 100.0,
                scale_c1: 1.0,
                scale_c2: 1.0,
            },
            n,
            seed,
        }
    }

    /// Exact Pareto response and Pareto censoring on `[1, inf)`;
    /// `gamma_g = None` means no censoring.
    pub fn pareto(gamma_f: f64, gamma_g: Option<f64>, n: usize, seed: u64) -> Self {
        Self {
            name: "pareto_exact".into(),
            covariate: CovariateLaw::Uniform { lo: 1.0, hi: 5.0 },
            response: ResponseLaw::Pareto {
                gamma: IndexProfile::Constant(gamma_f),
            },
            censoring: match gamma_g {
                Some(g) => CensoringLaw::Pareto {
                    gamma: IndexProfile::Constant(g),
                    scale: 1.0,
                },
                None => CensoringLaw::None,
            },
            n,
            seed,
        }
    }

    /// Canned configurations by name.
    pub fn canned(name: &str) -> Option<Self> {
        match name {
            "burr_paper" => Some(Self::burr_paper(100_000, 7)),
            "pareto_exact" => Some(Self::pareto(0.5, Some(1.0), 20_000, 7)),
            "pareto_uncensored" => {
                let mut c = Self::pareto(0.5, None, 20_000, 7);
                c.name = "pareto_uncensored".into();
                Some(c)
            }
            _ => None,
        }
    }

    /// Parses a flat `key = value` file; `#` starts a comment. A `base`
    /// key starts from a canned configuration.
    pub fn from_kv(text: &str) -> Result<Self, SimulationError> {
        let mut map = BTreeMap::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                SimulationError::Config(format!("line {}: expected key = value", ln + 1))
            })?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        Self::from_map(map)
    }

    pub fn from_map(mut map: BTreeMap<String, String>) -> Result<Self, SimulationError> {
        let cfg_err = |m: String| SimulationError::Config(m);
        let base = map.remove("base").unwrap_or_else(|| "burr_paper".into());
        let mut cfg = Self::canned(&base).ok_or_else(|| cfg_err(format!("unknown base '{base}'")))?;
        let mut take = |key: &str| map.remove(key);
        let profile = |s: String| -> Result<IndexProfile, SimulationError> {
            s.parse().map_err(|e: crate::profile::ProfileError| SimulationError::Config(e.to_string()))
        };
        let num = |key: &str, s: String| -> Result<f64, SimulationError> {
            s.parse().map_err(|_| SimulationError::Config(format!("{key}: bad number '{s}'")))
        };
        if let Some(v) = take("name") {
            cfg.name = v;
        }
        if let Some(v) = take("covariate") {
            cfg.covariate = parse_covariate(&v)?;
        }
        if let Some(v) = take("n") {
            cfg.n = v.parse().map_err(|_| cfg_err(format!("n: bad integer '{v}'")))?;
        }
        if let Some(v) = take("seed") {
            cfg.seed = v.parse().map_err(|_| cfg_err(format!("seed: bad integer '{v}'")))?;
        }
        let response = take("response");
        let (gamma_f, kappa, tau) = (take("gamma_f"), take("kappa"), take("tau"));
        match response.as_deref() {
            Some("pareto") => {
                let g = gamma_f.ok_or_else(|| cfg_err("pareto response needs gamma_f".into()))?;
                cfg.response = ResponseLaw::Pareto { gamma: profile(g)? };
            }
            Some("burr") | None => {
                let (mut k, mut t) = match &cfg.response {
                    ResponseLaw::Burr { kappa, tau } => (kappa.clone(), tau.clone()),
                    ResponseLaw::Pareto { gamma } => {
                        (IndexProfile::Constant(1.0), IndexProfile::Reciprocal(Box::new(gamma.clone())))
                    }
                };
                if let Some(v) = kappa {
                    k = profile(v)?;
                }
                if let Some(v) = gamma_f {
                    if tau.is_some() {
                        return Err(cfg_err("give either tau or gamma_f for a burr response".into()));
                    }
                    if k != IndexProfile::Constant(1.0) {
                        return Err(cfg_err("gamma_f sets tau = 1/gamma_f and needs kappa = const:1".into()));
                    }
                    t = IndexProfile::Reciprocal(Box::new(profile(v)?));
                }
                if let Some(v) = tau {
                    t = profile(v)?;
                }
                cfg.response = ResponseLaw::Burr { kappa: k, tau: t };
            }
            Some(other) => return Err(cfg_err(format!("unknown response '{other}'"))),
        }
        let censoring = take("censoring");
        let keys = [
            "gamma_g", "scale_g", "gamma_c1", "gamma_c2", "cutoff", "scale_c1", "scale_c2",
        ];
        let mut vals: BTreeMap<&str, String> = BTreeMap::new();
        for k in keys {
            if let Some(v) = take(k) {
                vals.insert(k, v);
            }
        }
        let kind = censoring.unwrap_or_else(|| match cfg.censoring {
            CensoringLaw::None => "none".into(),
            CensoringLaw::Pareto { .. } => "pareto".into(),
            CensoringLaw::Mixture { .. } => "mixture".into(),
        });
        cfg.censoring = match kind.as_str() {
            "none" => CensoringLaw::None,
            "pareto" => {
                let (g0, s0) = match &cfg.censoring {
                    CensoringLaw::Pareto { gamma, scale } => (Some(gamma.clone()), *scale),
                    _ => (None, 1.0),
                };
                let gamma = match vals.remove("gamma_g") {
                    Some(v) => profile(v)?,
                    None => g0.ok_or_else(|| cfg_err("pareto censoring needs gamma_g".into()))?,
                };
                let scale = match vals.remove("scale_g") {
                    Some(v) => num("scale_g", v)?,
                    None => s0,
                };
                CensoringLaw::Pareto { gamma, scale }
            }
            "mixture" => {
                let (mut g1, mut g2, mut cut, mut s1, mut s2) = match &cfg.censoring {
                    CensoringLaw::Mixture {
                        gamma_c1,
                        gamma_c2,
                        cutoff,
                        scale_c1,
                        scale_c2,
                    } => (gamma_c1.clone(), *gamma_c2, *cutoff, *scale_c1, *scale_c2),
                    _ => (reference_gamma_c1(), 14.0, 100.0, 1.0, 1.0),
                };
                if let Some(v) = vals.remove("gamma_c1") {
                    g1 = profile(v)?;
                }
                if let Some(v) = vals.remove("gamma_c2") {
                    g2 = num("gamma_c2", v)?;
                }
                if let Some(v) = vals.remove("cutoff") {
                    cut = num("cutoff", v)?;
                }
                if let Some(v) = vals.remove("scale_c1") {
                    s1 = num("scale_c1", v)?;
                }
                if let Some(v) = vals.remove("scale_c2") {
                    s2 = num("scale_c2", v)?;
                }
                CensoringLaw::Mixture {
                    gamma_c1: g1,
                    gamma_c2: g2,
                    cutoff: cut,
                    scale_c1: s1,
                    scale_c2: s2,
                }
            }
            other => return Err(cfg_err(format!("unknown censoring '{other}'"))),
        };
        if let Some(k) = vals.keys().next() {
            return Err(cfg_err(format!("key '{k}' does not apply to censoring '{kind}'")));
        }
        if let Some(k) = map.keys().next() {
            return Err(cfg_err(format!("unknown key '{k}'")));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Flat `key = value` text that [`ModelConfig::from_kv`] reads back.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "name = {}", self.name);
        let _ = writeln!(s, "covariate = {}", covariate_text(&self.covariate));
        match &self.response {
            ResponseLaw::Burr { kappa, tau } => {
                let _ = writeln!(s, "response = burr\nkappa = {kappa}\ntau = {tau}");
            }
            ResponseLaw::Pareto { gamma } => {
                let _ = writeln!(s, "response = pareto\ngamma_f = {gamma}");
            }
        }
        match &self.censoring {
            CensoringLaw::None => {
                let _ = writeln!(s, "censoring = none");
            }
            CensoringLaw::Pareto { gamma, scale } => {
                let _ = writeln!(s, "censoring = pareto\ngamma_g = {gamma}\nscale_g = {scale}");
            }
            CensoringLaw::Mixture {
                gamma_c1,
                gamma_c2,
                cutoff,
                scale_c1,
                scale_c2,
            } => {
                let _ = writeln!(
                    s,
                    "censoring = mixture\ngamma_c1 = {gamma_c1}\ngamma_c2 = {gamma_c2}\ncutoff = {cutoff}\nscale_c1 = {scale_c1}\nscale_c2 = {scale_c2}"
                );
            }
        }
        let _ = writeln!(s, "n = {}\nseed = {}", self.n, self.seed);
        s
    }

    /// One-line parameter echo.
    pub fn describe(&self) -> String {
        self.to_kv().lines().collect::<Vec<_>>().join("; ")
    }

    pub fn validate(&self) -> Result<(), SimulationError> {
        let (lo, hi) = self.covariate.support();
        let grid: Vec<f64> = (0..=200).map(|i| lo + (hi - lo) * i as f64 / 200.0).collect();
        let positive = |p: &IndexProfile, what: &str| -> Result<(), SimulationError> {
            if grid.iter().all(|x| p.eval(*x) > 0.0 && p.eval(*x).is_finite()) {
                Ok(())
            } else {
                Err(SimulationError::Config(format!("{what} must be positive on the covariate support")))
            }
        };
        match &self.response {
            ResponseLaw::Burr { kappa, tau } => {
                positive(kappa, "kappa")?;
                positive(tau, "tau")?;
            }
            ResponseLaw::Pareto { gamma } => positive(gamma, "gamma_f")?,
        }
        match &self.censoring {
            CensoringLaw::None => {}
            CensoringLaw::Pareto { gamma, scale } => {
                positive(gamma, "gamma_g")?;
                if !(*scale > 0.0) {
                    return Err(SimulationError::Config("scale_g must be positive".into()));
                }
            }
            CensoringLaw::Mixture {
                gamma_c1,
                gamma_c2,
                cutoff,
                scale_c1,
                scale_c2,
            } => {
                positive(gamma_c1, "gamma_c1")?;
                if !(*gamma_c2 > 0.0 && *cutoff > 0.0 && *scale_c1 > 0.0 && *scale_c2 > 0.0) {
                    return Err(SimulationError::Config(
                        "gamma_c2, cutoff and scales must be positive".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn family(&self) -> Arc<dyn RVFamily> {
        match &self.response {
            ResponseLaw::Burr { kappa, tau } => Arc::new(BurrFamily::new(kappa.clone(), tau.clone())),
            ResponseLaw::Pareto { gamma } => Arc::new(ParetoFamily::new(gamma.clone())),
        }
    }

    fn features(&self) -> Vec<f64> {
        let mut f = self.family().x_features();
        f.extend(self.censoring.features());
        f.sort_by(f64::total_cmp);
        f.dedup();
        f
    }

    /// `(x, y)` from two uniforms in `(0, 1)`.
    pub fn draw_response(&self, u_x: f64, u_y: f64) -> (f64, f64) {
        let x = self.covariate.quantile(u_x);
        let y = match &self.response {
            ResponseLaw::Burr { kappa, tau } => {
                // ((1 - U)^(-1/kappa) - 1)^(1/tau) with 1 - U = u_y
                let base = (-u_y.ln() / kappa.eval(x)).exp_m1();
                base.powf(1.0 / tau.eval(x))
            }
            ResponseLaw::Pareto { gamma } => pareto_draw(gamma.eval(x), 1.0, u_y),
        };
        (x, y)
    }

    /// Censoring value at covariate `x`; both mixture components are drawn.
    pub fn draw_censoring(&self, x: f64, u1: f64, u2: f64) -> f64 {
        match &self.censoring {
            CensoringLaw::None => f64::INFINITY,
            CensoringLaw::Pareto { gamma, scale } => pareto_draw(gamma.eval(x), *scale, u1),
            CensoringLaw::Mixture {
                gamma_c1,
                gamma_c2,
                cutoff,
                scale_c1,
                scale_c2,
            } => {
                let c1 = pareto_draw(gamma_c1.eval(x), *scale_c1, u1);
                let c2 = pareto_draw(*gamma_c2, *scale_c2, u2);
                if c1 < *cutoff {
                    c1
                } else {
                    c2
                }
            }
        }
    }

    /// Draws `(x, y, c)` from four uniforms in `(0, 1)`.
    pub fn draw(&self, u: [f64; 4]) -> (f64, f64, f64) {
        let (x, y) = self.draw_response(u[0], u[1]);
        (x, y, self.draw_censoring(x, u[2], u[3]))
    }

    /// Raw draws `(x, y, c)` for `n` observations under `seed`; blocks of
    /// observations use their own derived streams.
    pub fn draw_raw(&self, n: usize, seed: u64) -> Vec<(f64, f64, f64)> {
        let blocks = n.div_ceil(BLOCK);
        let parts: Vec<Vec<(f64, f64, f64)>> = (0..blocks)
            .into_par_iter()
            .map(|b| {
                let mut rng = seeds::rng(seeds::derive_seed(seed ^ BLOCK_STREAM, b as u64));
                let len = BLOCK.min(n - b * BLOCK);
                (0..len)
                    .map(|_| {
                        let u: [f64; 4] = [
                            rng.sample(Open01),
                            rng.sample(Open01),
                            rng.sample(Open01),
                            rng.sample(Open01),
                        ];
                        self.draw(u)
                    })
                    .collect()
            })
            .collect();
        parts.into_iter().flatten().collect()
    }

    /// A sample of size `n` under an explicit seed.
    pub fn sample_with_seed(&self, n: usize, seed: u64) -> Result<CensoredSample, SimulationError> {
        let raw = self.draw_raw(n, seed);
        let mut z = Vec::with_capacity(n);
        let mut delta = Vec::with_capacity(n);
        let mut x = Vec::with_capacity(n);
        for (xi, y, c) in raw {
            z.push(y.min(c));
            delta.push(y <= c);
            x.push(xi);
        }
        Ok(CensoredSample::from_columns(z, delta, x, 1)?)
    }

    /// Seed of replicate `r` of a study.
    pub fn replicate_seed(&self, r: usize) -> u64 {
        seeds::derive_seed(self.seed, r as u64)
    }

    /// Log survival of `Z = min(Y, C)` given `X = x`.
    pub fn log_survival_z(&self, x: f64, t: f64) -> f64 {
        self.family().log_survival(x, t) + self.censoring.log_survival(x, t)
    }

    /// Law of `X` given `Z > t`.
    pub fn covariate_given_exceedance(&self, t: f64) -> Result<CovariateLaw, SimulationError> {
        let fam = self.family();
        let cens = self.censoring.clone();
        Ok(self.covariate.tilted(
            Arc::new(move |x| fam.log_survival(x, t) + cens.log_survival(x, t)),
            &self.features(),
        )?)
    }

    /// `int phi dF^t`: `X` given `Z > t`, then `Y / t` given `Y > t` and `X`.
    pub fn finite_t_center(&self, phi: &PhiFunction, t: f64) -> Result<f64, SimulationError> {
        let law = self.covariate_given_exceedance(t)?;
        let fam = self.family();
        let mut breaks = self.features();
        breaks.extend_from_slice(phi.x_breaks());
        Ok(law.expectation(
            |x| {
                let log_st = fam.log_survival(x, t);
                let st = log_st.exp();
                let mut pts = vec![0.0, 1.0];
                for &b in phi.y_breaks() {
                    if b > 1.0 {
                        pts.push((fam.log_survival(x, t * b) - log_st).exp());
                    }
                }
                pts.sort_by(f64::total_cmp);
                pts.dedup();
                integrate_with_breaks(
                    |s| {
                        if s <= 0.0 {
                            return 0.0;
                        }
                        match fam.tail_quantile(x, 1.0 / (s * st)) {
                            Ok(y) if y.is_finite() => phi.eval(&[x], (y / t).max(1.0)),
                            _ => 0.0,
                        }
                    },
                    &pts,
                    &inner_opts(),
                )
                .value
            },
            &breaks,
        ))
    }

    /// The limit model when the response is exactly Pareto with a
    /// constant index and censoring is absent or constant-index Pareto.
    pub fn exact_limit_model(&self) -> Option<LimitModel> {
        let ResponseLaw::Pareto { gamma } = &self.response else {
            return None;
        };
        if !gamma.is_constant() {
            return None;
        }
        let gamma_g = match &self.censoring {
            CensoringLaw::None => None,
            CensoringLaw::Pareto { gamma, scale } if gamma.is_constant() && *scale <= 1.0 => {
                Some(gamma.eval(0.0))
            }
            _ => return None,
        };
        LimitModel::new(self.covariate.clone(), gamma.clone(), gamma_g).ok()
    }

    /// Tail counterpart of the model at threshold `t`: covariate atoms
    /// (continuous laws discretized) with the conditional laws of `Y / t`
    /// and `C / t` beyond 1.
    pub fn tail_law_at(&self, t: f64, phi: &PhiFunction) -> Result<TailLaw, SimulationError> {
        let mut extra = self.features();
        extra.extend_from_slice(phi.x_breaks());
        let (xs, ps) = self.covariate.discretize(&extra, 4, 8);
        let fam = self.family();
        let mut atoms = Vec::with_capacity(xs.len());
        let logs: Vec<f64> = xs
            .iter()
            .zip(&ps)
            .map(|(x, p)| p.ln() + self.log_survival_z(*x, t))
            .collect();
        let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !m.is_finite() {
            return Err(SimulationError::InfeasibleThreshold { rate: 0.0 });
        }
        let pareto_exact = matches!(self.response, ResponseLaw::Pareto { .. }) && t >= 1.0;
        for (x, l) in xs.iter().zip(&logs) {
            let x = *x;
            let response: Arc<dyn ConditionalLaw> = if pareto_exact {
                Arc::new(ParetoLaw { gamma: fam.gamma(x) })
            } else {
                let (f1, f2) = (fam.clone(), fam.clone());
                let log_st = fam.log_survival(x, t);
                let st = log_st.exp();
                Arc::new(FnLaw {
                    survival: Arc::new(move |v| (f1.log_survival(x, t * v) - log_st).exp()),
                    density: Arc::new(move |v| t * f2.density(x, t * v) / st),
                    breaks: Vec::new(),
                })
            };
            let censoring: Option<Arc<dyn ConditionalLaw>> = match &self.censoring {
                CensoringLaw::None => None,
                CensoringLaw::Pareto { gamma, scale } if t >= *scale => {
                    Some(Arc::new(ParetoLaw { gamma: gamma.eval(x) }))
                }
                law => {
                    let (c1, c2) = (law.clone(), law.clone());
                    let log_gt = law.log_survival(x, t);
                    let gt = log_gt.exp();
                    let breaks = law.breaks().iter().map(|b| b / t).filter(|b| *b > 1.0).collect();
                    Some(Arc::new(FnLaw {
                        survival: Arc::new(move |v| (c1.log_survival(x, t * v) - log_gt).exp()),
                        density: Arc::new(move |v| t * c2.density(x, t * v) / gt),
                        breaks,
                    }))
                }
            };
            atoms.push(TailAtom {
                x,
                weight: (l - m).exp(),
                response,
                censoring,
            });
        }
        Ok(TailLaw::new(atoms)?)
    }
}
