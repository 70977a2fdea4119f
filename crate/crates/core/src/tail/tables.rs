//! Tabulated `gamma0`, `gamma1`, `gamma2` for a tail law of `(X, Y, C)`
//! with `X` discrete and `Y`, `C` conditionally independent given `X`,
//! both supported on `[1, inf)`.
//!
//! With `S_V(v) = P(V > v)`, `h0(v)` the density of censored `V`, and
//! `m(x, w) = phi(x, w) gamma0(w)` over uncensored mass:
//! - `log gamma0(y) = int_1^y h0(v) / S_V(v) dv`,
//! - `M(v) = E[phi gamma0 1{delta = 1, V > v}]`, `gamma1 = M / S_V`,
//! - `gamma2(y) = int_1^y h0(v) gamma1(v) / S_V(v) dv`.
//!
//! Each quantity is accumulated cell by cell on a grid in `u = log v` with
//! Gauss-Legendre rules, then read back through cubic Hermite
//! interpolation using the exact derivatives at the cell ends.

use std::sync::Arc;

use crate::km::PhiFunction;
use crate::quadrature::gauss_legendre;

use super::TailError;

/// A law on `[1, inf)` given by survival, density and inverse survival.
pub trait ConditionalLaw: Send + Sync {
    fn survival(&self, v: f64) -> f64;
    fn density(&self, v: f64) -> f64;
    /// `v` with `survival(v) = p`, `p` in `(0, 1]`.
    fn inverse_survival(&self, p: f64) -> f64;
    /// Points in `v` where the law has kinks or jumps.
    fn breaks(&self) -> Vec<f64> {
        Vec::new()
    }
}

/// Pareto law with survival `v^(-1/gamma)` on `[1, inf)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParetoLaw {
    pub gamma: f64,
}

impl ConditionalLaw for ParetoLaw {
    fn survival(&self, v: f64) -> f64 {
        if v <= 1.0 {
            1.0
        } else {
            (-v.ln() / self.gamma).exp()
        }
    }

    fn density(&self, v: f64) -> f64 {
        if v < 1.0 {
            0.0
        } else {
            (-(1.0 / self.gamma + 1.0) * v.ln()).exp() / self.gamma
        }
    }

    fn inverse_survival(&self, p: f64) -> f64 {
        (-self.gamma * p.ln()).exp()
    }
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A law on `[1, inf)` from closures; the inverse is found by bisection.
#[derive(Clone)]
pub struct FnLaw {
    pub survival: ScalarFn,
    pub density: ScalarFn,
    pub breaks: Vec<f64>,
}

impl ConditionalLaw for FnLaw {
    fn survival(&self, v: f64) -> f64 {
        if v <= 1.0 {
            1.0
        } else {
            (self.survival)(v)
        }
    }

    fn density(&self, v: f64) -> f64 {
        if v < 1.0 {
            0.0
        } else {
            (self.density)(v)
        }
    }

    fn inverse_survival(&self, p: f64) -> f64 {
        if p >= 1.0 {
            return 1.0;
        }
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        while self.survival(hi.exp()) > p && hi < 700.0 {
            lo = hi;
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.survival(mid.exp()) > p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (0.5 * (lo + hi)).exp()
    }

    fn breaks(&self) -> Vec<f64> {
        self.breaks.clone()
    }
}

/// One covariate value with its mass and conditional laws; `censoring`
/// is `None` when there is no censoring.
#[derive(Clone)]
pub struct TailAtom {
    pub x: f64,
    pub weight: f64,
    pub response: Arc<dyn ConditionalLaw>,
    pub censoring: Option<Arc<dyn ConditionalLaw>>,
}

/// A tail law of `(X, Y, C)` with finitely many covariate atoms.
#[derive(Clone)]
pub struct TailLaw {
    atoms: Vec<TailAtom>,
    censored: bool,
}

impl TailLaw {
    pub fn new(mut atoms: Vec<TailAtom>) -> Result<Self, TailError> {
        if atoms.is_empty() {
            return Err(TailError::InvalidLaw("tail law needs at least one atom".into()));
        }
        let total: f64 = atoms.iter().map(|a| a.weight).sum();
        if !(total > 0.0) {
            return Err(TailError::InvalidLaw("atom weights must have positive sum".into()));
        }
        atoms.iter_mut().for_each(|a| a.weight /= total);
        let censored = atoms.iter().any(|a| a.censoring.is_some());
        Ok(Self { atoms, censored })
    }

    pub fn atoms(&self) -> &[TailAtom] {
        &self.atoms
    }

    pub fn is_censored(&self) -> bool {
        self.censored
    }

    pub fn survival_v(&self, v: f64) -> f64 {
        self.atoms
            .iter()
            .map(|a| a.weight * a.response.survival(v) * cens_survival(a, v))
            .sum()
    }

    /// Density of `V` on `{delta = 0}`.
    pub fn censored_density(&self, v: f64) -> f64 {
        self.atoms
            .iter()
            .map(|a| match &a.censoring {
                Some(c) => a.weight * a.response.survival(v) * c.density(v),
                None => 0.0,
            })
            .sum()
    }

    /// Density of `V` (both kinds) given atom `a`.
    pub fn atom_v_density(a: &TailAtom, v: f64) -> f64 {
        let fy = a.response.density(v) * cens_survival(a, v);
        match &a.censoring {
            Some(c) => fy + a.response.survival(v) * c.density(v),
            None => fy,
        }
    }

    fn all_breaks(&self) -> Vec<f64> {
        let mut b = Vec::new();
        for a in &self.atoms {
            b.extend(a.response.breaks());
            if let Some(c) = &a.censoring {
                b.extend(c.breaks());
            }
        }
        b
    }

    /// Draws `(x, v, delta)` from three uniforms.
    pub fn sample(&self, u_atom: f64, u_y: f64, u_c: f64) -> (f64, f64, bool) {
        let mut acc = 0.0;
        let mut chosen = &self.atoms[self.atoms.len() - 1];
        for a in &self.atoms {
            acc += a.weight;
            if u_atom < acc {
                chosen = a;
                break;
            }
        }
        let y = chosen.response.inverse_survival(u_y);
        let c = match &chosen.censoring {
            Some(law) => law.inverse_survival(u_c),
            None => f64::INFINITY,
        };
        (chosen.x, y.min(c), y <= c)
    }
}

fn cens_survival(a: &TailAtom, v: f64) -> f64 {
    match &a.censoring {
        Some(c) => c.survival(v),
        None => 1.0,
    }
}

/// Options for [`GammaTables::build`].
#[derive(Debug, Clone, Copy)]
pub struct TableOptions {
    /// Cell width in `log v`.
    pub du: f64,
    /// Gauss-Legendre nodes per cell.
    pub nodes: usize,
    /// Hard cap on `log v`.
    pub max_log_v: f64,
}

impl Default for TableOptions {
    fn default() -> Self {
        Self {
            du: 0.005,
            nodes: 8,
            max_log_v: 120.0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    u0: f64,
    u1: f64,
    d0: f64,
    d1: f64,
}

#[derive(Debug, Clone)]
struct Track {
    values: Vec<f64>,
    cells: Vec<Cell>,
}

fn hermite(track: &Track, grid: &[f64], u: f64) -> f64 {
    let n = grid.len();
    if u <= grid[0] {
        return track.values[0];
    }
    if u >= grid[n - 1] {
        let last = track.cells[n - 2];
        return track.values[n - 1] + last.d1 * (u - grid[n - 1]);
    }
    let j = grid.partition_point(|g| *g <= u) - 1;
    let c = track.cells[j];
    let h = c.u1 - c.u0;
    let s = (u - c.u0) / h;
    let (p0, p1) = (track.values[j], track.values[j + 1]);
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0) * p0
        + (s3 - 2.0 * s2 + s) * h * c.d0
        + (-2.0 * s3 + 3.0 * s2) * p1
        + (s3 - s2) * h * c.d1
}

/// Tabulated `gamma` functions of a [`TailLaw`] for one `phi`.
pub struct GammaTables {
    law: TailLaw,
    grid: Vec<f64>,
    log_g0: Track,
    big_m: Track,
    g2: Track,
}

impl GammaTables {
    pub fn build(law: &TailLaw, phi: &PhiFunction, opts: &TableOptions) -> Result<Self, TailError> {
        let law = law.clone();
        // grid end: every response survival below 1e-16 or S_V near underflow
        let mut u_max = 1.0;
        while u_max < opts.max_log_v {
            let v = f64::exp(u_max);
            let resp = law
                .atoms
                .iter()
                .map(|a| a.response.survival(v))
                .fold(0.0, f64::max);
            let sv = law.survival_v(v);
            if resp < 1e-16 || sv < 1e-250 {
                break;
            }
            u_max += 0.5;
        }
        let u_max = u_max.min(opts.max_log_v);
        let n = (u_max / opts.du).ceil() as usize;
        let mut grid: Vec<f64> = (0..=n).map(|j| u_max * j as f64 / n as f64).collect();
        for b in phi.y_breaks().iter().copied().chain(law.all_breaks()) {
            if b > 1.0 && b.ln() < u_max {
                grid.push(b.ln());
            }
        }
        grid.sort_by(f64::total_cmp);
        grid.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        let (gx, gw) = gauss_legendre(opts.nodes);
        let cells = grid.len() - 1;
        let nudge = |u0: f64, u1: f64| 1e-9 * (u1 - u0);

        let censored = law.censored;
        // derivative of log gamma0 in u
        let d_log_g0 = |u: f64| {
            if !censored {
                return 0.0;
            }
            let v = u.exp();
            let h0 = law.censored_density(v);
            if h0 == 0.0 {
                return 0.0;
            }
            let s = law.survival_v(v);
            if s > 0.0 {
                v * h0 / s
            } else {
                0.0
            }
        };
        let mut log_g0 = Track {
            values: vec![0.0; grid.len()],
            cells: Vec::with_capacity(cells),
        };
        for j in 0..cells {
            let (u0, u1) = (grid[j], grid[j + 1]);
            let half = 0.5 * (u1 - u0);
            let mut acc = 0.0;
            if censored {
                for (x, w) in gx.iter().zip(&gw) {
                    acc += w * d_log_g0(u0 + half * (x + 1.0));
                }
            }
            log_g0.values[j + 1] = log_g0.values[j] + half * acc;
            let e = nudge(u0, u1);
            log_g0.cells.push(Cell {
                u0,
                u1,
                d0: d_log_g0(u0 + e),
                d1: d_log_g0(u1 - e),
            });
        }
        let g0_at = |u: f64| hermite(&log_g0, &grid, u).exp();

        // M from the top; the integrand is v * sum_a w_a phi gamma0 f_Y S_C
        let m_integrand = |u: f64| {
            let v = u.exp();
            let g0 = if censored { g0_at(u) } else { 1.0 };
            let mut s = 0.0;
            for a in &law.atoms {
                let f = a.response.density(v);
                if f == 0.0 {
                    continue;
                }
                let p = phi.eval(&[a.x], v);
                if p != 0.0 {
                    s += a.weight * p * f * cens_survival(a, v);
                }
            }
            v * g0 * s
        };
        let mut big_m = Track {
            values: vec![0.0; grid.len()],
            cells: vec![
                Cell {
                    u0: 0.0,
                    u1: 0.0,
                    d0: 0.0,
                    d1: 0.0
                };
                cells
            ],
        };
        // remainder beyond the grid from a local power-law fit
        let top = grid[grid.len() - 1];
        let m_top = m_integrand(top);
        let m_prev = m_integrand(top - opts.du);
        let remainder = if m_top != 0.0 && m_prev != 0.0 && m_top.signum() == m_prev.signum() {
            let slope = (m_top.abs().ln() - m_prev.abs().ln()) / opts.du;
            if slope < 0.0 {
                -m_top / slope
            } else {
                0.0
            }
        } else {
            0.0
        };
        big_m.values[grid.len() - 1] = remainder;
        for j in (0..cells).rev() {
            let (u0, u1) = (grid[j], grid[j + 1]);
            let half = 0.5 * (u1 - u0);
            let mut acc = 0.0;
            for (x, w) in gx.iter().zip(&gw) {
                acc += w * m_integrand(u0 + half * (x + 1.0));
            }
            big_m.values[j] = big_m.values[j + 1] + half * acc;
            let e = nudge(u0, u1);
            big_m.cells[j] = Cell {
                u0,
                u1,
                d0: -m_integrand(u0 + e),
                d1: -m_integrand(u1 - e),
            };
        }
        let m_at = |u: f64| hermite(&big_m, &grid, u);

        // gamma2 from the bottom
        let g2_integrand = |u: f64| {
            if !censored {
                return 0.0;
            }
            let v = u.exp();
            let h0 = law.censored_density(v);
            if h0 == 0.0 {
                return 0.0;
            }
            let s = law.survival_v(v);
            if s > 0.0 {
                v * h0 * m_at(u) / (s * s)
            } else {
                0.0
            }
        };
        let mut g2 = Track {
            values: vec![0.0; grid.len()],
            cells: Vec::with_capacity(cells),
        };
        for j in 0..cells {
            let (u0, u1) = (grid[j], grid[j + 1]);
            let half = 0.5 * (u1 - u0);
            let mut acc = 0.0;
            if censored {
                for (x, w) in gx.iter().zip(&gw) {
                    acc += w * g2_integrand(u0 + half * (x + 1.0));
                }
            }
            g2.values[j + 1] = g2.values[j] + half * acc;
            let e = nudge(u0, u1);
            g2.cells.push(Cell {
                u0,
                u1,
                d0: g2_integrand(u0 + e),
                d1: g2_integrand(u1 - e),
            });
        }
        Ok(Self {
            law,
            grid,
            log_g0,
            big_m,
            g2,
        })
    }

    pub fn law(&self) -> &TailLaw {
        &self.law
    }

    pub fn gamma0(&self, v: f64) -> f64 {
        if !self.law.censored || v <= 1.0 {
            return 1.0;
        }
        hermite(&self.log_g0, &self.grid, v.ln()).exp()
    }

    /// `M(v) = (1 - H(v)) gamma1(v)`.
    pub fn upper_mass(&self, v: f64) -> f64 {
        hermite(&self.big_m, &self.grid, v.max(1.0).ln())
    }

    pub fn gamma1(&self, v: f64) -> f64 {
        let s = self.law.survival_v(v.max(1.0));
        if s > 0.0 {
            self.upper_mass(v) / s
        } else {
            0.0
        }
    }

    pub fn gamma2(&self, v: f64) -> f64 {
        if !self.law.censored || v <= 1.0 {
            return 0.0;
        }
        hermite(&self.g2, &self.grid, v.ln())
    }

    /// `W = phi gamma0 delta + gamma1 (1 - delta) - gamma2` at one point.
    pub fn w(&self, phi: &PhiFunction, x: f64, v: f64, delta: bool) -> f64 {
        let g2 = self.gamma2(v);
        if delta {
            phi.eval(&[x], v) * self.gamma0(v) - g2
        } else {
            self.gamma1(v) - g2
        }
    }

    /// `int phi dF` over uncensored mass weighted by `gamma0`, i.e. `M(1)`.
    pub fn target(&self) -> f64 {
        self.upper_mass(1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pareto_law(gf: f64, gg: Option<f64>) -> TailLaw {
        TailLaw::new(vec![TailAtom {
            x: 0.0,
            weight: 1.0,
            response: Arc::new(ParetoLaw { gamma: gf }),
            censoring: gg.map(|g| Arc::new(ParetoLaw { gamma: g }) as Arc<dyn ConditionalLaw>),
        }])
        .unwrap()
    }

    #[test]
    fn limit_gamma0_is_power() {
        let law = pareto_law(0.5, Some(1.0));
        let t = GammaTables::build(&law, &PhiFunction::y_at_most(2.0), &TableOptions::default()).unwrap();
        for v in [1.0, 1.7, 2.0, 10.0, 333.0] {
            assert!((t.gamma0(v) / v - 1.0).abs() < 1e-9, "{v} {}", t.gamma0(v));
        }
        // M(1) = P(Y <= 2) for phi = 1{y <= 2}
        assert!((t.target() - 0.75).abs() < 1e-10);
        // gamma1(v) = (v^-2 - 1/4) / v^-3 below 2, zero above
        for v in [1.2_f64, 1.9] {
            let expect = (v.powi(-2) - 0.25) / v.powi(-3);
            assert!((t.gamma1(v) - expect).abs() < 1e-8);
        }
        assert!(t.gamma1(3.0).abs() < 1e-12);
        // gamma2(y) = int_1^y gamma1(v)/v dv = int (v^-2 - 1/4) v^2 dv = (y - 1) - (y^3 - 1)/12
        for y in [1.5, 2.0, 7.0] {
            let yy: f64 = if y < 2.0 { y } else { 2.0 };
            let expect = (yy - 1.0) - (yy.powi(3) - 1.0) / 12.0;
            assert!((t.gamma2(y) - expect).abs() < 1e-8, "{y}");
        }
    }

    #[test]
    fn uncensored_tables_are_trivial() {
        let law = pareto_law(0.5, None);
        let t = GammaTables::build(&law, &PhiFunction::log_y(), &TableOptions::default()).unwrap();
        assert_eq!(t.gamma0(5.0), 1.0);
        assert_eq!(t.gamma2(5.0), 0.0);
        assert!((t.target() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn fn_law_inverse() {
        let law = FnLaw {
            survival: Arc::new(|v: f64| v.powf(-2.0)),
            density: Arc::new(|v: f64| 2.0 * v.powf(-3.0)),
            breaks: vec![],
        };
        assert!((law.inverse_survival(0.25) - 2.0).abs() < 1e-9);
    }
}
