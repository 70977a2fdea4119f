//! Grid diagnostics for the uniform regular-variation conditions.

use serde::Serialize;

use super::family::RVFamily;

/// Reference point for the limit of `c(x, y)`.
pub const C_REFERENCE_Y: f64 = 1e100;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionRow {
    pub condition: String,
    /// Grid value of `y` or `u`.
    pub at: f64,
    /// Supremum over the covariate grid.
    pub sup_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionSummary {
    pub condition: String,
    pub last_gap: f64,
    pub monotone_decay: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsReport {
    pub family: String,
    pub rows: Vec<ConditionRow>,
    pub summary: Vec<ConditionSummary>,
}

impl DiagnosticsReport {
    pub fn gap(&self, condition: &str, at: f64) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.condition == condition && r.at == at)
            .map(|r| r.sup_gap)
    }
}

fn sup<F: Fn(f64) -> Option<f64>>(xs: &[f64], f: F) -> f64 {
    xs.iter()
        .map(|x| f(*x).map_or(f64::INFINITY, f64::abs))
        .fold(0.0, |a, b| if b.is_nan() { f64::INFINITY } else { a.max(b) })
}

/// Sup-norm discrepancies of `c`, `delta`, `eta`, the `eta` speed
/// `log(u) |1 - eta/gamma|` and the slowly varying spread
/// `max L(x_b, y) / min L(x_a, y) - 1` over `x_grid`, at each grid value.
/// Singular evaluations are reported as infinite gaps.
pub fn condition_diagnostics(
    family: &dyn RVFamily,
    x_grid: &[f64],
    y_grid: &[f64],
    u_grid: &[f64],
) -> DiagnosticsReport {
    let mut rows = Vec::new();
    let mut push = |name: &str, at: f64, gap: f64| {
        rows.push(ConditionRow {
            condition: name.to_string(),
            at,
            sup_gap: gap,
        })
    };
    for &y in y_grid {
        push(
            "c",
            y,
            sup(x_grid, |x| {
                Some(family.karamata_c(x, y) - family.karamata_c(x, C_REFERENCE_Y))
            }),
        );
    }
    for &u in u_grid {
        push(
            "delta",
            u,
            sup(x_grid, |x| Some(family.karamata_delta(x, u) - 1.0 / family.gamma(x))),
        );
    }
    for &u in u_grid {
        push(
            "eta",
            u,
            sup(x_grid, |x| family.eta(x, u).ok().map(|e| e - family.gamma(x))),
        );
    }
    for &u in u_grid {
        push(
            "eta_speed",
            u,
            sup(x_grid, |x| family.eta_relative_gap(x, u).ok().map(|g| u.ln() * g)),
        );
    }
    for &y in y_grid {
        let logs: Vec<f64> = x_grid.iter().map(|x| family.log_slowly_varying(*x, y)).collect();
        let hi = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = logs.iter().cloned().fold(f64::INFINITY, f64::min);
        let gap = if logs.is_empty() {
            0.0
        } else if hi.is_finite() && lo.is_finite() {
            (hi - lo).exp_m1()
        } else {
            f64::INFINITY
        };
        push("slowly_varying_ratio", y, gap);
    }
    let names = ["c", "delta", "eta", "eta_speed", "slowly_varying_ratio"];
    let summary = names
        .iter()
        .map(|name| {
            let mut pts: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| r.condition == *name)
                .map(|r| (r.at, r.sup_gap))
                .collect();
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            let monotone_decay = pts.windows(2).all(|w| w[1].1 <= w[0].1);
            ConditionSummary {
                condition: name.to_string(),
                last_gap: pts.last().map_or(0.0, |p| p.1),
                monotone_decay,
            }
        })
        .collect();
    DiagnosticsReport {
        family: family.name(),
        rows,
        summary,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::{reference_gamma_f, IndexProfile};
    use crate::tail::family::{BurrFamily, ParetoFamily};

    #[test]
    fn pareto_is_exact() {
        let f = ParetoFamily::new(reference_gamma_f());
        let xs: Vec<f64> = (0..=40).map(|i| 1.0 + 0.1 * i as f64).collect();
        let r = condition_diagnostics(&f, &xs, &[10.0, 1e3, 1e6], &[10.0, 1e3, 1e6]);
        assert!(r.rows.iter().all(|row| row.sup_gap == 0.0), "{r:?}");
    }

    #[test]
    fn burr_values() {
        let f = BurrFamily::new(IndexProfile::Constant(1.0), IndexProfile::Constant(2.0));
        let grid = [10.0, 1e3, 1e6];
        let r = condition_diagnostics(&f, &[1.0, 3.0], &grid, &grid);
        let speed = r.gap("eta_speed", 1e6).unwrap();
        assert!((speed - 1.3815e-5).abs() < 1e-8 && speed < 1e-4);
        assert!(r.gap("delta", 1e6).unwrap() < 1e-5);
        assert!(r.summary.iter().all(|s| s.monotone_decay), "{:?}", r.summary);
        // u = 1 is singular for eta
        let s = condition_diagnostics(&f, &[1.0], &[2.0], &[1.0]);
        assert_eq!(s.gap("eta", 1.0), Some(f64::INFINITY));
    }
}
