//! Parsers for grid and function arguments.

use extkm::estimators::Region;
use extkm::km::PhiFunction;

use crate::CliError;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// `start:stop:step` (stop inclusive), a comma list, or one value.
pub fn parse_k_grid(text: &str) -> Result<Vec<usize>, CliError> {
    let bad = || usage(format!("bad k grid '{text}', expected start:stop:step"));
    let ks: Vec<usize> = if text.contains(':') {
        let p: Vec<usize> = text
            .split(':')
            .map(|s| s.trim().parse().map_err(|_| bad()))
            .collect::<Result<_, _>>()?;
        if p.len() != 3 || p[2] == 0 || p[1] < p[0] {
            return Err(bad());
        }
        (p[0]..=p[1]).step_by(p[2]).collect()
    } else {
        text.split(',')
            .map(|s| s.trim().parse().map_err(|_| bad()))
            .collect::<Result<_, _>>()?
    };
    if ks.is_empty() || ks[0] == 0 || ks.windows(2).any(|w| w[1] <= w[0]) {
        return Err(usage(format!("k grid '{text}' must be positive and strictly increasing")));
    }
    Ok(ks)
}

/// Real grid `start:stop:step`; points are `start + i step`.
pub fn parse_real_grid(text: &str) -> Result<Vec<f64>, CliError> {
    let bad = || usage(format!("bad grid '{text}', expected start:stop:step or a comma list"));
    if !text.contains(':') {
        let v: Vec<f64> = text
            .split(',')
            .map(|s| s.trim().parse().map_err(|_| bad()))
            .collect::<Result<_, _>>()?;
        if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
            return Err(bad());
        }
        return Ok(v);
    }
    let p: Vec<f64> = text
        .split(':')
        .map(|s| s.trim().parse().map_err(|_| bad()))
        .collect::<Result<_, _>>()?;
    if p.len() != 3 || !(p[2] > 0.0) || !(p[1] >= p[0]) || p.iter().any(|x| !x.is_finite()) {
        return Err(bad());
    }
    let count = ((p[1] - p[0]) / p[2] + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| p[0] + i as f64 * p[2]).collect())
}

/// Log-spaced grid `lo:hi:count`.
pub fn parse_log_grid(text: &str) -> Result<Vec<f64>, CliError> {
    let bad = || usage(format!("bad log grid '{text}', expected lo:hi:count"));
    let p: Vec<&str> = text.split(':').collect();
    if p.len() != 3 {
        return parse_real_grid(text);
    }
    let lo: f64 = p[0].trim().parse().map_err(|_| bad())?;
    let hi: f64 = p[1].trim().parse().map_err(|_| bad())?;
    let n: usize = p[2].trim().parse().map_err(|_| bad())?;
    if !(lo > 0.0 && hi >= lo && n >= 1) {
        return Err(bad());
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..n)
        .map(|i| match i {
            0 => lo,
            i if i == n - 1 => hi,
            i => (a + (b - a) * i as f64 / (n - 1) as f64).exp(),
        })
        .collect())
}

/// `le:c` (`1{y <= c}`), `log`, `const:c`, `region:<region>` or
/// `kernel:a,h` (weight) and `kernel-log:a,h`.
pub fn parse_phi(text: &str) -> Result<PhiFunction, CliError> {
    let t = text.trim();
    let num = |s: &str| -> Result<f64, CliError> {
        s.trim().parse().map_err(|_| usage(format!("bad number in phi '{text}'")))
    };
    if t == "log" {
        return Ok(PhiFunction::log_y());
    }
    if let Some(c) = t.strip_prefix("le:") {
        return Ok(PhiFunction::y_at_most(num(c)?));
    }
    if let Some(c) = t.strip_prefix("const:") {
        return Ok(PhiFunction::constant(num(c)?));
    }
    if let Some(r) = t.strip_prefix("region:") {
        return Ok(Region::parse(r).map_err(|e| usage(e.to_string()))?.indicator());
    }
    for (prefix, log) in [("kernel-log:", true), ("kernel:", false)] {
        if let Some(rest) = t.strip_prefix(prefix) {
            let (a, h) = rest.split_once(',').ok_or_else(|| usage(format!("bad kernel phi '{text}'")))?;
            let cfg = extkm::estimators::KernelConfig::new(num(a)?, num(h)?)
                .map_err(|e| usage(e.to_string()))?;
            return Ok(if log { cfg.weighted_log() } else { cfg.weight() });
        }
    }
    Err(usage(format!(
        "unknown phi '{text}' (use le:c, log, const:c, region:a,b, kernel:a,h or kernel-log:a,h)"
    )))
}
