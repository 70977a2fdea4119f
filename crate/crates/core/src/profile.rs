//! Covariate-dependent index functions such as `gamma_F(x)`.
//!
//! Text form, used by config files and the CLI:
//! `const:0.5`, `bumps:0.5,2,0.1,2;4` (base, height, width, centers) and
//! `recip:<profile>` for `1 / profile(x)`.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::stats::normal_pdf;

#[derive(Debug, Error, PartialEq)]
#[error("invalid index profile '{text}': {reason}")]
pub struct ProfileError {
    pub text: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum IndexProfile {
    Constant(f64),
    /// `base + height * sum_c phi((x - c) / width)` with `phi` the standard
    /// normal density.
    Bumps {
        base: f64,
        height: f64,
        width: f64,
        centers: Vec<f64>,
    },
    Reciprocal(Box<IndexProfile>),
}

impl IndexProfile {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Self::Constant(c) => *c,
            Self::Bumps {
                base,
                height,
                width,
                centers,
            } => {
                base + height
                    * centers
                        .iter()
                        .map(|c| normal_pdf((x - c) / width))
                        .sum::<f64>()
            }
            Self::Reciprocal(inner) => 1.0 / inner.eval(x),
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            Self::Constant(_) => true,
            Self::Bumps { height, .. } => *height == 0.0,
            Self::Reciprocal(inner) => inner.is_constant(),
        }
    }

    /// Locations where the profile changes fast; useful quadrature breaks.
    pub fn features(&self) -> Vec<f64> {
        match self {
            Self::Constant(_) => Vec::new(),
            Self::Bumps { centers, .. } => centers.clone(),
            Self::Reciprocal(inner) => inner.features(),
        }
    }
}

impl fmt::Display for IndexProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant(c) => write!(f, "const:{c}"),
            Self::Bumps {
                base,
                height,
                width,
                centers,
            } => {
                let cs: Vec<String> = centers.iter().map(|c| c.to_string()).collect();
                write!(f, "bumps:{base},{height},{width},{}", cs.join(";"))
            }
            Self::Reciprocal(inner) => write!(f, "recip:{inner}"),
        }
    }
}

impl FromStr for IndexProfile {
    type Err = ProfileError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let err = |reason: &str| ProfileError {
            text: text.to_string(),
            reason: reason.to_string(),
        };
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| err("bad number"));
        let text_t = text.trim();
        if let Some(rest) = text_t.strip_prefix("recip:") {
            return Ok(Self::Reciprocal(Box::new(rest.parse()?)));
        }
        if let Some(rest) = text_t.strip_prefix("const:") {
            return Ok(Self::Constant(num(rest)?));
        }
        if let Some(rest) = text_t.strip_prefix("bumps:") {
            let parts: Vec<&str> = rest.split(',').collect();
            if parts.len() != 4 {
                return Err(err("expected bumps:base,height,width,c1;c2;..."));
            }
            let centers = parts[3]
                .split(';')
                .map(num)
                .collect::<Result<Vec<_>, _>>()?;
            let width = num(parts[2])?;
            if !(width > 0.0) {
                return Err(err("width must be positive"));
            }
            return Ok(Self::Bumps {
                base: num(parts[0])?,
                height: num(parts[1])?,
                width,
                centers,
            });
        }
        // a bare number is a constant
        num(text_t).map(Self::Constant)
    }
}

/// Response tail index of the two-bump simulation design:
/// `0.5 + 2 phi((x - 2)/0.1) + 2 phi((x - 4)/0.1)`.
pub fn reference_gamma_f() -> IndexProfile {
    IndexProfile::Bumps {
        base: 0.5,
        height: 2.0,
        width: 0.1,
        centers: vec![2.0, 4.0],
    }
}

/// Body censoring index of the same design:
/// `0.75 + 3 phi((x - 2)/0.1) + 3 phi((x - 4)/0.1)`.
pub fn reference_gamma_c1() -> IndexProfile {
    IndexProfile::Bumps {
        base: 0.75,
        height: 3.0,
        width: 0.1,
        centers: vec![2.0, 4.0],
    }
}
