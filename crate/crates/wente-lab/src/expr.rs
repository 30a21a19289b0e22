//! Catalog of analytic field descriptors.
//!
//! Descriptors are short strings, used by the CLI and by tests:
//!
//! | string        | field                                             |
//! |---------------|---------------------------------------------------|
//! | `one`         | 1                                                 |
//! | `x`, `y`      | Cartesian coordinates                             |
//! | `xy`, `x2`, `y2` | quadratic monomials                            |
//! | `r`           | radius                                            |
//! | `r2`          | r^2                                               |
//! | `r^B`         | r^B for a real exponent B                         |
//! | `rcos^B`      | r^B cos(theta)                                    |
//! | `log_r`       | ln r                                              |
//! | `h`           | x/r^2 - x (harmonic away from the origin)         |
//! | `f:A`         | x r^A                                             |
//! | `a_alpha:A`   | (A+2) r^A                                         |
//! | `psi:J`       | annulus cutoff at dyadic level J                  |
//! | `chi:J`       | radial step cutoff at dyadic level J              |
//! | `bump:J`      | sin^2 bump on [2^-J-2, 2^-J] times cos(theta)     |

use std::fmt;
use std::str::FromStr;

use crate::dyadic::{cutoff_chi, cutoff_psi};
use crate::error::Error;

#[derive(Debug, Clone, PartialEq)]
pub enum FieldExpr {
    One,
    X,
    Y,
    Xy,
    X2,
    Y2,
    R,
    R2,
    RPow(f64),
    RPowCos(f64),
    LogR,
    H,
    /// x r^alpha
    F(f64),
    /// (alpha + 2) r^alpha
    AAlpha(f64),
    Psi(u32),
    Chi(u32),
    /// sin^2 radial bump supported on [2^-j-2, 2^-j], times cos(theta).
    AnnulusBump(u32),
}

impl FieldExpr {
    pub fn eval(&self, r: f64, theta: f64) -> f64 {
        let x = r * theta.cos();
        let y = r * theta.sin();
        match self {
            FieldExpr::One => 1.0,
            FieldExpr::X => x,
            FieldExpr::Y => y,
            FieldExpr::Xy => x * y,
            FieldExpr::X2 => x * x,
            FieldExpr::Y2 => y * y,
            FieldExpr::R => r,
            FieldExpr::R2 => r * r,
            FieldExpr::RPow(b) => r.powf(*b),
            FieldExpr::RPowCos(b) => r.powf(*b) * theta.cos(),
            FieldExpr::LogR => r.ln(),
            FieldExpr::H => x * (1.0 / (r * r) - 1.0),
            FieldExpr::F(a) => x * r.powf(*a),
            FieldExpr::AAlpha(a) => (a + 2.0) * r.powf(*a),
            FieldExpr::Psi(j) => cutoff_psi(*j).eval(r),
            FieldExpr::Chi(j) => cutoff_chi(*j).eval(r),
            FieldExpr::AnnulusBump(j) => annulus_bump(*j, r) * theta.cos(),
        }
    }
}

/// C^1 sin^2 bump on the doubled dyadic annulus [2^-j-2, 2^-j].
pub fn annulus_bump(j: u32, r: f64) -> f64 {
    let hi = (-(j as f64)).exp2();
    let lo = hi / 4.0;
    if r <= lo || r >= hi {
        0.0
    } else {
        let t = (r - lo) / (hi - lo);
        (std::f64::consts::PI * t).sin().powi(2)
    }
}

impl fmt::Display for FieldExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldExpr::One => write!(f, "one"),
            FieldExpr::X => write!(f, "x"),
            FieldExpr::Y => write!(f, "y"),
            FieldExpr::Xy => write!(f, "xy"),
            FieldExpr::X2 => write!(f, "x2"),
            FieldExpr::Y2 => write!(f, "y2"),
            FieldExpr::R => write!(f, "r"),
            FieldExpr::R2 => write!(f, "r2"),
            FieldExpr::RPow(b) => write!(f, "r^{b}"),
            FieldExpr::RPowCos(b) => write!(f, "rcos^{b}"),
            FieldExpr::LogR => write!(f, "log_r"),
            FieldExpr::H => write!(f, "h"),
            FieldExpr::F(a) => write!(f, "f:{a}"),
            FieldExpr::AAlpha(a) => write!(f, "a_alpha:{a}"),
            FieldExpr::Psi(j) => write!(f, "psi:{j}"),
            FieldExpr::Chi(j) => write!(f, "chi:{j}"),
            FieldExpr::AnnulusBump(j) => write!(f, "bump:{j}"),
        }
    }
}

impl FromStr for FieldExpr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let s = s.trim();
        let parse_f = |v: &str| {
            v.parse::<f64>()
                .map_err(|_| Error::UnknownDescriptor(s.to_string()))
        };
        let parse_u = |v: &str| {
            v.parse::<u32>()
                .map_err(|_| Error::UnknownDescriptor(s.to_string()))
        };
        match s {
            "one" => return Ok(FieldExpr::One),
            "x" => return Ok(FieldExpr::X),
            "y" => return Ok(FieldExpr::Y),
            "xy" => return Ok(FieldExpr::Xy),
            "x2" => return Ok(FieldExpr::X2),
            "y2" => return Ok(FieldExpr::Y2),
            "r" => return Ok(FieldExpr::R),
            "r2" => return Ok(FieldExpr::R2),
            "log_r" => return Ok(FieldExpr::LogR),
            "h" => return Ok(FieldExpr::H),
            _ => {}
        }
        if let Some(rest) = s.strip_prefix("rcos^") {
            return Ok(FieldExpr::RPowCos(parse_f(rest)?));
        }
        if let Some(rest) = s.strip_prefix("r^") {
            return Ok(FieldExpr::RPow(parse_f(rest)?));
        }
        if let Some(rest) = s.strip_prefix("f:") {
            return Ok(FieldExpr::F(parse_f(rest)?));
        }
        if let Some(rest) = s.strip_prefix("a_alpha:") {
            return Ok(FieldExpr::AAlpha(parse_f(rest)?));
        }
        if let Some(rest) = s.strip_prefix("psi:") {
            return Ok(FieldExpr::Psi(parse_u(rest)?));
        }
        if let Some(rest) = s.strip_prefix("chi:") {
            return Ok(FieldExpr::Chi(parse_u(rest)?));
        }
        if let Some(rest) = s.strip_prefix("bump:") {
            return Ok(FieldExpr::AnnulusBump(parse_u(rest)?));
        }
        Err(Error::UnknownDescriptor(s.to_string()))
    }
}
