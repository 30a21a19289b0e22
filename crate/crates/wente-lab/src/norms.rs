//! Weighted energies, weighted sup norms, and Lorentz quasinorms.
//!
//! Every norm is computed on the quadrature surrogate: the field is treated
//! as a step function taking its node value on a cell of the node's area
//! weight. Lorentz integrals are evaluated exactly on that step
//! distribution, so no quadrature-in-t tolerance enters.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grid::{ScalarField, VectorField};

/// Radial weight catalog.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Weight {
    /// w = 1
    One,
    /// w = r^(2 alpha)
    Pow(f64),
    /// w = r^2 |log r|
    Crit,
    /// w = r^2 |log r|^beta
    CritBeta(f64),
    /// w = r^2 log^2(1 + 1/r) log(1 + log(1/r))
    Dgr,
}

impl Weight {
    pub fn eval(&self, r: f64) -> f64 {
        match self {
            Weight::One => 1.0,
            Weight::Pow(alpha) => {
                if *alpha == 0.0 {
                    1.0
                } else {
                    r.powf(2.0 * alpha)
                }
            }
            Weight::Crit => r * r * r.ln().abs(),
            Weight::CritBeta(beta) => {
                if *beta == 0.0 {
                    r * r
                } else {
                    r * r * r.ln().abs().powf(*beta)
                }
            }
            Weight::Dgr => {
                let l = (1.0 + 1.0 / r).ln();
                r * r * l * l * (1.0 + (1.0 / r).ln().max(0.0)).ln()
            }
        }
    }
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Weight::One => write!(f, "one"),
            Weight::Pow(a) => write!(f, "pow:{a}"),
            Weight::Crit => write!(f, "crit"),
            Weight::CritBeta(b) => write!(f, "critbeta:{b}"),
            Weight::Dgr => write!(f, "dgr"),
        }
    }
}

impl FromStr for Weight {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one" => return Ok(Weight::One),
            "crit" => return Ok(Weight::Crit),
            "dgr" => return Ok(Weight::Dgr),
            _ => {}
        }
        if let Some(rest) = s.strip_prefix("pow:") {
            return rest
                .parse::<f64>()
                .map(Weight::Pow)
                .map_err(|_| Error::UnknownDescriptor(s.into()));
        }
        if let Some(rest) = s.strip_prefix("critbeta:") {
            return rest
                .parse::<f64>()
                .map(Weight::CritBeta)
                .map_err(|_| Error::UnknownDescriptor(s.into()));
        }
        Err(Error::UnknownDescriptor(s.into()))
    }
}

/// sqrt( int w(r) |v|^2 dA ).
pub fn weighted_energy(v: &VectorField, w: &Weight) -> f64 {
    let grid = v.grid();
    let mut acc = 0.0;
    for (k, &r) in grid.radii().iter().enumerate() {
        let wr = w.eval(r) * grid.quad_weight(k);
        for i in 0..grid.n_theta() {
            let x = v.vx()[(k, i)];
            let y = v.vy()[(k, i)];
            acc += wr * (x * x + y * y);
        }
    }
    acc.max(0.0).sqrt()
}

/// max over nodes of r^alpha |f|.
pub fn weighted_sup(f: &ScalarField, alpha: f64) -> f64 {
    assert!((0.0..=1.0).contains(&alpha), "alpha must lie in [0,1]");
    let grid = f.grid();
    let mut best = 0.0f64;
    for (k, &r) in grid.radii().iter().enumerate() {
        let ra = if alpha == 0.0 { 1.0 } else { r.powf(alpha) };
        for i in 0..grid.n_theta() {
            best = best.max(ra * f.values()[(k, i)].abs());
        }
    }
    best
}

fn sorted_layers(f: &ScalarField) -> Vec<(f64, f64)> {
    let grid = f.grid();
    let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(grid.n_r() * grid.n_theta());
    for (k, row) in f.values().outer_iter().enumerate() {
        let w = grid.quad_weight(k);
        for &v in row.iter() {
            pairs.push((v.abs(), w));
        }
    }
    pairs.sort_unstable_by(|a, b| b.0.total_cmp(&a.0));
    pairs
}

/// Lorentz quasinorm
/// `p^(1/q) ( int_0^inf t^q |{|f| >= t}|^(q/p) dt/t )^(1/q)`,
/// evaluated exactly on the step distribution of the sampled field.
pub fn lorentz(f: &ScalarField, p: f64, q: f64) -> f64 {
    assert!(p > 0.0 && p.is_finite(), "p must be finite positive");
    assert!(q > 0.0 && q.is_finite(), "q must be finite positive");
    let pairs = sorted_layers(f);
    let mut integral = 0.0;
    let mut measure = 0.0;
    for (idx, &(v, w)) in pairs.iter().enumerate() {
        measure += w;
        let v_next = if idx + 1 < pairs.len() {
            pairs[idx + 1].0
        } else {
            0.0
        };
        if v > v_next {
            integral += measure.powf(q / p) * (v.powf(q) - v_next.powf(q)) / q;
        }
    }
    p.powf(1.0 / q) * integral.powf(1.0 / q)
}

/// Weak quasinorm `sup_t t |{|f| >= t}|^(1/p)` on the step distribution.
pub fn lorentz_weak(f: &ScalarField, p: f64) -> f64 {
    assert!(p > 0.0 && p.is_finite(), "p must be finite positive");
    let pairs = sorted_layers(f);
    let mut best = 0.0f64;
    let mut measure = 0.0;
    for &(v, w) in pairs.iter() {
        measure += w;
        best = best.max(v * measure.powf(1.0 / p));
    }
    best
}

/// Identifiers carried by a ratio row.
#[derive(Debug, Clone)]
pub struct RatioMeta {
    pub experiment: String,
    pub weight_a: String,
    pub weight_b: String,
}

/// One measured quotient lhs / (rhs_a * rhs_b).
#[derive(Debug, Clone)]
pub struct RatioReport {
    pub lhs: f64,
    pub rhs_a: f64,
    pub rhs_b: f64,
    pub ratio: f64,
    pub meta: RatioMeta,
}

impl RatioReport {
    pub fn new(lhs: f64, rhs_a: f64, rhs_b: f64, meta: RatioMeta) -> Result<RatioReport> {
        if !(lhs >= 0.0 && rhs_a >= 0.0 && rhs_b >= 0.0) {
            return Err(Error::DegenerateInput(
                "ratio entries must be nonnegative".into(),
            ));
        }
        if rhs_a * rhs_b == 0.0 {
            if lhs == 0.0 {
                return Ok(RatioReport {
                    lhs,
                    rhs_a,
                    rhs_b,
                    ratio: 0.0,
                    meta,
                });
            }
            return Err(Error::DegenerateInput(
                "zero denominator in ratio report".into(),
            ));
        }
        let ratio = lhs / (rhs_a * rhs_b);
        Ok(RatioReport {
            lhs,
            rhs_a,
            rhs_b,
            ratio,
            meta,
        })
    }

    pub fn csv_header() -> &'static str {
        "experiment,weight_a,weight_b,lhs,rhs_a,rhs_b,ratio"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{:.16e},{:.16e},{:.16e},{:.16e}",
            self.meta.experiment, self.meta.weight_a, self.meta.weight_b, self.lhs, self.rhs_a,
            self.rhs_b, self.ratio
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::FieldExpr;
    use crate::grid::{make_grid, sample, ScalarField};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn weight_catalog_identities() {
        for r in [0.01, 0.1, 0.3, 0.7, 1.0] {
            assert_eq!(Weight::Pow(0.0).eval(r), Weight::One.eval(r));
            assert_relative_eq!(
                Weight::CritBeta(1.0).eval(r),
                Weight::Crit.eval(r),
                max_relative = 1e-14
            );
            assert!(Weight::Dgr.eval(r) >= 0.0);
        }
        assert_eq!(Weight::Crit.eval(1.0), 0.0);
    }

    #[test]
    fn weighted_energy_closed_forms() {
        let g = make_grid(128, 8, 16).unwrap();
        let y = sample(&FieldExpr::Y, &g).unwrap();
        let gy = y.gradient();
        assert_relative_eq!(
            weighted_energy(&gy, &Weight::One),
            PI.sqrt(),
            max_relative = 1e-10
        );
        assert_relative_eq!(
            weighted_energy(&gy, &Weight::Pow(1.0)),
            (PI / 2.0).sqrt(),
            max_relative = 1e-10
        );
    }

    #[test]
    fn critically_weighted_h_tail_grows_like_log() {
        let g = make_grid(128, 8, 16).unwrap();
        let h = sample(&FieldExpr::H, &g).unwrap();
        let s = 0.125;
        let tail = h.gradient().restrict_annulus(s, 1.0);
        let e = weighted_energy(&tail, &Weight::Pow(1.0));
        assert!(e >= (PI * (1.0f64 / s).ln()).sqrt());
    }

    #[test]
    fn weighted_sup_examples() {
        let g = make_grid(128, 8, 16).unwrap();
        let one = ScalarField::from_fn(&g, |_, _| 1.0);
        assert_eq!(weighted_sup(&one, 0.0), 1.0);
        let inv_r = ScalarField::from_fn(&g, |r, _| 1.0 / r);
        assert_relative_eq!(weighted_sup(&inv_r, 1.0), 1.0, max_relative = 1e-12);
        // alpha = 0 equals plain max-abs exactly
        let f = ScalarField::from_fn(&g, |r, t| (3.0 * t).sin() * (1.0 - r));
        assert_eq!(weighted_sup(&f, 0.0), f.max_abs());
    }

    #[test]
    fn lorentz_constant_field_closed_forms() {
        let g = make_grid(128, 8, 16).unwrap();
        let one = ScalarField::from_fn(&g, |_, _| 1.0);
        assert_relative_eq!(lorentz(&one, 2.0, 1.0), 2.0 * PI.sqrt(), max_relative = 1e-12);
        assert_relative_eq!(lorentz_weak(&one, 2.0), PI.sqrt(), max_relative = 1e-12);
        // c * (p/q)^(1/q) * pi^(1/p) for a constant c
        for (c, p, q) in [(1.0f64, 2.0f64, 1.0f64), (2.5, 3.0, 2.0), (0.7, 2.0, 4.0)] {
            let f = ScalarField::from_fn(&g, |_, _| c);
            let expect = c * (p / q).powf(1.0 / q) * PI.powf(1.0 / p);
            assert_relative_eq!(lorentz(&f, p, q), expect, max_relative = 1e-12);
        }
        let zero = ScalarField::zeros(&g);
        assert_eq!(lorentz_weak(&zero, 2.0), 0.0);
        assert_eq!(lorentz(&zero, 2.0, 1.0), 0.0);
    }

    #[test]
    fn weak_norm_of_inverse_radius() {
        // |{1/r >= t}| = pi/t^2 for t >= 1, so the weak L2 norm is sqrt(pi).
        // The step surrogate overshoots by at most the cell-edge factor
        // 2^(1/(2 npl)).
        let g = make_grid(128, 8, 16).unwrap();
        let f = ScalarField::from_fn(&g, |r, _| 1.0 / r);
        let val = lorentz_weak(&f, 2.0);
        let overshoot = (1.0f64 / 32.0).exp2();
        assert!(val >= PI.sqrt() * (1.0 - 1e-12));
        assert!(val <= PI.sqrt() * overshoot * 1.01, "val = {val}");
    }

    #[test]
    fn lorentz_22_matches_plain_l2() {
        let g = make_grid(64, 4, 8).unwrap();
        for seed in 0..5u32 {
            let f = ScalarField::from_fn(&g, |r, t| {
                ((seed as f64 + 1.0) * t).sin() * (1.0 - r) + 0.3 * (r * 7.0 + seed as f64).cos()
            });
            assert_relative_eq!(lorentz(&f, 2.0, 2.0), f.l2_norm(), max_relative = 1e-8);
        }
    }

    #[test]
    fn lorentz_nesting_weak_below_21() {
        let g = make_grid(64, 4, 8).unwrap();
        for seed in 0..8u32 {
            let f = ScalarField::from_fn(&g, |r, t| {
                (t * (1.0 + seed as f64)).cos() * r + (seed as f64 * 0.77).sin()
            });
            assert!(lorentz_weak(&f, 2.0) <= lorentz(&f, 2.0, 1.0) + 1e-12);
        }
    }

    #[test]
    fn critbeta_integral_ordering_inside_small_ball() {
        // for fields supported in B_{1/e}, larger beta gives larger energy
        let g = make_grid(128, 8, 16).unwrap();
        let f = ScalarField::from_fn(&g, |r, t| {
            if r <= 1.0 / std::f64::consts::E {
                (1.0 + t.cos()) * r
            } else {
                0.0
            }
        });
        let v = f.gradient().restrict_annulus(0.0, 1.0 / std::f64::consts::E);
        let e1 = weighted_energy(&v, &Weight::CritBeta(0.3));
        let e2 = weighted_energy(&v, &Weight::CritBeta(0.8));
        assert!(e1 <= e2);
    }

    #[test]
    fn dgr_dominates_crit_pointwise_on_inner_half() {
        let mut worst: f64 = 0.0;
        for k in 0..400 {
            let r = 0.5 * (-(k as f64) * 0.03).exp();
            if r < 1e-6 {
                break;
            }
            let ratio = Weight::Crit.eval(r) / Weight::Dgr.eval(r);
            worst = worst.max(ratio);
        }
        assert!(worst <= 1.1, "worst CRIT/DGR ratio {worst:.4}");
    }

    #[test]
    fn ratio_report_cases() {
        let meta = RatioMeta {
            experiment: "t".into(),
            weight_a: "one".into(),
            weight_b: "one".into(),
        };
        let r = RatioReport::new(1.0, 1.0, 1.0, meta.clone()).unwrap();
        assert_eq!(r.ratio, 1.0);
        let r = RatioReport::new(0.0, 1.0, 1.0, meta.clone()).unwrap();
        assert_eq!(r.ratio, 0.0);
        assert!(RatioReport::new(1.0, 0.0, 1.0, meta).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn lorentz_scaling_homogeneity(c in 0.1f64..10.0) {
            let g = make_grid(16, 1, 4).unwrap();
            let f = ScalarField::from_fn(&g, |r, t| t.sin() + r);
            let scaled = f.scale(c);
            let a = lorentz(&scaled, 2.0, 1.0);
            let b = c * lorentz(&f, 2.0, 1.0);
            prop_assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0));
        }

        #[test]
        fn weak_nesting_holds_for_random_profiles(seed in 0u64..64) {
            let g = make_grid(16, 1, 4).unwrap();
            let s = seed as f64;
            let f = ScalarField::from_fn(&g, |r, t| ((s + 1.0) * t).sin() * r + 0.1 * s);
            prop_assert!(lorentz_weak(&f, 2.0) <= lorentz(&f, 2.0, 1.0) + 1e-12);
        }
    }
}
