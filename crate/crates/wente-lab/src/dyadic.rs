//! Dyadic localization machinery: radial cutoffs, the multiscale splitting
//! of b, localization of a, per-level solves and inequality audits.
//!
//! The splitting separates b into its circle-mean radial profile and the
//! mean-free remainder. The profile is cut into single-annulus increments by
//! index clamping (levels tile exactly, so the reconstruction telescopes to
//! machine precision), and the remainder is distributed by a partition of
//! unity built from radial step cutoffs. Supports are arranged one node away
//! from the plateau edges of the matching `psi` cutoff, which makes
//! J(a, b_j) = J(a_j, b_j) hold at stencil precision wherever grad b_j is
//! nonzero.

use crate::error::{Error, Result};
use crate::grid::{jacobian, Grading, ScalarField};
use crate::norms::{weighted_energy, weighted_sup, Weight};
use crate::poisson::{newton_potential_at_rings, solve_dirichlet};

/// Plateau fraction of the C^1 ramp; max slope is 1/((1-GAMMA) * width).
const GAMMA: f64 = 0.2;

fn ramp01(t: f64) -> f64 {
    let v = 1.0 / (1.0 - GAMMA);
    if t <= 0.0 {
        0.0
    } else if t < GAMMA {
        v * t * t / (2.0 * GAMMA)
    } else if t <= 1.0 - GAMMA {
        v * (t - GAMMA / 2.0)
    } else if t < 1.0 {
        1.0 - v * (1.0 - t) * (1.0 - t) / (2.0 * GAMMA)
    } else {
        1.0
    }
}

fn ramp01_deriv(t: f64) -> f64 {
    let v = 1.0 / (1.0 - GAMMA);
    if t <= 0.0 || t >= 1.0 {
        0.0
    } else if t < GAMMA {
        v * t / GAMMA
    } else if t <= 1.0 - GAMMA {
        v
    } else {
        v * (1.0 - t) / GAMMA
    }
}

/// Radial profile: optional ascending edge, plateau at 1, optional
/// descending edge. Piecewise polynomial and C^1.
#[derive(Debug, Clone, Copy)]
pub struct RadialCutoff {
    up: Option<(f64, f64)>,
    down: Option<(f64, f64)>,
}

impl RadialCutoff {
    pub fn eval(&self, r: f64) -> f64 {
        let mut v = 1.0;
        if let Some((u0, u1)) = self.up {
            if r <= u0 {
                return 0.0;
            }
            if r < u1 {
                v *= ramp01((r - u0) / (u1 - u0));
            }
        }
        if let Some((d0, d1)) = self.down {
            if r >= d1 {
                return 0.0;
            }
            if r > d0 {
                v *= 1.0 - ramp01((r - d0) / (d1 - d0));
            }
        }
        v
    }

    pub fn derivative(&self, r: f64) -> f64 {
        let (mut up_v, mut up_d) = (1.0, 0.0);
        if let Some((u0, u1)) = self.up {
            let w = u1 - u0;
            let t = (r - u0) / w;
            up_v = ramp01(t);
            up_d = ramp01_deriv(t) / w;
        }
        let (mut dn_v, mut dn_d) = (1.0, 0.0);
        if let Some((d0, d1)) = self.down {
            let w = d1 - d0;
            let t = (r - d0) / w;
            dn_v = 1.0 - ramp01(t);
            dn_d = -ramp01_deriv(t) / w;
        }
        up_d * dn_v + up_v * dn_d
    }

    /// Closure of { r : cutoff > 0 }, intersected with (0, 1].
    pub fn support(&self) -> (f64, f64) {
        let lo = self.up.map(|(u0, _)| u0).unwrap_or(0.0);
        let hi = self.down.map(|(_, d1)| d1.min(1.0)).unwrap_or(1.0);
        (lo, hi)
    }

    /// Region where the cutoff is exactly 1.
    pub fn plateau(&self) -> (f64, f64) {
        let lo = self.up.map(|(_, u1)| u1).unwrap_or(0.0);
        let hi = self.down.map(|(d0, _)| d0.min(1.0)).unwrap_or(1.0);
        (lo, hi)
    }

    /// int |grad cutoff|^2 dA by 1-D quadrature of the analytic derivative.
    pub fn gradient_energy_sq(&self) -> f64 {
        let mut total = 0.0;
        let mut edges: Vec<(f64, f64)> = Vec::new();
        if let Some(e) = self.up {
            edges.push(e);
        }
        if let Some((d0, d1)) = self.down {
            edges.push((d0, d1.min(1.0)));
        }
        for (lo, hi) in edges {
            if hi <= lo {
                continue;
            }
            let n = 4000;
            let h = (hi - lo) / n as f64;
            let mut acc = 0.0;
            for i in 0..n {
                let r = lo + (i as f64 + 0.5) * h;
                let d = self.derivative(r);
                acc += d * d * r * h;
            }
            total += acc;
        }
        2.0 * std::f64::consts::PI * total
    }
}

/// Radial step: 1 for r <= 2^-j-1, 0 for r >= 2^-j, C^1 polynomial ramp
/// between, |chi'| <= 4 * 2^j.
pub fn cutoff_chi(j: u32) -> RadialCutoff {
    chi_shaved(j, 1.0)
}

/// Step cutoff whose ramp ends at `shave * 2^-j` (shave in (1/2, 1]); used by
/// the decomposition to keep one flat grid node above the ramp.
pub fn chi_shaved(j: u32, shave: f64) -> RadialCutoff {
    let hi = (-(j as f64)).exp2();
    RadialCutoff {
        up: None,
        down: Some((hi / 2.0, shave * hi)),
    }
}

/// Annulus cutoff: 1 on [2^-j-2, 2^-j], ramps down to zero on
/// [2^-j-3, 2^-j-2] and on [2^-j, 2^-j + 2^-j-3] (clamped at r = 1 for j=0).
pub fn cutoff_psi(j: u32) -> RadialCutoff {
    psi_widened(j, 1.0)
}

/// Annulus cutoff whose plateau starts at `widen * 2^-j-2` (widen in
/// (1/2, 1]); the decomposition passes the grid ratio so the plateau covers
/// one extra node below the dyadic boundary.
pub fn psi_widened(j: u32, widen: f64) -> RadialCutoff {
    let top = (-(j as f64)).exp2();
    RadialCutoff {
        up: Some((top / 8.0, widen * top / 4.0)),
        down: Some((top, top * 9.0 / 8.0)),
    }
}

/// Ball cutoff for the truncated deepest piece: 1 on B_{2^-j}.
fn psi_ball(j: u32) -> RadialCutoff {
    let top = (-(j as f64)).exp2();
    RadialCutoff {
        up: None,
        down: Some((top, top * 9.0 / 8.0)),
    }
}

/// One level of the decomposition.
#[derive(Debug, Clone)]
pub struct DyadicPiece {
    pub j: u32,
    /// True for the deepest piece, which absorbs all unresolved levels and
    /// has its support widened to the whole ball B_{2^-j}.
    pub truncated: bool,
    pub b_j: ScalarField,
    pub a_j: Option<ScalarField>,
    pub c_j: Option<f64>,
    pub phi_j: Option<ScalarField>,
    /// Cutoff used (to be used) for localizing a at this level.
    pub psi: RadialCutoff,
    /// max |grad b_j| outside the admissible support, relative to the L2 norm
    /// of grad b.
    pub support_leak_rel: f64,
    /// int |grad b_j|^2 / int_{support} |grad b|^2 (0 when both vanish).
    pub energy_ratio: f64,
    pub b_energy_sq: f64,
    /// True when the piece carries no gradient energy.
    pub degenerate: bool,
}

impl DyadicPiece {
    /// Admissible support of grad b_j: the doubled annulus, or the ball for
    /// the truncated piece.
    pub fn support(&self) -> (f64, f64) {
        let hi = (-(self.j as f64)).exp2();
        if self.truncated {
            (0.0, hi)
        } else {
            (hi / 4.0, hi)
        }
    }
}

#[derive(Debug)]
pub struct DyadicDecomposition {
    pub pieces: Vec<DyadicPiece>,
    pub j_max: u32,
    /// Relative L2 error of sum_j grad b_j against grad b.
    pub reconstruction_error: f64,
}

impl DyadicDecomposition {
    /// Largest per-level energy constant over non-degenerate pieces.
    pub fn c_dec(&self) -> f64 {
        self.pieces
            .iter()
            .filter(|p| !p.degenerate)
            .fold(0.0f64, |m, p| m.max(p.energy_ratio))
    }

    /// Localize `a` on every piece (annulus cutoff per level, ball cutoff on
    /// the truncated piece).
    pub fn localize(&mut self, a: &ScalarField) -> Result<()> {
        for piece in self.pieces.iter_mut() {
            let (lo, hi) = piece.psi.support();
            let hi = hi.min(1.0);
            let c = a.mean_annulus(lo, hi);
            let psi = piece.psi;
            let a_j = ScalarField::from_fn(a.grid(), |r, t| 0.0 * t + psi.eval(r))
                .zip_map(a, |p, av| p * (av - c));
            piece.a_j = Some(a_j);
            piece.c_j = Some(c);
        }
        Ok(())
    }

    /// Solve the localized equation on every piece.
    pub fn solve(&mut self) -> Result<()> {
        for piece in self.pieces.iter_mut() {
            let a_j = piece
                .a_j
                .as_ref()
                .ok_or_else(|| Error::Parameter("piece not localized".into()))?;
            let rhs = jacobian(a_j, &piece.b_j)?;
            let (phi, _) = solve_dirichlet(&rhs)?;
            piece.phi_j = Some(phi);
        }
        Ok(())
    }
}

/// Split b into levels b_j with supp(grad b_j) inside the doubled dyadic
/// annulus, exact gradient reconstruction, and locally controlled energy;
/// levels deeper than `j_max` are merged into the last piece.
pub fn decompose_b(b: &ScalarField, j_max: u32) -> Result<DyadicDecomposition> {
    let grid = b.grid();
    let (ratio, levels) = match grid.grading() {
        Grading::Geometric { ratio, levels } => (*ratio, *levels),
        Grading::Uniform => {
            return Err(Error::Parameter(
                "dyadic decomposition needs a geometrically graded grid".into(),
            ))
        }
    };
    if j_max > levels {
        return Err(Error::Parameter(format!(
            "j_max = {j_max} deeper than the grid's {levels} graded levels"
        )));
    }
    let npl = grid.nodes_per_level() as usize;
    let n_r = grid.n_r();
    let m_last = n_r - 1; // index of r = 1

    let beta = b.circle_means();
    let grad_b = b.gradient();
    let b_norm = grad_b.energy_sq().sqrt();

    // tile top node (one node below 2^-j, except level 0 which reaches r=1)
    let top_index = |j: u32| -> usize {
        if j == 0 {
            m_last
        } else {
            m_last - (j as usize * npl + 1)
        }
    };
    let bot_index = |j: u32| -> usize { m_last - ((j as usize + 1) * npl + 1) };

    // sampled shaved chi profiles, chi_1 .. chi_jmax
    let chi_rows: Vec<Vec<f64>> = (1..=j_max)
        .map(|j| {
            let c = chi_shaved(j, ratio);
            grid.radii().iter().map(|&r| c.eval(r)).collect()
        })
        .collect();
    let chi_at = |j: u32, k: usize| -> f64 {
        if j == 0 {
            1.0
        } else {
            chi_rows[(j - 1) as usize][k]
        }
    };

    let mut pieces = Vec::with_capacity(j_max as usize + 1);
    for j in 0..=j_max {
        let truncated = j == j_max;
        let values = {
            let mut v = b.values().clone();
            if truncated && j == 0 {
                let c = beta[m_last];
                v.mapv_inplace(|x| x - c);
                v
            } else {
                let k_top = top_index(j);
                for k in 0..n_r {
                    let zeta = if truncated {
                        chi_at(j, k)
                    } else {
                        chi_at(j, k) - chi_at(j + 1, k)
                    };
                    let profile = if truncated {
                        beta[k.min(k_top)] - beta[k_top]
                    } else {
                        let k_bot = bot_index(j);
                        beta[k.clamp(k_bot, k_top)] - beta[k_top]
                    };
                    for i in 0..grid.n_theta() {
                        v[(k, i)] = zeta * (b.values()[(k, i)] - beta[k]) + profile;
                    }
                }
                v
            }
        };
        let b_j = ScalarField::from_values(grid, values);

        let psi = if truncated {
            psi_ball(j)
        } else {
            psi_widened(j, ratio)
        };

        let g_j = b_j.gradient();
        let b_energy_sq = g_j.energy_sq();
        let hi = (-(j as f64)).exp2();
        let lo = if truncated { 0.0 } else { hi / 4.0 };
        let mut leak = 0.0f64;
        for (k, &r) in grid.radii().iter().enumerate() {
            if r >= lo * (1.0 - 1e-13) && r <= hi * (1.0 + 1e-13) {
                continue;
            }
            for i in 0..grid.n_theta() {
                let gx = g_j.vx()[(k, i)];
                let gy = g_j.vy()[(k, i)];
                leak = leak.max((gx * gx + gy * gy).sqrt());
            }
        }
        let local = grad_b.energy_sq_annulus(lo, hi);
        let degenerate = b_energy_sq <= 1e-28 * b_norm.powi(2).max(1e-300);
        let energy_ratio = if local > 0.0 { b_energy_sq / local } else { 0.0 };

        pieces.push(DyadicPiece {
            j,
            truncated,
            b_j,
            a_j: None,
            c_j: None,
            phi_j: None,
            psi,
            support_leak_rel: if b_norm > 0.0 { leak / b_norm } else { 0.0 },
            energy_ratio,
            b_energy_sq,
            degenerate,
        });
    }

    // reconstruction: gradients must sum to grad b
    let mut total = pieces[0].b_j.clone();
    for p in pieces.iter().skip(1) {
        total = total.add(&p.b_j);
    }
    let g_tot = total.gradient();
    let mut err_sq = 0.0;
    let mut norm_sq = 0.0;
    for (k, _) in grid.radii().iter().enumerate() {
        let w = grid.quad_weight(k);
        for i in 0..grid.n_theta() {
            let dx = g_tot.vx()[(k, i)] - grad_b.vx()[(k, i)];
            let dy = g_tot.vy()[(k, i)] - grad_b.vy()[(k, i)];
            err_sq += (dx * dx + dy * dy) * w;
            let bx = grad_b.vx()[(k, i)];
            let by = grad_b.vy()[(k, i)];
            norm_sq += (bx * bx + by * by) * w;
        }
    }
    let reconstruction_error = if norm_sq > 0.0 {
        (err_sq / norm_sq).sqrt()
    } else {
        0.0
    };

    Ok(DyadicDecomposition {
        pieces,
        j_max,
        reconstruction_error,
    })
}

/// Localize a at level j: a_j = psi_j (a - c_j), with c_j the quadrature
/// mean of a over C_j = supp(psi_j). Returns a_j and the measured constant
/// int |grad a_j|^2 / int_{C_j} |grad a|^2.
pub fn localize_a(a: &ScalarField, j: u32) -> Result<(ScalarField, f64)> {
    let ratio = a.grid().ratio();
    let psi = psi_widened(j, ratio);
    let (lo, hi) = psi.support();
    let hi = hi.min(1.0);
    let local = a.gradient().energy_sq_annulus(lo, hi);
    if local <= 0.0 {
        return Ok((ScalarField::zeros(a.grid()), 0.0));
    }
    let c = a.mean_annulus(lo, hi);
    let a_j = ScalarField::from_fn(a.grid(), |r, _| psi.eval(r)).zip_map(a, |p, av| p * (av - c));
    let constant = a_j.gradient().energy_sq() / local;
    Ok((a_j, constant))
}

/// Measured constants for the per-level inequalities.
#[derive(Debug, Clone)]
pub struct AuditRecord {
    pub j: u32,
    pub alpha: f64,
    pub skipped: bool,
    /// int |grad phi_j|^2 <= C int |grad b_j|^2 int_{C_j} |grad a|^2
    pub wente_const: f64,
    /// ||r^a phi_j||_inf <= C ||grad a||_2 ||r^a grad b_j||_2
    pub sup_const: f64,
    /// int r^2a |grad phi_j|^2 <= C ||grad a||^2 * W(b_j), where W uses the
    /// r^2a weight for a < 1 and the r^2|log r| weight at a = 1.
    pub energy_const: f64,
    /// Same with the plain r^2a weight on the right even at a = 1; this is
    /// the constant whose growth in j exhibits the logarithmic loss.
    pub energy_const_pow: f64,
    /// Pointwise decay of the volume potential on sample radii >= 2^(1-j).
    pub tail_const: Option<f64>,
}

impl AuditRecord {
    pub fn csv_header() -> &'static str {
        "j,inequality,lhs_weight,alpha,constant"
    }

    pub fn csv_rows(&self) -> Vec<String> {
        let mut rows = vec![
            format!("{},wente_localized,one,{},{:.16e}", self.j, self.alpha, self.wente_const),
            format!("{},sup_weighted,pow,{},{:.16e}", self.j, self.alpha, self.sup_const),
            format!("{},energy_weighted,spec,{},{:.16e}", self.j, self.alpha, self.energy_const),
            format!("{},energy_weighted,pow,{},{:.16e}", self.j, self.alpha, self.energy_const_pow),
        ];
        if let Some(t) = self.tail_const {
            rows.push(format!("{},tail_decay,pow,{},{:.16e}", self.j, self.alpha, t));
        }
        rows
    }
}

/// Audit one solved piece against the per-level inequalities at weight
/// exponent `alpha`.
pub fn audit_piece(a: &ScalarField, piece: &DyadicPiece, alpha: f64) -> Result<AuditRecord> {
    if piece.degenerate {
        return Ok(AuditRecord {
            j: piece.j,
            alpha,
            skipped: true,
            wente_const: 0.0,
            sup_const: 0.0,
            energy_const: 0.0,
            energy_const_pow: 0.0,
            tail_const: None,
        });
    }
    let phi = piece
        .phi_j
        .as_ref()
        .ok_or_else(|| Error::Parameter("piece not solved".into()))?;
    let a_j = piece
        .a_j
        .as_ref()
        .ok_or_else(|| Error::Parameter("piece not localized".into()))?;

    let g_phi = phi.gradient();
    let g_b = piece.b_j.gradient();
    let g_a = a.gradient();
    let (c_lo, c_hi) = piece.psi.support();
    let local_a = g_a.energy_sq_annulus(c_lo, c_hi.min(1.0));
    let norm_a = g_a.energy_sq().sqrt();

    let wente_const = g_phi.energy_sq() / (g_b.energy_sq() * local_a);

    let b_pow = weighted_energy(&g_b, &Weight::Pow(alpha));
    let sup_const = weighted_sup(phi, alpha) / (norm_a * b_pow);

    let lhs_energy = weighted_energy(&g_phi, &Weight::Pow(alpha)).powi(2);
    let rhs_weight = if alpha >= 1.0 {
        Weight::Crit
    } else {
        Weight::Pow(alpha)
    };
    let b_spec = weighted_energy(&g_b, &rhs_weight);
    let energy_const = lhs_energy / (norm_a * norm_a * b_spec * b_spec);
    let energy_const_pow = lhs_energy / (norm_a * norm_a * b_pow * b_pow);

    let tail_const = tail_decay_constant(a_j, piece, alpha, norm_a, b_pow)?;

    Ok(AuditRecord {
        j: piece.j,
        alpha,
        skipped: false,
        wente_const,
        sup_const,
        energy_const,
        energy_const_pow,
        tail_const,
    })
}

/// Measured constant in the pointwise potential decay
/// |x|^a |u~(x)| <= C (r/(r-2^-j)) (2^-j/r)^(1-a) ||grad a|| ||r^a grad b_j||
/// sampled on a few rings with r >= 2^(1-j).
fn tail_decay_constant(
    a_j: &ScalarField,
    piece: &DyadicPiece,
    alpha: f64,
    norm_a: f64,
    b_pow: f64,
) -> Result<Option<f64>> {
    let scale = (-(piece.j as f64)).exp2();
    let r_min = 2.0 * scale;
    if r_min > 0.7 {
        return Ok(None);
    }
    let grid = a_j.grid();
    let rhs = jacobian(a_j, &piece.b_j)?;
    let mut rings = Vec::new();
    for target in [r_min, (r_min * 0.9f64).sqrt(), 0.9] {
        let k = grid.nearest_ring(target);
        if grid.radii()[k] >= r_min * (1.0 - 1e-12) && !rings.contains(&k) {
            rings.push(k);
        }
    }
    if rings.is_empty() {
        return Ok(None);
    }
    let pot = newton_potential_at_rings(&rhs, &rings);
    let mut best = 0.0f64;
    for (row, &k) in rings.iter().enumerate() {
        let r = grid.radii()[k];
        let envelope = (r / (r - scale)) * (scale / r).powf(1.0 - alpha);
        for i in 0..grid.n_theta() {
            let lhs = r.powf(alpha) * pot[(row, i)].abs();
            best = best.max(lhs / (envelope * norm_a * b_pow));
        }
    }
    Ok(Some(best))
}

/// Sum of the solved pieces.
pub fn assemble_phi(decomposition: &DyadicDecomposition) -> Result<ScalarField> {
    let mut acc: Option<ScalarField> = None;
    for p in decomposition.pieces.iter() {
        let phi = p
            .phi_j
            .as_ref()
            .ok_or_else(|| Error::Parameter("piece not solved".into()))?;
        acc = Some(match acc {
            None => phi.clone(),
            Some(s) => s.add(phi),
        });
    }
    acc.ok_or_else(|| Error::Parameter("empty decomposition".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::FieldExpr;
    use crate::grid::{make_grid, sample};
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn reference() -> Arc<crate::grid::PolarGrid> {
        make_grid(128, 8, 16).unwrap()
    }

    #[test]
    fn chi_profile_values_and_slope() {
        let chi0 = cutoff_chi(0);
        assert_eq!(chi0.eval(0.4), 1.0);
        assert_eq!(chi0.eval(1.0), 0.0);
        for j in 0..7u32 {
            let chi = cutoff_chi(j);
            let scale = (-(j as f64)).exp2();
            let bound = 4.0 * (j as f64).exp2();
            let mut max_slope = 0.0f64;
            for k in 0..2000 {
                let r = scale * (0.45 + 0.56 * k as f64 / 2000.0);
                max_slope = max_slope.max(chi.derivative(r).abs());
            }
            assert!(max_slope <= bound, "j={j}: slope {max_slope} > {bound}");
            let e = chi.gradient_energy_sq();
            assert!(e <= 32.0 * PI, "j={j}: chi gradient energy {e}");
        }
    }

    #[test]
    fn psi_profile_values() {
        for j in 0..6u32 {
            let psi = cutoff_psi(j);
            let s = (-(j as f64)).exp2();
            assert_eq!(psi.eval(s / 2.0), 1.0);
            assert_eq!(psi.eval(s / 8.0), 0.0);
            let e = psi.gradient_energy_sq();
            assert!(e.is_finite() && e < 150.0, "j={j}: psi energy {e}");
        }
        // j = 0: support clipped to [1/8, 1]
        let psi0 = cutoff_psi(0);
        assert_eq!(psi0.support(), (0.125, 1.0));
        assert_eq!(psi0.eval(1.0), 1.0);
    }

    #[test]
    fn psi_gradient_energy_uniform_over_levels() {
        let energies: Vec<f64> = (1..7).map(|j| cutoff_psi(j).gradient_energy_sq()).collect();
        let max = energies.iter().cloned().fold(0.0f64, f64::max);
        let min = energies.iter().cloned().fold(f64::MAX, f64::min);
        assert!(max / min < 1.001, "psi energies vary across levels: {energies:?}");
    }

    #[test]
    fn decompose_linear_field() {
        let g = reference();
        let b = sample(&FieldExpr::Y, &g).unwrap();
        let dec = decompose_b(&b, 6).unwrap();
        assert_eq!(dec.pieces.len(), 7);
        assert!(dec.reconstruction_error <= 1e-6, "err {}", dec.reconstruction_error);
        assert!(dec.reconstruction_error <= 1e-10);
        for p in dec.pieces.iter() {
            assert!(
                p.support_leak_rel <= 1e-12,
                "level {} leak {}",
                p.j,
                p.support_leak_rel
            );
        }
        // per-level energies bounded by local energy of grad b
        let c = dec.c_dec();
        assert!(c > 0.0 && c < 12.0, "C_dec = {c}");
    }

    #[test]
    fn decompose_radial_field_gives_radial_pieces() {
        let g = reference();
        let b = ScalarField::from_fn(&g, |r, _| (1.0 + r).ln() + r * r);
        let dec = decompose_b(&b, 5).unwrap();
        assert!(dec.reconstruction_error <= 1e-10);
        let a = ScalarField::from_fn(&g, |r, _| r * r);
        for p in dec.pieces.iter() {
            // angular constancy
            for k in 0..g.n_r() {
                let row = p.b_j.values().row(k);
                let first = row[0];
                for &v in row.iter() {
                    assert!((v - first).abs() <= 1e-12 * (1.0 + first.abs()));
                }
            }
            let j = jacobian(&a, &p.b_j).unwrap();
            assert!(j.max_abs() <= 1e-10);
        }
    }

    #[test]
    fn decompose_annulus_supported_field() {
        let g = reference();
        // gradient lives in A_5 = (2^-6, 2^-5]
        let lo = 1.0 / 64.0;
        let hi = 1.0 / 32.0;
        let b = ScalarField::from_fn(&g, |r, _| {
            if r <= lo {
                0.0
            } else if r >= hi {
                1.0
            } else {
                let t = (r - lo) / (hi - lo);
                t * t * (3.0 - 2.0 * t)
            }
        });
        let dec = decompose_b(&b, 8).unwrap();
        assert!(dec.reconstruction_error <= 1e-10);
        for p in dec.pieces.iter() {
            let active = p.b_energy_sq > 1e-20;
            let expected = (3..=6).contains(&p.j);
            assert_eq!(
                active, expected,
                "level {} active={active} energy={}",
                p.j, p.b_energy_sq
            );
        }
    }

    #[test]
    fn decompose_rejects_unresolvable_depth() {
        let g = make_grid(64, 2, 8).unwrap();
        let b = sample(&FieldExpr::Y, &g).unwrap();
        assert!(decompose_b(&b, 5).is_err());
        let gu = crate::grid::make_uniform_grid(64, 64).unwrap();
        let bu = sample(&FieldExpr::Y, &gu).unwrap();
        assert!(decompose_b(&bu, 2).is_err());
    }

    #[test]
    fn localize_constant_field_vanishes() {
        let g = reference();
        let a = ScalarField::from_fn(&g, |_, _| 3.2);
        let (a_j, c) = localize_a(&a, 2).unwrap();
        assert!(a_j.max_abs() <= 1e-12);
        assert_eq!(c, 0.0);
    }

    #[test]
    fn localize_x_at_level_three() {
        let g = reference();
        let a = sample(&FieldExpr::X, &g).unwrap();
        let (a_j, constant) = localize_a(&a, 3).unwrap();
        // c_3 vanishes by odd symmetry
        let psi = psi_widened(3, g.ratio());
        let k = g.nearest_ring(1.0 / 16.0);
        let r = g.radii()[k];
        let expect = psi.eval(r) * r; // (x - 0) at theta = 0
        assert!((a_j.values()[(k, 0)] - expect).abs() <= 1e-10);
        assert!(constant.is_finite() && constant > 0.0);
    }

    #[test]
    fn localization_constants_uniform_over_levels() {
        let g = reference();
        let a = sample(&FieldExpr::X, &g).unwrap();
        let mut consts = Vec::new();
        for j in 0..=8u32 {
            let (_, c) = localize_a(&a, j).unwrap();
            consts.push(c);
        }
        let max = consts.iter().cloned().fold(0.0f64, f64::max);
        assert!(max < 12.0, "localization constants {consts:?}");
    }

    #[test]
    fn jacobian_localization_agreement() {
        let g = reference();
        let a = ScalarField::from_fn(&g, |r, t| r * t.cos() + 0.4 * (2.0 * t).sin() * r * r);
        let b = ScalarField::from_fn(&g, |r, t| r * t.sin() + 0.2 * (3.0 * t).cos() * r * r * r);
        let mut dec = decompose_b(&b, 6).unwrap();
        dec.localize(&a).unwrap();
        for p in dec.pieces.iter() {
            let a_j = p.a_j.as_ref().unwrap();
            let j_full = jacobian(&a, &p.b_j).unwrap();
            let j_loc = jacobian(a_j, &p.b_j).unwrap();
            let g_bj = p.b_j.gradient();
            let scale = j_full.max_abs().max(1e-300);
            let mut worst = 0.0f64;
            for k in 0..g.n_r() {
                for i in 0..g.n_theta() {
                    let gb = (g_bj.vx()[(k, i)].powi(2) + g_bj.vy()[(k, i)].powi(2)).sqrt();
                    if gb > 0.0 {
                        worst = worst
                            .max((j_full.values()[(k, i)] - j_loc.values()[(k, i)]).abs() / scale);
                    }
                }
            }
            assert!(worst <= 1e-10, "level {} gap {worst:.3e}", p.j);
        }
    }

    #[test]
    fn single_piece_assembly_matches_direct_solve() {
        let g = reference();
        let a = ScalarField::from_fn(&g, |r, t| r * t.cos() + 0.1 * r * r);
        let b = ScalarField::from_fn(&g, |r, t| r * t.sin() - 0.2 * r);
        let mut dec = decompose_b(&b, 0).unwrap();
        dec.localize(&a).unwrap();
        dec.solve().unwrap();
        let assembled = assemble_phi(&dec).unwrap();
        let rhs = jacobian(&a, &b).unwrap();
        let (direct, _) = solve_dirichlet(&rhs).unwrap();
        let err = assembled.sub(&direct).l2_norm() / direct.l2_norm().max(1e-300);
        assert!(err <= 1e-10, "single-piece mismatch {err:.3e}");
    }

    #[test]
    fn assembly_matches_direct_solve_at_depth() {
        let g = reference();
        let a = sample(&FieldExpr::X, &g).unwrap();
        let b = sample(&FieldExpr::Y, &g).unwrap();
        let mut dec = decompose_b(&b, 6).unwrap();
        dec.localize(&a).unwrap();
        dec.solve().unwrap();
        let assembled = assemble_phi(&dec).unwrap();
        let rhs = jacobian(&a, &b).unwrap();
        let (direct, _) = solve_dirichlet(&rhs).unwrap();
        let err = assembled.sub(&direct).l2_norm() / direct.l2_norm();
        assert!(err <= 1e-4, "assembly mismatch {err:.3e}");
        assert!(err <= 1e-9, "assembly mismatch should be near roundoff, got {err:.3e}");
    }

    #[test]
    fn zero_pieces_give_zero_phi() {
        let g = reference();
        let a = sample(&FieldExpr::X, &g).unwrap();
        let b = ScalarField::from_fn(&g, |_, _| 2.0);
        let mut dec = decompose_b(&b, 4).unwrap();
        dec.localize(&a).unwrap();
        dec.solve().unwrap();
        let assembled = assemble_phi(&dec).unwrap();
        assert!(assembled.max_abs() <= 1e-12);
        for p in dec.pieces.iter() {
            assert!(p.degenerate);
            let rec = audit_piece(&a, p, 0.5).unwrap();
            assert!(rec.skipped);
        }
    }

    #[test]
    fn audit_produces_finite_constants() {
        let g = reference();
        let a = sample(&FieldExpr::X, &g).unwrap();
        let b = sample(&FieldExpr::Y, &g).unwrap();
        let mut dec = decompose_b(&b, 4).unwrap();
        dec.localize(&a).unwrap();
        dec.solve().unwrap();
        let piece = &dec.pieces[2];
        let rec = audit_piece(&a, piece, 0.5).unwrap();
        assert!(!rec.skipped);
        for v in [rec.wente_const, rec.sup_const, rec.energy_const, rec.energy_const_pow] {
            assert!(v.is_finite() && v >= 0.0);
        }
        assert!(rec.tail_const.is_some());
        assert!(rec.tail_const.unwrap().is_finite());
        // alpha = 1 switches the right-hand weight to r^2 |log r|
        let rec1 = audit_piece(&a, piece, 1.0).unwrap();
        assert!(rec1.energy_const != rec1.energy_const_pow);
    }

    #[test]
    fn weak_form_consistency_of_localized_jacobians() {
        // sum_j int J(a_j, b_j) psi matches int J(a, b) psi for a smooth test
        // field, within reconstruction error
        let g = reference();
        let a = ScalarField::from_fn(&g, |r, t| r * t.cos() + 0.3 * r * r * (2.0 * t).sin());
        let b = ScalarField::from_fn(&g, |r, t| r * t.sin() + 0.5 * r * r);
        let mut dec = decompose_b(&b, 6).unwrap();
        dec.localize(&a).unwrap();
        let test = ScalarField::from_fn(&g, |r, t| (1.0 - r * r) * (1.0 + 0.5 * t.cos()));
        let mut acc = 0.0;
        for p in dec.pieces.iter() {
            let jp = jacobian(p.a_j.as_ref().unwrap(), &p.b_j).unwrap();
            acc += jp.zip_map(&test, |x, y| x * y).integrate();
        }
        let direct = jacobian(&a, &b)
            .unwrap()
            .zip_map(&test, |x, y| x * y)
            .integrate();
        let scale = direct.abs().max(1.0);
        assert!((acc - direct).abs() <= 1e-8 * scale, "weak-form gap {}", acc - direct);
    }
}
