//! Batch experiment suites: seeded random families, measured-constant
//! sweeps, CSV emission and machine-readable pass/fail reports.
//!
//! Every suite is deterministic under a fixed seed and configuration; the
//! CSV artifacts are byte-identical between runs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::counterexample::{
    self, build, divergence_sweep, linear_r2, linear_slope, loglog_slope,
};
use crate::dyadic::{audit_piece, decompose_b};
use crate::error::Result;
use crate::expr::{annulus_bump, FieldExpr};
use crate::grid::{jacobian, make_grid, sample, PolarGrid, ScalarField};
use crate::norms::{lorentz, lorentz_weak, weighted_energy, weighted_sup, Weight};
use crate::poisson::{potential_minus_harmonic, solve_dirichlet};

/// Pass/fail thresholds. Analytic bounds are used where one exists; the
/// rest are regression-locked: frozen from the first verified run of the
/// reference configuration, with headroom, so later regressions surface.
pub mod caps {
    /// Max-norm error allowed for the exact radial solve (rhs = 1).
    pub const EXACT_RHS1: f64 = 1e-8;
    /// Relative L2 disagreement between the mode solver and the
    /// potential-minus-harmonic oracle on a random right-hand side.
    pub const ORACLE_EQUIV: f64 = 1e-3;
    /// Convergence order of the oracle disagreement under mesh refinement.
    pub const ORACLE_ORDER_MIN: f64 = 1.9;
    /// Rotating the data by one angular step must rotate the solution.
    pub const ROTATION_EQUIVARIANCE: f64 = 1e-12;
    /// Sharp constant of the sup-norm inequality plus measurement headroom.
    pub const WENTE_SUP: f64 = 1.0 / (2.0 * std::f64::consts::PI) + 0.02;
    /// Largest weighted ratio seen over the random suite (regression lock,
    /// observed max 0.0360 at alpha = 3/4 on the reference grid).
    pub const T1_RANDOM_RATIO: f64 = 0.08;
    /// Largest weighted ratio over the adversarial annulus family
    /// (regression lock, observed max 0.0437 at alpha = 1 with the
    /// critically weighted right side).
    pub const T1_ADVERSARIAL_RATIO: f64 = 0.10;
    /// Tolerated |slope| of log-constant against level for flat trends.
    pub const TREND_SLOPE: f64 = 0.05;
    /// Minimum r^2 for the linear growth fit of the log-loss constant.
    pub const LINEAR_FIT_R2: f64 = 0.8;
    /// Slope window half-width for the divergence sweep exponents.
    pub const SWEEP_SLOPE_TOL: f64 = 0.1;
    /// Allowed max/min spread of the critically weighted sweep ratio.
    pub const SWEEP_BETA1_SPREAD: f64 = 2.0;
    /// Relative error of the quadrature against the closed form of
    /// int |grad a~|^2.
    pub const GRAD_A_QUADRATURE: f64 = 5e-3;
    /// Relative L2 distance between the numerical solve and the glued field.
    pub const GLUED_MATCH: f64 = 1e-2;
    /// Relative L2 distance between the numerical solve and the closed-form
    /// zero-boundary solution of the family equation (solver cross-check).
    pub const CLOSED_FORM_MATCH: f64 = 1e-2;
    /// Gluing continuity and flux identity residuals.
    pub const GLUING_RESIDUAL: f64 = 1e-10;
    /// Dyadic reconstruction error (grid-limited).
    pub const RECONSTRUCTION: f64 = 1e-6;
    /// Gradient leakage outside the admissible support, relative to
    /// the L2 norm of grad b.
    pub const SUPPORT_LEAK: f64 = 1e-12;
    /// Per-level energy constant of the decomposition (regression lock,
    /// observed max 7.14 on the reference configuration).
    pub const C_DEC: f64 = 9.0;
    /// Closed-form Lorentz checks on constant fields.
    pub const LORENTZ_CLOSED_FORM: f64 = 1e-12;
    /// Weak norm of 1/r against sqrt(pi): the step surrogate overshoots by
    /// the half-cell factor 2^(1/(2 npl)), about 2.2% on the reference grid.
    pub const INV_R_WEAK: f64 = 3e-2;
    /// lorentz(f,2,2) must match the plain L2 norm.
    pub const L22_CONSISTENCY: f64 = 1e-8;
    /// Largest L(2,1)-over-product ratio of |grad phi| (regression lock,
    /// observed max 0.807 on the reference configuration).
    pub const CLMS_RATIO: f64 = 1.2;
    /// Pointwise comparison factor between the critical weight and the
    /// doubly logarithmic comparison weight on (0, 1/2].
    pub const CRIT_VS_DGR: f64 = 1.1;
}

/// Configuration for the experiment suites.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub n_theta: usize,
    pub levels: u32,
    pub nodes_per_level: u32,
    /// Number of random (a, b) pairs per suite.
    pub samples: usize,
    /// Highest angular mode of the random family.
    pub max_mode: usize,
    /// Parameters of the divergence sweep, alpha = 2^-k by default.
    pub alpha_list: Vec<f64>,
    /// Weight exponent used by single-beta sweeps from the CLI.
    pub beta: f64,
    /// Dyadic levels audited by the adversarial family.
    pub j_list: Vec<u32>,
    /// Cap overrides (key = row id suffix).
    pub overrides: BTreeMap<String, f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 7,
            n_theta: 128,
            levels: 8,
            nodes_per_level: 16,
            samples: 100,
            max_mode: 6,
            alpha_list: (0..=8).map(|k| (-(k as f64)).exp2()).collect(),
            beta: 0.5,
            j_list: (1..=7).collect(),
            overrides: BTreeMap::new(),
        }
    }
}

impl ExperimentConfig {
    pub fn grid(&self) -> Result<Arc<PolarGrid>> {
        make_grid(self.n_theta, self.levels, self.nodes_per_level)
    }

    fn refined_grid(&self) -> Result<Arc<PolarGrid>> {
        make_grid(self.n_theta * 2, self.levels, self.nodes_per_level * 2)
    }

    fn cap(&self, id: &str, default: f64) -> f64 {
        self.overrides.get(id).copied().unwrap_or(default)
    }
}

/// Direction of a threshold comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Check {
    UpperBound,
    LowerBound,
}

/// One measured criterion.
#[derive(Debug, Clone)]
pub struct CriterionRow {
    pub id: String,
    pub value: f64,
    pub threshold: f64,
    pub check: Check,
    pub pass: bool,
    pub note: String,
}

fn row_le(id: &str, value: f64, threshold: f64, note: &str) -> CriterionRow {
    CriterionRow {
        id: id.to_string(),
        value,
        threshold,
        check: Check::UpperBound,
        pass: value.is_finite() && value <= threshold,
        note: note.to_string(),
    }
}

fn row_ge(id: &str, value: f64, threshold: f64, note: &str) -> CriterionRow {
    CriterionRow {
        id: id.to_string(),
        value,
        threshold,
        check: Check::LowerBound,
        pass: value.is_finite() && value >= threshold,
        note: note.to_string(),
    }
}

/// Result of one suite: criterion rows plus CSV artifacts (name, contents).
#[derive(Debug)]
pub struct SuiteReport {
    pub name: String,
    pub rows: Vec<CriterionRow>,
    pub artifacts: Vec<(String, String)>,
}

impl SuiteReport {
    pub fn overall(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# suite: {}", self.name);
        for r in &self.rows {
            let rel = match r.check {
                Check::UpperBound => "<=",
                Check::LowerBound => ">=",
            };
            let _ = writeln!(
                out,
                "{:<38} value={:<14.6e} {} threshold={:<12.6e} {}  {}",
                r.id,
                r.value,
                rel,
                r.threshold,
                if r.pass { "PASS" } else { "FAIL" },
                r.note
            );
        }
        out
    }
}

/// Merge several suite reports into one summary.
pub fn merge_reports(name: &str, reports: Vec<SuiteReport>) -> SuiteReport {
    let mut rows = Vec::new();
    let mut artifacts = Vec::new();
    for r in reports {
        rows.extend(r.rows);
        artifacts.extend(r.artifacts);
    }
    SuiteReport {
        name: name.to_string(),
        rows,
        artifacts,
    }
}

/// A trigonometric polynomial with smooth radial envelopes; evaluable on any
/// grid, so refinement studies can resample the same function.
#[derive(Debug, Clone)]
pub struct TrigPolyField {
    terms: Vec<TrigTerm>,
    scale: f64,
}

#[derive(Debug, Clone)]
struct TrigTerm {
    m: usize,
    cos_c: f64,
    sin_c: f64,
    poly: [f64; 3],
}

impl TrigPolyField {
    pub fn eval(&self, r: f64, theta: f64) -> f64 {
        let mut acc = 0.0;
        for t in &self.terms {
            let envelope =
                r.powi(t.m.min(3) as i32) * (t.poly[0] + t.poly[1] * r + t.poly[2] * r * r);
            let ang = t.cos_c * (t.m as f64 * theta).cos() + t.sin_c * (t.m as f64 * theta).sin();
            acc += envelope * ang;
        }
        acc * self.scale
    }

    pub fn sample_on(&self, grid: &Arc<PolarGrid>) -> ScalarField {
        ScalarField::from_fn(grid, |r, t| self.eval(r, t))
    }
}

/// Seeded generator of random fields normalized to unit Dirichlet energy.
pub struct RandomFields {
    rng: ChaCha8Rng,
    max_mode: usize,
    pub resampled: usize,
}

impl RandomFields {
    pub fn new(seed: u64, max_mode: usize) -> Self {
        RandomFields {
            rng: ChaCha8Rng::seed_from_u64(seed),
            max_mode,
            resampled: 0,
        }
    }

    /// Draw a field and normalize its gradient energy to 1 on `grid`.
    pub fn field(&mut self, grid: &Arc<PolarGrid>) -> TrigPolyField {
        loop {
            let mut terms = Vec::with_capacity(self.max_mode + 1);
            for m in 0..=self.max_mode {
                let damp = 1.0 / (1.0 + m as f64).powi(2);
                terms.push(TrigTerm {
                    m,
                    cos_c: self.rng.gen_range(-1.0..1.0) * damp,
                    sin_c: self.rng.gen_range(-1.0..1.0) * damp,
                    poly: [
                        self.rng.gen_range(-1.0..1.0),
                        self.rng.gen_range(-1.0..1.0),
                        self.rng.gen_range(-1.0..1.0),
                    ],
                });
            }
            let mut f = TrigPolyField { terms, scale: 1.0 };
            let energy = f.sample_on(grid).gradient().energy_sq();
            if energy > 1e-12 {
                f.scale = 1.0 / energy.sqrt();
                return f;
            }
            self.resampled += 1;
        }
    }
}

/// Criterion 1: exact solutions, oracle equivalence, refinement order,
/// rotation equivariance.
pub fn run_solver_validation(cfg: &ExperimentConfig) -> Result<SuiteReport> {
    let grid = cfg.grid()?;
    let mut rows = Vec::new();
    let mut csv = String::from("check,grid,value\n");

    // rhs = 1 against the radial parabola
    let rhs1 = ScalarField::from_fn(&grid, |_, _| 1.0);
    let (phi1, rep1) = solve_dirichlet(&rhs1)?;
    let exact = ScalarField::from_fn(&grid, |r, _| (r * r - 1.0) / 4.0);
    let e1 = phi1.sub(&exact).max_abs();
    rows.push(row_le(
        "1.exact_rhs1",
        e1,
        cfg.cap("1.exact_rhs1", caps::EXACT_RHS1),
        "max |phi - (r^2-1)/4|",
    ));
    rows.push(row_le(
        "1.boundary_zero",
        rep1.boundary_max,
        1e-12,
        "max |phi| on the boundary ring",
    ));
    let _ = writeln!(csv, "exact_rhs1,reference,{e1:.16e}");

    // oracle equivalence and refinement order on a seeded random rhs
    let mut sampler = RandomFields::new(cfg.seed ^ 0x5eed_0001, cfg.max_mode);
    let f = sampler.field(&grid);
    let rhs = f.sample_on(&grid);
    let (phi, _) = solve_dirichlet(&rhs)?;
    let oracle = potential_minus_harmonic(&rhs)?;
    let e_ref = phi.sub(&oracle).l2_norm() / phi.l2_norm();
    rows.push(row_le(
        "1.oracle_equiv",
        e_ref,
        cfg.cap("1.oracle_equiv", caps::ORACLE_EQUIV),
        "solve vs potential-minus-harmonic, relative L2",
    ));
    let _ = writeln!(csv, "oracle_equiv,reference,{e_ref:.16e}");

    let fine = cfg.refined_grid()?;
    let rhs_f = f.sample_on(&fine);
    let (phi_f, _) = solve_dirichlet(&rhs_f)?;
    let oracle_f = potential_minus_harmonic(&rhs_f)?;
    let e_fine = phi_f.sub(&oracle_f).l2_norm() / phi_f.l2_norm();
    let order = (e_ref / e_fine).log2();
    rows.push(row_ge(
        "1.oracle_order",
        order,
        cfg.cap("1.oracle_order", caps::ORACLE_ORDER_MIN),
        "log2 error ratio under mesh doubling",
    ));
    let _ = writeln!(csv, "oracle_equiv,refined,{e_fine:.16e}");
    let _ = writeln!(csv, "oracle_order,pair,{order:.6}");

    // rotation equivariance: roll data by one angular index
    let n_t = grid.n_theta();
    let rolled_vals = {
        let mut v = rhs.values().clone();
        for k in 0..grid.n_r() {
            for i in 0..n_t {
                v[(k, i)] = rhs.values()[(k, (i + n_t - 1) % n_t)];
            }
        }
        v
    };
    let rolled = ScalarField::from_values(&grid, rolled_vals);
    let (phi_rolled, _) = solve_dirichlet(&rolled)?;
    let mut rot = 0.0f64;
    for k in 0..grid.n_r() {
        for i in 0..n_t {
            rot = rot
                .max((phi_rolled.values()[(k, i)] - phi.values()[(k, (i + n_t - 1) % n_t)]).abs());
        }
    }
    let rot_rel = rot / phi.max_abs().max(1e-300);
    rows.push(row_le(
        "1.rotation",
        rot_rel,
        cfg.cap("1.rotation", caps::ROTATION_EQUIVARIANCE),
        "one-step rotation equivariance",
    ));
    let _ = writeln!(csv, "rotation,reference,{rot_rel:.16e}");

    Ok(SuiteReport {
        name: "validate-solver".into(),
        rows,
        artifacts: vec![("solver_validation.csv".into(), csv)],
    })
}

/// Criteria 2, 3 (random part) and 8 (ratio part): the seeded random family.
pub fn run_random_suite(cfg: &ExperimentConfig) -> Result<SuiteReport> {
    let grid = cfg.grid()?;
    let mut rows = Vec::new();
    let alphas = [0.25, 0.5, 0.75];

    let mut csv = String::from(
        "sample,sup_ratio,clms_ratio,ratio_a025,ratio_a050,ratio_a075,ratio_a1_crit\n",
    );

    // deterministic a = x, b = y case first
    let x = sample(&FieldExpr::X, &grid)?;
    let y = sample(&FieldExpr::Y, &grid)?;
    let mut max_sup;
    let mut max_clms;
    let mut max_t1 = BTreeMap::new();
    {
        let rhs = jacobian(&x, &y)?;
        let (phi, _) = solve_dirichlet(&rhs)?;
        let na = x.gradient().energy_sq().sqrt();
        let nb = y.gradient().energy_sq().sqrt();
        let sup_ratio = phi.max_abs() / (na * nb);
        max_sup = sup_ratio;
        let g_phi = phi.gradient();
        max_clms = lorentz(&g_phi.magnitude(), 2.0, 1.0) / (na * nb);
        for &a in alphas.iter() {
            let num = weighted_sup(&phi, a).powi(2)
                + weighted_energy(&g_phi, &Weight::Pow(a)).powi(2);
            let den = na * na * weighted_energy(&y.gradient(), &Weight::Pow(a)).powi(2);
            max_t1.insert(format!("{a:.2}"), num / den);
        }
        let crit = weighted_sup(&phi, 1.0).powi(2)
            + weighted_energy(&g_phi, &Weight::Pow(1.0)).powi(2);
        let den = na * na * weighted_energy(&y.gradient(), &Weight::Crit).powi(2);
        max_t1.insert("1.00crit".into(), crit / den);
    }

    let mut sampler = RandomFields::new(cfg.seed, cfg.max_mode);
    let mut max_l22 = 0.0f64;
    let mut max_nest = 0.0f64;
    for sample_idx in 0..cfg.samples {
        let a = sampler.field(&grid).sample_on(&grid);
        let b = sampler.field(&grid).sample_on(&grid);
        let rhs = jacobian(&a, &b)?;
        let (phi, _) = solve_dirichlet(&rhs)?;
        let g_a = a.gradient();
        let g_b = b.gradient();
        let na = g_a.energy_sq().sqrt();
        let nb = g_b.energy_sq().sqrt();
        let g_phi = phi.gradient();

        let sup_ratio = phi.max_abs() / (na * nb);
        max_sup = max_sup.max(sup_ratio);
        let clms = lorentz(&g_phi.magnitude(), 2.0, 1.0) / (na * nb);
        max_clms = max_clms.max(clms);

        let mut per_alpha = Vec::new();
        for &alpha in alphas.iter() {
            let num = weighted_sup(&phi, alpha).powi(2)
                + weighted_energy(&g_phi, &Weight::Pow(alpha)).powi(2);
            let den = na * na * weighted_energy(&g_b, &Weight::Pow(alpha)).powi(2);
            let ratio = num / den;
            per_alpha.push(ratio);
            let key = format!("{alpha:.2}");
            let cur = max_t1.get(&key).copied().unwrap_or(0.0);
            max_t1.insert(key, cur.max(ratio));
        }
        let crit_num = weighted_sup(&phi, 1.0).powi(2)
            + weighted_energy(&g_phi, &Weight::Pow(1.0)).powi(2);
        let crit_den = na * na * weighted_energy(&g_b, &Weight::Crit).powi(2);
        let crit_ratio = crit_num / crit_den;
        let cur = max_t1.get("1.00crit").copied().unwrap_or(0.0);
        max_t1.insert("1.00crit".into(), cur.max(crit_ratio));

        // Lorentz-engine consistency on the solution field
        let l22 = (lorentz(&phi, 2.0, 2.0) - phi.l2_norm()).abs() / phi.l2_norm().max(1e-300);
        max_l22 = max_l22.max(l22);
        let nest = lorentz_weak(&phi, 2.0) / lorentz(&phi, 2.0, 1.0).max(1e-300);
        max_nest = max_nest.max(nest);

        let _ = writeln!(
            csv,
            "{sample_idx},{sup_ratio:.16e},{clms:.16e},{:.16e},{:.16e},{:.16e},{crit_ratio:.16e}",
            per_alpha[0], per_alpha[1], per_alpha[2]
        );
    }

    rows.push(row_le(
        "2.wente_sup",
        max_sup,
        cfg.cap("2.wente_sup", caps::WENTE_SUP),
        &format!(
            "max sup ratio over {} pairs plus the coordinate pair",
            cfg.samples
        ),
    ));
    for &alpha in alphas.iter() {
        let key = format!("{alpha:.2}");
        rows.push(row_le(
            &format!("3.random_alpha{key}"),
            max_t1[&key],
            cfg.cap("3.random", caps::T1_RANDOM_RATIO),
            "max weighted ratio over the random family",
        ));
    }
    rows.push(row_le(
        "3.random_alpha1_crit",
        max_t1["1.00crit"],
        cfg.cap("3.random", caps::T1_RANDOM_RATIO),
        "critically weighted right side at alpha=1",
    ));
    rows.push(row_le(
        "8.clms_ratio",
        max_clms,
        cfg.cap("8.clms_ratio", caps::CLMS_RATIO),
        "L(2,1) norm of |grad phi| over the norm product",
    ));
    rows.push(row_le(
        "8.l22_consistency",
        max_l22,
        cfg.cap("8.l22_consistency", caps::L22_CONSISTENCY),
        "lorentz(.,2,2) against the plain L2 norm",
    ));
    rows.push(row_le(
        "8.nesting",
        max_nest,
        1.0,
        "weak L2 quasinorm over L(2,1), must not exceed 1",
    ));

    Ok(SuiteReport {
        name: "random-suite".into(),
        rows,
        artifacts: vec![("random_suite.csv".into(), csv)],
    })
}

/// Criteria 3 (adversarial part), 4 and 7: level-by-level behavior.
pub fn run_dyadic_audit(cfg: &ExperimentConfig) -> Result<SuiteReport> {
    let grid = cfg.grid()?;
    let mut rows = Vec::new();

    // adversarial family: radial a, single-annulus mode-1 bump b
    let a_r = sample(&FieldExpr::R, &grid)?;
    let na_sq = a_r.gradient().energy_sq();
    let mut csv = String::from("j,c_pow1,c_crit,c_a025,c_a050,c_a075\n");
    let mut pow_pts = Vec::new();
    let mut crit_pts = Vec::new();
    let mut alpha_pts: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    let mut max_adv = 0.0f64;
    for &j in cfg.j_list.iter() {
        let b = ScalarField::from_fn(&grid, |r, t| annulus_bump(j, r) * t.cos());
        let rhs = jacobian(&a_r, &b)?;
        let (phi, _) = solve_dirichlet(&rhs)?;
        let g_phi = phi.gradient();
        let g_b = b.gradient();

        let lhs_r = weighted_energy(&g_phi, &Weight::Pow(1.0)).powi(2);
        let c_pow = lhs_r / (na_sq * weighted_energy(&g_b, &Weight::Pow(1.0)).powi(2));
        let c_crit = lhs_r / (na_sq * weighted_energy(&g_b, &Weight::Crit).powi(2));
        pow_pts.push((j as f64, c_pow));
        crit_pts.push((j as f64, c_crit.ln()));
        max_adv = max_adv.max(c_crit);

        let mut per_alpha = Vec::new();
        for alpha in [0.25, 0.5, 0.75] {
            let num = weighted_sup(&phi, alpha).powi(2)
                + weighted_energy(&g_phi, &Weight::Pow(alpha)).powi(2);
            let den = na_sq * weighted_energy(&g_b, &Weight::Pow(alpha)).powi(2);
            let c = num / den;
            per_alpha.push(c);
            max_adv = max_adv.max(c);
            alpha_pts
                .entry(format!("{alpha:.2}"))
                .or_default()
                .push((j as f64, c.ln()));
        }
        let _ = writeln!(
            csv,
            "{j},{c_pow:.16e},{c_crit:.16e},{:.16e},{:.16e},{:.16e}",
            per_alpha[0], per_alpha[1], per_alpha[2]
        );
    }

    for (key, pts) in alpha_pts.iter() {
        rows.push(row_le(
            &format!("3.adversarial_alpha{key}"),
            linear_slope(pts).abs(),
            cfg.cap("3.trend", caps::TREND_SLOPE),
            "|slope| of log constant against annulus level",
        ));
    }
    rows.push(row_le(
        "3.adversarial_alpha1_crit",
        linear_slope(&crit_pts).abs(),
        cfg.cap("3.trend", caps::TREND_SLOPE),
        "critically weighted right side stays level-uniform",
    ));
    rows.push(row_le(
        "3.adversarial_max",
        max_adv,
        cfg.cap("3.adversarial", caps::T1_ADVERSARIAL_RATIO),
        "all adversarial constants finite",
    ));

    rows.push(row_ge(
        "4.pow_slope_positive",
        linear_slope(&pow_pts),
        0.0,
        "r^2-weighted constant grows with the level",
    ));
    rows.push(row_ge(
        "4.pow_linear_r2",
        linear_r2(&pow_pts),
        cfg.cap("4.pow_linear_r2", caps::LINEAR_FIT_R2),
        "growth consistent with a linear trend",
    ));
    rows.push(row_le(
        "4.crit_flat",
        linear_slope(&crit_pts).abs(),
        cfg.cap("3.trend", caps::TREND_SLOPE),
        "critical weight flattens the trend",
    ));

    // decomposition contract on b = y and seeded random fields
    let mut sampler = RandomFields::new(cfg.seed ^ 0xdead_beef, cfg.max_mode);
    let mut worst_rec = 0.0f64;
    let mut worst_leak = 0.0f64;
    let mut worst_cdec = 0.0f64;
    let y = sample(&FieldExpr::Y, &grid)?;
    let mut targets = vec![y.clone()];
    for _ in 0..3 {
        targets.push(sampler.field(&grid).sample_on(&grid));
    }
    for b in targets.iter() {
        let dec = decompose_b(b, 6)?;
        worst_rec = worst_rec.max(dec.reconstruction_error);
        worst_cdec = worst_cdec.max(dec.c_dec());
        for p in dec.pieces.iter() {
            worst_leak = worst_leak.max(p.support_leak_rel);
        }
    }
    rows.push(row_le(
        "7.reconstruction",
        worst_rec,
        cfg.cap("7.reconstruction", caps::RECONSTRUCTION),
        "relative L2 error of sum grad b_j",
    ));
    rows.push(row_le(
        "7.support",
        worst_leak,
        cfg.cap("7.support", caps::SUPPORT_LEAK),
        "gradient leakage outside the doubled annulus",
    ));
    rows.push(row_le(
        "7.cdec",
        worst_cdec,
        cfg.cap("7.cdec", caps::C_DEC),
        "per-level energy constant, uniform over levels",
    ));

    // full per-level audit for the coordinate pair
    let x = sample(&FieldExpr::X, &grid)?;
    let mut dec = decompose_b(&y, 6)?;
    dec.localize(&x)?;
    dec.solve()?;
    let mut audit_csv = String::from(crate::dyadic::AuditRecord::csv_header().to_string());
    audit_csv.push('\n');
    for p in dec.pieces.iter() {
        for alpha in [0.5, 1.0] {
            let rec = audit_piece(&x, p, alpha)?;
            if !rec.skipped {
                for line in rec.csv_rows() {
                    audit_csv.push_str(&line);
                    audit_csv.push('\n');
                }
            }
        }
    }

    Ok(SuiteReport {
        name: "dyadic-audit".into(),
        rows,
        artifacts: vec![
            ("dyadic_trend.csv".into(), csv),
            ("dyadic_audit.csv".into(), audit_csv),
        ],
    })
}

/// Criteria 5 and 6: the glued family.
pub fn run_counterexample(cfg: &ExperimentConfig) -> Result<SuiteReport> {
    let grid = cfg.grid()?;
    let mut rows = Vec::new();
    let mut artifacts = Vec::new();

    for beta in [0.0, 0.5] {
        let sweep = divergence_sweep(&cfg.alpha_list, beta, &grid)?;
        let mut csv = String::from(counterexample::SweepRow::csv_header().to_string());
        csv.push('\n');
        for r in sweep.iter() {
            csv.push_str(&r.csv_row());
            csv.push('\n');
        }
        artifacts.push((format!("sweep_beta{beta:.1}.csv"), csv));

        let mut min_step = f64::MAX;
        for w in sweep.windows(2) {
            min_step = min_step.min(w[1].ratio / w[0].ratio);
        }
        rows.push(row_ge(
            &format!("5.monotone_beta{beta:.1}"),
            min_step,
            1.0,
            "ratio increases along alpha -> 0",
        ));
        let slope = loglog_slope(&sweep);
        let target = (1.0 - beta) / 2.0;
        rows.push(row_le(
            &format!("5.slope_beta{beta:.1}"),
            (slope - target).abs(),
            cfg.cap("5.slope", caps::SWEEP_SLOPE_TOL),
            &format!("log-log slope {slope:.3} against target {target:.2}"),
        ));
    }
    {
        let sweep = divergence_sweep(&cfg.alpha_list, 1.0, &grid)?;
        let mut csv = String::from(counterexample::SweepRow::csv_header().to_string());
        csv.push('\n');
        for r in sweep.iter() {
            csv.push_str(&r.csv_row());
            csv.push('\n');
        }
        artifacts.push(("sweep_beta1.0.csv".into(), csv));
        let max = sweep.iter().map(|r| r.ratio).fold(0.0f64, f64::max);
        let min = sweep.iter().map(|r| r.ratio).fold(f64::MAX, f64::min);
        rows.push(row_le(
            "5.beta1_spread",
            max / min,
            cfg.cap("5.beta1_spread", caps::SWEEP_BETA1_SPREAD),
            "critically weighted sweep stays within a bounded band",
        ));
    }

    // criterion 6: closed forms and the solve identification
    let mut worst_quad = 0.0f64;
    for alpha in [2.0 / 3.0, 1.0] {
        let fam = build(alpha, &grid)?;
        let num = fam.a_tilde.gradient().energy_sq();
        let exact = 4.0 * std::f64::consts::PI * (2.0 + alpha).powi(2) / alpha;
        worst_quad = worst_quad.max((num - exact).abs() / exact);
    }
    rows.push(row_le(
        "6.grad_a_quadrature",
        worst_quad,
        cfg.cap("6.grad_a_quadrature", caps::GRAD_A_QUADRATURE),
        "quadrature of int |grad a~|^2 against 4 pi (2+alpha)^2 / alpha",
    ));

    let alpha = 2.0 / 3.0;
    let fam = build(alpha, &grid)?;
    let rhs = jacobian(&fam.a_tilde, &fam.b_tilde)?;
    let (phi, _) = solve_dirichlet(&rhs)?;
    let glued_ref = phi.sub(&fam.h_field).l2_norm() / fam.h_field.l2_norm();
    rows.push(row_le(
        "6.solve_reproduces_glued",
        glued_ref,
        cfg.cap("6.solve_reproduces_glued", caps::GLUED_MATCH),
        "relative L2 distance between the solve and the glued field",
    ));
    let fine = cfg.refined_grid()?;
    let fam_f = build(alpha, &fine)?;
    let rhs_f = jacobian(&fam_f.a_tilde, &fam_f.b_tilde)?;
    let (phi_f, _) = solve_dirichlet(&rhs_f)?;
    let glued_fine = phi_f.sub(&fam_f.h_field).l2_norm() / fam_f.h_field.l2_norm();
    rows.push(row_le(
        "6.glued_match_refinement",
        glued_fine / glued_ref.max(1e-300),
        1.0,
        "glued-field mismatch must not grow under refinement",
    ));

    // supplementary solver cross-check against the closed-form solution
    let exact_sol = counterexample::family_dirichlet_solution(alpha, &grid)?;
    let closed = phi.sub(&exact_sol).l2_norm() / exact_sol.l2_norm();
    rows.push(row_le(
        "6.solve_vs_closed_form",
        closed,
        cfg.cap("6.solve_vs_closed_form", caps::CLOSED_FORM_MATCH),
        "supplementary: solve against the exact zero-boundary solution",
    ));

    let residual = fam.continuity_residual().max(fam.flux_residual());
    rows.push(row_le(
        "6.gluing_residuals",
        residual,
        cfg.cap("6.gluing_residuals", caps::GLUING_RESIDUAL),
        "continuity and flux identity residuals",
    ));

    Ok(SuiteReport {
        name: "counterexample".into(),
        rows,
        artifacts,
    })
}

/// Criteria 8 (closed forms) and 9.
pub fn run_lorentz_check(cfg: &ExperimentConfig) -> Result<SuiteReport> {
    let grid = cfg.grid()?;
    let mut rows = Vec::new();
    let pi = std::f64::consts::PI;

    let one = ScalarField::from_fn(&grid, |_, _| 1.0);
    let l21 = lorentz(&one, 2.0, 1.0);
    rows.push(row_le(
        "8.const_l21",
        (l21 - 2.0 * pi.sqrt()).abs() / (2.0 * pi.sqrt()),
        cfg.cap("8.closed_form", caps::LORENTZ_CLOSED_FORM),
        "constant field L(2,1) = 2 sqrt(pi)",
    ));
    let weak = lorentz_weak(&one, 2.0);
    rows.push(row_le(
        "8.const_weak",
        (weak - pi.sqrt()).abs() / pi.sqrt(),
        cfg.cap("8.closed_form", caps::LORENTZ_CLOSED_FORM),
        "constant field weak L2 = sqrt(pi)",
    ));
    let inv_r = ScalarField::from_fn(&grid, |r, _| 1.0 / r);
    let weak_inv = lorentz_weak(&inv_r, 2.0);
    rows.push(row_le(
        "8.invr_weak",
        (weak_inv - pi.sqrt()).abs() / pi.sqrt(),
        cfg.cap("8.invr_weak", caps::INV_R_WEAK),
        "1/r weak L2 against sqrt(pi), O(cell) overshoot allowed",
    ));

    let mut worst = 0.0f64;
    let mut csv = String::from("r,crit,dgr,ratio\n");
    for k in 0..200 {
        let r = 0.5 * (-(k as f64) * 0.06).exp();
        if r < 1e-5 {
            break;
        }
        let c = Weight::Crit.eval(r);
        let d = Weight::Dgr.eval(r);
        let ratio = c / d;
        worst = worst.max(ratio);
        let _ = writeln!(csv, "{r:.16e},{c:.16e},{d:.16e},{ratio:.16e}");
    }
    rows.push(row_le(
        "9.crit_vs_dgr",
        worst,
        cfg.cap("9.crit_vs_dgr", caps::CRIT_VS_DGR),
        "pointwise critical weight over the comparison weight on (0, 1/2]",
    ));

    Ok(SuiteReport {
        name: "lorentz-check".into(),
        rows,
        artifacts: vec![("weights.csv".into(), csv)],
    })
}

/// Run every suite and merge the reports.
pub fn run_all(cfg: &ExperimentConfig) -> Result<SuiteReport> {
    let reports = vec![
        run_solver_validation(cfg)?,
        run_random_suite(cfg)?,
        run_dyadic_audit(cfg)?,
        run_counterexample(cfg)?,
        run_lorentz_check(cfg)?,
    ];
    Ok(merge_reports("all", reports))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> ExperimentConfig {
        ExperimentConfig {
            seed: 11,
            n_theta: 64,
            levels: 4,
            nodes_per_level: 8,
            samples: 4,
            max_mode: 4,
            alpha_list: vec![1.0, 0.5, 0.25],
            beta: 0.5,
            j_list: vec![1, 2, 3],
            overrides: BTreeMap::new(),
        }
    }

    #[test]
    fn random_fields_are_deterministic_and_normalized() {
        let cfg = small_cfg();
        let grid = cfg.grid().unwrap();
        let mut s1 = RandomFields::new(42, 4);
        let mut s2 = RandomFields::new(42, 4);
        let f1 = s1.field(&grid).sample_on(&grid);
        let f2 = s2.field(&grid).sample_on(&grid);
        for (a, b) in f1.values().iter().zip(f2.values().iter()) {
            assert_eq!(a, b);
        }
        let e = f1.gradient().energy_sq();
        assert!((e - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn suite_reports_are_reproducible() {
        let cfg = small_cfg();
        let r1 = run_lorentz_check(&cfg).unwrap();
        let r2 = run_lorentz_check(&cfg).unwrap();
        assert_eq!(r1.artifacts[0].1, r2.artifacts[0].1);
        assert!(r1.overall());
    }

    #[test]
    fn random_suite_runs_deterministically_on_small_config() {
        let cfg = small_cfg();
        let r1 = run_random_suite(&cfg).unwrap();
        let r2 = run_random_suite(&cfg).unwrap();
        assert_eq!(r1.artifacts[0].1, r2.artifacts[0].1);
        // the small grid is coarser than the reference configuration, so the
        // rows are informative here; the report must at least be well formed
        assert_eq!(
            r1.rows.iter().filter(|r| r.id.starts_with('2')).count(),
            1
        );
    }

    #[test]
    fn overall_is_conjunction_of_rows() {
        let report = SuiteReport {
            name: "t".into(),
            rows: vec![
                row_le("a", 1.0, 2.0, ""),
                row_le("b", 3.0, 2.0, ""),
            ],
            artifacts: vec![],
        };
        assert!(!report.overall());
        let report = SuiteReport {
            name: "t".into(),
            rows: vec![row_le("a", 1.0, 2.0, "")],
            artifacts: vec![],
        };
        assert!(report.overall());
    }
}
