//! Numerical laboratory for weighted Wente inequalities on the unit disk.
//!
//! The crate solves the Dirichlet problem for `Laplacian(phi) = J(a, b)`
//! (a Jacobian-determinant right-hand side) with a Fourier-mode spectral
//! solver on a geometrically graded polar grid, computes weighted Sobolev
//! energies, weighted sup norms and Lorentz quasinorms, runs the dyadic
//! localization machinery level by level with measured constants, and
//! builds the glued extremal family with its closed-form norms.
//!
//! Entry points:
//! - [`grid::make_grid`], [`grid::sample`], [`grid::jacobian`]
//! - [`poisson::solve_dirichlet`], [`poisson::newton_potential`],
//!   [`poisson::harmonic_correction`]
//! - [`norms::weighted_energy`], [`norms::lorentz`], [`norms::lorentz_weak`]
//! - [`dyadic::decompose_b`], [`dyadic::audit_piece`]
//! - [`counterexample::build`], [`counterexample::divergence_sweep`]
//! - [`suites`] for the batch experiment drivers behind the CLI.
//!
//! Runnable walkthroughs live in `examples/`; the CLI binary `wente-lab`
//! exposes the experiment suites with CSV and pass/fail report output.

pub mod counterexample;
pub mod dyadic;
pub mod error;
pub mod expr;
mod fft;
pub mod grid;
pub mod norms;
pub mod poisson;
pub mod suites;

pub use error::{Error, Result};
pub use expr::FieldExpr;
pub use grid::{jacobian, make_grid, make_uniform_grid, sample, PolarGrid, ScalarField, VectorField};
pub use norms::{lorentz, lorentz_weak, weighted_energy, weighted_sup, RatioReport, Weight};
pub use poisson::{harmonic_correction, newton_potential, solve_dirichlet, SolveReport};
