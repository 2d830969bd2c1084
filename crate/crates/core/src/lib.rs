//! Numerical laboratory for the non-local parabolic problem
//!
//! ```text
//! u_t = Δu - u + u^p / (avg u^r)^γ,   ∂u/∂ν = 0,   γ = q / (s + 1)
//! ```
//!
//! on an interval or a radially symmetric ball. It is the shadow limit of
//! the Gierer-Meinhardt activator equation.
//!
//! The pieces:
//!
//! - [`model`]: parameters, regime classification, hypothesis sets and the
//!   spatially homogeneous kinetics.
//! - [`grid`]: the radial finite-volume Laplacian, normalized quadrature and
//!   the non-local right-hand side.
//! - [`integrator`]: adaptive explicit and IMEX time stepping with blow-up,
//!   steady-state and failure events.
//! - [`spectral`]: Neumann eigenpairs and the linearization about `u = 1`.
//! - [`initial`]: constant, perturbed, cosine, spiky and CSV initial data.
//! - [`diagnostics`]: moments, the Lyapunov functional, invariant-region
//!   tracking, monotonicity checks and blow-up inference.
//! - [`scenario`] and [`output`]: configs, presets and run artifacts.
//! - [`cli`]: the `gmshadow` command line.
//!
//! Each capability has a runnable example under `examples/`:
//! `classify`, `kinetic_blowup`, `laplacian_convergence`, `turing_spectrum`,
//! `spiky_blowup`, `invariant_region`, `variational_energy`, `sweep` and
//! `run_config`.
//!
//! ```
//! use gmshadow::model::{classify_regime, HypothesisContext, ModelParams};
//!
//! let params = ModelParams::new(3.0, 1.0, 1.0, 0.0).unwrap();
//! let report = classify_regime(&params, HypothesisContext::default());
//! assert!(report.anti_turing);
//! ```

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod initial;
pub mod integrator;
pub mod model;
pub mod output;
mod rk;
pub mod scenario;
pub mod spectral;
pub mod stats;

pub use error::{Error, Result};
