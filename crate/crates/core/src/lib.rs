//! Semi-Lagrangian schemes for finite-horizon stochastic control.
//!
//! The value function of a controlled diffusion is approximated by backward
//! dynamic programming on a spatial grid. Each step replaces the Gaussian
//! increment by a Gauss-Hermite rule of order `M`, so the scheme is a
//! controlled Markov chain whose transition probabilities are quadrature
//! weights times interpolation weights.
//!
//! - [`quadrature`]: Gauss-Hermite rules, tensor products, Carathéodory reduction.
//! - [`interpolation`]: uniform grids, multilinear and monotone cubic interpolation.
//! - [`problem`]: controlled SDE definitions, including the unequal-rates option model.
//! - [`solver`]: the backward recursion, policies and transition rows.
//! - [`montecarlo`]: Euler-Maruyama simulation used as an independent check.
//! - [`analytics`]: Black-Scholes reference, error norms and convergence studies.
//! - [`config`] and [`io`]: study files, CSV output and persisted surfaces.

// `!(x > 0.0)` style checks are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod config;
pub mod error;
pub mod interpolation;
pub mod io;
pub mod montecarlo;
pub mod problem;
pub mod quadrature;
pub mod solver;

pub use error::{Error, Result};
pub use interpolation::{Extrapolation, Grid, Interpolation, StencilWeights};
pub use problem::{bergman_problem, BergmanProblem, ControlProblem, FnProblem, Payoff, TimeMesh};
pub use quadrature::{caratheodory_reduce, hermite_rule, tensor_rule, QuadratureRule};
pub use solver::{backward_solve, backward_solve_with, Retention, SolveOptions, Stepper, ValueSurface};

/// Version of the study/model configuration schema.
pub const CONFIG_SCHEMA_VERSION: u32 = 1;
