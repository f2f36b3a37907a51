//! Semiparametric nonlinear mixed-effects models: a penalized-spline
//! population curve composed with subject-specific random effects, fitted by
//! maximizing a Laplace-approximated marginal likelihood whose derivatives
//! come from the built-in tape-based automatic differentiation engine.

pub mod ad;
pub mod config;
pub mod error;
pub mod estimate;
pub mod inference;
pub mod linalg;
pub mod model;
pub mod rng;
pub mod sim;
pub mod splines;
pub mod util;

pub use error::{Error, Result};
