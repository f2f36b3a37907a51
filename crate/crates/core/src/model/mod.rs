//! Model description: a tiny expression language for the mean structure,
//! plus the observation container the estimator consumes.
//!
//! A model is one scalar expression in fixed effects `beta<k>`, random
//! effects `b<k>`, covariate names, numeric literals, `pi`, the functions
//! exp/log/sin/cos/ilogit, and exactly one occurrence of the unknown curve
//! `f(...)`. Example: `beta0 + b1 + exp(b2) * f(t - ilogit(b3))`.

mod data;
mod expr;
mod parse;

pub use data::Dataset;
pub use expr::{effect_counts, spline_covariate, CompiledModel, Expr, Func};
pub use parse::parse_model;
