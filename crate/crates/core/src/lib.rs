//! Wasserstein distributionally robust learning with generalized linear
//! losses, solved through its convex-concave saddle-point form.
//!
//! The crate provides the saddle objective and its monotone operator
//! ([`model`]), projections onto the feasible sets ([`geometry`]), LIBSVM
//! and synthetic data ([`data`]), reference solutions and robust-loss
//! evaluation ([`eval`]), and the stochastic solvers ([`solvers`]).

pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod model;
pub mod rng;
pub mod solvers;
pub mod util;

pub use error::{Error, Result};
pub use eval::{ReferenceOptions, ReferenceSolution, RobustLossReport};
pub use model::{Dataset, GammaInit, Iterate, LinkFunction, OperatorValue, ProblemParams};
