//! Stochastic compositional optimization laboratory.
//!
//! Implements the SCGD and SCSC optimizers for `min_x E_ν f_ν(E_ω g_ω(x))`
//! over a Euclidean ball, synthetic affine-quadratic problems with exact
//! oracles, and Monte Carlo studies of tracking error, algorithmic
//! stability, optimization error and excess risk.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod bounds;
pub mod cli;
pub mod constants;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod optimizer;
pub mod oracle;
pub mod par;
pub mod problem;
pub mod report;
pub mod rng;
pub mod stability;

pub use error::{Error, Result};
pub use linalg::{Matrix, Vector};
pub use optimizer::{Convexity, OptimizerConfig, OutputMode, Trajectory, Variant};
pub use problem::{Benchmark, CompositionalProblem, Dataset, PopulationLaw};
pub use rng::Rng;
