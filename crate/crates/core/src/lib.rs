//! Adaptive-learning-rate stochastic gradient descent with finite-difference
//! curvature estimates (vSGD-fd), its minibatch, sparse-gradient and
//! orthogonal-reweighting extensions, the comparison baselines, and a harness
//! that runs the elementary synthetic test grid.
//!
//! The crate is organised bottom-up:
//!
//! - [`problems`]: synthetic stochastic loss families with analytic gradients,
//!   curvature oracles and closed-form expected losses.
//! - [`aggregation`]: minibatch averaging, sparsity statistics and orthogonal
//!   reweighting of per-sample gradients.
//! - [`curvature`]: finite-difference curvature probes.
//! - [`optimizers`]: the vSGD-fd state machine, the bbprop-based vSGD and the
//!   SGD / AdaGrad / natural-gradient baselines behind one driver.
//! - [`harness`]: experiment grid, heatmaps, parallelization-gain simulation
//!   and the reweighting demo.
//! - `cli` (feature `cli`): argument parsing and output writing for the `vsgd`
//!   binary.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod aggregation;
#[cfg(feature = "cli")]
pub mod cli;
pub mod curvature;
mod error;
pub mod harness;
pub mod optimizers;
pub mod problems;
pub mod rng;

pub use error::{Error, Result};

/// Floor added to every denominator that can vanish.
pub const EPSILON: f64 = 1e-5;
