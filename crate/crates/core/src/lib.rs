//! Differentially private SGD whose per-example clipping threshold is steered
//! by a closed-loop controller reading the heavy-tailed spectral exponent of
//! the model's own weights, plus a Rényi-DP accountant and an experiment
//! harness.
//!
//! Module map:
//! - [`linalg`]: matrices, singular values, seeded random streams
//! - [`model`]: MLP with per-example gradients and flat parameter view
//! - [`dp`]: Poisson subsampling, clipping, noisy averaging
//! - [`spectral`]: eigen-spectrum tail exponent (Hill fit) and multi-layer probe
//! - [`controller`]: log-domain saturated clip controller
//! - [`accountant`]: RDP accounting of the subsampled Gaussian mechanism
//! - [`trainer`]: the training loop and run logs
//! - [`harness`]: configs, datasets, presets, sweeps, reports and the CLI

pub mod accountant;
pub mod controller;
pub mod dp;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod spectral;
pub mod trainer;

pub use error::{Error, Result};
