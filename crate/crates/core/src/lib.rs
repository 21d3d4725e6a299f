//! Online value prediction from high-dimensional noisy observations with
//! sparse nonlinear features whose connectivity is adapted by many parallel
//! auxiliary predictions.
//!
//! The crate is organized bottom-up:
//!
//! - [`env`]: the Frog's Eye process and a discretized pendulum.
//! - [`features`]: neighborhoods, filter banks and feature concatenation.
//! - [`learner`]: TD(λ), the GVF bank with top-k neighborhood refresh, and
//!   the online agent loop.
//! - [`metrics`]: truncated returns and segment-averaged squared error.
//! - [`experiment`]: configuration, trials, sweeps, files and the CLI.

pub mod cli;
pub mod env;
pub mod error;
pub mod experiment;
pub mod features;
pub mod learner;
pub mod metrics;
pub mod rng;

pub use error::{Error, Result};
