//! Simulated reward processes that emit binary observation vectors.

mod frogs_eye;
mod pendulum;

pub use frogs_eye::{FrogsEye, FrogsEyeConfig, FrogsEyeSnapshot};
pub use pendulum::{bin_index, Pendulum, PendulumConfig, TorquePolicy};

/// A point in the plane.
pub type Point = [f64; 2];
