//! A discretized simple pendulum driven by a fixed random torque policy.
//!
//! Dynamics follow the classic Gym pendulum: `theta = 0` is upright and
//! gravity pulls toward `theta = pi`. The observation is three one-hot blocks
//! of `bins_per_dim` bins each, for horizontal position `sin(theta)`, vertical
//! position `cos(theta)` and angular speed.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TorquePolicy {
    /// Uniform on `[-2, 2]`.
    Symmetric,
    /// Uniform on `[-1/2, 3/2]`.
    Skewed,
}

impl TorquePolicy {
    pub fn bounds(self) -> (f64, f64) {
        match self {
            TorquePolicy::Symmetric => (-2.0, 2.0),
            TorquePolicy::Skewed => (-0.5, 1.5),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PendulumConfig {
    pub gravity: f64,
    pub mass: f64,
    pub length: f64,
    pub dt: f64,
    pub policy: TorquePolicy,
    pub bins_per_dim: usize,
    pub position_range: (f64, f64),
    pub speed_range: (f64, f64),
}

impl Default for PendulumConfig {
    fn default() -> Self {
        PendulumConfig {
            gravity: 10.0,
            mass: 1.0,
            length: 1.0,
            dt: 0.05,
            policy: TorquePolicy::Symmetric,
            bins_per_dim: 10,
            position_range: (-1.0, 1.0),
            speed_range: (-8.0, 8.0),
        }
    }
}

impl PendulumConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bins_per_dim < 2 {
            return Err(Error::Config("pendulum: bins_per_dim must be >= 2".into()));
        }
        if !(self.position_range.0 < self.position_range.1)
            || !(self.speed_range.0 < self.speed_range.1)
        {
            return Err(Error::Config("pendulum: ranges must be nonempty".into()));
        }
        if !(self.mass > 0.0 && self.length > 0.0 && self.dt > 0.0) {
            return Err(Error::Config(
                "pendulum: mass, length and dt must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn num_observations(&self) -> usize {
        3 * self.bins_per_dim
    }
}

/// Bin of `value` among `bins` equal-width bins over `[lo, hi]`.
///
/// Bins are half-open `[edge_i, edge_{i+1})` except the last, which is closed.
/// Values outside the range land in the edge bins.
pub fn bin_index(value: f64, lo: f64, hi: f64, bins: usize) -> usize {
    debug_assert!(bins >= 1 && lo < hi);
    let width = (hi - lo) / bins as f64;
    let edge = |i: usize| lo + i as f64 * width;
    if !(value > lo) {
        return 0;
    }
    let mut idx = (((value - lo) / width).floor() as usize).min(bins - 1);
    // floor() can land one bin off when the value sits on a rounded edge.
    while idx + 1 < bins && value >= edge(idx + 1) {
        idx += 1;
    }
    while idx > 0 && value < edge(idx) {
        idx -= 1;
    }
    idx
}

#[derive(Debug, Clone)]
pub struct Pendulum {
    config: PendulumConfig,
    angle: f64,
    speed: f64,
    rng: ChaCha8Rng,
}

impl Pendulum {
    /// Starts from the Gym reset distribution: angle uniform on `[-pi, pi]`,
    /// speed uniform on `[-1, 1]`.
    pub fn new(config: PendulumConfig, seed: u64) -> Result<(Self, Vec<f64>)> {
        config.validate()?;
        let mut rng = stream_rng(seed, Stream::Policy);
        let angle = rng.random_range(-PI..=PI);
        let speed = rng.random_range(-1.0..=1.0);
        let p = Pendulum {
            config,
            angle,
            speed,
            rng,
        };
        let obs = p.observe();
        Ok((p, obs))
    }

    pub fn with_state(config: PendulumConfig, angle: f64, speed: f64, seed: u64) -> Result<Self> {
        config.validate()?;
        let (lo, hi) = config.speed_range;
        Ok(Pendulum {
            angle,
            speed: speed.clamp(lo, hi),
            rng: stream_rng(seed, Stream::Policy),
            config,
        })
    }

    pub fn config(&self) -> &PendulumConfig {
        &self.config
    }

    pub fn angle(&self) -> f64 {
        self.angle
    }

    pub fn speed(&self) -> f64 {
        self.speed
    }

    /// Applies one torque sample from the policy and returns the new
    /// observation.
    pub fn step(&mut self) -> Vec<f64> {
        let (lo, hi) = self.config.policy.bounds();
        let torque = self.rng.random_range(lo..=hi);
        self.apply(torque);
        self.observe()
    }

    pub fn apply(&mut self, torque: f64) {
        let c = &self.config;
        let (lo, hi) = c.speed_range;
        let accel = 3.0 * c.gravity / (2.0 * c.length) * self.angle.sin()
            + 3.0 / (c.mass * c.length * c.length) * torque;
        self.speed = (self.speed + accel * c.dt).clamp(lo, hi);
        self.angle += self.speed * c.dt;
    }

    pub fn observe(&self) -> Vec<f64> {
        let c = &self.config;
        let bins = c.bins_per_dim;
        let (plo, phi) = c.position_range;
        let (slo, shi) = c.speed_range;
        let mut obs = vec![0.0; 3 * bins];
        obs[bin_index(self.angle.sin(), plo, phi, bins)] = 1.0;
        obs[bins + bin_index(self.angle.cos(), plo, phi, bins)] = 1.0;
        obs[2 * bins + bin_index(self.speed, slo, shi, bins)] = 1.0;
        obs
    }
}
