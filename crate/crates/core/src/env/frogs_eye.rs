//! The Frog's Eye domain: an insect drifting under attracted Brownian motion,
//! watched by randomly scattered binary proximity sensors with heavy bit-flip
//! noise.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::Point;
use crate::error::{Error, Result};
use crate::rng::{stream_rng, RngState, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrogsEyeConfig {
    /// The observable space is `[-half_width, half_width]²`.
    pub half_width: f64,
    pub num_sensors: usize,
    pub sensor_response_radius: f64,
    /// Each sensor bit is forced to 0 with probability `noise_rate / 2` and to
    /// 1 with probability `noise_rate / 2`.
    pub noise_rate: f64,
    pub attraction_rate: f64,
    /// Per-coordinate standard deviation of the Brownian step.
    pub dynamics_scale: f64,
    pub reward_radius: f64,
    pub particle_radius: f64,
    pub discount: f64,
}

impl Default for FrogsEyeConfig {
    fn default() -> Self {
        FrogsEyeConfig {
            half_width: 8.0,
            num_sensors: 4000,
            sensor_response_radius: 0.6,
            noise_rate: 0.5,
            attraction_rate: 0.01,
            dynamics_scale: 0.05,
            reward_radius: 0.5,
            particle_radius: 0.5,
            discount: 0.99,
        }
    }
}

impl FrogsEyeConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(format!("frogs eye: {msg}")));
        if self.num_sensors == 0 {
            return bad("num_sensors must be positive");
        }
        if !(0.0..=1.0).contains(&self.noise_rate) {
            return bad("noise_rate must lie in [0, 1]");
        }
        if !(self.attraction_rate > 0.0 && self.attraction_rate <= 1.0) {
            return bad("attraction_rate must lie in (0, 1]");
        }
        if !(self.dynamics_scale > 0.0 && self.dynamics_scale.is_finite()) {
            return bad("dynamics_scale must be positive");
        }
        if !(self.sensor_response_radius >= 0.0
            && self.reward_radius >= 0.0
            && self.particle_radius >= 0.0)
        {
            return bad("radii must be non-negative");
        }
        if !(self.capture_radius() < self.half_width) {
            return bad("reward_radius + particle_radius must be below half_width");
        }
        if !(0.0..1.0).contains(&self.discount) {
            return bad("discount must lie in [0, 1)");
        }
        Ok(())
    }

    /// Radius of the rewarding disk seen by the particle centre.
    pub fn capture_radius(&self) -> f64 {
        self.reward_radius + self.particle_radius
    }

    /// A sensor fires when the particle centre is closer than this.
    pub fn firing_radius(&self) -> f64 {
        self.sensor_response_radius + self.particle_radius
    }

    pub fn in_reward_region(&self, p: Point) -> bool {
        norm_sq(p) < self.capture_radius().powi(2)
    }

    pub fn in_space(&self, p: Point) -> bool {
        p[0].abs() <= self.half_width && p[1].abs() <= self.half_width
    }
}

fn norm_sq(p: Point) -> f64 {
    p[0] * p[0] + p[1] * p[1]
}

/// A running Frog's Eye process.
///
/// Observation slot `s` carries the reading of sensor `sensor_of_slot[s]`.
/// The scrambling is drawn once at construction and held for the trial.
#[derive(Debug, Clone)]
pub struct FrogsEye {
    config: FrogsEyeConfig,
    sensors: Vec<Point>,
    sensor_of_slot: Vec<usize>,
    slot_of_sensor: Vec<usize>,
    insect: Point,
    insect_rng: ChaCha8Rng,
    noise_rng: ChaCha8Rng,
}

/// Everything needed to resume a [`FrogsEye`] mid-trial.
#[derive(Debug, Clone, PartialEq)]
pub struct FrogsEyeSnapshot {
    pub insect: Point,
    pub insect_rng: RngState,
    pub noise_rng: RngState,
}

impl FrogsEye {
    /// Builds the process for one trial and returns it with the first
    /// observation.
    pub fn new(config: FrogsEyeConfig, seed: u64) -> Result<(Self, Vec<f64>)> {
        config.validate()?;
        let b = config.half_width;
        let d = config.num_sensors;

        let mut sensor_rng = stream_rng(seed, Stream::Sensors);
        let sensors: Vec<Point> = (0..d)
            .map(|_| {
                [
                    sensor_rng.random_range(-b..=b),
                    sensor_rng.random_range(-b..=b),
                ]
            })
            .collect();

        let mut perm_rng = stream_rng(seed, Stream::Permutation);
        let mut sensor_of_slot: Vec<usize> = (0..d).collect();
        sensor_of_slot.shuffle(&mut perm_rng);
        let mut slot_of_sensor = vec![0; d];
        for (slot, &sensor) in sensor_of_slot.iter().enumerate() {
            slot_of_sensor[sensor] = slot;
        }

        let mut insect_rng = stream_rng(seed, Stream::Insect);
        let insect = spawn(&config, &mut insect_rng);

        let mut env = FrogsEye {
            config,
            sensors,
            sensor_of_slot,
            slot_of_sensor,
            insect,
            insect_rng,
            noise_rng: stream_rng(seed, Stream::Noise),
        };
        let obs = env.sense();
        Ok((env, obs))
    }

    pub fn config(&self) -> &FrogsEyeConfig {
        &self.config
    }

    pub fn num_observations(&self) -> usize {
        self.sensors.len()
    }

    /// Sensor positions in sensor (unscrambled) order.
    pub fn sensor_positions(&self) -> &[Point] {
        &self.sensors
    }

    /// Sensor positions indexed by observation slot.
    pub fn observation_positions(&self) -> Vec<Point> {
        self.sensor_of_slot.iter().map(|&s| self.sensors[s]).collect()
    }

    pub fn sensor_of_slot(&self) -> &[usize] {
        &self.sensor_of_slot
    }

    pub fn slot_of_sensor(&self) -> &[usize] {
        &self.slot_of_sensor
    }

    pub fn insect_position(&self) -> Point {
        self.insect
    }

    /// Places the insect directly. Used by tests and checkpoint restore.
    pub fn set_insect_position(&mut self, p: Point) {
        self.insect = p;
    }

    /// Advances one transition, returning the reward `R_{t+1}` and writing
    /// `o_{t+1}` into `obs`.
    ///
    /// The reward reports whether the insect was inside the rewarding disk
    /// *before* the transition. An insect in the disk or outside the square
    /// respawns uniformly in the square minus the disk; otherwise it takes an
    /// attracted Brownian step.
    pub fn step_into(&mut self, obs: &mut [f64]) -> f64 {
        let p = self.insect;
        let captured = self.config.in_reward_region(p);
        let reward = if captured { 1.0 } else { 0.0 };
        self.insect = if captured || !self.config.in_space(p) {
            spawn(&self.config, &mut self.insect_rng)
        } else {
            let sigma = self.config.dynamics_scale;
            let shrink = 1.0 - self.config.attraction_rate;
            let nx = Normal::new(p[0], sigma).expect("validated scale");
            let ny = Normal::new(p[1], sigma).expect("validated scale");
            let xi = [
                nx.sample(&mut self.insect_rng),
                ny.sample(&mut self.insect_rng),
            ];
            [shrink * xi[0], shrink * xi[1]]
        };
        self.sense_into(obs);
        reward
    }

    pub fn step(&mut self) -> (f64, Vec<f64>) {
        let mut obs = vec![0.0; self.num_observations()];
        let r = self.step_into(&mut obs);
        (r, obs)
    }

    /// Noisy, scrambled sensor readings for the current insect position.
    pub fn sense(&mut self) -> Vec<f64> {
        let mut obs = vec![0.0; self.num_observations()];
        self.sense_into(&mut obs);
        obs
    }

    pub fn sense_into(&mut self, obs: &mut [f64]) {
        assert_eq!(obs.len(), self.sensors.len(), "observation buffer length");
        let r2 = self.config.firing_radius().powi(2);
        let half_eps = 0.5 * self.config.noise_rate;
        let eps = self.config.noise_rate;
        let p = self.insect;
        for (j, s) in self.sensors.iter().enumerate() {
            let dx = s[0] - p[0];
            let dy = s[1] - p[1];
            let base = dx * dx + dy * dy < r2;
            let u: f64 = self.noise_rng.random();
            let bit = if u < half_eps {
                false
            } else if u < eps {
                true
            } else {
                base
            };
            obs[self.slot_of_sensor[j]] = if bit { 1.0 } else { 0.0 };
        }
    }

    pub fn snapshot(&self) -> FrogsEyeSnapshot {
        FrogsEyeSnapshot {
            insect: self.insect,
            insect_rng: RngState::capture(&self.insect_rng),
            noise_rng: RngState::capture(&self.noise_rng),
        }
    }

    /// Rebuilds a process from its trial seed and a mid-trial snapshot.
    pub fn resume(config: FrogsEyeConfig, seed: u64, snap: &FrogsEyeSnapshot) -> Result<Self> {
        let (mut env, _) = FrogsEye::new(config, seed)?;
        env.insect = snap.insect;
        env.insect_rng = snap.insect_rng.restore();
        env.noise_rng = snap.noise_rng.restore();
        Ok(env)
    }
}

/// Uniform on the square minus the rewarding disk, by rejection.
fn spawn(config: &FrogsEyeConfig, rng: &mut ChaCha8Rng) -> Point {
    let b = config.half_width;
    loop {
        let p = [rng.random_range(-b..=b), rng.random_range(-b..=b)];
        if !config.in_reward_region(p) {
            return p;
        }
    }
}
