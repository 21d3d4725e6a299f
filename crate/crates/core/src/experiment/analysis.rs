//! Offline statistics over weight snapshots, the pendulum weight-matrix demo,
//! and throughput measurement.

use std::collections::HashSet;
use std::time::Instant;

use serde::Serialize;

use super::config::ExperimentConfig;
use super::runner::{setup_trial, snapshot_bank, WeightSnapshot};
use crate::env::{Pendulum, PendulumConfig, Point};
use crate::error::{Error, Result};
use crate::learner::{GvfBank, GvfParams};

/// `|a ∩ b| / |a ∪ b|`; two empty sets count as identical.
pub fn jaccard(a: &[usize], b: &[usize]) -> f64 {
    let a: HashSet<_> = a.iter().collect();
    let b: HashSet<_> = b.iter().collect();
    let union = a.union(&b).count();
    if union == 0 {
        return 1.0;
    }
    a.intersection(&b).count() as f64 / union as f64
}

/// Median of a non-empty sample; the mean of the two middle values for even
/// lengths.
pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() || values.iter().any(|v| v.is_nan()) {
        return Err(Error::invalid("median needs a non-empty sample without NaN"));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Ok(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// Per-GVF Jaccard overlap of the top sets of two snapshots.
pub fn top_set_overlaps(early: &WeightSnapshot, late: &WeightSnapshot) -> Result<Vec<f64>> {
    if early.top.len() != late.top.len() {
        return Err(Error::invalid("snapshots cover different numbers of GVFs"));
    }
    Ok(early
        .top
        .iter()
        .zip(&late.top)
        .map(|(a, b)| jaccard(a, b))
        .collect())
}

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Spatial locality of learned top sets.
///
/// Only cumulants whose sensor lies within `interior * half_width` of the
/// centre (in the max norm) are considered. A cumulant is local when the mean
/// distance from its sensor to the members of its top set is below the mean
/// distance to all sensors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Locality {
    pub interior: usize,
    pub local: usize,
}

impl Locality {
    pub fn fraction(&self) -> f64 {
        if self.interior == 0 {
            f64::NAN
        } else {
            self.local as f64 / self.interior as f64
        }
    }
}

pub fn spatial_locality(
    snapshot: &WeightSnapshot,
    cumulants: &[usize],
    positions: &[Point],
    half_width: f64,
    interior: f64,
) -> Result<Locality> {
    if cumulants.len() != snapshot.top.len() {
        return Err(Error::invalid("cumulants and snapshot disagree in length"));
    }
    let limit = interior * half_width;
    let mut out = Locality {
        interior: 0,
        local: 0,
    };
    for (&c, top) in cumulants.iter().zip(&snapshot.top) {
        let p = *positions
            .get(c)
            .ok_or_else(|| Error::invalid("cumulant index outside positions"))?;
        if p[0].abs().max(p[1].abs()) > limit || top.is_empty() {
            continue;
        }
        out.interior += 1;
        let to_top = top.iter().map(|&j| dist(p, positions[j])).sum::<f64>() / top.len() as f64;
        let to_all = positions.iter().map(|&q| dist(p, q)).sum::<f64>() / positions.len() as f64;
        if to_top < to_all {
            out.local += 1;
        }
    }
    Ok(out)
}

/// Fraction of GVFs whose own cumulant index is in their top set.
pub fn self_predictive_fraction(top: &[Vec<usize>], cumulants: &[usize]) -> f64 {
    let hits = top
        .iter()
        .zip(cumulants)
        .filter(|(t, c)| t.contains(c))
        .count();
    hits as f64 / cumulants.len().max(1) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PendulumDemoConfig {
    pub steps: u64,
    pub step_size: f64,
    pub trace_decay: f64,
    pub discount: f64,
    pub top: usize,
    pub seed: u64,
}

impl Default for PendulumDemoConfig {
    fn default() -> Self {
        PendulumDemoConfig {
            steps: 15_000,
            step_size: 1e-3,
            trace_decay: 0.8,
            discount: 0.9,
            top: 5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PendulumDemo {
    /// Row `i` holds `|w_i|` of the GVF whose cumulant is observation `i`.
    pub abs_weights: Vec<Vec<f64>>,
    pub top: Vec<Vec<usize>>,
    pub self_predictive: f64,
}

/// Learns one GVF per pendulum observation component, each predicting its
/// own component from all of them, and reports the weight matrix.
pub fn pendulum_demo(env: PendulumConfig, demo: PendulumDemoConfig) -> Result<PendulumDemo> {
    let (mut pendulum, mut obs) = Pendulum::new(env, demo.seed)?;
    let d = obs.len();
    let cumulants: Vec<usize> = (0..d).collect();
    let mut bank = GvfBank::new(
        d,
        cumulants.clone(),
        GvfParams {
            step_size: demo.step_size,
            trace_decay: demo.trace_decay,
            discount: demo.discount,
            k: demo.top.min(d),
            refresh_period: demo.steps.max(1),
        },
    )?;
    for _ in 0..demo.steps {
        let next = pendulum.step();
        bank.update(&obs, &next)?;
        obs = next;
    }
    let snap = snapshot_bank(&bank, demo.steps, demo.top);
    Ok(PendulumDemo {
        self_predictive: self_predictive_fraction(&snap.top, &cumulants),
        abs_weights: snap.abs_weights,
        top: snap.top,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Throughput {
    pub m: usize,
    pub steps: u64,
    pub secs_per_step: f64,
    pub steps_per_sec: f64,
    pub gvf_updates_per_sec: f64,
}

/// Times `steps` agent steps of `config` with `m` overridden, after a short
/// warm-up. Prediction quality is irrelevant here.
pub fn measure_throughput(config: &ExperimentConfig, m: usize, steps: u64) -> Result<Throughput> {
    let mut c = config.clone();
    c.agent.m = m;
    let setup = setup_trial(&c, 0)?;
    let (mut env, mut agent) = (setup.env, setup.agent);
    let mut obs = vec![0.0; env.num_observations()];
    for _ in 0..steps.min(1000) {
        let r = env.step_into(&mut obs);
        agent.step(r, &obs)?;
    }
    let started = Instant::now();
    for _ in 0..steps {
        let r = env.step_into(&mut obs);
        agent.step(r, &obs)?;
    }
    let secs = started.elapsed().as_secs_f64().max(1e-12);
    let gvfs = agent.bank().map_or(0, |b| b.len()) as f64;
    Ok(Throughput {
        m: c.agent.effective_m(),
        steps,
        secs_per_step: secs / steps.max(1) as f64,
        steps_per_sec: steps as f64 / secs,
        gvf_updates_per_sec: steps as f64 * gvfs / secs,
    })
}

/// Ratio of the measured time per step at `far` to its straight-line
/// extrapolation through the two nearer points.
pub fn scaling_ratio(near: &Throughput, mid: &Throughput, far: &Throughput) -> f64 {
    let slope = (mid.secs_per_step - near.secs_per_step) / (mid.m as f64 - near.m as f64);
    let predicted = near.secs_per_step + slope * (far.m as f64 - near.m as f64);
    far.secs_per_step / predicted
}
