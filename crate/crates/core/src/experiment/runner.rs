//! One trial: build the process, features and learners from the trial seed,
//! stream `total_steps` transitions through the agent, and score the log.

use std::time::Instant;

use rayon::prelude::*;

use super::config::{Architecture, ExperimentConfig};
use crate::env::{FrogsEye, Point};
use crate::error::{Error, Result};
use crate::features::{make_distance_neighborhoods, make_random_neighborhoods, FilterBank};
use crate::learner::{
    sample_cumulants, top_k_by_magnitude, Agent, AgentParams, GvfBank, GvfParams,
    NeighborhoodSource,
};
use crate::metrics::{segment_mse, SegmentError, TrialLog};
use crate::rng::{stream_rng, trial_seed, Stream};

/// Auxiliary weights recorded at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSnapshot {
    pub step: u64,
    /// Top sets per GVF, largest magnitude first.
    pub top: Vec<Vec<usize>>,
    /// `|w_i|` per GVF, indexed by observation slot.
    pub abs_weights: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct TrialResult {
    pub architecture: Architecture,
    pub filter: crate::features::FilterKind,
    pub trial_index: u64,
    pub seed: u64,
    pub curve: Vec<SegmentError>,
    /// Error of the last scored segment; NaN when diverged.
    pub final_error: f64,
    pub diverged: bool,
    pub steps_completed: u64,
    pub wall_clock_secs: f64,
    pub steps_per_sec: f64,
    pub gvf_updates_per_sec: f64,
    pub snapshots: Vec<WeightSnapshot>,
    /// Sensor positions indexed by observation slot.
    pub observation_positions: Vec<Point>,
    pub cumulants: Vec<usize>,
    pub log: TrialLog,
}

/// Everything a trial needs before its first transition.
pub struct TrialSetup {
    pub seed: u64,
    pub env: FrogsEye,
    pub agent: Agent,
    pub cumulants: Vec<usize>,
}

/// Builds environment and agent for `trial_index`.
///
/// All randomness flows from the trial seed through named streams, so the
/// architecture choice never changes the sensor layout, insect path, noise,
/// cumulant choice or `A`.
pub fn setup_trial(config: &ExperimentConfig, trial_index: u64) -> Result<TrialSetup> {
    config.validate()?;
    let seed = trial_seed(config.run.base_seed, trial_index);
    let (env, first_obs) = FrogsEye::new(config.environment.clone(), seed)?;
    let a = &config.agent;
    let d = env.num_observations();
    let filter = FilterBank::new(a.filter, a.n, a.k, &mut stream_rng(seed, Stream::Filters))?;
    let m = a.effective_m();
    let cumulants = sample_cumulants(d, m, &mut stream_rng(seed, Stream::Cumulants))?;
    let gamma = config.environment.discount;
    let source = match a.architecture {
        Architecture::Linear => NeighborhoodSource::Fixed(Vec::new()),
        Architecture::Random => NeighborhoodSource::Fixed(make_random_neighborhoods(
            d,
            m,
            a.k,
            &mut stream_rng(seed, Stream::Neighborhoods),
        )?),
        Architecture::Distance => NeighborhoodSource::Fixed(make_distance_neighborhoods(
            &env.observation_positions(),
            &cumulants,
            a.k,
        )?),
        Architecture::Adaptive => NeighborhoodSource::Adaptive(GvfBank::new(
            d,
            cumulants.clone(),
            GvfParams {
                step_size: a.aux_step_size,
                trace_decay: a.trace_decay,
                discount: gamma,
                k: a.k,
                refresh_period: a.refresh_period,
            },
        )?),
    };
    let params = AgentParams {
        step_size: a.main_step_size(),
        trace_decay: a.trace_decay,
        discount: gamma,
    };
    let agent = Agent::new(params, source, filter, first_obs)?;
    Ok(TrialSetup {
        seed,
        env,
        agent,
        cumulants,
    })
}

pub fn snapshot_bank(bank: &GvfBank, step: u64, top: usize) -> WeightSnapshot {
    let d = bank.num_inputs();
    let top = top.min(d);
    let abs_weights: Vec<Vec<f64>> = (0..bank.len())
        .map(|i| bank.weights_of(i).into_iter().map(f64::abs).collect())
        .collect();
    let top = abs_weights
        .iter()
        .map(|w| top_k_by_magnitude(d, top, |j| w[j]))
        .collect();
    WeightSnapshot {
        step,
        top,
        abs_weights,
    }
}

pub fn run_trial(config: &ExperimentConfig, trial_index: u64) -> Result<TrialResult> {
    let TrialSetup {
        seed,
        mut env,
        mut agent,
        cumulants,
    } = setup_trial(config, trial_index)?;
    let total = config.run.total_steps;
    let bound = config.run.divergence_bound;
    let top = config.run.snapshot_top.unwrap_or(config.agent.k);
    let mut snapshot_steps = config.run.snapshot_steps.clone();
    snapshot_steps.sort_unstable();
    snapshot_steps.dedup();
    let mut next_snapshot = snapshot_steps.iter().peekable();

    let mut predictions = Vec::with_capacity(total as usize);
    let mut rewards = Vec::with_capacity(total as usize);
    let mut snapshots = Vec::new();
    let mut obs = vec![0.0; env.num_observations()];
    let mut diverged = false;

    let started = Instant::now();
    for step in 1..=total {
        let reward = env.step_into(&mut obs);
        match agent.step(reward, &obs) {
            Ok(res) if res.prediction.abs() <= bound => {
                predictions.push(res.prediction);
                rewards.push(reward);
            }
            Ok(_) | Err(Error::Numeric(_)) => {
                diverged = true;
                break;
            }
            Err(e) => return Err(e),
        }
        while next_snapshot.peek().is_some_and(|&&s| s <= step) {
            let s = *next_snapshot.next().expect("peeked");
            if let Some(bank) = agent.bank() {
                snapshots.push(snapshot_bank(bank, s, top));
            }
        }
    }
    let wall_clock_secs = started.elapsed().as_secs_f64();
    let steps_completed = predictions.len() as u64;
    let steps_per_sec = steps_completed as f64 / wall_clock_secs.max(1e-9);
    let gvf_updates_per_sec = steps_per_sec * agent.bank().map_or(0, |b| b.len()) as f64;

    let log = TrialLog {
        predictions,
        rewards,
        discount: config.environment.discount,
        segment_length: config.run.segment_length,
    };
    let (curve, final_error) = if diverged {
        (Vec::new(), f64::NAN)
    } else {
        let curve = segment_mse(&log)?;
        let last = curve.last().map_or(f64::NAN, |p| p.mse);
        (curve, last)
    };
    Ok(TrialResult {
        architecture: config.agent.architecture,
        filter: config.agent.filter,
        trial_index,
        seed,
        curve,
        final_error,
        diverged,
        steps_completed,
        wall_clock_secs,
        steps_per_sec,
        gvf_updates_per_sec,
        snapshots,
        observation_positions: env.observation_positions(),
        cumulants,
        log,
    })
}

/// Runs `jobs` on a pool of `workers` threads (0 = all cores), keeping
/// input order in the output.
pub fn run_parallel<T, F>(workers: usize, jobs: Vec<T>, f: F) -> Result<Vec<TrialResult>>
where
    T: Send,
    F: Fn(T) -> Result<TrialResult> + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| jobs.into_par_iter().map(&f).collect())
}

/// All `num_trials` trials of one configuration.
pub fn run_trials(config: &ExperimentConfig) -> Result<Vec<TrialResult>> {
    let jobs: Vec<u64> = (0..config.run.num_trials).collect();
    run_parallel(config.run.workers, jobs, |i| run_trial(config, i))
}
