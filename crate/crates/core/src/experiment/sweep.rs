use serde::Serialize;

use super::config::{Architecture, ExperimentConfig, SweepParam, SweepSpec};
use super::runner::{run_parallel, run_trial, TrialResult};
use crate::error::Result;
use crate::features::FilterKind;
use crate::metrics::MeanSe;

/// One grid cell of a sweep, summarized across trials. Diverged trials are
/// counted but excluded from the error statistics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub architecture: Architecture,
    pub filter: FilterKind,
    pub param: String,
    pub value: f64,
    pub mean_final_error: f64,
    pub se_final_error: f64,
    pub n_trials: usize,
    pub n_diverged: usize,
    pub mean_steps_per_sec: f64,
    pub mean_gvf_updates_per_sec: f64,
}

impl SweepRow {
    pub fn summary(&self) -> MeanSe {
        MeanSe {
            mean: self.mean_final_error,
            se: self.se_final_error,
            n: self.n_trials - self.n_diverged,
        }
    }
}

/// Configuration for one grid cell.
pub fn cell_config(
    base: &ExperimentConfig,
    arch: Architecture,
    filter: FilterKind,
    param: Option<SweepParam>,
    value: f64,
) -> ExperimentConfig {
    let mut c = base.clone();
    c.agent.architecture = arch;
    c.agent.filter = filter;
    c.sweep = None;
    match param {
        Some(SweepParam::StepSize) => c.agent.step_size = Some(value),
        Some(SweepParam::M) => c.agent.m = value as usize,
        None => {}
    }
    c
}

pub fn summarize(
    arch: Architecture,
    filter: FilterKind,
    param: &str,
    value: f64,
    trials: &[&TrialResult],
) -> SweepRow {
    let finals: Vec<f64> = trials
        .iter()
        .filter(|t| !t.diverged)
        .map(|t| t.final_error)
        .collect();
    let stats = MeanSe::of(&finals);
    let n = trials.len().max(1) as f64;
    SweepRow {
        architecture: arch,
        filter,
        param: param.to_string(),
        value,
        mean_final_error: stats.mean,
        se_final_error: stats.se,
        n_trials: trials.len(),
        n_diverged: trials.iter().filter(|t| t.diverged).count(),
        mean_steps_per_sec: trials.iter().map(|t| t.steps_per_sec).sum::<f64>() / n,
        mean_gvf_updates_per_sec: trials.iter().map(|t| t.gvf_updates_per_sec).sum::<f64>() / n,
    }
}

/// Runs every (architecture, filter, value, trial) combination of `spec`
/// against `base` and returns one row per grid cell, in grid order, plus all
/// trial results in the same order.
pub fn run_sweep(
    base: &ExperimentConfig,
    spec: &SweepSpec,
) -> Result<(Vec<SweepRow>, Vec<TrialResult>)> {
    spec.validate()?;
    let values: Vec<Option<f64>> = match spec.param {
        Some(_) => spec.values.iter().copied().map(Some).collect(),
        None => vec![None],
    };
    let mut cells = Vec::new();
    for &arch in &spec.architectures {
        for &filter in &spec.filters {
            for &value in &values {
                let cfg = cell_config(base, arch, filter, spec.param, value.unwrap_or(f64::NAN));
                cfg.validate()?;
                cells.push((arch, filter, value, cfg));
            }
        }
    }
    let trials = base.run.num_trials;
    let jobs: Vec<(usize, u64)> = (0..cells.len())
        .flat_map(|c| (0..trials).map(move |t| (c, t)))
        .collect();
    let results = run_parallel(base.run.workers, jobs, |(c, t)| run_trial(&cells[c].3, t))?;

    let param_name = spec.param.map_or("none", SweepParam::name);
    let rows = cells
        .iter()
        .enumerate()
        .map(|(c, (arch, filter, value, _))| {
            let chunk: Vec<&TrialResult> =
                results[c * trials as usize..(c + 1) * trials as usize].iter().collect();
            summarize(*arch, *filter, param_name, value.unwrap_or(f64::NAN), &chunk)
        })
        .collect();
    Ok((rows, results))
}
