use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::env::FrogsEyeConfig;
use crate::error::{Error, Result};
use crate::features::FilterKind;

/// How the agent's neighborhoods are formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    /// No neighborhoods; features are the raw observation.
    Linear,
    /// `k` uniformly random components per neighborhood.
    Random,
    /// Top-k weights of a bank of auxiliary GVFs.
    Adaptive,
    /// `k` nearest sensors to each cumulant sensor (uses sensor positions).
    Distance,
}

impl Architecture {
    pub const ALL: [Architecture; 4] = [
        Architecture::Linear,
        Architecture::Random,
        Architecture::Adaptive,
        Architecture::Distance,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Architecture::Linear => "linear",
            Architecture::Random => "random",
            Architecture::Adaptive => "adaptive",
            Architecture::Distance => "distance",
        }
    }

    /// Best main step size found by the published full-scale sweep.
    pub fn default_step_size(self, filter: FilterKind) -> f64 {
        use Architecture::*;
        use FilterKind::*;
        match (self, filter) {
            (Adaptive, Majority) | (Distance, Majority) => 1e-5,
            (Adaptive, Relu) => 1e-6,
            _ => 3e-6,
        }
    }
}

impl std::fmt::Display for Architecture {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Architecture {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(Architecture::Linear),
            "random" => Ok(Architecture::Random),
            "adaptive" => Ok(Architecture::Adaptive),
            "distance" => Ok(Architecture::Distance),
            other => Err(Error::invalid(format!("unknown architecture {other:?}"))),
        }
    }
}

/// Per-architecture main step sizes; unset entries fall back to
/// [`Architecture::default_step_size`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepSizes {
    pub linear: Option<f64>,
    pub random: Option<f64>,
    pub adaptive: Option<f64>,
    pub distance: Option<f64>,
}

impl StepSizes {
    pub fn get(&self, arch: Architecture) -> Option<f64> {
        match arch {
            Architecture::Linear => self.linear,
            Architecture::Random => self.random,
            Architecture::Adaptive => self.adaptive,
            Architecture::Distance => self.distance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub architecture: Architecture,
    pub filter: FilterKind,
    /// Number of neighborhoods (and auxiliary GVFs).
    pub m: usize,
    pub k: usize,
    /// Filters per neighborhood for LTU/ReLU; Majority always uses one.
    pub n: usize,
    pub refresh_period: u64,
    /// Main step size; overrides `step_sizes` when set.
    pub step_size: Option<f64>,
    pub step_sizes: StepSizes,
    pub aux_step_size: f64,
    pub trace_decay: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            architecture: Architecture::Adaptive,
            filter: FilterKind::Majority,
            m: 4000,
            k: 10,
            n: 100,
            refresh_period: 100,
            step_size: None,
            step_sizes: StepSizes::default(),
            aux_step_size: 3e-6,
            trace_decay: 0.8,
        }
    }
}

impl AgentConfig {
    pub fn main_step_size(&self) -> f64 {
        self.step_size
            .or_else(|| self.step_sizes.get(self.architecture))
            .unwrap_or_else(|| self.architecture.default_step_size(self.filter))
    }

    /// Neighborhood count actually used; the linear architecture has none.
    pub fn effective_m(&self) -> usize {
        match self.architecture {
            Architecture::Linear => 0,
            _ => self.m,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub total_steps: u64,
    pub segment_length: usize,
    pub num_trials: u64,
    pub base_seed: u64,
    pub output_dir: Option<PathBuf>,
    /// Steps at which auxiliary weights are recorded (Adaptive only).
    pub snapshot_steps: Vec<u64>,
    /// Size of the recorded top sets; defaults to `k`.
    pub snapshot_top: Option<usize>,
    /// Parallel trial workers; 0 uses all cores.
    pub workers: usize,
    /// Write per-trial binary prediction/reward logs.
    pub write_logs: bool,
    /// Predictions with magnitude above this flag the trial as diverged.
    pub divergence_bound: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            total_steps: 5_000_000,
            segment_length: 100_000,
            num_trials: 30,
            base_seed: 0,
            output_dir: None,
            snapshot_steps: Vec::new(),
            snapshot_top: None,
            workers: 0,
            write_logs: true,
            divergence_bound: 1e6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    /// The main step size.
    StepSize,
    /// The number of neighborhoods.
    M,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::StepSize => "step_size",
            SweepParam::M => "m",
        }
    }
}

impl std::str::FromStr for SweepParam {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "step_size" | "alpha" => Ok(SweepParam::StepSize),
            "m" => Ok(SweepParam::M),
            other => Err(Error::invalid(format!("cannot sweep over {other:?}"))),
        }
    }
}

/// A grid of architectures x filters x parameter values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub param: Option<SweepParam>,
    pub values: Vec<f64>,
    pub architectures: Vec<Architecture>,
    pub filters: Vec<FilterKind>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            param: None,
            values: Vec::new(),
            architectures: Architecture::ALL.to_vec(),
            filters: vec![FilterKind::Majority],
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.param.is_some() && self.values.is_empty() {
            return Err(Error::Config("sweep: parameter given without values".into()));
        }
        if let Some(v) = self.values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::Config(format!("sweep: value {v} must be finite and positive")));
        }
        if self.param == Some(SweepParam::M) && self.values.iter().any(|v| v.fract() != 0.0) {
            return Err(Error::Config("sweep: m values must be integers".into()));
        }
        if self.architectures.is_empty() || self.filters.is_empty() {
            return Err(Error::Config("sweep: needs at least one architecture and filter".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub environment: FrogsEyeConfig,
    pub agent: AgentConfig,
    pub run: RunConfig,
    pub sweep: Option<SweepSpec>,
}

const PRESETS: &[(&str, &str)] = &[
    ("frogs_eye_paper", include_str!("../../configs/frogs_eye_paper.toml")),
    ("frogs_eye_small", include_str!("../../configs/frogs_eye_small.toml")),
    ("fig3_paper", include_str!("../../configs/fig3_paper.toml")),
    ("fig3_small", include_str!("../../configs/fig3_small.toml")),
    ("fig4_paper", include_str!("../../configs/fig4_paper.toml")),
    ("fig4_small", include_str!("../../configs/fig4_small.toml")),
    ("fig6_small", include_str!("../../configs/fig6_small.toml")),
    ("fig7_paper", include_str!("../../configs/fig7_paper.toml")),
    ("fig7_small", include_str!("../../configs/fig7_small.toml")),
];

impl ExperimentConfig {
    pub fn preset_names() -> impl Iterator<Item = &'static str> {
        PRESETS.iter().map(|(name, _)| *name)
    }

    pub fn preset(name: &str) -> Result<Self> {
        let (_, text) = PRESETS
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| Error::Config(format!("no preset named {name:?}")))?;
        Self::from_toml(text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let config: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Loads a file, or a built-in preset when no such file exists.
    pub fn load(path_or_preset: &str) -> Result<Self> {
        let path = Path::new(path_or_preset);
        if path.is_file() {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            Self::from_toml(&text)
        } else {
            Self::preset(path_or_preset)
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.environment.validate()?;
        let a = &self.agent;
        let d = self.environment.num_sensors;
        if a.k == 0 || a.k > d {
            return Err(Error::Config(format!("k={} must lie in 1..={d}", a.k)));
        }
        if a.architecture != Architecture::Linear && a.m > d {
            return Err(Error::Config(format!("m={} exceeds d={d}", a.m)));
        }
        if a.n == 0 {
            return Err(Error::Config("n must be positive".into()));
        }
        if a.refresh_period == 0 {
            return Err(Error::Config("refresh_period must be positive".into()));
        }
        for (name, v) in [
            ("step_size", a.main_step_size()),
            ("aux_step_size", a.aux_step_size),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&a.trace_decay) {
            return Err(Error::Config("trace_decay must lie in [0, 1]".into()));
        }
        let r = &self.run;
        if r.segment_length == 0 || r.total_steps < 2 * r.segment_length as u64 {
            return Err(Error::Config(format!(
                "total_steps={} must cover at least two segments of {}",
                r.total_steps, r.segment_length
            )));
        }
        if r.num_trials == 0 {
            return Err(Error::Config("num_trials must be positive".into()));
        }
        if let Some(sweep) = &self.sweep {
            sweep.validate()?;
        }
        Ok(())
    }
}
