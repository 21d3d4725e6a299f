//! The `pan` command line.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, Subcommand};

use crate::env::{PendulumConfig, TorquePolicy};
use crate::error::{Error, Result};
use crate::experiment::analysis::{
    measure_throughput, pendulum_demo, scaling_ratio, PendulumDemoConfig, Throughput,
};
use crate::experiment::io::{self, CurveRow, SnapshotRow};
use crate::experiment::{
    run_sweep, run_trials, summarize, Architecture, ExperimentConfig, SweepParam, SweepRow,
    TrialResult,
};
use crate::features::FilterKind;
use crate::metrics::{segment_mse, MeanSe};

#[derive(Debug, Parser)]
#[command(
    name = "pan",
    version,
    about = "Prediction-adapted neighborhoods on the Frog's Eye domain"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run all trials of one configuration.
    Run(RunArgs),
    /// Run a grid of architectures, filters and parameter values.
    Sweep(SweepArgs),
    /// Recompute curves and summaries from the trial logs in a directory.
    Analyze(AnalyzeArgs),
    /// Learn the pendulum GVF weight matrix.
    PendulumDemo(PendulumArgs),
    /// Measure steps per second for several neighborhood counts.
    Throughput(ThroughputArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// Base seed; trial i uses seed + i.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<u64>,
    /// Output directory [default: $PAN_OUT_DIR or ./pan-out]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct Overrides {
    /// Config file or preset name.
    #[arg(long, default_value = "frogs_eye_small")]
    config: String,
    #[arg(long)]
    arch: Option<Architecture>,
    #[arg(long)]
    filter: Option<FilterKind>,
    /// Number of sensors.
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    /// Neighborhood refresh period.
    #[arg(long)]
    h: Option<u64>,
    /// Main step size.
    #[arg(long)]
    alpha: Option<f64>,
    /// Auxiliary step size.
    #[arg(long)]
    aux_alpha: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    segment: Option<usize>,
    /// Parallel trials; 0 uses all cores.
    #[arg(long)]
    workers: Option<usize>,
    /// Skip the binary prediction logs.
    #[arg(long)]
    no_logs: bool,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    overrides: Overrides,
    /// Record auxiliary weights at these steps (comma separated).
    #[arg(long, value_delimiter = ',')]
    snapshot_steps: Vec<u64>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    overrides: Overrides,
    /// `alpha` (main step size) or `m`.
    #[arg(long)]
    param: Option<SweepParam>,
    #[arg(long, value_delimiter = ',')]
    values: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    archs: Vec<Architecture>,
    #[arg(long, value_delimiter = ',')]
    filters: Vec<FilterKind>,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    common: Common,
    /// Directory holding `log_*.bin` files.
    logdir: PathBuf,
}

#[derive(Debug, Args)]
struct PendulumArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value = "symmetric")]
    policy: String,
    #[arg(long, default_value_t = 15_000)]
    steps: u64,
    #[arg(long, default_value_t = 1e-3)]
    alpha: f64,
    #[arg(long, default_value_t = 0.8)]
    lambda: f64,
    #[arg(long, default_value_t = 0.9)]
    gamma: f64,
    #[arg(long, default_value_t = 5)]
    top: usize,
}

#[derive(Debug, Args)]
struct ThroughputArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    overrides: Overrides,
    #[arg(long, value_delimiter = ',', default_values_t = [100, 200, 400])]
    ms: Vec<usize>,
    /// Timed steps per neighborhood count.
    #[arg(long, default_value_t = 20_000)]
    timed_steps: u64,
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit status.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            let rendered = e.render().to_string();
            if e.use_stderr() && !rendered.contains("Usage") {
                eprintln!("\n{}", Cli::command().render_usage());
            }
            return e.exit_code();
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Run(a) => run(a),
        Command::Sweep(a) => sweep(a),
        Command::Analyze(a) => analyze(a),
        Command::PendulumDemo(a) => pendulum(a),
        Command::Throughput(a) => throughput(a),
    }
}

fn build_config(o: &Overrides, c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&o.config)?;
    let a = &mut cfg.agent;
    if let Some(v) = o.arch {
        a.architecture = v;
    }
    if let Some(v) = o.filter {
        a.filter = v;
    }
    if let Some(v) = o.d {
        cfg.environment.num_sensors = v;
    }
    if let Some(v) = o.m {
        a.m = v;
    }
    if let Some(v) = o.k {
        a.k = v;
    }
    if let Some(v) = o.n {
        a.n = v;
    }
    if let Some(v) = o.h {
        a.refresh_period = v;
    }
    if let Some(v) = o.alpha {
        a.step_size = Some(v);
    }
    if let Some(v) = o.aux_alpha {
        a.aux_step_size = v;
    }
    if let Some(v) = o.lambda {
        a.trace_decay = v;
    }
    let r = &mut cfg.run;
    if let Some(v) = o.steps {
        r.total_steps = v;
    }
    if let Some(v) = o.segment {
        r.segment_length = v;
    }
    if let Some(v) = o.workers {
        r.workers = v;
    }
    if o.no_logs {
        r.write_logs = false;
    }
    apply_common(&mut cfg, c);
    Ok(cfg)
}

fn apply_common(cfg: &mut ExperimentConfig, c: &Common) {
    if let Some(v) = c.seed {
        cfg.run.base_seed = v;
    }
    if let Some(v) = c.trials {
        cfg.run.num_trials = v;
    }
    if let Some(v) = &c.out {
        cfg.run.output_dir = Some(v.clone());
    }
}

fn output_dir(cfg: &ExperimentConfig) -> Result<PathBuf> {
    let dir = cfg.run.output_dir.clone().unwrap_or_else(io::default_output_dir);
    io::ensure_dir(&dir)?;
    Ok(dir)
}

fn write_results(dir: &Path, cfg: &ExperimentConfig, results: &[TrialResult]) -> Result<()> {
    let mut rows = Vec::new();
    for r in results {
        io::write_trial(dir, r, cfg.run.write_logs)?;
        rows.extend(io::curve_rows(r));
    }
    io::write_mean_curves(&dir.join("mean_curve.csv"), &io::mean_curves(&rows))
}

fn print_rows(rows: &[SweepRow]) {
    println!(
        "{:<10} {:<9} {:>10} {:>12} {:>10} {:>5} {:>9} {:>12}",
        "arch", "filter", rows.first().map_or("param", |r| r.param.as_str()), "final_mse", "se", "n", "diverged", "steps/s"
    );
    for r in rows {
        println!(
            "{:<10} {:<9} {:>10} {:>12.6} {:>10.6} {:>5} {:>9} {:>12.0}",
            r.architecture.name(),
            r.filter.name(),
            r.value,
            r.mean_final_error,
            r.se_final_error,
            r.n_trials - r.n_diverged,
            r.n_diverged,
            r.mean_steps_per_sec
        );
    }
}

fn run(a: RunArgs) -> Result<()> {
    let mut cfg = build_config(&a.overrides, &a.common)?;
    if !a.snapshot_steps.is_empty() {
        cfg.run.snapshot_steps = a.snapshot_steps;
    }
    cfg.validate()?;
    let dir = output_dir(&cfg)?;
    io::write_manifest(&dir, &cfg)?;
    let results = run_trials(&cfg)?;
    write_results(&dir, &cfg, &results)?;
    let refs: Vec<&TrialResult> = results.iter().collect();
    let row = summarize(cfg.agent.architecture, cfg.agent.filter, "none", f64::NAN, &refs);
    io::write_summary(&dir.join("summary.csv"), std::slice::from_ref(&row))?;
    print_rows(std::slice::from_ref(&row));
    println!(
        "gvf updates/s {:.0}; output in {}",
        row.mean_gvf_updates_per_sec,
        dir.display()
    );
    Ok(())
}

fn sweep(a: SweepArgs) -> Result<()> {
    let mut cfg = build_config(&a.overrides, &a.common)?;
    let mut spec = cfg.sweep.clone().unwrap_or_default();
    if let Some(p) = a.param {
        spec.param = Some(p);
    }
    if !a.values.is_empty() {
        spec.values = a.values;
    }
    if !a.archs.is_empty() {
        spec.architectures = a.archs;
    }
    if !a.filters.is_empty() {
        spec.filters = a.filters;
    }
    cfg.sweep = Some(spec.clone());
    let dir = output_dir(&cfg)?;
    io::write_manifest(&dir, &cfg)?;
    let (rows, results) = run_sweep(&cfg, &spec)?;
    io::write_summary(&dir.join("summary.csv"), &rows)?;
    // Per-trial files of different parameter values would collide, so
    // curves are collected into one table keyed by the swept value.
    let mut curves = csv::Writer::from_path(dir.join("sweep_curves.csv"))?;
    let per_cell = cfg.run.num_trials as usize;
    for (row, chunk) in rows.iter().zip(results.chunks(per_cell.max(1))) {
        for r in chunk {
            for p in &r.curve {
                curves.serialize(SweepCurveRow {
                    architecture: r.architecture,
                    filter: r.filter,
                    param: &row.param,
                    value: row.value,
                    trial: r.trial_index,
                    segment: p.segment,
                    mse: p.mse,
                })?;
            }
        }
    }
    curves.flush().map_err(|e| Error::io(&dir, e))?;
    print_rows(&rows);
    println!("output in {}", dir.display());
    Ok(())
}

#[derive(serde::Serialize)]
struct SweepCurveRow<'a> {
    architecture: Architecture,
    filter: FilterKind,
    param: &'a str,
    value: f64,
    trial: u64,
    segment: usize,
    mse: f64,
}

fn analyze(a: AnalyzeArgs) -> Result<()> {
    let logs = io::find_logs(&a.logdir)?;
    if logs.is_empty() {
        return Err(Error::invalid(format!(
            "no trial logs in {}",
            a.logdir.display()
        )));
    }
    let dir = a.common.out.clone().unwrap_or_else(|| a.logdir.join("analysis"));
    io::ensure_dir(&dir)?;
    let mut rows: Vec<CurveRow> = Vec::new();
    let mut groups: Vec<((Architecture, FilterKind), Vec<f64>, usize)> = Vec::new();
    for path in logs {
        let stored = io::read_trial_log(&path)?;
        let key = (stored.architecture, stored.filter);
        let gi = match groups.iter().position(|(k, _, _)| *k == key) {
            Some(i) => i,
            None => {
                groups.push((key, Vec::new(), 0));
                groups.len() - 1
            }
        };
        if stored.diverged {
            groups[gi].2 += 1;
            continue;
        }
        let curve = segment_mse(&stored.log)?;
        let (arch, filter, trial) = (stored.architecture, stored.filter, stored.trial);
        io::write_curve(&io::curve_path(&dir, arch, filter, trial), arch, filter, trial, &curve)?;
        if let Some(last) = curve.last() {
            groups[gi].1.push(last.mse);
        }
        rows.extend(curve.iter().map(|p| CurveRow {
            architecture: arch,
            filter,
            trial,
            segment: p.segment,
            mse: p.mse,
        }));
    }
    io::write_mean_curves(&dir.join("mean_curve.csv"), &io::mean_curves(&rows))?;
    let summary: Vec<SweepRow> = groups
        .into_iter()
        .map(|((architecture, filter), finals, n_diverged)| {
            let s = MeanSe::of(&finals);
            SweepRow {
                architecture,
                filter,
                param: "none".into(),
                value: f64::NAN,
                mean_final_error: s.mean,
                se_final_error: s.se,
                n_trials: s.n + n_diverged,
                n_diverged,
                mean_steps_per_sec: f64::NAN,
                mean_gvf_updates_per_sec: f64::NAN,
            }
        })
        .collect();
    io::write_summary(&dir.join("summary.csv"), &summary)?;
    print_rows(&summary);
    println!("output in {}", dir.display());
    Ok(())
}

fn pendulum(a: PendulumArgs) -> Result<()> {
    let policy = match a.policy.as_str() {
        "symmetric" => TorquePolicy::Symmetric,
        "skewed" => TorquePolicy::Skewed,
        other => return Err(Error::invalid(format!("unknown policy {other:?}"))),
    };
    let env = PendulumConfig {
        policy,
        ..PendulumConfig::default()
    };
    let dir = a.common.out.clone().unwrap_or_else(io::default_output_dir);
    io::ensure_dir(&dir)?;
    let base = a.common.seed.unwrap_or(0);
    for trial in 0..a.common.trials.unwrap_or(1) {
        let demo = pendulum_demo(
            env.clone(),
            PendulumDemoConfig {
                steps: a.steps,
                step_size: a.alpha,
                trace_decay: a.lambda,
                discount: a.gamma,
                top: a.top,
                seed: crate::rng::trial_seed(base, trial),
            },
        )?;
        let path = dir.join(format!("pendulum_{}_trial{trial:03}.csv", a.policy));
        let mut w = csv::Writer::from_path(&path)?;
        for (i, row) in demo.abs_weights.iter().enumerate() {
            for (j, &abs_weight) in row.iter().enumerate() {
                w.serialize(SnapshotRow {
                    cumulant_index: i,
                    sensor_index: j,
                    abs_weight,
                    step: a.steps,
                })?;
            }
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        println!(
            "trial {trial}: self-predictive fraction {:.3} ({})",
            demo.self_predictive,
            path.display()
        );
        for (i, top) in demo.top.iter().enumerate() {
            println!("  cumulant {i:>2}: top {top:?}");
        }
    }
    Ok(())
}

fn throughput(a: ThroughputArgs) -> Result<()> {
    let mut cfg = build_config(&a.overrides, &a.common)?;
    cfg.agent.architecture = a.overrides.arch.unwrap_or(Architecture::Adaptive);
    cfg.validate()?;
    let dir = output_dir(&cfg)?;
    let mut results: Vec<Throughput> = Vec::new();
    for &m in &a.ms {
        let t = measure_throughput(&cfg, m, a.timed_steps)?;
        println!(
            "m {:>6}: {:>10.0} steps/s {:>14.0} gvf updates/s",
            t.m, t.steps_per_sec, t.gvf_updates_per_sec
        );
        results.push(t);
    }
    if let [near, mid, .., far] = results.as_slice() {
        println!(
            "time per step at m={} vs linear extrapolation from m={},{}: {:.2}x",
            far.m,
            near.m,
            mid.m,
            scaling_ratio(near, mid, far)
        );
    }
    let path = dir.join("throughput.csv");
    let mut w = csv::Writer::from_path(&path)?;
    for t in &results {
        w.serialize(t)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(())
}
