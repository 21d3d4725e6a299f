//! On-disk formats.
//!
//! - `curve_<arch>_<filter>_trial<NNN>.csv`: `architecture,filter,trial,segment,mse`
//! - `log_<arch>_<filter>_trial<NNN>.bin`: binary trial log (see [`write_trial_log`])
//! - `summary.csv`: one [`SweepRow`](super::SweepRow) per configuration
//! - `snapshots_<arch>_<filter>_trial<NNN>.csv`: `cumulant_index,sensor_index,abs_weight,step`
//! - `sensors_trial<NNN>.csv`: `sensor_index,x,y` in observation order
//! - `manifest.toml`: schema version and the resolved configuration

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{Architecture, ExperimentConfig};
use super::runner::TrialResult;
use super::sweep::SweepRow;
use crate::env::Point;
use crate::error::{Error, Result};
use crate::features::FilterKind;
use crate::metrics::{MeanSe, SegmentError, TrialLog};

pub const SCHEMA_VERSION: u32 = 1;
const LOG_MAGIC: &[u8; 8] = b"PANLOG01";

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "PAN_OUT_DIR";

/// A row of a per-trial learning-curve file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub architecture: Architecture,
    pub filter: FilterKind,
    pub trial: u64,
    pub segment: usize,
    pub mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotRow {
    pub cumulant_index: usize,
    pub sensor_index: usize,
    pub abs_weight: f64,
    pub step: u64,
}

/// Mean and standard error across trials of one segment of one
/// configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanCurveRow {
    pub architecture: Architecture,
    pub filter: FilterKind,
    pub segment: usize,
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

/// Averages curve rows per (architecture, filter, segment), in first-seen
/// configuration order and ascending segment order.
pub fn mean_curves(rows: &[CurveRow]) -> Vec<MeanCurveRow> {
    let mut groups: Vec<((Architecture, FilterKind), BTreeMap<usize, Vec<f64>>)> = Vec::new();
    for r in rows {
        let key = (r.architecture, r.filter);
        let idx = match groups.iter().position(|(k, _)| *k == key) {
            Some(i) => i,
            None => {
                groups.push((key, BTreeMap::new()));
                groups.len() - 1
            }
        };
        groups[idx].1.entry(r.segment).or_default().push(r.mse);
    }
    let mut out = Vec::new();
    for ((architecture, filter), segments) in groups {
        for (segment, values) in segments {
            let s = MeanSe::of(&values);
            out.push(MeanCurveRow {
                architecture,
                filter,
                segment,
                mean: s.mean,
                se: s.se,
                n: s.n,
            });
        }
    }
    out
}

pub fn curve_rows(result: &TrialResult) -> Vec<CurveRow> {
    result
        .curve
        .iter()
        .map(|p| CurveRow {
            architecture: result.architecture,
            filter: result.filter,
            trial: result.trial_index,
            segment: p.segment,
            mse: p.mse,
        })
        .collect()
}

/// A trial log with its identifying header.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredLog {
    pub architecture: Architecture,
    pub filter: FilterKind,
    pub trial: u64,
    pub seed: u64,
    /// The log stops at the step where the trial diverged.
    pub diverged: bool,
    pub log: TrialLog,
}

fn stem(arch: Architecture, filter: FilterKind, trial: u64) -> String {
    format!("{arch}_{filter}_trial{trial:03}")
}

pub fn curve_path(dir: &Path, arch: Architecture, filter: FilterKind, trial: u64) -> PathBuf {
    dir.join(format!("curve_{}.csv", stem(arch, filter, trial)))
}

pub fn log_path(dir: &Path, arch: Architecture, filter: FilterKind, trial: u64) -> PathBuf {
    dir.join(format!("log_{}.bin", stem(arch, filter, trial)))
}

pub fn default_output_dir() -> PathBuf {
    std::env::var_os(OUTPUT_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("pan-out"))
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv_writer(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(BufReader::new(file));
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

pub fn write_curve(
    path: &Path,
    arch: Architecture,
    filter: FilterKind,
    trial: u64,
    curve: &[SegmentError],
) -> Result<()> {
    write_rows(
        path,
        curve.iter().map(|p| CurveRow {
            architecture: arch,
            filter,
            trial,
            segment: p.segment,
            mse: p.mse,
        }),
    )
}

pub fn write_summary(path: &Path, rows: &[SweepRow]) -> Result<()> {
    write_rows(path, rows)
}

pub fn write_mean_curves(path: &Path, rows: &[MeanCurveRow]) -> Result<()> {
    write_rows(path, rows)
}

pub fn write_snapshots(path: &Path, result: &TrialResult) -> Result<()> {
    let mut w = csv_writer(path)?;
    for snap in &result.snapshots {
        for (i, weights) in snap.abs_weights.iter().enumerate() {
            for (j, &abs_weight) in weights.iter().enumerate() {
                w.serialize(SnapshotRow {
                    cumulant_index: result.cumulants[i],
                    sensor_index: j,
                    abs_weight,
                    step: snap.step,
                })?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_positions(path: &Path, positions: &[Point]) -> Result<()> {
    #[derive(Serialize)]
    struct Row {
        sensor_index: usize,
        x: f64,
        y: f64,
    }
    write_rows(
        path,
        positions.iter().enumerate().map(|(i, p)| Row {
            sensor_index: i,
            x: p[0],
            y: p[1],
        }),
    )
}

#[derive(Serialize)]
struct Manifest<'a> {
    schema_version: u32,
    config: &'a ExperimentConfig,
}

pub fn write_manifest(dir: &Path, config: &ExperimentConfig) -> Result<()> {
    let path = dir.join("manifest.toml");
    let text = toml::to_string_pretty(&Manifest {
        schema_version: SCHEMA_VERSION,
        config,
    })
    .map_err(|e| Error::Config(e.to_string()))?;
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

fn arch_code(a: Architecture) -> u8 {
    match a {
        Architecture::Linear => 0,
        Architecture::Random => 1,
        Architecture::Adaptive => 2,
        Architecture::Distance => 3,
    }
}

fn filter_code(f: FilterKind) -> u8 {
    match f {
        FilterKind::Majority => 0,
        FilterKind::Ltu => 1,
        FilterKind::Relu => 2,
    }
}

/// Binary trial log: magic `PANLOG01`; `u32` schema version; `u8`
/// architecture code, filter code and diverged flag; `u64` trial, seed; `f64` discount; `u64`
/// segment length and step count `T`; then `T` predictions and `T` rewards
/// as `f64`. Little-endian throughout.
pub fn write_trial_log(path: &Path, stored: &StoredLog) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let log = &stored.log;
    let mut put = |b: &[u8]| w.write_all(b);
    let io = |e| Error::io(path, e);
    put(LOG_MAGIC).map_err(io)?;
    put(&SCHEMA_VERSION.to_le_bytes()).map_err(io)?;
    put(&[
        arch_code(stored.architecture),
        filter_code(stored.filter),
        stored.diverged as u8,
    ]).map_err(io)?;
    put(&stored.trial.to_le_bytes()).map_err(io)?;
    put(&stored.seed.to_le_bytes()).map_err(io)?;
    put(&log.discount.to_le_bytes()).map_err(io)?;
    put(&(log.segment_length as u64).to_le_bytes()).map_err(io)?;
    put(&(log.predictions.len() as u64).to_le_bytes()).map_err(io)?;
    for v in log.predictions.iter().chain(&log.rewards) {
        put(&v.to_le_bytes()).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_trial_log(path: &Path) -> Result<StoredLog> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let io = |e| Error::io(path, e);
    let bad = |reason: &str| Error::Format {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(io)?;
    if &magic != LOG_MAGIC {
        return Err(bad("not a trial log"));
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4).map_err(io)?;
    if u32::from_le_bytes(b4) != SCHEMA_VERSION {
        return Err(bad("unsupported log version"));
    }
    let mut codes = [0u8; 3];
    r.read_exact(&mut codes).map_err(io)?;
    let architecture = match codes[0] {
        0 => Architecture::Linear,
        1 => Architecture::Random,
        2 => Architecture::Adaptive,
        3 => Architecture::Distance,
        _ => return Err(bad("unknown architecture code")),
    };
    let filter = match codes[1] {
        0 => FilterKind::Majority,
        1 => FilterKind::Ltu,
        2 => FilterKind::Relu,
        _ => return Err(bad("unknown filter code")),
    };
    let diverged = match codes[2] {
        0 => false,
        1 => true,
        _ => return Err(bad("bad diverged flag")),
    };
    let mut b8 = [0u8; 8];
    let mut next = |r: &mut BufReader<File>| -> Result<[u8; 8]> {
        r.read_exact(&mut b8).map_err(io)?;
        Ok(b8)
    };
    let trial = u64::from_le_bytes(next(&mut r)?);
    let seed = u64::from_le_bytes(next(&mut r)?);
    let discount = f64::from_le_bytes(next(&mut r)?);
    let segment_length = u64::from_le_bytes(next(&mut r)?) as usize;
    let len = u64::from_le_bytes(next(&mut r)?);
    let len = usize::try_from(len)
        .ok()
        .filter(|&n| n <= 1 << 34)
        .ok_or_else(|| bad("implausible length"))?;
    let mut read_vec = |r: &mut BufReader<File>| -> Result<Vec<f64>> {
        (0..len).map(|_| next(r).map(f64::from_le_bytes)).collect()
    };
    let predictions = read_vec(&mut r)?;
    let rewards = read_vec(&mut r)?;
    Ok(StoredLog {
        architecture,
        filter,
        trial,
        seed,
        diverged,
        log: TrialLog {
            predictions,
            rewards,
            discount,
            segment_length,
        },
    })
}

/// Writes the per-trial artifacts of `result` into `dir`.
pub fn write_trial(dir: &Path, result: &TrialResult, write_log: bool) -> Result<()> {
    let (a, f, t) = (result.architecture, result.filter, result.trial_index);
    write_curve(&curve_path(dir, a, f, t), a, f, t, &result.curve)?;
    if write_log {
        write_trial_log(
            &log_path(dir, a, f, t),
            &StoredLog {
                architecture: a,
                filter: f,
                trial: t,
                seed: result.seed,
                diverged: result.diverged,
                log: result.log.clone(),
            },
        )?;
    }
    if !result.snapshots.is_empty() {
        write_snapshots(
            &dir.join(format!("snapshots_{}.csv", stem(a, f, t))),
            result,
        )?;
        write_positions(&dir.join(format!("sensors_trial{t:03}.csv")), &result.observation_positions)?;
    }
    Ok(())
}

/// Every `log_*.bin` file in `dir`, sorted by name.
pub fn find_logs(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if name.starts_with("log_") && name.ends_with(".bin") {
            paths.push(path);
        }
    }
    paths.sort();
    Ok(paths)
}
