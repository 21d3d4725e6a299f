//! Versioned little-endian binary checkpoint of an agent (and optionally the
//! Frog's Eye process driving it), for long stability runs.
//!
//! Layout: magic `PANCKPT1`, `u32` version, then the fields written by
//! [`save_checkpoint`] in order. Vectors are a `u64` length followed by
//! their elements.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::agent::{Agent, AgentParams, NeighborhoodSource};
use super::gvf::{GvfBank, GvfParams};
use crate::env::FrogsEyeSnapshot;
use crate::error::{Error, Result};
use crate::features::{FilterBank, FilterKind, Neighborhood};
use crate::rng::RngState;

const MAGIC: &[u8; 8] = b"PANCKPT1";
const VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub agent: Agent,
    /// Trial seed and process state, when the environment was saved too.
    pub env: Option<(u64, FrogsEyeSnapshot)>,
}

struct Writer<W: Write>(W);

impl<W: Write> Writer<W> {
    fn bytes(&mut self, b: &[u8]) -> std::io::Result<()> {
        self.0.write_all(b)
    }
    fn u8(&mut self, v: u8) -> std::io::Result<()> {
        self.bytes(&[v])
    }
    fn u64(&mut self, v: u64) -> std::io::Result<()> {
        self.bytes(&v.to_le_bytes())
    }
    fn f64(&mut self, v: f64) -> std::io::Result<()> {
        self.bytes(&v.to_le_bytes())
    }
    fn f64s(&mut self, v: &[f64]) -> std::io::Result<()> {
        self.u64(v.len() as u64)?;
        v.iter().try_for_each(|&x| self.f64(x))
    }
    fn usizes(&mut self, v: &[usize]) -> std::io::Result<()> {
        self.u64(v.len() as u64)?;
        v.iter().try_for_each(|&x| self.u64(x as u64))
    }
    fn rng(&mut self, s: &RngState) -> std::io::Result<()> {
        self.bytes(&s.seed)?;
        self.u64(s.stream)?;
        self.bytes(&s.word_pos.to_le_bytes())
    }
}

struct Reader<R: Read>(R);

impl<R: Read> Reader<R> {
    fn array<const N: usize>(&mut self) -> std::io::Result<[u8; N]> {
        let mut b = [0u8; N];
        self.0.read_exact(&mut b)?;
        Ok(b)
    }
    fn u8(&mut self) -> std::io::Result<u8> {
        Ok(self.array::<1>()?[0])
    }
    fn u64(&mut self) -> std::io::Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }
    fn f64(&mut self) -> std::io::Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }
    fn len(&mut self) -> std::io::Result<usize> {
        let n = self.u64()?;
        usize::try_from(n)
            .ok()
            .filter(|&n| n <= 1 << 40)
            .ok_or_else(|| std::io::Error::new(std::io::ErrorKind::InvalidData, "length overflow"))
    }
    fn f64s(&mut self) -> std::io::Result<Vec<f64>> {
        let n = self.len()?;
        (0..n).map(|_| self.f64()).collect()
    }
    fn usizes(&mut self) -> std::io::Result<Vec<usize>> {
        let n = self.len()?;
        (0..n).map(|_| self.u64().map(|v| v as usize)).collect()
    }
    fn rng(&mut self) -> std::io::Result<RngState> {
        Ok(RngState {
            seed: self.array()?,
            stream: self.u64()?,
            word_pos: u128::from_le_bytes(self.array()?),
        })
    }
}

fn kind_code(kind: FilterKind) -> u8 {
    match kind {
        FilterKind::Majority => 0,
        FilterKind::Ltu => 1,
        FilterKind::Relu => 2,
    }
}

pub fn save_checkpoint(
    path: &Path,
    agent: &Agent,
    env: Option<(u64, &FrogsEyeSnapshot)>,
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_checkpoint(&mut Writer(BufWriter::new(file)), agent, env)
        .map_err(|e| Error::io(path, e))
}

fn write_checkpoint<W: Write>(
    w: &mut Writer<W>,
    agent: &Agent,
    env: Option<(u64, &FrogsEyeSnapshot)>,
) -> std::io::Result<()> {
    w.bytes(MAGIC)?;
    w.bytes(&VERSION.to_le_bytes())?;
    w.u64(agent.time())?;

    let main = agent.main();
    w.f64(main.step_size())?;
    w.f64(main.trace_decay())?;
    w.f64(main.discount())?;

    let filter = agent.filter();
    w.u8(kind_code(filter.kind()))?;
    w.u64(filter.outputs() as u64)?;
    w.u64(filter.inputs() as u64)?;
    w.f64(filter.threshold())?;
    w.f64s(filter.projection())?;

    w.f64s(agent.observation())?;
    w.f64s(main.weights())?;
    w.f64s(main.trace())?;

    match agent.source() {
        NeighborhoodSource::Adaptive(bank) => {
            w.u8(1)?;
            let p = bank.params();
            w.f64(p.step_size)?;
            w.u64(p.k as u64)?;
            w.u64(p.refresh_period)?;
            w.usizes(bank.cumulants())?;
            w.f64s(bank.raw_weights())?;
            w.f64s(bank.trace())?;
        }
        NeighborhoodSource::Fixed(_) => w.u8(0)?,
    }
    let nbs = agent.neighborhoods();
    w.u64(nbs.len() as u64)?;
    for nb in nbs {
        w.usizes(nb.indices())?;
    }

    match env {
        Some((seed, snap)) => {
            w.u8(1)?;
            w.u64(seed)?;
            w.f64(snap.insect[0])?;
            w.f64(snap.insect[1])?;
            w.rng(&snap.insect_rng)?;
            w.rng(&snap.noise_rng)?;
        }
        None => w.u8(0)?,
    }
    w.0.flush()
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = Reader(BufReader::new(file));
    let malformed = |reason: String| Error::Format {
        path: path.to_path_buf(),
        reason,
    };
    let magic: [u8; 8] = r.array().map_err(|e| Error::io(path, e))?;
    if &magic != MAGIC {
        return Err(malformed("not a checkpoint file".into()));
    }
    let version = u32::from_le_bytes(r.array().map_err(|e| Error::io(path, e))?);
    if version != VERSION {
        return Err(malformed(format!("unsupported checkpoint version {version}")));
    }
    read_body(&mut r)
        .map_err(|e| Error::io(path, e))?
        .map_err(|e| malformed(e.to_string()))
}

fn read_body<R: Read>(r: &mut Reader<R>) -> std::io::Result<Result<Checkpoint>> {
    let t = r.u64()?;
    let params = AgentParams {
        step_size: r.f64()?,
        trace_decay: r.f64()?,
        discount: r.f64()?,
    };
    let kind = match r.u8()? {
        0 => FilterKind::Majority,
        1 => FilterKind::Ltu,
        2 => FilterKind::Relu,
        other => return Ok(Err(Error::invalid(format!("unknown filter code {other}")))),
    };
    let n = r.u64()? as usize;
    let k = r.u64()? as usize;
    let threshold = r.f64()?;
    let projection = r.f64s()?;
    let obs = r.f64s()?;
    let main_w = r.f64s()?;
    let main_z = r.f64s()?;

    let bank_parts = if r.u8()? == 1 {
        let step_size = r.f64()?;
        let bank_k = r.u64()? as usize;
        let refresh_period = r.u64()?;
        let cumulants = r.usizes()?;
        let weights = r.f64s()?;
        let trace = r.f64s()?;
        Some((step_size, bank_k, refresh_period, cumulants, weights, trace))
    } else {
        None
    };
    let count = r.len()?;
    let mut raw_nbs = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        raw_nbs.push(r.usizes()?);
    }
    let env = if r.u8()? == 1 {
        let seed = r.u64()?;
        let insect = [r.f64()?, r.f64()?];
        let insect_rng = r.rng()?;
        let noise_rng = r.rng()?;
        Some((
            seed,
            FrogsEyeSnapshot {
                insect,
                insect_rng,
                noise_rng,
            },
        ))
    } else {
        None
    };

    let build = || -> Result<Checkpoint> {
        let d = obs.len();
        let filter = FilterBank::with_projection(kind, projection, n, k, threshold)?;
        let nbs = raw_nbs
            .into_iter()
            .map(|idx| Neighborhood::new(idx, d))
            .collect::<Result<Vec<_>>>()?;
        let (source, bank_state) = match bank_parts {
            Some((step_size, bank_k, refresh_period, cumulants, weights, trace)) => {
                let bank = GvfBank::new(
                    d,
                    cumulants,
                    GvfParams {
                        step_size,
                        trace_decay: params.trace_decay,
                        discount: params.discount,
                        k: bank_k,
                        refresh_period,
                    },
                )?;
                (
                    NeighborhoodSource::Adaptive(bank),
                    Some((weights, trace, nbs)),
                )
            }
            None => (NeighborhoodSource::Fixed(nbs), None),
        };
        let mut agent = Agent::new(params, source, filter, obs.clone())?;
        agent.restore(t, obs, main_w, main_z, bank_state)?;
        Ok(Checkpoint { agent, env })
    };
    Ok(build())
}
