//! Sparse nonlinear features: neighborhoods, the shared filter bank and the
//! concatenated feature vector.
//!
//! A neighborhood is stored as its ordered index list. Selecting through it is
//! a gather, `selected[j] = o[indices[j]]`, which is exactly the product of
//! the corresponding 0/1 selection matrix with the observation.

use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::Point;
use crate::error::{Error, Result};

/// Below this many multiply-adds per feature computation the serial path is used.
const PAR_FEATURE_WORK: usize = 1 << 18;

/// An ordered selection of distinct observation indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Neighborhood(Vec<usize>);

impl Neighborhood {
    /// Checks that indices are distinct and below `d`.
    pub fn new(indices: Vec<usize>, d: usize) -> Result<Self> {
        let mut seen = vec![false; d];
        for &i in &indices {
            if i >= d {
                return Err(Error::invalid(format!("index {i} out of range for d={d}")));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::invalid(format!("duplicate index {i} in neighborhood")));
            }
        }
        Ok(Neighborhood(indices))
    }

    pub(crate) fn from_unchecked(indices: Vec<usize>) -> Self {
        Neighborhood(indices)
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn gather_into(&self, o: &[f64], out: &mut [f64]) {
        for (dst, &i) in out.iter_mut().zip(&self.0) {
            *dst = o[i];
        }
    }

    pub fn gather(&self, o: &[f64]) -> Vec<f64> {
        self.0.iter().map(|&i| o[i]).collect()
    }

    /// Relabels indices through `map` (new index of old index `i` is `map[i]`).
    pub fn mapped(&self, map: &[usize]) -> Neighborhood {
        Neighborhood(self.0.iter().map(|&i| map[i]).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterKind {
    Majority,
    Ltu,
    Relu,
}

impl FilterKind {
    pub fn name(self) -> &'static str {
        match self {
            FilterKind::Majority => "majority",
            FilterKind::Ltu => "ltu",
            FilterKind::Relu => "relu",
        }
    }
}

impl std::fmt::Display for FilterKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for FilterKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "majority" => Ok(FilterKind::Majority),
            "ltu" => Ok(FilterKind::Ltu),
            "relu" => Ok(FilterKind::Relu),
            other => Err(Error::invalid(format!("unknown filter kind {other:?}"))),
        }
    }
}

/// Threshold shared by the LTU and ReLU filters.
pub const RANDOM_FILTER_THRESHOLD: f64 = 4.0;

/// The projection `A` (row-major `n x k`) and nonlinearity shared by all
/// neighborhoods of a trial.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    kind: FilterKind,
    outputs: usize,
    inputs: usize,
    projection: Vec<f64>,
    threshold: f64,
}

impl FilterBank {
    /// Majority is a single all-ones filter firing above `2k/3` and ignores
    /// `n`. LTU and ReLU draw `A` from a standard normal and use threshold 4.
    pub fn new<R: Rng + ?Sized>(kind: FilterKind, n: usize, k: usize, rng: &mut R) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("filter bank needs k >= 1"));
        }
        match kind {
            FilterKind::Majority => Ok(FilterBank {
                kind,
                outputs: 1,
                inputs: k,
                projection: vec![1.0; k],
                threshold: 2.0 * k as f64 / 3.0,
            }),
            FilterKind::Ltu | FilterKind::Relu => {
                if n == 0 {
                    return Err(Error::invalid("filter bank needs n >= 1"));
                }
                let projection = (0..n * k).map(|_| rng.sample(StandardNormal)).collect();
                Ok(FilterBank {
                    kind,
                    outputs: n,
                    inputs: k,
                    projection,
                    threshold: RANDOM_FILTER_THRESHOLD,
                })
            }
        }
    }

    /// A bank with an explicit projection, for tests and analysis.
    pub fn with_projection(
        kind: FilterKind,
        projection: Vec<f64>,
        n: usize,
        k: usize,
        threshold: f64,
    ) -> Result<Self> {
        if n == 0 || k == 0 || projection.len() != n * k {
            return Err(Error::invalid(format!(
                "projection of length {} does not match {n}x{k}",
                projection.len()
            )));
        }
        Ok(FilterBank {
            kind,
            outputs: n,
            inputs: k,
            projection,
            threshold,
        })
    }

    pub fn kind(&self) -> FilterKind {
        self.kind
    }

    /// Number of features each neighborhood contributes.
    pub fn outputs(&self) -> usize {
        self.outputs
    }

    /// Neighborhood size the bank expects.
    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn projection(&self) -> &[f64] {
        &self.projection
    }

    #[inline]
    pub fn activate(&self, z: f64) -> f64 {
        match self.kind {
            FilterKind::Majority | FilterKind::Ltu => {
                if z > self.threshold {
                    1.0
                } else {
                    0.0
                }
            }
            FilterKind::Relu => (z - self.threshold).max(0.0),
        }
    }

    /// `f(A * selected)` written into `out`.
    pub fn apply_into(&self, selected: &[f64], out: &mut [f64]) -> Result<()> {
        if selected.len() != self.inputs {
            return Err(Error::invalid(format!(
                "selected length {} != k={}",
                selected.len(),
                self.inputs
            )));
        }
        if out.len() != self.outputs {
            return Err(Error::invalid(format!(
                "output length {} != n={}",
                out.len(),
                self.outputs
            )));
        }
        self.apply_unchecked(selected, out);
        Ok(())
    }

    pub fn apply(&self, selected: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.outputs];
        self.apply_into(selected, &mut out)?;
        Ok(out)
    }

    #[inline]
    fn apply_unchecked(&self, selected: &[f64], out: &mut [f64]) {
        for (row, y) in self.projection.chunks_exact(self.inputs).zip(out.iter_mut()) {
            let mut z = 0.0;
            for (a, s) in row.iter().zip(selected) {
                z += a * s;
            }
            *y = self.activate(z);
        }
    }

    /// Features for one neighborhood of `o`, gathering on the fly.
    #[inline]
    fn apply_neighborhood(&self, o: &[f64], nb: &Neighborhood, out: &mut [f64]) {
        for (row, y) in self.projection.chunks_exact(self.inputs).zip(out.iter_mut()) {
            let mut z = 0.0;
            for (a, &i) in row.iter().zip(nb.indices()) {
                z += a * o[i];
            }
            *y = self.activate(z);
        }
    }
}

/// `m` neighborhoods of `k` indices drawn uniformly without replacement from
/// `0..d`, independently per neighborhood.
pub fn make_random_neighborhoods<R: Rng + ?Sized>(
    d: usize,
    m: usize,
    k: usize,
    rng: &mut R,
) -> Result<Vec<Neighborhood>> {
    if k > d {
        return Err(Error::invalid(format!("k={k} exceeds d={d}")));
    }
    Ok((0..m)
        .map(|_| Neighborhood(index::sample(rng, d, k).into_vec()))
        .collect())
}

/// For each anchor, its `k` nearest observation slots by Euclidean distance,
/// nearest first. The anchor itself comes first at distance zero; equal
/// distances go to the lower slot index.
///
/// `positions` is indexed by observation slot.
pub fn make_distance_neighborhoods(
    positions: &[Point],
    anchors: &[usize],
    k: usize,
) -> Result<Vec<Neighborhood>> {
    let d = positions.len();
    if k > d {
        return Err(Error::invalid(format!("k={k} exceeds d={d}")));
    }
    let mut order: Vec<(f64, usize)> = Vec::with_capacity(d);
    anchors
        .iter()
        .map(|&rho| {
            if rho >= d {
                return Err(Error::invalid(format!("anchor {rho} out of range for d={d}")));
            }
            let p = positions[rho];
            order.clear();
            order.extend(positions.iter().enumerate().map(|(j, q)| {
                let dist = if j == rho {
                    0.0
                } else {
                    ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt()
                };
                (dist, j)
            }));
            let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            if k > 0 && k < d {
                order.select_nth_unstable_by(k - 1, cmp);
            }
            order.truncate(k);
            order.sort_unstable_by(cmp);
            Ok(Neighborhood(order.iter().map(|&(_, j)| j).collect()))
        })
        .collect()
}

/// Length of the concatenated feature vector.
pub fn feature_len(d: usize, m: usize, bank: &FilterBank) -> usize {
    d + m * bank.outputs()
}

/// `concatenate(o, f(A M^1 o), ..., f(A M^m o))` written into `out`.
pub fn compute_features_into(
    o: &[f64],
    neighborhoods: &[Neighborhood],
    bank: &FilterBank,
    out: &mut [f64],
) -> Result<()> {
    let d = o.len();
    let n = bank.outputs();
    if out.len() != feature_len(d, neighborhoods.len(), bank) {
        return Err(Error::invalid(format!(
            "feature buffer length {} != {}",
            out.len(),
            feature_len(d, neighborhoods.len(), bank)
        )));
    }
    for nb in neighborhoods {
        if nb.len() != bank.inputs() {
            return Err(Error::invalid(format!(
                "neighborhood size {} != filter inputs {}",
                nb.len(),
                bank.inputs()
            )));
        }
        if let Some(&bad) = nb.indices().iter().find(|&&i| i >= d) {
            return Err(Error::invalid(format!("index {bad} out of range for d={d}")));
        }
    }
    let (raw, blocks) = out.split_at_mut(d);
    raw.copy_from_slice(o);
    if neighborhoods.is_empty() {
        return Ok(());
    }
    let work = neighborhoods.len() * n * bank.inputs();
    if work >= PAR_FEATURE_WORK && rayon::current_num_threads() > 1 {
        blocks
            .par_chunks_mut(n)
            .zip(neighborhoods.par_iter())
            .for_each(|(y, nb)| bank.apply_neighborhood(o, nb, y));
    } else {
        for (y, nb) in blocks.chunks_exact_mut(n).zip(neighborhoods) {
            bank.apply_neighborhood(o, nb, y);
        }
    }
    Ok(())
}

pub fn compute_features(
    o: &[f64],
    neighborhoods: &[Neighborhood],
    bank: &FilterBank,
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; feature_len(o.len(), neighborhoods.len(), bank)];
    compute_features_into(o, neighborhoods, bank, &mut out)?;
    Ok(out)
}
