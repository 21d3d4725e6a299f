//! A bank of general value functions, one per cumulant observation component,
//! each predicting its cumulant's discounted future sum linearly from the raw
//! observation. The top-k weights of each GVF define a neighborhood.

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;

use super::td::check_params;
use super::topk::top_k_by_magnitude;
use crate::error::{Error, Result};
use crate::features::Neighborhood;

/// Below this many weights the bank updates serially.
const PAR_BANK_WORK: usize = 1 << 20;
/// GVFs per parallel task.
const PAR_CHUNK: usize = 256;

/// Hyperparameters of the auxiliary predictions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GvfParams {
    pub step_size: f64,
    pub trace_decay: f64,
    pub discount: f64,
    /// Neighborhood size.
    pub k: usize,
    /// Steps between neighborhood refreshes.
    pub refresh_period: u64,
}

/// `m` distinct cumulant indices drawn uniformly without replacement from `0..d`.
pub fn sample_cumulants<R: Rng + ?Sized>(d: usize, m: usize, rng: &mut R) -> Result<Vec<usize>> {
    if m > d {
        return Err(Error::invalid(format!("m={m} cumulants exceed d={d}")));
    }
    Ok(index::sample(rng, d, m).into_vec())
}

/// All GVFs read the same observation and share `lambda` and `gamma`, so their
/// eligibility traces are identical and one trace vector serves the whole
/// bank. Weights are stored sensor-major (`weights[j * m + i]` is the weight
/// of GVF `i` on component `j`) so that summing active components is a run of
/// contiguous vector adds.
#[derive(Debug, Clone)]
pub struct GvfBank {
    d: usize,
    params: GvfParams,
    cumulants: Vec<usize>,
    weights: Vec<f64>,
    trace: Vec<f64>,
    neighborhoods: Vec<Neighborhood>,
    active_t: Vec<(usize, f64)>,
    active_next: Vec<(usize, f64)>,
    v_t: Vec<f64>,
    v_next: Vec<f64>,
    steps: Vec<f64>,
}

impl GvfBank {
    pub fn new(d: usize, cumulants: Vec<usize>, params: GvfParams) -> Result<Self> {
        check_params(params.step_size, params.trace_decay, params.discount)?;
        if params.k > d {
            return Err(Error::invalid(format!("k={} exceeds d={d}", params.k)));
        }
        if params.refresh_period == 0 {
            return Err(Error::invalid("refresh period must be at least one step"));
        }
        // Validates range and distinctness.
        Neighborhood::new(cumulants.clone(), d)?;
        let m = cumulants.len();
        let mut bank = GvfBank {
            d,
            params,
            cumulants,
            weights: vec![0.0; d * m],
            trace: vec![0.0; d],
            neighborhoods: Vec::new(),
            active_t: Vec::with_capacity(d),
            active_next: Vec::with_capacity(d),
            v_t: vec![0.0; m],
            v_next: vec![0.0; m],
            steps: vec![0.0; m],
        };
        bank.refresh_neighborhoods();
        Ok(bank)
    }

    pub fn num_inputs(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.cumulants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cumulants.is_empty()
    }

    pub fn params(&self) -> &GvfParams {
        &self.params
    }

    pub fn cumulants(&self) -> &[usize] {
        &self.cumulants
    }

    pub fn neighborhoods(&self) -> &[Neighborhood] {
        &self.neighborhoods
    }

    /// Overrides the current neighborhoods until the next refresh.
    pub fn set_neighborhoods(&mut self, neighborhoods: Vec<Neighborhood>) -> Result<()> {
        if neighborhoods.len() != self.len() {
            return Err(Error::invalid("one neighborhood per GVF required"));
        }
        for nb in &neighborhoods {
            if nb.len() != self.params.k || nb.indices().iter().any(|&j| j >= self.d) {
                return Err(Error::invalid("neighborhood does not fit the bank"));
            }
        }
        self.neighborhoods = neighborhoods;
        Ok(())
    }

    /// The shared eligibility trace.
    pub fn trace(&self) -> &[f64] {
        &self.trace
    }

    /// Raw sensor-major weight storage.
    pub fn raw_weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weight vector of GVF `i`.
    pub fn weights_of(&self, i: usize) -> Vec<f64> {
        let m = self.len();
        (0..self.d).map(|j| self.weights[j * m + i]).collect()
    }

    pub(crate) fn restore(&mut self, weights: Vec<f64>, trace: Vec<f64>) -> Result<()> {
        if weights.len() != self.weights.len() || trace.len() != self.d {
            return Err(Error::invalid("restored bank state has the wrong shape"));
        }
        self.weights = weights;
        self.trace = trace;
        Ok(())
    }

    /// Current prediction of GVF `i` for observation `o`.
    pub fn predict(&self, i: usize, o: &[f64]) -> f64 {
        let m = self.len();
        let mut acc = 0.0;
        for (j, &x) in o.iter().enumerate() {
            if x != 0.0 {
                acc += self.weights[j * m + i] * x;
            }
        }
        acc
    }

    /// One TD(λ) step for every GVF on the transition `o_t -> o_next`, with
    /// cumulant `o_next[c(i)]`.
    pub fn update(&mut self, o_t: &[f64], o_next: &[f64]) -> Result<()> {
        let d = self.d;
        let m = self.len();
        if o_t.len() != d || o_next.len() != d {
            return Err(Error::invalid(format!(
                "observation lengths {} and {} do not match d={d}",
                o_t.len(),
                o_next.len()
            )));
        }
        if m == 0 {
            return Ok(());
        }
        collect_active(o_t, &mut self.active_t);
        collect_active(o_next, &mut self.active_next);

        let parallel = d * m >= PAR_BANK_WORK && rayon::current_num_threads() > 1;
        let weights = &self.weights;
        if parallel {
            self.v_t
                .par_chunks_mut(PAR_CHUNK)
                .zip(self.v_next.par_chunks_mut(PAR_CHUNK))
                .enumerate()
                .for_each(|(c, (vt, vn))| {
                    let lo = c * PAR_CHUNK;
                    accumulate(weights, m, lo, &self.active_t, vt);
                    accumulate(weights, m, lo, &self.active_next, vn);
                });
        } else {
            accumulate(weights, m, 0, &self.active_t, &mut self.v_t);
            accumulate(weights, m, 0, &self.active_next, &mut self.v_next);
        }

        let gamma = self.params.discount;
        let alpha = self.params.step_size;
        let mut any_change = false;
        for i in 0..m {
            let cumulant = o_next[self.cumulants[i]];
            let delta = cumulant + gamma * self.v_next[i] - self.v_t[i];
            if !delta.is_finite() {
                return Err(Error::Numeric(format!("GVF {i} produced a non-finite TD error")));
            }
            self.steps[i] = alpha * delta;
            any_change |= delta != 0.0;
        }

        let decay = gamma * self.params.trace_decay;
        for (z, &x) in self.trace.iter_mut().zip(o_t) {
            *z = decay * *z + x;
        }
        if !any_change {
            return Ok(());
        }
        let steps = &self.steps;
        let rank_one = |(row, &z): (&mut [f64], &f64)| {
            if z != 0.0 {
                for (w, &s) in row.iter_mut().zip(steps) {
                    *w += s * z;
                }
            }
        };
        if parallel {
            self.weights
                .par_chunks_mut(m)
                .zip(self.trace.par_iter())
                .for_each(rank_one);
        } else {
            self.weights.chunks_exact_mut(m).zip(&self.trace).for_each(rank_one);
        }
        Ok(())
    }

    /// Sets every neighborhood to the top-k absolute weights of its GVF.
    pub fn refresh_neighborhoods(&mut self) {
        let m = self.len();
        let d = self.d;
        let k = self.params.k;
        let weights = &self.weights;
        let select = |i: usize| {
            Neighborhood::from_unchecked(top_k_by_magnitude(d, k, |j| weights[j * m + i].abs()))
        };
        self.neighborhoods = if d * m >= PAR_BANK_WORK && rayon::current_num_threads() > 1 {
            (0..m).into_par_iter().map(select).collect()
        } else {
            (0..m).map(select).collect()
        };
    }
}

fn collect_active(o: &[f64], out: &mut Vec<(usize, f64)>) {
    out.clear();
    out.extend(o.iter().enumerate().filter(|(_, &x)| x != 0.0).map(|(j, &x)| (j, x)));
}

/// `out[i - lo] = sum_j weights[j*m + i] * x_j` over active `(j, x_j)` in index order.
#[inline]
fn accumulate(weights: &[f64], m: usize, lo: usize, active: &[(usize, f64)], out: &mut [f64]) {
    out.fill(0.0);
    let width = out.len();
    for &(j, x) in active {
        let row = &weights[j * m + lo..j * m + lo + width];
        if x == 1.0 {
            for (acc, &w) in out.iter_mut().zip(row) {
                *acc += w;
            }
        } else {
            for (acc, &w) in out.iter_mut().zip(row) {
                *acc += w * x;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learner::TdLearner;
    use crate::rng::{stream_rng, Stream};
    use rand::Rng;

    fn params(k: usize) -> GvfParams {
        GvfParams {
            step_size: 0.05,
            trace_decay: 0.8,
            discount: 0.9,
            k,
            refresh_period: 100,
        }
    }

    #[test]
    fn fresh_bank_neighborhoods_are_leading_indices() {
        let bank = GvfBank::new(8, vec![3, 5], params(3)).unwrap();
        for nb in bank.neighborhoods() {
            assert_eq!(nb.indices(), &[0, 1, 2]);
        }
    }

    #[test]
    fn zero_observations_change_nothing() {
        let mut bank = GvfBank::new(5, vec![0, 1, 2], params(2)).unwrap();
        bank.update(&[0.0; 5], &[0.0; 5]).unwrap();
        assert!(bank.raw_weights().iter().all(|&w| w == 0.0));
    }

    #[test]
    fn rejects_bad_construction() {
        assert!(GvfBank::new(3, vec![0, 0], params(1)).is_err());
        assert!(GvfBank::new(3, vec![4], params(1)).is_err());
        assert!(GvfBank::new(3, vec![0], params(4)).is_err());
        let mut p = params(1);
        p.refresh_period = 0;
        assert!(GvfBank::new(3, vec![0], p).is_err());
        assert!(sample_cumulants(3, 4, &mut stream_rng(0, Stream::Cumulants)).is_err());
    }

    #[test]
    fn single_gvf_matches_td_learner_bitwise() {
        let d = 12;
        let mut rng = stream_rng(3, Stream::Noise);
        let mut bank = GvfBank::new(d, vec![4], params(3)).unwrap();
        let mut td = TdLearner::new(d, 0.05, 0.8, 0.9).unwrap();
        let mut o: Vec<f64> = (0..d).map(|_| rng.random_range(0..2) as f64).collect();
        for _ in 0..500 {
            let next: Vec<f64> = (0..d).map(|_| rng.random_range(0..2) as f64).collect();
            bank.update(&o, &next).unwrap();
            td.update(&o, next[4], &next).unwrap();
            o = next;
        }
        let w = bank.weights_of(0);
        assert_eq!(w, td.weights());
        assert_eq!(bank.trace(), td.trace());
    }

    #[test]
    fn constant_cumulant_converges_to_geometric_sum() {
        // A single always-on component predicting itself: v = 1 / (1 - gamma).
        let mut bank = GvfBank::new(1, vec![0], GvfParams { step_size: 0.01, ..params(1) }).unwrap();
        for _ in 0..20_000 {
            bank.update(&[1.0], &[1.0]).unwrap();
        }
        let v = bank.predict(0, &[1.0]);
        assert!((v - 10.0).abs() < 1e-6, "v = {v}");
    }

    #[test]
    fn refresh_picks_dominant_weights_and_is_idempotent() {
        let mut bank = GvfBank::new(6, vec![0], params(2)).unwrap();
        // Weight vector of GVF 0 is column 0 of the (6 x 1) storage.
        bank.restore(vec![0.1, -3.0, 0.2, 0.0, 2.0, 0.05], vec![0.0; 6]).unwrap();
        bank.refresh_neighborhoods();
        assert_eq!(bank.neighborhoods()[0].indices(), &[1, 4]);
        let before = bank.neighborhoods().to_vec();
        bank.refresh_neighborhoods();
        assert_eq!(bank.neighborhoods(), &before[..]);
    }
}
