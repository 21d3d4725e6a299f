use super::sparse_dot;
use crate::error::{Error, Result};

/// Linear TD(λ) with accumulating traces. Weights and traces start at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct TdLearner {
    weights: Vec<f64>,
    trace: Vec<f64>,
    step_size: f64,
    trace_decay: f64,
    discount: f64,
}

pub(crate) fn check_params(step_size: f64, trace_decay: f64, discount: f64) -> Result<()> {
    if !(step_size > 0.0 && step_size.is_finite()) {
        return Err(Error::invalid(format!("step size {step_size} must be positive")));
    }
    if !(0.0..=1.0).contains(&trace_decay) {
        return Err(Error::invalid(format!("trace decay {trace_decay} outside [0, 1]")));
    }
    if !(0.0..1.0).contains(&discount) {
        return Err(Error::invalid(format!("discount {discount} outside [0, 1)")));
    }
    Ok(())
}

impl TdLearner {
    pub fn new(dim: usize, step_size: f64, trace_decay: f64, discount: f64) -> Result<Self> {
        check_params(step_size, trace_decay, discount)?;
        Ok(TdLearner {
            weights: vec![0.0; dim],
            trace: vec![0.0; dim],
            step_size,
            trace_decay,
            discount,
        })
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn trace(&self) -> &[f64] {
        &self.trace
    }

    pub fn step_size(&self) -> f64 {
        self.step_size
    }

    pub fn trace_decay(&self) -> f64 {
        self.trace_decay
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn set_step_size(&mut self, step_size: f64) -> Result<()> {
        check_params(step_size, self.trace_decay, self.discount)?;
        self.step_size = step_size;
        Ok(())
    }

    pub(crate) fn restore(&mut self, weights: Vec<f64>, trace: Vec<f64>) -> Result<()> {
        if weights.len() != self.dim() || trace.len() != self.dim() {
            return Err(Error::invalid("restored state has the wrong dimension"));
        }
        self.weights = weights;
        self.trace = trace;
        Ok(())
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        sparse_dot(&self.weights, x)
    }

    /// One TD(λ) transition; returns the TD error.
    ///
    /// `delta = r + gamma * w.x_next - w.x_t`, then `z <- gamma*lambda*z + x_t`
    /// and `w <- w + alpha * delta * z`, all with the pre-update `w`.
    pub fn update(&mut self, x_t: &[f64], reward: f64, x_next: &[f64]) -> Result<f64> {
        self.step(x_t, reward, x_next).map(|(_, delta)| delta)
    }

    /// Like [`update`](Self::update) but also returns the pre-update
    /// prediction `w . x_t`.
    pub fn step(&mut self, x_t: &[f64], reward: f64, x_next: &[f64]) -> Result<(f64, f64)> {
        let dim = self.dim();
        if x_t.len() != dim || x_next.len() != dim {
            return Err(Error::invalid(format!(
                "feature lengths {} and {} do not match weight length {dim}",
                x_t.len(),
                x_next.len()
            )));
        }
        let v_t = sparse_dot(&self.weights, x_t);
        let v_next = sparse_dot(&self.weights, x_next);
        let delta = reward + self.discount * v_next - v_t;
        // Non-finite features, rewards or weights all surface here.
        if !delta.is_finite() || !x_t.iter().all(|v| v.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite TD error (v_t={v_t}, v_next={v_next}, r={reward})"
            )));
        }
        let decay = self.discount * self.trace_decay;
        let scale = self.step_size * delta;
        for ((w, z), &x) in self.weights.iter_mut().zip(&mut self.trace).zip(x_t) {
            *z = decay * *z + x;
            *w += scale * *z;
        }
        Ok((v_t, delta))
    }
}
