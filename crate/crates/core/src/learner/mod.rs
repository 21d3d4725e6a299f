//! TD(λ) learners: the main value function, the auxiliary GVF bank that
//! adapts neighborhoods, and the online agent loop tying them together.

mod agent;
mod checkpoint;
mod gvf;
mod td;
mod topk;

pub use agent::{Agent, AgentParams, NeighborhoodSource, StepResult};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use gvf::{sample_cumulants, GvfBank, GvfParams};
pub use td::TdLearner;
pub use topk::{top_k_abs, top_k_by_magnitude};

/// `w . x` summed in index order over the nonzero entries of `x`.
///
/// Skipping zeros leaves the result bit-identical to the dense sum for finite
/// weights, and lets the GVF bank use active-index lists with the same
/// rounding.
#[inline]
pub(crate) fn sparse_dot(w: &[f64], x: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (wj, &xj) in w.iter().zip(x) {
        if xj != 0.0 {
            acc += wj * xj;
        }
    }
    acc
}
