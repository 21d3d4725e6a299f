//! Online-performance scoring: squared error between each logged prediction
//! and the truncated empirical return, averaged over fixed-length segments.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `G_t = sum_{j < T-t} gamma^j r_{t+1+j}` for every logged step.
///
/// `rewards[t]` holds `r_{t+1}`, the reward that followed the prediction
/// logged at index `t`. Computed by one backward pass `G_t = r_{t+1} +
/// gamma G_{t+1}` with `G = 0` past the end.
pub fn truncated_returns(rewards: &[f64], discount: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut g = 0.0f64;
    for (ret, &r) in out.iter_mut().zip(rewards).rev() {
        g = r + discount * g;
        *ret = g;
    }
    out
}

/// Predictions and rewards of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialLog {
    pub predictions: Vec<f64>,
    pub rewards: Vec<f64>,
    pub discount: f64,
    pub segment_length: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentError {
    pub segment: usize,
    pub mse: f64,
}

/// Mean squared return error per full segment.
///
/// The trailing `segment_length` steps only supply returns and are never
/// scored, nor is any partial segment. `T = S*L + rem` therefore yields
/// `S - 1` points.
pub fn segment_mse(log: &TrialLog) -> Result<Vec<SegmentError>> {
    let len = log.segment_length;
    let total = log.predictions.len();
    if log.rewards.len() != total {
        return Err(Error::invalid(format!(
            "{} predictions but {} rewards",
            total,
            log.rewards.len()
        )));
    }
    if !(0.0..1.0).contains(&log.discount) {
        return Err(Error::invalid(format!("discount {} outside [0, 1)", log.discount)));
    }
    if len == 0 || total < 2 * len {
        return Err(Error::invalid(format!(
            "{total} steps is too short for two segments of {len}"
        )));
    }
    let returns = truncated_returns(&log.rewards, log.discount);
    let scored = total / len - 1;
    Ok((0..scored)
        .map(|s| {
            let range = s * len..(s + 1) * len;
            let sum: f64 = log.predictions[range.clone()]
                .iter()
                .zip(&returns[range])
                .map(|(p, g)| (p - g) * (p - g))
                .sum();
            SegmentError {
                segment: s,
                mse: sum / len as f64,
            }
        })
        .collect())
}

/// Sample mean and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

impl MeanSe {
    pub fn of(values: &[f64]) -> MeanSe {
        let n = values.len();
        if n == 0 {
            return MeanSe {
                mean: f64::NAN,
                se: f64::NAN,
                n,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let se = if n > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        MeanSe { mean, se, n }
    }

    /// `sqrt(se_a^2 + se_b^2)`.
    pub fn combined_se(&self, other: &MeanSe) -> f64 {
        (self.se * self.se + other.se * other.se).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn direct(rewards: &[f64], gamma: f64) -> Vec<f64> {
        (0..rewards.len())
            .map(|t| {
                rewards[t..]
                    .iter()
                    .enumerate()
                    .map(|(j, r)| gamma.powi(j as i32) * r)
                    .sum()
            })
            .collect()
    }

    #[test]
    fn zero_discount_returns_next_reward() {
        let r = [0.0, 1.0, 3.0, -2.0];
        assert_eq!(truncated_returns(&r, 0.0), r.to_vec());
    }

    #[test]
    fn geometric_series_limit() {
        let g = truncated_returns(&vec![1.0; 200], 0.5);
        assert!((g[0] - 2.0).abs() < 1e-15);
        assert_eq!(g[199], 1.0);
    }

    #[test]
    fn matches_direct_sum_on_sinusoid() {
        let r: Vec<f64> = (0..500).map(|t| (t as f64 * 0.3).sin()).collect();
        let fast = truncated_returns(&r, 0.95);
        let slow = direct(&r, 0.95);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0));
        }
    }

    fn log(predictions: Vec<f64>, rewards: Vec<f64>, len: usize) -> TrialLog {
        TrialLog {
            predictions,
            rewards,
            discount: 0.9,
            segment_length: len,
        }
    }

    #[test]
    fn oracle_predictions_score_zero() {
        let rewards: Vec<f64> = (0..100).map(|t| (t % 7 == 0) as u8 as f64).collect();
        let g = truncated_returns(&rewards, 0.9);
        let curve = segment_mse(&log(g, rewards, 20)).unwrap();
        assert_eq!(curve.len(), 4);
        assert!(curve.iter().all(|p| p.mse == 0.0));
    }

    #[test]
    fn zero_predictions_score_mean_square_return() {
        let rewards: Vec<f64> = (0..45).map(|t| ((t * 5) % 3) as f64).collect();
        let g = truncated_returns(&rewards, 0.9);
        let curve = segment_mse(&log(vec![0.0; 45], rewards, 10)).unwrap();
        // 45 steps, L = 10: four full segments, last one dropped.
        assert_eq!(curve.len(), 3);
        for p in curve {
            let seg = &g[p.segment * 10..(p.segment + 1) * 10];
            let expect = seg.iter().map(|v| v * v).sum::<f64>() / 10.0;
            assert!((p.mse - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn too_short_logs_are_rejected() {
        assert!(segment_mse(&log(vec![0.0; 19], vec![0.0; 19], 10)).is_err());
        assert!(segment_mse(&log(vec![0.0; 20], vec![0.0; 21], 10)).is_err());
    }

    #[test]
    fn mean_se() {
        let s = MeanSe::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert!((s.se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert_eq!(MeanSe::of(&[3.0]).se, 0.0);
    }
}
