use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// Heap entry ordered so that the *worst* kept candidate sits on top:
/// smaller magnitude is worse, and among equal magnitudes the higher index is
/// worse.
#[derive(Debug, Clone, Copy)]
struct Kept {
    magnitude: f64,
    index: usize,
}

impl Ord for Kept {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .magnitude
            .total_cmp(&self.magnitude)
            .then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Kept {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Kept {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Kept {}

/// Indices of the `k` largest values of `magnitude(0..len)`, largest first,
/// ties to the lower index. Runs in `O(len log k)` with a bounded heap.
pub fn top_k_by_magnitude(len: usize, k: usize, magnitude: impl Fn(usize) -> f64) -> Vec<usize> {
    debug_assert!(k <= len);
    if k == 0 {
        return Vec::new();
    }
    let mut heap: BinaryHeap<Kept> = BinaryHeap::with_capacity(k + 1);
    for index in 0..len {
        let cand = Kept {
            magnitude: magnitude(index),
            index,
        };
        if heap.len() < k {
            heap.push(cand);
        } else if let Some(mut worst) = heap.peek_mut() {
            // Later indices only win on strictly larger magnitude.
            if cand < *worst {
                *worst = cand;
            }
        }
    }
    heap.into_sorted_vec().into_iter().map(|c| c.index).collect()
}

/// Indices of the `k` entries of `w` with the largest absolute value.
pub fn top_k_abs(w: &[f64], k: usize) -> Result<Vec<usize>> {
    if k > w.len() {
        return Err(Error::invalid(format!("k={k} exceeds length {}", w.len())));
    }
    Ok(top_k_by_magnitude(w.len(), k, |i| w[i].abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sort_oracle(w: &[f64], k: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..w.len()).collect();
        idx.sort_by(|&a, &b| w[b].abs().total_cmp(&w[a].abs()).then(a.cmp(&b)));
        idx.truncate(k);
        idx
    }

    #[test]
    fn small_examples() {
        assert_eq!(top_k_abs(&[0.1, -0.5, 0.3], 2).unwrap(), vec![1, 2]);
        assert_eq!(top_k_abs(&[2.0; 5], 3).unwrap(), vec![0, 1, 2]);
        assert_eq!(top_k_abs(&[0.0; 4], 0).unwrap(), Vec::<usize>::new());
        assert_eq!(top_k_abs(&[1.0, -1.0, 0.5], 3).unwrap(), vec![0, 1, 2]);
        assert!(top_k_abs(&[1.0], 2).is_err());
    }

    proptest! {
        #[test]
        fn matches_full_sort(
            w in prop::collection::vec(prop_oneof![(-3i32..=3).prop_map(|v| v as f64), -1e3f64..1e3], 1..200),
            frac in 0.0f64..=1.0,
        ) {
            let k = ((w.len() as f64) * frac) as usize;
            prop_assert_eq!(top_k_abs(&w, k).unwrap(), sort_oracle(&w, k));
        }
    }
}
