//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use pan_core::features::{FilterBank, FilterKind, Neighborhood};

/// Explicit dense evaluation of `f(A M o)` for every neighborhood, with `M`
/// materialized as a `k x d` zero/one matrix, prefixed by `o`.
pub fn dense_features(o: &[f64], nbs: &[Neighborhood], bank: &FilterBank) -> Vec<f64> {
    let d = o.len();
    let (n, k) = (bank.outputs(), bank.inputs());
    let a = bank.projection();
    let mut x = o.to_vec();
    for nb in nbs {
        let mut m = vec![vec![0.0; d]; k];
        for (row, &j) in nb.indices().iter().enumerate() {
            m[row][j] = 1.0;
        }
        let mo: Vec<f64> = m
            .iter()
            .map(|row| {
                let mut s = 0.0;
                for j in 0..d {
                    s += row[j] * o[j];
                }
                s
            })
            .collect();
        for q in 0..n {
            let mut z = 0.0;
            for r in 0..k {
                z += a[q * k + r] * mo[r];
            }
            x.push(match bank.kind() {
                FilterKind::Majority => {
                    if z > 2.0 * k as f64 / 3.0 {
                        1.0
                    } else {
                        0.0
                    }
                }
                FilterKind::Ltu => {
                    if z > 4.0 {
                        1.0
                    } else {
                        0.0
                    }
                }
                FilterKind::Relu => (z - 4.0).max(0.0),
            });
        }
    }
    x
}

/// `G_t = sum_j gamma^j r_{t+1+j}` by direct double summation.
pub fn direct_returns(rewards: &[f64], gamma: f64) -> Vec<f64> {
    (0..rewards.len())
        .map(|t| {
            let mut g = 0.0;
            for (j, r) in rewards[t..].iter().enumerate() {
                g += gamma.powi(j as i32) * r;
            }
            g
        })
        .collect()
}

/// Indices of the `k` largest `|w|` by full sort, lower index first on ties.
pub fn sort_top_k(w: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..w.len()).collect();
    idx.sort_by(|&a, &b| w[b].abs().total_cmp(&w[a].abs()).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for c in col..n {
                a[row][c] -= f * a[col][c];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|c| a[row][c] * x[c]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// Euclidean distance.
pub fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}
