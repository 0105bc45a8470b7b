//! Brute-force reference implementations used by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Weighted isotonic regression by enumerating all `2^(n-1)` splits of the
/// sequence into contiguous blocks. Each block takes its weighted mean;
/// among splits with nondecreasing block means the smallest weighted sum
/// of squares wins.
pub fn isotonic_exhaustive(values: &[f64], weights: &[f64]) -> Vec<f64> {
    let n = values.len();
    assert!((1..=20).contains(&n));
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 0u32..(1 << (n - 1)) {
        // bit k set: a block boundary between positions k and k + 1
        let mut fit = vec![0.0; n];
        let mut start = 0;
        let mut prev_mean = f64::NEG_INFINITY;
        let mut feasible = true;
        for end in 1..=n {
            if end == n || mask & (1 << (end - 1)) != 0 {
                let w: f64 = weights[start..end].iter().sum();
                let m = values[start..end].iter().zip(&weights[start..end]).map(|(v, w)| v * w).sum::<f64>() / w;
                if m < prev_mean {
                    feasible = false;
                    break;
                }
                fit[start..end].iter_mut().for_each(|f| *f = m);
                prev_mean = m;
                start = end;
            }
        }
        if !feasible {
            continue;
        }
        let sse: f64 = values.iter().zip(weights).zip(&fit).map(|((v, w), f)| w * (v - f).powi(2)).sum();
        if best.as_ref().is_none_or(|(b, _)| sse < *b) {
            best = Some((sse, fit));
        }
    }
    best.expect("the single-block split is always feasible").1
}

/// Every vector of length `n` with entries in `alphabet`.
pub fn all_sequences(n: usize, alphabet: &[f64]) -> Vec<Vec<f64>> {
    let mut out = vec![vec![]];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                alphabet.iter().map(move |a| {
                    let mut v = prefix.clone();
                    v.push(*a);
                    v
                })
            })
            .collect();
    }
    out
}

/// Smoothing spline values and second derivatives from the dense system
/// `(W + mu Q R^-1 Q') g = W y`, `gamma = R^-1 Q' g`.
pub fn dense_spline(ts: &[f64], ys: &[f64], ws: &[f64], mu: f64) -> (Vec<f64>, Vec<f64>) {
    let m = ts.len();
    assert!(m >= 3);
    let h: Vec<f64> = ts.windows(2).map(|w| w[1] - w[0]).collect();
    let mut q = DMatrix::zeros(m, m - 2);
    let mut r = DMatrix::zeros(m - 2, m - 2);
    for j in 0..m - 2 {
        q[(j, j)] = 1.0 / h[j];
        q[(j + 1, j)] = -1.0 / h[j] - 1.0 / h[j + 1];
        q[(j + 2, j)] = 1.0 / h[j + 1];
        r[(j, j)] = (h[j] + h[j + 1]) / 3.0;
        if j + 1 < m - 2 {
            r[(j, j + 1)] = h[j + 1] / 6.0;
            r[(j + 1, j)] = h[j + 1] / 6.0;
        }
    }
    let r_inv = r.clone().try_inverse().expect("R is positive definite");
    let k = &q * &r_inv * q.transpose();
    let w = DMatrix::from_diagonal(&DVector::from_column_slice(ws));
    let lhs = &w + k * mu;
    let rhs = &w * DVector::from_column_slice(ys);
    let g = lhs.lu().solve(&rhs).expect("dense system is nonsingular");
    let inner = r_inv * q.transpose() * &g;
    let mut gamma = vec![0.0; m];
    gamma[1..m - 1].copy_from_slice(inner.as_slice());
    (g.iter().copied().collect(), gamma)
}

/// Random spline problem: `m` knots above -2 with gaps drawn from
/// `[0.05, 0.5)`, noisy cubic responses and integer weights in `[1, 4]`.
pub fn random_spline_problem(m: usize, seed: u64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ts: Vec<f64> = Vec::with_capacity(m);
    let mut t = -2.0;
    for _ in 0..m {
        t += rng.random_range(0.05..0.5);
        ts.push(t);
    }
    let ys = ts.iter().map(|t| t * t * t + rng.random_range(-1.0..1.0)).collect();
    let ws = (0..m).map(|_| rng.random_range(1..=4) as f64).collect();
    (ts, ys, ws)
}

pub fn central_difference(f: impl Fn(f64) -> f64, u: f64, step: f64) -> f64 {
    (f(u + step) - f(u - step)) / (2.0 * step)
}
