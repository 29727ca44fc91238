//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use std::f64::consts::PI;

use multirep_core::kernels::{Graph, Tensor, Value};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_series(rng: &mut impl Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(-3.0..3.0)).collect()
}

pub fn random_tensor(rng: &mut impl Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// O(L^2) DFT; returns (re, im) per bin.
pub fn dft(x: &[f64]) -> Vec<(f64, f64)> {
    let n = x.len();
    (0..n)
        .map(|k| {
            x.iter().enumerate().fold((0.0, 0.0), |(re, im), (t, &v)| {
                let a = -2.0 * PI * (k * t % n) as f64 / n as f64;
                (re + v * a.cos(), im + v * a.sin())
            })
        })
        .collect()
}

pub fn fft_magnitude(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let spec = dft(x);
    (0..n)
        .map(|k| if k <= n / 2 { spec[k].0.hypot(spec[k].1) } else { 0.0 })
        .collect()
}

pub fn dct(x: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    (0..x.len())
        .map(|k| {
            let c = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
            c * x
                .iter()
                .enumerate()
                .map(|(t, v)| v * (PI * (2.0 * t as f64 + 1.0) * k as f64 / (2.0 * n)).cos())
                .sum::<f64>()
        })
        .collect()
}

/// Envelope via the direct-DFT analytic signal.
pub fn hilbert_magnitude(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let spec = dft(x);
    let weight = |k: usize| -> f64 {
        if k == 0 || (n % 2 == 0 && k == n / 2) {
            1.0
        } else if k < n.div_ceil(2) {
            2.0
        } else {
            0.0
        }
    };
    (0..n)
        .map(|t| {
            let (mut re, mut im) = (0.0, 0.0);
            for (k, &(a, b)) in spec.iter().enumerate() {
                let w = weight(k);
                if w == 0.0 {
                    continue;
                }
                let ang = 2.0 * PI * (k * t % n) as f64 / n as f64;
                let (c, s) = (ang.cos(), ang.sin());
                re += w * (a * c - b * s);
                im += w * (a * s + b * c);
            }
            (re / n as f64).hypot(im / n as f64)
        })
        .collect()
}

/// Max |a - b| scaled by the oracle's peak magnitude.
pub fn peak_relative_error(got: &[f64], oracle: &[f64]) -> f64 {
    assert_eq!(got.len(), oracle.len());
    let peak = oracle.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    got.iter().zip(oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / peak
}

pub const GRAD_FLOOR: f64 = 1e-4;

pub fn grad_relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(GRAD_FLOOR)
}

/// Central-difference check of every element of every input of `f`.
/// Returns the worst relative error.
pub fn check_gradients(inputs: &[Tensor], f: &dyn Fn(&mut Graph, &[Value]) -> Value, h: f64) -> f64 {
    let eval = |ts: &[Tensor]| -> f64 {
        let mut g = Graph::new();
        let vs: Vec<Value> = ts.iter().map(|t| g.param(t.clone())).collect();
        let out = f(&mut g, &vs);
        g.value(out).data()[0]
    };
    let mut g = Graph::new();
    let vs: Vec<Value> = inputs.iter().map(|t| g.param(t.clone())).collect();
    let out = f(&mut g, &vs);
    g.backward(out).unwrap();
    let mut worst = 0.0f64;
    for (i, t) in inputs.iter().enumerate() {
        let analytic = g.grad(vs[i]).map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; t.len()]);
        for j in 0..t.len() {
            let mut plus = inputs.to_vec();
            plus[i].data_mut()[j] += h;
            let mut minus = inputs.to_vec();
            minus[i].data_mut()[j] -= h;
            let numeric = (eval(&plus) - eval(&minus)) / (2.0 * h);
            worst = worst.max(grad_relative_error(analytic[j], numeric));
        }
    }
    worst
}

/// Mid-rank of each column within one row (rank 1 = best).
pub fn row_ranks(row: &[f64], higher_is_better: bool) -> Vec<f64> {
    row.iter()
        .map(|&v| {
            let better = row
                .iter()
                .filter(|&&o| if higher_is_better { o > v } else { o < v })
                .count();
            let tied = row.iter().filter(|&&o| o == v).count() - 1;
            1.0 + better as f64 + tied as f64 / 2.0
        })
        .collect()
}

/// Every inclusion-maximal subset of at least two models whose rank spread
/// is below `cd`, each sorted ascending by index.
pub fn brute_force_cliques(ranks: &[f64], cd: f64) -> Vec<Vec<usize>> {
    let k = ranks.len();
    let valid: Vec<u32> = (0u32..1 << k)
        .filter(|m| m.count_ones() >= 2)
        .filter(|&m| {
            let members: Vec<f64> = (0..k).filter(|i| m >> i & 1 == 1).map(|i| ranks[i]).collect();
            let lo = members.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = members.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            hi - lo < cd
        })
        .collect();
    let mut out: Vec<Vec<usize>> = valid
        .iter()
        .filter(|&&m| !valid.iter().any(|&o| o != m && o & m == m))
        .map(|&m| (0..k).filter(|i| m >> i & 1 == 1).collect())
        .collect();
    out.sort();
    out
}

/// O(n^2) domination check; frontier ordered by (cost, index).
pub fn brute_force_frontier(points: &[(f64, f64)]) -> Vec<usize> {
    let mut keep: Vec<usize> = (0..points.len())
        .filter(|&i| {
            let (c, s) = points[i];
            !points
                .iter()
                .any(|&(oc, os)| oc <= c && os >= s && (oc < c || os > s))
        })
        .collect();
    keep.sort_by(|&a, &b| points[a].0.total_cmp(&points[b].0).then(a.cmp(&b)));
    keep
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half, by enumerating all pairs.
pub fn pairwise_auc(scores: &[f64], positive: &[bool]) -> Option<f64> {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, &pi) in positive.iter().enumerate() {
        for (j, &pj) in positive.iter().enumerate() {
            if pi && !pj {
                pairs += 1.0;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
    }
    (pairs > 0.0).then(|| wins / pairs)
}

pub mod suites;
