//! Straight-line reference computations used as test oracles.
//!
//! Nothing here calls into the library's numeric paths; each function is
//! written directly from the textbook definition.
#![allow(dead_code)]

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `X[k] = Σ x[n]·(cos θ − j sin θ)`, θ = 2πnk/N, as (re, im).
pub fn naive_dft(frame: &[f64]) -> Vec<(f64, f64)> {
    let n = frame.len();
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let mut re = 0.0;
        let mut im = 0.0;
        for (i, &x) in frame.iter().enumerate() {
            let theta = 2.0 * PI * (i as f64) * (k as f64) / (n as f64);
            re += x * theta.cos();
            im -= x * theta.sin();
        }
        out.push((re, im));
    }
    out
}

/// Mean, then mean squared deviation.
pub fn two_pass_stats(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var)
}

/// The detection procedure written out by hand with default parameters:
/// 16000-sample peak-normalized blocks, 99-sample windows every 99 samples,
/// bins 30..=49, fire when mean > 0.5 and variance > 0.2.
/// Returns `(start_sample, mean, variance)` per fired window.
pub fn reference_events(samples: &[f64]) -> Vec<(usize, f64, f64)> {
    let mut normalized = samples.to_vec();
    for block in normalized.chunks_mut(16_000) {
        let mut peak = 0.0_f64;
        for s in block.iter() {
            if s.abs() > peak {
                peak = s.abs();
            }
        }
        if peak > 0.0 {
            for s in block.iter_mut() {
                *s /= peak;
            }
        }
    }
    let mut events = Vec::new();
    let mut start = 0;
    while start + 99 <= normalized.len() {
        let spec = naive_dft(&normalized[start..start + 99]);
        let mags: Vec<f64> = spec[30..=49].iter().map(|(re, im)| (re * re + im * im).sqrt()).collect();
        let (mean, var) = two_pass_stats(&mags);
        if mean > 0.5 && var > 0.2 {
            events.push((start, mean, var));
        }
        start += 99;
    }
    events
}

/// Single-frame MFCC straight from the definition: pre-emphasis (0.97),
/// Hamming window, 512-point power spectrum, 26 triangular mel filters over
/// 0..rate/2, natural log with 1e-10 floor, orthonormal DCT-II, 13 outputs.
pub fn mfcc_reference(context: &[f64], rate: f64) -> Vec<f64> {
    let l = context.len();
    let fft_len = 512;
    let n_filters = 26;
    let n_coeffs = 13;

    let mut frame = vec![0.0; fft_len];
    for i in 0..l {
        let prev = if i > 0 { context[i - 1] } else { 0.0 };
        let hamming = 0.54 - 0.46 * (2.0 * PI * i as f64 / (l as f64 - 1.0)).cos();
        frame[i] = (context[i] - 0.97 * prev) * hamming;
    }
    let spectrum = naive_dft(&frame);
    let power: Vec<f64> = spectrum[..fft_len / 2 + 1].iter().map(|(r, i)| r * r + i * i).collect();

    let mel = |hz: f64| 2595.0 * (1.0 + hz / 700.0).log10();
    let inv_mel = |m: f64| 700.0 * (10f64.powf(m / 2595.0) - 1.0);
    let top = mel(rate / 2.0);
    let edges: Vec<f64> = (0..n_filters + 2).map(|i| inv_mel(top * i as f64 / (n_filters + 1) as f64)).collect();

    let mut log_energy = Vec::with_capacity(n_filters);
    for f in 0..n_filters {
        let (lo, mid, hi) = (edges[f], edges[f + 1], edges[f + 2]);
        let mut e = 0.0;
        for (k, p) in power.iter().enumerate() {
            let freq = k as f64 * rate / fft_len as f64;
            let w = if freq > lo && freq <= mid {
                (freq - lo) / (mid - lo)
            } else if freq > mid && freq < hi {
                (hi - freq) / (hi - mid)
            } else {
                0.0
            };
            e += w * p;
        }
        log_energy.push(if e > 1e-10 { e.ln() } else { 1e-10f64.ln() });
    }

    let m = n_filters as f64;
    (0..n_coeffs)
        .map(|i| {
            let scale = if i == 0 { (1.0 / m).sqrt() } else { (2.0 / m).sqrt() };
            scale
                * log_energy
                    .iter()
                    .enumerate()
                    .map(|(j, x)| x * (PI * i as f64 * (j as f64 + 0.5) / m).cos())
                    .sum::<f64>()
        })
        .collect()
}

/// Two Gaussian-ish 2-D clusters separated along a random direction with a
/// guaranteed gap of `margin` between their projections.
pub fn separable_blobs(n: usize, margin: f64, seed: u64) -> Vec<(Vec<f64>, usize)> {
    let mut r = rng(seed);
    let angle: f64 = r.random_range(0.0..2.0 * PI);
    let (ux, uy) = (angle.cos(), angle.sin());
    (0..n)
        .map(|i| {
            let class = i % 2;
            let along: f64 = r.random_range(0.0..3.0);
            let across: f64 = r.random_range(-4.0..4.0);
            let side = if class == 1 { margin / 2.0 + along } else { -margin / 2.0 - along };
            let x = side * ux - across * uy;
            let y = side * uy + across * ux;
            (vec![x, y], class)
        })
        .collect()
}

/// k nearest by squared Euclidean distance after min-max scaling with the
/// training ranges; ties by training order; vote ties to the lower class.
pub fn knn_brute_force(train: &[(Vec<f64>, usize)], n_classes: usize, k: usize, query: &[f64]) -> usize {
    let dim = query.len();
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for (x, _) in train {
        for d in 0..dim {
            lo[d] = lo[d].min(x[d]);
            hi[d] = hi[d].max(x[d]);
        }
    }
    let scale = |x: &[f64]| -> Vec<f64> {
        (0..dim)
            .map(|d| if hi[d] > lo[d] { (x[d] - lo[d]) / (hi[d] - lo[d]) } else { 0.0 })
            .collect()
    };
    let q = scale(query);
    let mut all: Vec<(f64, usize, usize)> = train
        .iter()
        .enumerate()
        .map(|(i, (x, c))| {
            let s = scale(x);
            (s.iter().zip(&q).map(|(a, b)| (a - b).powi(2)).sum(), i, *c)
        })
        .collect();
    all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    let mut votes = vec![0; n_classes];
    for &(_, _, c) in &all[..k] {
        votes[c] += 1;
    }
    let best = *votes.iter().max().unwrap();
    votes.iter().position(|&v| v == best).unwrap()
}
