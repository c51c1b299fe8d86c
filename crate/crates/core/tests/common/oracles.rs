//! Brute-force reference implementations used as test oracles.
#![allow(dead_code)]

use metaforests::data::Sample;
use metaforests::mmd::{mmd, KernelConfig};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn dist(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for k in 0..a.len() {
        s += (a[k] - b[k]).powi(2);
    }
    s.sqrt()
}

/// Median of the non-zero pairwise distances of the pooled points, by full sort.
pub fn naive_median_bandwidth(x: &[Vec<f64>], y: &[Vec<f64>]) -> f64 {
    let pooled: Vec<&Vec<f64>> = x.iter().chain(y).collect();
    let mut d = Vec::new();
    for i in 0..pooled.len() {
        for j in i + 1..pooled.len() {
            let v = dist(pooled[i], pooled[j]);
            if v > 0.0 {
                d.push(v);
            }
        }
    }
    if d.is_empty() {
        return 1.0;
    }
    d.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = d.len();
    if m % 2 == 1 {
        d[m / 2]
    } else {
        (d[m / 2 - 1] + d[m / 2]) / 2.0
    }
}

/// Biased squared MMD by explicit double sums.
pub fn naive_mmd_squared(x: &[Vec<f64>], y: &[Vec<f64>], sigma: f64) -> f64 {
    let k = |a: &[f64], b: &[f64]| (-dist(a, b).powi(2) / (2.0 * sigma * sigma)).exp();
    let mean = |a: &[Vec<f64>], b: &[Vec<f64>]| {
        let mut s = 0.0;
        for p in a {
            for q in b {
                s += k(p, q);
            }
        }
        s / (a.len() * b.len()) as f64
    };
    (mean(x, x) + mean(y, y) - 2.0 * mean(x, y)).max(0.0)
}

/// The best split found by enumerating every feature and every midpoint,
/// as `(feature, threshold, impurity decrease)`. Ties go to the lower
/// feature, then the lower threshold; decreases of 1e-12 or less count as none.
pub fn exhaustive_split(samples: &[Sample], class_count: usize) -> Option<(usize, f64, f64)> {
    let n = samples.len();
    if n < 2 {
        return None;
    }
    let gini = |idx: &[usize]| {
        let mut counts = vec![0usize; class_count];
        for &i in idx {
            counts[samples[i].label] += 1;
        }
        let t = idx.len() as f64;
        1.0 - counts
            .iter()
            .map(|&c| (c as f64 / t) * (c as f64 / t))
            .sum::<f64>()
    };
    let all: Vec<usize> = (0..n).collect();
    let parent = gini(&all);
    let mut candidates = Vec::new();
    for f in 0..samples[0].features.len() {
        let mut values: Vec<f64> = samples.iter().map(|s| s.features[f]).collect();
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        values.dedup();
        for w in values.windows(2) {
            let mut t = (w[0] + w[1]) / 2.0;
            if t >= w[1] {
                t = w[0];
            }
            let left: Vec<usize> = all
                .iter()
                .copied()
                .filter(|&i| samples[i].features[f] <= t)
                .collect();
            let right: Vec<usize> = all
                .iter()
                .copied()
                .filter(|&i| samples[i].features[f] > t)
                .collect();
            let (nl, nr, nf) = (left.len() as f64, right.len() as f64, n as f64);
            let dec = parent - (nl / nf) * gini(&left) - (nr / nf) * gini(&right);
            candidates.push((f, t, dec));
        }
    }
    let mut best: Option<(usize, f64, f64)> = None;
    for c in candidates {
        let better = match best {
            None => true,
            Some(b) => c.2 > b.2 || (c.2 == b.2 && (c.0, c.1) < (b.0, b.1)),
        };
        if better {
            best = Some(c);
        }
    }
    best.filter(|b| b.2 > 1e-12)
}

/// 99th percentile of the MMD statistic over `permutations` random
/// relabelings of the pooled sample.
pub fn permutation_null_q99(
    x: &[Vec<f64>],
    y: &[Vec<f64>],
    config: &KernelConfig,
    permutations: usize,
    seed: u64,
) -> f64 {
    let mut pooled: Vec<&[f64]> = x.iter().chain(y).map(Vec::as_slice).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stats: Vec<f64> = (0..permutations)
        .map(|_| {
            pooled.shuffle(&mut rng);
            let (a, b) = pooled.split_at(x.len());
            mmd(a, b, config).unwrap().mmd_squared
        })
        .collect();
    stats.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rank = ((0.99 * permutations as f64).ceil() as usize).clamp(1, permutations);
    stats[rank - 1]
}
