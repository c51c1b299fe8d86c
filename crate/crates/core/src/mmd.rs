//! Maximum mean discrepancy with an RBF kernel.
//!
//! The estimator is the biased V-statistic
//! `mean(K_XX) + mean(K_YY) - 2 mean(K_XY)` with diagonals included, which
//! is non-negative for a positive semi-definite kernel. Row sums may be
//! computed in parallel but are always reduced in row order, so results are
//! bit-identical for any thread count.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::seed::{mix, rng_from_seed};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "BandwidthRepr", into = "BandwidthRepr")]
pub enum Bandwidth {
    Fixed(f64),
    /// Median pairwise distance of the pooled sample.
    #[default]
    MedianHeuristic,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum BandwidthRepr {
    Fixed(f64),
    Named(String),
}

impl TryFrom<BandwidthRepr> for Bandwidth {
    type Error = String;

    fn try_from(r: BandwidthRepr) -> std::result::Result<Self, String> {
        match r {
            BandwidthRepr::Fixed(v) => Ok(Bandwidth::Fixed(v)),
            BandwidthRepr::Named(s) => s.parse().map_err(|e: Error| e.to_string()),
        }
    }
}

impl From<Bandwidth> for BandwidthRepr {
    fn from(b: Bandwidth) -> Self {
        match b {
            Bandwidth::Fixed(v) => BandwidthRepr::Fixed(v),
            Bandwidth::MedianHeuristic => BandwidthRepr::Named("median".into()),
        }
    }
}

impl FromStr for Bandwidth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "median" | "median-heuristic" => Ok(Bandwidth::MedianHeuristic),
            other => other.parse::<f64>().map(Bandwidth::Fixed).map_err(|_| {
                Error::InvalidConfig(format!(
                    "kernel.bandwidth: `{other}` is neither `median` nor a number"
                ))
            }),
        }
    }
}

impl fmt::Display for Bandwidth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bandwidth::Fixed(v) => write!(f, "{v}"),
            Bandwidth::MedianHeuristic => f.write_str("median"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub bandwidth: Bandwidth,
    pub max_points_per_side: usize,
    pub seed: u64,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            bandwidth: Bandwidth::MedianHeuristic,
            max_points_per_side: 512,
            seed: 0,
        }
    }
}

impl KernelConfig {
    pub fn validate(&self) -> Result<()> {
        if let Bandwidth::Fixed(b) = self.bandwidth {
            if !(b > 0.0 && b.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "kernel.bandwidth = {b} must be positive"
                )));
            }
        }
        if self.max_points_per_side == 0 {
            return Err(Error::InvalidConfig(
                "kernel.max_points_per_side must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MmdEstimate {
    pub mmd_squared: f64,
    pub mmd: f64,
    pub bandwidth_used: f64,
    pub n_x: usize,
    pub n_y: usize,
}

fn squared_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// `exp(-|x - y|^2 / (2 sigma^2))`.
pub fn rbf_kernel(x: &[f64], y: &[f64], bandwidth: f64) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    if bandwidth.is_nan() || bandwidth <= 0.0 {
        return Err(Error::NonPositiveBandwidth(bandwidth));
    }
    Ok(rbf_unchecked(x, y, 1.0 / (2.0 * bandwidth * bandwidth)))
}

#[inline]
fn rbf_unchecked(x: &[f64], y: &[f64], gamma: f64) -> f64 {
    (-squared_distance(x, y) * gamma).exp()
}

/// Median of the non-zero pairwise Euclidean distances of `x ∪ y`, or 1
/// when every distance is zero.
pub fn median_heuristic_bandwidth(x: &[&[f64]], y: &[&[f64]]) -> Result<f64> {
    let pooled: Vec<&[f64]> = x.iter().chain(y).copied().collect();
    if pooled.len() < 2 {
        return Err(Error::EmptySet);
    }
    let mut dists: Vec<f64> = pooled
        .par_iter()
        .enumerate()
        .flat_map_iter(|(i, a)| {
            pooled[i + 1..]
                .iter()
                .map(move |b| squared_distance(a, b).sqrt())
        })
        .filter(|&d| d > 0.0)
        .collect();
    if dists.is_empty() {
        return Ok(1.0);
    }
    let m = dists.len();
    let mid = m / 2;
    let (lower, upper, _) = dists.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if m % 2 == 1 {
        Ok(upper)
    } else {
        let below = lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok((below + upper) / 2.0)
    }
}

/// Mean of `k(a_i, b_j)` over all pairs, reduced in a fixed order.
fn kernel_mean(a: &[&[f64]], b: &[&[f64]], gamma: f64) -> f64 {
    let rows: Vec<f64> = a
        .par_iter()
        .map(|x| b.iter().map(|y| rbf_unchecked(x, y, gamma)).sum::<f64>())
        .collect();
    rows.iter().sum::<f64>() / (a.len() as f64 * b.len() as f64)
}

fn cap<'a>(points: &[&'a [f64]], max: usize, seed: u64) -> Vec<&'a [f64]> {
    if points.len() <= max {
        return points.to_vec();
    }
    let mut rng = rng_from_seed(seed);
    let mut idx = index::sample(&mut rng, points.len(), max).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| points[i]).collect()
}

pub fn mmd(x: &[&[f64]], y: &[&[f64]], config: &KernelConfig) -> Result<MmdEstimate> {
    config.validate()?;
    let (Some(x0), Some(_)) = (x.first(), y.first()) else {
        return Err(Error::EmptySet);
    };
    let dim = x0.len();
    if let Some(bad) = x.iter().chain(y).find(|p| p.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: bad.len(),
        });
    }
    let xs = cap(x, config.max_points_per_side, mix(&[config.seed, 0]));
    let ys = cap(y, config.max_points_per_side, mix(&[config.seed, 1]));
    let bandwidth = match config.bandwidth {
        Bandwidth::Fixed(b) => b,
        Bandwidth::MedianHeuristic => median_heuristic_bandwidth(&xs, &ys)?,
    };
    let gamma = 1.0 / (2.0 * bandwidth * bandwidth);
    let kxx = kernel_mean(&xs, &xs, gamma);
    let kyy = kernel_mean(&ys, &ys, gamma);
    let kxy = kernel_mean(&xs, &ys, gamma);
    let mmd_squared = (kxx + kyy - 2.0 * kxy).max(0.0);
    Ok(MmdEstimate {
        mmd_squared,
        mmd: mmd_squared.sqrt(),
        bandwidth_used: bandwidth,
        n_x: xs.len(),
        n_y: ys.len(),
    })
}

/// Per-feature z-scoring fitted on a reference sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    /// Population mean and standard deviation per feature; constant
    /// features keep a scale of 1.
    pub fn fit(rows: &[&[f64]]) -> Result<Self> {
        let Some(first) = rows.first() else {
            return Err(Error::EmptySet);
        };
        let d = first.len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r.iter()) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r.iter()).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 0.0 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { mean, scale })
    }

    pub fn transform(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}
