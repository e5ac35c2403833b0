//! Slow reference implementations used to cross-check the optimized paths.
//!
//! Nothing here calls into the kernels it checks: distances, softmax and
//! effective size are recomputed with plain loops along a different
//! algebraic route.

use crate::clustering::ClusterModel;
use crate::data_io::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::prototypicality::PrototypicalityScores;
use crate::sampler::{SamplingDistribution, Temperature};

/// Scalar nested-loop distance-to-centroid and per-cluster min-max
/// normalization, `f64` throughout.
pub fn oracle_scores(embeddings: &EmbeddingMatrix, model: &ClusterModel) -> Result<PrototypicalityScores> {
    let n = embeddings.n_samples();
    let dim = embeddings.dim();
    if dim != model.dim() || n != model.n_samples() {
        return Err(Error::Shape(format!(
            "embeddings {n}x{dim} vs model with {} assignments of dim {}",
            model.n_samples(),
            model.dim()
        )));
    }
    let k = model.k();
    let data = embeddings.data();
    let centroids = model.centroids();
    let assignments = model.assignments();

    let mut raw = vec![0.0f64; n];
    for i in 0..n {
        let c = assignments[i] as usize;
        if c >= k {
            return Err(Error::Corrupt(format!("sample {i} assigned to cluster {c} but k = {k}")));
        }
        let mut acc = 0.0f64;
        for j in 0..dim {
            let diff = data[i * dim + j] as f64 - centroids[c * dim + j] as f64;
            acc += diff * diff;
        }
        raw[i] = acc.sqrt();
    }

    let mut lo = vec![0.0f64; k];
    let mut hi = vec![0.0f64; k];
    for c in 0..k {
        let mut first = true;
        for i in 0..n {
            if assignments[i] as usize != c {
                continue;
            }
            if first {
                lo[c] = raw[i];
                hi[c] = raw[i];
                first = false;
            } else {
                if raw[i] < lo[c] {
                    lo[c] = raw[i];
                }
                if raw[i] > hi[c] {
                    hi[c] = raw[i];
                }
            }
        }
    }

    let mut normalized = vec![0.0f32; n];
    for i in 0..n {
        let c = assignments[i] as usize;
        let range = hi[c] - lo[c];
        if range > 0.0 {
            normalized[i] = ((raw[i] - lo[c]) / range) as f32;
        }
    }
    PrototypicalityScores::from_parts(
        normalized,
        raw.iter().map(|&r| r as f32).collect(),
        assignments.to_vec(),
        lo,
        hi,
    )
}

/// Exact selection probability of every category under a uniform slot and a
/// uniform coin, read off the alias table slot by slot.
pub fn oracle_alias_mass(dist: &SamplingDistribution) -> Vec<f64> {
    let table = dist.table();
    let n = table.len();
    let mut mass = vec![0.0f64; n];
    for slot in 0..n {
        let keep = table.thresholds()[slot].clamp(0.0, 1.0);
        mass[slot] += keep / n as f64;
        mass[table.aliases()[slot] as usize] += (1.0 - keep) / n as f64;
    }
    mass
}

/// Softmax via pairwise differences: `P_i = 1 / sum_j exp((d_i - d_j) / tau)`.
/// Quadratic in the number of samples.
pub fn oracle_softmax(normalized: &[f32], tau: Temperature) -> Vec<f64> {
    let n = normalized.len();
    match tau {
        Temperature::Infinite => vec![1.0 / n as f64; n],
        Temperature::Finite(t) => (0..n)
            .map(|i| {
                let mut denom = 0.0f64;
                for j in 0..n {
                    denom += ((normalized[i] as f64 - normalized[j] as f64) / t).exp();
                }
                1.0 / denom
            })
            .collect(),
    }
}

/// Expected unique count via repeated multiplication of `(1 - p)`, one
/// factor per draw. Linear in `n_draws`; meant for small fixtures.
pub fn oracle_effective_size(probs: &[f64], n_draws: usize) -> f64 {
    let mut total = 0.0f64;
    for &p in probs {
        let mut miss = 1.0f64;
        for _ in 0..n_draws {
            miss *= 1.0 - p;
        }
        total += 1.0 - miss;
    }
    total
}
