//! Per-sample prototypicality: distance to the assigned centroid, min-max
//! normalized within each cluster so that 0 marks the most central member
//! and 1 the most peripheral.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::ClusterModel;
use crate::data_io::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::wire::{self, Reader, Writer};

pub const SCORES_MAGIC: &[u8; 8] = b"PROTOSCR";
pub const SCORES_FILE: &str = "scores.bin";
pub const SCORES_SIDECAR_FILE: &str = "scores.json";
pub const HISTOGRAM_BINS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct PrototypicalityScores {
    normalized: Vec<f32>,
    raw: Vec<f32>,
    cluster_of: Vec<u32>,
    per_cluster_min: Vec<f64>,
    per_cluster_max: Vec<f64>,
}

impl PrototypicalityScores {
    /// Validates and assembles scores from stored parts. Empty clusters carry
    /// `0.0` for both extrema.
    pub fn from_parts(
        normalized: Vec<f32>,
        raw: Vec<f32>,
        cluster_of: Vec<u32>,
        per_cluster_min: Vec<f64>,
        per_cluster_max: Vec<f64>,
    ) -> Result<Self> {
        let n = normalized.len();
        if n == 0 {
            return Err(Error::format("n", "scores must cover at least one sample"));
        }
        if raw.len() != n || cluster_of.len() != n {
            return Err(Error::LengthMismatch {
                expected: n as u64,
                actual: raw.len().min(cluster_of.len()) as u64,
            });
        }
        let k = per_cluster_min.len();
        if per_cluster_max.len() != k {
            return Err(Error::Corrupt(format!(
                "{k} cluster minima but {} maxima",
                per_cluster_max.len()
            )));
        }
        for i in 0..n {
            let d = normalized[i];
            if !(0.0..=1.0).contains(&d) {
                return Err(Error::Validation {
                    row: i,
                    message: format!("normalized score {d} outside [0, 1]"),
                });
            }
            if !(raw[i].is_finite() && raw[i] >= 0.0) {
                return Err(Error::Validation {
                    row: i,
                    message: format!("raw distance {} is not a finite nonnegative value", raw[i]),
                });
            }
            if cluster_of[i] as usize >= k {
                return Err(Error::Corrupt(format!(
                    "sample {i} belongs to cluster {} but k = {k}",
                    cluster_of[i]
                )));
            }
        }
        Ok(PrototypicalityScores {
            normalized,
            raw,
            cluster_of,
            per_cluster_min,
            per_cluster_max,
        })
    }

    pub fn len(&self) -> usize {
        self.normalized.len()
    }

    pub fn is_empty(&self) -> bool {
        self.normalized.is_empty()
    }

    pub fn k(&self) -> usize {
        self.per_cluster_min.len()
    }

    pub fn normalized(&self) -> &[f32] {
        &self.normalized
    }

    pub fn raw(&self) -> &[f32] {
        &self.raw
    }

    pub fn cluster_of(&self) -> &[u32] {
        &self.cluster_of
    }

    pub fn per_cluster_min(&self) -> &[f64] {
        &self.per_cluster_min
    }

    pub fn per_cluster_max(&self) -> &[f64] {
        &self.per_cluster_max
    }

    /// Counts of normalized scores in `HISTOGRAM_BINS` equal bins over [0, 1];
    /// a score of exactly 1 lands in the last bin.
    pub fn histogram(&self) -> Vec<u64> {
        let mut bins = vec![0u64; HISTOGRAM_BINS];
        for &d in &self.normalized {
            let b = ((f64::from(d) * HISTOGRAM_BINS as f64) as usize).min(HISTOGRAM_BINS - 1);
            bins[b] += 1;
        }
        bins
    }

    /// Scores for a plain vector of normalized values, all in one cluster.
    /// Handy for driving the sampler without a clustering.
    pub fn from_normalized(normalized: Vec<f32>) -> Result<Self> {
        let n = normalized.len();
        let max = normalized.iter().fold(0.0f32, |a, &b| a.max(b));
        PrototypicalityScores::from_parts(
            normalized.clone(),
            normalized,
            vec![0; n],
            vec![0.0],
            vec![f64::from(max)],
        )
    }
}

/// Scores every sample against its assigned centroid.
///
/// Clusters whose members all sit at the same distance (singletons included)
/// score 0 throughout.
pub fn score(embeddings: &EmbeddingMatrix, model: &ClusterModel) -> Result<PrototypicalityScores> {
    if embeddings.dim() != model.dim() {
        return Err(Error::Shape(format!(
            "embeddings have dim {}, model has dim {}",
            embeddings.dim(),
            model.dim()
        )));
    }
    if embeddings.n_samples() != model.n_samples() {
        return Err(Error::Shape(format!(
            "embeddings have {} samples, model has {} assignments",
            embeddings.n_samples(),
            model.n_samples()
        )));
    }
    let k = model.k();
    if let Some((i, &a)) = model
        .assignments()
        .iter()
        .enumerate()
        .find(|(_, &a)| a as usize >= k)
    {
        return Err(Error::Corrupt(format!("sample {i} assigned to cluster {a} but k = {k}")));
    }

    let dist: Vec<f64> = model
        .assignments()
        .par_iter()
        .enumerate()
        .map(|(i, &a)| crate::clustering::sq_dist(embeddings.row(i), model.centroid(a as usize)).sqrt())
        .collect();

    let mut lo = vec![f64::INFINITY; k];
    let mut hi = vec![f64::NEG_INFINITY; k];
    for (&d, &a) in dist.iter().zip(model.assignments()) {
        let a = a as usize;
        lo[a] = lo[a].min(d);
        hi[a] = hi[a].max(d);
    }
    for c in 0..k {
        if lo[c] > hi[c] {
            lo[c] = 0.0;
            hi[c] = 0.0;
        }
    }

    let normalized = dist
        .iter()
        .zip(model.assignments())
        .map(|(&d, &a)| {
            let (min, max) = (lo[a as usize], hi[a as usize]);
            if max > min {
                ((d - min) / (max - min)).clamp(0.0, 1.0) as f32
            } else {
                0.0
            }
        })
        .collect();

    PrototypicalityScores::from_parts(
        normalized,
        dist.iter().map(|&d| d as f32).collect(),
        model.assignments().to_vec(),
        lo,
        hi,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoresSidecar {
    pub n_samples: usize,
    pub k: usize,
    pub per_cluster_min: Vec<f64>,
    pub per_cluster_max: Vec<f64>,
    /// Largest normalized score observed in each cluster.
    pub per_cluster_max_normalized: Vec<f32>,
    pub histogram: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

impl ScoresSidecar {
    pub fn describe(scores: &PrototypicalityScores, config_hash: Option<String>) -> Self {
        let mut max_norm = vec![0.0f32; scores.k()];
        for (&d, &c) in scores.normalized.iter().zip(&scores.cluster_of) {
            max_norm[c as usize] = max_norm[c as usize].max(d);
        }
        ScoresSidecar {
            n_samples: scores.len(),
            k: scores.k(),
            per_cluster_min: scores.per_cluster_min.clone(),
            per_cluster_max: scores.per_cluster_max.clone(),
            per_cluster_max_normalized: max_norm,
            histogram: scores.histogram(),
            config_hash,
        }
    }
}

pub fn encode_scores(scores: &PrototypicalityScores) -> Vec<u8> {
    let mut w = Writer::with_capacity(20 + scores.len() * 12);
    w.bytes(SCORES_MAGIC)
        .u32(wire::FORMAT_VERSION)
        .u64(scores.len() as u64);
    for i in 0..scores.len() {
        w.f32(scores.normalized[i])
            .f32(scores.raw[i])
            .u32(scores.cluster_of[i]);
    }
    w.finish()
}

/// Per-sample records of a `PROTOSCR` block: (normalized, raw, cluster).
pub fn decode_score_records(bytes: &[u8]) -> Result<(Vec<f32>, Vec<f32>, Vec<u32>)> {
    let mut r = Reader::new(bytes);
    r.magic(SCORES_MAGIC)?;
    r.version()?;
    let n = r.u64("n")?;
    r.expect_records(n, 12)?;
    let mut normalized = Vec::with_capacity(n as usize);
    let mut raw = Vec::with_capacity(n as usize);
    let mut cluster = Vec::with_capacity(n as usize);
    for rec in r.rest().chunks_exact(12) {
        normalized.push(wire::f32_le(&rec[0..4]));
        raw.push(wire::f32_le(&rec[4..8]));
        cluster.push(wire::u32_le(&rec[8..12]));
    }
    Ok((normalized, raw, cluster))
}

pub fn save_scores(dir: &Path, scores: &PrototypicalityScores, sidecar: &ScoresSidecar) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let p = dir.join(SCORES_FILE);
    fs::write(&p, encode_scores(scores)).map_err(|e| Error::io(&p, e))?;
    let p = dir.join(SCORES_SIDECAR_FILE);
    let json = serde_json::to_string_pretty(sidecar).expect("sidecar serializes");
    fs::write(&p, json + "\n").map_err(|e| Error::io(&p, e))
}

pub fn load_scores(dir: &Path) -> Result<(PrototypicalityScores, ScoresSidecar)> {
    let p = dir.join(SCORES_SIDECAR_FILE);
    let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
    let sidecar: ScoresSidecar = serde_json::from_str(&text)
        .map_err(|e| Error::format("scores.json", e.to_string()))?;
    let (normalized, raw, cluster) = decode_score_records(&wire::read_file(&dir.join(SCORES_FILE))?)?;
    if normalized.len() != sidecar.n_samples {
        return Err(Error::LengthMismatch {
            expected: sidecar.n_samples as u64,
            actual: normalized.len() as u64,
        });
    }
    let scores = PrototypicalityScores::from_parts(
        normalized,
        raw,
        cluster,
        sidecar.per_cluster_min.clone(),
        sidecar.per_cluster_max.clone(),
    )?;
    Ok((scores, sidecar))
}
