//! On-disk form of a [`ClusterModel`]: a JSON sidecar plus two binary blocks.
//!
//! ```text
//! centroids.bin   "PROTOCEN" | u32 version | u32 k | u32 dim | k*dim f32
//! assignments.bin "PROTOASN" | u64 n | n u32 cluster ids
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ClusterModel, KMeansConfig};
use crate::error::{Error, Result};
use crate::wire::{self, Reader, Writer};

pub const CENTROID_MAGIC: &[u8; 8] = b"PROTOCEN";
pub const ASSIGNMENT_MAGIC: &[u8; 8] = b"PROTOASN";

pub const SIDECAR_FILE: &str = "cluster.json";
pub const CENTROID_FILE: &str = "centroids.bin";
pub const ASSIGNMENT_FILE: &str = "assignments.bin";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSidecar {
    pub k: usize,
    pub dim: usize,
    pub n_samples: usize,
    pub seed: Option<u64>,
    pub config: Option<KMeansConfig>,
    pub per_cluster_counts: Vec<u64>,
    pub empty_clusters: Vec<usize>,
    /// `None` when the index is infinite or undefined.
    pub db: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

impl ModelSidecar {
    pub fn describe(model: &ClusterModel, db: Option<f64>, config_hash: Option<String>) -> Self {
        ModelSidecar {
            k: model.k(),
            dim: model.dim(),
            n_samples: model.n_samples(),
            seed: model.config().map(|c| c.seed),
            config: model.config().cloned(),
            per_cluster_counts: model.per_cluster_counts().to_vec(),
            empty_clusters: model.empty_clusters(),
            db: db.filter(|v| v.is_finite()),
            config_hash,
        }
    }
}

pub fn encode_centroids(model: &ClusterModel) -> Vec<u8> {
    let mut w = Writer::with_capacity(20 + model.centroids().len() * 4);
    w.bytes(CENTROID_MAGIC)
        .u32(wire::FORMAT_VERSION)
        .u32(model.k() as u32)
        .u32(model.dim() as u32);
    for &v in model.centroids() {
        w.f32(v);
    }
    w.finish()
}

pub fn decode_centroids(bytes: &[u8]) -> Result<(usize, usize, Vec<f32>)> {
    let mut r = Reader::new(bytes);
    r.magic(CENTROID_MAGIC)?;
    r.version()?;
    let k = r.u32("k")? as usize;
    let dim = r.u32("dim")? as usize;
    r.expect_records((k * dim) as u64, 4)?;
    Ok((k, dim, r.rest().chunks_exact(4).map(wire::f32_le).collect()))
}

pub fn encode_assignments(assignments: &[u32]) -> Vec<u8> {
    let mut w = Writer::with_capacity(16 + assignments.len() * 4);
    w.bytes(ASSIGNMENT_MAGIC).u64(assignments.len() as u64);
    for &a in assignments {
        w.u32(a);
    }
    w.finish()
}

pub fn decode_assignments(bytes: &[u8]) -> Result<Vec<u32>> {
    let mut r = Reader::new(bytes);
    r.magic(ASSIGNMENT_MAGIC)?;
    let n = r.u64("n")?;
    r.expect_records(n, 4)?;
    Ok(r.rest().chunks_exact(4).map(wire::u32_le).collect())
}

pub fn save_model(dir: &Path, model: &ClusterModel, sidecar: &ModelSidecar) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let json = serde_json::to_string_pretty(sidecar).expect("sidecar serializes");
    let p = dir.join(SIDECAR_FILE);
    fs::write(&p, json + "\n").map_err(|e| Error::io(&p, e))?;
    let p = dir.join(CENTROID_FILE);
    fs::write(&p, encode_centroids(model)).map_err(|e| Error::io(&p, e))?;
    let p = dir.join(ASSIGNMENT_FILE);
    fs::write(&p, encode_assignments(model.assignments())).map_err(|e| Error::io(&p, e))
}

pub fn load_model(dir: &Path) -> Result<(ClusterModel, ModelSidecar)> {
    let p = dir.join(SIDECAR_FILE);
    let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
    let sidecar: ModelSidecar = serde_json::from_str(&text)
        .map_err(|e| Error::format("cluster.json", e.to_string()))?;
    let (k, dim, centroids) = decode_centroids(&wire::read_file(&dir.join(CENTROID_FILE))?)?;
    let assignments = decode_assignments(&wire::read_file(&dir.join(ASSIGNMENT_FILE))?)?;
    if k != sidecar.k || dim != sidecar.dim || assignments.len() != sidecar.n_samples {
        return Err(Error::Corrupt(format!(
            "sidecar (k={}, dim={}, n={}) disagrees with binary blocks (k={k}, dim={dim}, n={})",
            sidecar.k,
            sidecar.dim,
            sidecar.n_samples,
            assignments.len()
        )));
    }
    let model = ClusterModel::from_parts(k, dim, centroids, assignments, sidecar.config.clone())?;
    Ok((model, sidecar))
}
