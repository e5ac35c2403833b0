//! Embedding matrices, synthetic fixtures and epoch index files.
//!
//! Binary embedding layout (`PROTOEMB`):
//!
//! ```text
//! magic "PROTOEMB" | u32 version = 1 | u64 n_samples | u32 dim | u32 reserved = 0
//! n_samples * dim little-endian f32, row-major
//! ```
//!
//! Index layout (`PROTOIDX`): magic, u32 version = 1, u64 count, then `count`
//! little-endian u64 sample indices.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::wire::{self, Reader, Writer};

pub const EMBEDDING_MAGIC: &[u8; 8] = b"PROTOEMB";
pub const INDEX_MAGIC: &[u8; 8] = b"PROTOIDX";

const EMBEDDING_HEADER_LEN: usize = 8 + 4 + 8 + 4 + 4;

/// Dense row-major `n_samples x dim` matrix of finite `f32` features.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    n_samples: usize,
    dim: usize,
    data: Vec<f32>,
    sample_ids: Option<Vec<String>>,
}

impl EmbeddingMatrix {
    pub fn new(n_samples: usize, dim: usize, data: Vec<f32>) -> Result<Self> {
        if n_samples == 0 {
            return Err(Error::format("n_samples", "must be at least 1"));
        }
        if dim == 0 {
            return Err(Error::format("dim", "must be at least 1"));
        }
        let expected = n_samples as u64 * dim as u64;
        if data.len() as u64 != expected {
            return Err(Error::LengthMismatch {
                expected,
                actual: data.len() as u64,
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation {
                row: pos / dim,
                message: format!("non-finite value {} in column {}", data[pos], pos % dim),
            });
        }
        Ok(EmbeddingMatrix {
            n_samples,
            dim,
            data,
            sample_ids: None,
        })
    }

    pub fn with_sample_ids(mut self, ids: Vec<String>) -> Result<Self> {
        if ids.len() != self.n_samples {
            return Err(Error::LengthMismatch {
                expected: self.n_samples as u64,
                actual: ids.len() as u64,
            });
        }
        let mut seen = HashSet::with_capacity(ids.len());
        for (row, id) in ids.iter().enumerate() {
            if !seen.insert(id.as_str()) {
                return Err(Error::Validation {
                    row,
                    message: format!("duplicate sample id {id:?}"),
                });
            }
        }
        self.sample_ids = Some(ids);
        Ok(self)
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn sample_ids(&self) -> Option<&[String]> {
        self.sample_ids.as_deref()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f32> {
        self.data.chunks_exact(self.dim)
    }

    /// Returns a copy with every row scaled to unit L2 norm. All-zero rows are
    /// left untouched.
    pub fn l2_normalized(&self) -> Self {
        let mut data = self.data.clone();
        for row in data.chunks_exact_mut(self.dim) {
            let norm = row
                .iter()
                .map(|&v| f64::from(v) * f64::from(v))
                .sum::<f64>()
                .sqrt();
            if norm > 0.0 {
                for v in row.iter_mut() {
                    *v = (f64::from(*v) / norm) as f32;
                }
            }
        }
        EmbeddingMatrix {
            data,
            ..self.clone()
        }
    }

    /// Returns a copy with every value multiplied by `alpha`.
    pub fn scaled(&self, alpha: f32) -> Result<Self> {
        EmbeddingMatrix::new(
            self.n_samples,
            self.dim,
            self.data.iter().map(|v| v * alpha).collect(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingFormat {
    Binary,
    Csv,
}

impl FromStr for EmbeddingFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary" | "bin" => Ok(EmbeddingFormat::Binary),
            "csv" => Ok(EmbeddingFormat::Csv),
            other => Err(Error::Config(format!("unknown embedding format {other:?}"))),
        }
    }
}

pub fn load_embeddings(path: &Path, format: EmbeddingFormat) -> Result<EmbeddingMatrix> {
    match format {
        EmbeddingFormat::Binary => decode_embeddings(&wire::read_file(path)?),
        EmbeddingFormat::Csv => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            parse_csv(&text)
        }
    }
}

pub fn save_embeddings(path: &Path, m: &EmbeddingMatrix) -> Result<()> {
    let mut w = Writer::with_capacity(EMBEDDING_HEADER_LEN + m.data.len() * 4);
    w.bytes(EMBEDDING_MAGIC)
        .u32(wire::FORMAT_VERSION)
        .u64(m.n_samples as u64)
        .u32(m.dim as u32)
        .u32(0);
    for &v in &m.data {
        w.f32(v);
    }
    w.write_to(path)
}

/// Writes one row per line using the shortest representation that parses
/// back to the same `f32`.
pub fn save_embeddings_csv(path: &Path, m: &EmbeddingMatrix) -> Result<()> {
    let mut out = String::with_capacity(m.data.len() * 12);
    for row in m.rows() {
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            write!(out, "{v}").unwrap();
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn decode_embeddings(bytes: &[u8]) -> Result<EmbeddingMatrix> {
    let mut r = Reader::new(bytes);
    r.magic(EMBEDDING_MAGIC)?;
    r.version()?;
    let n = r.u64("n_samples")?;
    let dim = r.u32("dim")?;
    let reserved = r.u32("reserved")?;
    if n == 0 {
        return Err(Error::format("n_samples", "must be at least 1"));
    }
    if dim == 0 {
        return Err(Error::format("dim", "must be at least 1"));
    }
    if reserved != 0 {
        return Err(Error::format("reserved", format!("expected 0, found {reserved}")));
    }
    let expected = n
        .checked_mul(u64::from(dim))
        .ok_or_else(|| Error::format("n_samples", "n_samples * dim overflows"))?;
    r.expect_records(expected, 4)?;
    let data = r.rest().chunks_exact(4).map(wire::f32_le).collect();
    EmbeddingMatrix::new(n as usize, dim as usize, data)
}

fn parse_csv(text: &str) -> Result<EmbeddingMatrix> {
    let mut data = Vec::new();
    let mut dim = None;
    let mut n = 0usize;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let before = data.len();
        for field in line.split(',') {
            let v: f64 = field.trim().parse().map_err(|_| Error::Validation {
                row: n,
                message: format!("cannot parse {:?} as a number", field.trim()),
            })?;
            let narrowed = v as f32;
            if !narrowed.is_finite() {
                return Err(Error::Validation {
                    row: n,
                    message: format!("non-finite value {field:?}"),
                });
            }
            data.push(narrowed);
        }
        let width = data.len() - before;
        match dim {
            None => dim = Some(width),
            Some(d) if d != width => {
                return Err(Error::Validation {
                    row: n,
                    message: format!("expected {d} columns, found {width}"),
                })
            }
            _ => {}
        }
        n += 1;
    }
    let dim = dim.ok_or_else(|| Error::format("n_samples", "csv file contains no rows"))?;
    EmbeddingMatrix::new(n, dim, data)
}

/// Parameters for a Gaussian-blob test fixture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_clusters: usize,
    pub samples_per_cluster: usize,
    pub dim: usize,
    /// Minimum distance between distinct generating centroids.
    pub separation: f64,
    /// Per-coordinate standard deviation around each centroid.
    pub spread: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_clusters == 0 || self.samples_per_cluster == 0 || self.dim == 0 {
            return Err(Error::Config(
                "n_clusters, samples_per_cluster and dim must be at least 1".into(),
            ));
        }
        if !(self.separation.is_finite() && self.separation >= 0.0) {
            return Err(Error::Config(format!(
                "separation must be finite and >= 0, got {}",
                self.separation
            )));
        }
        if !(self.spread.is_finite() && self.spread > 0.0) {
            return Err(Error::Config(format!(
                "spread must be finite and > 0, got {}",
                self.spread
            )));
        }
        Ok(())
    }

    /// Generating centroid of cluster `c`: `separation * (1 + c / dim)` along
    /// axis `c mod dim`. Clusters sharing an axis sit at increasing radii, so
    /// distinct centroids stay at least `separation` apart.
    pub fn centroid(&self, c: usize) -> Vec<f64> {
        let mut mu = vec![0.0; self.dim];
        mu[c % self.dim] = self.separation * (1 + c / self.dim) as f64;
        mu
    }

    /// Generating cluster of row `i` (rows are stored cluster by cluster).
    pub fn label_of(&self, row: usize) -> usize {
        row / self.samples_per_cluster
    }

    pub fn labels(&self) -> Vec<usize> {
        (0..self.n_clusters * self.samples_per_cluster)
            .map(|i| self.label_of(i))
            .collect()
    }
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<EmbeddingMatrix> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.spread).expect("spread validated");
    let n = spec.n_clusters * spec.samples_per_cluster;
    let mut data = Vec::with_capacity(n * spec.dim);
    for c in 0..spec.n_clusters {
        let mu = spec.centroid(c);
        for _ in 0..spec.samples_per_cluster {
            data.extend(mu.iter().map(|m| (m + noise.sample(&mut rng)) as f32));
        }
    }
    EmbeddingMatrix::new(n, spec.dim, data)
}

pub fn encode_indices(indices: &[u64]) -> Vec<u8> {
    let mut w = Writer::with_capacity(20 + indices.len() * 8);
    w.bytes(INDEX_MAGIC)
        .u32(wire::FORMAT_VERSION)
        .u64(indices.len() as u64);
    for &i in indices {
        w.u64(i);
    }
    w.finish()
}

pub fn decode_indices(bytes: &[u8]) -> Result<Vec<u64>> {
    let mut r = Reader::new(bytes);
    r.magic(INDEX_MAGIC)?;
    r.version()?;
    let count = r.u64("count")?;
    r.expect_records(count, 8)?;
    Ok(r.rest().chunks_exact(8).map(wire::u64_le).collect())
}

pub fn save_indices(path: &Path, indices: &[u64]) -> Result<()> {
    fs::write(path, encode_indices(indices)).map_err(|e| Error::io(path, e))
}

pub fn load_indices(path: &Path) -> Result<Vec<u64>> {
    decode_indices(&wire::read_file(path)?)
}
