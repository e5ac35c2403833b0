//! Mini-batch k-means, the Davies-Bouldin validity index, and automatic
//! selection of the cluster count.

mod kmeans;
pub mod persist;
mod select;
mod validity;

use serde::{Deserialize, Serialize};

use crate::data_io::EmbeddingMatrix;
use crate::error::{Error, Result};

pub use kmeans::fit_minibatch_kmeans;
pub use select::{select_k, KSweep, SweepEntry};
pub use validity::{davies_bouldin, DaviesBouldin};

/// Size of the uniformly subsampled pool used by k-means++ seeding.
pub const INIT_POOL_SIZE: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum InitMethod {
    #[default]
    #[serde(rename = "kmeans++")]
    KMeansPlusPlus,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KMeansConfig {
    pub k: usize,
    pub batch_size: usize,
    /// Number of full passes over the data.
    pub max_iters: usize,
    /// Convergence threshold on the largest centroid shift of a pass,
    /// relative to the RMS distance of the data to its mean.
    pub tol: f64,
    pub seed: u64,
    pub init: InitMethod,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        KMeansConfig {
            k: 8,
            batch_size: 1024,
            max_iters: 100,
            tol: 1e-4,
            seed: 0,
            init: InitMethod::KMeansPlusPlus,
        }
    }
}

impl KMeansConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::Config(format!("k must be >= 2, got {}", self.k)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be >= 1".into()));
        }
        if !(self.tol >= 0.0 && self.tol.is_finite()) {
            return Err(Error::Config(format!("tol must be finite and >= 0, got {}", self.tol)));
        }
        Ok(())
    }
}

/// A frozen clustering: `k` centroids plus the nearest-centroid assignment of
/// every sample it was fitted on.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    k: usize,
    dim: usize,
    centroids: Vec<f32>,
    assignments: Vec<u32>,
    counts: Vec<u64>,
    config: Option<KMeansConfig>,
}

impl ClusterModel {
    /// Assembles a model from stored parts, checking shapes and recounting
    /// cluster sizes.
    pub fn from_parts(
        k: usize,
        dim: usize,
        centroids: Vec<f32>,
        assignments: Vec<u32>,
        config: Option<KMeansConfig>,
    ) -> Result<Self> {
        if k == 0 || dim == 0 {
            return Err(Error::Corrupt(format!("k = {k}, dim = {dim}")));
        }
        if centroids.len() != k * dim {
            return Err(Error::Corrupt(format!(
                "expected {} centroid values, found {}",
                k * dim,
                centroids.len()
            )));
        }
        if centroids.iter().any(|v| !v.is_finite()) {
            return Err(Error::Corrupt("non-finite centroid".into()));
        }
        let mut counts = vec![0u64; k];
        for (i, &a) in assignments.iter().enumerate() {
            let slot = counts.get_mut(a as usize).ok_or_else(|| {
                Error::Corrupt(format!("sample {i} assigned to cluster {a} but k = {k}"))
            })?;
            *slot += 1;
        }
        Ok(ClusterModel {
            k,
            dim,
            centroids,
            assignments,
            counts,
            config,
        })
    }

    /// Builds a model for a given partition, placing each centroid at the
    /// mean of its members. Empty clusters get a zero centroid.
    pub fn from_assignments(
        embeddings: &EmbeddingMatrix,
        assignments: Vec<u32>,
        k: usize,
    ) -> Result<Self> {
        if assignments.len() != embeddings.n_samples() {
            return Err(Error::Shape(format!(
                "{} assignments for {} samples",
                assignments.len(),
                embeddings.n_samples()
            )));
        }
        let dim = embeddings.dim();
        let mut sums = vec![0.0f64; k * dim];
        let mut counts = vec![0u64; k];
        for (row, &a) in embeddings.rows().zip(&assignments) {
            let a = a as usize;
            if a >= k {
                return Err(Error::Corrupt(format!("cluster {a} >= k = {k}")));
            }
            counts[a] += 1;
            for (s, &x) in sums[a * dim..(a + 1) * dim].iter_mut().zip(row) {
                *s += f64::from(x);
            }
        }
        let centroids = sums
            .chunks_exact(dim)
            .zip(&counts)
            .flat_map(|(s, &c)| {
                s.iter()
                    .map(move |&v| if c == 0 { 0.0 } else { (v / c as f64) as f32 })
            })
            .collect();
        ClusterModel::from_parts(k, dim, centroids, assignments, None)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_samples(&self) -> usize {
        self.assignments.len()
    }

    pub fn centroids(&self) -> &[f32] {
        &self.centroids
    }

    pub fn centroid(&self, c: usize) -> &[f32] {
        &self.centroids[c * self.dim..(c + 1) * self.dim]
    }

    pub fn assignments(&self) -> &[u32] {
        &self.assignments
    }

    pub fn per_cluster_counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn config(&self) -> Option<&KMeansConfig> {
        self.config.as_ref()
    }

    /// Clusters left without members after the final assignment pass.
    pub fn empty_clusters(&self) -> Vec<usize> {
        (0..self.k).filter(|&c| self.counts[c] == 0).collect()
    }

    pub fn non_empty(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }

    pub(crate) fn check_against(&self, embeddings: &EmbeddingMatrix) -> Result<()> {
        if embeddings.dim() != self.dim {
            return Err(Error::Shape(format!(
                "embeddings have dim {}, model has dim {}",
                embeddings.dim(),
                self.dim
            )));
        }
        if embeddings.n_samples() != self.assignments.len() {
            return Err(Error::Shape(format!(
                "embeddings have {} samples, model has {} assignments",
                embeddings.n_samples(),
                self.assignments.len()
            )));
        }
        Ok(())
    }

    /// Mean squared distance of every sample to its assigned centroid.
    pub fn inertia(&self, embeddings: &EmbeddingMatrix) -> Result<f64> {
        self.check_against(embeddings)?;
        let total: f64 = embeddings
            .rows()
            .zip(&self.assignments)
            .map(|(row, &a)| sq_dist(row, self.centroid(a as usize)))
            .sum();
        Ok(total / self.n_samples() as f64)
    }
}

/// Squared Euclidean distance accumulated in `f64`.
#[inline]
pub(crate) fn sq_dist(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = f64::from(x) - f64::from(y);
            d * d
        })
        .sum()
}

/// Index and squared distance of the nearest centroid; lowest index wins ties.
#[inline]
pub(crate) fn nearest(row: &[f32], centroids: &[f32], dim: usize) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, mu) in centroids.chunks_exact(dim).enumerate() {
        let d = sq_dist(row, mu);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}
