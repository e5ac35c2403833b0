use serde::{Deserialize, Serialize};

use super::{sq_dist, ClusterModel};
use crate::data_io::EmbeddingMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DaviesBouldin {
    /// Lower is better. `+inf` when two non-empty clusters share a centroid.
    pub index: f64,
    pub coincident_centroids: bool,
    /// Number of non-empty clusters the index was averaged over.
    pub clusters: usize,
}

/// Davies-Bouldin index over the non-empty clusters of `model`.
///
/// Scatter `s_k` is the mean Euclidean distance of cluster `k`'s members to
/// its centroid; the index averages `max_{j != k} (s_k + s_j) / |mu_k - mu_j|`.
pub fn davies_bouldin(embeddings: &EmbeddingMatrix, model: &ClusterModel) -> Result<DaviesBouldin> {
    model.check_against(embeddings)?;
    let live: Vec<usize> = (0..model.k())
        .filter(|&c| model.per_cluster_counts()[c] > 0)
        .collect();
    if live.len() < 2 {
        return Err(Error::UndefinedIndex {
            non_empty: live.len(),
        });
    }

    let mut scatter = vec![0.0f64; model.k()];
    for (row, &a) in embeddings.rows().zip(model.assignments()) {
        scatter[a as usize] += sq_dist(row, model.centroid(a as usize)).sqrt();
    }
    for &c in &live {
        scatter[c] /= model.per_cluster_counts()[c] as f64;
    }

    let mut coincident = false;
    let mut total = 0.0;
    for &a in &live {
        let mut worst = 0.0f64;
        for &b in &live {
            if a == b {
                continue;
            }
            let gap = sq_dist(model.centroid(a), model.centroid(b)).sqrt();
            let ratio = if gap > 0.0 {
                (scatter[a] + scatter[b]) / gap
            } else {
                coincident = true;
                f64::INFINITY
            };
            worst = worst.max(ratio);
        }
        total += worst;
    }
    if coincident {
        log::warn!("Davies-Bouldin: coincident centroids among non-empty clusters");
    }
    Ok(DaviesBouldin {
        index: total / live.len() as f64,
        coincident_centroids: coincident,
        clusters: live.len(),
    })
}
