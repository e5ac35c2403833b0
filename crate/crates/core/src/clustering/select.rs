use std::collections::BTreeMap;

use rayon::prelude::*;

use super::{davies_bouldin, fit_minibatch_kmeans, ClusterModel, DaviesBouldin, KMeansConfig};
use crate::data_io::EmbeddingMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct SweepEntry {
    pub model: ClusterModel,
    pub db: DaviesBouldin,
}

#[derive(Debug, Clone)]
pub struct KSweep {
    pub best_k: usize,
    pub entries: BTreeMap<usize, SweepEntry>,
}

impl KSweep {
    pub fn best(&self) -> &SweepEntry {
        &self.entries[&self.best_k]
    }

    pub fn into_best(mut self) -> SweepEntry {
        self.entries.remove(&self.best_k).unwrap()
    }
}

/// Fits one model per `k` in `[k_min, k_max]` (seed `base.seed ^ k`) and picks
/// the one with the lowest Davies-Bouldin index; smaller `k` wins ties.
pub fn select_k(
    embeddings: &EmbeddingMatrix,
    k_min: usize,
    k_max: usize,
    base: &KMeansConfig,
) -> Result<KSweep> {
    let n = embeddings.n_samples();
    if !(2 <= k_min && k_min <= k_max && k_max <= n) {
        return Err(Error::Config(format!(
            "k sweep requires 2 <= k_min <= k_max <= n_samples, got [{k_min}, {k_max}] with n = {n}"
        )));
    }
    let fitted: Vec<(usize, SweepEntry)> = (k_min..=k_max)
        .into_par_iter()
        .map(|k| {
            let config = KMeansConfig {
                k,
                seed: base.seed ^ k as u64,
                ..base.clone()
            };
            let model = fit_minibatch_kmeans(embeddings, &config)?;
            let db = davies_bouldin(embeddings, &model)?;
            log::info!("k = {k}: Davies-Bouldin {:.6}", db.index);
            Ok((k, SweepEntry { model, db }))
        })
        .collect::<Result<_>>()?;

    let mut best_k = k_min;
    let mut best = f64::INFINITY;
    for (k, entry) in &fitted {
        if entry.db.index < best {
            best = entry.db.index;
            best_k = *k;
        }
    }
    Ok(KSweep {
        best_k,
        entries: fitted.into_iter().collect(),
    })
}
