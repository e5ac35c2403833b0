use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{nearest, ClusterModel, InitMethod, KMeansConfig, INIT_POOL_SIZE};
use crate::data_io::EmbeddingMatrix;
use crate::error::{Error, Result};

/// Batches smaller than this are assigned on the calling thread.
const PAR_MIN_BATCH: usize = 256;

/// Fits mini-batch k-means and freezes the result with one full
/// nearest-centroid pass.
///
/// Each pass visits every sample once in a seeded random order, split into
/// batches of `batch_size`. A centroid moves toward each assigned point with
/// learning rate `1 / (points it has absorbed so far)`. Centroids that absorb
/// nothing during a pass are reseeded at the points of the pass's last batch
/// that lie farthest from their centroids. Training stops after `max_iters`
/// passes or once a pass moves no centroid by more than `tol` times the RMS
/// spread of the data.
pub fn fit_minibatch_kmeans(
    embeddings: &EmbeddingMatrix,
    config: &KMeansConfig,
) -> Result<ClusterModel> {
    config.validate()?;
    let n = embeddings.n_samples();
    let dim = embeddings.dim();
    let k = config.k;
    if k > n {
        return Err(Error::Config(format!("k = {k} exceeds n_samples = {n}")));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut centroids = initialize(embeddings, config, &mut rng);
    let threshold = config.tol * rms_spread(embeddings);

    let mut counts = vec![0u64; k];
    let mut order: Vec<usize> = (0..n).collect();
    for pass in 0..config.max_iters {
        order.shuffle(&mut rng);
        let previous = centroids.clone();
        let mut hits = vec![0u64; k];
        for batch in order.chunks(config.batch_size) {
            let assigned = assign_batch(embeddings, batch, &centroids, dim);
            for (&i, &(c, _)) in batch.iter().zip(&assigned) {
                counts[c] += 1;
                hits[c] += 1;
                let lr = 1.0 / counts[c] as f64;
                for (m, &x) in centroids[c * dim..(c + 1) * dim]
                    .iter_mut()
                    .zip(embeddings.row(i))
                {
                    *m += lr * (f64::from(x) - *m);
                }
            }
        }

        let reseeded = reseed_empty(embeddings, &order, config.batch_size, &hits, &mut centroids, &mut counts);
        let shift = max_shift(&previous, &centroids, dim);
        log::debug!("pass {pass}: max centroid shift {shift:.3e}, reseeded {reseeded}");
        if reseeded == 0 && shift <= threshold {
            break;
        }
    }

    let frozen: Vec<f32> = centroids.iter().map(|&v| v as f32).collect();
    let assignments = assign_all(embeddings, &frozen);
    let model = ClusterModel::from_parts(k, dim, frozen, assignments, Some(config.clone()))?;
    let empty = model.empty_clusters();
    if !empty.is_empty() {
        log::warn!("{} cluster(s) empty after final assignment: {:?}", empty.len(), empty);
    }
    Ok(model)
}

/// Final full assignment pass against the frozen `f32` centroids.
pub(crate) fn assign_all(embeddings: &EmbeddingMatrix, centroids: &[f32]) -> Vec<u32> {
    let dim = embeddings.dim();
    (0..embeddings.n_samples())
        .into_par_iter()
        .map(|i| nearest(embeddings.row(i), centroids, dim).0 as u32)
        .collect()
}

fn assign_batch(
    embeddings: &EmbeddingMatrix,
    batch: &[usize],
    centroids: &[f64],
    dim: usize,
) -> Vec<(usize, f64)> {
    let one = |&i: &usize| nearest_f64(embeddings.row(i), centroids, dim);
    if batch.len() >= PAR_MIN_BATCH {
        batch.par_iter().map(one).collect()
    } else {
        batch.iter().map(one).collect()
    }
}

fn nearest_f64(row: &[f32], centroids: &[f64], dim: usize) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, mu) in centroids.chunks_exact(dim).enumerate() {
        let d: f64 = row
            .iter()
            .zip(mu)
            .map(|(&x, &m)| {
                let t = f64::from(x) - m;
                t * t
            })
            .sum();
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn initialize(embeddings: &EmbeddingMatrix, config: &KMeansConfig, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = embeddings.n_samples();
    let pool_size = n.min(INIT_POOL_SIZE.max(config.k));
    let pool: Vec<usize> = if pool_size == n {
        (0..n).collect()
    } else {
        let mut p = index::sample(rng, n, pool_size).into_vec();
        p.sort_unstable();
        p
    };
    let chosen = match config.init {
        InitMethod::Random => index::sample(rng, pool.len(), config.k)
            .into_iter()
            .map(|j| pool[j])
            .collect(),
        InitMethod::KMeansPlusPlus => kmeans_plus_plus(embeddings, &pool, config.k, rng),
    };
    chosen
        .iter()
        .flat_map(|&i| embeddings.row(i).iter().map(|&v| f64::from(v)))
        .collect()
}

/// D²-weighted seeding over `pool`. Falls back to a uniform pick among
/// unchosen points once every remaining point coincides with a seed.
fn kmeans_plus_plus(
    embeddings: &EmbeddingMatrix,
    pool: &[usize],
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<usize> {
    let mut taken = vec![false; pool.len()];
    let first = rng.random_range(0..pool.len());
    taken[first] = true;
    let mut chosen = vec![pool[first]];
    let mut d2: Vec<f64> = pool
        .par_iter()
        .map(|&i| super::sq_dist(embeddings.row(i), embeddings.row(pool[first])))
        .collect();

    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (j, &w) in d2.iter().enumerate() {
                acc += w;
                if acc > target && w > 0.0 {
                    pick = Some(j);
                    break;
                }
            }
            // Rounding can leave `target` just above the final partial sum.
            pick.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).unwrap())
        } else {
            let free: Vec<usize> = (0..pool.len()).filter(|&j| !taken[j]).collect();
            free[rng.random_range(0..free.len())]
        };
        taken[next] = true;
        chosen.push(pool[next]);
        let seed_row = embeddings.row(pool[next]);
        d2.par_iter_mut().zip(pool.par_iter()).for_each(|(d, &i)| {
            *d = d.min(super::sq_dist(embeddings.row(i), seed_row));
        });
    }
    chosen
}

fn reseed_empty(
    embeddings: &EmbeddingMatrix,
    order: &[usize],
    batch_size: usize,
    hits: &[u64],
    centroids: &mut [f64],
    counts: &mut [u64],
) -> usize {
    let empty: Vec<usize> = (0..hits.len()).filter(|&c| hits[c] == 0).collect();
    if empty.is_empty() {
        return 0;
    }
    let dim = embeddings.dim();
    let last = order.chunks(batch_size).last().unwrap_or(&[]);
    let mut by_distance: Vec<(usize, f64)> = last
        .iter()
        .map(|&i| (i, nearest_f64(embeddings.row(i), centroids, dim).1))
        .collect();
    // Farthest first; stable sort keeps batch order among equal distances.
    by_distance.sort_by(|a, b| b.1.total_cmp(&a.1));
    let mut reseeded = 0;
    for (&c, &(i, _)) in empty.iter().zip(&by_distance) {
        for (m, &x) in centroids[c * dim..(c + 1) * dim]
            .iter_mut()
            .zip(embeddings.row(i))
        {
            *m = f64::from(x);
        }
        counts[c] = 0;
        reseeded += 1;
    }
    reseeded
}

fn max_shift(a: &[f64], b: &[f64], dim: usize) -> f64 {
    a.chunks_exact(dim)
        .zip(b.chunks_exact(dim))
        .map(|(x, y)| {
            x.iter()
                .zip(y)
                .map(|(p, q)| (p - q) * (p - q))
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max)
}

/// Root-mean-square distance of the samples to their mean.
fn rms_spread(embeddings: &EmbeddingMatrix) -> f64 {
    let dim = embeddings.dim();
    let n = embeddings.n_samples() as f64;
    let mut mean = vec![0.0f64; dim];
    for row in embeddings.rows() {
        for (m, &x) in mean.iter_mut().zip(row) {
            *m += f64::from(x);
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let ss: f64 = embeddings
        .rows()
        .map(|row| {
            row.iter()
                .zip(&mean)
                .map(|(&x, m)| (f64::from(x) - m).powi(2))
                .sum::<f64>()
        })
        .sum();
    (ss / n).sqrt()
}
