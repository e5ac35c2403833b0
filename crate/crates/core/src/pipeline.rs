//! The `cluster -> score -> schedule -> sample -> verify` steps, each reading
//! and writing artifacts under the configured output directory.

use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::persist::{load_model, save_model, ModelSidecar};
use crate::clustering::{davies_bouldin, fit_minibatch_kmeans, select_k, ClusterModel};
use crate::config::PipelineConfig;
use crate::data_io::{load_embeddings, save_indices, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::oracles;
use crate::prototypicality::{self, save_scores, score, ScoresSidecar};
use crate::runtime::CurriculumSampler;
use crate::sampler::{self, Temperature};
use crate::schedule::{self, build_schedule, save_schedule, CurriculumSchedule};

pub const EPOCH_DIR: &str = "epochs";
pub const SWEEP_FILE: &str = "k_sweep.json";
pub const VERIFY_FILE: &str = "verify.json";

pub const SCORE_TOLERANCE: f64 = 1e-6;
pub const ALIAS_TOLERANCE: f64 = 1e-12;
pub const Z_THRESHOLD: f64 = 3.0;

const VERIFY_SEED_SALT: u64 = 0x5645_5249_4659;

pub fn epoch_file_name(epoch: usize) -> String {
    format!("epoch_{epoch:04}.idx")
}

fn load_input(cfg: &PipelineConfig) -> Result<EmbeddingMatrix> {
    let m = load_embeddings(&cfg.embeddings_path, cfg.format)?;
    Ok(if cfg.normalize_l2 { m.l2_normalized() } else { m })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub k: usize,
    /// `None` for an infinite index.
    pub db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub k: usize,
    pub db: Option<f64>,
    pub seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Vec<SweepRow>>,
}

pub fn run_cluster(cfg: &PipelineConfig) -> Result<ClusterReport> {
    cfg.validate()?;
    let started = Instant::now();
    let embeddings = load_input(cfg)?;
    let base = cfg.kmeans_config();

    let (model, db, sweep): (ClusterModel, Option<f64>, Option<Vec<SweepRow>>) = match cfg.k_sweep {
        Some(range) => {
            let result = select_k(&embeddings, range.k_min, range.k_max, &base)?;
            let rows: Vec<SweepRow> = result
                .entries
                .iter()
                .map(|(&k, e)| SweepRow {
                    k,
                    db: Some(e.db.index).filter(|v| v.is_finite()),
                })
                .collect();
            let best = result.into_best();
            (best.model, Some(best.db.index), Some(rows))
        }
        None => {
            let model = fit_minibatch_kmeans(&embeddings, &base)?;
            let db = match davies_bouldin(&embeddings, &model) {
                Ok(db) => Some(db.index),
                Err(Error::UndefinedIndex { non_empty }) => {
                    log::warn!("Davies-Bouldin undefined with {non_empty} non-empty cluster(s)");
                    None
                }
                Err(e) => return Err(e),
            };
            (model, db, None)
        }
    };

    let sidecar = ModelSidecar::describe(&model, db, Some(cfg.hash()));
    save_model(&cfg.output_dir, &model, &sidecar)?;
    if let Some(rows) = &sweep {
        write_json(&cfg.output_dir.join(SWEEP_FILE), rows)?;
    }
    Ok(ClusterReport {
        k: model.k(),
        db: sidecar.db,
        seconds: started.elapsed().as_secs_f64(),
        sweep,
    })
}

pub fn run_score(cfg: &PipelineConfig) -> Result<ScoresSidecar> {
    let embeddings = load_input(cfg)?;
    let (model, _) = load_model(&cfg.output_dir)?;
    let scores = score(&embeddings, &model)?;
    let sidecar = ScoresSidecar::describe(&scores, Some(cfg.hash()));
    save_scores(&cfg.output_dir, &scores, &sidecar)?;
    Ok(sidecar)
}

pub fn run_schedule(cfg: &PipelineConfig) -> Result<CurriculumSchedule> {
    let (scores, _) = prototypicality::load_scores(&cfg.output_dir)?;
    let spec = cfg.schedule_spec(scores.len());
    let mut schedule = build_schedule(&scores, &spec, cfg.master_seed)?;
    schedule.config_hash = Some(cfg.hash());
    save_schedule(&cfg.output_dir, &schedule)?;
    Ok(schedule)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpochSelection {
    One(usize),
    All,
}

/// Writes `epochs/epoch_XXXX.idx` for the selected epochs.
pub fn run_sample(cfg: &PipelineConfig, which: EpochSelection) -> Result<Vec<PathBuf>> {
    let sampler = CurriculumSampler::open(&cfg.output_dir)?;
    if sampler.schedule().master_seed != cfg.master_seed {
        return Err(Error::Config(format!(
            "schedule was built with master_seed {}, config has {}; rebuild the schedule",
            sampler.schedule().master_seed,
            cfg.master_seed
        )));
    }
    let epochs: Vec<usize> = match which {
        EpochSelection::One(e) if e >= sampler.total_epochs() => {
            return Err(Error::Config(format!(
                "epoch {e} out of range for a {}-epoch schedule",
                sampler.total_epochs()
            )))
        }
        EpochSelection::One(e) => vec![e],
        EpochSelection::All => (0..sampler.total_epochs()).collect(),
    };
    let dir = cfg.output_dir.join(EPOCH_DIR);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    epochs
        .par_iter()
        .map(|&epoch| {
            let indices = sampler.epoch_indices(epoch)?;
            let path = dir.join(epoch_file_name(epoch));
            save_indices(&path, &indices)?;
            Ok(path)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectiveSizeCheck {
    pub epoch: usize,
    pub tau: f64,
    pub analytic: f64,
    pub monte_carlo_mean: f64,
    pub monte_carlo_stderr: f64,
    pub z: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub passed: bool,
    pub failures: Vec<String>,
    pub score_max_abs_error: Option<f64>,
    pub score_tolerance: f64,
    pub alias_max_abs_error: f64,
    pub alias_tolerance: f64,
    pub trials: usize,
    pub z_threshold: f64,
    pub effective_size: Vec<EffectiveSizeCheck>,
}

/// Re-derives scores, alias masses and effective sizes through the oracle
/// paths and compares them with the stored artifacts.
pub fn run_verify(cfg: &PipelineConfig, trials: usize) -> Result<VerifyReport> {
    if trials == 0 {
        return Err(Error::Config("trials must be >= 1".into()));
    }
    let embeddings = load_input(cfg)?;
    let (model, _) = load_model(&cfg.output_dir)?;
    let schedule = schedule::load_schedule(&cfg.output_dir)?;
    let mut failures = Vec::new();

    let stored = match prototypicality::load_scores(&cfg.output_dir) {
        Ok((s, _)) => Some(s),
        Err(e @ Error::Io { .. }) => return Err(e),
        Err(e) => {
            failures.push(format!("scores artifact unreadable: {e}"));
            None
        }
    };
    let reference = oracles::oracle_scores(&embeddings, &model)?;

    let mut score_err = None;
    if let Some(stored) = &stored {
        if stored.len() != reference.len() {
            failures.push(format!(
                "scores cover {} samples, embeddings have {}",
                stored.len(),
                reference.len()
            ));
        } else {
            if stored.cluster_of() != reference.cluster_of() {
                failures.push("stored cluster ids differ from model assignments".into());
            }
            let err = stored
                .normalized()
                .iter()
                .zip(reference.normalized())
                .map(|(&a, &b)| (f64::from(a) - f64::from(b)).abs())
                .fold(0.0, f64::max);
            if err > SCORE_TOLERANCE {
                failures.push(format!("normalized scores differ from oracle by {err:.3e}"));
            }
            score_err = Some(err);
        }
    }

    // Distribution checks run on the oracle scores when the stored ones are
    // unusable.
    let scores = match &stored {
        Some(s) if s.len() == reference.len() => s,
        _ => &reference,
    };
    let t = schedule.total_epochs;
    let mut epochs = vec![0, t / 2, t - 1];
    epochs.dedup();

    let mut alias_err = 0.0f64;
    let mut checks = Vec::new();
    for epoch in epochs {
        let entry = schedule.entry(epoch)?;
        let dist = sampler::build_distribution(scores, Temperature::new(entry.tau)?)?;
        let mass = oracles::oracle_alias_mass(&dist);
        alias_err = mass
            .iter()
            .zip(dist.probs())
            .map(|(a, b)| (a - b).abs())
            .fold(alias_err, f64::max);

        let analytic = schedule::effective_size(dist.probs(), schedule.n_draws)?;
        let mc = schedule::monte_carlo_effective_size(
            &dist,
            schedule.n_draws,
            trials,
            cfg.master_seed ^ VERIFY_SEED_SALT,
        )?;
        let z = mc.z_score(analytic);
        if z.abs() > Z_THRESHOLD {
            failures.push(format!("epoch {epoch}: analytic effective size {analytic:.3} is {z:.2} standard errors from Monte-Carlo mean {:.3}", mc.mean));
        }
        checks.push(EffectiveSizeCheck {
            epoch,
            tau: entry.tau,
            analytic,
            monte_carlo_mean: mc.mean,
            monte_carlo_stderr: mc.stderr,
            z: Some(z).filter(|z| z.is_finite()),
        });
    }
    if alias_err > ALIAS_TOLERANCE {
        failures.push(format!("alias table mass differs from probabilities by {alias_err:.3e}"));
    }

    let report = VerifyReport {
        passed: failures.is_empty(),
        failures,
        score_max_abs_error: score_err,
        score_tolerance: SCORE_TOLERANCE,
        alias_max_abs_error: alias_err,
        alias_tolerance: ALIAS_TOLERANCE,
        trials,
        z_threshold: Z_THRESHOLD,
        effective_size: checks,
    };
    write_json(&cfg.output_dir.join(VERIFY_FILE), &report)?;
    Ok(report)
}

fn write_json<T: Serialize>(path: &std::path::Path, value: &T) -> Result<()> {
    let json = serde_json::to_string_pretty(value).expect("report serializes");
    fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
}
