//! JSON pipeline configuration.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::clustering::{InitMethod, KMeansConfig};
use crate::data_io::EmbeddingFormat;
use crate::error::{Error, Result};
use crate::schedule::{ScheduleMode, ScheduleSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub embeddings_path: PathBuf,
    #[serde(default = "default_format")]
    pub format: EmbeddingFormat,
    /// Scale every embedding to unit L2 norm before clustering.
    #[serde(default)]
    pub normalize_l2: bool,
    #[serde(default)]
    pub kmeans: KMeansSection,
    #[serde(default)]
    pub k_sweep: Option<KSweepRange>,
    #[serde(default)]
    pub schedule: ScheduleSection,
    #[serde(default)]
    pub master_seed: u64,
    pub output_dir: PathBuf,
}

fn default_format() -> EmbeddingFormat {
    EmbeddingFormat::Binary
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KMeansSection {
    pub k: usize,
    pub batch_size: usize,
    pub max_iters: usize,
    pub tol: f64,
    /// Falls back to `master_seed`.
    pub seed: Option<u64>,
    pub init: InitMethod,
}

impl Default for KMeansSection {
    fn default() -> Self {
        let d = KMeansConfig::default();
        KMeansSection {
            k: d.k,
            batch_size: d.batch_size,
            max_iters: d.max_iters,
            tol: d.tol,
            seed: None,
            init: d.init,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KSweepRange {
    pub k_min: usize,
    pub k_max: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleSection {
    pub mode: ScheduleMode,
    pub start: f64,
    pub end: f64,
    pub total_epochs: usize,
    /// Draws per epoch; defaults to the number of samples.
    pub n_draws: Option<usize>,
    pub solver_tol: f64,
}

impl Default for ScheduleSection {
    fn default() -> Self {
        ScheduleSection {
            mode: ScheduleMode::TauRange,
            start: 0.07,
            end: 0.6,
            total_epochs: 800,
            n_draws: None,
            solver_tol: 1e-4,
        }
    }
}

impl PipelineConfig {
    /// Reads a config file. Relative paths inside it are resolved against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: PipelineConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.embeddings_path = resolve(base, &cfg.embeddings_path);
        cfg.output_dir = resolve(base, &cfg.output_dir);
        Ok(cfg)
    }

    pub fn kmeans_config(&self) -> KMeansConfig {
        KMeansConfig {
            k: self.kmeans.k,
            batch_size: self.kmeans.batch_size,
            max_iters: self.kmeans.max_iters,
            tol: self.kmeans.tol,
            seed: self.kmeans.seed.unwrap_or(self.master_seed),
            init: self.kmeans.init,
        }
    }

    pub fn schedule_spec(&self, n_samples: usize) -> ScheduleSpec {
        ScheduleSpec {
            mode: self.schedule.mode,
            start: self.schedule.start,
            end: self.schedule.end,
            total_epochs: self.schedule.total_epochs,
            n_draws: self.schedule.n_draws.unwrap_or(n_samples),
            solver_tol: self.schedule.solver_tol,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let km = self.kmeans_config();
        match self.k_sweep {
            Some(r) if r.k_min < 2 || r.k_min > r.k_max => {
                return Err(Error::Config(format!(
                    "k_sweep needs 2 <= k_min <= k_max, got [{}, {}]",
                    r.k_min, r.k_max
                )))
            }
            Some(_) => KMeansConfig { k: 2, ..km }.validate()?,
            None => km.validate()?,
        }
        self.schedule_spec(1).validate()
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(json.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}
