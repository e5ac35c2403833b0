//! Epoch index streams served from persisted scores and schedule.

use std::path::Path;

use crate::error::{Error, Result};
use crate::prototypicality::{load_scores, PrototypicalityScores};
use crate::sampler::{self, stream, EpochDrawSpec, SamplingDistribution, Temperature};
use crate::schedule::{load_schedule, CurriculumSchedule, ScheduleMode};

/// Immutable (scores, schedule) pair. Everything is read eagerly, so the
/// source files may disappear after [`CurriculumSampler::open`] returns.
#[derive(Debug, Clone)]
pub struct CurriculumSampler {
    scores: PrototypicalityScores,
    schedule: CurriculumSchedule,
}

impl CurriculumSampler {
    pub fn open(dir: &Path) -> Result<Self> {
        let (scores, _) = load_scores(dir)?;
        let schedule = load_schedule(dir)?;
        CurriculumSampler::new(scores, schedule)
    }

    pub fn new(scores: PrototypicalityScores, schedule: CurriculumSchedule) -> Result<Self> {
        schedule.validate()?;
        for e in &schedule.entries {
            if e.epoch_seed != stream::epoch_seed(schedule.master_seed, e.epoch as u64) {
                return Err(Error::format(
                    "epoch_seed",
                    format!("epoch {} seed does not derive from master_seed", e.epoch),
                ));
            }
        }
        Ok(CurriculumSampler { scores, schedule })
    }

    pub fn n_samples(&self) -> usize {
        self.scores.len()
    }

    pub fn total_epochs(&self) -> usize {
        self.schedule.total_epochs
    }

    pub fn n_draws(&self) -> usize {
        self.schedule.n_draws
    }

    pub fn mode(&self) -> ScheduleMode {
        self.schedule.mode
    }

    /// Temperatures of the first and last scheduled epochs.
    pub fn tau_range(&self) -> (f64, f64) {
        let e = &self.schedule.entries;
        (e[0].tau, e[e.len() - 1].tau)
    }

    pub fn scores(&self) -> &PrototypicalityScores {
        &self.scores
    }

    pub fn schedule(&self) -> &CurriculumSchedule {
        &self.schedule
    }

    pub fn distribution(&self, epoch: usize) -> Result<SamplingDistribution> {
        let entry = self.schedule.entry(epoch)?;
        sampler::build_distribution(&self.scores, Temperature::new(entry.tau)?)
    }

    pub fn epoch_indices(&self, epoch: usize) -> Result<Vec<u64>> {
        let dist = self.distribution(epoch)?;
        Ok(sampler::draw_epoch(
            &dist,
            &EpochDrawSpec {
                epoch,
                n_draws: self.schedule.n_draws,
                master_seed: self.schedule.master_seed,
            },
        ))
    }
}
