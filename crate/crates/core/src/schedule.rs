//! Effective dataset size and temperature annealing.
//!
//! The effective size of an epoch of `n` with-replacement draws from `P` is
//! the expected number of distinct samples seen:
//! `sum_i 1 - (1 - P_i)^n`. With `n = N` draws from a uniform distribution
//! the fraction `1 - (1 - 1/N)^N` tends to `1 - 1/e` as `N` grows, which is
//! the ceiling every schedule ramps toward.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prototypicality::PrototypicalityScores;
use crate::sampler::{self, stream, EpochDrawSpec, SamplingDistribution, Temperature};

pub const SCHEDULE_FILE: &str = "schedule.json";
pub const SCHEDULE_CSV_FILE: &str = "schedule.csv";

/// Fixed block size for the ordered parallel reduction in [`effective_size`].
const REDUCE_BLOCK: usize = 8192;

/// `1 - 1/e`, the large-N limit of the uniform effective fraction.
pub fn uniform_limit() -> f64 {
    1.0 - (-1.0f64).exp()
}

/// Expected number of distinct indices in `n_draws` i.i.d. draws from `probs`.
///
/// Each term is evaluated as `-expm1(n * ln(1 - p))` to stay accurate for
/// tiny `p`. Blocks are summed in a fixed order, so the result does not
/// depend on the thread count.
pub fn effective_size(probs: &[f64], n_draws: usize) -> Result<f64> {
    if n_draws == 0 {
        return Err(Error::Domain("n_draws must be >= 1".into()));
    }
    sampler::check_probs(probs)?;
    Ok(effective_size_unchecked(probs, n_draws))
}

fn effective_size_unchecked(probs: &[f64], n_draws: usize) -> f64 {
    let n = n_draws as f64;
    let blocks: Vec<f64> = probs
        .par_chunks(REDUCE_BLOCK)
        .map(|block| block.iter().map(|&p| -(n * (-p).ln_1p()).exp_m1()).sum::<f64>())
        .collect();
    blocks.iter().sum()
}

/// Effective size divided by the number of samples, at temperature `tau`.
pub fn effective_fraction(normalized: &[f32], tau: Temperature, n_draws: usize) -> Result<f64> {
    if n_draws == 0 {
        return Err(Error::Domain("n_draws must be >= 1".into()));
    }
    let probs = sampler::softmax_probs(normalized, tau)?;
    Ok(effective_size_unchecked(&probs, n_draws) / normalized.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub trials: usize,
}

impl MonteCarloEstimate {
    /// Standardized distance of `value` from the mean. Zero spread gives 0
    /// on an exact match and infinity otherwise.
    pub fn z_score(&self, value: f64) -> f64 {
        let diff = value - self.mean;
        if self.stderr > 0.0 {
            diff / self.stderr
        } else if diff.abs() <= 1e-9 * value.abs().max(1.0) {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// Empirical unique-count mean over `trials` simulated epochs; trial `t`
/// uses the draw stream of epoch `t` under `seed`.
pub fn monte_carlo_effective_size(
    dist: &SamplingDistribution,
    n_draws: usize,
    trials: usize,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    if trials == 0 {
        return Err(Error::Config("trials must be >= 1".into()));
    }
    let n = dist.len();
    let counts: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let draws = sampler::draw_epoch(
                dist,
                &EpochDrawSpec {
                    epoch: trial,
                    n_draws,
                    master_seed: seed,
                },
            );
            let mut seen = vec![false; n];
            let mut unique = 0usize;
            for i in draws {
                let slot = &mut seen[i as usize];
                if !*slot {
                    *slot = true;
                    unique += 1;
                }
            }
            unique as f64
        })
        .collect();
    let t = trials as f64;
    let mean = counts.iter().sum::<f64>() / t;
    let stderr = if trials > 1 {
        let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (t - 1.0);
        (var / t).sqrt()
    } else {
        0.0
    };
    Ok(MonteCarloEstimate {
        mean,
        stderr,
        trials,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tau_lo: f64,
    pub tau_hi: f64,
    /// Absolute tolerance on the effective fraction.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tau_lo: 1e-4,
            tau_hi: 1e4,
            tol: 1e-4,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauSolution {
    pub tau: f64,
    pub fraction: f64,
    /// The target sat above the fraction reachable at the top of the bracket.
    pub saturated: bool,
    /// All scores were equal, so the fraction does not depend on `tau`.
    pub degenerate: bool,
    pub iterations: usize,
}

/// Finds the temperature whose effective fraction matches `target_fraction`
/// within `tol`, searching the default bracket `[1e-4, 1e4]`.
pub fn solve_tau(
    scores: &PrototypicalityScores,
    target_fraction: f64,
    n_draws: usize,
    tol: f64,
) -> Result<TauSolution> {
    solve_tau_with(
        scores.normalized(),
        target_fraction,
        n_draws,
        &SolverOptions {
            tol,
            ..SolverOptions::default()
        },
    )
}

/// Bisection on `ln(tau)`; the effective fraction is increasing in `tau`.
pub fn solve_tau_with(
    normalized: &[f32],
    target: f64,
    n_draws: usize,
    opts: &SolverOptions,
) -> Result<TauSolution> {
    if !(opts.tol > 0.0 && opts.tol.is_finite()) {
        return Err(Error::Config(format!("solver tolerance must be > 0, got {}", opts.tol)));
    }
    if !(opts.tau_lo > 0.0 && opts.tau_lo <= opts.tau_hi && opts.tau_hi.is_finite()) {
        return Err(Error::Config(format!(
            "invalid temperature bracket [{}, {}]",
            opts.tau_lo, opts.tau_hi
        )));
    }
    if !target.is_finite() {
        return Err(Error::Domain(format!("target fraction {target} is not finite")));
    }
    let fraction = |tau: f64| effective_fraction(normalized, Temperature::Finite(tau), n_draws);
    let solution = |tau, fraction, iterations| TauSolution {
        tau,
        fraction,
        saturated: false,
        degenerate: false,
        iterations,
    };

    let first = normalized.first().copied().unwrap_or(0.0);
    if normalized.iter().all(|&d| d == first) {
        let mid = (opts.tau_lo * opts.tau_hi).sqrt();
        let constant = fraction(mid)?;
        if (constant - target).abs() < opts.tol {
            log::warn!("all scores equal; effective fraction is {constant} at every temperature");
            return Ok(TauSolution {
                degenerate: true,
                ..solution(mid, constant, 0)
            });
        }
        return Err(Error::DegenerateDistribution { constant, target });
    }

    let f_lo = fraction(opts.tau_lo)?;
    if (f_lo - target).abs() < opts.tol {
        return Ok(solution(opts.tau_lo, f_lo, 0));
    }
    let f_hi = fraction(opts.tau_hi)?;
    if target < f_lo {
        return Err(Error::OutOfRange {
            target,
            low: f_lo,
            high: f_hi,
        });
    }
    if (f_hi - target).abs() < opts.tol {
        return Ok(solution(opts.tau_hi, f_hi, 0));
    }
    if target > f_hi {
        return Ok(TauSolution {
            saturated: true,
            ..solution(opts.tau_hi, f_hi, 0)
        });
    }

    let (mut a, mut b) = (opts.tau_lo.ln(), opts.tau_hi.ln());
    let mut last = solution(opts.tau_hi, f_hi, 0);
    for it in 1..=opts.max_iter {
        let tau = ((a + b) / 2.0).exp();
        let f = fraction(tau)?;
        last = solution(tau, f, it);
        if (f - target).abs() < opts.tol {
            return Ok(last);
        }
        if f < target {
            a = tau.ln();
        } else {
            b = tau.ln();
        }
    }
    log::warn!(
        "bisection stopped after {} iterations at fraction {} (target {target})",
        opts.max_iter,
        last.fraction
    );
    Ok(last)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleMode {
    /// Ramp the temperature; fractions follow.
    #[default]
    TauRange,
    /// Ramp the effective fraction; temperatures are solved for.
    EffectiveSize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleParams {
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSpec {
    pub mode: ScheduleMode,
    pub start: f64,
    pub end: f64,
    pub total_epochs: usize,
    pub n_draws: usize,
    /// Fraction tolerance handed to the temperature solver.
    pub solver_tol: f64,
}

impl ScheduleSpec {
    /// Temperature annealed from 0.07 to 0.6.
    pub fn tau_range(total_epochs: usize, n_draws: usize) -> Self {
        ScheduleSpec {
            mode: ScheduleMode::TauRange,
            start: 0.07,
            end: 0.6,
            total_epochs,
            n_draws,
            solver_tol: 1e-4,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.total_epochs == 0 {
            return Err(Error::Config("total_epochs must be >= 1".into()));
        }
        if self.n_draws == 0 {
            return Err(Error::Config("n_draws must be >= 1".into()));
        }
        if !(self.solver_tol > 0.0 && self.solver_tol.is_finite()) {
            return Err(Error::Config(format!("solver_tol must be > 0, got {}", self.solver_tol)));
        }
        let ordered = self.start > 0.0 && self.start <= self.end && self.end.is_finite();
        match self.mode {
            ScheduleMode::TauRange if !ordered => Err(Error::Config(format!(
                "tau_range needs 0 < start <= end, got [{}, {}]",
                self.start, self.end
            ))),
            ScheduleMode::EffectiveSize if !ordered || self.end > uniform_limit() + self.solver_tol => {
                Err(Error::Config(format!(
                    "effective_size needs 0 < start <= end <= 1 - 1/e, got [{}, {}]",
                    self.start, self.end
                )))
            }
            _ => Ok(()),
        }
    }

    /// Cosine ease from `start` (epoch 0) to `end` (last epoch).
    pub fn value_at(&self, epoch: usize) -> f64 {
        if self.total_epochs <= 1 {
            return self.end;
        }
        let phase = std::f64::consts::PI * epoch as f64 / (self.total_epochs - 1) as f64;
        let w = (1.0 - phase.cos()) / 2.0;
        self.start * (1.0 - w) + self.end * w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub epoch: usize,
    pub tau: f64,
    pub effective_fraction: f64,
    pub epoch_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurriculumSchedule {
    pub mode: ScheduleMode,
    pub total_epochs: usize,
    pub master_seed: u64,
    pub n_draws: usize,
    pub params: ScheduleParams,
    pub entries: Vec<ScheduleEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

impl CurriculumSchedule {
    pub fn entry(&self, epoch: usize) -> Result<&ScheduleEntry> {
        self.entries.get(epoch).ok_or_else(|| {
            Error::Config(format!(
                "epoch {epoch} out of range for a {}-epoch schedule",
                self.total_epochs
            ))
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.entries.len() != self.total_epochs || self.total_epochs == 0 {
            return Err(Error::format(
                "entries",
                format!("{} entries for {} epochs", self.entries.len(), self.total_epochs),
            ));
        }
        for (i, e) in self.entries.iter().enumerate() {
            if e.epoch != i {
                return Err(Error::format("entries", format!("entry {i} has epoch {}", e.epoch)));
            }
            if !(e.tau > 0.0 && e.tau.is_finite()) {
                return Err(Error::format("tau", format!("epoch {i} has temperature {}", e.tau)));
            }
        }
        if self.n_draws == 0 {
            return Err(Error::format("n_draws", "must be >= 1"));
        }
        Ok(())
    }

    /// `epoch,tau,effective_fraction` rows with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,tau,effective_fraction\n");
        for e in &self.entries {
            writeln!(out, "{},{},{}", e.epoch, e.tau, e.effective_fraction).unwrap();
        }
        out
    }
}

pub fn build_schedule(
    scores: &PrototypicalityScores,
    spec: &ScheduleSpec,
    master_seed: u64,
) -> Result<CurriculumSchedule> {
    spec.validate()?;
    let normalized = scores.normalized();
    let at = |epoch: usize| move |source| Error::AtEpoch {
        epoch,
        source: Box::new(source),
    };
    let entries: Vec<ScheduleEntry> = match spec.mode {
        ScheduleMode::TauRange => (0..spec.total_epochs)
            .into_par_iter()
            .map(|epoch| {
                let tau = spec.value_at(epoch);
                let effective_fraction =
                    effective_fraction(normalized, Temperature::Finite(tau), spec.n_draws).map_err(at(epoch))?;
                Ok(ScheduleEntry {
                    epoch,
                    tau,
                    effective_fraction,
                    epoch_seed: stream::epoch_seed(master_seed, epoch as u64),
                })
            })
            .collect::<Result<_>>()?,
        ScheduleMode::EffectiveSize => {
            // Targets never decrease, so each solve can start at the previous
            // temperature; that keeps temperatures monotone despite the
            // solver tolerance.
            let mut opts = SolverOptions {
                tol: spec.solver_tol,
                ..SolverOptions::default()
            };
            let mut entries = Vec::with_capacity(spec.total_epochs);
            for epoch in 0..spec.total_epochs {
                let target = spec.value_at(epoch);
                let sol = solve_tau_with(normalized, target, spec.n_draws, &opts).map_err(at(epoch))?;
                if sol.saturated {
                    log::info!("epoch {epoch}: target {target} saturates at tau = {}", sol.tau);
                }
                opts.tau_lo = sol.tau;
                entries.push(ScheduleEntry {
                    epoch,
                    tau: sol.tau,
                    effective_fraction: sol.fraction,
                    epoch_seed: stream::epoch_seed(master_seed, epoch as u64),
                });
            }
            entries
        }
    };
    Ok(CurriculumSchedule {
        mode: spec.mode,
        total_epochs: spec.total_epochs,
        master_seed,
        n_draws: spec.n_draws,
        params: ScheduleParams {
            start: spec.start,
            end: spec.end,
        },
        entries,
        config_hash: None,
    })
}

pub fn save_schedule(dir: &Path, schedule: &CurriculumSchedule) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let p = dir.join(SCHEDULE_FILE);
    let json = serde_json::to_string_pretty(schedule).expect("schedule serializes");
    fs::write(&p, json + "\n").map_err(|e| Error::io(&p, e))?;
    let p = dir.join(SCHEDULE_CSV_FILE);
    fs::write(&p, schedule.to_csv()).map_err(|e| Error::io(&p, e))
}

pub fn load_schedule(dir: &Path) -> Result<CurriculumSchedule> {
    let p = dir.join(SCHEDULE_FILE);
    let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
    let schedule: CurriculumSchedule =
        serde_json::from_str(&text).map_err(|e| Error::format("schedule.json", e.to_string()))?;
    schedule.validate()?;
    Ok(schedule)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms() {
        assert_eq!(effective_size(&[0.5, 0.5], 2).unwrap(), 1.5);
        assert_eq!(effective_size(&[1.0, 0.0], 2).unwrap(), 1.0);
    }

    #[test]
    fn uniform_million_matches_limit_row() {
        let n = 1_000_000;
        let probs = vec![1.0 / n as f64; n];
        let f = effective_size(&probs, n).unwrap() / n as f64;
        assert!((f - 0.632).abs() < 5e-4);
        let closed = 1.0 - (1.0 - 1.0 / n as f64).powf(n as f64);
        assert!((f - closed).abs() < 1e-9);
    }

    #[test]
    fn invalid_probabilities_rejected() {
        assert!(matches!(effective_size(&[1.5, -0.5], 3), Err(Error::Domain(_))));
        assert!(matches!(effective_size(&[0.5, 0.5], 0), Err(Error::Domain(_))));
    }

    #[test]
    fn monte_carlo_point_mass() {
        let dist = SamplingDistribution::from_probs(vec![1.0, 0.0]).unwrap();
        let est = monte_carlo_effective_size(&dist, 17, 50, 3).unwrap();
        assert_eq!((est.mean, est.stderr), (1.0, 0.0));
        assert_eq!(est.z_score(1.0), 0.0);
        assert!(monte_carlo_effective_size(&dist, 17, 0, 3).is_err());
    }

    #[test]
    fn monte_carlo_two_point_uniform() {
        let dist = SamplingDistribution::from_probs(vec![0.5, 0.5]).unwrap();
        let est = monte_carlo_effective_size(&dist, 2, 10_000, 5).unwrap();
        assert!(est.z_score(1.5).abs() < 3.0, "{est:?}");
    }

    #[test]
    fn saturation_above_uniform_limit() {
        let scores: Vec<f32> = (0..5000).map(|i| (i % 97) as f32 / 96.0).collect();
        let sol = solve_tau_with(&scores, uniform_limit() + 0.01, scores.len(), &SolverOptions::default()).unwrap();
        assert!(sol.saturated);
        assert_eq!(sol.tau, 1e4);
    }

    #[test]
    fn below_bracket_is_out_of_range() {
        let scores: Vec<f32> = (0..1000).map(|i| i as f32 / 999.0).collect();
        match solve_tau_with(&scores, 1e-6, 1000, &SolverOptions::default()) {
            Err(Error::OutOfRange { low, high, .. }) => assert!(low < high),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn degenerate_scores() {
        let scores = vec![0.3f32; 100];
        let uniform = 1.0 - (1.0 - 0.01f64).powi(100);
        let sol = solve_tau_with(&scores, uniform, 100, &SolverOptions::default()).unwrap();
        assert!(sol.degenerate);
        assert!((sol.tau - 1.0).abs() < 1e-12);
        assert!(matches!(
            solve_tau_with(&scores, 0.2, 100, &SolverOptions::default()),
            Err(Error::DegenerateDistribution { .. })
        ));
    }

    #[test]
    fn cosine_ramp_endpoints_and_midpoint() {
        let spec = ScheduleSpec::tau_range(800, 10);
        assert_eq!(spec.value_at(0), 0.07);
        assert_eq!(spec.value_at(799), 0.6);
        // Epoch 400 sits just past the half-way phase pi/2.
        let w = (1.0 - (std::f64::consts::PI * 400.0 / 799.0).cos()) / 2.0;
        assert!((spec.value_at(400) - (0.07 + 0.53 * w)).abs() < 1e-15);
        assert!((spec.value_at(400) - 0.335).abs() < 2e-3);
        let single = ScheduleSpec { total_epochs: 1, ..spec };
        assert_eq!(single.value_at(0), 0.6);
    }

    #[test]
    fn schedule_spec_validation() {
        let good = ScheduleSpec::tau_range(10, 10);
        assert!(good.validate().is_ok());
        assert!(ScheduleSpec { start: 0.0, ..good }.validate().is_err());
        assert!(ScheduleSpec { start: 0.7, ..good }.validate().is_err());
        assert!(ScheduleSpec { total_epochs: 0, ..good }.validate().is_err());
        let eff = ScheduleSpec { mode: ScheduleMode::EffectiveSize, start: 0.1, end: 0.7, ..good };
        assert!(eff.validate().is_err());
        assert!(ScheduleSpec { end: uniform_limit(), ..eff }.validate().is_ok());
    }

    #[test]
    fn schedule_json_shape() {
        let scores = PrototypicalityScores::from_normalized(vec![0.0, 0.5, 1.0, 0.25]).unwrap();
        let s = build_schedule(&scores, &ScheduleSpec::tau_range(3, 4), 11).unwrap();
        let v: serde_json::Value = serde_json::to_value(&s).unwrap();
        for key in ["mode", "total_epochs", "master_seed", "n_draws", "params", "entries"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["mode"], "tau_range");
        assert_eq!(v["entries"][0]["epoch_seed"], stream::epoch_seed(11, 0));
        assert!(s.to_csv().starts_with("epoch,tau,effective_fraction\n0,0.07,"));
    }

    #[test]
    fn out_of_range_epoch_reports_epoch() {
        let scores = PrototypicalityScores::from_normalized((0..200).map(|i| i as f32 / 199.0).collect()).unwrap();
        let spec = ScheduleSpec {
            mode: ScheduleMode::EffectiveSize,
            start: 1e-6,
            end: 0.5,
            total_epochs: 4,
            n_draws: 200,
            solver_tol: 1e-7,
        };
        assert!(matches!(build_schedule(&scores, &spec, 0), Err(Error::AtEpoch { epoch: 0, .. })));
    }
}
