//! Temperature-controlled softmax over prototypicality scores and
//! with-replacement epoch draws.
//!
//! `P(i) = exp(-d_i / tau) / sum_j exp(-d_j / tau)`: low temperatures favour
//! prototypical (low-score) samples, `tau -> inf` is uniform sampling.

mod alias;
pub mod stream;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prototypicality::PrototypicalityScores;

pub use alias::AliasTable;

/// Draw counts below this are generated on the calling thread.
const PAR_MIN_DRAWS: usize = 1 << 14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Temperature {
    Finite(f64),
    Infinite,
}

impl Temperature {
    /// Accepts any positive value; `+inf` maps to [`Temperature::Infinite`].
    pub fn new(tau: f64) -> Result<Self> {
        if tau == f64::INFINITY {
            Ok(Temperature::Infinite)
        } else if tau.is_finite() && tau > 0.0 {
            Ok(Temperature::Finite(tau))
        } else {
            Err(Error::Domain(format!("temperature must be > 0, got {tau}")))
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Temperature::Finite(t) => t,
            Temperature::Infinite => f64::INFINITY,
        }
    }
}

impl FromStr for Temperature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "+inf" => Ok(Temperature::Infinite),
            other => {
                let v: f64 = other
                    .parse()
                    .map_err(|_| Error::Domain(format!("cannot parse temperature {s:?}")))?;
                Temperature::new(v)
            }
        }
    }
}

impl fmt::Display for Temperature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Temperature::Finite(t) => write!(f, "{t}"),
            Temperature::Infinite => f.write_str("inf"),
        }
    }
}

/// Immutable categorical distribution over samples with an O(1) draw table.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingDistribution {
    tau: Temperature,
    probs: Vec<f64>,
    table: AliasTable,
}

impl SamplingDistribution {
    pub fn tau(&self) -> Temperature {
        self.tau
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn table(&self) -> &AliasTable {
        &self.table
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Wraps an explicit probability vector (nonnegative, summing to 1 within
    /// 1e-9) without a temperature interpretation.
    pub fn from_probs(probs: Vec<f64>) -> Result<Self> {
        check_probs(&probs)?;
        let table = AliasTable::new(&probs)?;
        Ok(SamplingDistribution {
            tau: Temperature::Infinite,
            probs,
            table,
        })
    }
}

pub(crate) fn check_probs(probs: &[f64]) -> Result<()> {
    if probs.is_empty() {
        return Err(Error::Domain("empty probability vector".into()));
    }
    if let Some(i) = probs.iter().position(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::Domain(format!("probability {} at index {i} outside [0, 1]", probs[i])));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Domain(format!("probabilities sum to {total}, not 1")));
    }
    Ok(())
}

/// Softmax of `-d / tau` in `f64`, shifted so the smallest score maps to
/// `exp(0)`. Infinite temperature yields exactly `1 / N` everywhere.
pub fn softmax_probs(normalized: &[f32], tau: Temperature) -> Result<Vec<f64>> {
    if normalized.is_empty() {
        return Err(Error::Domain("cannot build a distribution over zero samples".into()));
    }
    let n = normalized.len();
    let tau = match tau {
        Temperature::Infinite => return Ok(vec![1.0 / n as f64; n]),
        Temperature::Finite(t) if t > 0.0 && t.is_finite() => t,
        Temperature::Finite(t) => {
            return Err(Error::Domain(format!("temperature must be > 0, got {t}")))
        }
    };
    let min = normalized
        .iter()
        .map(|&d| f64::from(d))
        .fold(f64::INFINITY, f64::min);
    let mut probs: Vec<f64> = normalized
        .iter()
        .map(|&d| (-(f64::from(d) - min) / tau).exp())
        .collect();
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    Ok(probs)
}

pub fn build_distribution(scores: &PrototypicalityScores, tau: Temperature) -> Result<SamplingDistribution> {
    build_from_normalized(scores.normalized(), tau)
}

pub fn build_from_normalized(normalized: &[f32], tau: Temperature) -> Result<SamplingDistribution> {
    let probs = softmax_probs(normalized, tau)?;
    let table = match tau {
        Temperature::Infinite => AliasTable::uniform(probs.len()),
        Temperature::Finite(_) => AliasTable::new(&probs)?,
    };
    Ok(SamplingDistribution { tau, probs, table })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpochDrawSpec {
    pub epoch: usize,
    pub n_draws: usize,
    pub master_seed: u64,
}

/// Sample index of draw `t` in the stream keyed by `key`.
#[inline]
pub fn draw_one(dist: &SamplingDistribution, key: u64, t: u64) -> u64 {
    let n = dist.len() as u64;
    let slot = stream::bounded(stream::word(key, 2 * t), n) as usize;
    let coin = stream::unit_f64(stream::word(key, 2 * t + 1));
    dist.table.pick(slot, coin) as u64
}

/// `n_draws` i.i.d. draws; draw `t` depends only on
/// `(master_seed, epoch, t)`.
pub fn draw_epoch(dist: &SamplingDistribution, spec: &EpochDrawSpec) -> Vec<u64> {
    let key = stream::epoch_seed(spec.master_seed, spec.epoch as u64);
    let n = spec.n_draws as u64;
    if spec.n_draws >= PAR_MIN_DRAWS {
        (0..n).into_par_iter().map(|t| draw_one(dist, key, t)).collect()
    } else {
        (0..n).map(|t| draw_one(dist, key, t)).collect()
    }
}
