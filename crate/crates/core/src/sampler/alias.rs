use crate::error::{Error, Result};

/// Walker/Vose alias table: slot `s` keeps itself with probability
/// `threshold[s]` and otherwise yields `alias[s]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AliasTable {
    threshold: Vec<f64>,
    alias: Vec<u32>,
}

impl AliasTable {
    /// Builds the table for `probs`, which must be nonnegative and sum to
    /// (approximately) one.
    pub fn new(probs: &[f64]) -> Result<Self> {
        let n = probs.len();
        if n == 0 {
            return Err(Error::Domain("alias table needs at least one category".into()));
        }
        if n > u32::MAX as usize {
            return Err(Error::Domain(format!("{n} categories exceed the u32 alias range")));
        }
        let mut scaled: Vec<f64> = probs.iter().map(|&p| p * n as f64).collect();
        let mut threshold = vec![1.0; n];
        let mut alias: Vec<u32> = (0..n as u32).collect();
        let (mut small, mut large): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| scaled[i] < 1.0);
        while let (Some(&s), Some(&l)) = (small.last(), large.last()) {
            small.pop();
            threshold[s] = scaled[s];
            alias[s] = l as u32;
            scaled[l] = (scaled[l] + scaled[s]) - 1.0;
            if scaled[l] < 1.0 {
                large.pop();
                small.push(l);
            }
        }
        // Leftovers differ from 1 only by rounding.
        for i in small.into_iter().chain(large) {
            threshold[i] = 1.0;
            alias[i] = i as u32;
        }
        Ok(AliasTable { threshold, alias })
    }

    /// Table that returns every slot unchanged.
    pub fn uniform(n: usize) -> Self {
        AliasTable {
            threshold: vec![1.0; n],
            alias: (0..n as u32).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.threshold.len()
    }

    pub fn is_empty(&self) -> bool {
        self.threshold.is_empty()
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.threshold
    }

    pub fn aliases(&self) -> &[u32] {
        &self.alias
    }

    /// Resolves a uniform slot and a uniform `[0, 1)` coin to a category.
    #[inline]
    pub fn pick(&self, slot: usize, coin: f64) -> usize {
        if coin < self.threshold[slot] {
            slot
        } else {
            self.alias[slot] as usize
        }
    }
}
