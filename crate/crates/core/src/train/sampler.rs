use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::EntityVocabulary;

/// Noise distribution over dense ids, proportional to `count^power`.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplerTable {
    probs: Vec<f64>,
    cumulative: Vec<f64>,
}

impl SamplerTable {
    pub fn from_counts(counts: &[u64], power: f64) -> Self {
        let weights: Vec<f64> = counts.iter().map(|&c| (c as f64).powf(power)).collect();
        let total: f64 = weights.iter().sum();
        let probs: Vec<f64> = if total > 0.0 {
            weights.iter().map(|w| w / total).collect()
        } else {
            vec![1.0 / counts.len() as f64; counts.len()]
        };
        let mut cumulative = Vec::with_capacity(probs.len());
        let mut acc = 0.0;
        for p in &probs {
            acc += p;
            cumulative.push(acc);
        }
        if let Some(last) = cumulative.last_mut() {
            *last = 1.0;
        }
        SamplerTable { probs, cumulative }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probability(&self, id: u32) -> f64 {
        self.probs[id as usize]
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    /// Draws one dense id. Panics on an empty table.
    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        let r: f64 = rng.random();
        let idx = self.cumulative.partition_point(|&c| c <= r);
        idx.min(self.cumulative.len() - 1) as u32
    }
}

pub fn build_sampler(vocab: &EntityVocabulary, power: f64) -> SamplerTable {
    SamplerTable::from_counts(vocab.counts(), power)
}

/// Probability of keeping one occurrence of an entity whose share of all
/// corpus tokens is `frequency`, under threshold `t`: `min(1, sqrt(t/f))`.
pub fn subsample_keep_prob(frequency: f64, t: f64) -> Result<f64> {
    if !(frequency > 0.0 && frequency <= 1.0) {
        return Err(Error::Domain(format!("frequency must lie in (0, 1], got {frequency}")));
    }
    if !(t > 0.0) {
        return Err(Error::Domain(format!("threshold must be positive, got {t}")));
    }
    Ok((t / frequency).sqrt().min(1.0))
}
