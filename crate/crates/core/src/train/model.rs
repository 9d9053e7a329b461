use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::TrainConfig;
use super::matrix::Matrix;
use super::update::{cbow_step, sgns_step};
use crate::error::Result;
use crate::graph::EntityVocabulary;
use crate::vectors::{EmbeddingFormat, KeyedVectors};

/// Target (input) and context (output) vectors for every entity.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    pub target: Matrix<f32>,
    pub context: Matrix<f32>,
    pub vocab: EntityVocabulary,
    pub config: TrainConfig,
}

impl EmbeddingModel {
    /// Target rows uniform in `[-0.5/dim, 0.5/dim)` from the config seed,
    /// context rows zero.
    pub fn init(vocab: EntityVocabulary, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let (rows, dim) = (vocab.len(), config.dim);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let scale = 1.0 / dim as f32;
        let data = (0..rows * dim)
            .map(|_| (rng.random::<f32>() - 0.5) * scale)
            .collect();
        Ok(EmbeddingModel {
            target: Matrix::from_vec(rows, dim, data),
            context: Matrix::zeros(rows, dim),
            vocab,
            config,
        })
    }

    pub fn dim(&self) -> usize {
        self.target.dim()
    }

    pub fn len(&self) -> usize {
        self.target.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.target.rows() == 0
    }

    pub fn is_finite(&self) -> bool {
        self.target.is_finite() && self.context.is_finite()
    }

    /// Target vectors keyed by account id.
    pub fn keyed_vectors(&self) -> KeyedVectors {
        KeyedVectors::new(self.vocab.entities().to_vec(), self.target.clone())
            .expect("vocabulary ids are unique")
    }

    pub fn save_embeddings(&self, path: impl AsRef<Path>, format: EmbeddingFormat) -> Result<()> {
        self.keyed_vectors().save(path, format)
    }

    /// SGNS step on one `(target, context)` pair. Returns the loss before
    /// the update.
    pub fn sgns_update(&mut self, target: u32, context: u32, negatives: &[u32], lr: f32) -> Result<f64> {
        sgns_step(&mut self.target, &mut self.context, target, context, negatives, lr)
    }

    /// CBOW step predicting `target` from the mean of `context`. Returns the
    /// loss before the update.
    pub fn cbow_update(&mut self, target: u32, context: &[u32], negatives: &[u32], lr: f32) -> Result<f64> {
        cbow_step(&mut self.target, &mut self.context, target, context, negatives, lr)
    }
}
