//! Embedding training: negative-sampling SGNS and CBOW over set contexts.

mod config;
mod matrix;
mod model;
mod sampler;
mod trainer;
mod update;

pub use config::{Mode, TrainConfig};
pub use matrix::{Matrix, RowStore};
pub use model::EmbeddingModel;
pub use sampler::{build_sampler, subsample_keep_prob, SamplerTable};
pub use trainer::{scheduled_units, train, train_with_progress, EpochSummary, TrainReport};
pub use update::{cbow_step, sgns_step, Workspace, SIGMOID_CLIP};
