//! Social entity embeddings.
//!
//! Popular accounts of a follower graph are treated as entities, and the
//! set of entities each user follows forms one unordered context. Entity
//! vectors are learned with negative-sampling skip-gram (or CBOW) over all
//! co-followed pairs, then probed with similarity, analogy and political
//! orientation queries or used as features for user trait classifiers.
//!
//! The pipeline, module by module:
//!
//! * [`graph`]: edge-list ingestion, popularity counts, entity selection
//! * [`corpus`]: per-user entity sets with user identity removed
//! * [`train`]: the embedding trainer
//! * [`vectors`]: keyed embedding tables and their file formats
//! * [`query`]: neighbors, analogies, political orientation, rank metrics
//! * [`traits`]: user vectors, logistic classifiers, ROC AUC, PMI
//! * [`synth`]: planted-structure graph generator and recovery checks

pub mod corpus;
pub mod error;
pub mod graph;
pub mod query;
pub mod synth;
pub mod train;
pub mod traits;
pub mod vectors;

pub use corpus::{build_contexts, corpus_stats, ContextCorpus, CorpusOptions, CorpusStats};
pub use error::{Error, Result};
pub use graph::{EntityVocabulary, FollowGraph, PopularityTable, Threshold};
pub use query::{PoliticalAnchors, PollGroundTruth};
pub use train::{train, EmbeddingModel, Mode, TrainConfig};
pub use vectors::{EmbeddingFormat, KeyedVectors};
