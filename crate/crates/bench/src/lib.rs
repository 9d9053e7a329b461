//! Shared fixtures for the criterion benchmarks.

use socialvec::synth::{generate, SynthConfig};
use socialvec::{build_contexts, ContextCorpus, CorpusOptions, EmbeddingModel, EntityVocabulary, KeyedVectors, Threshold, TrainConfig};

/// A planted-community corpus with `num_users` users and every followed
/// entity in the vocabulary.
pub fn community_corpus(num_users: usize) -> (EntityVocabulary, ContextCorpus) {
    let config = SynthConfig {
        num_users,
        ..SynthConfig::default_benchmark()
    };
    let graph = generate(&config).expect("benchmark config is valid").graph();
    let vocab = graph.compute_popularity().select_entities(Threshold::at_least(1));
    let corpus = build_contexts(&graph, &vocab, CorpusOptions::default()).expect("corpus builds");
    (vocab, corpus)
}

/// Randomly initialised vectors for `rows` entities, for query benchmarks
/// that do not care about training quality.
pub fn random_vectors(rows: usize, dim: usize) -> KeyedVectors {
    let vocab = EntityVocabulary::from_counts((0..rows).map(|i| (format!("e{i:06}"), 1u64)));
    let config = TrainConfig {
        dim,
        ..TrainConfig::default()
    };
    EmbeddingModel::init(vocab, config).expect("valid model").keyed_vectors()
}
