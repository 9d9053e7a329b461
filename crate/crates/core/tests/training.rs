mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use socialvec::synth::{generate, CommunitySpec, SynthConfig};
use socialvec::train::{sgns_step, train, Matrix, SamplerTable};
use socialvec::{build_contexts, ContextCorpus, CorpusOptions, EmbeddingModel, EntityVocabulary, Threshold, TrainConfig};

use common::{gradient_error, random_example};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn sgns_gradient_matches_finite_differences(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (input, output, ex) = random_example(&mut rng, false);
        let err = gradient_error(&input, &output, &ex, 1e-4);
        prop_assert!(err < 1e-5, "relative error {err} for {ex:?}");
    }

    #[test]
    fn cbow_gradient_matches_finite_differences(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (input, output, ex) = random_example(&mut rng, true);
        let err = gradient_error(&input, &output, &ex, 1e-4);
        prop_assert!(err < 1e-5, "relative error {err} for {ex:?}");
    }

    #[test]
    fn updates_stay_finite_for_huge_vectors(scale in 1.0f64..1e6, negatives in 0usize..6) {
        let mut input = Matrix::from_vec(3, 4, vec![scale as f32; 12]);
        let mut output = Matrix::from_vec(3, 4, vec![-(scale as f32); 12]);
        let negs = vec![2u32; negatives];
        for _ in 0..20 {
            let loss = sgns_step(&mut input, &mut output, 0, 1, &negs, 0.5f32).unwrap();
            prop_assert!(loss.is_finite());
        }
        prop_assert!(input.is_finite() && output.is_finite());
    }

    #[test]
    fn sampler_probabilities_sum_to_one(counts in prop::collection::vec(1u64..10_000, 1..60), power in 0.0f64..1.5) {
        let table = SamplerTable::from_counts(&counts, power);
        let sum: f64 = table.probabilities().iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-12);
        prop_assert!(table.probabilities().iter().all(|&p| p > 0.0));
    }
}

#[test]
fn zero_vectors_give_log2_per_term() {
    for n in 0..=20u32 {
        let mut input = Matrix::<f32>::zeros(25, 5);
        let mut output = Matrix::<f32>::zeros(25, 5);
        let negatives: Vec<u32> = (2..2 + n).collect();
        let loss = sgns_step(&mut input, &mut output, 0, 1, &negatives, 0.1f32).unwrap();
        assert!((loss - (n as f64 + 1.0) * std::f64::consts::LN_2).abs() < 1e-9);
    }
}

fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum();
    let na: f64 = a.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
    dot / (na * nb)
}

fn pair_model(seed: u64, epochs: usize) -> EmbeddingModel {
    let vocab = EntityVocabulary::from_counts([("A", 1u64), ("B", 1)]);
    let config = TrainConfig {
        dim: 8,
        negatives: 0,
        epochs,
        downsample: None,
        seed,
        ..TrainConfig::default()
    };
    EmbeddingModel::init(vocab, config).unwrap()
}

/// With only positive pairs, each target vector aligns with the context
/// vector of its partner. The two target vectors never interact: `u_A` only
/// meets `v_B` and `u_B` only meets `v_A`.
#[test]
fn positive_only_pair_aligns_target_with_partner_context() {
    let corpus = ContextCorpus::from_contexts(2, vec![vec![0, 1]]).unwrap();
    let mut model = pair_model(5, 50);
    let before_targets = cosine(model.target.row(0), model.target.row(1));
    train(&mut model, &corpus).unwrap();
    for (u, v) in [(0, 1), (1, 0)] {
        let aligned = cosine(model.target.row(u), model.context.row(v));
        assert!(aligned > 0.9, "cos(u_{u}, v_{v}) = {aligned}");
    }
    let after_targets = cosine(model.target.row(0), model.target.row(1));
    assert!((after_targets - before_targets).abs() < 1e-6, "{before_targets} -> {after_targets}");
}

fn small_corpus() -> (EntityVocabulary, ContextCorpus) {
    let config = SynthConfig {
        num_users: 200,
        communities: vec![
            CommunitySpec {
                entities: 10,
                users: None,
            };
            2
        ],
        p_in: 0.8,
        p_out: 0.05,
        polarity: None,
        traits: Vec::new(),
        seed: 11,
    };
    let graph = generate(&config).unwrap().graph();
    let vocab = graph.compute_popularity().select_entities(Threshold::at_least(1));
    let corpus = build_contexts(&graph, &vocab, CorpusOptions::default()).unwrap();
    (vocab, corpus)
}

#[test]
fn epoch_loss_trend_over_seeds() {
    let (vocab, corpus) = small_corpus();
    let mut non_increasing = 0;
    let mut failures = Vec::new();
    for seed in 0..20 {
        let config = TrainConfig {
            dim: 16,
            negatives: 5,
            downsample: None,
            seed,
            ..TrainConfig::default()
        };
        let mut model = EmbeddingModel::init(vocab.clone(), config).unwrap();
        let report = train(&mut model, &corpus).unwrap();
        if report.epoch_losses.windows(2).all(|w| w[1] <= w[0]) {
            non_increasing += 1;
        } else {
            failures.push((seed, report.epoch_losses.clone()));
        }
    }
    assert!(non_increasing >= 19, "{non_increasing}/20 non-increasing; failures: {failures:?}");
}

#[test]
fn single_worker_training_is_bitwise_deterministic() {
    let (vocab, corpus) = small_corpus();
    let run = || {
        let config = TrainConfig {
            dim: 12,
            negatives: 3,
            downsample: Some(1e-2),
            seed: 9,
            ..TrainConfig::default()
        };
        let mut model = EmbeddingModel::init(vocab.clone(), config).unwrap();
        let report = train(&mut model, &corpus).unwrap();
        (model.target, model.context, report.epoch_losses)
    };
    let (a, b) = (run(), run());
    assert_eq!(a.0.as_slice().iter().map(|x| x.to_bits()).collect::<Vec<_>>(), b.0.as_slice().iter().map(|x| x.to_bits()).collect::<Vec<_>>());
    assert_eq!(a.1.as_slice().iter().map(|x| x.to_bits()).collect::<Vec<_>>(), b.1.as_slice().iter().map(|x| x.to_bits()).collect::<Vec<_>>());
    assert_eq!(a.2, b.2);
}

#[test]
fn multi_worker_training_stays_finite_and_separates_blocks() {
    let (vocab, corpus) = small_corpus();
    let config = TrainConfig {
        dim: 16,
        negatives: 5,
        downsample: None,
        workers: 3,
        epochs: 10,
        ..TrainConfig::default()
    };
    let mut model = EmbeddingModel::init(vocab, config).unwrap();
    train(&mut model, &corpus).unwrap();
    assert!(model.is_finite());
    let kv = model.keyed_vectors();
    let same = cosine(kv.get("c0e000").unwrap(), kv.get("c0e001").unwrap());
    let cross = cosine(kv.get("c0e000").unwrap(), kv.get("c1e000").unwrap());
    assert!(same > cross, "{same} vs {cross}");
}
