use socialvec::synth::{evaluate_recovery, generate, GroundTruth, RecoveryOptions, SynthConfig};
use socialvec::train::Matrix;
use socialvec::traits::LabeledUserDataset;
use socialvec::{EmbeddingModel, KeyedVectors, Threshold, TrainConfig};

#[test]
fn random_init_shows_no_community_structure() {
    let data = generate(&SynthConfig::default_benchmark()).unwrap();
    let graph = data.graph();
    let vocab = graph.compute_popularity().select_entities(Threshold::at_least(1));
    let model = EmbeddingModel::init(vocab, TrainConfig { dim: 32, ..TrainConfig::default() }).unwrap();
    let options = RecoveryOptions {
        oracle: false,
        ..RecoveryOptions::default()
    };
    let report = evaluate_recovery(&model.keyed_vectors(), &data.truth, &graph, &options).unwrap();
    assert!(report.cosine_gap().abs() < 0.05, "{}", report.to_tsv());
}

#[test]
fn unknown_embedded_entity_is_rejected() {
    let data = generate(&SynthConfig {
        num_users: 50,
        ..SynthConfig::default_benchmark()
    })
    .unwrap();
    let kv = KeyedVectors::new(vec!["c0e000".into(), "stranger".into()], Matrix::from_vec(2, 2, vec![1.0, 0.0, 0.0, 1.0])).unwrap();
    assert!(evaluate_recovery(&kv, &data.truth, &data.graph(), &RecoveryOptions::default()).is_err());
}

#[test]
fn planted_labels_join_with_generated_follows() {
    let config = SynthConfig {
        num_users: 300,
        ..SynthConfig::trait_benchmark()
    };
    let data = generate(&config).unwrap();
    let dir = tempfile::tempdir().unwrap();
    data.write(dir.path()).unwrap();
    let dataset = LabeledUserDataset::load(dir.path().join("labels.csv"), dir.path().join("edges.tsv")).unwrap();
    assert_eq!(dataset.len() + dataset.without_follows, 300);
    assert_eq!(dataset.trait_names(), ["planted"]);
    let truth = GroundTruth::read_dir(dir.path()).unwrap();
    let positives = truth.users.iter().filter(|u| u.labels["planted"]).count();
    assert!((100..200).contains(&positives), "{positives}");
}
