use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn socialvec(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_socialvec")).current_dir(dir).args(args).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = socialvec(dir, args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

const SMALL_SYNTH: &str = r#"
num_users = 300
p_in = 0.6
p_out = 0.05
seed = 4

[[communities]]
entities = 8

[[communities]]
entities = 8

[[traits]]
name = "planted"
positive_fraction = 0.5
shift = 0.3
entities_per_community = 3
"#;

/// Generates the small synthetic data set into `dir/data`.
fn small_data(dir: &Path) {
    fs::write(dir.join("synth.toml"), SMALL_SYNTH).unwrap();
    ok(dir, &["--config", "synth.toml", "synth-gen", "--out", "data"]);
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(socialvec(dir.path(), &["frobnicate"]).status.code(), Some(2));
}

#[test]
fn missing_input_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = socialvec(dir.path(), &["stats", "--corpus", "nowhere.corpus"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nowhere.corpus"));
}

#[test]
fn vocab_corpus_and_stats_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_data(d);
    ok(d, &["build-vocab", "--edges", "data/edges.tsv", "--out", "vocab.tsv", "--threshold", "1"]);
    let vocab = fs::read_to_string(d.join("vocab.tsv")).unwrap();
    assert_eq!(vocab.lines().filter(|l| !l.trim().is_empty()).count(), 16);
    ok(d, &["build-corpus", "--edges", "data/edges.tsv", "--vocab", "vocab.tsv", "--out", "ctx.corpus"]);
    let stats = ok(d, &["stats", "--corpus", "ctx.corpus"]);
    assert!(stats.contains("entities\t16"), "{stats}");
}

#[test]
fn train_then_query() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_data(d);
    ok(
        d,
        &[
            "--seed", "2", "train", "--edges", "data/edges.tsv", "--threshold", "1", "--dim", "8", "--epochs", "3",
            "--workers", "1", "--out", "vecs.txt",
        ],
    );
    let near = ok(d, &["nearest", "c0e000", "-k", "3", "--embeddings", "vecs.txt"]);
    assert_eq!(near.lines().count(), 3, "{near}");
    assert!(!near.contains("c0e000\t"), "query listed as its own neighbor: {near}");
    let report = ok(d, &["bench", "--data", "data", "--embeddings", "vecs.txt", "--no-oracle"]);
    assert!(report.contains("intra_cosine"), "{report}");
    let unknown = socialvec(d, &["nearest", "nobody", "--embeddings", "vecs.txt"]);
    assert_eq!(unknown.status.code(), Some(1));
}

#[test]
fn pmi_lists_marked_entities() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_data(d);
    let out = ok(
        d,
        &["pmi", "--trait", "planted", "-k", "3", "--labels", "data/labels.csv", "--follows", "data/edges.tsv"],
    );
    let top: Vec<&str> = out.lines().skip(1).filter_map(|l| l.split_whitespace().nth(1)).collect();
    assert_eq!(top.len(), 3, "{out}");
    // Only the first three entities of each community carry the planted shift.
    for id in top {
        let j: u32 = id.rsplit('e').next().unwrap().parse().unwrap();
        assert!(j < 3, "{out}");
    }
}

#[test]
fn explicit_flags_override_the_pipeline_config() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_data(d);
    fs::write(d.join("pipeline.toml"), "threshold = 100000\n[paths]\nedges = \"data/edges.tsv\"\nvocab = \"vocab.tsv\"\n").unwrap();
    ok(d, &["--config", "pipeline.toml", "build-vocab"]);
    assert_eq!(fs::read_to_string(d.join("vocab.tsv")).unwrap().trim(), "");
    ok(d, &["--config", "pipeline.toml", "build-vocab", "--threshold", "1"]);
    assert!(!fs::read_to_string(d.join("vocab.tsv")).unwrap().trim().is_empty());
}
