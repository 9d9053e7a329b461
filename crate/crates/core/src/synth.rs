//! Synthetic follow graphs with planted structure, a training-free
//! co-follow oracle, and a recovery report that scores trained embeddings
//! against what was planted.
//!
//! Users belong to communities; each community owns a block of entities.
//! A user follows each entity of their own community with probability
//! `p_in` and every other entity with probability `p_out`. Optional
//! extras plant a political axis (two communities as poles plus "source"
//! accounts with a known conservative share of their audience) and binary
//! user traits that raise the follow probability of a few marked entities.

use std::collections::{BTreeMap, HashMap};
use std::fmt::{self, Write as _};
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{build_contexts, CorpusOptions};
use crate::error::{Error, Result};
use crate::graph::{FollowGraph, Threshold};
use crate::query::{political_orientation, rank_correlation, NeighborIndex, PoliticalAnchors, PollGroundTruth};
use crate::train::{train, EmbeddingModel, TrainConfig, TrainReport};
use crate::traits::{predict_trait, ClassifierHyper, LabeledUserDataset};
use crate::vectors::KeyedVectors;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommunitySpec {
    pub entities: usize,
    /// Users assigned to this community. Leave unset on every community to
    /// split `num_users` evenly.
    #[serde(default)]
    pub users: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolaritySpec {
    /// Community index of the conservative pole.
    pub republican: usize,
    /// Community index of the liberal pole.
    pub democratic: usize,
    /// Conservative share of each source's audience, in `[0, 1]`.
    pub source_mixing: Vec<f64>,
    /// A pole user follows source `k` with probability
    /// `source_rate * m_k` (conservative) or `source_rate * (1 - m_k)`.
    pub source_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraitSpec {
    pub name: String,
    pub positive_fraction: f64,
    /// Added to the follow probability of marked entities for users whose
    /// label is positive.
    pub shift: f64,
    /// How many entities of each community are marked.
    pub entities_per_community: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub num_users: usize,
    pub communities: Vec<CommunitySpec>,
    pub p_in: f64,
    pub p_out: f64,
    #[serde(default)]
    pub polarity: Option<PolaritySpec>,
    #[serde(default)]
    pub traits: Vec<TraitSpec>,
    pub seed: u64,
}

impl SynthConfig {
    /// 2000 users over four communities of 50 entities, `p_in = 0.6`,
    /// `p_out = 0.05`, seed 7.
    pub fn default_benchmark() -> Self {
        SynthConfig {
            num_users: 2000,
            communities: vec![
                CommunitySpec {
                    entities: 50,
                    users: None,
                };
                4
            ],
            p_in: 0.6,
            p_out: 0.05,
            polarity: None,
            traits: Vec::new(),
            seed: 7,
        }
    }

    /// The default benchmark with communities 0 and 1 as the conservative
    /// and liberal poles and ten sources whose conservative audience share
    /// runs from 0.05 to 0.95.
    pub fn polarity_benchmark() -> Self {
        SynthConfig {
            polarity: Some(PolaritySpec {
                republican: 0,
                democratic: 1,
                source_mixing: (0..10).map(|k| 0.05 + 0.1 * k as f64).collect(),
                source_rate: 0.5,
            }),
            ..Self::default_benchmark()
        }
    }

    /// The default benchmark plus one balanced binary trait that shifts
    /// the follow probability of ten entities per community by 0.2.
    pub fn trait_benchmark() -> Self {
        SynthConfig {
            traits: vec![TraitSpec {
                name: "planted".into(),
                positive_fraction: 0.5,
                shift: 0.2,
                entities_per_community: 10,
            }],
            ..Self::default_benchmark()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        if !(prob(self.p_in) && prob(self.p_out) && self.p_out < self.p_in) {
            return bad(format!("need 0 <= p_out < p_in <= 1, got p_out={} p_in={}", self.p_out, self.p_in));
        }
        if self.communities.is_empty() {
            return bad("at least one community is required".into());
        }
        if self.communities.iter().any(|c| c.entities == 0) {
            return bad("every community needs at least one entity".into());
        }
        let given = self.communities.iter().filter(|c| c.users.is_some()).count();
        if given != 0 && given != self.communities.len() {
            return bad("set `users` on every community or on none".into());
        }
        if given != 0 {
            let sum: usize = self.communities.iter().filter_map(|c| c.users).sum();
            if sum != self.num_users {
                return bad(format!("community users sum to {sum}, num_users is {}", self.num_users));
            }
        }
        if self.num_users == 0 {
            return bad("num_users must be positive".into());
        }
        if let Some(p) = &self.polarity {
            let n = self.communities.len();
            if p.republican >= n || p.democratic >= n || p.republican == p.democratic {
                return bad("polarity poles must be two distinct existing communities".into());
            }
            if !p.source_mixing.iter().all(|&m| prob(m)) {
                return bad("source mixing proportions must lie in [0, 1]".into());
            }
            if !(p.source_rate > 0.0 && p.source_rate <= 1.0) {
                return bad(format!("source_rate must lie in (0, 1], got {}", p.source_rate));
            }
        }
        let mut names = std::collections::HashSet::new();
        for t in &self.traits {
            if !names.insert(t.name.as_str()) || t.name.is_empty() || t.name.contains([',', '\t', '\n']) {
                return bad(format!("bad or duplicate trait name {:?}", t.name));
            }
            if !(t.positive_fraction > 0.0 && t.positive_fraction < 1.0) {
                return bad(format!("trait {}: positive_fraction must lie in (0, 1)", t.name));
            }
            if !(0.0..=1.0).contains(&t.shift) {
                return bad(format!("trait {}: shift must lie in [0, 1]", t.name));
            }
            if self.communities.iter().any(|c| c.entities < t.entities_per_community) {
                return bad(format!("trait {}: more marked entities than a community holds", t.name));
            }
        }
        Ok(())
    }

    fn users_per_community(&self) -> Vec<usize> {
        if self.communities[0].users.is_some() {
            return self.communities.iter().map(|c| c.users.unwrap_or(0)).collect();
        }
        let n = self.communities.len();
        (0..n)
            .map(|c| self.num_users / n + usize::from(c < self.num_users % n))
            .collect()
    }
}

/// Training settings used for benchmark runs: 32 dimensions, 5 epochs, no
/// frequency downsampling.
pub fn benchmark_train_config(seed: u64) -> TrainConfig {
    TrainConfig {
        dim: 32,
        negatives: 5,
        epochs: 5,
        downsample: None,
        seed,
        ..TrainConfig::default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Polarity {
    Republican,
    Democratic,
}

impl Polarity {
    pub fn sign(self) -> f64 {
        match self {
            Polarity::Republican => 1.0,
            Polarity::Democratic => -1.0,
        }
    }
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Polarity::Republican => "R",
            Polarity::Democratic => "D",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlantedEntity {
    pub id: String,
    /// `None` for political sources.
    pub community: Option<usize>,
    pub polarity: Option<Polarity>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlantedUser {
    pub id: String,
    pub community: usize,
    pub labels: BTreeMap<String, bool>,
}

/// Everything the generator planted.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruth {
    pub entities: Vec<PlantedEntity>,
    pub users: Vec<PlantedUser>,
    /// Source id and planted lean `m - 0.5`; positive leans conservative.
    pub sources: Vec<(String, f64)>,
    pub anchors: Option<PoliticalAnchors>,
}

const ENTITIES_FILE: &str = "entities.tsv";
const USERS_FILE: &str = "users.tsv";
const LABELS_FILE: &str = "labels.csv";
const SOURCES_FILE: &str = "truth.csv";
const ANCHORS_FILE: &str = "anchors.tsv";
pub const EDGES_FILE: &str = "edges.tsv";

impl GroundTruth {
    pub fn entity(&self, id: &str) -> Option<&PlantedEntity> {
        self.entities.iter().find(|e| e.id == id)
    }

    pub fn source_truth(&self) -> Result<PollGroundTruth> {
        PollGroundTruth::new(self.sources.clone())
    }

    /// `(user, trait, label)` rows in user order.
    pub fn label_rows(&self) -> Vec<(String, String, bool)> {
        self.users
            .iter()
            .flat_map(|u| u.labels.iter().map(move |(t, &l)| (u.id.clone(), t.clone(), l)))
            .collect()
    }

    /// Writes `entities.tsv`, `users.tsv`, `labels.csv`, and, with a
    /// political axis, `truth.csv` and `anchors.tsv`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        let mut entities = String::new();
        for e in &self.entities {
            let community = e.community.map_or("-".to_string(), |c| c.to_string());
            let polarity = e.polarity.map_or("-".to_string(), |p| p.to_string());
            writeln!(entities, "{}\t{community}\t{polarity}", e.id).expect("write to string");
        }
        write_file(&dir.join(ENTITIES_FILE), &entities)?;

        let mut users = String::new();
        for u in &self.users {
            writeln!(users, "{}\t{}", u.id, u.community).expect("write to string");
        }
        write_file(&dir.join(USERS_FILE), &users)?;

        let mut labels = String::from("user_id,trait,label\n");
        for (u, t, l) in self.label_rows() {
            writeln!(labels, "{u},{t},{}", u8::from(l)).expect("write to string");
        }
        write_file(&dir.join(LABELS_FILE), &labels)?;

        if let Some(anchors) = &self.anchors {
            let mut truth = String::from("account_id,score\n");
            for (id, lean) in &self.sources {
                writeln!(truth, "{id},{lean}").expect("write to string");
            }
            write_file(&dir.join(SOURCES_FILE), &truth)?;
            let anchors = format!("republican\t{}\ndemocratic\t{}\n", anchors.republican, anchors.democratic);
            write_file(&dir.join(ANCHORS_FILE), &anchors)?;
        }
        Ok(())
    }

    pub fn read_dir(dir: &Path) -> Result<Self> {
        let mut truth = GroundTruth::default();
        let path = dir.join(ENTITIES_FILE);
        for (line, fields) in read_tsv(&path)? {
            let [id, community, polarity] = fields.as_slice() else {
                return Err(parse_error(&path, line, "expected 3 tab-separated fields"));
            };
            let community = match community.as_str() {
                "-" => None,
                c => Some(c.parse().map_err(|_| parse_error(&path, line, "bad community index"))?),
            };
            let polarity = match polarity.as_str() {
                "-" => None,
                "R" => Some(Polarity::Republican),
                "D" => Some(Polarity::Democratic),
                _ => return Err(parse_error(&path, line, "polarity must be R, D or -")),
            };
            truth.entities.push(PlantedEntity {
                id: id.clone(),
                community,
                polarity,
            });
        }

        let path = dir.join(USERS_FILE);
        let mut index = HashMap::new();
        for (line, fields) in read_tsv(&path)? {
            let [id, community] = fields.as_slice() else {
                return Err(parse_error(&path, line, "expected 2 tab-separated fields"));
            };
            let community = community.parse().map_err(|_| parse_error(&path, line, "bad community index"))?;
            index.insert(id.clone(), truth.users.len());
            truth.users.push(PlantedUser {
                id: id.clone(),
                community,
                labels: BTreeMap::new(),
            });
        }

        let path = dir.join(LABELS_FILE);
        for (line, fields) in read_lines(&path)?.into_iter().skip(1) {
            let fields: Vec<&str> = fields.split(',').collect();
            let [user, name, label] = fields.as_slice() else {
                return Err(parse_error(&path, line, "expected `user_id,trait,label`"));
            };
            let label = match *label {
                "0" => false,
                "1" => true,
                _ => return Err(parse_error(&path, line, "label must be 0 or 1")),
            };
            let &u = index
                .get(*user)
                .ok_or_else(|| parse_error(&path, line, "label for an unknown user"))?;
            truth.users[u].labels.insert(name.to_string(), label);
        }

        let anchors_path = dir.join(ANCHORS_FILE);
        if anchors_path.exists() {
            let rows = read_tsv(&anchors_path)?;
            let find = |key: &str| {
                rows.iter()
                    .find(|(_, f)| f.len() == 2 && f[0] == key)
                    .map(|(_, f)| f[1].clone())
                    .ok_or_else(|| parse_error(&anchors_path, 0, &format!("missing {key} anchor")))
            };
            truth.anchors = Some(PoliticalAnchors::new(find("republican")?, find("democratic")?)?);
            truth.sources = PollGroundTruth::load(dir.join(SOURCES_FILE))?.rows().to_vec();
        }
        Ok(truth)
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn parse_error(path: &Path, line: usize, message: &str) -> Error {
    Error::Parse {
        path: path.to_owned(),
        line,
        message: message.to_owned(),
    }
}

fn read_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if !line.trim().is_empty() {
            out.push((i + 1, line.trim_end_matches('\r').to_owned()));
        }
    }
    Ok(out)
}

fn read_tsv(path: &Path) -> Result<Vec<(usize, Vec<String>)>> {
    Ok(read_lines(path)?
        .into_iter()
        .map(|(i, l)| (i, l.split('\t').map(str::to_owned).collect()))
        .collect())
}

/// A generated graph and its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    pub edges: Vec<(String, String)>,
    pub truth: GroundTruth,
}

impl SynthData {
    pub fn graph(&self) -> FollowGraph {
        FollowGraph::from_edges(self.edges.iter().map(|(u, a)| (u.as_str(), a.as_str())))
    }

    /// Writes `edges.tsv` plus the ground-truth files into `dir`, creating
    /// it if needed.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(EDGES_FILE);
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut out = BufWriter::new(file);
        for (u, a) in &self.edges {
            writeln!(out, "{u}\t{a}").map_err(|e| Error::io(&path, e))?;
        }
        out.flush().map_err(|e| Error::io(&path, e))?;
        self.truth.write_dir(dir)
    }
}

fn entity_id(community: usize, j: usize) -> String {
    format!("c{community}e{j:03}")
}

/// Draws a graph. Every user–entity edge is an independent Bernoulli draw
/// from one seeded stream, so output depends only on the config.
pub fn generate(config: &SynthConfig) -> Result<SynthData> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut entities = Vec::new();
    for (c, spec) in config.communities.iter().enumerate() {
        let polarity = config.polarity.as_ref().and_then(|p| {
            if c == p.republican {
                Some(Polarity::Republican)
            } else if c == p.democratic {
                Some(Polarity::Democratic)
            } else {
                None
            }
        });
        for j in 0..spec.entities {
            entities.push(PlantedEntity {
                id: entity_id(c, j),
                community: Some(c),
                polarity,
            });
        }
    }
    let mut sources = Vec::new();
    if let Some(p) = &config.polarity {
        for (k, &m) in p.source_mixing.iter().enumerate() {
            let id = format!("src{k:02}");
            let polarity = if m >= 0.5 {
                Polarity::Republican
            } else {
                Polarity::Democratic
            };
            entities.push(PlantedEntity {
                id: id.clone(),
                community: None,
                polarity: Some(polarity),
            });
            sources.push((id, m - 0.5));
        }
    }
    let anchors = match &config.polarity {
        Some(p) => Some(PoliticalAnchors::new(entity_id(p.republican, 0), entity_id(p.democratic, 0))?),
        None => None,
    };

    let mut users = Vec::with_capacity(config.num_users);
    for (c, n) in config.users_per_community().into_iter().enumerate() {
        for _ in 0..n {
            let labels = config
                .traits
                .iter()
                .map(|t| (t.name.clone(), rng.random_bool(t.positive_fraction)))
                .collect();
            users.push(PlantedUser {
                id: format!("u{:05}", users.len()),
                community: c,
                labels,
            });
        }
    }

    let mut edges = Vec::new();
    for user in &users {
        for entity in &entities {
            let p = follow_probability(config, user, entity);
            if p > 0.0 && rng.random_bool(p) {
                edges.push((user.id.clone(), entity.id.clone()));
            }
        }
    }

    Ok(SynthData {
        edges,
        truth: GroundTruth {
            entities,
            users,
            sources,
            anchors,
        },
    })
}

fn follow_probability(config: &SynthConfig, user: &PlantedUser, entity: &PlantedEntity) -> f64 {
    let Some(community) = entity.community else {
        let polarity = config.polarity.as_ref().expect("sources exist only with a polarity axis");
        let k: usize = entity.id[3..].parse().expect("source ids are generated");
        let m = polarity.source_mixing[k];
        return if user.community == polarity.republican {
            polarity.source_rate * m
        } else if user.community == polarity.democratic {
            polarity.source_rate * (1.0 - m)
        } else {
            config.p_out
        };
    };
    let mut p = if community == user.community {
        config.p_in
    } else {
        config.p_out
    };
    let j: usize = entity.id.split_once('e').and_then(|(_, j)| j.parse().ok()).expect("entity ids are generated");
    for t in &config.traits {
        if j < t.entities_per_community && user.labels.get(&t.name) == Some(&true) {
            p += t.shift;
        }
    }
    p.min(1.0)
}

/// Cosine similarity of positive-PMI rows of the exact entity co-follow
/// count matrix. The diagonal holds each entity's follower count.
#[derive(Debug, Clone)]
pub struct CoFollowOracle {
    ids: Vec<String>,
    ppmi: Vec<Vec<f64>>,
    norms: Vec<f64>,
}

impl CoFollowOracle {
    pub fn new<S: AsRef<str>>(graph: &FollowGraph, entities: &[S]) -> Self {
        let ids: Vec<String> = entities.iter().map(|s| s.as_ref().to_owned()).collect();
        let index: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        let n = ids.len();
        let mut counts = vec![vec![0u64; n]; n];
        for (_, follows) in graph.users() {
            let mut set: Vec<usize> = follows.filter_map(|a| index.get(a).copied()).collect();
            set.sort_unstable();
            set.dedup();
            for &a in &set {
                for &b in &set {
                    counts[a][b] += 1;
                }
            }
        }
        let row_sums: Vec<u64> = counts.iter().map(|r| r.iter().sum()).collect();
        let total: u64 = row_sums.iter().sum();
        let ppmi: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        if counts[i][j] == 0 {
                            return 0.0;
                        }
                        let ratio = (counts[i][j] as f64 * total as f64) / (row_sums[i] as f64 * row_sums[j] as f64);
                        ratio.ln().max(0.0)
                    })
                    .collect()
            })
            .collect();
        let norms = ppmi.iter().map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
        CoFollowOracle { ids, ppmi, norms }
    }

    pub fn similarity(&self, a: usize, b: usize) -> f64 {
        let denom = self.norms[a] * self.norms[b];
        if denom == 0.0 {
            return 0.0;
        }
        self.ppmi[a].iter().zip(&self.ppmi[b]).map(|(x, y)| x * y).sum::<f64>() / denom
    }

    /// The `k` most similar entities to `query`, excluding it; ties by id.
    pub fn nearest(&self, query: &str, k: usize) -> Result<Vec<(String, f64)>> {
        let q = self
            .ids
            .iter()
            .position(|id| id == query)
            .ok_or_else(|| Error::UnknownEntity(query.to_owned()))?;
        let mut scored: Vec<(String, f64)> = (0..self.ids.len())
            .filter(|&j| j != q)
            .map(|j| (self.ids[j].clone(), self.similarity(q, j)))
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        scored.truncate(k);
        Ok(scored)
    }
}

pub fn oracle_neighbors<S: AsRef<str>>(
    graph: &FollowGraph,
    entities: &[S],
    query: &str,
    k: usize,
) -> Result<Vec<(String, f64)>> {
    CoFollowOracle::new(graph, entities).nearest(query, k)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveryOptions {
    pub top_k: usize,
    /// Seed of the trait train/test split.
    pub seed: u64,
    pub oracle: bool,
}

impl Default for RecoveryOptions {
    fn default() -> Self {
        RecoveryOptions {
            top_k: 3,
            seed: 1,
            oracle: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryReport {
    pub entities: usize,
    pub intra_cosine: f64,
    pub inter_cosine: f64,
    /// Share of community entities whose `top_k` neighbors all share
    /// their community.
    pub top_k_in_community: f64,
    pub top_k: usize,
    pub oracle_top1_agreement: Option<f64>,
    /// Over non-anchor pole entities and sources.
    pub polarity_sign_accuracy: Option<f64>,
    pub source_spearman: Option<f64>,
    pub trait_auc: Vec<(String, f64)>,
}

impl RecoveryReport {
    pub fn cosine_gap(&self) -> f64 {
        self.intra_cosine - self.inter_cosine
    }

    /// `metric<TAB>value` lines; absent metrics are omitted.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        let mut row = |k: &str, v: String| {
            out.push_str(k);
            out.push('\t');
            out.push_str(&v);
            out.push('\n');
        };
        row("entities", self.entities.to_string());
        row("intra_cosine", self.intra_cosine.to_string());
        row("inter_cosine", self.inter_cosine.to_string());
        row("cosine_gap", self.cosine_gap().to_string());
        row(&format!("top{}_in_community", self.top_k), self.top_k_in_community.to_string());
        if let Some(v) = self.oracle_top1_agreement {
            row("oracle_top1_agreement", v.to_string());
        }
        if let Some(v) = self.polarity_sign_accuracy {
            row("polarity_sign_accuracy", v.to_string());
        }
        if let Some(v) = self.source_spearman {
            row("source_spearman", v.to_string());
        }
        for (name, auc) in &self.trait_auc {
            row(&format!("trait_auc.{name}"), auc.to_string());
        }
        out
    }
}

/// Scores embeddings against planted structure. Every embedded id must be
/// a planted entity.
pub fn evaluate_recovery(
    vectors: &KeyedVectors,
    truth: &GroundTruth,
    graph: &FollowGraph,
    options: &RecoveryOptions,
) -> Result<RecoveryReport> {
    let planted: HashMap<&str, &PlantedEntity> = truth.entities.iter().map(|e| (e.id.as_str(), e)).collect();
    let mut community = Vec::with_capacity(vectors.len());
    for id in vectors.ids() {
        let e = planted
            .get(id.as_str())
            .ok_or_else(|| Error::InvalidArgument(format!("embedded entity {id} is not in the ground truth")))?;
        community.push(e.community);
    }
    if vectors.is_empty() {
        return Err(Error::Empty("no embeddings".into()));
    }

    let normalized: Vec<Vec<f64>> = (0..vectors.len())
        .map(|i| {
            let v = vectors.vector(i);
            let n = v.iter().map(|&x| x as f64 * x as f64).sum::<f64>().sqrt();
            v.iter().map(|&x| if n > 0.0 { x as f64 / n } else { 0.0 }).collect()
        })
        .collect();
    let (mut intra, mut n_intra, mut inter, mut n_inter) = (0.0, 0u64, 0.0, 0u64);
    for i in 0..vectors.len() {
        let Some(ci) = community[i] else { continue };
        for j in i + 1..vectors.len() {
            let Some(cj) = community[j] else { continue };
            let c: f64 = normalized[i].iter().zip(&normalized[j]).map(|(a, b)| a * b).sum();
            if ci == cj {
                intra += c;
                n_intra += 1;
            } else {
                inter += c;
                n_inter += 1;
            }
        }
    }
    if n_intra == 0 || n_inter == 0 {
        return Err(Error::Domain("need at least two communities with two entities each".into()));
    }

    let index = NeighborIndex::new(vectors);
    let oracle = options.oracle.then(|| CoFollowOracle::new(graph, vectors.ids()));
    let (mut pure, mut with_community, mut agree) = (0usize, 0usize, 0usize);
    for (i, id) in vectors.ids().iter().enumerate() {
        if let Some(c) = community[i] {
            with_community += 1;
            let neighbors = index.nearest(id, options.top_k)?;
            if neighbors
                .iter()
                .all(|n| community[vectors.index_of(&n.id).expect("neighbor is embedded")] == Some(c))
            {
                pure += 1;
            }
        }
        if let Some(oracle) = &oracle {
            let trained = index.nearest(id, 1)?;
            let counted = oracle.nearest(id, 1)?;
            if trained.first().map(|n| &n.id) == counted.first().map(|n| &n.0) {
                agree += 1;
            }
        }
    }

    let (mut polarity_sign_accuracy, mut source_spearman) = (None, None);
    if let Some(anchors) = &truth.anchors {
        let (mut correct, mut total) = (0usize, 0usize);
        for e in &truth.entities {
            let Some(polarity) = e.polarity else { continue };
            if e.id == anchors.republican || e.id == anchors.democratic || vectors.index_of(&e.id).is_none() {
                continue;
            }
            let po = political_orientation(vectors, &e.id, anchors)?;
            total += 1;
            correct += usize::from(po * polarity.sign() > 0.0);
        }
        if total > 0 {
            polarity_sign_accuracy = Some(correct as f64 / total as f64);
        }
        let embedded: Vec<&(String, f64)> = truth.sources.iter().filter(|(id, _)| vectors.index_of(id).is_some()).collect();
        if embedded.len() >= 2 {
            let po = embedded
                .iter()
                .map(|(id, _)| political_orientation(vectors, id, anchors))
                .collect::<Result<Vec<_>>>()?;
            let planted: Vec<f64> = embedded.iter().map(|(_, m)| *m).collect();
            source_spearman = Some(rank_correlation(&po, &planted)?);
        }
    }

    let mut trait_auc = Vec::new();
    let trait_names: Vec<String> = truth.users.first().map(|u| u.labels.keys().cloned().collect()).unwrap_or_default();
    if !trait_names.is_empty() {
        let dataset = LabeledUserDataset::from_parts(truth.label_rows(), graph);
        for name in trait_names {
            let result = predict_trait(&dataset, &name, vectors, &ClassifierHyper::default(), options.seed)?;
            trait_auc.push((name, result.report.auc));
        }
    }

    Ok(RecoveryReport {
        entities: vectors.len(),
        intra_cosine: intra / n_intra as f64,
        inter_cosine: inter / n_inter as f64,
        top_k_in_community: pure as f64 / with_community.max(1) as f64,
        top_k: options.top_k,
        oracle_top1_agreement: oracle.map(|_| agree as f64 / vectors.len() as f64),
        polarity_sign_accuracy,
        source_spearman,
        trait_auc,
    })
}

/// Output of [`run_benchmark`].
#[derive(Debug, Clone)]
pub struct BenchmarkRun {
    pub vectors: KeyedVectors,
    pub train: TrainReport,
    pub report: RecoveryReport,
}

/// Generates a graph, selects every followed account as an entity, builds
/// contexts, trains, and scores the result.
pub fn run_benchmark(config: &SynthConfig, train_config: &TrainConfig, options: &RecoveryOptions) -> Result<BenchmarkRun> {
    let data = generate(config)?;
    let graph = data.graph();
    let vocab = graph.compute_popularity().select_entities(Threshold::at_least(1));
    let corpus = build_contexts(&graph, &vocab, CorpusOptions::default())?;
    let mut model = EmbeddingModel::init(vocab, train_config.clone())?;
    let train_report = train(&mut model, &corpus)?;
    let vectors = model.keyed_vectors();
    let report = evaluate_recovery(&vectors, &data.truth, &graph, options)?;
    Ok(BenchmarkRun {
        vectors,
        train: train_report,
        report,
    })
}
