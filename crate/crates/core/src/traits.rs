//! User trait prediction from followed-entity embeddings, plus PMI analysis
//! of which accounts distinguish a subpopulation.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::FollowGraph;
use crate::query::{average_ranks, csv_error};
use crate::vectors::KeyedVectors;

/// A binary attribute and the meaning of its two labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraitDefinition {
    pub name: &'static str,
    /// Class encoded as label `false` / `0`.
    pub negative: &'static str,
    /// Class encoded as label `true` / `1`.
    pub positive: &'static str,
}

/// Binary attributes of the labeled Twitter user study.
pub const TRAIT_CATALOG: &[TraitDefinition] = &[
    TraitDefinition { name: "age", negative: "<=25", positive: ">25" },
    TraitDefinition { name: "children", negative: "no", positive: "yes" },
    TraitDefinition { name: "education", negative: "high school", positive: "degree" },
    TraitDefinition { name: "ethnicity", negative: "caucasian", positive: "african american" },
    TraitDefinition { name: "gender", negative: "female", positive: "male" },
    TraitDefinition { name: "income", negative: "<=35K", positive: ">35K" },
    TraitDefinition { name: "political", negative: "democrat", positive: "republican" },
];

pub fn trait_definition(name: &str) -> Option<&'static TraitDefinition> {
    TRAIT_CATALOG.iter().find(|t| t.name == name)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledUser {
    pub id: String,
    pub follows: Vec<String>,
    pub labels: BTreeMap<String, bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabeledUserDataset {
    pub users: Vec<LabeledUser>,
    /// Labeled users dropped because they follow nobody.
    pub without_follows: usize,
}

impl LabeledUserDataset {
    /// Joins `(user, trait, label)` rows with a follow graph. Users with
    /// labels but no follows are dropped and counted.
    pub fn from_parts<I>(labels: I, follows: &FollowGraph) -> Self
    where
        I: IntoIterator<Item = (String, String, bool)>,
    {
        let mut by_user: BTreeMap<String, BTreeMap<String, bool>> = BTreeMap::new();
        for (user, name, label) in labels {
            by_user.entry(user).or_default().insert(name, label);
        }
        let follow_lists: HashMap<&str, Vec<String>> = follows
            .users()
            .map(|(u, f)| (u, f.map(str::to_owned).collect()))
            .collect();
        let mut users = Vec::with_capacity(by_user.len());
        let mut without_follows = 0;
        for (id, labels) in by_user {
            match follow_lists.get(id.as_str()) {
                Some(f) if !f.is_empty() => users.push(LabeledUser {
                    follows: f.clone(),
                    id,
                    labels,
                }),
                _ => without_follows += 1,
            }
        }
        LabeledUserDataset { users, without_follows }
    }

    /// Loads a `user_id,trait,label` CSV (header optional, labels 0/1) and a
    /// follows edge list.
    pub fn load(labels_path: impl AsRef<Path>, follows_path: impl AsRef<Path>) -> Result<Self> {
        let labels = load_labels(labels_path.as_ref())?;
        let follows = FollowGraph::load_edges(follows_path)?;
        Ok(Self::from_parts(labels, &follows))
    }

    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }

    /// Trait names present in the labels, sorted.
    pub fn trait_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self
            .users
            .iter()
            .flat_map(|u| u.labels.keys().cloned())
            .collect::<HashSet<_>>()
            .into_iter()
            .collect();
        names.sort();
        names
    }

    /// `(user index, label)` for every user labeled with `name`.
    pub fn examples(&self, name: &str) -> Vec<Example> {
        self.users
            .iter()
            .enumerate()
            .filter_map(|(i, u)| u.labels.get(name).map(|&label| Example { user: i, label }))
            .collect()
    }
}

fn load_labels(path: &Path) -> Result<Vec<(String, String, bool)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let parse_err = |message: String| Error::Parse {
            path: path.to_owned(),
            line: i + 1,
            message,
        };
        if record.len() != 3 {
            return Err(parse_err(format!("expected `user_id,trait,label`, found {} fields", record.len())));
        }
        let label = match &record[2] {
            "1" | "true" => true,
            "0" | "false" => false,
            _ if i == 0 => continue,
            other => return Err(parse_err(format!("label must be 0 or 1, got {other:?}"))),
        };
        rows.push((record[0].to_owned(), record[1].to_owned(), label));
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Example {
    /// Index into [`LabeledUserDataset::users`].
    pub user: usize,
    pub label: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserVector {
    pub values: Vec<f64>,
    /// Distinct followed accounts found in the embedding table.
    pub covered_entities: usize,
}

/// Mean embedding of the distinct followed accounts that have one. `None`
/// when no followed account is covered.
pub fn user_vector<S: AsRef<str>>(followed: &[S], vectors: &KeyedVectors) -> Option<UserVector> {
    let mut seen = HashSet::new();
    let mut sum = vec![0.0f64; vectors.dim()];
    let mut covered = 0;
    for id in followed {
        let id = id.as_ref();
        if !seen.insert(id) {
            continue;
        }
        if let Some(idx) = vectors.index_of(id) {
            for (s, &x) in sum.iter_mut().zip(vectors.vector(idx)) {
                *s += x as f64;
            }
            covered += 1;
        }
    }
    if covered == 0 {
        return None;
    }
    let inv = 1.0 / covered as f64;
    sum.iter_mut().for_each(|s| *s *= inv);
    Some(UserVector {
        values: sum,
        covered_entities: covered,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<Example>,
    pub test: Vec<Example>,
}

/// Stratified random split. Each class contributes `round(n_c * fraction)`
/// examples to training, clamped so both sides keep at least one.
pub fn split_dataset(examples: &[Example], train_fraction: f64, seed: u64) -> Result<Split> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!("train fraction must lie in (0, 1), got {train_fraction}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut split = Split {
        train: Vec::new(),
        test: Vec::new(),
    };
    for class in [false, true] {
        let mut members: Vec<Example> = examples.iter().copied().filter(|e| e.label == class).collect();
        if members.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "class {} has {} example(s); need at least 2",
                class as u8,
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        let n_train = ((members.len() as f64 * train_fraction).round() as usize).clamp(1, members.len() - 1);
        split.test.extend_from_slice(&members[n_train..]);
        members.truncate(n_train);
        split.train.extend(members);
    }
    split.train.sort_by_key(|e| e.user);
    split.test.sort_by_key(|e| e.user);
    Ok(split)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifierHyper {
    /// Step size; `None` picks `1 / L` from the smoothness bound of the
    /// standardized problem.
    pub lr: Option<f64>,
    pub max_epochs: usize,
    pub l2: f64,
    /// Stop once the full-batch gradient norm falls below this.
    pub tolerance: f64,
}

impl Default for ClassifierHyper {
    fn default() -> Self {
        ClassifierHyper {
            lr: None,
            max_epochs: 5000,
            l2: 1e-4,
            tolerance: 1e-6,
        }
    }
}

/// Logistic regression: a single sigmoid unit over the user vector.
#[derive(Debug, Clone, PartialEq)]
pub struct TraitClassifier {
    pub trait_name: String,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub epochs_run: usize,
}

impl TraitClassifier {
    pub fn score(&self, x: &[f64]) -> f64 {
        self.bias + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }

    pub fn probability(&self, x: &[f64]) -> f64 {
        1.0 / (1.0 + (-self.score(x)).exp())
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Fits an L2-regularized logistic regression by full-batch gradient
/// descent on standardized features from a zero start, then folds the
/// standardization back into raw-feature weights. The objective is the
/// mean log loss plus `l2/2 · |w|²` over the standardized weights; the bias
/// is not penalized.
pub fn fit_logistic(trait_name: &str, x: &[Vec<f64>], y: &[bool], hyper: &ClassifierHyper) -> Result<TraitClassifier> {
    if x.is_empty() {
        return Err(Error::Empty("no training examples".into()));
    }
    if x.len() != y.len() {
        return Err(Error::InvalidArgument("feature and label counts differ".into()));
    }
    let n = x.len() as f64;
    let d = x[0].len();

    let mut mean = vec![0.0; d];
    for row in x {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v / n;
        }
    }
    let mut scale = vec![0.0; d];
    for row in x {
        for ((s, v), m) in scale.iter_mut().zip(row).zip(&mean) {
            *s += (v - m).powi(2) / n;
        }
    }
    for s in scale.iter_mut() {
        *s = if *s > 0.0 { s.sqrt() } else { 1.0 };
    }
    let z: Vec<Vec<f64>> = x
        .iter()
        .map(|row| row.iter().zip(&mean).zip(&scale).map(|((v, m), s)| (v - m) / s).collect())
        .collect();

    // Hessian of the mean log loss is bounded by (1/4) E[|x̃|²] with x̃ the
    // standardized features plus the bias input.
    let mean_sq = z.iter().map(|r| r.iter().map(|v| v * v).sum::<f64>() + 1.0).sum::<f64>() / n;
    let lr = hyper.lr.unwrap_or(1.0 / (0.25 * mean_sq + hyper.l2));

    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut grad_w = vec![0.0; d];
    let mut epochs_run = 0;
    for epoch in 0..hyper.max_epochs {
        grad_w.iter_mut().for_each(|g| *g = 0.0);
        let mut grad_b = 0.0;
        for (row, &label) in z.iter().zip(y) {
            let s = b + row.iter().zip(&w).map(|(v, wi)| v * wi).sum::<f64>();
            let err = (sigmoid(s) - if label { 1.0 } else { 0.0 }) / n;
            for (g, v) in grad_w.iter_mut().zip(row) {
                *g += err * v;
            }
            grad_b += err;
        }
        for (g, wi) in grad_w.iter_mut().zip(&w) {
            *g += hyper.l2 * wi;
        }
        epochs_run = epoch + 1;
        let norm = (grad_w.iter().map(|g| g * g).sum::<f64>() + grad_b * grad_b).sqrt();
        if norm < hyper.tolerance {
            break;
        }
        for (wi, g) in w.iter_mut().zip(&grad_w) {
            *wi -= lr * g;
        }
        b -= lr * grad_b;
    }

    let weights: Vec<f64> = w.iter().zip(&scale).map(|(wi, s)| wi / s).collect();
    let bias = b - weights.iter().zip(&mean).map(|(wi, m)| wi * m).sum::<f64>();
    if !(bias.is_finite() && weights.iter().all(|v| v.is_finite())) {
        return Err(Error::Domain("logistic regression diverged".into()));
    }
    Ok(TraitClassifier {
        trait_name: trait_name.to_owned(),
        weights,
        bias,
        epochs_run,
    })
}

/// User vectors for a set of examples; uncovered users are skipped and
/// counted.
pub fn featurize(examples: &[Example], dataset: &LabeledUserDataset, vectors: &KeyedVectors) -> (Vec<Vec<f64>>, Vec<bool>, usize) {
    let mut x = Vec::with_capacity(examples.len());
    let mut y = Vec::with_capacity(examples.len());
    let mut uncovered = 0;
    for e in examples {
        match user_vector(&dataset.users[e.user].follows, vectors) {
            Some(uv) => {
                x.push(uv.values);
                y.push(e.label);
            }
            None => uncovered += 1,
        }
    }
    (x, y, uncovered)
}

pub fn train_classifier(
    trait_name: &str,
    train: &[Example],
    dataset: &LabeledUserDataset,
    vectors: &KeyedVectors,
    hyper: &ClassifierHyper,
) -> Result<TraitClassifier> {
    let (x, y, _) = featurize(train, dataset, vectors);
    if x.is_empty() {
        return Err(Error::Empty(format!("every {trait_name} training user is uncovered")));
    }
    fit_logistic(trait_name, &x, &y, hyper)
}

/// Mann–Whitney ROC AUC with average ranks for tied scores.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidArgument("score and label counts differ".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Domain("ROC AUC needs both classes".into()));
    }
    let ranks = average_ranks(scores);
    let pos_rank_sum: f64 = ranks.iter().zip(labels).filter(|(_, &l)| l).map(|(r, _)| r).sum();
    let (p, q) = (n_pos as f64, n_neg as f64);
    Ok((pos_rank_sum - p * (p + 1.0) / 2.0) / (p * q))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AucReport {
    pub auc: f64,
    pub evaluated: usize,
    pub uncovered: usize,
}

pub fn evaluate_auc(
    classifier: &TraitClassifier,
    test: &[Example],
    dataset: &LabeledUserDataset,
    vectors: &KeyedVectors,
) -> Result<AucReport> {
    let (x, y, uncovered) = featurize(test, dataset, vectors);
    let scores: Vec<f64> = x.iter().map(|row| classifier.score(row)).collect();
    Ok(AucReport {
        auc: roc_auc(&scores, &y)?,
        evaluated: y.len(),
        uncovered,
    })
}

/// Result of one trait's split / train / evaluate cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct TraitResult {
    pub trait_name: String,
    pub report: AucReport,
    pub train_size: usize,
    pub train_uncovered: usize,
}

pub fn predict_trait(
    dataset: &LabeledUserDataset,
    trait_name: &str,
    vectors: &KeyedVectors,
    hyper: &ClassifierHyper,
    seed: u64,
) -> Result<TraitResult> {
    let examples = dataset.examples(trait_name);
    let split = split_dataset(&examples, 0.8, seed)?;
    let classifier = train_classifier(trait_name, &split.train, dataset, vectors, hyper)?;
    let (_, _, train_uncovered) = featurize(&split.train, dataset, vectors);
    Ok(TraitResult {
        trait_name: trait_name.to_owned(),
        report: evaluate_auc(&classifier, &split.test, dataset, vectors)?,
        train_size: split.train.len(),
        train_uncovered,
    })
}

/// Pointwise mutual information of following an entity and having a trait
/// value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Pmi {
    Value(f64),
    /// No user with the trait value follows the entity.
    NeverCoOccurs,
}

impl Pmi {
    pub fn as_f64(self) -> f64 {
        match self {
            Pmi::Value(v) => v,
            Pmi::NeverCoOccurs => f64::NEG_INFINITY,
        }
    }
}

/// Co-occurrence counts over the users labeled for one trait.
#[derive(Debug, Clone)]
pub struct PmiTable {
    total: u64,
    class_count: u64,
    /// entity → (followers, followers with the trait value)
    counts: HashMap<String, (u64, u64)>,
}

impl PmiTable {
    pub fn new(dataset: &LabeledUserDataset, trait_name: &str, value: bool) -> Self {
        let mut total = 0;
        let mut class_count = 0;
        let mut counts: HashMap<String, (u64, u64)> = HashMap::new();
        for user in &dataset.users {
            let Some(&label) = user.labels.get(trait_name) else {
                continue;
            };
            total += 1;
            let in_class = label == value;
            class_count += in_class as u64;
            let distinct: HashSet<&str> = user.follows.iter().map(String::as_str).collect();
            for e in distinct {
                let c = counts.entry(e.to_owned()).or_default();
                c.0 += 1;
                c.1 += in_class as u64;
            }
        }
        PmiTable {
            total,
            class_count,
            counts,
        }
    }

    pub fn support(&self, entity: &str) -> u64 {
        self.counts.get(entity).map_or(0, |c| c.0)
    }

    /// `ln(joint · N / (followers · class size))`, requiring at least
    /// `min_support` followers.
    pub fn pmi(&self, entity: &str, min_support: u64) -> Result<Pmi> {
        let (followers, joint) = self.counts.get(entity).copied().unwrap_or((0, 0));
        if followers < min_support.max(1) {
            return Err(Error::InvalidArgument(format!(
                "{entity} is followed by {followers} labeled user(s), below the minimum support of {min_support}"
            )));
        }
        if joint == 0 {
            return Ok(Pmi::NeverCoOccurs);
        }
        let num = (joint * self.total) as f64;
        let den = (followers * self.class_count) as f64;
        Ok(Pmi::Value((num / den).ln()))
    }

    /// Entities with at least `min_support` followers, by descending PMI
    /// then ascending id.
    pub fn top(&self, k: usize, min_support: u64) -> Vec<(String, Pmi)> {
        let mut rows: Vec<(String, Pmi)> = self
            .counts
            .keys()
            .filter_map(|e| self.pmi(e, min_support).ok().map(|p| (e.clone(), p)))
            .collect();
        rows.sort_by(|a, b| {
            b.1.as_f64()
                .partial_cmp(&a.1.as_f64())
                .unwrap_or(Ordering::Equal)
                .then_with(|| a.0.cmp(&b.0))
        });
        rows.truncate(k);
        rows
    }
}

pub const DEFAULT_MIN_SUPPORT: u64 = 5;

pub fn pmi(entity: &str, trait_name: &str, value: bool, dataset: &LabeledUserDataset, min_support: u64) -> Result<Pmi> {
    PmiTable::new(dataset, trait_name, value).pmi(entity, min_support)
}

pub fn top_distinctive(
    trait_name: &str,
    value: bool,
    dataset: &LabeledUserDataset,
    k: usize,
    min_support: u64,
) -> Vec<(String, Pmi)> {
    PmiTable::new(dataset, trait_name, value).top(k, min_support)
}
