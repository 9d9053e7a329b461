//! Similarity queries and political-orientation scoring over embeddings.
//!
//! All similarities are cosines between target vectors, accumulated in
//! `f64`. Rankings break ties by ascending account id.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};
use crate::vectors::KeyedVectors;

#[derive(Debug, Clone, PartialEq)]
pub struct Neighbor {
    pub id: String,
    pub similarity: f64,
}

fn dot64(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum()
}

fn norm64(a: &[f32]) -> f64 {
    dot64(a, a).sqrt()
}

/// Cosine of two raw vectors. A zero vector is a domain error.
pub fn cosine_vectors(a: &[f32], b: &[f32]) -> Result<f64> {
    let (na, nb) = (norm64(a), norm64(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Domain("cosine of a zero vector".into()));
    }
    Ok(dot64(a, b) / (na * nb))
}

pub fn cosine(vectors: &KeyedVectors, a: &str, b: &str) -> Result<f64> {
    let va = vectors.get(a)?;
    let vb = vectors.get(b)?;
    cosine_vectors(va, vb).map_err(|_| Error::Domain(format!("{a} or {b} has a zero vector")))
}

/// Brute-force neighbor search with precomputed row norms.
#[derive(Debug, Clone)]
pub struct NeighborIndex<'a> {
    vectors: &'a KeyedVectors,
    norms: Vec<f64>,
}

impl<'a> NeighborIndex<'a> {
    pub fn new(vectors: &'a KeyedVectors) -> Self {
        let norms = (0..vectors.len()).map(|i| norm64(vectors.vector(i))).collect();
        NeighborIndex { vectors, norms }
    }

    pub fn vectors(&self) -> &KeyedVectors {
        self.vectors
    }

    fn query_row(&self, id: &str) -> Result<usize> {
        let idx = self.vectors.lookup(id)?;
        if self.norms[idx] == 0.0 {
            return Err(Error::Domain(format!("{id} has a zero vector")));
        }
        Ok(idx)
    }

    /// The `k` entities most similar to `query`, excluding the query itself.
    pub fn nearest(&self, query: &str, k: usize) -> Result<Vec<Neighbor>> {
        let idx = self.query_row(query)?;
        let target: Vec<f64> = self.vectors.vector(idx).iter().map(|&x| x as f64).collect();
        Ok(self.rank_by_vector(&target, &[idx], k))
    }

    /// Ranks against `v_b - v_a + v_c`, excluding `a`, `b` and `c`.
    pub fn analogy(&self, a: &str, b: &str, c: &str, k: usize) -> Result<Vec<Neighbor>> {
        let ia = self.vectors.lookup(a)?;
        let ib = self.vectors.lookup(b)?;
        let ic = self.vectors.lookup(c)?;
        let (va, vb, vc) = (self.vectors.vector(ia), self.vectors.vector(ib), self.vectors.vector(ic));
        let target: Vec<f64> = (0..va.len())
            .map(|i| (vb[i] as f64 - va[i] as f64) + vc[i] as f64)
            .collect();
        Ok(self.rank_by_vector(&target, &[ia, ib, ic], k))
    }

    /// Top-`k` rows by cosine against an arbitrary vector. Excluded rows and
    /// zero rows never appear.
    pub fn rank_by_vector(&self, target: &[f64], exclude: &[usize], k: usize) -> Vec<Neighbor> {
        if k == 0 {
            return Vec::new();
        }
        let tnorm = target.iter().map(|x| x * x).sum::<f64>().sqrt();
        if tnorm == 0.0 {
            return Vec::new();
        }
        let mut scored: Vec<(usize, f64)> = (0..self.vectors.len())
            .filter(|i| !exclude.contains(i) && self.norms[*i] > 0.0)
            .map(|i| {
                let row = self.vectors.vector(i);
                let d: f64 = row.iter().zip(target).map(|(&x, &t)| x as f64 * t).sum();
                (i, d / (self.norms[i] * tnorm))
            })
            .collect();
        let by_rank = |a: &(usize, f64), b: &(usize, f64)| {
            b.1.partial_cmp(&a.1)
                .unwrap_or(Ordering::Equal)
                .then_with(|| self.vectors.id(a.0).cmp(self.vectors.id(b.0)))
        };
        if k < scored.len() {
            scored.select_nth_unstable_by(k - 1, by_rank);
            scored.truncate(k);
        }
        scored.sort_by(by_rank);
        scored
            .into_iter()
            .map(|(i, s)| Neighbor {
                id: self.vectors.id(i).to_owned(),
                similarity: s,
            })
            .collect()
    }
}

pub fn nearest(vectors: &KeyedVectors, query: &str, k: usize) -> Result<Vec<Neighbor>> {
    NeighborIndex::new(vectors).nearest(query, k)
}

pub fn analogy(vectors: &KeyedVectors, a: &str, b: &str, c: &str, k: usize) -> Result<Vec<Neighbor>> {
    NeighborIndex::new(vectors).analogy(a, b, c, k)
}

/// The two accounts that define the political axis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoliticalAnchors {
    pub republican: String,
    pub democratic: String,
}

impl PoliticalAnchors {
    pub fn new(republican: impl Into<String>, democratic: impl Into<String>) -> Result<Self> {
        let (republican, democratic) = (republican.into(), democratic.into());
        if republican == democratic {
            return Err(Error::InvalidArgument(format!(
                "anchors must be distinct, both are {republican:?}"
            )));
        }
        Ok(PoliticalAnchors { republican, democratic })
    }

    /// The same axis with the poles exchanged.
    pub fn swapped(&self) -> Self {
        PoliticalAnchors {
            republican: self.democratic.clone(),
            democratic: self.republican.clone(),
        }
    }
}

/// `cos(e_R, e) - cos(e_D, e)`; positive leans conservative.
pub fn political_orientation(vectors: &KeyedVectors, entity: &str, anchors: &PoliticalAnchors) -> Result<f64> {
    for id in [entity, anchors.republican.as_str(), anchors.democratic.as_str()] {
        vectors.lookup(id)?;
    }
    Ok(cosine(vectors, &anchors.republican, entity)? - cosine(vectors, &anchors.democratic, entity)?)
}

/// Sources sorted by descending orientation score, ties by id.
pub fn rank_sources<S: AsRef<str>>(
    vectors: &KeyedVectors,
    sources: &[S],
    anchors: &PoliticalAnchors,
) -> Result<Vec<(String, f64)>> {
    let mut scored = sources
        .iter()
        .map(|s| {
            let s = s.as_ref();
            political_orientation(vectors, s, anchors).map(|po| (s.to_owned(), po))
        })
        .collect::<Result<Vec<_>>>()?;
    scored.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.0.cmp(&b.0))
    });
    Ok(scored)
}

/// 1-based ranks with ties sharing their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(Ordering::Equal));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman's rho of two paired samples: Pearson correlation of their
/// average ranks.
pub fn rank_correlation(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::InvalidArgument(format!("{} vs {} values", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::Domain("rank correlation needs at least two items".into()));
    }
    let (rx, ry) = (average_ranks(x), average_ranks(y));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Domain("rank correlation of a constant ranking".into()));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Spearman's rho between two scorings of the same id set.
pub fn spearman<A: AsRef<str>, B: AsRef<str>>(a: &[(A, f64)], b: &[(B, f64)]) -> Result<f64> {
    let lookup: HashMap<&str, f64> = b.iter().map(|(id, s)| (id.as_ref(), *s)).collect();
    let unique_a: HashSet<&str> = a.iter().map(|(id, _)| id.as_ref()).collect();
    if lookup.len() != b.len() || unique_a.len() != a.len() {
        return Err(Error::InvalidArgument("rankings contain duplicate ids".into()));
    }
    if a.len() != b.len() {
        return Err(Error::InvalidArgument(format!("rankings differ in size: {} vs {}", a.len(), b.len())));
    }
    let mut x = Vec::with_capacity(a.len());
    let mut y = Vec::with_capacity(a.len());
    for (id, s) in a {
        let other = lookup
            .get(id.as_ref())
            .ok_or_else(|| Error::InvalidArgument(format!("{} missing from second ranking", id.as_ref())))?;
        x.push(*s);
        y.push(*other);
    }
    rank_correlation(&x, &y)
}

/// Ideology scores per account; negative is liberal, positive conservative.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PollGroundTruth {
    rows: Vec<(String, f64)>,
}

impl PollGroundTruth {
    pub fn new(rows: Vec<(String, f64)>) -> Result<Self> {
        let mut seen = HashSet::new();
        for (id, _) in &rows {
            if !seen.insert(id.as_str()) {
                return Err(Error::InvalidArgument(format!("duplicate poll account {id:?}")));
            }
        }
        Ok(PollGroundTruth { rows })
    }

    pub fn rows(&self) -> &[(String, f64)] {
        &self.rows
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.rows.iter().map(|(id, _)| id.as_str())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Reads `account_id,score` rows. A first row whose score is not numeric
    /// is taken as a header.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
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
            if record.len() != 2 {
                return Err(parse_err(format!("expected `account_id,score`, found {} fields", record.len())));
            }
            match record[1].parse::<f64>() {
                Ok(score) => rows.push((record[0].to_owned(), score)),
                Err(_) if i == 0 => continue,
                Err(_) => return Err(parse_err(format!("bad score {:?}", &record[1]))),
            }
        }
        Self::new(rows)
    }
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        other => Error::Parse {
            path: path.to_owned(),
            line,
            message: format!("{other:?}"),
        },
    }
}

/// Share of truth accounts whose predicted sign matches the poll sign. A
/// score of exactly zero counts as conservative on both sides.
pub fn binary_polarity_accuracy<S: AsRef<str>>(predictions: &[(S, f64)], truth: &PollGroundTruth) -> Result<f64> {
    if truth.is_empty() {
        return Err(Error::Empty("no ground-truth accounts".into()));
    }
    let predicted: HashMap<&str, f64> = predictions.iter().map(|(id, s)| (id.as_ref(), *s)).collect();
    let mut correct = 0usize;
    for (id, score) in truth.rows() {
        let po = predicted
            .get(id.as_str())
            .ok_or_else(|| Error::InvalidArgument(format!("no prediction for {id}")))?;
        if (*po >= 0.0) == (*score >= 0.0) {
            correct += 1;
        }
    }
    Ok(correct as f64 / truth.len() as f64)
}

/// Reads one account id per line, skipping blank lines.
pub fn load_id_list(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut ids = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let id = line.trim();
        if !id.is_empty() {
            ids.push(id.to_owned());
        }
    }
    Ok(ids)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::train::Matrix;

    fn kv(rows: &[(&str, &[f32])]) -> KeyedVectors {
        let dim = rows[0].1.len();
        let data = rows.iter().flat_map(|(_, v)| v.iter().copied()).collect();
        KeyedVectors::new(
            rows.iter().map(|(id, _)| id.to_string()).collect(),
            Matrix::from_vec(rows.len(), dim, data),
        )
        .unwrap()
    }

    #[test]
    fn cosine_hand_values() {
        let v = kv(&[("a", &[1.0, 1.0]), ("b", &[1.0, 0.0]), ("c", &[0.0, 3.0]), ("z", &[0.0, 0.0])]);
        assert!((cosine(&v, "a", "a").unwrap() - 1.0).abs() < 1e-6);
        assert!(cosine(&v, "b", "c").unwrap().abs() < 1e-6);
        assert!((cosine(&v, "a", "b").unwrap() - 0.70711).abs() < 1e-5);
        assert!(matches!(cosine(&v, "a", "z"), Err(Error::Domain(_))));
        assert!(matches!(cosine(&v, "a", "nope"), Err(Error::UnknownEntity(_))));
    }

    #[test]
    fn duplicate_vector_ranks_first() {
        let v = kv(&[("q", &[0.3, 0.4, 0.1]), ("dup", &[0.3, 0.4, 0.1]), ("x", &[0.3, 0.1, 0.4]), ("y", &[-1.0, 0.2, 0.0])]);
        let n = nearest(&v, "q", 2).unwrap();
        assert_eq!(n[0].id, "dup");
        assert!((n[0].similarity - 1.0).abs() < 1e-12);
        assert!(nearest(&v, "q", 0).unwrap().is_empty());
        assert_eq!(nearest(&v, "q", 99).unwrap().len(), 3);
    }

    #[test]
    fn ties_break_by_id() {
        let v = kv(&[("q", &[1.0, 0.0]), ("b", &[1.0, 1.0]), ("a", &[1.0, -1.0])]);
        let ids: Vec<_> = nearest(&v, "q", 2).unwrap().into_iter().map(|n| n.id).collect();
        assert_eq!(ids, ["a", "b"]);
    }

    #[test]
    fn po_arithmetic() {
        // e at 60° from R-ish and ~36.87° from D-ish direction
        let v = kv(&[("R", &[1.0, 0.0]), ("D", &[0.8, 0.6]), ("e", &[0.5, 0.866_025_4])]);
        let anchors = PoliticalAnchors::new("R", "D").unwrap();
        let cr = cosine(&v, "R", "e").unwrap();
        let cd = cosine(&v, "D", "e").unwrap();
        let po = political_orientation(&v, "e", &anchors).unwrap();
        assert_eq!(po, cr - cd);
        assert!(po < 0.0);
        let po_r = political_orientation(&v, "R", &anchors).unwrap();
        assert!((po_r - (1.0 - 0.8)).abs() < 1e-6);
        let err = political_orientation(&v, "missing", &anchors).unwrap_err();
        assert!(err.to_string().contains("missing"));
        assert!(PoliticalAnchors::new("R", "R").is_err());
    }

    #[test]
    fn rank_sources_orders_by_po() {
        let v = kv(&[("R", &[1.0, 0.0]), ("D", &[0.0, 1.0]), ("s1", &[1.0, 0.5]), ("s2", &[0.5, 1.0])]);
        let anchors = PoliticalAnchors::new("R", "D").unwrap();
        let ranked = rank_sources(&v, &["s2", "s1"], &anchors).unwrap();
        assert_eq!(ranked[0].0, "s1");
        assert!(ranked[0].1 > 0.0 && ranked[1].1 < 0.0);
        assert_eq!(rank_sources(&v, &["s1"], &anchors).unwrap().len(), 1);
        assert!(rank_sources(&v, &["s1", "zz"], &anchors).is_err());
    }

    #[test]
    fn spearman_unit_values() {
        let a = [("x", 1.0), ("y", 2.0), ("z", 3.0)];
        assert!((spearman(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        let rev = [("x", 3.0), ("y", 2.0), ("z", 1.0)];
        assert!((spearman(&a, &rev).unwrap() + 1.0).abs() < 1e-12);
        let swap = [("x", 2.0), ("y", 1.0), ("z", 3.0)];
        assert!((spearman(&a, &swap).unwrap() - 0.5).abs() < 1e-12);
        let other = [("x", 1.0), ("y", 2.0), ("w", 3.0)];
        assert!(spearman(&a, &other).is_err());
    }

    #[test]
    fn average_ranks_share_ties() {
        assert_eq!(average_ranks(&[10.0, 20.0, 10.0, 5.0]), [2.5, 4.0, 2.5, 1.0]);
    }

    #[test]
    fn polarity_accuracy_signs() {
        let truth = PollGroundTruth::new(vec![("a".into(), -1.0), ("b".into(), 2.0), ("c".into(), 0.0)]).unwrap();
        let right = [("a", -0.1), ("b", 0.3), ("c", 0.2)];
        assert_eq!(binary_polarity_accuracy(&right, &truth).unwrap(), 1.0);
        let wrong = [("a", 0.1), ("b", -0.3), ("c", -0.2)];
        assert_eq!(binary_polarity_accuracy(&wrong, &truth).unwrap(), 0.0);
        assert!(binary_polarity_accuracy(&right[..2], &truth).is_err());
    }
}
