//! Follower-graph ingestion and entity selection.
//!
//! A follow graph is the bipartite user → account adjacency of a sampled
//! population. Accounts followed by enough sampled users become *entities*,
//! the items that later receive embeddings.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Deduplicated user → followed-account adjacency.
///
/// Users and accounts are both kept sorted by id, so every downstream
/// traversal is deterministic regardless of input line order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FollowGraph {
    users: Vec<String>,
    accounts: Vec<String>,
    follows: Vec<Vec<u32>>,
    num_edges: usize,
}

#[derive(Default)]
struct GraphBuilder {
    users: HashMap<String, usize>,
    accounts: HashMap<String, u32>,
    account_ids: Vec<String>,
    user_ids: Vec<String>,
    follows: Vec<Vec<u32>>,
}

impl GraphBuilder {
    fn add(&mut self, user: &str, account: &str) {
        let user_idx = match self.users.get(user) {
            Some(&idx) => idx,
            None => {
                let idx = self.user_ids.len();
                self.users.insert(user.to_owned(), idx);
                self.user_ids.push(user.to_owned());
                self.follows.push(Vec::new());
                idx
            }
        };
        let account_idx = match self.accounts.get(account) {
            Some(&idx) => idx,
            None => {
                let idx = self.account_ids.len() as u32;
                self.accounts.insert(account.to_owned(), idx);
                self.account_ids.push(account.to_owned());
                idx
            }
        };
        self.follows[user_idx].push(account_idx);
    }

    fn finish(self) -> FollowGraph {
        let mut order: Vec<usize> = (0..self.user_ids.len()).collect();
        order.sort_unstable_by(|&a, &b| self.user_ids[a].cmp(&self.user_ids[b]));

        // Renumber accounts in id order so equal edge sets give equal graphs.
        let mut account_order: Vec<u32> = (0..self.account_ids.len() as u32).collect();
        account_order.sort_unstable_by(|&a, &b| self.account_ids[a as usize].cmp(&self.account_ids[b as usize]));
        let mut renumber = vec![0u32; account_order.len()];
        for (new, &old) in account_order.iter().enumerate() {
            renumber[old as usize] = new as u32;
        }
        let mut account_ids: Vec<Option<String>> = self.account_ids.into_iter().map(Some).collect();
        let accounts: Vec<String> = account_order
            .iter()
            .map(|&old| account_ids[old as usize].take().expect("each account visited once"))
            .collect();

        let mut user_ids: Vec<Option<String>> = self.user_ids.into_iter().map(Some).collect();
        let mut follows: Vec<Option<Vec<u32>>> = self.follows.into_iter().map(Some).collect();
        let mut users = Vec::with_capacity(order.len());
        let mut sorted_follows = Vec::with_capacity(order.len());
        let mut num_edges = 0;
        for idx in order {
            users.push(user_ids[idx].take().expect("each user visited once"));
            let mut set: Vec<u32> = follows[idx]
                .take()
                .expect("each user visited once")
                .into_iter()
                .map(|a| renumber[a as usize])
                .collect();
            set.sort_unstable();
            set.dedup();
            num_edges += set.len();
            sorted_follows.push(set);
        }

        FollowGraph {
            users,
            accounts,
            follows: sorted_follows,
            num_edges,
        }
    }
}

impl FollowGraph {
    /// Builds a graph from `(user, account)` pairs. Duplicate pairs collapse.
    pub fn from_edges<I, U, A>(edges: I) -> Self
    where
        I: IntoIterator<Item = (U, A)>,
        U: AsRef<str>,
        A: AsRef<str>,
    {
        let mut builder = GraphBuilder::default();
        for (user, account) in edges {
            builder.add(user.as_ref(), account.as_ref());
        }
        builder.finish()
    }

    /// Loads a UTF-8 edge list with one `user<TAB>account` pair per line.
    pub fn load_edges(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_edges(BufReader::new(file), path)
    }

    /// Parses an edge list from any reader; `path` is only used in error
    /// messages.
    pub fn read_edges<R: BufRead>(reader: R, path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut builder = GraphBuilder::default();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let line = line.strip_suffix('\r').unwrap_or(&line);
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split('\t');
            let (user, account) = match (fields.next(), fields.next(), fields.next()) {
                (Some(u), Some(a), None) if !u.is_empty() && !a.is_empty() => (u, a),
                _ => {
                    return Err(Error::Parse {
                        path: path.to_owned(),
                        line: lineno + 1,
                        message: format!(
                            "expected `user<TAB>account`, found {} field(s)",
                            line.split('\t').filter(|f| !f.is_empty()).count()
                        ),
                    })
                }
            };
            builder.add(user, account);
        }
        Ok(builder.finish())
    }

    /// Writes the graph as an edge list, users in id order.
    pub fn write_edges<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (user, follows) in self.users.iter().zip(&self.follows) {
            for &account in follows {
                writeln!(out, "{}\t{}", user, self.accounts[account as usize])?;
            }
        }
        out.flush()
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn num_edges(&self) -> usize {
        self.num_edges
    }

    pub fn num_accounts(&self) -> usize {
        self.accounts.len()
    }

    pub fn user(&self, idx: usize) -> &str {
        &self.users[idx]
    }

    pub fn account(&self, idx: u32) -> &str {
        &self.accounts[idx as usize]
    }

    /// Interned indices of the accounts a user follows, sorted and unique.
    pub fn followed(&self, user_idx: usize) -> &[u32] {
        &self.follows[user_idx]
    }

    /// Iterates `(user id, followed account ids)` in user-id order.
    pub fn users(&self) -> impl Iterator<Item = (&str, impl Iterator<Item = &str> + '_)> + '_ {
        self.users.iter().zip(&self.follows).map(move |(user, follows)| {
            (
                user.as_str(),
                follows.iter().map(move |&a| self.accounts[a as usize].as_str()),
            )
        })
    }

    /// Counts, for every followed account, how many users follow it.
    pub fn compute_popularity(&self) -> PopularityTable {
        let mut per_account = vec![0u64; self.accounts.len()];
        for follows in &self.follows {
            for &a in follows {
                per_account[a as usize] += 1;
            }
        }
        let counts = self
            .accounts
            .iter()
            .cloned()
            .zip(per_account)
            .filter(|&(_, c)| c > 0)
            .collect();
        PopularityTable { counts }
    }
}

/// Follower count of every account within the sample.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PopularityTable {
    counts: HashMap<String, u64>,
}

impl PopularityTable {
    pub fn from_counts<I, S>(counts: I) -> Self
    where
        I: IntoIterator<Item = (S, u64)>,
        S: Into<String>,
    {
        PopularityTable {
            counts: counts.into_iter().map(|(a, c)| (a.into(), c)).collect(),
        }
    }

    pub fn get(&self, account: &str) -> Option<u64> {
        self.counts.get(account).copied()
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.counts.iter().map(|(a, &c)| (a.as_str(), c))
    }

    /// Selects entities by follower count. Output order is descending count,
    /// ties broken by ascending account id.
    pub fn select_entities(&self, threshold: Threshold) -> EntityVocabulary {
        let selected = self
            .counts
            .iter()
            .filter(|&(_, &c)| threshold.admits(c))
            .map(|(a, &c)| (a.clone(), c));
        let mut vocab = EntityVocabulary::from_counts(selected);
        vocab.threshold = Some(threshold);
        vocab
    }
}

/// Popularity cut-off for entity selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Threshold {
    pub min_followers: u64,
    /// `true` admits only counts strictly above `min_followers`.
    pub strict: bool,
}

impl Threshold {
    pub fn at_least(k: u64) -> Self {
        Threshold {
            min_followers: k,
            strict: false,
        }
    }

    pub fn greater_than(k: u64) -> Self {
        Threshold {
            min_followers: k,
            strict: true,
        }
    }

    pub fn admits(&self, count: u64) -> bool {
        if self.strict {
            count > self.min_followers
        } else {
            count >= self.min_followers
        }
    }
}

/// The entity set with dense integer ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EntityVocabulary {
    entities: Vec<String>,
    index: HashMap<String, u32>,
    counts: Vec<u64>,
    threshold: Option<Threshold>,
}

impl EntityVocabulary {
    /// Builds a vocabulary from `(account, follower count)` pairs, ordering
    /// by descending count then ascending id. Duplicate accounts keep the
    /// first occurrence.
    pub fn from_counts<I, S>(counts: I) -> Self
    where
        I: IntoIterator<Item = (S, u64)>,
        S: Into<String>,
    {
        let mut rows: Vec<(String, u64)> = counts.into_iter().map(|(a, c)| (a.into(), c)).collect();
        rows.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        rows.dedup_by(|a, b| a.0 == b.0);
        Self::from_ordered(rows)
    }

    fn from_ordered(rows: Vec<(String, u64)>) -> Self {
        let mut entities = Vec::with_capacity(rows.len());
        let mut counts = Vec::with_capacity(rows.len());
        let mut index = HashMap::with_capacity(rows.len());
        for (i, (account, count)) in rows.into_iter().enumerate() {
            index.insert(account.clone(), i as u32);
            entities.push(account);
            counts.push(count);
        }
        EntityVocabulary {
            entities,
            index,
            counts,
            threshold: None,
        }
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    pub fn id(&self, account: &str) -> Option<u32> {
        self.index.get(account).copied()
    }

    pub fn account(&self, id: u32) -> &str {
        &self.entities[id as usize]
    }

    pub fn count(&self, id: u32) -> u64 {
        self.counts[id as usize]
    }

    pub fn entities(&self) -> &[String] {
        &self.entities
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// The cut-off used to build this vocabulary, if known. Vocabularies
    /// read back from disk do not record it.
    pub fn threshold(&self) -> Option<Threshold> {
        self.threshold
    }

    /// Writes `account_id<TAB>follower_count` lines in vocabulary order.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (account, count) in self.entities.iter().zip(&self.counts) {
            writeln!(out, "{account}\t{count}")?;
        }
        out.flush()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_tsv(BufWriter::new(file))
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_tsv(BufReader::new(file), path)
    }

    /// Reads a vocabulary file. Rows must already be in canonical order so
    /// that dense ids survive a round trip unchanged.
    pub fn read_tsv<R: BufRead>(reader: R, path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let parse_err = |line: usize, message: String| Error::Parse {
            path: path.to_owned(),
            line,
            message,
        };
        let mut rows: Vec<(String, u64)> = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.is_empty() {
                continue;
            }
            let (account, count) = line
                .split_once('\t')
                .ok_or_else(|| parse_err(lineno + 1, "expected `account<TAB>count`".into()))?;
            let count: u64 = count
                .parse()
                .map_err(|_| parse_err(lineno + 1, format!("bad follower count {count:?}")))?;
            if let Some((prev, prev_count)) = rows.last() {
                let ordered = count < *prev_count || (count == *prev_count && account > prev.as_str());
                if !ordered {
                    return Err(parse_err(
                        lineno + 1,
                        format!("vocabulary out of order at {account:?}"),
                    ));
                }
            }
            rows.push((account.to_owned(), count));
        }
        Ok(Self::from_ordered(rows))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(edges: &[(&str, &str)]) -> FollowGraph {
        FollowGraph::from_edges(edges.iter().copied())
    }

    #[test]
    fn duplicate_edges_are_dropped() {
        let input = "u1\ta\nu2\ta\nu1\tb\nu1\tb\n";
        let g = FollowGraph::read_edges(input.as_bytes(), "mem").unwrap();
        assert_eq!(g.num_users(), 2);
        assert_eq!(g.num_edges(), 3);
    }

    #[test]
    fn empty_file_is_empty_graph() {
        let g = FollowGraph::read_edges("".as_bytes(), "mem").unwrap();
        assert_eq!(g.num_users(), 0);
        assert_eq!(g.num_edges(), 0);
    }

    #[test]
    fn single_field_line_names_line_number() {
        let err = FollowGraph::read_edges("u1\n".as_bytes(), "edges.tsv").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 1),
            other => panic!("unexpected error {other:?}"),
        }
        let err = FollowGraph::read_edges("u1\ta\nu2\ta\tb\n".as_bytes(), "edges.tsv").unwrap_err();
        assert!(err.to_string().contains("edges.tsv:2"), "{err}");
    }

    #[test]
    fn popularity_counts_followers() {
        let g = graph(&[("u1", "a"), ("u2", "a"), ("u1", "b")]);
        let pop = g.compute_popularity();
        assert_eq!(pop.get("a"), Some(2));
        assert_eq!(pop.get("b"), Some(1));
        assert!(graph(&[]).compute_popularity().is_empty());

        let many: Vec<(String, &str)> = (0..100).map(|i| (format!("u{i}"), "x")).collect();
        let g = FollowGraph::from_edges(many);
        assert_eq!(g.compute_popularity().get("x"), Some(100));
    }

    #[test]
    fn strict_and_inclusive_thresholds() {
        let pop = PopularityTable::from_counts([("a", 2), ("b", 1)]);
        let strict = pop.select_entities(Threshold::greater_than(1));
        assert_eq!(strict.entities(), ["a"]);
        let inclusive = pop.select_entities(Threshold::at_least(1));
        assert_eq!(inclusive.entities(), ["a", "b"]);
    }

    #[test]
    fn ties_order_by_account_id() {
        let pop = PopularityTable::from_counts([("b", 5), ("a", 5)]);
        let vocab = pop.select_entities(Threshold::greater_than(0));
        assert_eq!(vocab.entities(), ["a", "b"]);
        assert_eq!(vocab.id("a"), Some(0));
        assert_eq!(vocab.account(1), "b");
    }

    #[test]
    fn vocabulary_tsv_is_bit_exact() {
        let pop = PopularityTable::from_counts([("x", 3), ("b", 9), ("a", 3)]);
        let vocab = pop.select_entities(Threshold::at_least(0));
        let mut buf = Vec::new();
        vocab.write_tsv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "b\t9\na\t3\nx\t3\n");
        let back = EntityVocabulary::read_tsv(buf.as_slice(), "mem").unwrap();
        assert_eq!(back.entities(), vocab.entities());
        assert_eq!(back.counts(), vocab.counts());
        let mut again = Vec::new();
        back.write_tsv(&mut again).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn unordered_vocabulary_is_rejected() {
        let err = EntityVocabulary::read_tsv("a\t1\nb\t2\n".as_bytes(), "v.tsv").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn edge_list_round_trip() {
        let g = graph(&[("u2", "a"), ("u1", "b"), ("u1", "a")]);
        let mut buf = Vec::new();
        g.write_edges(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "u1\ta\nu1\tb\nu2\ta\n");
        let back = FollowGraph::read_edges(buf.as_slice(), "mem").unwrap();
        assert_eq!(back.num_edges(), 3);
        assert_eq!(back.compute_popularity(), g.compute_popularity());
    }
}
