//! Anonymized per-user entity contexts.
//!
//! Each retained user contributes the set of vocabulary entities they
//! follow. User identities are not carried into the corpus.

use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::{EntityVocabulary, FollowGraph};

const CORPUS_MAGIC: &[u8; 8] = b"SVCTX\x00\x00\x01";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CorpusOptions {
    /// Users with fewer entities than this are dropped. Must be at least 2.
    pub min_entities: usize,
    /// Keep at most this many entities per user, preferring the most
    /// popular (lowest dense ids).
    pub max_entities: Option<usize>,
}

impl Default for CorpusOptions {
    fn default() -> Self {
        CorpusOptions {
            min_entities: 2,
            max_entities: None,
        }
    }
}

/// Set contexts as dense-id arrays; ids within a context are sorted.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ContextCorpus {
    vocab_size: u32,
    contexts: Vec<Vec<u32>>,
    total_tokens: u64,
    dropped: u64,
}

impl ContextCorpus {
    /// Builds a corpus directly from dense-id contexts. Each context is
    /// sorted and deduplicated; ids must be below `vocab_size`.
    pub fn from_contexts(vocab_size: u32, contexts: Vec<Vec<u32>>) -> Result<Self> {
        let mut total_tokens = 0;
        let mut out = Vec::with_capacity(contexts.len());
        for mut ctx in contexts {
            ctx.sort_unstable();
            ctx.dedup();
            if let Some(&bad) = ctx.iter().find(|&&id| id >= vocab_size) {
                return Err(Error::InvalidArgument(format!(
                    "dense id {bad} outside vocabulary of size {vocab_size}"
                )));
            }
            total_tokens += ctx.len() as u64;
            out.push(ctx);
        }
        Ok(ContextCorpus {
            vocab_size,
            contexts: out,
            total_tokens,
            dropped: 0,
        })
    }

    pub fn vocab_size(&self) -> u32 {
        self.vocab_size
    }

    pub fn contexts(&self) -> &[Vec<u32>] {
        &self.contexts
    }

    pub fn len(&self) -> usize {
        self.contexts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contexts.is_empty()
    }

    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    /// Number of users dropped for falling below `min_entities`.
    pub fn dropped(&self) -> u64 {
        self.dropped
    }

    /// Occurrences of every dense id across all contexts.
    pub fn token_counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.vocab_size as usize];
        for ctx in &self.contexts {
            for &id in ctx {
                counts[id as usize] += 1;
            }
        }
        counts
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(BufWriter::new(file))
            .map_err(|e| Error::io(path, e))
    }

    /// Writes the binary corpus: magic, `u32` vocabulary size, `u64`
    /// dropped-user count, then `u32` length-prefixed `u32` id arrays. All
    /// integers little-endian.
    pub fn write_to<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        out.write_all(CORPUS_MAGIC)?;
        out.write_all(&self.vocab_size.to_le_bytes())?;
        out.write_all(&self.dropped.to_le_bytes())?;
        for ctx in &self.contexts {
            out.write_all(&(ctx.len() as u32).to_le_bytes())?;
            for &id in ctx {
                out.write_all(&id.to_le_bytes())?;
            }
        }
        out.flush()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(BufReader::new(file)).map_err(|e| match e {
            Error::Io { source, .. } => Error::io(path, source),
            other => other,
        })
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<Self> {
        let io = |e| Error::io("<corpus>", e);
        let mut magic = [0u8; 8];
        read_exact_or_format(&mut input, &mut magic, "corpus header")?;
        if &magic != CORPUS_MAGIC {
            return Err(Error::Format("not a context corpus (bad magic)".into()));
        }
        let mut word = [0u8; 4];
        read_exact_or_format(&mut input, &mut word, "corpus header")?;
        let vocab_size = u32::from_le_bytes(word);
        let mut long = [0u8; 8];
        read_exact_or_format(&mut input, &mut long, "corpus header")?;
        let dropped = u64::from_le_bytes(long);

        let mut contexts = Vec::new();
        let mut total_tokens = 0u64;
        loop {
            match input.read_exact(&mut word) {
                Ok(()) => {}
                Err(e) if e.kind() == ErrorKind::UnexpectedEof => break,
                Err(e) => return Err(io(e)),
            }
            let len = u32::from_le_bytes(word) as usize;
            let mut bytes = vec![0u8; len * 4];
            read_exact_or_format(&mut input, &mut bytes, "context body")?;
            let ctx: Vec<u32> = bytes
                .chunks_exact(4)
                .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            if let Some(&bad) = ctx.iter().find(|&&id| id >= vocab_size) {
                return Err(Error::Format(format!(
                    "context {} holds id {bad} outside vocabulary of size {vocab_size}",
                    contexts.len()
                )));
            }
            total_tokens += ctx.len() as u64;
            contexts.push(ctx);
        }
        Ok(ContextCorpus {
            vocab_size,
            contexts,
            total_tokens,
            dropped,
        })
    }
}

fn read_exact_or_format<R: Read>(input: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    input.read_exact(buf).map_err(|e| {
        if e.kind() == ErrorKind::UnexpectedEof {
            Error::Format(format!("truncated {what}"))
        } else {
            Error::io("<corpus>", e)
        }
    })
}

/// Filters every user's follows down to vocabulary entities and keeps the
/// users with at least `min_entities` of them.
pub fn build_contexts(
    graph: &FollowGraph,
    vocab: &EntityVocabulary,
    options: CorpusOptions,
) -> Result<ContextCorpus> {
    if options.min_entities < 2 {
        return Err(Error::Config(format!(
            "min_entities must be at least 2, got {}",
            options.min_entities
        )));
    }
    if options.max_entities.is_some_and(|m| m < options.min_entities) {
        return Err(Error::Config("max_entities below min_entities".into()));
    }

    // Map interned account indices to dense ids once.
    let dense: Vec<Option<u32>> = (0..graph.num_accounts() as u32)
        .map(|a| vocab.id(graph.account(a)))
        .collect();

    let mut contexts = Vec::new();
    let mut total_tokens = 0u64;
    let mut dropped = 0u64;
    for user in 0..graph.num_users() {
        let mut ctx: Vec<u32> = graph
            .followed(user)
            .iter()
            .filter_map(|&a| dense[a as usize])
            .collect();
        ctx.sort_unstable();
        ctx.dedup();
        if ctx.len() < options.min_entities {
            dropped += 1;
            continue;
        }
        if let Some(cap) = options.max_entities {
            ctx.truncate(cap);
        }
        total_tokens += ctx.len() as u64;
        contexts.push(ctx);
    }

    Ok(ContextCorpus {
        vocab_size: vocab.len() as u32,
        contexts,
        total_tokens,
        dropped,
    })
}

/// Distribution of context lengths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorpusStats {
    pub mean: f64,
    pub median: f64,
    /// Population standard deviation.
    pub std_dev: f64,
    pub retained: u64,
    pub dropped: u64,
}

pub fn corpus_stats(corpus: &ContextCorpus) -> Result<CorpusStats> {
    let lengths: Vec<usize> = corpus.contexts.iter().map(Vec::len).collect();
    let summary = LengthSummary::of(&lengths)
        .ok_or_else(|| Error::Empty("corpus has no contexts".into()))?;
    Ok(CorpusStats {
        mean: summary.mean,
        median: summary.median,
        std_dev: summary.std_dev,
        retained: lengths.len() as u64,
        dropped: corpus.dropped,
    })
}

/// Mean, median and population standard deviation of a list of sizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LengthSummary {
    pub mean: f64,
    pub median: f64,
    pub std_dev: f64,
}

impl LengthSummary {
    pub fn of(lengths: &[usize]) -> Option<Self> {
        if lengths.is_empty() {
            return None;
        }
        let n = lengths.len() as f64;
        let mean = lengths.iter().map(|&l| l as f64).sum::<f64>() / n;
        let var = lengths
            .iter()
            .map(|&l| (l as f64 - mean).powi(2))
            .sum::<f64>()
            / n;
        let mut sorted = lengths.to_vec();
        sorted.sort_unstable();
        let mid = sorted.len() / 2;
        let median = if sorted.len() % 2 == 0 {
            (sorted[mid - 1] + sorted[mid]) as f64 / 2.0
        } else {
            sorted[mid] as f64
        };
        Some(LengthSummary {
            mean,
            median,
            std_dev: var.sqrt(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Threshold;

    fn corpus_of(lengths: &[usize]) -> ContextCorpus {
        let vocab_size = *lengths.iter().max().unwrap_or(&1) as u32;
        let contexts = lengths.iter().map(|&l| (0..l as u32).collect()).collect();
        ContextCorpus::from_contexts(vocab_size, contexts).unwrap()
    }

    #[test]
    fn non_entities_are_filtered() {
        let graph = FollowGraph::from_edges([("u1", "a"), ("u1", "x"), ("u1", "b"), ("u2", "a"), ("u3", "b")]);
        let vocab = EntityVocabulary::from_counts([("a", 2), ("b", 2)]);
        let corpus = build_contexts(&graph, &vocab, CorpusOptions::default()).unwrap();
        assert_eq!(corpus.contexts(), [vec![0, 1]]);
        assert_eq!(corpus.dropped(), 2);
        assert_eq!(corpus.total_tokens(), 2);
    }

    #[test]
    fn min_entities_below_two_is_rejected() {
        let graph = FollowGraph::default();
        let vocab = EntityVocabulary::default();
        let opts = CorpusOptions {
            min_entities: 1,
            max_entities: None,
        };
        assert!(matches!(build_contexts(&graph, &vocab, opts), Err(Error::Config(_))));
    }

    #[test]
    fn cap_keeps_most_popular() {
        let graph = FollowGraph::from_edges([("u", "a"), ("u", "b"), ("u", "c")]);
        let vocab = EntityVocabulary::from_counts([("a", 3), ("b", 2), ("c", 1)]);
        let opts = CorpusOptions {
            min_entities: 2,
            max_entities: Some(2),
        };
        let corpus = build_contexts(&graph, &vocab, opts).unwrap();
        assert_eq!(corpus.contexts(), [vec![0, 1]]);
    }

    #[test]
    fn stats_hand_values() {
        let s = corpus_stats(&corpus_of(&[2, 4])).unwrap();
        assert_eq!((s.mean, s.median), (3.0, 3.0));
        let s = corpus_stats(&corpus_of(&[3])).unwrap();
        assert_eq!((s.mean, s.median, s.std_dev), (3.0, 3.0, 0.0));
        let s = corpus_stats(&corpus_of(&[2, 2, 8])).unwrap();
        assert_eq!((s.mean, s.median), (4.0, 2.0));
        assert!((s.std_dev - 8f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn stats_of_empty_corpus_fails() {
        assert!(matches!(corpus_stats(&ContextCorpus::default()), Err(Error::Empty(_))));
    }

    #[test]
    fn binary_round_trip_and_truncation() {
        let graph = FollowGraph::from_edges([("u1", "a"), ("u1", "b"), ("u2", "a"), ("u2", "b"), ("u2", "c")]);
        let vocab = graph.compute_popularity().select_entities(Threshold::at_least(1));
        let corpus = build_contexts(&graph, &vocab, CorpusOptions::default()).unwrap();
        let mut buf = Vec::new();
        corpus.write_to(&mut buf).unwrap();
        let back = ContextCorpus::read_from(buf.as_slice()).unwrap();
        assert_eq!(back, corpus);

        let cut = &buf[..buf.len() - 2];
        assert!(matches!(ContextCorpus::read_from(cut), Err(Error::Format(_))));
        assert!(matches!(ContextCorpus::read_from(&b"garbage!garbage!"[..]), Err(Error::Format(_))));
    }
}
