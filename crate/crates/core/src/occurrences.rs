//! Per-document occurrence statistics for an at-a-distance bigram.
//!
//! An occurrence is an interval spanning one token of each word, in either
//! order. A set of occurrences is non-overlapped when their closed position
//! intervals are pairwise disjoint. `f` is the size of the largest such set,
//! `f_hat` the largest such set whose members all have span strictly below a
//! threshold.
//!
//! Both maxima are computed with a left-to-right sweep. Any interval in an
//! optimal set can be shrunk to a pair of adjacent, differently-labelled
//! tokens without breaking disjointness or the span bound, so the problem
//! reduces to interval scheduling over adjacent pairs, where taking the
//! earliest-ending candidate is optimal.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CorpusError, CorpusIndex, DocId};

/// Size limit for [`brute_force_pair_oracle`].
pub const ORACLE_MAX_POSITIONS: usize = 20;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OccurrenceError {
    #[error("brute-force oracle limited to {ORACLE_MAX_POSITIONS} positions, got {0}")]
    TooLarge(usize),
}

/// An unordered pair of distinct words. The order given at construction is
/// kept for display and for asymmetric measures.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BigramPair {
    pub x: String,
    pub y: String,
}

impl BigramPair {
    pub fn new(x: impl Into<String>, y: impl Into<String>) -> Result<Self, CorpusError> {
        let (x, y) = (x.into(), y.into());
        if x == y {
            return Err(CorpusError::InvalidBigram(x));
        }
        Ok(BigramPair { x, y })
    }

    pub fn swapped(&self) -> Self {
        BigramPair {
            x: self.y.clone(),
            y: self.x.clone(),
        }
    }
}

impl fmt::Display for BigramPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.x, self.y)
    }
}

/// A chosen set of disjoint occurrences, as `(first, last)` positions in
/// increasing order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Pairing {
    pub intervals: Vec<(u32, u32)>,
}

impl Pairing {
    pub fn count(&self) -> u32 {
        self.intervals.len() as u32
    }

    pub fn spans(&self) -> Vec<u32> {
        self.intervals.iter().map(|(a, b)| b - a).collect()
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Side {
    X,
    Y,
}

fn merged(pos_x: &[u32], pos_y: &[u32]) -> Vec<(u32, Side)> {
    let mut out = Vec::with_capacity(pos_x.len() + pos_y.len());
    let (mut i, mut j) = (0, 0);
    while i < pos_x.len() || j < pos_y.len() {
        if j == pos_y.len() || (i < pos_x.len() && pos_x[i] < pos_y[j]) {
            out.push((pos_x[i], Side::X));
            i += 1;
        } else {
            out.push((pos_y[j], Side::Y));
            j += 1;
        }
    }
    out
}

fn sweep(pos_x: &[u32], pos_y: &[u32], max_span_exclusive: Option<u32>) -> Pairing {
    let mut pending: Option<(u32, Side)> = None;
    let mut intervals = Vec::new();
    for (pos, side) in merged(pos_x, pos_y) {
        match pending {
            Some((p, s))
                if s != side && max_span_exclusive.is_none_or(|limit| pos - p < limit) =>
            {
                intervals.push((p, pos));
                pending = None;
            }
            _ => pending = Some((pos, side)),
        }
    }
    Pairing { intervals }
}

/// Maximum number of non-overlapped occurrences and one witness pairing.
pub fn max_nonoverlapped(pos_x: &[u32], pos_y: &[u32]) -> Pairing {
    sweep(pos_x, pos_y, None)
}

/// Maximum number of non-overlapped occurrences with span `< x_threshold`.
pub fn span_constrained(pos_x: &[u32], pos_y: &[u32], x_threshold: u32) -> Pairing {
    sweep(pos_x, pos_y, Some(x_threshold))
}

pub fn span_constrained_frequency(pos_x: &[u32], pos_y: &[u32], x_threshold: u32) -> u32 {
    span_constrained(pos_x, pos_y, x_threshold).count()
}

/// Exhaustive search over every set of disjoint one-x-one-y intervals.
/// Returns `(f, f_hat)`. Test oracle; exponential in the input size.
pub fn brute_force_pair_oracle(
    pos_x: &[u32],
    pos_y: &[u32],
    x_threshold: u32,
) -> Result<(u32, u32), OccurrenceError> {
    let n = pos_x.len() + pos_y.len();
    if n > ORACLE_MAX_POSITIONS {
        return Err(OccurrenceError::TooLarge(n));
    }
    let tokens = merged(pos_x, pos_y);
    let mut best = (0u32, 0u32);
    explore(&tokens, 0, 0, true, x_threshold, &mut best);
    Ok(best)
}

// Each token is either skipped or opens an interval closed by any later
// token of the other word; the next interval starts after the closing token.
fn explore(
    tokens: &[(u32, Side)],
    from: usize,
    size: u32,
    all_short: bool,
    x_threshold: u32,
    best: &mut (u32, u32),
) {
    best.0 = best.0.max(size);
    if all_short {
        best.1 = best.1.max(size);
    }
    for start in from..tokens.len() {
        for end in start + 1..tokens.len() {
            if tokens[end].1 == tokens[start].1 {
                continue;
            }
            let short = tokens[end].0 - tokens[start].0 < x_threshold;
            explore(tokens, end + 1, size + 1, all_short && short, x_threshold, best);
        }
    }
}

/// Statistics of a bigram within one document containing both words.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocPairStats {
    pub doc: DocId,
    /// Document length `l_i` in words.
    pub length: u32,
    /// Maximum non-overlapped occurrences `f_i`.
    pub f: u32,
    /// Span-constrained frequency `f_hat_i`.
    pub f_hat: u32,
    /// Spans of the `f` occurrences of the unconstrained pairing.
    pub spans: Vec<u32>,
    /// Spans of the `f_hat` occurrences of the constrained pairing.
    pub constrained_spans: Vec<u32>,
}

pub fn doc_pair_stats(doc: DocId, length: u32, pos_x: &[u32], pos_y: &[u32], x_threshold: u32) -> DocPairStats {
    let all = max_nonoverlapped(pos_x, pos_y);
    let short = span_constrained(pos_x, pos_y, x_threshold);
    DocPairStats {
        doc,
        length,
        f: all.count(),
        f_hat: short.count(),
        spans: all.spans(),
        constrained_spans: short.spans(),
    }
}

/// One record per document holding both words, in doc id order.
pub fn pair_stats(
    index: &CorpusIndex,
    pair: &BigramPair,
    x_threshold: u32,
) -> Result<Vec<DocPairStats>, CorpusError> {
    let docs = index.docs_with_both(&pair.x, &pair.y)?;
    Ok(docs
        .into_iter()
        .map(|doc| {
            doc_pair_stats(
                doc,
                index.doc_length(doc),
                index.positions(&pair.x, doc),
                index.positions(&pair.y, doc),
                x_threshold,
            )
        })
        .collect())
}

/// Debug dump: `doc_id  length  f  f_hat` per line.
pub fn stats_tsv(index: &CorpusIndex, stats: &[DocPairStats]) -> String {
    let mut out = String::from("doc\tlength\tf\tf_hat\n");
    for s in stats {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            index.docs()[s.doc as usize].name,
            s.length,
            s.f,
            s.f_hat
        ));
    }
    out
}
