//! Seeded synthetic corpora with planted bigrams and recorded ground truth.

use rand::seq::index::sample;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::RawDocument;

/// How one bigram is planted. Each chosen document receives exactly one
/// `x` token and one `y` token.
#[derive(Debug, Clone, PartialEq)]
pub struct PairPlan {
    pub x: String,
    pub y: String,
    /// Documents receiving the pair.
    pub docs: usize,
    /// Of those, how many get a short occurrence (span `1..=near_max_span`).
    pub near_docs: usize,
    pub near_max_span: u32,
    /// Span floor for the remaining documents; `None` places both tokens
    /// uniformly at random.
    pub far_min_span: Option<u32>,
}

impl PairPlan {
    pub fn uniform(x: &str, y: &str, docs: usize) -> Self {
        PairPlan {
            x: x.into(),
            y: y.into(),
            docs,
            near_docs: 0,
            near_max_span: 1,
            far_min_span: None,
        }
    }

    pub fn near(x: &str, y: &str, docs: usize, max_span: u32) -> Self {
        PairPlan {
            x: x.into(),
            y: y.into(),
            docs,
            near_docs: docs,
            near_max_span: max_span,
            far_min_span: None,
        }
    }
}

/// Where a pair landed in one document (1-based positions).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Planted {
    pub plan: usize,
    pub doc: usize,
    pub x_pos: u32,
    pub y_pos: u32,
}

impl Planted {
    pub fn span(&self) -> u32 {
        self.x_pos.abs_diff(self.y_pos)
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub documents: Vec<RawDocument>,
    pub planted: Vec<Planted>,
}

/// Filler vocabulary size. Large enough that filler words rarely matter,
/// small enough that each appears in most documents.
pub const FILLER_VOCABULARY: usize = 200;

/// Build `total_docs` documents of `doc_length` filler tokens and plant each
/// plan. Plans must not need more positions than a document has.
pub fn generate(total_docs: usize, doc_length: usize, plans: &[PairPlan], seed: u64) -> SyntheticCorpus {
    assert!(doc_length >= 2, "documents need room for a pair");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tokens: Vec<Vec<String>> = (0..total_docs)
        .map(|_| {
            (0..doc_length)
                .map(|_| format!("w{}", rng.gen_range(0..FILLER_VOCABULARY)))
                .collect()
        })
        .collect();
    let mut occupied = vec![vec![false; doc_length + 1]; total_docs];
    let mut planted = Vec::new();

    for (pi, plan) in plans.iter().enumerate() {
        assert!(plan.docs <= total_docs && plan.near_docs <= plan.docs);
        let chosen = sample(&mut rng, total_docs, plan.docs).into_vec();
        for (i, doc) in chosen.into_iter().enumerate() {
            let (a, b) = place(&mut rng, &occupied[doc], doc_length as u32, plan, i < plan.near_docs);
            let (x_pos, y_pos) = if rng.gen_bool(0.5) { (a, b) } else { (b, a) };
            occupied[doc][x_pos as usize] = true;
            occupied[doc][y_pos as usize] = true;
            tokens[doc][x_pos as usize - 1] = plan.x.clone();
            tokens[doc][y_pos as usize - 1] = plan.y.clone();
            planted.push(Planted {
                plan: pi,
                doc,
                x_pos,
                y_pos,
            });
        }
    }

    let documents = tokens
        .into_iter()
        .enumerate()
        .map(|(i, t)| RawDocument::new(format!("doc{i:05}"), t.join(" ")))
        .collect();
    SyntheticCorpus { documents, planted }
}

fn place(rng: &mut ChaCha8Rng, occupied: &[bool], len: u32, plan: &PairPlan, near: bool) -> (u32, u32) {
    for _ in 0..10_000 {
        let (a, b) = if near {
            let span = rng.gen_range(1..=plan.near_max_span.min(len - 1));
            let a = rng.gen_range(1..=len - span);
            (a, a + span)
        } else if let Some(min_span) = plan.far_min_span {
            let span = rng.gen_range(min_span.min(len - 1)..=len - 1);
            let a = rng.gen_range(1..=len - span);
            (a, a + span)
        } else {
            let picks = sample(rng, len as usize, 2);
            let (p, q) = (picks.index(0) as u32 + 1, picks.index(1) as u32 + 1);
            (p.min(q), p.max(q))
        };
        if !occupied[a as usize] && !occupied[b as usize] {
            return (a, b);
        }
    }
    panic!("could not place pair {}-{}: document too crowded", plan.x, plan.y);
}

/// A corpus where one pair is placed uniformly at random in each of
/// `docs` documents.
pub fn uniform_pair_corpus(docs: usize, doc_length: usize, seed: u64) -> SyntheticCorpus {
    generate(docs, doc_length, &[PairPlan::uniform("alpha", "beta", docs)], seed)
}

/// A corpus where one pair sits within `max_span` words in every document.
pub fn planted_pair_corpus(docs: usize, doc_length: usize, max_span: u32, seed: u64) -> SyntheticCorpus {
    generate(docs, doc_length, &[PairPlan::near("alpha", "beta", docs, max_span)], seed)
}

/// Pairs `p{i}a`-`p{i}b`, each in `docs_per_pair` documents, the `i`-th with
/// a distinct share of short occurrences so rankings are fully determined.
/// Remaining occurrences are at least `x_threshold` apart.
pub fn graded_pairs(n_pairs: usize, docs_per_pair: usize, x_threshold: u32) -> Vec<PairPlan> {
    (0..n_pairs)
        .map(|i| PairPlan {
            x: format!("p{i}a"),
            y: format!("p{i}b"),
            docs: docs_per_pair,
            near_docs: (i * docs_per_pair) / n_pairs.max(1),
            near_max_span: x_threshold.saturating_sub(1).max(1),
            far_min_span: Some(x_threshold),
        })
        .collect()
}
