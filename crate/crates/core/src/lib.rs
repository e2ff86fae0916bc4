//! Detection of statistically significant lexical co-occurrences.
//!
//! A bigram `(x, y)` is judged on the documents that contain both words.
//! Within each document the number of non-overlapped `x`/`y` occurrences with
//! a short span is compared against a random-permutation null model, and the
//! count of supporting documents is tested against its expectation with a
//! Hoeffding bound. Classical association measures are provided alongside
//! the test, together with a harness that scores how well each measure
//! tracks it.
//!
//! Pipeline: [`corpus`] builds a positional index, [`occurrences`] extracts
//! per-document statistics, [`histogram`] supplies null-model probabilities,
//! [`significance`] runs the test, [`measures`] scores association, and
//! [`evaluation`] correlates rankings.

pub mod cli;
pub mod corpus;
pub mod evaluation;
pub mod histogram;
pub mod measures;
pub mod occurrences;
pub mod significance;
pub mod synthetic;

pub use corpus::{ingest, CorpusIndex, IngestConfig, RawDocument};
pub use histogram::{PiCalculator, PiSource, PiTable};
pub use measures::{MeasureId, MeasureInputs};
pub use occurrences::{BigramPair, DocPairStats};
pub use significance::{CoocType, CsrResult, SignificanceParams};
