//! Frequency-based association measures.
//!
//! All measures read the same sufficient statistics, [`MeasureInputs`]. The
//! bigram frequency is always the span-constrained one, summed over the
//! corpus. Natural logarithms throughout.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::CorpusIndex;
use crate::occurrences::{BigramPair, DocPairStats};

#[derive(Debug, Error, PartialEq)]
pub enum MeasureError {
    #[error("{measure} undefined: {reason}")]
    Undefined { measure: MeasureId, reason: String },
    #[error("inconsistent inputs: {0}")]
    Inconsistent(String),
    #[error("unknown measure {0:?}")]
    Unknown(String),
}

pub type Result<T> = std::result::Result<T, MeasureError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MeasureId {
    Csa,
    Llr,
    Pmi,
    Sci,
    Cwcd,
    ChiSquare,
    TTest,
    Dice,
    Ochiai,
    Jaccard,
}

/// The three invariance properties, as tabulated for each measure in the
/// literature. Documentation only: [`property_check`] measures the actual
/// behavior of each formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MeasureProperties {
    pub symmetric: bool,
    pub null_addition: bool,
    pub homogeneous: bool,
}

impl MeasureId {
    pub const ALL: [MeasureId; 10] = [
        MeasureId::Csa,
        MeasureId::Llr,
        MeasureId::Pmi,
        MeasureId::Sci,
        MeasureId::Cwcd,
        MeasureId::ChiSquare,
        MeasureId::TTest,
        MeasureId::Dice,
        MeasureId::Ochiai,
        MeasureId::Jaccard,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MeasureId::Csa => "csa",
            MeasureId::Llr => "llr",
            MeasureId::Pmi => "pmi",
            MeasureId::Sci => "sci",
            MeasureId::Cwcd => "cwcd",
            MeasureId::ChiSquare => "chisquare",
            MeasureId::TTest => "ttest",
            MeasureId::Dice => "dice",
            MeasureId::Ochiai => "ochiai",
            MeasureId::Jaccard => "jaccard",
        }
    }

    pub fn properties(self) -> MeasureProperties {
        let (symmetric, null_addition, homogeneous) = match self {
            MeasureId::Csa => (true, false, true),
            MeasureId::Llr => (true, true, true),
            MeasureId::Pmi => (true, false, true),
            MeasureId::Sci => (false, false, true),
            MeasureId::Cwcd => (false, false, true),
            MeasureId::ChiSquare => (true, true, true),
            MeasureId::TTest => (true, false, true),
            MeasureId::Dice => (true, false, true),
            MeasureId::Ochiai => (true, false, true),
            MeasureId::Jaccard => (true, false, true),
        };
        MeasureProperties {
            symmetric,
            null_addition,
            homogeneous,
        }
    }
}

impl fmt::Display for MeasureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MeasureId {
    type Err = MeasureError;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace(['-', '_'], "");
        MeasureId::ALL
            .into_iter()
            .find(|m| m.name() == key || (key == "chi2" && *m == MeasureId::ChiSquare))
            .ok_or_else(|| MeasureError::Unknown(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureInputs {
    pub f_x: u64,
    pub f_y: u64,
    /// Corpus-wide span-constrained bigram frequency.
    pub f_hat_xy: u64,
    /// Total tokens.
    pub n: u64,
    /// Joint-document count.
    pub k: u64,
    /// Spans of the `f_hat_xy` occurrences.
    pub spans: Vec<u32>,
}

impl MeasureInputs {
    pub fn from_stats(index: &CorpusIndex, pair: &BigramPair, stats: &[DocPairStats]) -> Self {
        MeasureInputs {
            f_x: index.unigram_frequency(&pair.x),
            f_y: index.unigram_frequency(&pair.y),
            f_hat_xy: stats.iter().map(|s| s.f_hat as u64).sum(),
            n: index.total_tokens(),
            k: stats.len() as u64,
            spans: stats
                .iter()
                .flat_map(|s| s.constrained_spans.iter().copied())
                .collect(),
        }
    }

    pub fn swapped(&self) -> Self {
        MeasureInputs {
            f_x: self.f_y,
            f_y: self.f_x,
            ..self.clone()
        }
    }

    pub fn p_x(&self) -> f64 {
        self.f_x as f64 / self.n as f64
    }

    pub fn p_y(&self) -> f64 {
        self.f_y as f64 / self.n as f64
    }

    pub fn p_hat_xy(&self) -> f64 {
        self.f_hat_xy as f64 / self.n as f64
    }

    /// Observed 2x2 table `[xy, x~y, ~xy, ~x~y]`.
    fn contingency(&self) -> Result<[f64; 4]> {
        let (fx, fy, fxy, n) = (self.f_x as i128, self.f_y as i128, self.f_hat_xy as i128, self.n as i128);
        let cells = [fxy, fx - fxy, fy - fxy, n - fx - fy + fxy];
        if cells.iter().any(|&c| c < 0) {
            return Err(MeasureError::Inconsistent(format!(
                "negative contingency cell for f(x)={fx}, f(y)={fy}, f(x,y)={fxy}, N={n}"
            )));
        }
        Ok(cells.map(|c| c as f64))
    }

    fn check(&self) -> Result<()> {
        if self.n == 0 {
            return Err(MeasureError::Inconsistent("N = 0".into()));
        }
        if self.f_x == 0 || self.f_y == 0 {
            return Err(MeasureError::Inconsistent(
                "unigram frequency of zero".into(),
            ));
        }
        if self.f_hat_xy > self.f_x.min(self.f_y) {
            return Err(MeasureError::Inconsistent(format!(
                "f(x,y)={} exceeds min(f(x), f(y))",
                self.f_hat_xy
            )));
        }
        self.contingency().map(|_| ())
    }
}

/// How undefined values (log of zero, empty span set) are reported.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UndefinedPolicy {
    #[default]
    Error,
    NegInfinity,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasureOptions {
    pub undefined: UndefinedPolicy,
    /// Report LLR as the `2N`-scaled deviance and chi-square in count form
    /// instead of the per-token normalized values.
    pub scaled_statistics: bool,
}

fn undefined(measure: MeasureId, reason: &str, opts: MeasureOptions) -> Result<f64> {
    match opts.undefined {
        UndefinedPolicy::Error => Err(MeasureError::Undefined {
            measure,
            reason: reason.to_string(),
        }),
        UndefinedPolicy::NegInfinity => Ok(f64::NEG_INFINITY),
    }
}

pub fn score(measure: MeasureId, inputs: &MeasureInputs) -> Result<f64> {
    score_with(measure, inputs, MeasureOptions::default())
}

pub fn score_with(measure: MeasureId, inputs: &MeasureInputs, opts: MeasureOptions) -> Result<f64> {
    inputs.check()?;
    let fxy = inputs.f_hat_xy as f64;
    let (fx, fy, n) = (inputs.f_x as f64, inputs.f_y as f64, inputs.n as f64);
    let (px, py, pxy) = (inputs.p_x(), inputs.p_y(), inputs.p_hat_xy());
    let value = match measure {
        MeasureId::Csa => {
            if inputs.k == 0 {
                return undefined(measure, "K = 0", opts);
            }
            fxy / (inputs.k as f64).sqrt()
        }
        MeasureId::Pmi => {
            if inputs.f_hat_xy == 0 {
                return undefined(measure, "f(x,y) = 0", opts);
            }
            (pxy / (px * py)).ln()
        }
        MeasureId::Sci => pxy / (px * py.sqrt()),
        MeasureId::Cwcd => {
            if inputs.spans.is_empty() {
                return undefined(measure, "no constrained spans", opts);
            }
            let m = harmonic_mean(&inputs.spans);
            (fxy / px) * ((1.0 / px.max(py)) / m)
        }
        MeasureId::Dice => 2.0 * fxy / (fx + fy),
        MeasureId::Ochiai => fxy / (fx * fy).sqrt(),
        MeasureId::Jaccard => fxy / (fx + fy - fxy),
        MeasureId::Llr => {
            let obs = inputs.contingency()?;
            let marg = [px * py, px * (1.0 - py), (1.0 - px) * py, (1.0 - px) * (1.0 - py)];
            let sum: f64 = obs
                .iter()
                .zip(marg)
                .filter(|(o, _)| **o > 0.0)
                .map(|(o, e)| {
                    let p = o / n;
                    p * (p / e).ln()
                })
                .sum();
            if opts.scaled_statistics {
                2.0 * n * sum
            } else {
                sum
            }
        }
        MeasureId::ChiSquare => {
            let obs = inputs.contingency()?;
            let expected = [
                n * px * py,
                n * px * (1.0 - py),
                n * (1.0 - px) * py,
                n * (1.0 - px) * (1.0 - py),
            ];
            if expected.iter().any(|&e| e <= 0.0) {
                return undefined(measure, "zero expected cell", opts);
            }
            let chi: f64 = obs
                .iter()
                .zip(expected)
                .map(|(o, e)| (o - e) * (o - e) / e)
                .sum();
            if opts.scaled_statistics {
                chi
            } else {
                chi / n
            }
        }
        MeasureId::TTest => {
            if inputs.f_hat_xy == 0 || inputs.f_hat_xy == inputs.n {
                return undefined(measure, "zero variance estimate", opts);
            }
            let expected = n * px * py;
            (fxy - expected) / (fxy * (1.0 - fxy / n)).sqrt()
        }
    };
    Ok(value)
}

pub fn harmonic_mean(values: &[u32]) -> f64 {
    values.len() as f64 / values.iter().map(|&v| 1.0 / v as f64).sum::<f64>()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedItem {
    pub pair: BigramPair,
    pub score: f64,
    /// 1-based position.
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ranking {
    pub measure: String,
    pub items: Vec<RankedItem>,
    /// Pairs whose score was undefined, with the reason.
    pub undefined: Vec<(BigramPair, String)>,
}

impl Ranking {
    /// Sort `(pair, score)` descending; ties go to the lexicographically
    /// smaller pair.
    pub fn from_scores(measure: impl Into<String>, scores: Vec<(BigramPair, f64)>) -> Self {
        let mut scored = scores;
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        Ranking {
            measure: measure.into(),
            items: scored
                .into_iter()
                .enumerate()
                .map(|(i, (pair, score))| RankedItem {
                    pair,
                    score,
                    rank: i + 1,
                })
                .collect(),
            undefined: Vec::new(),
        }
    }

    pub fn rank_of(&self, pair: &BigramPair) -> Option<usize> {
        self.items.iter().find(|i| &i.pair == pair).map(|i| i.rank)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

pub fn rank(measure: MeasureId, inputs: &[(BigramPair, MeasureInputs)]) -> Result<Ranking> {
    rank_with(measure, inputs, MeasureOptions::default())
}

pub fn rank_with(
    measure: MeasureId,
    inputs: &[(BigramPair, MeasureInputs)],
    opts: MeasureOptions,
) -> Result<Ranking> {
    let mut scores = Vec::with_capacity(inputs.len());
    let mut skipped = Vec::new();
    for (pair, inp) in inputs {
        match score_with(measure, inp, opts) {
            Ok(v) => scores.push((pair.clone(), v)),
            Err(e @ MeasureError::Undefined { .. }) => skipped.push((pair.clone(), e.to_string())),
            Err(e) => return Err(e),
        }
    }
    let mut ranking = Ranking::from_scores(measure.name(), scores);
    ranking.undefined = skipped;
    Ok(ranking)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transform {
    /// Merge `m` copies of the corpus.
    Replicate(u64),
    /// Add `d` tokens containing neither word.
    NullAdd(u64),
}

impl Transform {
    pub fn apply(self, inputs: &MeasureInputs) -> MeasureInputs {
        match self {
            Transform::Replicate(m) => MeasureInputs {
                f_x: inputs.f_x * m,
                f_y: inputs.f_y * m,
                f_hat_xy: inputs.f_hat_xy * m,
                n: inputs.n * m,
                k: inputs.k * m,
                spans: inputs
                    .spans
                    .iter()
                    .copied()
                    .cycle()
                    .take(inputs.spans.len() * m as usize)
                    .collect(),
            },
            Transform::NullAdd(d) => MeasureInputs {
                n: inputs.n + d,
                ..inputs.clone()
            },
        }
    }
}

/// Scores before and after a transform.
pub fn property_check(measure: MeasureId, inputs: &MeasureInputs, transform: Transform) -> Result<(f64, f64)> {
    match transform {
        Transform::Replicate(m) if m < 2 => {
            return Err(MeasureError::Inconsistent("replication factor must be >= 2".into()))
        }
        Transform::NullAdd(0) => {
            return Err(MeasureError::Inconsistent("null addition needs d >= 1".into()))
        }
        _ => {}
    }
    Ok((score(measure, inputs)?, score(measure, &transform.apply(inputs))?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inputs(f_x: u64, f_y: u64, f_hat_xy: u64, n: u64, k: u64) -> MeasureInputs {
        MeasureInputs {
            f_x,
            f_y,
            f_hat_xy,
            n,
            k,
            spans: vec![2; f_hat_xy as usize],
        }
    }

    fn pair(a: &str, b: &str) -> BigramPair {
        BigramPair::new(a, b).unwrap()
    }

    #[test]
    fn direct_arithmetic() {
        let i = inputs(100, 25, 10, 100_000, 40);
        assert!((score(MeasureId::Ochiai, &i).unwrap() - 0.2).abs() < 1e-15);
        assert!((score(MeasureId::Dice, &i).unwrap() - 20.0 / 125.0).abs() < 1e-15);
        assert!((score(MeasureId::Jaccard, &i).unwrap() - 10.0 / 115.0).abs() < 1e-15);
        let i = inputs(100, 50, 30, 100_000, 100);
        assert!((score(MeasureId::Csa, &i).unwrap() - 3.0).abs() < 1e-15);
    }

    #[test]
    fn pmi_zero_at_independence() {
        // p(x,y) = 0.01 * 0.02 with N = 10^6.
        let i = inputs(10_000, 20_000, 200, 1_000_000, 50);
        assert!(score(MeasureId::Pmi, &i).unwrap().abs() < 1e-12);
        let t = score(MeasureId::TTest, &i).unwrap();
        assert!(t.abs() < 1e-12);
    }

    #[test]
    fn llr_and_chi_square_are_zero_at_independence() {
        let i = inputs(10_000, 20_000, 200, 1_000_000, 50);
        assert!(score(MeasureId::Llr, &i).unwrap().abs() < 1e-15);
        assert!(score(MeasureId::ChiSquare, &i).unwrap().abs() < 1e-15);
    }

    #[test]
    fn scaled_statistics() {
        let i = inputs(300, 200, 40, 50_000, 30);
        let opts = MeasureOptions {
            scaled_statistics: true,
            ..Default::default()
        };
        let llr = score(MeasureId::Llr, &i).unwrap();
        let llr2 = score_with(MeasureId::Llr, &i, opts).unwrap();
        assert!((llr2 - 2.0 * 50_000.0 * llr).abs() < 1e-9 * llr2);
        let chi = score(MeasureId::ChiSquare, &i).unwrap();
        let chi_n = score_with(MeasureId::ChiSquare, &i, opts).unwrap();
        assert!((chi_n - 50_000.0 * chi).abs() < 1e-9 * chi_n);
    }

    #[test]
    fn cwcd_uses_harmonic_mean_of_spans() {
        let mut i = inputs(100, 50, 2, 10_000, 2);
        i.spans = vec![1, 3];
        let m = 2.0 / (1.0 + 1.0 / 3.0);
        let (px, py) = (0.01f64, 0.005f64);
        let expected = (2.0 / px) * ((1.0 / px.max(py)) / m);
        assert!((score(MeasureId::Cwcd, &i).unwrap() - expected).abs() < 1e-9);
    }

    #[test]
    fn undefined_and_inconsistent() {
        let i = inputs(10, 10, 0, 1000, 3);
        assert!(matches!(score(MeasureId::Pmi, &i), Err(MeasureError::Undefined { .. })));
        assert!(matches!(score(MeasureId::Cwcd, &i), Err(MeasureError::Undefined { .. })));
        let opts = MeasureOptions {
            undefined: UndefinedPolicy::NegInfinity,
            ..Default::default()
        };
        assert_eq!(score_with(MeasureId::Pmi, &i, opts).unwrap(), f64::NEG_INFINITY);
        assert_eq!(score(MeasureId::Ochiai, &i).unwrap(), 0.0);

        let bad = inputs(10, 10, 11, 1000, 3);
        assert!(matches!(score(MeasureId::Dice, &bad), Err(MeasureError::Inconsistent(_))));
        let bad = inputs(800, 800, 5, 1000, 3);
        assert!(matches!(score(MeasureId::Llr, &bad), Err(MeasureError::Inconsistent(_))));
        let k0 = inputs(10, 10, 0, 1000, 0);
        assert!(matches!(score(MeasureId::Csa, &k0), Err(MeasureError::Undefined { .. })));
    }

    #[test]
    fn parse_names() {
        for m in MeasureId::ALL {
            assert_eq!(m.name().parse::<MeasureId>().unwrap(), m);
        }
        assert_eq!("Chi2".parse::<MeasureId>().unwrap(), MeasureId::ChiSquare);
        assert_eq!("t-test".parse::<MeasureId>().unwrap(), MeasureId::TTest);
        assert!("cosine".parse::<MeasureId>().is_err());
    }

    #[test]
    fn ranking_order_and_ties() {
        let items = vec![
            (pair("b", "c"), inputs(100, 100, 10, 10_000, 5)),
            (pair("a", "z"), inputs(100, 100, 20, 10_000, 5)),
            (pair("a", "b"), inputs(100, 100, 10, 10_000, 5)),
        ];
        let r = rank(MeasureId::Ochiai, &items).unwrap();
        let order: Vec<String> = r.items.iter().map(|i| i.pair.to_string()).collect();
        assert_eq!(order, ["a-z", "a-b", "b-c"]);
        assert_eq!(r.rank_of(&pair("b", "c")), Some(3));

        let mut with_zero = items.clone();
        with_zero.push((pair("q", "r"), inputs(5, 5, 0, 10_000, 1)));
        let r = rank(MeasureId::Pmi, &with_zero).unwrap();
        assert_eq!(r.items.len(), 3);
        assert_eq!(r.undefined.len(), 1);
    }

    #[test]
    fn pmi_and_ochiai_disagree_on_rare_words() {
        // N = 10^6. Rare: f(x)=f(y)=10, f(x,y)=2 -> PMI ln(2e6/100) = 9.90,
        // Ochiai 0.2. Common: f(x)=f(y)=1000, f(x,y)=300 -> PMI ln(300) = 5.70,
        // Ochiai 0.3.
        let items = vec![
            (pair("rare", "word"), inputs(10, 10, 2, 1_000_000, 2)),
            (pair("common", "word"), inputs(1000, 1000, 300, 1_000_000, 200)),
        ];
        let pmi = rank(MeasureId::Pmi, &items).unwrap();
        let och = rank(MeasureId::Ochiai, &items).unwrap();
        assert_eq!(pmi.items[0].pair, pair("rare", "word"));
        assert_eq!(och.items[0].pair, pair("common", "word"));
        assert!((pmi.items[0].score - (2e6f64 / 100.0).ln()).abs() < 1e-12);
        assert!((och.items[0].score - 0.3).abs() < 1e-15);
    }

    #[test]
    fn transforms() {
        let i = inputs(120, 80, 15, 40_000, 12);
        let (a, b) = property_check(MeasureId::Ochiai, &i, Transform::Replicate(3)).unwrap();
        assert!((a - b).abs() < 1e-15);
        let (a, b) = property_check(MeasureId::Pmi, &i, Transform::NullAdd(10_000)).unwrap();
        assert!((a - b).abs() > 0.1);
        let (a, b) = property_check(MeasureId::Csa, &i, Transform::Replicate(4)).unwrap();
        assert!((b - 2.0 * a).abs() < 1e-12);
        assert!(property_check(MeasureId::Csa, &i, Transform::Replicate(1)).is_err());
        assert!(property_check(MeasureId::Csa, &i, Transform::NullAdd(0)).is_err());
        assert_eq!(Transform::Replicate(3).apply(&i).spans.len(), 45);
    }
}
