//! Experimental harness: rank correlation of association measures against
//! significance-ratio rankings, per-type effectiveness, parameter scans,
//! top-k reports and correlation with human judgements.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::corpus::{tokenize, CorpusError, CorpusIndex};
use crate::histogram::{HistogramError, PiProvider, PiSource};
use crate::measures::{score_with, MeasureError, MeasureId, MeasureInputs, MeasureOptions, Ranking, UndefinedPolicy};
use crate::occurrences::{pair_stats, BigramPair, DocPairStats};
use crate::significance::{csr_from_stats, CoocType, SignificanceError, SignificanceParams, TypeSettings};

/// A measure is effective for a type when its correlation exceeds this.
pub const EFFECTIVE_RHO: f64 = 0.90;
pub const DEFAULT_SPANS: [u32; 3] = [5, 25, 50];
pub const DEFAULT_EPSILON_GRID: [f64; 5] = [0.05, 0.1, 0.4, 0.5, 0.99];
pub const DEFAULT_DELTA_GRID: [f64; 6] = [0.0005, 0.005, 0.01, 0.1, 0.4, 0.9];
pub const DEFAULT_TOP_K: usize = 10;
/// Cross-rank marker for a pair missing from the other ranking.
pub const MISSING_RANK: &str = "—";

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("cannot read dataset {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("dataset line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("dataset line {line}: duplicate pair {pair} (first on line {first})")]
    Duplicate { line: usize, pair: String, first: usize },
    #[error("dataset {0} has no entries")]
    EmptyDataset(String),
    #[error("rank correlation needs at least two items, got {0}")]
    TooFewItems(usize),
    #[error("ranked lists differ: {0}")]
    MismatchedItems(String),
    #[error("no dataset pair has a score")]
    EmptyIntersection,
    #[error("invalid evaluation setting: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Significance(#[from] SignificanceError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Histogram(#[from] HistogramError),
}

pub type Result<T> = std::result::Result<T, EvalError>;

// ---------------------------------------------------------------- datasets

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WordPairEntry {
    pub word1: String,
    pub word2: String,
    pub human_score: f64,
    /// 1-based source line.
    pub line: usize,
}

impl WordPairEntry {
    pub fn pair(&self) -> BigramPair {
        BigramPair::new(self.word1.clone(), self.word2.clone()).expect("validated at parse time")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WordPairDataset {
    pub name: String,
    /// Symmetric datasets identify `(a, b)` with `(b, a)`.
    pub symmetric: bool,
    pub entries: Vec<WordPairEntry>,
}

impl WordPairDataset {
    pub fn key(&self, a: &str, b: &str) -> (String, String) {
        if self.symmetric && b < a {
            (b.to_string(), a.to_string())
        } else {
            (a.to_string(), b.to_string())
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum DuplicatePolicy {
    #[default]
    Error,
    KeepFirst,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DatasetOptions {
    pub symmetric: bool,
    pub duplicates: DuplicatePolicy,
}

impl Default for DatasetOptions {
    fn default() -> Self {
        DatasetOptions {
            symmetric: true,
            duplicates: DuplicatePolicy::Error,
        }
    }
}

/// Parse `word1 TAB word2 TAB score` rows. Blank lines and lines starting
/// with `#` are skipped.
pub fn parse_dataset(name: &str, text: &str, opts: DatasetOptions) -> Result<WordPairDataset> {
    let mut dataset = WordPairDataset {
        name: name.to_string(),
        symmetric: opts.symmetric,
        entries: Vec::new(),
    };
    let mut seen: HashMap<(String, String), usize> = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let row = raw.trim_end_matches('\r');
        if row.trim().is_empty() || row.trim_start().starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = row.split('\t').map(str::trim).collect();
        let malformed = |message: String| EvalError::Malformed { line, message };
        if fields.len() != 3 {
            return Err(malformed(format!(
                "expected 3 tab-separated fields, found {}",
                fields.len()
            )));
        }
        if fields[0].is_empty() || fields[1].is_empty() {
            return Err(malformed("empty word".into()));
        }
        if fields[0] == fields[1] {
            return Err(malformed(format!("pair repeats the word {:?}", fields[0])));
        }
        let human_score: f64 = fields[2]
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| malformed(format!("score {:?} is not a number", fields[2])))?;
        let key = dataset.key(fields[0], fields[1]);
        if let Some(&first) = seen.get(&key) {
            match opts.duplicates {
                DuplicatePolicy::Error => {
                    return Err(EvalError::Duplicate {
                        line,
                        pair: format!("{}-{}", fields[0], fields[1]),
                        first,
                    })
                }
                DuplicatePolicy::KeepFirst => continue,
            }
        }
        seen.insert(key, line);
        dataset.entries.push(WordPairEntry {
            word1: fields[0].to_string(),
            word2: fields[1].to_string(),
            human_score,
            line,
        });
    }
    if dataset.entries.is_empty() {
        return Err(EvalError::EmptyDataset(name.to_string()));
    }
    Ok(dataset)
}

pub fn load_dataset(path: &Path, opts: DatasetOptions) -> Result<WordPairDataset> {
    let text = std::fs::read_to_string(path).map_err(|source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    parse_dataset(&name, &text, opts)
}

// ---------------------------------------------------------------- spearman

/// 1-based ranks in ascending order of value; tied values share the mean
/// of the ranks they span.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman correlation with average-rank ties: the Pearson correlation of
/// the two rank vectors. `None` when either side is constant.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<Option<f64>> {
    if a.len() != b.len() {
        return Err(EvalError::MismatchedItems(format!(
            "{} values against {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(EvalError::TooFewItems(a.len()));
    }
    let (ra, rb) = (average_ranks(a), average_ranks(b));
    let mean = (a.len() as f64 + 1.0) / 2.0;
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        let (dx, dy) = (x - mean, y - mean);
        cov += dx * dy;
        va += dx * dx;
        vb += dy * dy;
    }
    if va == 0.0 || vb == 0.0 {
        return Ok(None);
    }
    Ok(Some((cov / (va * vb).sqrt()).clamp(-1.0, 1.0)))
}

/// Spearman correlation of two rankings over the same pairs, using their
/// scores so ties are averaged rather than broken.
pub fn spearman_rankings(a: &Ranking, b: &Ranking) -> Result<Option<f64>> {
    if a.len() != b.len() {
        return Err(EvalError::MismatchedItems(format!(
            "{} has {} pairs, {} has {}",
            a.measure,
            a.len(),
            b.measure,
            b.len()
        )));
    }
    let scores_b: HashMap<&BigramPair, f64> = b.items.iter().map(|i| (&i.pair, i.score)).collect();
    let mut xs = Vec::with_capacity(a.len());
    let mut ys = Vec::with_capacity(a.len());
    for item in &a.items {
        let y = scores_b.get(&item.pair).ok_or_else(|| {
            EvalError::MismatchedItems(format!("{} is not ranked by {}", item.pair, b.measure))
        })?;
        xs.push(item.score);
        ys.push(*y);
    }
    spearman(&xs, &ys)
}

// ---------------------------------------------------------------- evidence

/// What ranks the pairs: an association measure or the significance ratio
/// at a fixed `(epsilon, delta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalScorer {
    Measure(MeasureId),
    Csr { epsilon: f64, delta: f64 },
}

impl EvalScorer {
    pub fn label(&self) -> String {
        match self {
            EvalScorer::Measure(m) => m.name().to_string(),
            EvalScorer::Csr { epsilon, delta } => format!("csr({epsilon},{delta})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Exclusion {
    /// The word does not occur in the corpus (after tokenization).
    UnknownWord(String),
    /// The words never share a document.
    NoJointDocuments,
}

impl std::fmt::Display for Exclusion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Exclusion::UnknownWord(w) => write!(f, "unknown word {w}"),
            Exclusion::NoJointDocuments => f.write_str("no joint documents"),
        }
    }
}

/// A dataset entry mapped onto corpus vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedPair {
    /// Index into the dataset entries.
    pub entry: usize,
    pub pair: BigramPair,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExcludedPair {
    /// `None` when the exclusion holds at every span.
    pub span: Option<u32>,
    pub pair: BigramPair,
    pub reason: Exclusion,
}

/// Normalize a dataset word with the corpus tokenizer. Words that do not
/// map to exactly one token are treated as unknown.
pub fn normalize_word(index: &CorpusIndex, word: &str) -> Option<String> {
    let mut tokens = tokenize(word, index.config().lowercase);
    (tokens.len() == 1).then(|| tokens.remove(0))
}

/// Map dataset entries onto the corpus vocabulary, excluding pairs with
/// unknown words.
pub fn resolve_pairs(index: &CorpusIndex, dataset: &WordPairDataset) -> (Vec<ResolvedPair>, Vec<ExcludedPair>) {
    let mut resolved = Vec::new();
    let mut excluded = Vec::new();
    for (entry, e) in dataset.entries.iter().enumerate() {
        let lookup = |w: &str| normalize_word(index, w).filter(|t| index.contains(t));
        let outcome = match (lookup(&e.word1), lookup(&e.word2)) {
            (None, _) => Err(Exclusion::UnknownWord(e.word1.clone())),
            (_, None) => Err(Exclusion::UnknownWord(e.word2.clone())),
            (Some(a), Some(b)) => BigramPair::new(a, b).map_err(|_| Exclusion::UnknownWord(e.word2.clone())),
        };
        match outcome {
            Ok(pair) => resolved.push(ResolvedPair { entry, pair }),
            Err(reason) => excluded.push(ExcludedPair {
                span: None,
                pair: e.pair(),
                reason,
            }),
        }
    }
    (resolved, excluded)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairEvidence {
    pub entry: usize,
    pub pair: BigramPair,
    pub stats: Vec<DocPairStats>,
    pub inputs: MeasureInputs,
}

/// Per-document statistics for every resolved pair at one span threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct SpanEvidence {
    pub span: u32,
    pub pairs: Vec<PairEvidence>,
    pub excluded: Vec<ExcludedPair>,
}

impl SpanEvidence {
    pub fn bigrams(&self) -> Vec<BigramPair> {
        self.pairs.iter().map(|p| p.pair.clone()).collect()
    }
}

pub fn gather_evidence(index: &CorpusIndex, pairs: &[ResolvedPair], span: u32) -> Result<SpanEvidence> {
    if span == 0 {
        return Err(EvalError::InvalidArgument("span threshold must be at least 1".into()));
    }
    let collected: Vec<std::result::Result<PairEvidence, CorpusError>> = pairs
        .par_iter()
        .map(|r| {
            let stats = pair_stats(index, &r.pair, span)?;
            let inputs = MeasureInputs::from_stats(index, &r.pair, &stats);
            Ok(PairEvidence {
                entry: r.entry,
                pair: r.pair.clone(),
                stats,
                inputs,
            })
        })
        .collect();
    let mut evidence = SpanEvidence {
        span,
        pairs: Vec::new(),
        excluded: Vec::new(),
    };
    for item in collected {
        let item = item?;
        if item.stats.is_empty() {
            evidence.excluded.push(ExcludedPair {
                span: Some(span),
                pair: item.pair,
                reason: Exclusion::NoJointDocuments,
            });
        } else {
            evidence.pairs.push(item);
        }
    }
    Ok(evidence)
}

/// Options used when ranking by a measure: undefined values (log of zero)
/// rank last instead of aborting the run.
pub const RANKING_OPTIONS: MeasureOptions = MeasureOptions {
    undefined: UndefinedPolicy::NegInfinity,
    scaled_statistics: false,
};

/// One value per evidence pair, in evidence order.
pub fn scorer_values(scorer: EvalScorer, evidence: &[PairEvidence], source: &dyn PiSource) -> Result<Vec<f64>> {
    if let EvalScorer::Csr { epsilon, delta } = scorer {
        SignificanceParams::new(epsilon, delta, source.x_threshold())?;
    }
    evidence
        .par_iter()
        .map(|p| match scorer {
            EvalScorer::Measure(m) => Ok(score_with(m, &p.inputs, RANKING_OPTIONS)?),
            EvalScorer::Csr { epsilon, delta } => Ok(csr_from_stats(&p.stats, epsilon, delta, source)?.csr),
        })
        .collect()
}

pub fn scorer_ranking(scorer: EvalScorer, evidence: &SpanEvidence, source: &dyn PiSource) -> Result<Ranking> {
    let values = scorer_values(scorer, &evidence.pairs, source)?;
    Ok(Ranking::from_scores(
        scorer.label(),
        evidence.bigrams().into_iter().zip(values).collect(),
    ))
}

fn correlation(a: &[f64], b: &[f64]) -> Result<Option<f64>> {
    match spearman(a, b) {
        Err(EvalError::TooFewItems(_)) => Ok(None),
        other => other,
    }
}

// ----------------------------------------------------------- effectiveness

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TypeRho {
    pub cooc_type: CoocType,
    pub epsilon: f64,
    pub delta: f64,
    /// `None` when a ranking is constant or fewer than two pairs remain.
    pub rho: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectivenessReport {
    pub measure: String,
    pub span: u32,
    /// Pairs entering the correlation.
    pub pairs: usize,
    pub per_type: Vec<TypeRho>,
    /// Types with `rho > 0.90`.
    pub effective: Vec<CoocType>,
}

/// Significance-ratio values at each type's setting.
pub fn type_values(evidence: &SpanEvidence, source: &dyn PiSource, settings: &TypeSettings) -> Result<Vec<Vec<f64>>> {
    CoocType::ALL
        .iter()
        .map(|&t| {
            let (epsilon, delta) = settings.get(t);
            scorer_values(EvalScorer::Csr { epsilon, delta }, &evidence.pairs, source)
        })
        .collect()
}

fn effectiveness_from(
    scorer: EvalScorer,
    evidence: &SpanEvidence,
    values: &[f64],
    csr_by_type: &[Vec<f64>],
    settings: &TypeSettings,
) -> Result<EffectivenessReport> {
    let mut per_type = Vec::with_capacity(4);
    for (&t, reference) in CoocType::ALL.iter().zip(csr_by_type) {
        let (epsilon, delta) = settings.get(t);
        per_type.push(TypeRho {
            cooc_type: t,
            epsilon,
            delta,
            rho: correlation(values, reference)?,
        });
    }
    let effective = per_type
        .iter()
        .filter(|r| r.rho.is_some_and(|rho| rho > EFFECTIVE_RHO))
        .map(|r| r.cooc_type)
        .collect();
    Ok(EffectivenessReport {
        measure: scorer.label(),
        span: evidence.span,
        pairs: evidence.pairs.len(),
        per_type,
        effective,
    })
}

/// Effectiveness of each scorer at one span.
pub fn effectiveness(
    scorers: &[EvalScorer],
    evidence: &SpanEvidence,
    source: &dyn PiSource,
    settings: &TypeSettings,
) -> Result<Vec<EffectivenessReport>> {
    let csr_by_type = type_values(evidence, source, settings)?;
    scorers
        .iter()
        .map(|&s| {
            let values = scorer_values(s, &evidence.pairs, source)?;
            effectiveness_from(s, evidence, &values, &csr_by_type, settings)
        })
        .collect()
}

/// One report per (scorer, span), spans outermost. Pairs with unknown words
/// or without joint documents are excluded and returned alongside.
pub fn effectiveness_matrix(
    index: &CorpusIndex,
    dataset: &WordPairDataset,
    scorers: &[EvalScorer],
    spans: &[u32],
    settings: &TypeSettings,
    provider: &dyn PiProvider,
) -> Result<(Vec<EffectivenessReport>, Vec<ExcludedPair>)> {
    let (resolved, mut excluded) = resolve_pairs(index, dataset);
    let mut reports = Vec::new();
    for &span in spans {
        let evidence = gather_evidence(index, &resolved, span)?;
        let source = provider.source(span)?;
        reports.extend(effectiveness(scorers, &evidence, source.as_ref(), settings)?);
        excluded.extend(evidence.excluded);
    }
    Ok((reports, excluded))
}

// ------------------------------------------------------------ parameter scan

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BestParameters {
    pub measure: String,
    pub span: u32,
    pub epsilon: f64,
    pub delta: f64,
    /// Type whose bounds contain the winning point, if any.
    pub cooc_type: Option<CoocType>,
    pub rho: Option<f64>,
}

fn sorted_grid(grid: &[f64], name: &str) -> Result<Vec<f64>> {
    if grid.is_empty() {
        return Err(EvalError::InvalidArgument(format!("{name} grid is empty")));
    }
    let mut g = grid.to_vec();
    g.sort_by(f64::total_cmp);
    g.dedup();
    Ok(g)
}

/// The `(epsilon, delta)` grid point whose significance-ratio ranking
/// correlates best with the scorer. Ties go to the smaller epsilon, then the
/// smaller delta; an undefined correlation never wins over a defined one.
pub fn best_parameter_scan(
    scorer: EvalScorer,
    evidence: &SpanEvidence,
    source: &dyn PiSource,
    epsilon_grid: &[f64],
    delta_grid: &[f64],
) -> Result<BestParameters> {
    let eps = sorted_grid(epsilon_grid, "epsilon")?;
    let deltas = sorted_grid(delta_grid, "delta")?;
    let points: Vec<(f64, f64)> = eps
        .iter()
        .flat_map(|&e| deltas.iter().map(move |&d| (e, d)))
        .collect();
    let values = scorer_values(scorer, &evidence.pairs, source)?;
    let rhos: Vec<Option<f64>> = points
        .par_iter()
        .map(|&(epsilon, delta)| {
            let reference = scorer_values(EvalScorer::Csr { epsilon, delta }, &evidence.pairs, source)?;
            correlation(&values, &reference)
        })
        .collect::<Result<_>>()?;
    let mut best = 0;
    for i in 1..points.len() {
        let better = match (rhos[i], rhos[best]) {
            (Some(r), Some(b)) => r > b,
            (Some(_), None) => true,
            _ => false,
        };
        if better {
            best = i;
        }
    }
    let (epsilon, delta) = points[best];
    Ok(BestParameters {
        measure: scorer.label(),
        span: evidence.span,
        epsilon,
        delta,
        cooc_type: CoocType::from_bounds(epsilon, delta),
        rho: rhos[best],
    })
}

// -------------------------------------------------------------------- top-k

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TopKRow {
    pub rank: usize,
    pub pair: BigramPair,
    pub score: f64,
    /// Rank under each cross ranking; `None` when absent there.
    pub cross: Vec<(String, Option<usize>)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TopKTable {
    pub measure: String,
    pub rows: Vec<TopKRow>,
    /// Set when the ranking held fewer than `k` pairs.
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TopKReport {
    pub k: usize,
    pub tables: Vec<TopKTable>,
    pub notes: Vec<String>,
}

/// Top `k` pairs of each ranking with their rank under every cross ranking
/// other than itself.
pub fn top_k_report(rankings: &[Ranking], k: usize, cross_rankings: &[Ranking]) -> Result<TopKReport> {
    if k == 0 {
        return Err(EvalError::InvalidArgument("k must be at least 1".into()));
    }
    let mut report = TopKReport {
        k,
        tables: Vec::new(),
        notes: Vec::new(),
    };
    for ranking in rankings {
        let truncated = ranking.len() < k;
        if truncated {
            report.notes.push(format!(
                "{} ranks only {} pairs; showing all of them",
                ranking.measure,
                ranking.len()
            ));
        }
        let rows = ranking
            .items
            .iter()
            .take(k)
            .map(|item| TopKRow {
                rank: item.rank,
                pair: item.pair.clone(),
                score: item.score,
                cross: cross_rankings
                    .iter()
                    .filter(|c| c.measure != ranking.measure)
                    .map(|c| (c.measure.clone(), c.rank_of(&item.pair)))
                    .collect(),
            })
            .collect();
        report.tables.push(TopKTable {
            measure: ranking.measure.clone(),
            rows,
            truncated,
        });
    }
    Ok(report)
}

// ----------------------------------------------------------- human scores

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HumanCorrelation {
    pub measure: String,
    pub span: Option<u32>,
    pub rho: Option<f64>,
    /// Dataset pairs that had a score.
    pub used: usize,
    pub total: usize,
}

impl HumanCorrelation {
    pub fn coverage(&self) -> f64 {
        self.used as f64 / self.total as f64
    }
}

/// Spearman correlation between human scores and `scores` over the pairs
/// present in both.
pub fn human_correlation(
    dataset: &WordPairDataset,
    measure: &str,
    scores: &[(BigramPair, f64)],
) -> Result<HumanCorrelation> {
    let by_key: HashMap<(String, String), f64> = scores
        .iter()
        .map(|(p, v)| (dataset.key(&p.x, &p.y), *v))
        .collect();
    let mut human = Vec::new();
    let mut machine = Vec::new();
    for e in &dataset.entries {
        if let Some(v) = by_key.get(&dataset.key(&e.word1, &e.word2)) {
            human.push(e.human_score);
            machine.push(*v);
        }
    }
    if human.is_empty() {
        return Err(EvalError::EmptyIntersection);
    }
    Ok(HumanCorrelation {
        measure: measure.to_string(),
        span: None,
        rho: correlation(&human, &machine)?,
        used: human.len(),
        total: dataset.len(),
    })
}

// ---------------------------------------------------------------- pipeline

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub spans: Vec<u32>,
    pub measures: Vec<MeasureId>,
    pub settings: TypeSettings,
    pub epsilon_grid: Vec<f64>,
    pub delta_grid: Vec<f64>,
    pub top_k: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            spans: DEFAULT_SPANS.to_vec(),
            measures: MeasureId::ALL.to_vec(),
            settings: TypeSettings::default(),
            epsilon_grid: DEFAULT_EPSILON_GRID.to_vec(),
            delta_grid: DEFAULT_DELTA_GRID.to_vec(),
            top_k: DEFAULT_TOP_K,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpanTopK {
    pub span: u32,
    pub report: TopKReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub dataset: String,
    pub entries: usize,
    pub effectiveness: Vec<EffectivenessReport>,
    pub best: Vec<BestParameters>,
    pub top_k: Vec<SpanTopK>,
    pub human: Vec<HumanCorrelation>,
    pub excluded: Vec<ExcludedPair>,
}

/// The full harness: effectiveness matrix, best parameters, top-k tables and
/// human correlation for every configured span. `progress` receives one
/// line per finished stage.
pub fn evaluate(
    index: &CorpusIndex,
    dataset: &WordPairDataset,
    config: &EvalConfig,
    provider: &dyn PiProvider,
    progress: &dyn Fn(&str),
) -> Result<EvalReport> {
    if config.spans.is_empty() || config.measures.is_empty() {
        return Err(EvalError::InvalidArgument("need at least one span and one measure".into()));
    }
    let (resolved, excluded) = resolve_pairs(index, dataset);
    progress(&format!(
        "{} of {} dataset pairs found in the corpus",
        resolved.len(),
        dataset.len()
    ));
    let mut report = EvalReport {
        dataset: dataset.name.clone(),
        entries: dataset.len(),
        effectiveness: Vec::new(),
        best: Vec::new(),
        top_k: Vec::new(),
        human: Vec::new(),
        excluded,
    };
    let scorers: Vec<EvalScorer> = config.measures.iter().map(|&m| EvalScorer::Measure(m)).collect();

    for &span in &config.spans {
        let evidence = gather_evidence(index, &resolved, span)?;
        let source = provider.source(span)?;
        let source = source.as_ref();
        let csr_by_type = type_values(&evidence, source, &config.settings)?;
        let values: Vec<Vec<f64>> = scorers
            .iter()
            .map(|&s| scorer_values(s, &evidence.pairs, source))
            .collect::<Result<_>>()?;

        for (&s, v) in scorers.iter().zip(&values) {
            report
                .effectiveness
                .push(effectiveness_from(s, &evidence, v, &csr_by_type, &config.settings)?);
        }
        if evidence.pairs.len() >= 2 {
            for &s in &scorers {
                report.best.push(best_parameter_scan(
                    s,
                    &evidence,
                    source,
                    &config.epsilon_grid,
                    &config.delta_grid,
                )?);
            }
        }

        let rankings: Vec<Ranking> = scorers
            .iter()
            .zip(&values)
            .map(|(s, v)| Ranking::from_scores(s.label(), evidence.bigrams().into_iter().zip(v.iter().copied()).collect()))
            .collect();
        if !evidence.pairs.is_empty() {
            report.top_k.push(SpanTopK {
                span,
                report: top_k_report(&rankings, config.top_k, &rankings)?,
            });
        }

        let human_scorers = scorers
            .iter()
            .map(|s| s.label())
            .zip(values.iter())
            .chain(CoocType::ALL.iter().map(|t| format!("csr-{t}")).zip(csr_by_type.iter()));
        for (label, v) in human_scorers {
            let scores: Vec<(BigramPair, f64)> = evidence
                .pairs
                .iter()
                .zip(v)
                .map(|(p, &s)| (dataset.entries[p.entry].pair(), s))
                .collect();
            match human_correlation(dataset, &label, &scores) {
                Ok(mut h) => {
                    h.span = Some(span);
                    report.human.push(h);
                }
                Err(EvalError::EmptyIntersection) => {}
                Err(e) => return Err(e),
            }
        }
        report.excluded.extend(evidence.excluded);
        progress(&format!("span {span}: {} pairs evaluated", evidence.pairs.len()));
    }
    Ok(report)
}

// -------------------------------------------------------------- rendering

fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else if v.is_nan() {
        "NaN".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_else(|| "NA".into())
}

fn types_label(types: &[CoocType]) -> String {
    if types.is_empty() {
        "-".into()
    } else {
        types.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(",")
    }
}

fn opt_type(t: Option<CoocType>) -> String {
    t.map(|t| t.to_string()).unwrap_or_else(|| "-".into())
}

fn rank_cell(r: Option<usize>) -> String {
    r.map(|r| r.to_string()).unwrap_or_else(|| MISSING_RANK.into())
}

fn json_num(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::String(num(v))
    }
}

fn json_opt(v: Option<f64>) -> Value {
    v.map(json_num).unwrap_or(Value::Null)
}

impl EvalReport {
    /// Tab-separated sections, each introduced by a `# name` line and a
    /// header row.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# effectiveness");
        let _ = writeln!(out, "measure\tspan\tpairs\trho_A\trho_B\trho_C\trho_D\teffective");
        for r in &self.effectiveness {
            let rhos: Vec<String> = r.per_type.iter().map(|t| opt_num(t.rho)).collect();
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                r.measure,
                r.span,
                r.pairs,
                rhos.join("\t"),
                types_label(&r.effective)
            );
        }
        let _ = writeln!(out, "# best_parameters");
        let _ = writeln!(out, "measure\tspan\tepsilon\tdelta\ttype\trho");
        for b in &self.best {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}",
                b.measure,
                b.span,
                num(b.epsilon),
                num(b.delta),
                opt_type(b.cooc_type),
                opt_num(b.rho)
            );
        }
        let _ = writeln!(out, "# top_k");
        let _ = writeln!(out, "span\tmeasure\trank\tword1\tword2\tscore\tcross_ranks");
        for t in &self.top_k {
            for table in &t.report.tables {
                for row in &table.rows {
                    let cross: Vec<String> = row
                        .cross
                        .iter()
                        .map(|(m, r)| format!("{m}={}", rank_cell(*r)))
                        .collect();
                    let _ = writeln!(
                        out,
                        "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                        t.span,
                        table.measure,
                        row.rank,
                        row.pair.x,
                        row.pair.y,
                        num(row.score),
                        cross.join(",")
                    );
                }
            }
        }
        let _ = writeln!(out, "# human_correlation");
        let _ = writeln!(out, "measure\tspan\trho\tused\ttotal");
        for h in &self.human {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                h.measure,
                h.span.map(|s| s.to_string()).unwrap_or_default(),
                opt_num(h.rho),
                h.used,
                h.total
            );
        }
        let _ = writeln!(out, "# excluded");
        let _ = writeln!(out, "span\tword1\tword2\treason");
        for e in &self.excluded {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}",
                e.span.map(|s| s.to_string()).unwrap_or_else(|| "all".into()),
                e.pair.x,
                e.pair.y,
                e.reason
            );
        }
        out
    }

    /// One JSON object per record, tagged with its section.
    pub fn to_jsonl(&self) -> String {
        let mut lines: Vec<Value> = Vec::new();
        for r in &self.effectiveness {
            let mut obj = json!({
                "section": "effectiveness",
                "measure": r.measure,
                "span": r.span,
                "pairs": r.pairs,
                "effective": r.effective.iter().map(|t| t.to_string()).collect::<Vec<_>>(),
            });
            for t in &r.per_type {
                obj[format!("rho_{}", t.cooc_type)] = json_opt(t.rho);
            }
            lines.push(obj);
        }
        for b in &self.best {
            lines.push(json!({
                "section": "best_parameters",
                "measure": b.measure,
                "span": b.span,
                "epsilon": b.epsilon,
                "delta": b.delta,
                "type": b.cooc_type.map(|t| t.to_string()),
                "rho": json_opt(b.rho),
            }));
        }
        for t in &self.top_k {
            for table in &t.report.tables {
                for row in &table.rows {
                    let cross: serde_json::Map<String, Value> = row
                        .cross
                        .iter()
                        .map(|(m, r)| (m.clone(), r.map(|r| json!(r)).unwrap_or(Value::Null)))
                        .collect();
                    lines.push(json!({
                        "section": "top_k",
                        "span": t.span,
                        "measure": table.measure,
                        "rank": row.rank,
                        "word1": row.pair.x,
                        "word2": row.pair.y,
                        "score": json_num(row.score),
                        "cross_ranks": cross,
                    }));
                }
            }
        }
        for h in &self.human {
            lines.push(json!({
                "section": "human_correlation",
                "measure": h.measure,
                "span": h.span,
                "rho": json_opt(h.rho),
                "used": h.used,
                "total": h.total,
            }));
        }
        for e in &self.excluded {
            lines.push(json!({
                "section": "excluded",
                "span": e.span,
                "word1": e.pair.x,
                "word2": e.pair.y,
                "reason": e.reason.to_string(),
            }));
        }
        let mut out = String::new();
        for l in lines {
            out.push_str(&l.to_string());
            out.push('\n');
        }
        out
    }

    /// Markdown tables: detected types per measure and span, best
    /// parameters, top-k with cross ranks, and human correlation.
    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        let mut spans: Vec<u32> = self.effectiveness.iter().map(|r| r.span).collect();
        spans.dedup();
        let mut measures: Vec<&str> = Vec::new();
        for r in &self.effectiveness {
            if !measures.contains(&r.measure.as_str()) {
                measures.push(&r.measure);
            }
        }
        let header = |out: &mut String, first: &str| {
            let cols: Vec<String> = spans.iter().map(|s| format!("{s}w")).collect();
            let _ = writeln!(out, "| {first} | {} |", cols.join(" | "));
            let _ = writeln!(out, "|---|{}", "---|".repeat(spans.len()));
        };

        let _ = writeln!(out, "## Detected types ({})\n", self.dataset);
        header(&mut out, "Measure");
        for m in &measures {
            let cells: Vec<String> = spans
                .iter()
                .map(|s| {
                    self.effectiveness
                        .iter()
                        .find(|r| r.measure == *m && r.span == *s)
                        .map(|r| types_label(&r.effective))
                        .unwrap_or_default()
                })
                .collect();
            let _ = writeln!(out, "| {m} | {} |", cells.join(" | "));
        }

        let _ = writeln!(out, "\n## Best (epsilon, delta)\n");
        header(&mut out, "Measure");
        for m in &measures {
            let cells: Vec<String> = spans
                .iter()
                .map(|s| {
                    self.best
                        .iter()
                        .find(|b| b.measure == *m && b.span == *s)
                        .map(|b| {
                            format!(
                                "({}, {}) {} {}",
                                num(b.epsilon),
                                num(b.delta),
                                opt_type(b.cooc_type),
                                opt_num(b.rho.map(|r| (r * 1000.0).round() / 1000.0))
                            )
                        })
                        .unwrap_or_default()
                })
                .collect();
            let _ = writeln!(out, "| {m} | {} |", cells.join(" | "));
        }

        for t in &self.top_k {
            let _ = writeln!(out, "\n## Top {} at span {}\n", t.report.k, t.span);
            for table in &t.report.tables {
                let others: Vec<&str> = table.rows.first().map(|r| r.cross.iter().map(|(m, _)| m.as_str()).collect()).unwrap_or_default();
                let _ = writeln!(out, "### {}\n", table.measure);
                let _ = writeln!(out, "| # | Bigram | Score | {} |", others.join(" | "));
                let _ = writeln!(out, "|---|---|---|{}", "---|".repeat(others.len()));
                for row in &table.rows {
                    let cross: Vec<String> = row.cross.iter().map(|(_, r)| rank_cell(*r)).collect();
                    let _ = writeln!(out, "| {} | {} | {} | {} |", row.rank, row.pair, num(row.score), cross.join(" | "));
                }
            }
            for note in &t.report.notes {
                let _ = writeln!(out, "\n_{note}_");
            }
        }

        let _ = writeln!(out, "\n## Correlation with human scores\n");
        let _ = writeln!(out, "| Measure | Span | rho | Coverage |");
        let _ = writeln!(out, "|---|---|---|---|");
        for h in &self.human {
            let _ = writeln!(
                out,
                "| {} | {} | {} | {}/{} |",
                h.measure,
                h.span.map(|s| s.to_string()).unwrap_or_default(),
                opt_num(h.rho),
                h.used,
                h.total
            );
        }
        if !self.excluded.is_empty() {
            let _ = writeln!(out, "\nExcluded pairs:\n");
            for e in &self.excluded {
                let span = e.span.map(|s| format!("span {s}")).unwrap_or_else(|| "all spans".into());
                let _ = writeln!(out, "- {} ({span}): {}", e.pair, e.reason);
            }
        }
        out
    }
}
