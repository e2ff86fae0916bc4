//! Batch command-line surface.
//!
//! Exit codes: 0 success, 1 usage, 2 data error, 3 capacity.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use crate::corpus::{ingest, read_dir_documents, read_line_documents, CorpusError, CorpusIndex, IngestConfig};
use crate::evaluation::{
    self, evaluate, load_dataset, normalize_word, DatasetOptions, DuplicatePolicy, EvalConfig, EvalError,
};
use crate::histogram::{
    CapacityLimits, ComputedTables, HistogramError, PiProvider, PiSource, PiTable, Precision, TableDirectory,
    DEFAULT_MAX_ELL, DEFAULT_MAX_F,
};
use crate::measures::{score_with, MeasureError, MeasureId, MeasureInputs, MeasureOptions, Ranking, UndefinedPolicy};
use crate::occurrences::{pair_stats, stats_tsv, BigramPair};
use crate::significance::{
    classify_sweep, classify_stats, csr_from_stats, Classification, CoocType, CsrResult, SignificanceError,
    SignificanceParams, TypeSettings,
};

/// Directory of published tables used when `--tables` is not given.
pub const TABLE_DIR_ENV: &str = "COSIG_TABLE_DIR";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_CAPACITY: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "cosig", version, about = "Significant lexical co-occurrences and association measures")]
pub struct Cli {
    /// Worker threads (default: available cores). Output does not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a positional index from a corpus.
    Index(IndexArgs),
    /// Publish null-model probability tables for one span threshold.
    Tables(TablesArgs),
    /// Run the significance test and association measures on word pairs.
    Score(ScoreArgs),
    /// Score with per-type significance flags and the exclusive type.
    Classify(ScoreArgs),
    /// Correlate measure rankings with significance rankings on a dataset.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Args)]
pub struct IndexArgs {
    /// Directory with one document per file, or a file with --lines.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Treat the corpus as a single file with one document per line.
    #[arg(long)]
    pub lines: bool,
    #[arg(long)]
    pub out: PathBuf,
    /// Documents longer than this are split into chunks.
    #[arg(long, default_value_t = crate::corpus::DEFAULT_MAX_DOC_LENGTH)]
    pub max_doc_length: usize,
    /// Keep the original letter case.
    #[arg(long)]
    pub keep_case: bool,
}

#[derive(Debug, Args)]
pub struct LimitArgs {
    /// Largest per-document frequency the null model will compute.
    #[arg(long, default_value_t = DEFAULT_MAX_F)]
    pub max_f: u32,
    /// Largest document length the null model will compute.
    #[arg(long, default_value_t = DEFAULT_MAX_ELL)]
    pub max_ell: u32,
    #[arg(long, default_value = "exact")]
    pub precision: Precision,
}

impl LimitArgs {
    fn limits(&self) -> CapacityLimits {
        CapacityLimits {
            max_f: self.max_f,
            max_ell: self.max_ell,
        }
    }
}

#[derive(Debug, Args)]
pub struct TablesArgs {
    /// Span threshold: occurrences count when their span is below it.
    #[arg(long)]
    pub span: u32,
    /// Output directory (default: $COSIG_TABLE_DIR).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Table range: largest f.
    #[arg(long, default_value_t = 32)]
    pub f: u32,
    /// Table range: largest document length.
    #[arg(long, default_value_t = DEFAULT_MAX_ELL)]
    pub ell: u32,
    #[command(flatten)]
    pub limits: LimitArgs,
    /// Also write the table as TSV to this path.
    #[arg(long)]
    pub tsv: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScoreFormat {
    Tsv,
    Json,
    /// Long form: word1, word2, measure, score, rank.
    Ranks,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub index: PathBuf,
    /// Span threshold in words.
    #[arg(long)]
    pub span: u32,
    /// Pair as `word1,word2`; repeatable.
    #[arg(long = "pair", value_name = "X,Y")]
    pub pairs: Vec<String>,
    /// File of pairs, one `word1 TAB word2` per line (extra columns ignored).
    #[arg(long)]
    pub pairs_file: Option<PathBuf>,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    /// Comma-separated measures, or `all`.
    #[arg(long, default_value = "all")]
    pub measures: String,
    /// Directory of published tables (default: $COSIG_TABLE_DIR, else
    /// computed in memory).
    #[arg(long)]
    pub tables: Option<PathBuf>,
    #[command(flatten)]
    pub limits: LimitArgs,
    #[arg(long, value_enum, default_value = "tsv")]
    pub format: ScoreFormat,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Add per-type flags (implied by `classify`).
    #[arg(long)]
    pub types: bool,
    /// Per-type (epsilon,delta) as `A=0.1,0.1`; repeatable.
    #[arg(long = "type-setting", value_name = "T=EPS,DELTA")]
    pub type_settings: Vec<String>,
    /// Read each type as a region of the epsilon/delta grids instead of a
    /// single point.
    #[arg(long)]
    pub sweep: bool,
    /// Write per-document statistics (doc, length, f, f_hat) as TSV here.
    #[arg(long)]
    pub dump_stats: Option<PathBuf>,
    /// Report LLR and chi-square in their count-scaled forms.
    #[arg(long)]
    pub scaled: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Tsv,
    Json,
    Markdown,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub index: PathBuf,
    /// Word-pair dataset: word1 TAB word2 TAB score.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Comma-separated span thresholds.
    #[arg(long, default_value = "5,25,50")]
    pub spans: String,
    #[arg(long, default_value = "all")]
    pub measures: String,
    #[arg(long, default_value = "0.05,0.1,0.4,0.5,0.99")]
    pub epsilon_grid: String,
    #[arg(long, default_value = "0.0005,0.005,0.01,0.1,0.4,0.9")]
    pub delta_grid: String,
    #[arg(long = "type-setting", value_name = "T=EPS,DELTA")]
    pub type_settings: Vec<String>,
    #[arg(long, default_value_t = evaluation::DEFAULT_TOP_K)]
    pub top_k: usize,
    #[arg(long)]
    pub tables: Option<PathBuf>,
    #[command(flatten)]
    pub limits: LimitArgs,
    /// Pairs are ordered (`a b` differs from `b a`).
    #[arg(long)]
    pub ordered: bool,
    /// Keep the first of duplicated pairs instead of failing.
    #[arg(long)]
    pub keep_first: bool,
    #[arg(long, value_enum, default_value = "tsv")]
    pub format: ReportFormat,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// A failure with the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

fn histogram_code(e: &HistogramError) -> i32 {
    match e {
        HistogramError::Capacity { .. } | HistogramError::TableMiss { .. } => EXIT_CAPACITY,
        HistogramError::InvalidArgument(_) => EXIT_USAGE,
        _ => EXIT_DATA,
    }
}

fn significance_code(e: &SignificanceError) -> i32 {
    match e {
        SignificanceError::Histogram(h) => histogram_code(h),
        SignificanceError::InvalidParams(_) => EXIT_USAGE,
        _ => EXIT_DATA,
    }
}

impl From<HistogramError> for CliError {
    fn from(e: HistogramError) -> Self {
        CliError {
            code: histogram_code(&e),
            message: e.to_string(),
        }
    }
}

impl From<SignificanceError> for CliError {
    fn from(e: SignificanceError) -> Self {
        CliError {
            code: significance_code(&e),
            message: e.to_string(),
        }
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        let code = match e {
            CorpusError::InvalidConfig(_) | CorpusError::InvalidBigram(_) => EXIT_USAGE,
            _ => EXIT_DATA,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

impl From<MeasureError> for CliError {
    fn from(e: MeasureError) -> Self {
        let code = match e {
            MeasureError::Unknown(_) => EXIT_USAGE,
            _ => EXIT_DATA,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        let code = match &e {
            EvalError::Histogram(h) => histogram_code(h),
            EvalError::Significance(s) => significance_code(s),
            EvalError::InvalidArgument(_) => EXIT_USAGE,
            EvalError::Corpus(CorpusError::InvalidBigram(_)) => EXIT_USAGE,
            _ => EXIT_DATA,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError {
            code: EXIT_DATA,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parse arguments, run, and return the exit code. Errors go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

pub fn execute(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::usage(format!("cannot size worker pool: {e}")))?;
    }
    match cli.command {
        Command::Index(a) => cmd_index(&a),
        Command::Tables(a) => cmd_tables(&a),
        Command::Score(a) => cmd_score(&a, false),
        Command::Classify(a) => cmd_score(&a, true),
        Command::Evaluate(a) => cmd_evaluate(&a),
    }
}

fn write_output(out: Option<&Path>, data: &str) -> CliResult<()> {
    match out {
        Some(path) => fs::write(path, data).map_err(|e| CliError {
            code: EXIT_DATA,
            message: format!("cannot write {}: {e}", path.display()),
        }),
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(data.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

pub fn cmd_index(a: &IndexArgs) -> CliResult<()> {
    let config = IngestConfig {
        max_doc_length: a.max_doc_length,
        lowercase: !a.keep_case,
    };
    let docs = if a.lines {
        read_line_documents(&a.corpus)?
    } else {
        read_dir_documents(&a.corpus)?
    };
    eprintln!("indexing {} documents from {}", docs.len(), a.corpus.display());
    let index = ingest(docs, config)?;
    index.save(&a.out)?;
    println!(
        "documents\t{}\ntokens\t{}\nvocabulary\t{}",
        index.doc_count(),
        index.total_tokens(),
        index.vocabulary_size()
    );
    Ok(())
}

fn table_dir(flag: Option<&Path>) -> Option<PathBuf> {
    flag.map(Path::to_path_buf)
        .or_else(|| std::env::var_os(TABLE_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
}

pub fn cmd_tables(a: &TablesArgs) -> CliResult<()> {
    let dir = table_dir(a.out.as_deref())
        .ok_or_else(|| CliError::usage(format!("no output directory: pass --out or set {TABLE_DIR_ENV}")))?;
    eprintln!("computing pi table for x={} (f<={}, l<={})", a.span, a.f, a.ell);
    let table = PiTable::publish(a.span, a.f, a.ell, a.limits.precision, a.limits.limits())?;
    fs::create_dir_all(&dir)?;
    let path = dir.join(PiTable::file_name(a.span));
    table.save(&path)?;
    if let Some(tsv) = &a.tsv {
        let file = fs::File::create(tsv)?;
        table.write_tsv(io::BufWriter::new(file))?;
    }
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn provider(tables: Option<&Path>, limits: &LimitArgs) -> Box<dyn PiProvider> {
    match table_dir(tables) {
        Some(dir) => Box::new(TableDirectory::new(dir)),
        None => Box::new(ComputedTables::new(limits.limits(), limits.precision)),
    }
}

fn parse_measures(spec: &str) -> CliResult<Vec<MeasureId>> {
    if spec.trim().eq_ignore_ascii_case("all") {
        return Ok(MeasureId::ALL.to_vec());
    }
    let mut out = Vec::new();
    for m in spec.split(',').map(str::trim).filter(|m| !m.is_empty()) {
        let id: MeasureId = m.parse()?;
        if !out.contains(&id) {
            out.push(id);
        }
    }
    Ok(out)
}

fn parse_list<T: std::str::FromStr>(spec: &str, what: &str) -> CliResult<Vec<T>> {
    spec.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|_| CliError::usage(format!("invalid {what} value {s:?}")))
        })
        .collect()
}

fn parse_type_settings(specs: &[String]) -> CliResult<TypeSettings> {
    let mut settings = TypeSettings::default();
    for spec in specs {
        let bad = || CliError::usage(format!("type setting {spec:?} is not T=EPS,DELTA"));
        let (t, rest) = spec.split_once('=').ok_or_else(bad)?;
        let t: CoocType = t.parse()?;
        let (e, d) = rest.split_once(',').ok_or_else(bad)?;
        let e: f64 = e.trim().parse().map_err(|_| bad())?;
        let d: f64 = d.trim().parse().map_err(|_| bad())?;
        settings.set(t, e, d);
    }
    Ok(settings)
}

fn collect_pairs(a: &ScoreArgs) -> CliResult<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for p in &a.pairs {
        let (x, y) = p
            .split_once(',')
            .ok_or_else(|| CliError::usage(format!("pair {p:?} is not word1,word2")))?;
        pairs.push((x.trim().to_string(), y.trim().to_string()));
    }
    if let Some(path) = &a.pairs_file {
        let text = fs::read_to_string(path).map_err(|e| CliError {
            code: EXIT_DATA,
            message: format!("cannot read {}: {e}", path.display()),
        })?;
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let mut fields = line.split('\t').map(str::trim);
            match (fields.next(), fields.next()) {
                (Some(x), Some(y)) if !x.is_empty() && !y.is_empty() => pairs.push((x.to_string(), y.to_string())),
                _ => {
                    return Err(CliError {
                        code: EXIT_DATA,
                        message: format!("{} line {}: expected word1 TAB word2", path.display(), i + 1),
                    })
                }
            }
        }
    }
    if pairs.is_empty() {
        return Err(CliError::usage("no pairs given: use --pair or --pairs-file"));
    }
    Ok(pairs)
}

/// Outcome for one requested pair.
#[derive(Debug, Clone, PartialEq)]
pub enum PairRecord {
    Scored {
        pair: BigramPair,
        result: CsrResult,
        measures: Vec<(MeasureId, Option<f64>)>,
        classification: Option<Classification>,
    },
    Flagged {
        word1: String,
        word2: String,
        reason: String,
    },
}

fn score_pair(
    index: &CorpusIndex,
    raw: &(String, String),
    a: &ScoreArgs,
    measures: &[MeasureId],
    source: &dyn PiSource,
    settings: Option<&TypeSettings>,
    stats_out: &mut String,
) -> CliResult<PairRecord> {
    let flag = |reason: String| PairRecord::Flagged {
        word1: raw.0.clone(),
        word2: raw.1.clone(),
        reason,
    };
    let mut words = Vec::new();
    for w in [&raw.0, &raw.1] {
        match normalize_word(index, w).filter(|t| index.contains(t)) {
            Some(t) => words.push(t),
            None => return Ok(flag(format!("unknown-word:{w}"))),
        }
    }
    let pair = match BigramPair::new(words[0].clone(), words[1].clone()) {
        Ok(p) => p,
        Err(_) => return Ok(flag("same-word".into())),
    };
    let stats = pair_stats(index, &pair, a.span)?;
    if a.dump_stats.is_some() {
        for line in stats_tsv(index, &stats).lines().skip(1) {
            stats_out.push_str(&format!("{}\t{}\t{line}\n", pair.x, pair.y));
        }
    }
    if stats.is_empty() {
        return Ok(flag("no-joint-documents".into()));
    }
    let result = csr_from_stats(&stats, a.epsilon, a.delta, source)?;
    let inputs = MeasureInputs::from_stats(index, &pair, &stats);
    let opts = MeasureOptions {
        undefined: UndefinedPolicy::Error,
        scaled_statistics: a.scaled,
    };
    let mut scores = Vec::with_capacity(measures.len());
    for &m in measures {
        match score_with(m, &inputs, opts) {
            Ok(v) => scores.push((m, Some(v))),
            Err(MeasureError::Undefined { .. }) => scores.push((m, None)),
            Err(e) => return Err(e.into()),
        }
    }
    let classification = match settings {
        Some(_) if a.sweep => Some(classify_sweep(
            &stats,
            source,
            &evaluation::DEFAULT_EPSILON_GRID,
            &evaluation::DEFAULT_DELTA_GRID,
        )?),
        Some(s) => Some(classify_stats(&stats, source, s)?),
        None => None,
    };
    Ok(PairRecord::Scored {
        pair,
        result,
        measures: scores,
        classification,
    })
}

fn cell(v: Option<f64>) -> String {
    v.map(|v| format!("{v}")).unwrap_or_else(|| "NA".into())
}

fn json_f64(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::Null
    }
}

fn render_tsv(records: &[PairRecord], measures: &[MeasureId], with_types: bool) -> String {
    let mut out = String::from("word1\tword2\tstatus\tK\tZ\tEZ\tt\tthreshold\tcsr\tsignificant\tnon_informative");
    for m in measures {
        out.push('\t');
        out.push_str(m.name());
    }
    if with_types {
        out.push_str("\tA\tB\tC\tD\texclusive");
    }
    out.push('\n');
    let width = 8 + measures.len() + if with_types { 5 } else { 0 };
    for r in records {
        match r {
            PairRecord::Flagged { word1, word2, reason } => {
                out.push_str(&format!("{word1}\t{word2}\t{reason}"));
                out.push_str(&"\tNA".repeat(width));
            }
            PairRecord::Scored {
                pair,
                result: c,
                measures: scores,
                classification,
            } => {
                out.push_str(&format!(
                    "{}\t{}\tok\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                    pair.x, pair.y, c.k, c.z, c.expected_z, c.t, c.threshold, c.csr, c.significant, c.non_informative
                ));
                for (_, v) in scores {
                    out.push('\t');
                    out.push_str(&cell(*v));
                }
                if with_types {
                    let cls = classification.as_ref();
                    for t in CoocType::ALL {
                        let flag = cls.is_some_and(|c| c.types.contains(&t));
                        out.push_str(if flag { "\t1" } else { "\t0" });
                    }
                    let ex = cls
                        .map(|c| c.exclusive.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(","))
                        .filter(|s| !s.is_empty())
                        .unwrap_or_else(|| "-".into());
                    out.push('\t');
                    out.push_str(&ex);
                }
            }
        }
        out.push('\n');
    }
    out
}

fn render_json(records: &[PairRecord], with_types: bool) -> String {
    let mut out = String::new();
    for r in records {
        let v = match r {
            PairRecord::Flagged { word1, word2, reason } => json!({
                "word1": word1, "word2": word2, "status": reason,
            }),
            PairRecord::Scored {
                pair,
                result: c,
                measures: scores,
                classification,
            } => {
                let m: Map<String, Value> = scores
                    .iter()
                    .map(|(id, v)| (id.name().to_string(), v.map(json_f64).unwrap_or(Value::Null)))
                    .collect();
                let mut obj = json!({
                    "word1": pair.x, "word2": pair.y, "status": "ok",
                    "k": c.k, "z": c.z, "expected_z": c.expected_z, "t": c.t,
                    "threshold": c.threshold, "csr": c.csr, "significant": c.significant,
                    "non_informative": c.non_informative, "measures": m,
                });
                if with_types {
                    let cls = classification.as_ref();
                    let types: Vec<String> = cls
                        .map(|c| c.types.iter().map(|t| t.to_string()).collect())
                        .unwrap_or_default();
                    let exclusive: Vec<String> = cls
                        .map(|c| c.exclusive.iter().map(|t| t.to_string()).collect())
                        .unwrap_or_default();
                    obj["types"] = json!(types);
                    obj["exclusive"] = json!(exclusive);
                }
                obj
            }
        };
        out.push_str(&v.to_string());
        out.push('\n');
    }
    out
}

fn render_ranks(records: &[PairRecord], measures: &[MeasureId]) -> String {
    let mut out = String::from("word1\tword2\tmeasure\tscore\trank\n");
    type Row<'a> = (&'a BigramPair, &'a CsrResult, &'a Vec<(MeasureId, Option<f64>)>);
    let scored: Vec<Row> = records
        .iter()
        .filter_map(|r| match r {
            PairRecord::Scored {
                pair, result, measures, ..
            } => Some((pair, result, measures)),
            PairRecord::Flagged { .. } => None,
        })
        .collect();
    let mut emit = |name: &str, values: Vec<(BigramPair, f64)>| {
        for item in Ranking::from_scores(name, values).items {
            out.push_str(&format!("{}\t{}\t{name}\t{}\t{}\n", item.pair.x, item.pair.y, item.score, item.rank));
        }
    };
    emit("csr", scored.iter().map(|(p, c, _)| ((*p).clone(), c.csr)).collect());
    for (i, m) in measures.iter().enumerate() {
        emit(
            m.name(),
            scored
                .iter()
                .filter_map(|(p, _, s)| s[i].1.map(|v| ((*p).clone(), v)))
                .collect(),
        );
    }
    out
}

pub fn cmd_score(a: &ScoreArgs, classify: bool) -> CliResult<()> {
    SignificanceParams::new(a.epsilon, a.delta, a.span)?;
    let measures = parse_measures(&a.measures)?;
    let with_types = classify || a.types || a.sweep;
    let settings = parse_type_settings(&a.type_settings)?;
    let pairs = collect_pairs(a)?;
    let index = CorpusIndex::load(&a.index)?;
    let provider = provider(a.tables.as_deref(), &a.limits);
    let source: Arc<dyn PiSource> = provider.source(a.span)?;
    eprintln!("scoring {} pairs at span {}", pairs.len(), a.span);

    let mut stats_out = String::from("word1\tword2\tdoc\tlength\tf\tf_hat\n");
    let mut records = Vec::with_capacity(pairs.len());
    for raw in &pairs {
        records.push(score_pair(
            &index,
            raw,
            a,
            &measures,
            source.as_ref(),
            with_types.then_some(&settings),
            &mut stats_out,
        )?);
    }
    if let Some(path) = &a.dump_stats {
        fs::write(path, &stats_out)?;
    }
    let text = match a.format {
        ScoreFormat::Tsv => render_tsv(&records, &measures, with_types),
        ScoreFormat::Json => render_json(&records, with_types),
        ScoreFormat::Ranks => render_ranks(&records, &measures),
    };
    write_output(a.out.as_deref(), &text)
}

pub fn cmd_evaluate(a: &EvaluateArgs) -> CliResult<()> {
    let config = EvalConfig {
        spans: parse_list(&a.spans, "span")?,
        measures: parse_measures(&a.measures)?,
        settings: parse_type_settings(&a.type_settings)?,
        epsilon_grid: parse_list(&a.epsilon_grid, "epsilon")?,
        delta_grid: parse_list(&a.delta_grid, "delta")?,
        top_k: a.top_k,
    };
    if config.spans.contains(&0) {
        return Err(CliError::usage("span thresholds must be at least 1"));
    }
    let dataset = load_dataset(
        &a.dataset,
        DatasetOptions {
            symmetric: !a.ordered,
            duplicates: if a.keep_first {
                DuplicatePolicy::KeepFirst
            } else {
                DuplicatePolicy::Error
            },
        },
    )?;
    let index = CorpusIndex::load(&a.index)?;
    let provider = provider(a.tables.as_deref(), &a.limits);
    let report = evaluate(&index, &dataset, &config, provider.as_ref(), &|msg| eprintln!("{msg}"))?;
    let text = match a.format {
        ReportFormat::Tsv => report.to_tsv(),
        ReportFormat::Json => report.to_jsonl(),
        ReportFormat::Markdown => report.to_markdown(),
    };
    write_output(a.out.as_deref(), &text)
}
