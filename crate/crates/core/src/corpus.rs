//! Corpus ingestion and the positional inverted index.
//!
//! Raw documents are tokenized on whitespace, punctuation is trimmed from
//! token edges (a token that is only punctuation disappears), tokens are
//! case-folded by default, and any document longer than
//! [`IngestConfig::max_doc_length`] is cut into consecutive chunks. Every
//! chunk becomes an independent index document with positions starting at 1.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rayon::prelude::*;
use thiserror::Error;

pub const DEFAULT_MAX_DOC_LENGTH: usize = 1500;

const INDEX_MAGIC: &str = "COSIG-INDEX";
const INDEX_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read document {name}: {source}")]
    Unreadable {
        name: String,
        #[source]
        source: io::Error,
    },
    #[error("empty corpus: no tokens after tokenization")]
    EmptyCorpus,
    #[error("invalid ingest configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid bigram: both words are {0:?}")]
    InvalidBigram(String),
    #[error("index file error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, CorpusError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IngestConfig {
    pub max_doc_length: usize,
    pub lowercase: bool,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig {
            max_doc_length: DEFAULT_MAX_DOC_LENGTH,
            lowercase: true,
        }
    }
}

/// A document as it arrives from a source, before tokenization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawDocument {
    pub name: String,
    pub text: String,
}

impl RawDocument {
    pub fn new(name: impl Into<String>, text: impl Into<String>) -> Self {
        RawDocument {
            name: name.into(),
            text: text.into(),
        }
    }
}

/// Dense identifier of an index document (a chunk of a raw document).
pub type DocId = u32;

/// A tokenized index document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: DocId,
    pub name: String,
    pub tokens: Vec<String>,
}

impl Document {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocMeta {
    pub name: String,
    pub length: u32,
}

/// Split on whitespace, trim non-alphanumeric characters from both ends and
/// drop anything left empty.
pub fn tokenize(text: &str, lowercase: bool) -> Vec<String> {
    text.split_whitespace()
        .filter_map(|raw| {
            let trimmed = raw.trim_matches(|c: char| !c.is_alphanumeric());
            if trimmed.is_empty() {
                None
            } else if lowercase {
                Some(trimmed.to_lowercase())
            } else {
                Some(trimmed.to_string())
            }
        })
        .collect()
}

/// Chunk a token stream greedily into parts of at most `max_len` tokens.
pub fn chunk_tokens(tokens: Vec<String>, max_len: usize) -> Vec<Vec<String>> {
    if tokens.len() <= max_len {
        return vec![tokens];
    }
    let mut parts = Vec::with_capacity(tokens.len().div_ceil(max_len));
    let mut iter = tokens.into_iter().peekable();
    while iter.peek().is_some() {
        parts.push(iter.by_ref().take(max_len).collect());
    }
    parts
}

/// Positional postings for one word: `(doc, positions)` sorted by doc id,
/// positions 1-based and strictly increasing.
pub type PostingList = Vec<(DocId, Vec<u32>)>;

/// Immutable positional index over a partitioned corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusIndex {
    config: IngestConfig,
    docs: Vec<DocMeta>,
    postings: BTreeMap<String, PostingList>,
    total_tokens: u64,
}

/// Ingest documents into an index. Tokenization runs in parallel; doc ids
/// follow source order so the result does not depend on scheduling.
pub fn ingest<I>(source: I, config: IngestConfig) -> Result<CorpusIndex>
where
    I: IntoIterator<Item = Result<RawDocument>>,
{
    if config.max_doc_length == 0 {
        return Err(CorpusError::InvalidConfig(
            "max_doc_length must be at least 1".into(),
        ));
    }
    let raw: Vec<RawDocument> = source.into_iter().collect::<Result<_>>()?;
    let mut builder = IndexBuilder::new(config);
    for doc in partition(raw, config) {
        builder.push(doc.name, &doc.tokens);
    }
    builder.finish()
}

/// Tokenize and chunk raw documents into index documents. Chunks of a
/// split document are named `<name>#<part>`; documents with no tokens are
/// dropped.
pub fn partition(raw: Vec<RawDocument>, config: IngestConfig) -> Vec<Document> {
    let tokenized: Vec<(String, Vec<Vec<String>>)> = raw
        .into_par_iter()
        .map(|doc| {
            let tokens = tokenize(&doc.text, config.lowercase);
            (doc.name, chunk_tokens(tokens, config.max_doc_length.max(1)))
        })
        .collect();
    let mut docs = Vec::new();
    for (name, parts) in tokenized {
        let multi = parts.len() > 1;
        for (i, tokens) in parts.into_iter().enumerate() {
            if tokens.is_empty() {
                continue;
            }
            let name = if multi {
                format!("{name}#{}", i + 1)
            } else {
                name.clone()
            };
            docs.push(Document {
                id: docs.len() as DocId,
                name,
                tokens,
            });
        }
    }
    docs
}

struct IndexBuilder {
    config: IngestConfig,
    docs: Vec<DocMeta>,
    postings: BTreeMap<String, PostingList>,
    total_tokens: u64,
}

impl IndexBuilder {
    fn new(config: IngestConfig) -> Self {
        IndexBuilder {
            config,
            docs: Vec::new(),
            postings: BTreeMap::new(),
            total_tokens: 0,
        }
    }

    fn push(&mut self, name: String, tokens: &[String]) {
        let id = self.docs.len() as DocId;
        for (i, tok) in tokens.iter().enumerate() {
            let list = self.postings.entry(tok.clone()).or_default();
            match list.last_mut() {
                Some((doc, positions)) if *doc == id => positions.push(i as u32 + 1),
                _ => list.push((id, vec![i as u32 + 1])),
            }
        }
        self.total_tokens += tokens.len() as u64;
        self.docs.push(DocMeta {
            name,
            length: tokens.len() as u32,
        });
    }

    fn finish(self) -> Result<CorpusIndex> {
        if self.total_tokens == 0 {
            return Err(CorpusError::EmptyCorpus);
        }
        Ok(CorpusIndex {
            config: self.config,
            docs: self.docs,
            postings: self.postings,
            total_tokens: self.total_tokens,
        })
    }
}

impl CorpusIndex {
    pub fn config(&self) -> IngestConfig {
        self.config
    }

    /// Total number of tokens, `N`.
    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    pub fn doc_count(&self) -> usize {
        self.docs.len()
    }

    pub fn vocabulary_size(&self) -> usize {
        self.postings.len()
    }

    pub fn docs(&self) -> &[DocMeta] {
        &self.docs
    }

    pub fn doc_length(&self, doc: DocId) -> u32 {
        self.docs[doc as usize].length
    }

    pub fn contains(&self, word: &str) -> bool {
        self.postings.contains_key(word)
    }

    pub fn postings(&self, word: &str) -> &[(DocId, Vec<u32>)] {
        self.postings.get(word).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.postings.keys().map(String::as_str)
    }

    /// Positions of `word` in `doc`, empty if it does not occur there.
    pub fn positions(&self, word: &str, doc: DocId) -> &[u32] {
        let list = self.postings(word);
        match list.binary_search_by_key(&doc, |(d, _)| *d) {
            Ok(i) => &list[i].1,
            Err(_) => &[],
        }
    }

    /// Corpus frequency `f(w)`.
    pub fn unigram_frequency(&self, word: &str) -> u64 {
        self.postings(word)
            .iter()
            .map(|(_, p)| p.len() as u64)
            .sum()
    }

    /// Documents holding at least one token of each word, in doc id order.
    pub fn docs_with_both(&self, x: &str, y: &str) -> Result<Vec<DocId>> {
        if x == y {
            return Err(CorpusError::InvalidBigram(x.to_string()));
        }
        let (a, b) = (self.postings(x), self.postings(y));
        let (mut i, mut j) = (0, 0);
        let mut out = Vec::new();
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    out.push(a[i].0);
                    i += 1;
                    j += 1;
                }
            }
        }
        Ok(out)
    }

    /// Write the index: a plain-text header recording the ingest
    /// configuration, a blank line, then a little-endian binary body.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{INDEX_MAGIC}")?;
        writeln!(w, "version {INDEX_VERSION}")?;
        writeln!(w, "max_doc_length {}", self.config.max_doc_length)?;
        writeln!(w, "lowercase {}", self.config.lowercase)?;
        writeln!(w, "tokenizer whitespace-trim-punct")?;
        writeln!(w, "documents {}", self.docs.len())?;
        writeln!(w, "vocabulary {}", self.postings.len())?;
        writeln!(w, "tokens {}", self.total_tokens)?;
        writeln!(w)?;
        w.write_u32::<LittleEndian>(self.docs.len() as u32)?;
        for doc in &self.docs {
            write_str(&mut w, &doc.name)?;
            w.write_u32::<LittleEndian>(doc.length)?;
        }
        w.write_u32::<LittleEndian>(self.postings.len() as u32)?;
        for (word, list) in &self.postings {
            write_str(&mut w, word)?;
            w.write_u32::<LittleEndian>(list.len() as u32)?;
            for (doc, positions) in list {
                w.write_u32::<LittleEndian>(*doc)?;
                w.write_u32::<LittleEndian>(positions.len() as u32)?;
                for p in positions {
                    w.write_u32::<LittleEndian>(*p)?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let mut r = BufReader::new(r);
        let header = read_header(&mut r)?;
        if header.first().map(String::as_str) != Some(INDEX_MAGIC) {
            return Err(CorpusError::Format("missing index magic".into()));
        }
        let field = |key: &str| -> Result<String> {
            header
                .iter()
                .find_map(|l| l.strip_prefix(key).map(|v| v.trim().to_string()))
                .ok_or_else(|| CorpusError::Format(format!("header lacks {key}")))
        };
        let version: u32 = parse_field(&field("version ")?)?;
        if version != INDEX_VERSION {
            return Err(CorpusError::Format(format!(
                "unsupported index version {version}"
            )));
        }
        let config = IngestConfig {
            max_doc_length: parse_field(&field("max_doc_length ")?)?,
            lowercase: parse_field(&field("lowercase ")?)?,
        };

        let ndocs = r.read_u32::<LittleEndian>()? as usize;
        let mut docs = Vec::with_capacity(ndocs);
        for _ in 0..ndocs {
            let name = read_str(&mut r)?;
            let length = r.read_u32::<LittleEndian>()?;
            docs.push(DocMeta { name, length });
        }
        let nwords = r.read_u32::<LittleEndian>()? as usize;
        let mut postings = BTreeMap::new();
        let mut total_tokens = 0u64;
        for _ in 0..nwords {
            let word = read_str(&mut r)?;
            let nlist = r.read_u32::<LittleEndian>()? as usize;
            let mut list = Vec::with_capacity(nlist);
            for _ in 0..nlist {
                let doc = r.read_u32::<LittleEndian>()?;
                let n = r.read_u32::<LittleEndian>()? as usize;
                let mut positions = Vec::with_capacity(n);
                for _ in 0..n {
                    positions.push(r.read_u32::<LittleEndian>()?);
                }
                let len = docs
                    .get(doc as usize)
                    .ok_or_else(|| CorpusError::Format(format!("posting for unknown doc {doc}")))?
                    .length;
                if positions.windows(2).any(|w| w[0] >= w[1])
                    || positions.iter().any(|&p| p == 0 || p > len)
                {
                    return Err(CorpusError::Format(format!(
                        "corrupt positions for {word:?} in doc {doc}"
                    )));
                }
                total_tokens += n as u64;
                list.push((doc, positions));
            }
            postings.insert(word, list);
        }
        let expected: u64 = docs.iter().map(|d| d.length as u64).sum();
        if expected != total_tokens {
            return Err(CorpusError::Format(format!(
                "token count mismatch: lengths sum to {expected}, postings hold {total_tokens}"
            )));
        }
        Ok(CorpusIndex {
            config,
            docs,
            postings,
            total_tokens,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path)?;
        self.write_to(io::BufWriter::new(file))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = fs::File::open(path).map_err(|source| CorpusError::Unreadable {
            name: path.display().to_string(),
            source,
        })?;
        Self::read_from(file)
    }
}

fn parse_field<T: std::str::FromStr>(v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| CorpusError::Format(format!("bad header value {v:?}")))
}

/// Reads `\n`-terminated header lines up to the first empty one.
pub(crate) fn read_header<R: BufRead>(r: &mut R) -> Result<Vec<String>> {
    let mut lines = Vec::new();
    loop {
        let mut line = String::new();
        if r.read_line(&mut line)? == 0 {
            return Err(CorpusError::Format("truncated header".into()));
        }
        let line = line.trim_end_matches('\n');
        if line.is_empty() {
            return Ok(lines);
        }
        if lines.len() > 64 {
            return Err(CorpusError::Format("header too long".into()));
        }
        lines.push(line.to_string());
    }
}

fn write_str<W: Write>(w: &mut W, s: &str) -> io::Result<()> {
    w.write_u32::<LittleEndian>(s.len() as u32)?;
    w.write_all(s.as_bytes())
}

fn read_str<R: Read>(r: &mut R) -> Result<String> {
    let n = r.read_u32::<LittleEndian>()? as usize;
    let mut buf = vec![0u8; n];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|_| CorpusError::Format("non-UTF-8 string".into()))
}

/// One document per `*.txt` (or any regular) file in `dir`, ordered by file
/// name.
pub fn read_dir_documents(dir: &Path) -> Result<Vec<Result<RawDocument>>> {
    let entries = fs::read_dir(dir).map_err(|source| CorpusError::Unreadable {
        name: dir.display().to_string(),
        source,
    })?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    paths.sort();
    Ok(paths
        .into_iter()
        .map(|p| {
            let name = p
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            fs::read_to_string(&p)
                .map(|text| RawDocument { name: name.clone(), text })
                .map_err(|source| CorpusError::Unreadable { name, source })
        })
        .collect())
}

/// Line-delimited corpus: one document per non-empty line, named
/// `<file>:<line>`.
pub fn read_line_documents(path: &Path) -> Result<Vec<Result<RawDocument>>> {
    let file = fs::File::open(path).map_err(|source| CorpusError::Unreadable {
        name: path.display().to_string(),
        source,
    })?;
    let base = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut docs = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let name = format!("{base}:{}", i + 1);
        match line {
            Ok(text) if text.trim().is_empty() => {}
            Ok(text) => docs.push(Ok(RawDocument { name, text })),
            Err(source) => docs.push(Err(CorpusError::Unreadable { name, source })),
        }
    }
    Ok(docs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn index(docs: &[&str]) -> CorpusIndex {
        let raw = docs
            .iter()
            .enumerate()
            .map(|(i, t)| Ok(RawDocument::new(format!("d{i}"), *t)));
        ingest(raw, IngestConfig::default()).unwrap()
    }

    #[test]
    fn postings_of_simple_document() {
        let idx = index(&["a b a"]);
        assert_eq!(idx.positions("a", 0), &[1, 3]);
        assert_eq!(idx.positions("b", 0), &[2]);
        assert_eq!(idx.total_tokens(), 3);
        assert_eq!(idx.unigram_frequency("a"), 2);
        assert_eq!(idx.unigram_frequency("zzz"), 0);
    }

    #[test]
    fn punctuation_is_ignored() {
        let idx = index(&["a , b !"]);
        assert_eq!(idx.positions("a", 0), &[1]);
        assert_eq!(idx.positions("b", 0), &[2]);
        assert_eq!(idx.total_tokens(), 2);
        assert_eq!(tokenize("\"Hello,\" she-said... (ok)", true), ["hello", "she-said", "ok"]);
        assert_eq!(tokenize("Mixed Case", false), ["Mixed", "Case"]);
    }

    #[test]
    fn long_documents_are_chunked() {
        let text = (0..3200).map(|i| format!("w{}", i % 7)).collect::<Vec<_>>().join(" ");
        let idx = index(&[&text]);
        let lengths: Vec<u32> = idx.docs().iter().map(|d| d.length).collect();
        assert_eq!(lengths, [1500, 1500, 200]);
        assert_eq!(idx.total_tokens(), 3200);
        let unchunked = tokenize(&text, true);
        for w in ["w0", "w3", "w6"] {
            let direct = unchunked.iter().filter(|t| *t == w).count() as u64;
            assert_eq!(idx.unigram_frequency(w), direct);
        }
        assert_eq!(idx.docs()[2].name, "d0#3");
    }

    #[test]
    fn joint_documents() {
        let idx = index(&["x a", "y b", "x y", "y c x"]);
        assert_eq!(idx.docs_with_both("x", "y").unwrap(), [2, 3]);
        assert!(idx.docs_with_both("a", "b").unwrap().is_empty());
        assert!(matches!(
            idx.docs_with_both("x", "x"),
            Err(CorpusError::InvalidBigram(_))
        ));
    }

    #[test]
    fn empty_corpus_is_an_error() {
        let raw = vec![Ok(RawDocument::new("a", " ... ,, "))];
        assert!(matches!(
            ingest(raw, IngestConfig::default()),
            Err(CorpusError::EmptyCorpus)
        ));
        assert!(matches!(
            ingest(Vec::new(), IngestConfig::default()),
            Err(CorpusError::EmptyCorpus)
        ));
    }

    #[test]
    fn unreadable_document_is_named() {
        let raw = vec![
            Ok(RawDocument::new("ok", "a b")),
            Err(CorpusError::Unreadable {
                name: "broken.txt".into(),
                source: io::Error::new(io::ErrorKind::InvalidData, "bad utf-8"),
            }),
        ];
        let err = ingest(raw, IngestConfig::default()).unwrap_err();
        assert!(err.to_string().contains("broken.txt"));
    }

    #[test]
    fn zero_max_length_rejected() {
        let cfg = IngestConfig {
            max_doc_length: 0,
            lowercase: true,
        };
        assert!(matches!(
            ingest(vec![Ok(RawDocument::new("a", "b"))], cfg),
            Err(CorpusError::InvalidConfig(_))
        ));
    }

    #[test]
    fn corrupt_index_is_rejected() {
        let idx = index(&["a b c"]);
        let mut buf = Vec::new();
        idx.write_to(&mut buf).unwrap();
        let truncated = &buf[..buf.len() - 3];
        assert!(CorpusIndex::read_from(truncated).is_err());
        assert!(CorpusIndex::read_from(&b"NOT-AN-INDEX\n\n"[..]).is_err());
    }
}
