#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use cosig::synthetic::{generate, graded_pairs};
use cosig::RawDocument;

pub const FIXTURE_PAIRS: usize = 10;
pub const FIXTURE_DOCS: usize = 80;
pub const FIXTURE_LEN: usize = 1000;
pub const FIXTURE_SPAN: u32 = 5;

/// Documents of the evaluation fixture: ten graded pairs plus two words
/// that never share a document.
pub fn fixture_documents() -> Vec<RawDocument> {
    let mut plans = graded_pairs(FIXTURE_PAIRS, 20, FIXTURE_SPAN);
    for (i, plan) in plans.iter_mut().enumerate() {
        plan.docs = 8 + (i * 7) % 13;
        plan.near_docs = plan.near_docs.min(plan.docs);
    }
    let mut docs = generate(FIXTURE_DOCS, FIXTURE_LEN, &plans, 11).documents;
    docs[0].text.push_str(" loner");
    docs[1].text.push_str(" hermit");
    docs
}

pub fn fixture_dataset() -> String {
    let mut s = String::from("# word1\tword2\tscore\n");
    for i in 0..FIXTURE_PAIRS {
        let human = (i as f64 * 0.7 + if i % 3 == 0 { 1.1 } else { 0.0 }) / 10.0;
        s.push_str(&format!("p{i}a\tp{i}b\t{human}\n"));
    }
    s.push_str("loner\thermit\t0.5\n");
    s.push_str("p1a\tabsentword\t0.2\n");
    s
}

/// Write the fixture corpus (one file per document) and dataset under `dir`.
pub fn write_fixture(dir: &Path) -> (PathBuf, PathBuf) {
    let corpus = dir.join("corpus");
    fs::create_dir_all(&corpus).unwrap();
    for d in fixture_documents() {
        fs::write(corpus.join(format!("{}.txt", d.name)), &d.text).unwrap();
    }
    let dataset = dir.join("pairs.tsv");
    fs::write(&dataset, fixture_dataset()).unwrap();
    (corpus, dataset)
}
