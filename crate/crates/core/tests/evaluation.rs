mod common;

use cosig::corpus::{ingest, IngestConfig};
use cosig::evaluation::*;
use cosig::histogram::{ComputedTables, PiCalculator, PiProvider};
use cosig::measures::MeasureId;
use cosig::synthetic::{generate, graded_pairs};
use cosig::{BigramPair, CoocType, CorpusIndex, RawDocument};

fn index_of(docs: Vec<RawDocument>) -> CorpusIndex {
    ingest(docs.into_iter().map(Ok), IngestConfig::default()).unwrap()
}

/// Ten pairs in 20 documents each; pair i has a short occurrence in 2i of
/// them and all other occurrences are at least 5 apart.
fn graded() -> (CorpusIndex, WordPairDataset) {
    let mut docs = generate(40, 300, &graded_pairs(10, 20, 5), 3).documents;
    docs[0].text.push_str(" loner");
    docs[1].text.push_str(" hermit");
    let mut text = String::new();
    for i in 0..10 {
        text.push_str(&format!("p{i}a\tp{i}b\t{i}\n"));
    }
    (index_of(docs), parse_dataset("graded", &text, DatasetOptions::default()).unwrap())
}

fn evidence(index: &CorpusIndex, dataset: &WordPairDataset, span: u32) -> SpanEvidence {
    let (resolved, excluded) = resolve_pairs(index, dataset);
    assert!(excluded.is_empty());
    gather_evidence(index, &resolved, span).unwrap()
}

#[test]
fn csr_correlates_perfectly_with_itself() {
    let (index, dataset) = graded();
    let settings = cosig::significance::TypeSettings::default();
    let scorers: Vec<EvalScorer> = CoocType::ALL
        .iter()
        .map(|&t| {
            let (epsilon, delta) = settings.get(t);
            EvalScorer::Csr { epsilon, delta }
        })
        .collect();
    let (reports, excluded) =
        effectiveness_matrix(&index, &dataset, &scorers, &[5], &settings, &ComputedTables::default()).unwrap();
    assert!(excluded.is_empty());
    for (report, t) in reports.iter().zip(CoocType::ALL) {
        let own = report.per_type.iter().find(|r| r.cooc_type == t).unwrap();
        assert_eq!(own.rho, Some(1.0), "{}", report.measure);
        assert!(report.effective.contains(&t));
    }
}

#[test]
fn planted_ranking_makes_ochiai_effective() {
    // Every pair has f(x) = f(y) = K = 20 and at most one occurrence per
    // document, so Z = f_hat and both rankings order pairs by f_hat.
    let (index, dataset) = graded();
    let (reports, _) = effectiveness_matrix(
        &index,
        &dataset,
        &[EvalScorer::Measure(MeasureId::Ochiai)],
        &[5],
        &Default::default(),
        &ComputedTables::default(),
    )
    .unwrap();
    assert_eq!(reports[0].per_type[0].rho, Some(1.0));
    assert!(reports[0].effective.contains(&CoocType::A));
}

#[test]
fn constant_ranking_is_flagged() {
    let plans: Vec<_> = graded_pairs(4, 10, 5)
        .into_iter()
        .map(|mut p| {
            p.near_docs = 5;
            p
        })
        .collect();
    let index = index_of(generate(20, 200, &plans, 9).documents);
    let text: String = (0..4).map(|i| format!("p{i}a\tp{i}b\t{i}\n")).collect();
    let dataset = parse_dataset("flat", &text, DatasetOptions::default()).unwrap();
    let (reports, _) = effectiveness_matrix(
        &index,
        &dataset,
        &[EvalScorer::Measure(MeasureId::Dice)],
        &[5],
        &Default::default(),
        &ComputedTables::default(),
    )
    .unwrap();
    assert!(reports[0].per_type.iter().all(|r| r.rho.is_none()));
    assert!(reports[0].effective.is_empty());
}

#[test]
fn parameter_scan_rules() {
    let (index, dataset) = graded();
    let ev = evidence(&index, &dataset, 5);
    let source = PiCalculator::exact(5).unwrap();
    let ochiai = EvalScorer::Measure(MeasureId::Ochiai);

    let single = best_parameter_scan(ochiai, &ev, &source, &[0.4], &[0.1]).unwrap();
    assert_eq!((single.epsilon, single.delta, single.cooc_type), (0.4, 0.1, Some(CoocType::B)));

    let csr = EvalScorer::Csr {
        epsilon: 0.1,
        delta: 0.1,
    };
    // pi(1, 1, 300) at x = 5 is about 0.013, so supports need epsilon above it.
    let best = best_parameter_scan(csr, &ev, &source, &[0.01, 0.1], &[0.1]).unwrap();
    assert_eq!((best.epsilon, best.delta, best.rho), (0.1, 0.1, Some(1.0)));

    let tie = best_parameter_scan(ochiai, &ev, &source, &[0.4, 0.1], &[0.1]).unwrap();
    assert_eq!((tie.epsilon, tie.rho), (0.1, Some(1.0)));
    let tie = best_parameter_scan(ochiai, &ev, &source, &[0.1], &[0.4, 0.1]).unwrap();
    assert_eq!(tie.delta, 0.1);
    assert!(best_parameter_scan(ochiai, &ev, &source, &[], &[0.1]).is_err());
}

#[test]
fn top_k_matches_hand_ranks() {
    // (f_hat, f(x), f(y)) per pair:
    //   1: (1, 1, 1)  pmi ~ 1/1   ochiai 1
    //   2: (4, 4, 4)  pmi ~ 1/4   ochiai 1
    //   3: (2, 2, 8)  pmi ~ 1/8   ochiai 1/2
    //   4: (3, 9, 3)  pmi ~ 1/9   ochiai 1/sqrt(3)
    //   5: (1, 2, 3)  pmi ~ 1/6   ochiai 1/sqrt(6)
    let spec = [(1, 1, 1), (4, 4, 4), (2, 2, 8), (3, 9, 3), (1, 2, 3)];
    let gap = ["z"; 10].join(" ");
    let docs: Vec<RawDocument> = spec
        .iter()
        .enumerate()
        .map(|(i, &(joint, fx, fy))| {
            let (a, b) = (format!("a{}", i + 1), format!("b{}", i + 1));
            let mut parts: Vec<String> = (0..joint).map(|_| format!("{a} {b}")).collect();
            parts.extend((joint..fx).map(|_| a.clone()));
            parts.extend((joint..fy).map(|_| b.clone()));
            RawDocument::new(format!("d{i}"), parts.join(&format!(" {gap} ")))
        })
        .collect();
    let index = index_of(docs);
    let text: String = (1..=5).map(|i| format!("a{i}\tb{i}\t{i}\n")).collect();
    let dataset = parse_dataset("five", &text, DatasetOptions::default()).unwrap();
    let ev = evidence(&index, &dataset, 5);
    let f_hats: Vec<u64> = ev.pairs.iter().map(|p| p.inputs.f_hat_xy).collect();
    assert_eq!(f_hats, [1, 4, 2, 3, 1]);

    let source = PiCalculator::exact(5).unwrap();
    let pmi = scorer_ranking(EvalScorer::Measure(MeasureId::Pmi), &ev, &source).unwrap();
    let ochiai = scorer_ranking(EvalScorer::Measure(MeasureId::Ochiai), &ev, &source).unwrap();
    let order = |r: &cosig::measures::Ranking| r.items.iter().map(|i| i.pair.x.clone()).collect::<Vec<_>>();
    assert_eq!(order(&pmi), ["a1", "a2", "a5", "a3", "a4"]);
    assert_eq!(order(&ochiai), ["a1", "a2", "a4", "a3", "a5"]);

    let both = [pmi, ochiai];
    let report = top_k_report(&both, 3, &both).unwrap();
    let cross = |t: usize| -> Vec<Option<usize>> { report.tables[t].rows.iter().map(|r| r.cross[0].1).collect() };
    assert_eq!(cross(0), [Some(1), Some(2), Some(5)]);
    assert_eq!(cross(1), [Some(1), Some(2), Some(5)]);
    assert_eq!(report.tables[1].rows[2].pair, BigramPair::new("a4", "b4").unwrap());
}

#[test]
fn excluded_pairs_do_not_change_rho() {
    let (index, dataset) = graded();
    let mut text: String = dataset
        .entries
        .iter()
        .map(|e| format!("{}\t{}\t{}\n", e.word1, e.word2, e.human_score))
        .collect();
    let base = evaluate(&index, &dataset, &EvalConfig { spans: vec![5], ..Default::default() }, &ComputedTables::default(), &|_| {}).unwrap();
    text.push_str("loner\thermit\t3\nmissing\tp2a\t1\n");
    let extended = parse_dataset("graded+", &text, DatasetOptions::default()).unwrap();
    let more = evaluate(&index, &extended, &EvalConfig { spans: vec![5], ..Default::default() }, &ComputedTables::default(), &|_| {}).unwrap();
    assert_eq!(base.effectiveness, more.effectiveness);
    assert_eq!(more.excluded.len(), 2);
    assert!(more.excluded.iter().any(|e| e.reason == Exclusion::NoJointDocuments && e.span == Some(5)));
    assert!(more
        .excluded
        .iter()
        .any(|e| e.reason == Exclusion::UnknownWord("missing".into()) && e.span.is_none()));
}

#[test]
fn evaluate_is_deterministic_in_process() {
    let index = index_of(common::fixture_documents());
    let dataset = parse_dataset("fixture", &common::fixture_dataset(), DatasetOptions::default()).unwrap();
    let provider = ComputedTables::default();
    let a = evaluate(&index, &dataset, &EvalConfig::default(), &provider, &|_| {}).unwrap();
    let b = evaluate(&index, &dataset, &EvalConfig::default(), &ComputedTables::default(), &|_| {}).unwrap();
    assert_eq!(a.to_tsv(), b.to_tsv());
    assert_eq!(a.to_jsonl(), b.to_jsonl());
    assert_eq!(provider.source(5).unwrap().x_threshold(), 5);
    let human: Vec<_> = a.human.iter().filter(|h| h.span == Some(5)).collect();
    assert!(human.iter().all(|h| h.used == 10 && h.total == 12));
}
