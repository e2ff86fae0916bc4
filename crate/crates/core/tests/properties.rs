use proptest::prelude::*;

use cosig::corpus::{ingest, CorpusIndex, IngestConfig};
use cosig::evaluation::spearman;
use cosig::histogram::{PiCalculator, PiSource};
use cosig::measures::{score, MeasureId, MeasureInputs};
use cosig::occurrences::{pair_stats, DocPairStats};
use cosig::significance::{csr_from_stats, document_support};
use cosig::{BigramPair, RawDocument};

const WORDS: [&str; 6] = ["x", "y", "a", "b", "c", "d"];

fn corpus() -> impl Strategy<Value = Vec<Vec<usize>>> {
    prop::collection::vec(prop::collection::vec(0..WORDS.len(), 2..60), 1..8)
}

fn build(docs: &[Vec<usize>], max_doc_length: usize) -> CorpusIndex {
    let raw = docs.iter().enumerate().map(|(i, d)| {
        let text: Vec<&str> = d.iter().map(|&w| WORDS[w]).collect();
        Ok(RawDocument::new(format!("d{i}"), text.join(" ")))
    });
    ingest(
        raw,
        IngestConfig {
            max_doc_length,
            lowercase: true,
        },
    )
    .unwrap()
}

fn stats_strategy() -> impl Strategy<Value = Vec<DocPairStats>> {
    prop::collection::vec(
        (1u32..6, 0u32..6, 12u32..80).prop_map(|(f, h, ell)| DocPairStats {
            doc: 0,
            length: ell,
            f,
            f_hat: h.min(f),
            spans: vec![],
            constrained_spans: vec![],
        }),
        1..25,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn index_round_trips(docs in corpus(), chunk in 5usize..40) {
        let index = build(&docs, chunk);
        let mut bytes = Vec::new();
        index.write_to(&mut bytes).unwrap();
        let back = CorpusIndex::read_from(bytes.as_slice()).unwrap();
        prop_assert_eq!(back.total_tokens(), index.total_tokens());
        prop_assert_eq!(back.docs(), index.docs());
        for w in WORDS {
            prop_assert_eq!(back.postings(w), index.postings(w));
        }
        let mut again = Vec::new();
        back.write_to(&mut again).unwrap();
        prop_assert_eq!(bytes, again);
    }

    #[test]
    fn csr_is_symmetric(docs in corpus(), x in 1u32..8) {
        let index = build(&docs, 1500);
        let calc = PiCalculator::exact(x).unwrap();
        let p = BigramPair::new("x", "y").unwrap();
        let s1 = pair_stats(&index, &p, x).unwrap();
        let s2 = pair_stats(&index, &p.swapped(), x).unwrap();
        prop_assert_eq!(s1.len(), s2.len());
        if !s1.is_empty() {
            let a = csr_from_stats(&s1, 0.2, 0.1, &calc).unwrap();
            let b = csr_from_stats(&s2, 0.2, 0.1, &calc).unwrap();
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn raising_delta_never_revokes(stats in stats_strategy(), eps in 0.02f64..0.9, d1 in 0.001f64..0.98, bump in 0.0f64..0.5) {
        let calc = PiCalculator::exact(4).unwrap();
        let d2 = (d1 + bump).min(0.999);
        let lo = csr_from_stats(&stats, eps, d1, &calc).unwrap();
        let hi = csr_from_stats(&stats, eps, d2, &calc).unwrap();
        prop_assert!(hi.t <= lo.t);
        prop_assert!(!lo.significant || hi.significant);
        prop_assert!(((-2.0 * lo.k as f64 * lo.t * lo.t).exp() - d1).abs() < 1e-12);
    }

    #[test]
    fn raising_epsilon_never_drops_support(stats in stats_strategy(), e1 in 0.01f64..0.98, bump in 0.0f64..0.5) {
        let calc = PiCalculator::exact(4).unwrap();
        let e2 = (e1 + bump).min(0.999);
        for s in &stats {
            let before = document_support(s, e1, &calc).unwrap();
            let after = document_support(s, e2, &calc).unwrap();
            prop_assert!(!before || after);
        }
    }

    #[test]
    fn document_order_is_irrelevant(stats in stats_strategy(), seed in any::<u64>()) {
        let calc = PiCalculator::exact(4).unwrap();
        let mut shuffled = stats.clone();
        let n = shuffled.len();
        for i in (1..n).rev() {
            let j = (seed.wrapping_mul(i as u64 + 7) % (i as u64 + 1)) as usize;
            shuffled.swap(i, j);
        }
        let a = csr_from_stats(&stats, 0.1, 0.1, &calc).unwrap();
        let b = csr_from_stats(&shuffled, 0.1, 0.1, &calc).unwrap();
        prop_assert_eq!(a.z, b.z);
        prop_assert!((a.expected_z - b.expected_z).abs() < 1e-9);
    }

    #[test]
    fn spearman_bounded_and_symmetric(v in prop::collection::vec((0u8..6, 0u8..6), 2..40)) {
        let a: Vec<f64> = v.iter().map(|p| p.0 as f64).collect();
        let b: Vec<f64> = v.iter().map(|p| p.1 as f64).collect();
        let ab = spearman(&a, &b).unwrap();
        prop_assert_eq!(ab, spearman(&b, &a).unwrap());
        if let Some(r) = ab {
            prop_assert!((-1.0..=1.0).contains(&r));
        }
    }

    #[test]
    fn symmetric_measures_ignore_argument_order(
        fx in 1u64..5000, fy in 1u64..5000, frac in 0.0f64..1.0, extra in 0u64..100_000, k in 1u64..50
    ) {
        let fxy = ((fx.min(fy) as f64) * frac) as u64;
        let inputs = MeasureInputs {
            f_x: fx,
            f_y: fy,
            f_hat_xy: fxy,
            n: fx + fy + extra,
            k,
            spans: vec![1; fxy as usize],
        };
        for m in MeasureId::ALL.into_iter().filter(|m| m.properties().symmetric) {
            let (a, b) = (score(m, &inputs), score(m, &inputs.swapped()));
            match (a, b) {
                (Ok(a), Ok(b)) => prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{} {} {}", m, a, b),
                (Err(_), Err(_)) => {}
                (a, b) => prop_assert!(false, "{}: {:?} vs {:?}", m, a, b),
            }
        }
    }
}

#[test]
fn pi_source_trait_objects_agree() {
    let calc = PiCalculator::exact(3).unwrap();
    let dynamic: &dyn PiSource = &calc;
    assert_eq!(dynamic.pi(1, 2, 10).unwrap(), calc.pi(1, 2, 10).unwrap());
}
