//! The co-occurrence significance test and Type A/B/C/D classification.
//!
//! A document supports the bigram when its span-constrained frequency is
//! unlikely under the null model (`pi < epsilon`). Summing supports over the
//! `K` joint documents gives `Z`; the test fires when `Z` clears its
//! expectation by the Hoeffding margin `K t`, with `t = sqrt(ln(delta) / (-2K))`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CorpusError, CorpusIndex};
use crate::histogram::{GEpsilon, HistogramError, PiSource};
use crate::occurrences::{pair_stats, BigramPair, DocPairStats};

#[derive(Debug, Error)]
pub enum SignificanceError {
    #[error("test undefined: the pair co-occurs in no document (K = 0)")]
    NoJointDocuments,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("inconsistent counts: {0}")]
    InconsistentCounts(String),
    #[error(transparent)]
    Histogram(#[from] HistogramError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

pub type Result<T> = std::result::Result<T, SignificanceError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignificanceParams {
    /// Document-level strength.
    pub epsilon: f64,
    /// Corpus-level confidence parameter; confidence is `1 - delta`.
    pub delta: f64,
    /// Span bound in words.
    pub x_threshold: u32,
}

impl SignificanceParams {
    pub fn new(epsilon: f64, delta: f64, x_threshold: u32) -> Result<Self> {
        let p = SignificanceParams {
            epsilon,
            delta,
            x_threshold,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(SignificanceError::InvalidParams(format!(
                "epsilon must lie in (0, 1), got {}",
                self.epsilon
            )));
        }
        check_delta(self.delta)?;
        if self.x_threshold == 0 {
            return Err(SignificanceError::InvalidParams(
                "span threshold must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(SignificanceError::InvalidParams(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CsrResult {
    /// Joint-document count.
    pub k: u32,
    /// Supporting documents.
    pub z: u32,
    pub expected_z: f64,
    /// Hoeffding deviation.
    pub t: f64,
    /// `E(Z) + K t`.
    pub threshold: f64,
    /// `Z / threshold`.
    pub csr: f64,
    pub significant: bool,
    /// Documents for which `g_eps` does not exist.
    pub non_informative: u32,
}

/// `t` such that `exp(-2 K t^2) = delta`.
pub fn hoeffding_t(k: u32, delta: f64) -> f64 {
    (delta.ln() / (-2.0 * k as f64)).sqrt()
}

/// `z_i`: 1 when `pi_x(f_hat_i, f_i, l_i) < epsilon`.
pub fn document_support(stats: &DocPairStats, epsilon: f64, source: &dyn PiSource) -> Result<bool> {
    Ok(source.pi(stats.f_hat, stats.f, stats.length)? < epsilon)
}

/// Sum of `z_i` and of `pi` at `g_eps` over the documents, plus the number
/// of documents where `g_eps` does not exist (those contribute zero).
pub fn support_and_expectation(
    stats: &[DocPairStats],
    epsilon: f64,
    source: &dyn PiSource,
) -> Result<(u32, f64, u32)> {
    let mut z = 0u32;
    let mut expected = 0.0f64;
    let mut non_informative = 0u32;
    for s in stats {
        let tails = source.tails(s.f, s.length)?;
        if tails[s.f_hat as usize] < epsilon {
            z += 1;
        }
        match crate::histogram::g_epsilon_from_tails(&tails, epsilon) {
            GEpsilon::At(g) => expected += tails[g as usize],
            GEpsilon::NotAttainable => non_informative += 1,
        }
    }
    Ok((z, expected, non_informative))
}

/// `E(Z)`.
pub fn expected_z(stats: &[DocPairStats], epsilon: f64, source: &dyn PiSource) -> Result<f64> {
    if stats.is_empty() {
        return Err(SignificanceError::NoJointDocuments);
    }
    Ok(support_and_expectation(stats, epsilon, source)?.1)
}

pub fn csr_decision(k: u32, z: u32, expected_z: f64, delta: f64) -> Result<CsrResult> {
    if k == 0 {
        return Err(SignificanceError::NoJointDocuments);
    }
    check_delta(delta)?;
    if z > k {
        return Err(SignificanceError::InconsistentCounts(format!(
            "Z={z} exceeds K={k}"
        )));
    }
    if !(0.0..=k as f64).contains(&expected_z) {
        return Err(SignificanceError::InconsistentCounts(format!(
            "E(Z)={expected_z} outside [0, {k}]"
        )));
    }
    let t = hoeffding_t(k, delta);
    let threshold = expected_z + k as f64 * t;
    let csr = z as f64 / threshold;
    Ok(CsrResult {
        k,
        z,
        expected_z,
        t,
        threshold,
        csr,
        significant: z as f64 >= threshold,
        non_informative: 0,
    })
}

/// The test over precomputed per-document statistics.
pub fn csr_from_stats(
    stats: &[DocPairStats],
    epsilon: f64,
    delta: f64,
    source: &dyn PiSource,
) -> Result<CsrResult> {
    if stats.is_empty() {
        return Err(SignificanceError::NoJointDocuments);
    }
    let (z, ez, non_informative) = support_and_expectation(stats, epsilon, source)?;
    let mut result = csr_decision(stats.len() as u32, z, ez, delta)?;
    result.non_informative = non_informative;
    Ok(result)
}

fn check_source(params: &SignificanceParams, source: &dyn PiSource) -> Result<()> {
    if source.x_threshold() != params.x_threshold {
        return Err(SignificanceError::InvalidParams(format!(
            "pi source is for x={}, test asks for x={}",
            source.x_threshold(),
            params.x_threshold
        )));
    }
    Ok(())
}

/// End-to-end: collect per-document statistics and run the test.
pub fn csr(
    index: &CorpusIndex,
    pair: &BigramPair,
    params: &SignificanceParams,
    source: &dyn PiSource,
) -> Result<CsrResult> {
    params.validate()?;
    check_source(params, source)?;
    let stats = pair_stats(index, pair, params.x_threshold)?;
    csr_from_stats(&stats, params.epsilon, params.delta, source)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CoocType {
    A,
    B,
    C,
    D,
}

impl CoocType {
    pub const ALL: [CoocType; 4] = [CoocType::A, CoocType::B, CoocType::C, CoocType::D];

    /// Default `(epsilon, delta)` point setting.
    pub fn default_setting(self) -> (f64, f64) {
        match self {
            CoocType::A => (0.1, 0.1),
            CoocType::B => (0.4, 0.1),
            CoocType::C => (0.1, 0.4),
            CoocType::D => (0.4, 0.4),
        }
    }

    /// Type whose bounds contain `(epsilon, delta)`: low means `<= 0.1`,
    /// high means `>= 0.4`. `None` in the gap between.
    pub fn from_bounds(epsilon: f64, delta: f64) -> Option<CoocType> {
        let level = |v: f64| {
            if v <= 0.1 {
                Some(false)
            } else if v >= 0.4 {
                Some(true)
            } else {
                None
            }
        };
        match (level(epsilon)?, level(delta)?) {
            (false, false) => Some(CoocType::A),
            (true, false) => Some(CoocType::B),
            (false, true) => Some(CoocType::C),
            (true, true) => Some(CoocType::D),
        }
    }
}

impl fmt::Display for CoocType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CoocType::A => "A",
            CoocType::B => "B",
            CoocType::C => "C",
            CoocType::D => "D",
        };
        f.write_str(s)
    }
}

impl FromStr for CoocType {
    type Err = SignificanceError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(CoocType::A),
            "B" => Ok(CoocType::B),
            "C" => Ok(CoocType::C),
            "D" => Ok(CoocType::D),
            other => Err(SignificanceError::InvalidParams(format!(
                "unknown co-occurrence type {other:?}"
            ))),
        }
    }
}

/// `(epsilon, delta)` per type.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TypeSettings {
    pub settings: [(f64, f64); 4],
}

impl Default for TypeSettings {
    fn default() -> Self {
        TypeSettings {
            settings: CoocType::ALL.map(CoocType::default_setting),
        }
    }
}

impl TypeSettings {
    pub fn get(&self, t: CoocType) -> (f64, f64) {
        self.settings[t as usize]
    }

    pub fn set(&mut self, t: CoocType, epsilon: f64, delta: f64) {
        self.settings[t as usize] = (epsilon, delta);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub results: Vec<(CoocType, CsrResult)>,
    /// Types whose test fired.
    pub types: Vec<CoocType>,
    /// Most specific assignment: `[A]`, any of `[B]`, `[C]`, `[B, C]`, or
    /// `[D]`; empty when nothing fired.
    pub exclusive: Vec<CoocType>,
}

/// Most specific type(s) from the set of firing types.
pub fn exclusive_types(types: &[CoocType]) -> Vec<CoocType> {
    let has = |t| types.contains(&t);
    if has(CoocType::A) {
        vec![CoocType::A]
    } else if has(CoocType::B) || has(CoocType::C) {
        [CoocType::B, CoocType::C].into_iter().filter(|&t| has(t)).collect()
    } else if has(CoocType::D) {
        vec![CoocType::D]
    } else {
        Vec::new()
    }
}

/// Run the test at each type's setting on the same per-document statistics.
pub fn classify_stats(
    stats: &[DocPairStats],
    source: &dyn PiSource,
    settings: &TypeSettings,
) -> Result<Classification> {
    let mut results = Vec::with_capacity(4);
    for t in CoocType::ALL {
        let (epsilon, delta) = settings.get(t);
        SignificanceParams::new(epsilon, delta, source.x_threshold())?;
        results.push((t, csr_from_stats(stats, epsilon, delta, source)?));
    }
    let types: Vec<CoocType> = results
        .iter()
        .filter(|(_, r)| r.significant)
        .map(|(t, _)| *t)
        .collect();
    let exclusive = exclusive_types(&types);
    Ok(Classification {
        results,
        types,
        exclusive,
    })
}

pub fn classify(
    index: &CorpusIndex,
    pair: &BigramPair,
    source: &dyn PiSource,
    settings: &TypeSettings,
) -> Result<Classification> {
    let stats = pair_stats(index, pair, source.x_threshold())?;
    classify_stats(&stats, source, settings)
}

/// Classification with each type read as a region rather than a point: a
/// type holds when the test fires at any grid point inside its bounds. The
/// reported result per type is the one with the largest ratio. Types with no
/// grid point inside their bounds are left out.
pub fn classify_sweep(
    stats: &[DocPairStats],
    source: &dyn PiSource,
    epsilon_grid: &[f64],
    delta_grid: &[f64],
) -> Result<Classification> {
    let mut best: Vec<Option<CsrResult>> = vec![None; 4];
    for &epsilon in epsilon_grid {
        for &delta in delta_grid {
            let Some(t) = CoocType::from_bounds(epsilon, delta) else {
                continue;
            };
            SignificanceParams::new(epsilon, delta, source.x_threshold())?;
            let r = csr_from_stats(stats, epsilon, delta, source)?;
            let slot = &mut best[t as usize];
            let replace = match slot {
                None => true,
                Some(cur) => (r.significant, r.csr) > (cur.significant, cur.csr),
            };
            if replace {
                *slot = Some(r);
            }
        }
    }
    let results: Vec<(CoocType, CsrResult)> = CoocType::ALL
        .iter()
        .zip(best)
        .filter_map(|(&t, r)| r.map(|r| (t, r)))
        .collect();
    let types: Vec<CoocType> = results
        .iter()
        .filter(|(_, r)| r.significant)
        .map(|(t, _)| *t)
        .collect();
    let exclusive = exclusive_types(&types);
    Ok(Classification {
        results,
        types,
        exclusive,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::histogram::PiCalculator;

    fn doc(length: u32, f: u32, f_hat: u32) -> DocPairStats {
        DocPairStats {
            doc: 0,
            length,
            f,
            f_hat,
            spans: vec![],
            constrained_spans: vec![],
        }
    }

    #[test]
    fn worked_document_support() {
        let calc = PiCalculator::exact(20).unwrap();
        let d = doc(400, 4, 3);
        assert!(!document_support(&d, 0.05, &calc).unwrap());
        assert!(document_support(&d, 0.2, &calc).unwrap());
        assert!(!document_support(&doc(400, 4, 0), 0.99, &calc).unwrap());
    }

    #[test]
    fn expectation_examples() {
        let calc = PiCalculator::exact(20).unwrap();
        let single = expected_z(&[doc(400, 4, 0)], 0.2, &calc).unwrap();
        assert_eq!(single, calc.pi(3, 4, 400).unwrap());
        let many = expected_z(&vec![doc(400, 4, 1); 7], 0.2, &calc).unwrap();
        assert!((many - 7.0 * single).abs() < 1e-12);
        let wide = PiCalculator::exact(500).unwrap();
        assert_eq!(expected_z(&[doc(400, 4, 4)], 0.2, &wide).unwrap(), 0.0);
        assert!(matches!(
            expected_z(&[], 0.2, &calc),
            Err(SignificanceError::NoJointDocuments)
        ));
    }

    #[test]
    fn decision_algebra() {
        let r = csr_decision(416, 33, 14.34, 0.01).unwrap();
        assert!(!r.significant && r.csr < 1.0);
        assert!((r.t - 0.0744).abs() < 5e-5);
        assert!((14.34f64 + 416.0 * 0.07 - 43.46).abs() < 1e-9);
        assert!(((-2.0 * 416.0 * r.t * r.t).exp() - 0.01).abs() < 1e-15);

        assert!(!csr_decision(10, 0, 0.0, 0.9).unwrap().significant);
        // With E(Z) = 0 the bar is K t, so Z = K passes exactly when t <= 1.
        assert!(csr_decision(5, 5, 0.0, 0.01).unwrap().significant);
        assert!(!csr_decision(1, 1, 0.0, 0.01).unwrap().significant);
        assert!(matches!(
            csr_decision(0, 0, 0.0, 0.1),
            Err(SignificanceError::NoJointDocuments)
        ));
        assert!(csr_decision(3, 4, 0.0, 0.1).is_err());
        assert!(csr_decision(3, 1, 0.0, 1.0).is_err());
    }

    #[test]
    fn single_short_document_is_not_attainable() {
        let calc = PiCalculator::exact(2).unwrap();
        let r = csr_from_stats(&[doc(2, 1, 1)], 0.1, 0.1, &calc).unwrap();
        assert_eq!((r.z, r.non_informative), (0, 1));
        assert!(!r.significant);
    }

    #[test]
    fn exclusive_assignment() {
        use CoocType::*;
        assert_eq!(exclusive_types(&[A, B, C, D]), [A]);
        assert_eq!(exclusive_types(&[B, D]), [B]);
        assert_eq!(exclusive_types(&[B, C, D]), [B, C]);
        assert_eq!(exclusive_types(&[D]), [D]);
        assert!(exclusive_types(&[]).is_empty());
        assert_eq!(CoocType::from_bounds(0.05, 0.0005), Some(A));
        assert_eq!(CoocType::from_bounds(0.99, 0.9), Some(D));
        assert_eq!(CoocType::from_bounds(0.2, 0.1), None);
    }

    #[test]
    fn sweep_covers_point_settings() {
        let calc = PiCalculator::exact(5).unwrap();
        let mut stats = vec![doc(200, 1, 1); 12];
        stats.extend(vec![doc(200, 1, 0); 38]);
        let point = classify_stats(&stats, &calc, &TypeSettings::default()).unwrap();
        let swept = classify_sweep(&stats, &calc, &[0.05, 0.1, 0.4, 0.99], &[0.0005, 0.1, 0.4, 0.9]).unwrap();
        assert!(point.types.iter().all(|t| swept.types.contains(t)));
        assert_eq!(swept.results.len(), 4);
        let none = classify_sweep(&stats, &calc, &[0.2], &[0.2]).unwrap();
        assert!(none.results.is_empty() && none.exclusive.is_empty());
    }

    #[test]
    fn params_validation() {
        assert!(SignificanceParams::new(0.1, 0.1, 5).is_ok());
        assert!(SignificanceParams::new(0.0, 0.1, 5).is_err());
        assert!(SignificanceParams::new(0.1, 1.0, 5).is_err());
        assert!(SignificanceParams::new(0.1, 0.1, 0).is_err());
    }
}
