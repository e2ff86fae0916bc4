//! Exact combinatorics of the random-permutation null model.
//!
//! `hist_{f,l}[k]` counts the ways to embed `f` non-overlapped occurrences
//! (`i1 < j1 < i2 < j2 < ...`) into `l` positions such that exactly `k` of them
//! have span `j - i` strictly below the threshold `x`. Summing the upper tail
//! gives `N_x(k, f, l)`, and `pi_x(k, f, l) = N_x(k, f, l) / C(l, 2f)`.
//!
//! [`compute_hist`] evaluates the recursion bottom-up over `(f, l)`:
//!
//! ```text
//! hist_{f,l} = hist_{f,l-1}                                   first start > 1
//!            + sum_{j=2..=min(x,l)} shift(hist_{f-1,l-j})      short first span
//!            + sum_{j=x+1..=l}      hist_{f-1,l-j}             long first span
//! ```
//!
//! Both inner sums run over a contiguous range of `l - j`, so prefix sums over
//! the previous level make every cell `O(f)`. [`reference_hist`] is the
//! direct double-loop enumeration, kept as the oracle.

use std::io::{self, BufRead, BufReader, Read, Write};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_MAX_F: u32 = 64;
pub const DEFAULT_MAX_ELL: u32 = 1500;
/// Span thresholds precomputed by default.
pub const DEFAULT_SPAN_GRID: [u32; 5] = [5, 10, 20, 25, 50];

pub const REFERENCE_MAX_F: u32 = 3;
pub const REFERENCE_MAX_ELL: u32 = 12;

const TABLE_MAGIC: &str = "COSIG-PITABLE";
const TABLE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum HistogramError {
    #[error("capacity exceeded: f={f}, l={ell} beyond limits f<={max_f}, l<={max_ell}")]
    Capacity {
        f: u32,
        ell: u32,
        max_f: u32,
        max_ell: u32,
    },
    #[error("pi undefined: no way to embed f={f} occurrences in l={ell} positions")]
    UndefinedProbability { f: u32, ell: u32 },
    #[error("table miss: (f={f}, l={ell}) outside table for x={x_threshold} (f<={max_f}, l<={max_ell})")]
    TableMiss {
        x_threshold: u32,
        f: u32,
        ell: u32,
        max_f: u32,
        max_ell: u32,
    },
    #[error("no pi table for x={x_threshold} at {path}; run `cosig tables --span {x_threshold} --out {path}` first")]
    MissingTable { x_threshold: u32, path: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("table file error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, HistogramError>;

/// Largest `(f, l)` the engine will compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CapacityLimits {
    pub max_f: u32,
    pub max_ell: u32,
}

impl Default for CapacityLimits {
    fn default() -> Self {
        CapacityLimits {
            max_f: DEFAULT_MAX_F,
            max_ell: DEFAULT_MAX_ELL,
        }
    }
}

impl CapacityLimits {
    fn check(&self, f: u32, ell: u32) -> Result<()> {
        if f > self.max_f || ell > self.max_ell {
            return Err(HistogramError::Capacity {
                f,
                ell,
                max_f: self.max_f,
                max_ell: self.max_ell,
            });
        }
        Ok(())
    }
}

/// How cell counts are carried through the recursion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    /// Arbitrary-precision integers, converted to `f64` once per cell.
    Exact,
    /// `f64` counts. Every cell is checked against `C(l, 2f)` and the worst
    /// relative deviation is reported.
    Float,
}

impl Precision {
    pub fn as_str(&self) -> &'static str {
        match self {
            Precision::Exact => "exact",
            Precision::Float => "float",
        }
    }
}

impl std::str::FromStr for Precision {
    type Err = HistogramError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Precision::Exact),
            "float" => Ok(Precision::Float),
            other => Err(HistogramError::InvalidArgument(format!(
                "unknown precision {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpanHistogram {
    pub f: u32,
    pub ell: u32,
    pub x_threshold: u32,
    /// Indexed by the number of short occurrences, `0..=f`.
    pub counts: Vec<BigUint>,
}

impl SpanHistogram {
    /// `N(f, l)`, which equals `C(l, 2f)`.
    pub fn total(&self) -> BigUint {
        self.counts.iter().sum()
    }

    /// `N_x(f_hat, f, l)`.
    pub fn at_least(&self, f_hat: u32) -> BigUint {
        self.counts.iter().skip(f_hat as usize).sum()
    }

    pub fn pi(&self, f_hat: u32) -> Result<f64> {
        if f_hat > self.f {
            return Err(HistogramError::InvalidArgument(format!(
                "f_hat={f_hat} exceeds f={}",
                self.f
            )));
        }
        let total = self.total();
        if total.is_zero() {
            return Err(HistogramError::UndefinedProbability {
                f: self.f,
                ell: self.ell,
            });
        }
        Ok(ratio_to_f64(&self.at_least(f_hat), &total))
    }

    /// Upper-tail probabilities `pi(k)` for `k = 0..=f`.
    pub fn tail_probabilities(&self) -> Result<Vec<f64>> {
        let total = self.total();
        if total.is_zero() {
            return Err(HistogramError::UndefinedProbability {
                f: self.f,
                ell: self.ell,
            });
        }
        Ok(exact_tails(&self.counts, &total))
    }
}

fn check_threshold(x_threshold: u32) -> Result<()> {
    if x_threshold == 0 {
        return Err(HistogramError::InvalidArgument(
            "span threshold must be at least 1".into(),
        ));
    }
    Ok(())
}

/// `num / den` rounded to `f64`, for operands of any size.
pub fn ratio_to_f64(num: &BigUint, den: &BigUint) -> f64 {
    assert!(!den.is_zero(), "zero denominator");
    if num.is_zero() {
        return 0.0;
    }
    // Scale so the integer quotient carries 64+ significant bits.
    let shift = den.bits() as i64 - num.bits() as i64 + 64;
    let q = if shift >= 0 {
        (num << shift as u64) / den
    } else {
        (num >> (-shift) as u64) / den
    };
    let mantissa = q.to_f64().unwrap_or(f64::INFINITY);
    scale_by_pow2(mantissa, -shift)
}

fn scale_by_pow2(mut v: f64, mut exp: i64) -> f64 {
    // powi alone underflows for exponents past -1022 even when the product
    // is still representable.
    while exp < -1000 {
        v *= 2f64.powi(-1000);
        exp += 1000;
    }
    while exp > 1000 {
        v *= 2f64.powi(1000);
        exp -= 1000;
    }
    v * 2f64.powi(exp as i32)
}

fn exact_tails(counts: &[BigUint], total: &BigUint) -> Vec<f64> {
    let mut tails = vec![0.0; counts.len()];
    let mut acc = BigUint::zero();
    for k in (0..counts.len()).rev() {
        acc += &counts[k];
        tails[k] = ratio_to_f64(&acc, total);
    }
    tails
}

/// Bottom-up evaluation of all levels `0..=max_f` for lengths `0..=max_ell`.
/// `sink` receives each level `f` as `hist_{f,l}` for every `l`.
fn exact_levels<F>(max_f: u32, max_ell: u32, x_threshold: u32, mut sink: F)
where
    F: FnMut(u32, &[Vec<BigUint>]),
{
    let ells = max_ell as usize + 1;
    let x = x_threshold as usize;
    let mut level: Vec<Vec<BigUint>> = vec![vec![BigUint::from(1u32)]; ells];
    sink(0, &level);
    for f in 1..=max_f as usize {
        // prefix[m][k] = sum over m' <= m of previous-level hist_{f-1,m'}[k]
        let mut prefix: Vec<Vec<BigUint>> = Vec::with_capacity(ells);
        for cur in &level {
            let row = match prefix.last() {
                Some(last) => cur.iter().zip(last).map(|(a, b)| a + b).collect(),
                None => cur.clone(),
            };
            prefix.push(row);
        }
        let mut next: Vec<Vec<BigUint>> = Vec::with_capacity(ells);
        for ell in 0..ells {
            if 2 * f > ell {
                next.push(vec![BigUint::zero(); f + 1]);
                continue;
            }
            let mut cell = next[ell - 1].clone();
            let near_max = x.min(ell);
            if near_max >= 2 {
                let (lo, hi) = (ell - near_max, ell - 2);
                for k in 0..f {
                    let mut s = prefix[hi][k].clone();
                    if lo > 0 {
                        s -= &prefix[lo - 1][k];
                    }
                    cell[k + 1] += s;
                }
            }
            if ell > x {
                let hi = ell - x - 1;
                for k in 0..f {
                    cell[k] += &prefix[hi][k];
                }
            }
            next.push(cell);
        }
        level = next;
        sink(f as u32, &level);
    }
}

/// Same recursion in `f64`. Returns the worst relative deviation of a
/// cell total from `C(l, 2f)`.
fn float_levels<F>(max_f: u32, max_ell: u32, x_threshold: u32, mut sink: F) -> f64
where
    F: FnMut(u32, &[Vec<f64>]),
{
    let ells = max_ell as usize + 1;
    let x = x_threshold as usize;
    let ln_fact = ln_factorials(ells);
    let mut worst = 0.0f64;
    let mut level: Vec<Vec<f64>> = vec![vec![1.0]; ells];
    sink(0, &level);
    for f in 1..=max_f as usize {
        let mut prefix: Vec<Vec<f64>> = Vec::with_capacity(ells);
        for cur in &level {
            let row = match prefix.last() {
                Some(last) => cur.iter().zip(last).map(|(a, b)| a + b).collect(),
                None => cur.clone(),
            };
            prefix.push(row);
        }
        let mut next: Vec<Vec<f64>> = Vec::with_capacity(ells);
        for ell in 0..ells {
            if 2 * f > ell {
                next.push(vec![0.0; f + 1]);
                continue;
            }
            let mut cell = next[ell - 1].clone();
            let near_max = x.min(ell);
            if near_max >= 2 {
                let (lo, hi) = (ell - near_max, ell - 2);
                for k in 0..f {
                    // Short windows are summed directly to avoid cancellation.
                    let s = if hi - lo < 256 {
                        (lo..=hi).map(|m| level[m][k]).sum()
                    } else if lo > 0 {
                        prefix[hi][k] - prefix[lo - 1][k]
                    } else {
                        prefix[hi][k]
                    };
                    cell[k + 1] += s;
                }
            }
            if ell > x {
                let hi = ell - x - 1;
                for k in 0..f {
                    cell[k] += prefix[hi][k];
                }
            }
            let total: f64 = cell.iter().sum();
            let expected = (ln_fact[ell] - ln_fact[2 * f] - ln_fact[ell - 2 * f]).exp();
            worst = worst.max(((total - expected) / expected).abs());
            next.push(cell);
        }
        level = next;
        sink(f as u32, &level);
    }
    worst
}

fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 0.0f64;
    out.push(0.0);
    for i in 1..=n {
        acc += (i as f64).ln();
        out.push(acc);
    }
    out
}

/// Exact `hist_{f,l}` for threshold `x`.
pub fn compute_hist(
    f: u32,
    ell: u32,
    x_threshold: u32,
    limits: CapacityLimits,
) -> Result<SpanHistogram> {
    check_threshold(x_threshold)?;
    limits.check(f, ell)?;
    let mut counts = Vec::new();
    exact_levels(f, ell, x_threshold, |level, cells| {
        if level == f {
            counts = cells[ell as usize].clone();
        }
    });
    Ok(SpanHistogram {
        f,
        ell,
        x_threshold,
        counts,
    })
}

/// Direct enumeration: choose the first occurrence `(i, j)` and recurse on
/// the `l - j` positions after it. Exponential; for cross-checking only.
pub fn reference_hist(f: u32, ell: u32, x_threshold: u32) -> Result<SpanHistogram> {
    check_threshold(x_threshold)?;
    if f > REFERENCE_MAX_F || ell > REFERENCE_MAX_ELL {
        return Err(HistogramError::Capacity {
            f,
            ell,
            max_f: REFERENCE_MAX_F,
            max_ell: REFERENCE_MAX_ELL,
        });
    }
    let counts = reference_recurse(f, ell, x_threshold)
        .into_iter()
        .map(BigUint::from)
        .collect();
    Ok(SpanHistogram {
        f,
        ell,
        x_threshold,
        counts,
    })
}

fn reference_recurse(f: u32, ell: u32, x: u32) -> Vec<u64> {
    let mut hist = vec![0u64; f as usize + 1];
    if f > ell {
        return hist;
    }
    if f == 0 {
        hist[0] = 1;
        return hist;
    }
    for i in 1..ell {
        for j in (i + 1)..=ell {
            let sub = reference_recurse(f - 1, ell - j, x);
            for k in 0..f as usize {
                if j - i < x {
                    hist[k + 1] += sub[k];
                } else {
                    hist[k] += sub[k];
                }
            }
        }
    }
    hist
}

/// `pi_x(f_hat, f, l)` from a fresh exact computation.
pub fn pi(f_hat: u32, f: u32, ell: u32, x_threshold: u32) -> Result<f64> {
    if f_hat > f {
        return Err(HistogramError::InvalidArgument(format!(
            "f_hat={f_hat} exceeds f={f}"
        )));
    }
    compute_hist(f, ell, x_threshold, CapacityLimits::default())?.pi(f_hat)
}

/// Smallest span-constrained frequency reaching `pi < epsilon`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GEpsilon {
    At(u32),
    /// Even `f_hat = f` leaves `pi >= epsilon`; such a document can never
    /// support the hypothesis.
    NotAttainable,
}

pub fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(HistogramError::InvalidArgument(format!(
            "epsilon must lie in (0, 1), got {epsilon}"
        )));
    }
    Ok(())
}

/// `g_eps` over a precomputed tail vector (non-increasing in the index).
pub fn g_epsilon_from_tails(tails: &[f64], epsilon: f64) -> GEpsilon {
    tails
        .iter()
        .position(|&p| p < epsilon)
        .map_or(GEpsilon::NotAttainable, |k| GEpsilon::At(k as u32))
}

pub fn g_epsilon(f: u32, ell: u32, x_threshold: u32, epsilon: f64) -> Result<GEpsilon> {
    check_epsilon(epsilon)?;
    let hist = compute_hist(f, ell, x_threshold, CapacityLimits::default())?;
    Ok(g_epsilon_from_tails(&hist.tail_probabilities()?, epsilon))
}

/// Anything that can answer `pi_x` queries for one span threshold.
pub trait PiSource: Send + Sync {
    fn x_threshold(&self) -> u32;

    /// `pi_x(k, f, l)` for every `k = 0..=f`.
    fn tails(&self, f: u32, ell: u32) -> Result<Vec<f64>>;

    fn pi(&self, f_hat: u32, f: u32, ell: u32) -> Result<f64> {
        if f_hat > f {
            return Err(HistogramError::InvalidArgument(format!(
                "f_hat={f_hat} exceeds f={f}"
            )));
        }
        Ok(self.tails(f, ell)?[f_hat as usize])
    }

    fn g_epsilon(&self, f: u32, ell: u32, epsilon: f64) -> Result<GEpsilon> {
        check_epsilon(epsilon)?;
        Ok(g_epsilon_from_tails(&self.tails(f, ell)?, epsilon))
    }
}

/// Dense grid of tail probabilities for `f <= max_f`, `2f <= l <= max_ell`.
#[derive(Debug, Clone, PartialEq)]
struct TailGrid {
    max_f: u32,
    max_ell: u32,
    /// `cells[f][l]`, empty when `2f > l`.
    cells: Vec<Vec<Vec<f64>>>,
    float_error: f64,
}

impl TailGrid {
    fn build(max_f: u32, max_ell: u32, x_threshold: u32, precision: Precision) -> Self {
        let mut cells = Vec::with_capacity(max_f as usize + 1);
        let float_error = match precision {
            Precision::Exact => {
                exact_levels(max_f, max_ell, x_threshold, |f, level| {
                    let row = level
                        .iter()
                        .enumerate()
                        .map(|(ell, counts)| {
                            if 2 * f as usize > ell {
                                Vec::new()
                            } else {
                                exact_tails(counts, &counts.iter().sum())
                            }
                        })
                        .collect();
                    cells.push(row);
                });
                0.0
            }
            Precision::Float => float_levels(max_f, max_ell, x_threshold, |f, level| {
                let row = level
                    .iter()
                    .enumerate()
                    .map(|(ell, counts)| {
                        if 2 * f as usize > ell {
                            return Vec::new();
                        }
                        let total: f64 = counts.iter().sum();
                        let mut acc = 0.0;
                        let mut tails = vec![0.0; counts.len()];
                        for k in (0..counts.len()).rev() {
                            acc += counts[k];
                            tails[k] = (acc / total).min(1.0);
                        }
                        tails[0] = 1.0;
                        tails
                    })
                    .collect();
                cells.push(row);
            }),
        };
        TailGrid {
            max_f,
            max_ell,
            cells,
            float_error,
        }
    }

    fn covers(&self, f: u32, ell: u32) -> bool {
        f <= self.max_f && ell <= self.max_ell
    }

    fn get(&self, f: u32, ell: u32) -> Result<Vec<f64>> {
        let cell = &self.cells[f as usize][ell as usize];
        if cell.is_empty() {
            return Err(HistogramError::UndefinedProbability { f, ell });
        }
        Ok(cell.clone())
    }
}

/// Lazily computed, memoized `pi_x` for one threshold. Reads are concurrent;
/// a miss takes the write lock and regrows the grid. Values do not depend on
/// the order of queries.
#[derive(Debug)]
pub struct PiCalculator {
    x_threshold: u32,
    limits: CapacityLimits,
    precision: Precision,
    grid: RwLock<Option<TailGrid>>,
}

impl PiCalculator {
    pub fn new(x_threshold: u32, limits: CapacityLimits, precision: Precision) -> Result<Self> {
        check_threshold(x_threshold)?;
        if precision == Precision::Float {
            check_float_range(limits)?;
        }
        Ok(PiCalculator {
            x_threshold,
            limits,
            precision,
            grid: RwLock::new(None),
        })
    }

    pub fn exact(x_threshold: u32) -> Result<Self> {
        Self::new(x_threshold, CapacityLimits::default(), Precision::Exact)
    }

    /// Compute everything up to `(max_f, max_ell)` now.
    pub fn warm(&self, max_f: u32, max_ell: u32) -> Result<()> {
        self.tails(max_f, max_ell.max(2 * max_f)).map(|_| ())
    }

    /// Worst relative cell-total deviation seen in float mode (0 for exact).
    pub fn float_error(&self) -> f64 {
        self.grid
            .read()
            .expect("pi grid lock poisoned")
            .as_ref()
            .map_or(0.0, |g| g.float_error)
    }
}

fn check_float_range(limits: CapacityLimits) -> Result<()> {
    // Counts reach C(max_ell, 2 max_f); keep well inside f64 range.
    let two_f = (2 * limits.max_f).min(limits.max_ell) as usize;
    let ln = ln_factorials(limits.max_ell as usize);
    let ell = limits.max_ell as usize;
    let ln_max = (0..=two_f)
        .map(|k| ln[ell] - ln[k] - ln[ell - k])
        .fold(0.0, f64::max);
    if ln_max > 650.0 {
        return Err(HistogramError::InvalidArgument(format!(
            "float precision cannot represent counts for f<={}, l<={}; use exact",
            limits.max_f, limits.max_ell
        )));
    }
    Ok(())
}

impl PiSource for PiCalculator {
    fn x_threshold(&self) -> u32 {
        self.x_threshold
    }

    fn tails(&self, f: u32, ell: u32) -> Result<Vec<f64>> {
        self.limits.check(f, ell)?;
        if 2 * f > ell {
            return Err(HistogramError::UndefinedProbability { f, ell });
        }
        {
            let guard = self.grid.read().expect("pi grid lock poisoned");
            if let Some(grid) = guard.as_ref().filter(|g| g.covers(f, ell)) {
                return grid.get(f, ell);
            }
        }
        let mut guard = self.grid.write().expect("pi grid lock poisoned");
        if let Some(grid) = guard.as_ref().filter(|g| g.covers(f, ell)) {
            return grid.get(f, ell);
        }
        let (cur_f, cur_ell) = guard.as_ref().map_or((0, 0), |g| (g.max_f, g.max_ell));
        // Grow generously so a stream of slightly larger queries does not
        // trigger a rebuild each time.
        let want_f = cur_f.max(f).max(8).min(self.limits.max_f).max(f);
        let want_ell = cur_ell
            .max(ell.div_ceil(100) * 100)
            .min(self.limits.max_ell)
            .max(ell);
        let grid = TailGrid::build(want_f, want_ell, self.x_threshold, self.precision);
        let out = grid.get(f, ell);
        *guard = Some(grid);
        out
    }
}

/// A published, immutable table of `pi_x` values.
#[derive(Debug, Clone, PartialEq)]
pub struct PiTable {
    x_threshold: u32,
    precision: Precision,
    grid: TailGrid,
}

impl PiTable {
    /// Compute every cell with `f <= max_f` and `2f <= l <= max_ell`.
    pub fn publish(
        x_threshold: u32,
        max_f: u32,
        max_ell: u32,
        precision: Precision,
        limits: CapacityLimits,
    ) -> Result<Self> {
        check_threshold(x_threshold)?;
        limits.check(max_f, max_ell)?;
        if precision == Precision::Float {
            check_float_range(CapacityLimits { max_f, max_ell })?;
        }
        Ok(PiTable {
            x_threshold,
            precision,
            grid: TailGrid::build(max_f, max_ell, x_threshold, precision),
        })
    }

    pub fn max_f(&self) -> u32 {
        self.grid.max_f
    }

    pub fn max_ell(&self) -> u32 {
        self.grid.max_ell
    }

    pub fn precision(&self) -> Precision {
        self.precision
    }

    pub fn float_error(&self) -> f64 {
        self.grid.float_error
    }

    /// Conventional file name for a threshold inside a table directory.
    pub fn file_name(x_threshold: u32) -> String {
        format!("pi_x{x_threshold}.tbl")
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let cells: usize = self.grid.cells.iter().flatten().filter(|c| !c.is_empty()).count();
        writeln!(w, "{TABLE_MAGIC}")?;
        writeln!(w, "version {TABLE_VERSION}")?;
        writeln!(w, "x_threshold {}", self.x_threshold)?;
        writeln!(w, "max_f {}", self.grid.max_f)?;
        writeln!(w, "max_ell {}", self.grid.max_ell)?;
        writeln!(w, "precision {}", self.precision.as_str())?;
        writeln!(w, "float_error {:e}", self.grid.float_error)?;
        writeln!(w, "cells {cells}")?;
        writeln!(w)?;
        for row in &self.grid.cells {
            for cell in row.iter().filter(|c| !c.is_empty()) {
                for p in cell {
                    w.write_f64::<LittleEndian>(*p)?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let mut r = BufReader::new(r);
        let header = read_header(&mut r)?;
        if header.first().map(String::as_str) != Some(TABLE_MAGIC) {
            return Err(HistogramError::Format("missing table magic".into()));
        }
        let field = |key: &str| -> Result<&str> {
            header
                .iter()
                .find_map(|l| l.strip_prefix(key).and_then(|v| v.strip_prefix(' ')))
                .ok_or_else(|| HistogramError::Format(format!("header lacks {key}")))
        };
        let num = |key: &str| -> Result<u32> {
            field(key)?
                .parse()
                .map_err(|_| HistogramError::Format(format!("bad {key}")))
        };
        let version = num("version")?;
        if version != TABLE_VERSION {
            return Err(HistogramError::Format(format!(
                "unsupported table version {version}"
            )));
        }
        let x_threshold = num("x_threshold")?;
        let max_f = num("max_f")?;
        let max_ell = num("max_ell")?;
        let precision: Precision = field("precision")?.parse()?;
        let float_error: f64 = field("float_error")?
            .parse()
            .map_err(|_| HistogramError::Format("bad float_error".into()))?;
        let mut cells = Vec::with_capacity(max_f as usize + 1);
        for f in 0..=max_f as usize {
            let mut row = Vec::with_capacity(max_ell as usize + 1);
            for ell in 0..=max_ell as usize {
                if 2 * f > ell {
                    row.push(Vec::new());
                    continue;
                }
                let mut cell = Vec::with_capacity(f + 1);
                for _ in 0..=f {
                    cell.push(r.read_f64::<LittleEndian>().map_err(|e| {
                        HistogramError::Format(format!("truncated table body: {e}"))
                    })?);
                }
                row.push(cell);
            }
            cells.push(row);
        }
        Ok(PiTable {
            x_threshold,
            precision,
            grid: TailGrid {
                max_f,
                max_ell,
                cells,
                float_error,
            },
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_to(io::BufWriter::new(file))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(std::fs::File::open(path)?)
    }

    /// Human-readable export: `f_hat  f  l  pi` per line.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "f_hat\tf\tl\tpi")?;
        for (f, row) in self.grid.cells.iter().enumerate() {
            for (ell, cell) in row.iter().enumerate() {
                for (k, p) in cell.iter().enumerate() {
                    writeln!(w, "{k}\t{f}\t{ell}\t{p:e}")?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

impl PiSource for PiTable {
    fn x_threshold(&self) -> u32 {
        self.x_threshold
    }

    fn tails(&self, f: u32, ell: u32) -> Result<Vec<f64>> {
        if !self.grid.covers(f, ell) {
            return Err(HistogramError::TableMiss {
                x_threshold: self.x_threshold,
                f,
                ell,
                max_f: self.grid.max_f,
                max_ell: self.grid.max_ell,
            });
        }
        self.grid.get(f, ell)
    }
}

/// Hands out a [`PiSource`] per span threshold.
pub trait PiProvider: Send + Sync {
    fn source(&self, x_threshold: u32) -> Result<Arc<dyn PiSource>>;
}

/// Computes tables in memory on first use, one [`PiCalculator`] per span.
#[derive(Debug)]
pub struct ComputedTables {
    limits: CapacityLimits,
    precision: Precision,
    calculators: Mutex<BTreeMap<u32, Arc<PiCalculator>>>,
}

impl ComputedTables {
    pub fn new(limits: CapacityLimits, precision: Precision) -> Self {
        ComputedTables {
            limits,
            precision,
            calculators: Mutex::new(BTreeMap::new()),
        }
    }
}

impl Default for ComputedTables {
    fn default() -> Self {
        Self::new(CapacityLimits::default(), Precision::Exact)
    }
}

impl PiProvider for ComputedTables {
    fn source(&self, x_threshold: u32) -> Result<Arc<dyn PiSource>> {
        let mut map = self.calculators.lock().expect("calculator map poisoned");
        if let Some(c) = map.get(&x_threshold) {
            return Ok(c.clone());
        }
        let calc = Arc::new(PiCalculator::new(x_threshold, self.limits, self.precision)?);
        map.insert(x_threshold, calc.clone());
        Ok(calc)
    }
}

/// Published tables in a directory, named by [`PiTable::file_name`].
#[derive(Debug)]
pub struct TableDirectory {
    dir: PathBuf,
    loaded: Mutex<BTreeMap<u32, Arc<PiTable>>>,
}

impl TableDirectory {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        TableDirectory {
            dir: dir.into(),
            loaded: Mutex::new(BTreeMap::new()),
        }
    }

    pub fn path_for(&self, x_threshold: u32) -> PathBuf {
        self.dir.join(PiTable::file_name(x_threshold))
    }
}

impl PiProvider for TableDirectory {
    fn source(&self, x_threshold: u32) -> Result<Arc<dyn PiSource>> {
        let mut map = self.loaded.lock().expect("table map poisoned");
        if let Some(t) = map.get(&x_threshold) {
            return Ok(t.clone());
        }
        let path = self.path_for(x_threshold);
        if !path.is_file() {
            return Err(HistogramError::MissingTable {
                x_threshold,
                path: path.display().to_string(),
            });
        }
        let table = PiTable::load(&path)?;
        if table.x_threshold() != x_threshold {
            return Err(HistogramError::Format(format!(
                "{} holds x={}, expected x={x_threshold}",
                path.display(),
                table.x_threshold()
            )));
        }
        let table = Arc::new(table);
        map.insert(x_threshold, table.clone());
        Ok(table)
    }
}

fn read_header<R: BufRead>(r: &mut R) -> Result<Vec<String>> {
    crate::corpus::read_header(r).map_err(|e| HistogramError::Format(e.to_string()))
}

/// Exact binomial coefficient.
pub fn binomial(n: u32, k: u32) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::from(1u32);
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts(h: &SpanHistogram) -> Vec<u64> {
        h.counts.iter().map(|c| c.to_u64().unwrap()).collect()
    }

    #[test]
    fn tiny_histograms() {
        let lim = CapacityLimits::default();
        // (1,2),(2,3) have span 1 < 2; (1,3) has span 2.
        assert_eq!(counts(&compute_hist(1, 3, 2, lim).unwrap()), [1, 2]);
        assert_eq!(counts(&compute_hist(2, 3, 7, lim).unwrap()), [0, 0, 0]);
        assert_eq!(counts(&compute_hist(0, 9, 3, lim).unwrap()), [1]);
        assert_eq!(counts(&reference_hist(1, 2, 2).unwrap()), [0, 1]);
        assert_eq!(counts(&reference_hist(1, 2, 1).unwrap()), [1, 0]);
    }

    #[test]
    fn small_pi_values() {
        assert!((pi(1, 1, 3, 2).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(pi(0, 3, 40, 5).unwrap(), 1.0);
        assert!(matches!(
            pi(1, 2, 3, 2),
            Err(HistogramError::UndefinedProbability { .. })
        ));
    }

    #[test]
    fn capacity_and_argument_errors() {
        let lim = CapacityLimits {
            max_f: 4,
            max_ell: 100,
        };
        assert!(matches!(
            compute_hist(5, 50, 5, lim),
            Err(HistogramError::Capacity { .. })
        ));
        assert!(matches!(
            compute_hist(2, 101, 5, lim),
            Err(HistogramError::Capacity { .. })
        ));
        assert!(matches!(
            reference_hist(4, 10, 3),
            Err(HistogramError::Capacity { .. })
        ));
        assert!(compute_hist(1, 5, 0, lim).is_err());
        assert!(g_epsilon(2, 40, 5, 1.0).is_err());
        assert!(g_epsilon(2, 40, 5, 0.0).is_err());
    }

    #[test]
    fn mass_placement_at_extreme_thresholds() {
        let lim = CapacityLimits::default();
        let h = compute_hist(3, 20, 20, lim).unwrap();
        assert!(h.counts[..3].iter().all(Zero::is_zero));
        assert_eq!(h.counts[3], binomial(20, 6));
        let h = compute_hist(3, 20, 1, lim).unwrap();
        assert_eq!(h.counts[0], binomial(20, 6));
        assert_eq!(
            g_epsilon(3, 20, 20, 0.5).unwrap(),
            GEpsilon::NotAttainable
        );
    }

    #[test]
    fn ratio_handles_huge_operands() {
        let a = binomial(1500, 700);
        let b = &a * 3u32;
        assert!((ratio_to_f64(&a, &b) - 1.0 / 3.0).abs() < 1e-15);
        assert!(ratio_to_f64(&BigUint::from(1u32), &a) > 0.0 || a.bits() > 1074);
        assert_eq!(ratio_to_f64(&BigUint::zero(), &a), 0.0);
    }

    #[test]
    fn calculator_matches_direct_computation() {
        let calc = PiCalculator::exact(5).unwrap();
        for (f, ell) in [(1, 10), (3, 40), (2, 7), (4, 120)] {
            let direct = compute_hist(f, ell, 5, CapacityLimits::default())
                .unwrap()
                .tail_probabilities()
                .unwrap();
            assert_eq!(calc.tails(f, ell).unwrap(), direct);
        }
    }

    #[test]
    fn float_mode_tracks_exact() {
        let limits = CapacityLimits {
            max_f: 12,
            max_ell: 300,
        };
        let float = PiCalculator::new(10, limits, Precision::Float).unwrap();
        let exact = PiCalculator::new(10, limits, Precision::Exact).unwrap();
        for (f, ell) in [(1, 30), (5, 200), (12, 300)] {
            let a = float.tails(f, ell).unwrap();
            let b = exact.tails(f, ell).unwrap();
            for (p, q) in a.iter().zip(&b) {
                assert!((p - q).abs() <= 1e-9 * q.max(1e-300) + 1e-300, "{p} vs {q}");
            }
        }
        assert!(float.float_error() < 1e-10);
        assert!(PiCalculator::new(10, CapacityLimits { max_f: 700, max_ell: 1500 }, Precision::Float).is_err());
    }

    #[test]
    fn table_miss_is_explicit() {
        let table = PiTable::publish(5, 2, 30, Precision::Exact, CapacityLimits::default()).unwrap();
        assert!(matches!(
            table.tails(3, 20),
            Err(HistogramError::TableMiss { .. })
        ));
        assert!(matches!(
            table.tails(1, 31),
            Err(HistogramError::TableMiss { .. })
        ));
        assert!(table.tails(2, 30).is_ok());
    }

    #[test]
    fn table_round_trip_is_bit_exact() {
        let table = PiTable::publish(4, 3, 50, Precision::Exact, CapacityLimits::default()).unwrap();
        let mut buf = Vec::new();
        table.write_to(&mut buf).unwrap();
        let back = PiTable::read_from(&buf[..]).unwrap();
        assert_eq!(back, table);
        let mut again = Vec::new();
        back.write_to(&mut again).unwrap();
        assert_eq!(buf, again);
        assert!(PiTable::read_from(&buf[..buf.len() - 8]).is_err());

        let mut tsv = Vec::new();
        table.write_tsv(&mut tsv).unwrap();
        let tsv = String::from_utf8(tsv).unwrap();
        assert!(tsv.starts_with("f_hat\tf\tl\tpi\n0\t0\t0\t1e0\n"));
    }
}
