//! Sub-quality range decomposition of the VMAF axis.
//!
//! Ranges are half-open `(lo, hi]`, contiguous and sorted. A pair belongs to
//! every range that contains the VMAF of either of its stimuli, so it lands
//! in one or two ranges.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use crate::corpus::Corpus;
use crate::significance::{PairKey, RatedPair};
use crate::{Error, Result};

/// Offset below the smallest VMAF for the open lower bound of a balanced split.
pub const LOWER_EPSILON: f64 = 1e-9;
pub const VMAF_MAX: f64 = 100.0;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SubQualityRange {
    /// Exclusive.
    pub lo: f64,
    /// Inclusive.
    pub hi: f64,
    pub pair_refs: Vec<PairKey>,
}

/// Renders `(lo,hi]` with the shortest exact representation of each bound.
pub fn range_label(lo: f64, hi: f64) -> String {
    let mut s = String::new();
    let _ = write!(s, "({lo},{hi}]");
    s
}

impl SubQualityRange {
    pub fn new(lo: f64, hi: f64) -> Self {
        SubQualityRange { lo, hi, pair_refs: Vec::new() }
    }

    /// Identifier used in every artifact, e.g. `(79,86]`.
    pub fn id(&self) -> String {
        range_label(self.lo, self.hi)
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo < v && v <= self.hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Strategy {
    Balanced,
    FixedWidth,
    Explicit,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Balanced => "balanced",
            Strategy::FixedWidth => "fixed_width",
            Strategy::Explicit => "explicit",
        }
    }
}

/// What a balanced split equalises across bins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum BalanceBy {
    /// Number of stimuli per bin.
    #[default]
    Stimuli,
    /// Number of pair endpoints per bin; a stimulus of a content with N
    /// stimuli weighs N − 1.
    Pairs,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Decomposition {
    pub ranges: Vec<SubQualityRange>,
    pub strategy: Strategy,
}

impl Decomposition {
    fn from_bounds(bounds: &[f64], strategy: Strategy) -> Self {
        let ranges = bounds.windows(2).map(|w| SubQualityRange::new(w[0], w[1])).collect();
        Decomposition { ranges, strategy }
    }

    /// `[lo_0, hi_0, hi_1, ...]`
    pub fn bounds(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self.ranges.first().map(|r| r.lo).into_iter().collect();
        b.extend(self.ranges.iter().map(|r| r.hi));
        b
    }

    /// Index of the range containing `v`.
    pub fn find(&self, v: f64) -> Option<usize> {
        let idx = self.ranges.partition_point(|r| r.hi < v);
        self.ranges.get(idx).filter(|r| r.contains(v)).map(|_| idx)
    }

    /// Index of the range containing `v`, or of the nearest range with
    /// `true` when `v` lies outside the coverage.
    pub fn find_nearest(&self, v: f64) -> Option<(usize, bool)> {
        if self.ranges.is_empty() {
            return None;
        }
        if let Some(i) = self.find(v) {
            return Some((i, false));
        }
        if v <= self.ranges[0].lo || v.is_nan() {
            Some((0, true))
        } else {
            Some((self.ranges.len() - 1, true))
        }
    }

    pub fn range_by_id(&self, id: &str) -> Option<&SubQualityRange> {
        self.ranges.iter().find(|r| r.id() == id)
    }

    /// Ids of ranges holding no stimulus of the corpus. A fixed-width split
    /// on few videos produces these, leaving holes in the distribution.
    pub fn empty_ranges(&self, corpus: &Corpus) -> Vec<String> {
        let mut counts = alloc::vec![0usize; self.ranges.len()];
        for s in corpus.stimuli() {
            if let Some(i) = self.find(s.vmaf) {
                counts[i] += 1;
            }
        }
        self.ranges.iter().zip(counts).filter(|(_, n)| *n == 0).map(|(r, _)| r.id()).collect()
    }

    /// Stimulus count per range.
    pub fn stimulus_counts(&self, corpus: &Corpus) -> Vec<usize> {
        let mut counts = alloc::vec![0usize; self.ranges.len()];
        for s in corpus.stimuli() {
            if let Some(i) = self.find(s.vmaf) {
                counts[i] += 1;
            }
        }
        counts
    }
}

fn validate_bounds(bounds: &[f64]) -> Result<()> {
    if bounds.len() < 2 {
        return Err(Error::InvalidParameter("at least two bounds are required".into()));
    }
    if bounds.iter().any(|b| !b.is_finite()) {
        return Err(Error::InvalidParameter("bounds must be finite".into()));
    }
    if bounds.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(format!("bounds must be strictly increasing: {bounds:?}")));
    }
    Ok(())
}

/// Ranges from user-supplied bounds, e.g. `[30, 79, 86, 90, 95, 100]`.
pub fn decompose_explicit(bounds: &[f64]) -> Result<Decomposition> {
    validate_bounds(bounds)?;
    Ok(Decomposition::from_bounds(bounds, Strategy::Explicit))
}

/// Equal-width bins over (0, 100]; the last bin is truncated at 100.
pub fn decompose_fixed(width: f64) -> Result<Decomposition> {
    if !(width.is_finite() && width > 0.0) {
        return Err(Error::InvalidParameter(format!("bin width must be positive, got {width}")));
    }
    let n = libm::ceil(VMAF_MAX / width - 1e-9).max(1.0) as usize;
    let mut bounds: Vec<f64> = (0..n).map(|i| i as f64 * width).collect();
    bounds.push(VMAF_MAX);
    Ok(Decomposition::from_bounds(&bounds, Strategy::FixedWidth))
}

/// Quantile split into `k` bins holding the same amount of stimuli (or pair
/// endpoints), up to one unit. Equal values always share a bin, the lower one.
pub fn decompose_balanced(corpus: &Corpus, k: usize, by: BalanceBy) -> Result<Decomposition> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("k must be at least 2, got {k}")));
    }
    let mut weighted: Vec<(f64, f64)> = match by {
        BalanceBy::Stimuli => corpus.stimuli().iter().map(|s| (s.vmaf, 1.0)).collect(),
        BalanceBy::Pairs => corpus
            .stimuli()
            .iter()
            .map(|s| (s.vmaf, (corpus.stimuli_of(&s.content_id).len() - 1) as f64))
            .collect(),
    };
    weighted.sort_by(|a, b| a.0.total_cmp(&b.0));

    // distinct levels with their cumulative weight
    let mut levels: Vec<(f64, f64)> = Vec::new();
    let mut cum = 0.0;
    for (v, w) in weighted {
        cum += w;
        match levels.last_mut() {
            Some(last) if last.0 == v => last.1 = cum,
            _ => levels.push((v, cum)),
        }
    }
    if levels.len() < k {
        return Err(Error::InsufficientData(format!(
            "{} distinct VMAF values cannot fill {k} bins",
            levels.len()
        )));
    }
    let total = cum;

    let target = |i: usize| -> f64 {
        match by {
            BalanceBy::Stimuli => {
                let n = total as usize;
                (i * (n / k) + i.min(n % k)) as f64
            }
            BalanceBy::Pairs => total * i as f64 / k as f64,
        }
    };

    let mut bounds = alloc::vec![levels[0].0 - LOWER_EPSILON];
    let mut next = 0usize;
    for i in 1..k {
        // leave at least one level for every remaining bin
        let last_allowed = levels.len() - 1 - (k - i);
        let goal = target(i);
        let mut best = next;
        for j in next..=last_allowed {
            if libm::fabs(levels[j].1 - goal) < libm::fabs(levels[best].1 - goal) {
                best = j;
            }
        }
        bounds.push(levels[best].0);
        next = best + 1;
    }
    bounds.push(VMAF_MAX.max(levels[levels.len() - 1].0));
    Ok(Decomposition::from_bounds(&bounds, Strategy::Balanced))
}

/// Fills `pair_refs`: a pair joins the range of each of its two stimuli.
pub fn assign_pairs(pairs: &[RatedPair], decomp: &Decomposition, corpus: &Corpus) -> Result<Decomposition> {
    let mut sets: Vec<BTreeSet<PairKey>> = alloc::vec![BTreeSet::new(); decomp.ranges.len()];
    for p in pairs {
        let key = p.key();
        for recipe in [&p.recipe_x, &p.recipe_y] {
            let vmaf = corpus.stimulus(&p.content_id, recipe)?.vmaf;
            let idx = decomp
                .find(vmaf)
                .ok_or(Error::OutOfCoverage { vmaf })
                .map_err(|e| e.context(format!("pair {key}")))?;
            sets[idx].insert(key.clone());
        }
    }
    let mut out = decomp.clone();
    for (range, set) in out.ranges.iter_mut().zip(sets) {
        range.pair_refs = set.into_iter().collect();
    }
    Ok(out)
}
