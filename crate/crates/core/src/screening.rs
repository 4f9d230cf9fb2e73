//! Observer screening for DCR ratings following ITU-R BT.500 (Annex 2).
//!
//! For every stimulus the mean ū, standard deviation S and kurtosis
//! coefficient β2 of the opinion scores are computed. If the distribution is
//! normal-like (2 ≤ β2 ≤ 4) the acceptance band is ū ± 2S, otherwise
//! ū ± √20·S. Each observer accumulates P (scores above the band) and Q
//! (scores below it) over all N judgments they made, and is rejected when
//!
//! ```text
//! (P + Q) / N > 0.05   and   |P − Q| / (P + Q) < 0.3
//! ```
//!
//! A zero-variance stimulus collapses the band to the mean, so any deviating
//! score counts.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::corpus::Corpus;
use crate::stats;
use crate::{Error, Result};

/// Ratio of out-of-band judgments above which an observer becomes a candidate.
pub const OUTLIER_FRACTION: f64 = 0.05;
/// Candidates whose excursions are this balanced (|P−Q|/(P+Q) below it) are rejected.
pub const BALANCE_RATIO: f64 = 0.3;

/// Screening procedures named by the subjective-test literature.
///
/// Only [`ScreeningMethod::Bt500`] does anything; the other two are accepted
/// in configuration and return an empty removal set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ScreeningMethod {
    #[default]
    Bt500,
    VqegHdtv,
    Bt1788,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ObserverStats {
    pub p_count: u32,
    pub q_count: u32,
    pub judgments: u32,
    /// (P + Q) / N
    pub ratio1: f64,
    /// |P − Q| / (P + Q), zero when P + Q = 0
    pub ratio2: f64,
}

impl ObserverStats {
    fn finish(&mut self) {
        let pq = self.p_count + self.q_count;
        self.ratio1 = if self.judgments > 0 { f64::from(pq) / f64::from(self.judgments) } else { 0.0 };
        self.ratio2 = if pq > 0 { f64::from(self.p_count.abs_diff(self.q_count)) / f64::from(pq) } else { 0.0 };
    }

    pub fn rejected(&self) -> bool {
        self.ratio1 > OUTLIER_FRACTION && self.ratio2 < BALANCE_RATIO
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScreeningReport {
    #[cfg_attr(feature = "serde", serde(rename = "removed"))]
    pub removed_observers: BTreeSet<String>,
    #[cfg_attr(feature = "serde", serde(rename = "stats"))]
    pub per_observer_stats: BTreeMap<String, ObserverStats>,
}

/// Acceptance band for one stimulus.
fn band(scores: &[f64]) -> (f64, f64) {
    let m = stats::mean(scores);
    let sd = libm::sqrt(stats::sample_variance(scores));
    let width = match stats::kurtosis(scores) {
        Some(b2) if (2.0..=4.0).contains(&b2) => 2.0 * sd,
        Some(_) => libm::sqrt(20.0) * sd,
        // σ = 0: band collapses to the mean
        None => 0.0,
    };
    (m - width, m + width)
}

pub fn screen_bt500(corpus: &Corpus) -> Result<ScreeningReport> {
    let mut stats_by_obs: BTreeMap<String, ObserverStats> = BTreeMap::new();
    for obs in corpus.observers() {
        stats_by_obs.insert(obs.into(), ObserverStats::default());
    }

    for s in corpus.stimuli() {
        let rated = corpus.ratings_of(&s.content_id, s.recipe_id())?;
        if rated.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "stimulus {}/{} has {} rating(s); screening needs at least 2",
                s.content_id,
                s.recipe_id(),
                rated.len()
            )));
        }
        let scores: Vec<f64> = rated.iter().map(|&(_, v)| f64::from(v)).collect();
        let (lo, hi) = band(&scores);
        for (obs, score) in rated {
            let st = stats_by_obs.get_mut(obs).expect("observer indexed above");
            let score = f64::from(score);
            st.judgments += 1;
            if score > hi {
                st.p_count += 1;
            } else if score < lo {
                st.q_count += 1;
            }
        }
    }

    let mut removed = BTreeSet::new();
    for (obs, st) in stats_by_obs.iter_mut() {
        st.finish();
        if st.rejected() {
            removed.insert(obs.clone());
        }
    }
    Ok(ScreeningReport { removed_observers: removed, per_observer_stats: stats_by_obs })
}

/// Runs the configured screening method.
pub fn screen(corpus: &Corpus, method: ScreeningMethod) -> Result<ScreeningReport> {
    match method {
        ScreeningMethod::Bt500 => screen_bt500(corpus),
        ScreeningMethod::VqegHdtv | ScreeningMethod::Bt1788 | ScreeningMethod::None => {
            Ok(ScreeningReport::default())
        }
    }
}

/// Drops every rating made by a removed observer.
///
/// Removing everybody is allowed; later stages then fail on empty vectors.
pub fn apply_screening(corpus: &Corpus, report: &ScreeningReport) -> Corpus {
    if report.removed_observers.is_empty() {
        return corpus.clone();
    }
    let kept = corpus
        .ratings()
        .iter()
        .filter(|r| !report.removed_observers.contains(&r.observer_id))
        .cloned()
        .collect();
    corpus.with_ratings(kept).expect("subset of a valid rating set is valid")
}
