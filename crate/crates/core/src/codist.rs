//! Co-distributions of ΔVMAF for significantly different and similar pairs.
//!
//! Within one sub-quality range, `f_dif[b]` counts the pairs with sig = 1
//! whose ΔVMAF falls in bin `b` and `f_sim[b]` those with sig = 0. Each
//! non-empty bin yields one point of the mapping function:
//!
//! ```text
//! P_SD(b) = f_dif[b] / (f_dif[b] + f_sim[b])
//! ```

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::rangedecomp::SubQualityRange;
use crate::significance::{PairKey, RatedPair};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CoDistribution {
    pub range_id: String,
    /// Shared by both histograms; bins are `[e_i, e_{i+1})`, the last one closed.
    pub bin_edges: Vec<f64>,
    pub f_dif: Vec<u32>,
    pub f_sim: Vec<u32>,
}

impl CoDistribution {
    pub fn bins(&self) -> usize {
        self.f_dif.len()
    }

    pub fn total(&self) -> u32 {
        self.f_dif.iter().sum::<u32>() + self.f_sim.iter().sum::<u32>()
    }

    /// P_SD of bin `b`, or `None` when the bin is empty.
    pub fn p_sd(&self, b: usize) -> Option<f64> {
        let support = self.f_dif[b] + self.f_sim[b];
        (support > 0).then(|| f64::from(self.f_dif[b]) / f64::from(support))
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.bin_edges[0], self.bin_edges[self.bin_edges.len() - 1])
    }
}

/// One original point of the mapping function.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PsdPoint {
    /// Bin centre.
    pub delta_obj: f64,
    pub p_sd: f64,
    pub support: u32,
}

/// Bin edges `0, w, 2w, ...` reaching at least ⌈max Δ⌉.
pub fn bin_edges(max_delta: f64, bin_width: f64) -> Vec<f64> {
    let top = libm::ceil(max_delta);
    let n = (libm::ceil(top / bin_width) as usize).max(1);
    (0..=n).map(|i| i as f64 * bin_width).collect()
}

fn bin_of(delta: f64, bin_width: f64, bins: usize) -> usize {
    (libm::floor(delta / bin_width) as usize).min(bins - 1)
}

/// Tallies the pairs assigned to `range` into the two histograms.
pub fn build_codistribution(range: &SubQualityRange, pairs: &[RatedPair], bin_width: f64) -> Result<CoDistribution> {
    if !(bin_width.is_finite() && bin_width > 0.0) {
        return Err(Error::InvalidParameter(format!("bin width must be positive, got {bin_width}")));
    }
    let range_id = range.id();
    if range.pair_refs.is_empty() {
        return Err(Error::InsufficientData(format!("range {range_id} has no pairs")));
    }
    let refs: BTreeSet<&PairKey> = range.pair_refs.iter().collect();
    let members: Vec<&RatedPair> = pairs.iter().filter(|p| refs.contains(&p.key())).collect();
    if members.len() != refs.len() {
        return Err(Error::InvalidParameter(format!(
            "range {range_id} references {} pairs but only {} are in the pair list",
            refs.len(),
            members.len()
        )));
    }

    let max_delta = members.iter().map(|p| p.delta_obj).fold(0.0, f64::max);
    let bin_edges = bin_edges(max_delta, bin_width);
    let bins = bin_edges.len() - 1;
    let (mut f_dif, mut f_sim) = (vec![0u32; bins], vec![0u32; bins]);
    for p in members {
        let b = bin_of(p.delta_obj, bin_width, bins);
        if p.sig {
            f_dif[b] += 1;
        } else {
            f_sim[b] += 1;
        }
    }
    Ok(CoDistribution { range_id, bin_edges, f_dif, f_sim })
}

/// Original mapping-function points, one per non-empty bin.
pub fn psd_points(cd: &CoDistribution) -> Vec<PsdPoint> {
    (0..cd.bins())
        .filter_map(|b| {
            cd.p_sd(b).map(|p_sd| PsdPoint {
                delta_obj: 0.5 * (cd.bin_edges[b] + cd.bin_edges[b + 1]),
                p_sd,
                support: cd.f_dif[b] + cd.f_sim[b],
            })
        })
        .collect()
}
