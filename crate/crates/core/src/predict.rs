//! JND prediction by inverting a range's mapping function at a threshold.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;

use crate::corpus::{Direction, Stimulus};
use crate::fit::{Family, MappingFunction};
use crate::rangedecomp::Decomposition;
use crate::{Error, Result};

/// Absolute resolution of the bisection in ΔVMAF.
const BISECT_TOL: f64 = 1e-13;

/// Fitted mapping functions keyed by range id, then family.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct ModelSet {
    pub models: BTreeMap<String, BTreeMap<Family, MappingFunction>>,
}

impl ModelSet {
    pub fn insert(&mut self, range_id: String, mf: MappingFunction) {
        self.models.entry(range_id).or_default().insert(mf.family, mf);
    }

    pub fn get(&self, range_id: &str, family: Family) -> Option<&MappingFunction> {
        self.models.get(range_id).and_then(|m| m.get(&family))
    }

    /// The model for `(range_id, family)` if it exists and passed the
    /// monotonicity policy.
    pub fn valid(&self, range_id: &str, family: Family) -> Result<&MappingFunction> {
        self.get(range_id, family)
            .filter(|mf| mf.fit_report.valid)
            .ok_or_else(|| Error::MissingModel { range_id: range_id.into(), family: family.as_str().into() })
    }
}

/// Range holding `anchor_vmaf`; the flag is set when the anchor is outside
/// the coverage and the nearest range was used instead.
pub fn select_range(decomp: &Decomposition, anchor_vmaf: f64) -> Result<(String, bool)> {
    let (idx, clamped) = decomp
        .find_nearest(anchor_vmaf)
        .ok_or_else(|| Error::InvalidParameter("decomposition has no ranges".into()))?;
    Ok((decomp.ranges[idx].id(), clamped))
}

/// Smallest Δ in the domain with `mf(Δ) ≥ thr`.
///
/// Returns `clamped = true` when the threshold is not crossed inside the
/// domain: Δ is then the domain maximum if the curve never reaches `thr`, or
/// the domain minimum if it already exceeds it there.
pub fn invert_at_threshold(mf: &MappingFunction, thr: f64) -> Result<(f64, bool)> {
    if !mf.fit_report.valid {
        return Err(Error::Fit(format!("{} model was rejected as non-monotone", mf.family)));
    }
    if !(thr > 0.0 && thr < 1.0) {
        return Err(Error::InvalidParameter(format!("threshold must lie in (0, 1), got {thr}")));
    }
    let (mut lo, mut hi) = mf.domain;
    if mf.eval(hi) < thr {
        return Ok((hi, true));
    }
    if mf.eval(lo) >= thr {
        return Ok((lo, mf.eval(lo) > thr));
    }
    for _ in 0..256 {
        if hi - lo <= BISECT_TOL * hi.abs().max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mf.eval(mid) >= thr {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((hi, false))
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct JndPrediction {
    pub anchor: Stimulus,
    pub range_id: String,
    /// Anchor VMAF outside the decomposition; nearest range used.
    pub range_clamped: bool,
    pub direction: Direction,
    pub family: Family,
    pub threshold: f64,
    pub delta_obj_jnd: f64,
    /// Threshold not crossed inside the model domain.
    pub clamped: bool,
    /// anchor ± Δ, limited to [0, 100].
    pub target_vmaf: f64,
}

/// Result of a prediction from a bare anchor score.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaPrediction {
    pub range_id: String,
    pub range_clamped: bool,
    pub delta_obj_jnd: f64,
    pub clamped: bool,
    pub target_vmaf: f64,
}

pub fn predict_delta(
    models: &ModelSet,
    decomp: &Decomposition,
    anchor_vmaf: f64,
    direction: Direction,
    thr: f64,
    family: Family,
) -> Result<DeltaPrediction> {
    let (range_id, range_clamped) = select_range(decomp, anchor_vmaf)?;
    let mf = models.valid(&range_id, family)?;
    let (delta, clamped) = invert_at_threshold(mf, thr)?;
    let target_vmaf = (anchor_vmaf + direction.sign() * delta).clamp(0.0, 100.0);
    Ok(DeltaPrediction { range_id, range_clamped, delta_obj_jnd: delta, clamped, target_vmaf })
}

/// JND of `anchor` in `direction`: the ΔVMAF where the anchor range's
/// mapping function reaches `thr`, applied to the anchor score.
pub fn predict_jnd(
    models: &ModelSet,
    decomp: &Decomposition,
    anchor: &Stimulus,
    direction: Direction,
    thr: f64,
    family: Family,
) -> Result<JndPrediction> {
    let d = predict_delta(models, decomp, anchor.vmaf, direction, thr, family)?;
    Ok(JndPrediction {
        anchor: anchor.clone(),
        range_id: d.range_id,
        range_clamped: d.range_clamped,
        direction,
        family,
        threshold: thr,
        delta_obj_jnd: d.delta_obj_jnd,
        clamped: d.clamped,
        target_vmaf: d.target_vmaf,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fit::FitReport;
    use crate::rangedecomp::decompose_explicit;
    use alloc::vec;

    fn mf(family: Family, params: &[f64]) -> MappingFunction {
        MappingFunction {
            family,
            params: params.to_vec(),
            domain: (0.0, 30.0),
            fit_report: FitReport { valid: true, monotone: true, ..FitReport::default() },
        }
    }

    fn hd() -> Decomposition {
        decompose_explicit(&[30.0, 79.0, 86.0, 90.0, 95.0, 100.0]).unwrap()
    }

    #[test]
    fn range_lookup() {
        assert_eq!(select_range(&hd(), 92.0).unwrap(), ("(90,95]".into(), false));
        assert_eq!(select_range(&hd(), 79.0).unwrap(), ("(30,79]".into(), false));
        assert_eq!(select_range(&hd(), 101.0).unwrap(), ("(95,100]".into(), true));
    }

    #[test]
    fn logistic_inversion() {
        let m = mf(Family::Logistic2, &[0.5, 6.0]);
        let (d, c) = invert_at_threshold(&m, 0.75).unwrap();
        assert!(!c);
        assert!((d - (6.0 + libm::log(3.0) / 0.5)).abs() < 1e-9);
        let (d, _) = invert_at_threshold(&m, 0.5).unwrap();
        assert!((d - 6.0).abs() < 1e-9);
        assert!((m.eval(d) - 0.5).abs() <= 1e-6);
    }

    #[test]
    fn glm_midpoint_and_flat_curve() {
        let m = mf(Family::Glm, &[-3.0, 0.5]);
        assert!((m.eval(6.0) - 0.5).abs() < 1e-15);
        let flat = mf(Family::Glm, &[0.0, 0.0]);
        assert_eq!(invert_at_threshold(&flat, 0.75).unwrap(), (30.0, true));
    }

    #[test]
    fn rejected_model_and_bad_threshold() {
        let mut m = mf(Family::Cubic4, &[0.0, 0.1, 0.0, 0.0]);
        assert!(invert_at_threshold(&m, 1.0).is_err());
        assert!(invert_at_threshold(&m, 0.0).is_err());
        m.fit_report.valid = false;
        assert!(invert_at_threshold(&m, 0.5).is_err());
    }

    #[test]
    fn targets_are_limited_to_the_scale() {
        // logistic2 with Δ(0.5) = 4.2 and Δ(0.5) = 5
        let decomp = hd();
        let mut models = ModelSet::default();
        models.insert("(90,95]".into(), mf(Family::Logistic2, &[1.0, 4.2]));
        models.insert("(95,100]".into(), mf(Family::Logistic2, &[1.0, 5.0]));
        let d = predict_delta(&models, &decomp, 95.0, Direction::Dec, 0.5, Family::Logistic2).unwrap();
        assert!((d.target_vmaf - 90.8).abs() < 1e-9);
        let d = predict_delta(&models, &decomp, 98.0, Direction::Inc, 0.5, Family::Logistic2).unwrap();
        assert_eq!(d.target_vmaf, 100.0);
        let missing = predict_delta(&models, &decomp, 80.0, Direction::Inc, 0.5, Family::Logistic2);
        assert!(matches!(missing, Err(Error::MissingModel { .. })));
        assert!(vec![Family::Glm].iter().all(|f| models.valid("(90,95]", *f).is_err()));
    }
}
