//! MAE/RMSE of predicted JNDs against ground truth, over a grid of
//! thresholds and families.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::corpus::{Corpus, Direction, JndTruth};
use crate::fit::Family;
use crate::predict::{predict_delta, ModelSet};
use crate::rangedecomp::Decomposition;
use crate::{Error, Result};

pub const DEFAULT_THRESHOLDS: [f64; 5] = [0.75, 0.8, 0.85, 0.9, 0.95];

/// |vmaf(anchor) − vmaf(jnd)| and whether the truth is degenerate (anchor
/// and JND are the same stimulus).
pub fn ground_truth_delta(corpus: &Corpus, truth: &JndTruth) -> Result<(f64, bool)> {
    let anchor = corpus.stimulus(&truth.content_id, &truth.anchor_recipe_id)?;
    let jnd = corpus.stimulus(&truth.content_id, &truth.jnd_recipe_id)?;
    Ok((libm::fabs(anchor.vmaf - jnd.vmaf), truth.anchor_recipe_id == truth.jnd_recipe_id))
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GridSpec {
    pub thresholds: Vec<f64>,
    pub families: Vec<Family>,
    /// Predict higher-order JNDs by repeating the single-step prediction from
    /// the stimulus nearest to each intermediate target.
    pub chain_orders: bool,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { thresholds: DEFAULT_THRESHOLDS.to_vec(), families: Family::ALL.to_vec(), chain_orders: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalCell {
    pub direction: Direction,
    pub order: u32,
    pub family: Family,
    pub threshold: f64,
    /// NaN when `n == 0`.
    pub mae: f64,
    pub rmse: f64,
    pub n: usize,
    pub clamped_count: usize,
    /// Truths with no valid model for their range and this family.
    pub skipped: usize,
}

impl EvalCell {
    /// Row group label: `inc`, `dec`, or `dec@2` for higher orders.
    pub fn group(&self) -> String {
        group_label(self.direction, self.order)
    }
}

pub fn group_label(direction: Direction, order: u32) -> String {
    if order == 1 {
        direction.as_str().into()
    } else {
        format!("{}@{}", direction.as_str(), order)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalGrid {
    pub thresholds: Vec<f64>,
    pub families: Vec<Family>,
    /// Ordered by (direction, order), then family, then threshold as listed.
    pub cells: Vec<EvalCell>,
}

impl EvalGrid {
    pub fn cell(&self, direction: Direction, order: u32, family: Family, threshold: f64) -> Option<&EvalCell> {
        self.cells
            .iter()
            .find(|c| c.direction == direction && c.order == order && c.family == family && c.threshold == threshold)
    }

    /// `(direction, order)` groups in order.
    pub fn groups(&self) -> Vec<(Direction, u32)> {
        let mut out: Vec<(Direction, u32)> = Vec::new();
        for c in &self.cells {
            if !out.contains(&(c.direction, c.order)) {
                out.push((c.direction, c.order));
            }
        }
        out
    }

    /// Lowest-MAE cell among those that scored every truth of their group.
    pub fn best_cell(&self) -> Option<&EvalCell> {
        self.best_where(|_| true)
    }

    pub fn best_in_group(&self, direction: Direction, order: u32) -> Option<&EvalCell> {
        self.best_where(|c| c.direction == direction && c.order == order)
    }

    fn best_where(&self, pred: impl Fn(&EvalCell) -> bool) -> Option<&EvalCell> {
        self.cells
            .iter()
            .filter(|c| pred(c) && c.n > 0 && c.skipped == 0)
            .fold(None, |best: Option<&EvalCell>, c| match best {
                Some(b) if b.mae <= c.mae => Some(b),
                _ => Some(c),
            })
    }
}

fn truth_order(a: &JndTruth, b: &JndTruth) -> core::cmp::Ordering {
    (a.direction, a.order, &a.content_id, &a.anchor_recipe_id, &a.jnd_recipe_id).cmp(&(
        b.direction,
        b.order,
        &b.content_id,
        &b.anchor_recipe_id,
        &b.jnd_recipe_id,
    ))
}

/// Predicted ΔVMAF of one truth record, with the clamped flag.
fn predict_truth(
    corpus: &Corpus,
    models: &ModelSet,
    decomp: &Decomposition,
    truth: &JndTruth,
    family: Family,
    thr: f64,
    chain: bool,
) -> Result<(f64, bool)> {
    let anchor = corpus.stimulus(&truth.content_id, &truth.anchor_recipe_id)?.vmaf;
    let steps = if chain { truth.order } else { 1 };
    let mut current = anchor;
    let mut clamped = false;
    let mut target = anchor;
    for step in 1..=steps {
        let d = predict_delta(models, decomp, current, truth.direction, thr, family)?;
        clamped |= d.clamped;
        target = d.target_vmaf;
        if step < steps {
            // next anchor: the real stimulus nearest to the target, strictly
            // beyond the current one in the search direction
            let beyond = corpus.stimuli_of(&truth.content_id).into_iter().map(|s| s.vmaf).filter(|&v| match truth
                .direction
            {
                Direction::Dec => v < current,
                Direction::Inc => v > current,
            });
            current = beyond.fold(None, |best: Option<f64>, v| match best {
                Some(b) if libm::fabs(b - target) <= libm::fabs(v - target) => Some(b),
                _ => Some(v),
            })
            .unwrap_or(target);
        }
    }
    Ok((libm::fabs(target - anchor), clamped))
}

/// Scores every (family, threshold) cell over every truth record.
pub fn evaluate_grid(corpus: &Corpus, models: &ModelSet, decomp: &Decomposition, spec: &GridSpec) -> Result<EvalGrid> {
    let mut truths: Vec<&JndTruth> = corpus.truths().iter().collect();
    if truths.is_empty() {
        return Err(Error::InsufficientData("no JND truth records to evaluate".into()));
    }
    truths.sort_by(|a, b| truth_order(a, b));

    let mut groups: Vec<(Direction, u32)> = truths.iter().map(|t| (t.direction, t.order)).collect();
    groups.dedup();

    let mut cells = Vec::new();
    for &(direction, order) in &groups {
        let members: Vec<&JndTruth> =
            truths.iter().copied().filter(|t| t.direction == direction && t.order == order).collect();
        let ys: Vec<f64> = members.iter().map(|t| ground_truth_delta(corpus, t).map(|g| g.0)).collect::<Result<_>>()?;
        for &family in &spec.families {
            for &thr in &spec.thresholds {
                let (mut abs_sum, mut sq_sum, mut n, mut clamped_count, mut skipped) = (0.0, 0.0, 0, 0, 0);
                for (t, &y) in members.iter().zip(&ys) {
                    match predict_truth(corpus, models, decomp, t, family, thr, spec.chain_orders) {
                        Ok((y_hat, clamped)) => {
                            let e = y_hat - y;
                            abs_sum += libm::fabs(e);
                            sq_sum += e * e;
                            n += 1;
                            clamped_count += usize::from(clamped);
                        }
                        Err(Error::MissingModel { .. }) => skipped += 1,
                        Err(e) => return Err(e.context(format!("truth {}/{}", t.content_id, t.anchor_recipe_id))),
                    }
                }
                let (mae, rmse) = if n > 0 {
                    (abs_sum / n as f64, libm::sqrt(sq_sum / n as f64))
                } else {
                    (f64::NAN, f64::NAN)
                };
                cells.push(EvalCell { direction, order, family, threshold: thr, mae, rmse, n, clamped_count, skipped });
            }
        }
    }
    Ok(EvalGrid { thresholds: spec.thresholds.clone(), families: spec.families.clone(), cells })
}
