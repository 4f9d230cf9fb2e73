//! JSON artifacts and the text rendering of the evaluation grid.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use jndmap_core::evaluate::group_label;
use jndmap_core::rangedecomp::Strategy;
use jndmap_core::{Decomposition, EvalGrid, PairKey, SubQualityRange};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// `ranges.json`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangesFile {
    pub strategy: Strategy,
    pub bounds: Vec<f64>,
    /// Range id → pair ids (`content/recipe_x/recipe_y`).
    pub assignments: BTreeMap<String, Vec<String>>,
}

impl RangesFile {
    pub fn from_decomposition(d: &Decomposition) -> Self {
        RangesFile {
            strategy: d.strategy,
            bounds: d.bounds(),
            assignments: d.ranges.iter().map(|r| (r.id(), r.pair_refs.iter().map(|k| k.to_string()).collect())).collect(),
        }
    }

    pub fn to_decomposition(&self) -> Result<Decomposition> {
        if self.bounds.len() < 2 || self.bounds.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(CliError::Usage("ranges.json: bounds must be strictly increasing".into()));
        }
        let mut ranges = Vec::with_capacity(self.bounds.len() - 1);
        for w in self.bounds.windows(2) {
            let mut r = SubQualityRange::new(w[0], w[1]);
            if let Some(ids) = self.assignments.get(&r.id()) {
                r.pair_refs = ids.iter().map(|id| parse_pair_id(id)).collect::<Result<_>>()?;
            }
            ranges.push(r);
        }
        Ok(Decomposition { ranges, strategy: self.strategy })
    }
}

/// Inverse of `PairKey`'s display form; recipe ids must not contain `/`.
pub fn parse_pair_id(id: &str) -> Result<PairKey> {
    let mut parts = id.rsplitn(3, '/');
    match (parts.next(), parts.next(), parts.next()) {
        (Some(y), Some(x), Some(c)) => Ok(PairKey::new(c, x, y)),
        _ => Err(CliError::Usage(format!("malformed pair id {id:?}"))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellMetrics {
    /// `null` when no truth could be scored.
    pub mae: Option<f64>,
    pub rmse: Option<f64>,
    pub n: usize,
    pub clamped: usize,
    pub skipped: usize,
}

/// `metrics.json`: group (`inc`, `dec`, `dec@2`, ...) → family → threshold.
pub type MetricsFile = BTreeMap<String, BTreeMap<String, BTreeMap<String, CellMetrics>>>;

pub fn metrics_file(grid: &EvalGrid) -> MetricsFile {
    let mut out = MetricsFile::new();
    for c in &grid.cells {
        let finite = |v: f64| v.is_finite().then_some(v);
        out.entry(c.group()).or_default().entry(c.family.to_string()).or_default().insert(
            c.threshold.to_string(),
            CellMetrics { mae: finite(c.mae), rmse: finite(c.rmse), n: c.n, clamped: c.clamped_count, skipped: c.skipped },
        );
    }
    out
}

fn fmt_metric(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.4}")
    } else {
        "-".into()
    }
}

/// One block per group: thresholds down, families across, MAE rows above
/// RMSE rows. The best cell of each group is starred.
pub fn render_table(grid: &EvalGrid) -> String {
    const THR_W: usize = 6;
    const COL_W: usize = 9;
    let mut s = String::new();
    for (direction, order) in grid.groups() {
        let best = grid.best_in_group(direction, order);
        let _ = writeln!(s, "[{}]", group_label(direction, order));
        let _ = write!(s, "{:<THR_W$}", "thr");
        for f in &grid.families {
            let _ = write!(s, " {:>COL_W$}", f.label());
        }
        s.push('\n');
        for (name, pick) in [("MAE", true), ("RMSE", false)] {
            let _ = writeln!(s, "{name}");
            for &thr in &grid.thresholds {
                let _ = write!(s, "{:<THR_W$}", thr);
                for &f in &grid.families {
                    let text = match grid.cell(direction, order, f, thr) {
                        Some(c) => {
                            let star = if best.is_some_and(|b| std::ptr::eq(b, c)) { "*" } else { "" };
                            format!("{}{star}", fmt_metric(if pick { c.mae } else { c.rmse }))
                        }
                        None => "-".into(),
                    };
                    let _ = write!(s, " {text:>COL_W$}");
                }
                s.push('\n');
            }
        }
        s.push('\n');
    }
    s
}
