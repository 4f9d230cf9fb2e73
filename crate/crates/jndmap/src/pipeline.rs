//! Stage orchestration.
//!
//! Stages fan out over contents, ranges or families on the current rayon
//! pool and collect results back in input order, so the output never depends
//! on the number of workers.

use std::collections::BTreeSet;

use jndmap_core::codist::build_codistribution;
use jndmap_core::screening::{self, ScreeningReport};
use jndmap_core::significance::{classify_content, ClassifyOptions};
use jndmap_core::{
    assign_pairs, decompose_balanced, decompose_explicit, decompose_fixed, evaluate_grid, fit_mapping, predict_jnd,
    psd_points, CoDistribution, Corpus, Decomposition, Direction, EvalGrid, Family, FitOptions, GlmMode,
    JndPrediction, ModelSet, RatedPair, Stimulus,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{DecompositionConfig, RunConfig};
use crate::error::{CliError, Result};

pub fn screen(corpus: &Corpus, cfg: &RunConfig) -> Result<(ScreeningReport, Corpus)> {
    let report = screening::screen(corpus, cfg.screening).map_err(CliError::stage("screen"))?;
    if !report.removed_observers.is_empty() {
        log::info!("screening removed {} observer(s): {:?}", report.removed_observers.len(), report.removed_observers);
    }
    let screened = screening::apply_screening(corpus, &report);
    Ok((report, screened))
}

pub fn classify(corpus: &Corpus, cfg: &RunConfig) -> Result<Vec<RatedPair>> {
    let opts = ClassifyOptions { alpha: cfg.alpha, test: cfg.test };
    let per_content: Vec<Vec<RatedPair>> = corpus
        .contents()
        .par_iter()
        .map(|c| classify_content(corpus, c, &opts))
        .collect::<jndmap_core::Result<_>>()
        .map_err(CliError::stage("classify"))?;
    Ok(per_content.into_iter().flatten().collect())
}

pub fn decompose(corpus: &Corpus, pairs: &[RatedPair], cfg: &RunConfig) -> Result<Decomposition> {
    let decomp = match &cfg.decomposition {
        DecompositionConfig::Balanced { k, balance_by } => decompose_balanced(corpus, *k, *balance_by),
        DecompositionConfig::FixedWidth { width } => decompose_fixed(*width),
        DecompositionConfig::Explicit { bounds } => decompose_explicit(bounds),
    }
    .map_err(CliError::stage("decompose"))?;
    let decomp = assign_pairs(pairs, &decomp, corpus).map_err(CliError::stage("decompose"))?;
    for id in decomp.empty_ranges(corpus) {
        log::warn!("range {id} holds no stimuli");
    }
    Ok(decomp)
}

/// A (range, family) combination that produced no model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitFailure {
    pub range_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<Family>,
    pub error: String,
}

#[derive(Debug, Clone, Default)]
pub struct FitOutput {
    pub codists: Vec<CoDistribution>,
    pub models: ModelSet,
    /// Models in (range, family) order, including rejected ones.
    pub ordered: Vec<(String, Family)>,
    pub failures: Vec<FitFailure>,
}

/// Co-distribution and one mapping function per family for every range.
pub fn fit(decomp: &Decomposition, pairs: &[RatedPair], cfg: &RunConfig) -> Result<FitOutput> {
    type RangeResult = (Option<CoDistribution>, Vec<std::result::Result<jndmap_core::MappingFunction, FitFailure>>);
    let results: Vec<RangeResult> = decomp
        .ranges
        .par_iter()
        .map(|range| {
            let range_id = range.id();
            let cd = match build_codistribution(range, pairs, cfg.bin_width) {
                Ok(cd) => cd,
                Err(e) => {
                    let fail = FitFailure { range_id, family: None, error: e.to_string() };
                    return (None, vec![Err(fail)]);
                }
            };
            let points = psd_points(&cd);
            let refs: BTreeSet<_> = range.pair_refs.iter().collect();
            let range_pairs: Vec<RatedPair> = pairs.iter().filter(|p| refs.contains(&p.key())).cloned().collect();
            let glm_pairs = (cfg.glm_mode == GlmMode::Pairwise).then_some(range_pairs.as_slice());
            let fits = cfg
                .families
                .par_iter()
                .map(|&family| {
                    fit_mapping(&points, family, glm_pairs, &FitOptions::default()).map_err(|e| FitFailure {
                        range_id: range_id.clone(),
                        family: Some(family),
                        error: e.to_string(),
                    })
                })
                .collect();
            (Some(cd), fits)
        })
        .collect();

    let mut out = FitOutput::default();
    for (range, (cd, fits)) in decomp.ranges.iter().zip(results) {
        out.codists.extend(cd);
        for fit in fits {
            match fit {
                Ok(mf) => {
                    if !mf.fit_report.valid {
                        log::warn!("{} on {}: rejected as non-monotone", mf.family, range.id());
                    }
                    out.ordered.push((range.id(), mf.family));
                    out.models.insert(range.id(), mf);
                }
                Err(f) => {
                    log::warn!("{}: {}", f.range_id, f.error);
                    out.failures.push(f);
                }
            }
        }
    }
    Ok(out)
}

/// Anchors to predict from: those of the truth records, or the best and
/// worst stimulus of every content when there are none.
pub fn anchors(corpus: &Corpus) -> Vec<(Stimulus, Direction)> {
    let mut out: Vec<(Stimulus, Direction)> = Vec::new();
    if corpus.truths().is_empty() {
        for c in corpus.contents() {
            let stimuli = corpus.stimuli_of(c);
            let by_vmaf = |a: &&&Stimulus, b: &&&Stimulus| a.vmaf.total_cmp(&b.vmaf);
            if let Some(best) = stimuli.iter().max_by(by_vmaf) {
                out.push(((*best).clone(), Direction::Dec));
            }
            if let Some(worst) = stimuli.iter().min_by(by_vmaf) {
                out.push(((*worst).clone(), Direction::Inc));
            }
        }
        return out;
    }
    let mut seen = BTreeSet::new();
    for t in corpus.truths() {
        if seen.insert((t.content_id.clone(), t.anchor_recipe_id.clone(), t.direction)) {
            if let Ok(s) = corpus.stimulus(&t.content_id, &t.anchor_recipe_id) {
                out.push((s.clone(), t.direction));
            }
        }
    }
    out.sort_by(|a, b| {
        (&a.0.content_id, a.1, &a.0.recipe.recipe_id).cmp(&(&b.0.content_id, b.1, &b.0.recipe.recipe_id))
    });
    out
}

/// One prediction per anchor, family and threshold with a valid model.
pub fn predict(corpus: &Corpus, models: &ModelSet, decomp: &Decomposition, cfg: &RunConfig) -> Vec<JndPrediction> {
    let anchors = anchors(corpus);
    let per_anchor: Vec<Vec<JndPrediction>> = anchors
        .par_iter()
        .map(|(anchor, direction)| {
            let mut out = Vec::new();
            for &family in &cfg.families {
                for &thr in &cfg.thresholds {
                    if let Ok(p) = predict_jnd(models, decomp, anchor, *direction, thr, family) {
                        out.push(p);
                    }
                }
            }
            out
        })
        .collect();
    per_anchor.into_iter().flatten().collect()
}

/// The (threshold × family) grid, one family per task.
pub fn evaluate(corpus: &Corpus, models: &ModelSet, decomp: &Decomposition, cfg: &RunConfig) -> Result<EvalGrid> {
    let grids: Vec<EvalGrid> = cfg
        .families
        .par_iter()
        .map(|&family| {
            let spec = jndmap_core::GridSpec {
                thresholds: cfg.thresholds.clone(),
                families: vec![family],
                chain_orders: cfg.chain_orders,
            };
            evaluate_grid(corpus, models, decomp, &spec)
        })
        .collect::<jndmap_core::Result<_>>()
        .map_err(CliError::stage("evaluate"))?;
    let mut cells: Vec<_> = grids.into_iter().flat_map(|g| g.cells).collect();
    // families were concatenated; restore group-major order
    cells.sort_by_key(|c| (c.direction, c.order));
    Ok(EvalGrid { thresholds: cfg.thresholds.clone(), families: cfg.families.clone(), cells })
}

/// Runs `f` on a pool of `jobs` workers (0: one per core).
pub fn with_jobs<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {jobs} worker threads: {e}")))?;
    Ok(pool.install(f))
}
