//! Subcommand implementations, callable without going through argument
//! parsing.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use jndmap_core::simulate::SimTruth;
use jndmap_core::{
    predict_jnd, Corpus, Decomposition, Direction, EvalGrid, Family, JndPrediction, ModelSet, Recipe, Resolution,
    SimSpec, Stimulus,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{CliError, ErrorRecord, Result};
use crate::pipeline::{self, FitFailure};
use crate::report::{self, RangesFile};
use crate::tables::{self, CorpusPaths};

/// The simulation spec used when none is given.
pub const DEFAULT_SIM_SPEC: &str = include_str!("../data/default_sim_spec.json");

pub fn default_sim_spec() -> SimSpec {
    serde_json::from_str(DEFAULT_SIM_SPEC).expect("bundled simulation spec parses")
}

/// Tracks the files a command has written into its output directory.
#[derive(Debug)]
pub struct OutDir {
    pub path: PathBuf,
    pub written: Vec<String>,
}

impl OutDir {
    pub fn create(path: &Path) -> Result<Self> {
        std::fs::create_dir_all(path).map_err(CliError::io(path))?;
        Ok(OutDir { path: path.to_path_buf(), written: Vec::new() })
    }

    pub fn file(&mut self, name: &str) -> PathBuf {
        if !self.written.iter().any(|w| w == name) {
            self.written.push(name.to_string());
        }
        self.path.join(name)
    }

    /// Writes `error.json` describing `err` and the artifacts left behind.
    pub fn record_failure(&self, err: &CliError) {
        let record = ErrorRecord::new(err, self.written.clone());
        if let Err(e) = tables::write_json(&self.path.join("error.json"), &record) {
            log::error!("could not write error record: {e}");
        }
    }

    /// Removes a stale `error.json` from an earlier failed run.
    fn clear_failure(&self) {
        let _ = std::fs::remove_file(self.path.join("error.json"));
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn file_sha256(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(CliError::io(path))?;
    Ok(sha256_hex(&bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputRecord {
    pub path: String,
    pub sha256: String,
}

/// `run_manifest.json`: everything needed to repeat a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub core_version: String,
    pub status: String,
    pub config: RunConfig,
    pub config_sha256: String,
    pub inputs: BTreeMap<String, InputRecord>,
    /// Artifact name → sha256.
    pub artifacts: BTreeMap<String, String>,
    pub screened_observers: Vec<String>,
    pub fit_failures: Vec<FitFailure>,
}

/// Summary returned by [`run`].
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub grid: Option<EvalGrid>,
    pub removed_observers: usize,
    pub pairs: usize,
    pub significant: usize,
    pub decomposition: Decomposition,
    pub models: ModelSet,
}

/// Full pipeline: screen → classify → decompose → codist → fit → predict →
/// evaluate, with every artifact written to `out`.
pub fn run(cfg: &RunConfig, inputs: &CorpusPaths, out: &mut OutDir, jobs: usize) -> Result<RunSummary> {
    cfg.validate()?;
    out.clear_failure();
    let corpus = tables::load_corpus(inputs)?;
    pipeline::with_jobs(jobs, || run_stages(cfg, &corpus, inputs, out))?
}

fn run_stages(cfg: &RunConfig, corpus: &Corpus, inputs: &CorpusPaths, out: &mut OutDir) -> Result<RunSummary> {
    let (screening, screened) = pipeline::screen(corpus, cfg)?;
    tables::write_json(&out.file("screening.json"), &screening)?;

    let pairs = pipeline::classify(&screened, cfg)?;
    tables::write_pairs(&out.file("pairs.csv"), &pairs)?;
    log::info!("{} pairs, {} significantly different", pairs.len(), pairs.iter().filter(|p| p.sig).count());

    let decomp = pipeline::decompose(&screened, &pairs, cfg)?;
    tables::write_json(&out.file("ranges.json"), &RangesFile::from_decomposition(&decomp))?;

    let fits = pipeline::fit(&decomp, &pairs, cfg)?;
    tables::write_codist(&out.file("codist.csv"), &fits.codists)?;
    tables::write_json(&out.file("mf_params.json"), &fits.models)?;
    let curves = fits.ordered.iter().filter_map(|(r, f)| fits.models.get(r, *f).map(|mf| (r.as_str(), mf)));
    tables::write_curve_samples(&out.file("curve_samples.csv"), curves)?;

    let predictions = pipeline::predict(&screened, &fits.models, &decomp, cfg);
    tables::write_predictions(&out.file("predictions.csv"), &predictions)?;

    let grid = if screened.truths().is_empty() {
        log::warn!("no JND truth records; skipping evaluation");
        None
    } else {
        let grid = pipeline::evaluate(&screened, &fits.models, &decomp, cfg)?;
        tables::write_json(&out.file("metrics.json"), &report::metrics_file(&grid))?;
        let table = report::render_table(&grid);
        let path = out.file("metrics.txt");
        std::fs::write(&path, &table).map_err(CliError::io(&path))?;
        Some(grid)
    };

    let mut input_records = BTreeMap::new();
    let named = [("vmaf_scores", Some(&inputs.vmaf)), ("dcr_ratings", inputs.ratings.as_ref()), ("jnd_truth", inputs.truth.as_ref())];
    for (name, path) in named {
        if let Some(p) = path {
            input_records
                .insert(name.to_string(), InputRecord { path: p.display().to_string(), sha256: file_sha256(p)? });
        }
    }
    let mut artifacts = BTreeMap::new();
    for name in &out.written {
        artifacts.insert(name.clone(), file_sha256(&out.path.join(name))?);
    }
    let manifest = Manifest {
        tool: "jndmap".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        core_version: jndmap_core::VERSION.into(),
        status: "complete".into(),
        config: cfg.clone(),
        config_sha256: sha256_hex(cfg.canonical_json().as_bytes()),
        inputs: input_records,
        artifacts,
        screened_observers: screening.removed_observers.iter().cloned().collect(),
        fit_failures: fits.failures.clone(),
    };
    tables::write_json(&out.file("run_manifest.json"), &manifest)?;

    Ok(RunSummary {
        grid,
        removed_observers: screening.removed_observers.len(),
        significant: pairs.iter().filter(|p| p.sig).count(),
        pairs: pairs.len(),
        decomposition: decomp,
        models: fits.models,
    })
}

/// `sim_truth.json`
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimTruthFile {
    pub spec: SimSpec,
    pub truths: Vec<SimTruth>,
}

/// Simulates a corpus and writes its three tables plus `sim_truth.json`.
pub fn simulate(spec: &SimSpec, out: &mut OutDir) -> Result<Corpus> {
    let sim = jndmap_core::simulate_corpus(spec).map_err(CliError::stage("simulate"))?;
    for p in tables::write_corpus(&out.path, &sim.corpus)? {
        out.file(&p.file_name().expect("file name").to_string_lossy());
    }
    tables::write_json(&out.file("sim_truth.json"), &SimTruthFile { spec: spec.clone(), truths: sim.truths })?;
    Ok(sim.corpus)
}

pub fn screen(cfg: &RunConfig, inputs: &CorpusPaths, out: &mut OutDir) -> Result<()> {
    let corpus = tables::load_corpus(inputs)?;
    let (report, screened) = pipeline::screen(&corpus, cfg)?;
    tables::write_json(&out.file("screening.json"), &report)?;
    let path = out.file("dcr_ratings_screened.csv");
    tables::write_rows(
        &path,
        &tables::RATINGS_HEADER,
        screened
            .ratings()
            .iter()
            .map(|r| [r.content_id.clone(), r.recipe_id.clone(), r.observer_id.clone(), r.score.to_string()]),
    )
}

pub fn classify(cfg: &RunConfig, inputs: &CorpusPaths, jobs: usize, out: &mut OutDir) -> Result<()> {
    let corpus = tables::load_corpus(inputs)?;
    let pairs = pipeline::with_jobs(jobs, || pipeline::classify(&corpus, cfg))??;
    tables::write_pairs(&out.file("pairs.csv"), &pairs)
}

pub fn decompose(cfg: &RunConfig, inputs: &CorpusPaths, pairs_path: &Path, out: &mut OutDir) -> Result<Decomposition> {
    let corpus = tables::load_corpus(inputs)?;
    let pairs = tables::read_pairs(pairs_path)?;
    let decomp = pipeline::decompose(&corpus, &pairs, cfg)?;
    tables::write_json(&out.file("ranges.json"), &RangesFile::from_decomposition(&decomp))?;
    Ok(decomp)
}

pub fn fit(cfg: &RunConfig, pairs_path: &Path, ranges_path: &Path, jobs: usize, out: &mut OutDir) -> Result<ModelSet> {
    let pairs = tables::read_pairs(pairs_path)?;
    let decomp = tables::read_json::<RangesFile>(ranges_path)?.to_decomposition()?;
    let fits = pipeline::with_jobs(jobs, || pipeline::fit(&decomp, &pairs, cfg))??;
    tables::write_codist(&out.file("codist.csv"), &fits.codists)?;
    tables::write_json(&out.file("mf_params.json"), &fits.models)?;
    let curves = fits.ordered.iter().filter_map(|(r, f)| fits.models.get(r, *f).map(|mf| (r.as_str(), mf)));
    tables::write_curve_samples(&out.file("curve_samples.csv"), curves)?;
    Ok(fits.models)
}

/// Where a single prediction starts from.
#[derive(Debug, Clone)]
pub enum Anchor {
    Vmaf(f64),
    Stimulus(Stimulus),
}

#[derive(Debug, Clone)]
pub struct PredictRequest {
    pub anchor: Anchor,
    pub direction: Direction,
    pub threshold: f64,
    pub family: Family,
}

/// Predicts one JND; the result is also appended to `predictions.csv`
/// (written with a header when the file is new).
pub fn predict(models_path: &Path, ranges_path: &Path, req: &PredictRequest, out: Option<&Path>) -> Result<JndPrediction> {
    let models: ModelSet = tables::read_json(models_path)?;
    let decomp = tables::read_json::<RangesFile>(ranges_path)?.to_decomposition()?;
    let anchor = match &req.anchor {
        Anchor::Stimulus(s) => s.clone(),
        Anchor::Vmaf(v) => {
            if !(0.0..=100.0).contains(v) {
                return Err(CliError::Usage(format!("anchor vmaf must lie in [0, 100], got {v}")));
            }
            Stimulus {
                content_id: String::new(),
                recipe: Recipe { recipe_id: String::new(), resolution: Resolution::Other(String::new()), level: 0 },
                vmaf: *v,
            }
        }
    };
    let p = predict_jnd(&models, &decomp, &anchor, req.direction, req.threshold, req.family)
        .map_err(CliError::stage("predict"))?;
    if let Some(path) = out {
        append_prediction(path, &p)?;
    }
    Ok(p)
}

fn append_prediction(path: &Path, p: &JndPrediction) -> Result<()> {
    let mut rows: Vec<Vec<String>> = if path.exists() {
        tables::read_table(path, &tables::PREDICTIONS_HEADER, |r| {
            Ok(tables::PREDICTIONS_HEADER.iter().map(|c| r.str(c).to_string()).collect())
        })?
        .into_iter()
        .map(|(_, r)| r)
        .collect()
    } else {
        Vec::new()
    };
    rows.push(tables::prediction_row(p).to_vec());
    tables::write_rows(path, &tables::PREDICTIONS_HEADER, rows)
}

/// One-line human-readable form of a prediction.
pub fn describe(p: &JndPrediction) -> String {
    let who = if p.anchor.content_id.is_empty() {
        format!("vmaf {}", p.anchor.vmaf)
    } else {
        format!("{}/{} (vmaf {})", p.anchor.content_id, p.anchor.recipe.recipe_id, p.anchor.vmaf)
    };
    format!(
        "{who} {} range {} {} thr {}: dvmaf {:.4} -> target vmaf {:.4}{}",
        p.direction,
        p.range_id,
        p.family,
        p.threshold,
        p.delta_obj_jnd,
        p.target_vmaf,
        if p.clamped { " (clamped)" } else { "" }
    )
}

pub fn evaluate(
    cfg: &RunConfig,
    inputs: &CorpusPaths,
    models_path: &Path,
    ranges_path: &Path,
    jobs: usize,
    out: &mut OutDir,
) -> Result<EvalGrid> {
    let corpus = tables::load_corpus(inputs)?;
    if corpus.truths().is_empty() {
        return Err(CliError::Usage("evaluate needs a JND truth table (--truth)".into()));
    }
    let models: ModelSet = tables::read_json(models_path)?;
    let decomp = tables::read_json::<RangesFile>(ranges_path)?.to_decomposition()?;
    let grid = pipeline::with_jobs(jobs, || pipeline::evaluate(&corpus, &models, &decomp, cfg))??;
    tables::write_json(&out.file("metrics.json"), &report::metrics_file(&grid))?;
    let path = out.file("metrics.txt");
    std::fs::write(&path, report::render_table(&grid)).map_err(CliError::io(&path))?;
    Ok(grid)
}

/// Writes one SVG per range found in `samples`.
pub fn render(samples: &Path, codist: Option<&Path>, out: &mut OutDir) -> Result<Vec<PathBuf>> {
    let curves = tables::read_curve_samples(samples)?;
    let mut points: BTreeMap<String, Vec<crate::render::Point>> = BTreeMap::new();
    if let Some(path) = codist {
        let rows = tables::read_table(path, &tables::CODIST_HEADER, |r| {
            let lo: f64 = r.parse("bin_lo")?;
            let hi: f64 = r.parse("bin_hi")?;
            let dif: u32 = r.parse("f_dif")?;
            let sim: u32 = r.parse("f_sim")?;
            Ok((r.str("range_id").to_string(), 0.5 * (lo + hi), dif, sim))
        })?;
        for (_, (id, x, dif, sim)) in rows {
            if dif + sim > 0 {
                points.entry(id).or_default().push((x, f64::from(dif) / f64::from(dif + sim), dif + sim));
            }
        }
    }
    let mut ids: Vec<&str> = Vec::new();
    for c in &curves {
        if !ids.contains(&c.range_id.as_str()) {
            ids.push(&c.range_id);
        }
    }
    let mut written = Vec::new();
    for id in ids {
        let of_range: Vec<&tables::CurveSamples> = curves.iter().filter(|c| c.range_id == id).collect();
        let svg = crate::render::render_range(id, &of_range, points.get(id).map_or(&[], Vec::as_slice));
        let path = out.file(&format!("curves_{}.svg", crate::render::file_stem(id)));
        std::fs::write(&path, svg).map_err(CliError::io(&path))?;
        written.push(path);
    }
    Ok(written)
}
