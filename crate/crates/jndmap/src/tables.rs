//! CSV interchange: the three corpus tables and the tabular artifacts.
//!
//! Every table has a fixed header. Columns may appear in any order, but
//! unknown, missing or repeated columns are rejected before any row is read.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use jndmap_core::corpus::Table;
use jndmap_core::{
    CoDistribution, Corpus, DcrRating, Direction, JndPrediction, JndTruth, MappingFunction, RatedPair, Recipe,
    Stimulus,
};

use crate::error::{CliError, Result};

pub const VMAF_HEADER: [&str; 5] = ["content_id", "recipe_id", "resolution", "level", "vmaf"];
pub const RATINGS_HEADER: [&str; 4] = ["content_id", "recipe_id", "observer_id", "score"];
pub const TRUTH_HEADER: [&str; 5] = ["content_id", "anchor_recipe_id", "direction", "jnd_recipe_id", "order"];
pub const PAIRS_HEADER: [&str; 6] = ["content_id", "recipe_x", "recipe_y", "delta_obj", "p_value", "sig"];
pub const CODIST_HEADER: [&str; 6] = ["range_id", "bin_lo", "bin_hi", "f_dif", "f_sim", "p_sd"];
pub const CURVE_HEADER: [&str; 5] = ["range_id", "family", "valid", "delta_obj", "p_sd"];
pub const PREDICTIONS_HEADER: [&str; 9] = [
    "content_id",
    "anchor_recipe_id",
    "direction",
    "range_id",
    "family",
    "threshold",
    "delta_obj_jnd",
    "target_vmaf",
    "clamped",
];

/// Samples per fitted curve in `curve_samples.csv`.
pub const CURVE_SAMPLES: usize = 200;

/// One data row, fields reordered to the expected header.
pub struct Row<'a> {
    file: &'a Path,
    pub line: u64,
    header: &'a [&'static str],
    fields: Vec<String>,
}

impl Row<'_> {
    pub fn str(&self, column: &str) -> &str {
        let i = self.header.iter().position(|c| *c == column).expect("column is part of the header");
        &self.fields[i]
    }

    pub fn parse<T: FromStr>(&self, column: &'static str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.str(column);
        raw.parse().map_err(|e: T::Err| self.error(Some(column), format!("cannot parse {raw:?}: {e}")))
    }

    pub fn error(&self, column: Option<&str>, message: impl Into<String>) -> CliError {
        CliError::Input {
            file: self.file.to_path_buf(),
            line: self.line,
            column: column.map(str::to_string),
            message: message.into(),
        }
    }
}

/// Reads `path` and hands each row to `f`.
pub fn read_table<T>(
    path: &Path,
    header: &'static [&'static str],
    mut f: impl FnMut(&Row<'_>) -> Result<T>,
) -> Result<Vec<(u64, T)>> {
    let file = File::open(path).map_err(CliError::io(path))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let input_err = |line: u64, column: Option<String>, message: String| CliError::Input {
        file: path.to_path_buf(),
        line,
        column,
        message,
    };

    let found = reader.headers().map_err(|e| input_err(1, None, e.to_string()))?.clone();
    let mut order = Vec::with_capacity(header.len());
    for expected in header {
        let hits: Vec<usize> = found.iter().enumerate().filter(|(_, c)| c == expected).map(|(i, _)| i).collect();
        match hits.as_slice() {
            [i] => order.push(*i),
            [] => return Err(input_err(1, Some((*expected).into()), "missing column".into())),
            _ => return Err(input_err(1, Some((*expected).into()), "repeated column".into())),
        }
    }
    if let Some(unknown) = found.iter().find(|c| !header.contains(c)) {
        return Err(input_err(1, Some(unknown.into()), "unknown column".into()));
    }

    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            input_err(line, None, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let row = Row {
            file: path,
            line,
            header,
            fields: order.iter().map(|&i| record.get(i).unwrap_or_default().to_string()).collect(),
        };
        out.push((line, f(&row)?));
    }
    Ok(out)
}

fn unzip<T>(rows: Vec<(u64, T)>) -> (Vec<u64>, Vec<T>) {
    rows.into_iter().unzip()
}

/// Paths of the three corpus tables.
#[derive(Debug, Clone)]
pub struct CorpusPaths {
    pub vmaf: PathBuf,
    /// Absent for stages that only need VMAF scores and truths.
    pub ratings: Option<PathBuf>,
    pub truth: Option<PathBuf>,
}

impl CorpusPaths {
    pub fn in_dir(dir: &Path) -> Self {
        let truth = dir.join("jnd_truth.csv");
        CorpusPaths {
            vmaf: dir.join("vmaf_scores.csv"),
            ratings: Some(dir.join("dcr_ratings.csv")),
            truth: truth.exists().then_some(truth),
        }
    }
}

pub fn read_stimuli(path: &Path) -> Result<(Vec<u64>, Vec<Stimulus>)> {
    let rows = read_table(path, &VMAF_HEADER, |r| {
        Ok(Stimulus {
            content_id: r.str("content_id").into(),
            recipe: Recipe {
                recipe_id: r.str("recipe_id").into(),
                resolution: r.str("resolution").to_string().into(),
                level: r.parse("level")?,
            },
            vmaf: r.parse("vmaf")?,
        })
    })?;
    Ok(unzip(rows))
}

pub fn read_ratings(path: &Path) -> Result<(Vec<u64>, Vec<DcrRating>)> {
    let rows = read_table(path, &RATINGS_HEADER, |r| {
        let score: i64 = r.parse("score")?;
        if !(1..=5).contains(&score) {
            return Err(r.error(Some("score"), format!("score must be an integer in 1..=5, got {score}")));
        }
        Ok(DcrRating {
            content_id: r.str("content_id").into(),
            recipe_id: r.str("recipe_id").into(),
            observer_id: r.str("observer_id").into(),
            score: score as u8,
        })
    })?;
    Ok(unzip(rows))
}

pub fn read_truths(path: &Path) -> Result<(Vec<u64>, Vec<JndTruth>)> {
    let rows = read_table(path, &TRUTH_HEADER, |r| {
        Ok(JndTruth {
            content_id: r.str("content_id").into(),
            anchor_recipe_id: r.str("anchor_recipe_id").into(),
            direction: r.parse::<Direction>("direction")?,
            jnd_recipe_id: r.str("jnd_recipe_id").into(),
            order: r.parse("order")?,
        })
    })?;
    Ok(unzip(rows))
}

/// Loads and validates a corpus. Invariant violations are reported against
/// the file and line of the offending row.
pub fn load_corpus(paths: &CorpusPaths) -> Result<Corpus> {
    let (vmaf_lines, stimuli) = read_stimuli(&paths.vmaf)?;
    let (rating_lines, ratings) = match &paths.ratings {
        Some(p) => read_ratings(p)?,
        None => (Vec::new(), Vec::new()),
    };
    let (truth_lines, truths) = match &paths.truth {
        Some(p) => read_truths(p)?,
        None => (Vec::new(), Vec::new()),
    };
    let corpus = Corpus::new(stimuli, ratings, truths).map_err(|e| match e {
        jndmap_core::Error::InvalidRow { table, row, column, message } => {
            let (file, lines) = match table {
                Table::Vmaf => (paths.vmaf.clone(), &vmaf_lines),
                Table::Ratings => (paths.ratings.clone().unwrap_or_default(), &rating_lines),
                Table::Truth => (paths.truth.clone().unwrap_or_default(), &truth_lines),
            };
            CliError::Input { file, line: lines[row], column: column.map(str::to_string), message }
        }
        other => CliError::Stage { stage: "load", source: other },
    })?;
    log::info!(
        "loaded {} stimuli, {} ratings, {} truths",
        corpus.stimuli().len(),
        corpus.ratings().len(),
        corpus.truths().len()
    );
    Ok(corpus)
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(CliError::io(path))?;
    Ok(csv::WriterBuilder::new().from_writer(file))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |e| CliError::Format { path: path.to_path_buf(), message: e.to_string() }
}

/// Writes rows of already formatted fields under `header`.
pub fn write_rows<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let mut w = writer(path)?;
    w.write_record(header).map_err(csv_err(path))?;
    for row in rows {
        w.write_record(row).map_err(csv_err(path))?;
    }
    w.flush().map_err(CliError::io(path))
}

pub fn write_corpus(dir: &Path, corpus: &Corpus) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    let vmaf = dir.join("vmaf_scores.csv");
    write_rows(
        &vmaf,
        &VMAF_HEADER,
        corpus.stimuli().iter().map(|s| {
            [
                s.content_id.clone(),
                s.recipe.recipe_id.clone(),
                s.recipe.resolution.to_string(),
                s.recipe.level.to_string(),
                s.vmaf.to_string(),
            ]
        }),
    )?;
    let ratings = dir.join("dcr_ratings.csv");
    write_rows(
        &ratings,
        &RATINGS_HEADER,
        corpus
            .ratings()
            .iter()
            .map(|r| [r.content_id.clone(), r.recipe_id.clone(), r.observer_id.clone(), r.score.to_string()]),
    )?;
    let truth = dir.join("jnd_truth.csv");
    write_rows(
        &truth,
        &TRUTH_HEADER,
        corpus.truths().iter().map(|t| {
            [
                t.content_id.clone(),
                t.anchor_recipe_id.clone(),
                t.direction.to_string(),
                t.jnd_recipe_id.clone(),
                t.order.to_string(),
            ]
        }),
    )?;
    Ok(vec![vmaf, ratings, truth])
}

pub fn write_pairs(path: &Path, pairs: &[RatedPair]) -> Result<()> {
    write_rows(
        path,
        &PAIRS_HEADER,
        pairs.iter().map(|p| {
            [
                p.content_id.clone(),
                p.recipe_x.clone(),
                p.recipe_y.clone(),
                p.delta_obj.to_string(),
                p.p_value.to_string(),
                u8::from(p.sig).to_string(),
            ]
        }),
    )
}

pub fn read_pairs(path: &Path) -> Result<Vec<RatedPair>> {
    let rows = read_table(path, &PAIRS_HEADER, |r| {
        let sig = match r.str("sig") {
            "0" => false,
            "1" => true,
            other => return Err(r.error(Some("sig"), format!("sig must be 0 or 1, got {other:?}"))),
        };
        Ok(RatedPair {
            content_id: r.str("content_id").into(),
            recipe_x: r.str("recipe_x").into(),
            recipe_y: r.str("recipe_y").into(),
            delta_obj: r.parse("delta_obj")?,
            sig,
            p_value: r.parse("p_value")?,
        })
    })?;
    Ok(rows.into_iter().map(|(_, p)| p).collect())
}

pub fn write_codist(path: &Path, codists: &[CoDistribution]) -> Result<()> {
    let mut rows = Vec::new();
    for cd in codists {
        for b in 0..cd.bins() {
            rows.push([
                cd.range_id.clone(),
                cd.bin_edges[b].to_string(),
                cd.bin_edges[b + 1].to_string(),
                cd.f_dif[b].to_string(),
                cd.f_sim[b].to_string(),
                cd.p_sd(b).map(|p| p.to_string()).unwrap_or_default(),
            ]);
        }
    }
    write_rows(path, &CODIST_HEADER, rows)
}

/// `(range_id, model)` pairs in the order they should appear.
pub fn write_curve_samples<'a>(
    path: &Path,
    models: impl IntoIterator<Item = (&'a str, &'a MappingFunction)>,
) -> Result<()> {
    let mut rows = Vec::new();
    for (range_id, mf) in models {
        for x in jndmap_core::fit::grid(mf.domain, CURVE_SAMPLES) {
            rows.push([
                range_id.to_string(),
                mf.family.to_string(),
                u8::from(mf.fit_report.valid).to_string(),
                x.to_string(),
                mf.eval(x).to_string(),
            ]);
        }
    }
    write_rows(path, &CURVE_HEADER, rows)
}

/// One curve of `curve_samples.csv`, as read back for rendering.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSamples {
    pub range_id: String,
    pub family: String,
    pub valid: bool,
    pub points: Vec<(f64, f64)>,
}

pub fn read_curve_samples(path: &Path) -> Result<Vec<CurveSamples>> {
    let rows = read_table(path, &CURVE_HEADER, |r| {
        Ok((
            r.str("range_id").to_string(),
            r.str("family").to_string(),
            r.str("valid") == "1",
            r.parse::<f64>("delta_obj")?,
            r.parse::<f64>("p_sd")?,
        ))
    })?;
    let mut curves: Vec<CurveSamples> = Vec::new();
    for (_, (range_id, family, valid, x, y)) in rows {
        match curves.last_mut() {
            Some(c) if c.range_id == range_id && c.family == family => c.points.push((x, y)),
            _ => curves.push(CurveSamples { range_id, family, valid, points: vec![(x, y)] }),
        }
    }
    Ok(curves)
}

/// Fields of one `predictions.csv` row; a bare VMAF anchor has empty
/// content and recipe fields.
pub fn prediction_row(p: &JndPrediction) -> [String; 9] {
    [
        p.anchor.content_id.clone(),
        p.anchor.recipe.recipe_id.clone(),
        p.direction.to_string(),
        p.range_id.clone(),
        p.family.to_string(),
        p.threshold.to_string(),
        p.delta_obj_jnd.to_string(),
        p.target_vmaf.to_string(),
        u8::from(p.clamped).to_string(),
    ]
}

pub fn write_predictions(path: &Path, predictions: &[JndPrediction]) -> Result<()> {
    write_rows(path, &PREDICTIONS_HEADER, predictions.iter().map(prediction_row))
}

/// Writes `value` as pretty JSON with a trailing newline.
pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Format { path: path.to_path_buf(), message: e.to_string() })?;
    text.push('\n');
    let mut f = File::create(path).map_err(CliError::io(path))?;
    f.write_all(text.as_bytes()).map_err(CliError::io(path))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
    serde_json::from_str(&text).map_err(|e| CliError::Input {
        file: path.to_path_buf(),
        line: e.line() as u64,
        column: None,
        message: e.to_string(),
    })
}
