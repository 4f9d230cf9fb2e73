//! Stimuli, DCR ratings and JND ground truth.
//!
//! A [`Corpus`] is validated once at construction and immutable afterwards.
//! Row indices in errors are zero-based positions in the input vectors; the
//! IO layer translates them to file lines.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(into = "String", from = "String"))]
pub enum Resolution {
    P540,
    P720,
    P1080,
    P2160,
    Other(String),
}

impl fmt::Display for Resolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Resolution::P540 => f.write_str("540p"),
            Resolution::P720 => f.write_str("720p"),
            Resolution::P1080 => f.write_str("1080p"),
            Resolution::P2160 => f.write_str("2160p"),
            Resolution::Other(s) => f.write_str(s),
        }
    }
}

impl From<String> for Resolution {
    fn from(s: String) -> Self {
        match s.as_str() {
            "540p" => Resolution::P540,
            "720p" => Resolution::P720,
            "1080p" => Resolution::P1080,
            "2160p" => Resolution::P2160,
            _ => Resolution::Other(s),
        }
    }
}

impl From<Resolution> for String {
    fn from(r: Resolution) -> Self {
        r.to_string()
    }
}

/// One encoding configuration of a content.
///
/// `level` (QP, CRF, ...) is carried for reporting only; nothing in the
/// pipeline reads it.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Recipe {
    pub recipe_id: String,
    pub resolution: Resolution,
    pub level: i64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Stimulus {
    pub content_id: String,
    pub recipe: Recipe,
    pub vmaf: f64,
}

impl Stimulus {
    pub fn recipe_id(&self) -> &str {
        &self.recipe.recipe_id
    }
}

/// A single observer's DCR opinion score (five-level scale).
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DcrRating {
    pub content_id: String,
    pub recipe_id: String,
    pub observer_id: String,
    pub score: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Direction {
    Inc,
    Dec,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Inc => "inc",
            Direction::Dec => "dec",
        }
    }

    /// +1 for increasing quality, −1 for decreasing.
    pub fn sign(self) -> f64 {
        match self {
            Direction::Inc => 1.0,
            Direction::Dec => -1.0,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inc" => Ok(Direction::Inc),
            "dec" => Ok(Direction::Dec),
            other => Err(Error::InvalidParameter(format!("direction must be inc or dec, got {other:?}"))),
        }
    }
}

/// A ground-truth JND: starting from `anchor_recipe_id`, the `order`-th
/// noticeable step in `direction` is `jnd_recipe_id`.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct JndTruth {
    pub content_id: String,
    pub anchor_recipe_id: String,
    pub direction: Direction,
    pub jnd_recipe_id: String,
    pub order: u32,
}

/// Which input table a row belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Table {
    Vmaf,
    Ratings,
    Truth,
}

impl fmt::Display for Table {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Table::Vmaf => "vmaf_scores",
            Table::Ratings => "dcr_ratings",
            Table::Truth => "jnd_truth",
        })
    }
}

type StimulusKey = (String, String);

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    stimuli: Vec<Stimulus>,
    ratings: Vec<DcrRating>,
    truths: Vec<JndTruth>,
    stimulus_index: BTreeMap<StimulusKey, usize>,
    rating_index: BTreeMap<StimulusKey, Vec<usize>>,
}

fn row_err(table: Table, row: usize, column: Option<&'static str>, message: String) -> Error {
    Error::InvalidRow { table, row, column, message }
}

impl Corpus {
    /// Validates every invariant and builds the lookup indices.
    pub fn new(stimuli: Vec<Stimulus>, ratings: Vec<DcrRating>, truths: Vec<JndTruth>) -> Result<Self> {
        let mut stimulus_index = BTreeMap::new();
        for (row, s) in stimuli.iter().enumerate() {
            if !s.vmaf.is_finite() || !(0.0..=100.0).contains(&s.vmaf) {
                return Err(row_err(Table::Vmaf, row, Some("vmaf"), format!("vmaf out of range: {}", s.vmaf)));
            }
            let key = (s.content_id.clone(), s.recipe.recipe_id.clone());
            if stimulus_index.insert(key, row).is_some() {
                return Err(row_err(
                    Table::Vmaf,
                    row,
                    Some("recipe_id"),
                    format!("duplicate stimulus {}/{}", s.content_id, s.recipe.recipe_id),
                ));
            }
        }

        let mut rating_index: BTreeMap<StimulusKey, Vec<usize>> = BTreeMap::new();
        let mut seen = BTreeSet::new();
        for (row, r) in ratings.iter().enumerate() {
            if !(1..=5).contains(&r.score) {
                return Err(row_err(
                    Table::Ratings,
                    row,
                    Some("score"),
                    format!("score must be an integer in 1..=5, got {}", r.score),
                ));
            }
            let key = (r.content_id.clone(), r.recipe_id.clone());
            if !stimulus_index.contains_key(&key) {
                return Err(row_err(
                    Table::Ratings,
                    row,
                    Some("recipe_id"),
                    format!("rating refers to unknown stimulus {}/{}", r.content_id, r.recipe_id),
                ));
            }
            if !seen.insert((r.content_id.as_str(), r.recipe_id.as_str(), r.observer_id.as_str())) {
                return Err(row_err(
                    Table::Ratings,
                    row,
                    Some("observer_id"),
                    format!(
                        "duplicate rating by observer {} for {}/{}",
                        r.observer_id, r.content_id, r.recipe_id
                    ),
                ));
            }
            rating_index.entry(key).or_default().push(row);
        }

        for (row, t) in truths.iter().enumerate() {
            if t.order < 1 {
                return Err(row_err(Table::Truth, row, Some("order"), "order must be at least 1".into()));
            }
            let lookup = |recipe: &str, column| {
                stimulus_index
                    .get(&(t.content_id.clone(), recipe.to_string()))
                    .map(|&i| stimuli[i].vmaf)
                    .ok_or_else(|| {
                        row_err(Table::Truth, row, Some(column), format!("unknown stimulus {}/{recipe}", t.content_id))
                    })
            };
            let anchor = lookup(&t.anchor_recipe_id, "anchor_recipe_id")?;
            let jnd = lookup(&t.jnd_recipe_id, "jnd_recipe_id")?;
            let consistent = match t.direction {
                Direction::Dec => jnd <= anchor,
                Direction::Inc => jnd >= anchor,
            };
            if !consistent {
                return Err(row_err(
                    Table::Truth,
                    row,
                    Some("direction"),
                    format!("{} JND has vmaf {jnd} but anchor has {anchor}", t.direction),
                ));
            }
        }

        Ok(Corpus { stimuli, ratings, truths, stimulus_index, rating_index })
    }

    pub fn stimuli(&self) -> &[Stimulus] {
        &self.stimuli
    }

    pub fn ratings(&self) -> &[DcrRating] {
        &self.ratings
    }

    pub fn truths(&self) -> &[JndTruth] {
        &self.truths
    }

    pub fn stimulus(&self, content_id: &str, recipe_id: &str) -> Result<&Stimulus> {
        self.stimulus_index
            .get(&(content_id.to_string(), recipe_id.to_string()))
            .map(|&i| &self.stimuli[i])
            .ok_or_else(|| Error::UnknownStimulus { content_id: content_id.into(), recipe_id: recipe_id.into() })
    }

    /// Distinct content ids in lexicographic order.
    pub fn contents(&self) -> Vec<&str> {
        let set: BTreeSet<&str> = self.stimuli.iter().map(|s| s.content_id.as_str()).collect();
        set.into_iter().collect()
    }

    /// Stimuli of one content, ordered by recipe id.
    pub fn stimuli_of(&self, content_id: &str) -> Vec<&Stimulus> {
        self.stimulus_index
            .range((content_id.to_string(), String::new())..)
            .take_while(|((c, _), _)| c == content_id)
            .map(|(_, &i)| &self.stimuli[i])
            .collect()
    }

    /// Distinct observer ids in lexicographic order.
    pub fn observers(&self) -> Vec<&str> {
        let set: BTreeSet<&str> = self.ratings.iter().map(|r| r.observer_id.as_str()).collect();
        set.into_iter().collect()
    }

    /// `(observer_id, score)` for one stimulus, ordered by observer id.
    pub fn ratings_of(&self, content_id: &str, recipe_id: &str) -> Result<Vec<(&str, u8)>> {
        self.stimulus(content_id, recipe_id)?;
        let mut out: Vec<(&str, u8)> = self
            .rating_index
            .get(&(content_id.to_string(), recipe_id.to_string()))
            .map(|rows| {
                rows.iter()
                    .map(|&i| (self.ratings[i].observer_id.as_str(), self.ratings[i].score))
                    .collect()
            })
            .unwrap_or_default();
        out.sort_by(|a, b| a.0.cmp(b.0));
        Ok(out)
    }

    /// Opinion scores for one stimulus ordered by observer id.
    pub fn ratings_vector(&self, content_id: &str, recipe_id: &str) -> Result<Vec<u8>> {
        let scores: Vec<u8> = self.ratings_of(content_id, recipe_id)?.into_iter().map(|(_, s)| s).collect();
        if scores.is_empty() {
            return Err(Error::InsufficientData(format!("no ratings for {content_id}/{recipe_id}")));
        }
        Ok(scores)
    }

    /// A corpus with the same stimuli and truths but a new rating set.
    pub fn with_ratings(&self, ratings: Vec<DcrRating>) -> Result<Self> {
        Corpus::new(self.stimuli.clone(), ratings, self.truths.clone())
    }

    /// A corpus with the same stimuli and ratings but a new truth set.
    pub fn with_truths(&self, truths: Vec<JndTruth>) -> Result<Self> {
        Corpus::new(self.stimuli.clone(), self.ratings.clone(), truths)
    }
}
