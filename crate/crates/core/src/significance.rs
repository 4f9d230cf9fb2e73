//! Pair formation and significance labelling.
//!
//! Every unordered pair of stimuli of one content is tested on the two DCR
//! score vectors; pairs with p < α are labelled significantly different.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::corpus::Corpus;
use crate::stats;
use crate::{Error, Result};

/// Which two-sample test labels a pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum TestKind {
    /// Unequal-variance, unpaired.
    #[default]
    Welch,
    /// Pooled-variance, unpaired.
    Student,
    /// Paired on the observers who rated both stimuli.
    Paired,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    pub p: f64,
    pub sig: bool,
}

fn check_len(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "t-test needs at least 2 values per sample, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

/// Both samples are constant: the difference is either certain or absent.
fn degenerate(diff: f64, df: f64, alpha: f64) -> TTest {
    if diff == 0.0 {
        TTest { t: 0.0, df, p: 1.0, sig: 1.0 < alpha }
    } else {
        TTest { t: f64::INFINITY.copysign(diff), df, p: 0.0, sig: 0.0 < alpha }
    }
}

fn finish(t: f64, df: f64, alpha: f64) -> TTest {
    let p = stats::student_t_two_sided(t, df);
    TTest { t, df, p, sig: p < alpha }
}

/// Welch's unequal-variance t-test, two-sided.
pub fn welch_t_test(a: &[f64], b: &[f64], alpha: f64) -> Result<TTest> {
    check_len(a, b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let diff = stats::mean(a) - stats::mean(b);
    let qa = stats::sample_variance(a) / na;
    let qb = stats::sample_variance(b) / nb;
    let se2 = qa + qb;
    if se2 == 0.0 {
        return Ok(degenerate(diff, na + nb - 2.0, alpha));
    }
    let df = se2 * se2 / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
    Ok(finish(diff / libm::sqrt(se2), df, alpha))
}

/// Student's pooled-variance t-test, two-sided.
pub fn student_t_test(a: &[f64], b: &[f64], alpha: f64) -> Result<TTest> {
    check_len(a, b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let diff = stats::mean(a) - stats::mean(b);
    let df = na + nb - 2.0;
    let pooled = ((na - 1.0) * stats::sample_variance(a) + (nb - 1.0) * stats::sample_variance(b)) / df;
    if pooled == 0.0 {
        return Ok(degenerate(diff, df, alpha));
    }
    Ok(finish(diff / libm::sqrt(pooled * (1.0 / na + 1.0 / nb)), df, alpha))
}

/// Paired t-test on element-wise differences.
pub fn paired_t_test(a: &[f64], b: &[f64], alpha: f64) -> Result<TTest> {
    check_len(a, b)?;
    if a.len() != b.len() {
        return Err(Error::InvalidParameter(format!(
            "paired t-test needs equal lengths, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = d.len() as f64;
    let md = stats::mean(&d);
    let var = stats::sample_variance(&d);
    if var == 0.0 {
        return Ok(degenerate(md, n - 1.0, alpha));
    }
    Ok(finish(md / libm::sqrt(var / n), n - 1.0, alpha))
}

/// Identity of an unordered pair, with `recipe_x < recipe_y`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PairKey {
    pub content_id: String,
    pub recipe_x: String,
    pub recipe_y: String,
}

impl PairKey {
    /// Canonicalises the recipe order.
    pub fn new(content_id: &str, a: &str, b: &str) -> Self {
        let (x, y) = if a <= b { (a, b) } else { (b, a) };
        PairKey { content_id: content_id.into(), recipe_x: x.into(), recipe_y: y.into() }
    }
}

impl fmt::Display for PairKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.content_id, self.recipe_x, self.recipe_y)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RatedPair {
    pub content_id: String,
    pub recipe_x: String,
    pub recipe_y: String,
    /// |vmaf(x) − vmaf(y)|
    pub delta_obj: f64,
    pub sig: bool,
    pub p_value: f64,
}

impl RatedPair {
    pub fn key(&self) -> PairKey {
        PairKey {
            content_id: self.content_id.clone(),
            recipe_x: self.recipe_x.clone(),
            recipe_y: self.recipe_y.clone(),
        }
    }
}

/// All N·(N−1)/2 pairs of one content in canonical order.
pub fn form_pairs(corpus: &Corpus, content_id: &str) -> Result<Vec<(String, String)>> {
    let stimuli = corpus.stimuli_of(content_id);
    if stimuli.is_empty() {
        return Err(Error::UnknownContent(content_id.into()));
    }
    if stimuli.len() < 2 {
        return Err(Error::InsufficientData(format!("content {content_id} has a single stimulus")));
    }
    let mut out = Vec::with_capacity(stimuli.len() * (stimuli.len() - 1) / 2);
    for (i, x) in stimuli.iter().enumerate() {
        for y in &stimuli[i + 1..] {
            out.push((x.recipe_id().into(), y.recipe_id().into()));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ClassifyOptions {
    pub alpha: f64,
    pub test: TestKind,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions { alpha: 0.05, test: TestKind::Welch }
    }
}

fn test_pair(corpus: &Corpus, content: &str, x: &str, y: &str, opts: &ClassifyOptions) -> Result<TTest> {
    let to_f64 = |v: Vec<u8>| v.into_iter().map(f64::from).collect::<Vec<f64>>();
    match opts.test {
        TestKind::Welch => welch_t_test(
            &to_f64(corpus.ratings_vector(content, x)?),
            &to_f64(corpus.ratings_vector(content, y)?),
            opts.alpha,
        ),
        TestKind::Student => student_t_test(
            &to_f64(corpus.ratings_vector(content, x)?),
            &to_f64(corpus.ratings_vector(content, y)?),
            opts.alpha,
        ),
        TestKind::Paired => {
            let rx = corpus.ratings_of(content, x)?;
            let ry = corpus.ratings_of(content, y)?;
            let (mut a, mut b) = (Vec::new(), Vec::new());
            let (mut i, mut j) = (0, 0);
            while i < rx.len() && j < ry.len() {
                match rx[i].0.cmp(ry[j].0) {
                    core::cmp::Ordering::Less => i += 1,
                    core::cmp::Ordering::Greater => j += 1,
                    core::cmp::Ordering::Equal => {
                        a.push(f64::from(rx[i].1));
                        b.push(f64::from(ry[j].1));
                        i += 1;
                        j += 1;
                    }
                }
            }
            paired_t_test(&a, &b, opts.alpha)
        }
    }
}

/// Labels every pair of one content.
pub fn classify_content(corpus: &Corpus, content_id: &str, opts: &ClassifyOptions) -> Result<Vec<RatedPair>> {
    form_pairs(corpus, content_id)?
        .into_iter()
        .map(|(x, y)| {
            let vx = corpus.stimulus(content_id, &x)?.vmaf;
            let vy = corpus.stimulus(content_id, &y)?.vmaf;
            let test = test_pair(corpus, content_id, &x, &y, opts)
                .map_err(|e| e.context(format!("pair {content_id}/{x}/{y}")))?;
            Ok(RatedPair {
                content_id: content_id.into(),
                recipe_x: x,
                recipe_y: y,
                delta_obj: libm::fabs(vx - vy),
                sig: test.sig,
                p_value: test.p,
            })
        })
        .collect()
}

/// Labels every pair of every content, contents in lexicographic order.
pub fn classify_pairs(corpus: &Corpus, opts: &ClassifyOptions) -> Result<Vec<RatedPair>> {
    let mut out = Vec::new();
    for content in corpus.contents() {
        out.extend(classify_content(corpus, content, opts)?);
    }
    Ok(out)
}
