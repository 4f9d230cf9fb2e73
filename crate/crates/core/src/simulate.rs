//! Synthetic corpora with known ground truth.
//!
//! Each content gets a ladder of stimuli with strictly decreasing VMAF
//! (rung 0 is the best one). Virtual observers rate every rung on the DCR
//! scale against the best rung:
//!
//! ```text
//! score = clamp(round(5 − min(0.08 · (vmaf_top − vmaf), 4) + N(0, σ²)), 1, 5)
//! ```
//!
//! Virtual experts run a bisection JND search from both ladder extremes.
//! Expert `e` detects a difference of Δ VMAF with probability
//! 1 / (1 + exp(−slope · (Δ − jnd_e))), where `jnd_e` is `jnd_scale` plus a
//! per-expert Gaussian jitter. The emitted truth is the rung at the median
//! of the experts' answers.
//!
//! # Random numbers
//!
//! All randomness comes from [`CounterRng`], a counter-based SplitMix64:
//! draw `i` (starting at 1) of the stream with key `k` is
//! `mix64(k + i · 0x9E3779B97F4A7C15)` (wrapping arithmetic), where `mix64`
//! is the SplitMix64 finaliser. The key of stream `s` under seed `seed` is
//! `mix64(seed ^ mix64(s))`. Content `c` owns streams `8c` (ladder),
//! `8c + 1` (ratings) and `8c + 2` (JND search). Uniforms take the top 53
//! bits; normals use one Box–Muller cosine branch per draw.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::corpus::{Corpus, DcrRating, Direction, JndTruth, Recipe, Resolution, Stimulus};
use crate::{Error, Result};

/// DCR score drop per VMAF point below the best rung.
pub const IMPAIRMENT_SLOPE: f64 = 0.08;
/// Largest possible drop (score 5 → 1).
pub const IMPAIRMENT_CAP: f64 = 4.0;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-based SplitMix64 stream; see the module docs for the exact
/// definition.
#[derive(Debug, Clone)]
pub struct CounterRng {
    key: u64,
    counter: u64,
}

impl CounterRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        CounterRng { key: mix64(seed ^ mix64(stream)), counter: 0 }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN)))
    }

    /// Uniform in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Standard normal.
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * core::f64::consts::PI * u2)
    }
}

/// How the per-content ladders are obtained.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case", tag = "kind"))]
pub enum Ladder {
    /// `rungs` stimuli below a best rung drawn from
    /// `[top_vmaf_min, top_vmaf_max]`; each content draws a base step from
    /// `[step_min, step_max]`, and each rung scales it by a factor in
    /// [0.8, 1.2].
    Generated { rungs: usize, top_vmaf_min: f64, top_vmaf_max: f64, step_min: f64, step_max: f64 },
    /// The same explicit `(recipe_id, vmaf)` ladder for every content.
    Explicit { rungs: Vec<(String, f64)> },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct SimSpec {
    pub n_contents: usize,
    pub ladder: Ladder,
    pub observer_count: usize,
    /// ΔVMAF at which an expert detects a difference half of the time.
    pub jnd_scale: f64,
    pub detection_slope: f64,
    /// Standard deviation of the per-expert jitter of `jnd_scale`.
    pub jnd_jitter_sd: f64,
    /// Experts running the JND search per content.
    pub jnd_observers: usize,
    pub rating_noise_sd: f64,
    /// The last `outlier_observers` observers rate on an inverted scale.
    pub outlier_observers: usize,
    pub seed: u64,
}

impl Default for SimSpec {
    fn default() -> Self {
        SimSpec {
            n_contents: 30,
            ladder: Ladder::Generated { rungs: 12, top_vmaf_min: 97.0, top_vmaf_max: 100.0, step_min: 2.5, step_max: 4.5 },
            observer_count: 24,
            jnd_scale: 6.0,
            detection_slope: 2.0,
            jnd_jitter_sd: 1.0,
            jnd_observers: 5,
            rating_noise_sd: 0.45,
            outlier_observers: 0,
            seed: 20_220_101,
        }
    }
}

impl SimSpec {
    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(format!("simulation spec: {m}")));
        if self.n_contents == 0 || self.observer_count < 2 || self.jnd_observers == 0 {
            return bad("contents, observers (≥ 2) and experts must be positive");
        }
        if self.outlier_observers >= self.observer_count {
            return bad("outlier observers must be fewer than observers");
        }
        if !(self.jnd_scale > 0.0 && self.detection_slope > 0.0) {
            return bad("jnd_scale and detection_slope must be positive");
        }
        if !(self.rating_noise_sd >= 0.0 && self.jnd_jitter_sd >= 0.0) {
            return bad("noise levels must be non-negative");
        }
        match &self.ladder {
            Ladder::Generated { rungs, top_vmaf_min, top_vmaf_max, step_min, step_max } => {
                if *rungs < 3 {
                    return bad("ladder shorter than 3 rungs (bisection undefined)");
                }
                if !(0.0 < *top_vmaf_min && top_vmaf_min <= top_vmaf_max && *top_vmaf_max <= 100.0) {
                    return bad("top VMAF bounds must satisfy 0 < min ≤ max ≤ 100");
                }
                if !(0.0 < *step_min && step_min <= step_max) {
                    return bad("step bounds must satisfy 0 < min ≤ max");
                }
                if top_vmaf_min - 1.2 * step_max * (*rungs - 1) as f64 <= 0.0 {
                    return bad("ladder would fall below VMAF 0");
                }
            }
            Ladder::Explicit { rungs } => {
                if rungs.len() < 3 {
                    return bad("ladder shorter than 3 rungs (bisection undefined)");
                }
                if rungs.windows(2).any(|w| w[1].1 >= w[0].1) {
                    return bad("ladder VMAFs must be strictly decreasing");
                }
                if rungs.iter().any(|r| !(0.0..=100.0).contains(&r.1)) {
                    return bad("ladder VMAFs must lie in [0, 100]");
                }
            }
        }
        Ok(())
    }
}

/// Bisection over the ladder positions beyond `anchor`.
///
/// Keeps `(lo, hi]` bracketing the first detected position (the anchor is
/// never detected, the position past the ladder end always is) and queries
/// the midpoint until the bracket is one wide. Returns the ladder index and
/// the number of detector queries; [`Error::BeyondLadder`] if the detector
/// never fired.
pub fn bisection_search(
    ladder_len: usize,
    anchor: usize,
    direction: Direction,
    mut detector: impl FnMut(usize) -> bool,
) -> Result<(usize, u32)> {
    if anchor >= ladder_len {
        return Err(Error::InvalidParameter(format!("anchor {anchor} outside a ladder of {ladder_len}")));
    }
    // ladder index of the k-th rung away from the anchor
    let (available, index): (usize, &dyn Fn(usize) -> usize) = match direction {
        Direction::Dec => (ladder_len - 1 - anchor, &|k| anchor + k),
        Direction::Inc => (anchor, &|k| anchor - k),
    };
    let (mut lo, mut hi) = (0usize, available + 1);
    let mut queries = 0;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        queries += 1;
        if detector(index(mid)) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    if hi > available {
        return Err(Error::BeyondLadder);
    }
    Ok((index(hi), queries))
}

/// One simulated JND search outcome.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SimTruth {
    pub content_id: String,
    pub direction: Direction,
    /// Median of the experts' jittered detection thresholds (Δ*).
    pub latent_delta: f64,
    pub expert_thresholds: Vec<f64>,
    /// Ladder index found by each expert; `None` when the detector never fired.
    pub expert_indices: Vec<Option<usize>>,
    /// ΔVMAF between the anchor and the emitted JND rung.
    pub emitted_delta: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub corpus: Corpus,
    /// Δ* per (content, direction).
    pub true_deltas: BTreeMap<(String, Direction), f64>,
    pub truths: Vec<SimTruth>,
}

fn median_lower(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[(v.len() - 1) / 2]
}

fn ladder_for(spec: &SimSpec, content: usize) -> Vec<(String, f64)> {
    match &spec.ladder {
        Ladder::Explicit { rungs } => rungs.clone(),
        Ladder::Generated { rungs, top_vmaf_min, top_vmaf_max, step_min, step_max } => {
            let mut rng = CounterRng::new(spec.seed, 8 * content as u64);
            let top = rng.uniform_in(*top_vmaf_min, *top_vmaf_max);
            let base = rng.uniform_in(*step_min, *step_max);
            let mut v = top;
            (0..*rungs)
                .map(|i| {
                    if i > 0 {
                        v -= base * rng.uniform_in(0.8, 1.2);
                    }
                    (format!("r{i:02}"), v)
                })
                .collect()
        }
    }
}

/// DCR score of one observer for a stimulus `delta_top` VMAF below the best rung.
pub fn dcr_score(delta_top: f64, noise: f64, inverted: bool) -> u8 {
    let impairment = (IMPAIRMENT_SLOPE * delta_top).min(IMPAIRMENT_CAP);
    let score = libm::round(5.0 - impairment + noise).clamp(1.0, 5.0) as u8;
    if inverted {
        6 - score
    } else {
        score
    }
}

pub fn simulate_corpus(spec: &SimSpec) -> Result<SimOutput> {
    spec.validate()?;
    let width = (spec.n_contents.max(1) as f64).log10_floor() + 1;
    let obs_width = (spec.observer_count as f64).log10_floor() + 1;
    let observers: Vec<String> = (1..=spec.observer_count).map(|o| format!("o{o:0obs_width$}")).collect();

    let mut stimuli = Vec::new();
    let mut ratings = Vec::new();
    let mut jnd_truths = Vec::new();
    let mut true_deltas = BTreeMap::new();
    let mut sim_truths = Vec::new();

    for c in 0..spec.n_contents {
        let content_id = format!("c{c:0width$}");
        let ladder = ladder_for(spec, c);
        let top = ladder[0].1;
        for (level, (recipe_id, vmaf)) in ladder.iter().enumerate() {
            stimuli.push(Stimulus {
                content_id: content_id.clone(),
                recipe: Recipe { recipe_id: recipe_id.clone(), resolution: Resolution::P1080, level: level as i64 },
                vmaf: *vmaf,
            });
        }

        let mut rng = CounterRng::new(spec.seed, 8 * c as u64 + 1);
        for (recipe_id, vmaf) in &ladder {
            for (o, obs) in observers.iter().enumerate() {
                let noise = spec.rating_noise_sd * rng.normal();
                let inverted = o >= spec.observer_count - spec.outlier_observers;
                ratings.push(DcrRating {
                    content_id: content_id.clone(),
                    recipe_id: recipe_id.clone(),
                    observer_id: obs.clone(),
                    score: dcr_score(top - vmaf, noise, inverted),
                });
            }
        }

        let mut rng = CounterRng::new(spec.seed, 8 * c as u64 + 2);
        for direction in [Direction::Dec, Direction::Inc] {
            let anchor = match direction {
                Direction::Dec => 0,
                Direction::Inc => ladder.len() - 1,
            };
            let mut thresholds = Vec::with_capacity(spec.jnd_observers);
            let mut indices = Vec::with_capacity(spec.jnd_observers);
            for _ in 0..spec.jnd_observers {
                let jnd_e = spec.jnd_scale + spec.jnd_jitter_sd * rng.normal();
                thresholds.push(jnd_e);
                let found = bisection_search(ladder.len(), anchor, direction, |k| {
                    let delta = libm::fabs(ladder[anchor].1 - ladder[k].1);
                    let p = crate::fit::Family::Logistic2.value(&[spec.detection_slope, jnd_e], delta);
                    rng.uniform() < p
                });
                indices.push(found.ok().map(|(i, _)| i));
            }
            let latent = median_lower(thresholds.clone());
            true_deltas.insert((content_id.clone(), direction), latent);

            let mut hits: Vec<usize> = indices.iter().flatten().copied().collect();
            hits.sort_by_key(|&i| libm::fabs(ladder[anchor].1 - ladder[i].1).to_bits());
            let emitted = (!hits.is_empty()).then(|| hits[(hits.len() - 1) / 2]);
            if let Some(j) = emitted {
                jnd_truths.push(JndTruth {
                    content_id: content_id.clone(),
                    anchor_recipe_id: ladder[anchor].0.clone(),
                    direction,
                    jnd_recipe_id: ladder[j].0.clone(),
                    order: 1,
                });
            }
            sim_truths.push(SimTruth {
                content_id: content_id.clone(),
                direction,
                latent_delta: latent,
                expert_thresholds: thresholds,
                expert_indices: indices,
                emitted_delta: emitted.map(|j| libm::fabs(ladder[anchor].1 - ladder[j].1)),
            });
        }
    }

    let corpus = Corpus::new(stimuli, ratings, jnd_truths)?;
    Ok(SimOutput { corpus, true_deltas, truths: sim_truths })
}

trait Log10Floor {
    fn log10_floor(self) -> usize;
}

impl Log10Floor for f64 {
    fn log10_floor(self) -> usize {
        libm::floor(libm::log10(self.max(1.0))) as usize
    }
}
