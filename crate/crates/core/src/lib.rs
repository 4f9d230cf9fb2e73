//! Map differences of objective video-quality scores (ΔVMAF) between two
//! encodings of one content to the probability that viewers perceive a just
//! noticeable difference (JND), and invert that mapping to predict JND
//! thresholds without reference to any particular codec.
//!
//! The pipeline runs in five stages:
//!
//! 1. [`screening`] drops outlier observers from DCR ratings (BT.500).
//! 2. [`significance`] forms every stimulus pair of a content and labels it
//!    significantly different or similar with a two-sample t-test.
//! 3. [`rangedecomp`] splits the VMAF axis into sub-quality ranges and assigns
//!    pairs to the ranges their endpoints fall in.
//! 4. [`codist`] builds the per-range co-distribution of ΔVMAF for different
//!    and similar pairs, and [`fit`] turns its P_SD points into a monotone
//!    mapping function.
//! 5. [`predict`] inverts the mapping at a threshold; [`evaluate`] scores the
//!    predictions against ground truth.
//!
//! [`simulate`] generates synthetic corpora with known ground truth.
//!
//! The crate is `no_std` (with `alloc`); file formats, orchestration and the
//! command line live in the `jndmap` crate.
#![cfg_attr(not(any(test, feature = "std")), no_std)]

extern crate alloc;

pub mod codist;
pub mod corpus;
mod error;
pub mod evaluate;
pub mod fit;
mod linalg;
pub mod predict;
pub mod rangedecomp;
pub mod screening;
pub mod significance;
pub mod simulate;
pub mod stats;

pub use codist::{build_codistribution, psd_points, CoDistribution, PsdPoint};
pub use corpus::{Corpus, DcrRating, Direction, JndTruth, Recipe, Resolution, Stimulus};
pub use error::{Error, Result};
pub use evaluate::{evaluate_grid, ground_truth_delta, EvalCell, EvalGrid, GridSpec};
pub use fit::{evaluate_mf, fit_mapping, Family, FitOptions, FitReport, GlmMode, MappingFunction};
pub use predict::{invert_at_threshold, predict_jnd, select_range, JndPrediction, ModelSet};
pub use rangedecomp::{
    assign_pairs, decompose_balanced, decompose_explicit, decompose_fixed, BalanceBy,
    Decomposition, Strategy, SubQualityRange,
};
pub use screening::{apply_screening, screen_bt500, ScreeningReport};
pub use significance::{classify_pairs, form_pairs, welch_t_test, PairKey, RatedPair, TestKind};
pub use simulate::{simulate_corpus, SimOutput, SimSpec};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
