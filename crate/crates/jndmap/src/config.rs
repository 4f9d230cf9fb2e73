//! Run configuration.
//!
//! A JSON object; every field is optional and unknown fields are rejected.
//! Values are resolved in this order, later ones winning:
//!
//! 1. built-in defaults ([`RunConfig::default`]),
//! 2. the `--config` file,
//! 3. `JNDMAP_SEED` for `seed`,
//! 4. command-line flags.
//!
//! ```json
//! {
//!   "alpha": 0.05,
//!   "test": "welch",
//!   "screening": "bt500",
//!   "decomposition": { "strategy": "balanced", "k": 5, "balance_by": "stimuli" },
//!   "bin_width": 2.0,
//!   "families": ["logistic5", "cubic4", "logistic2", "glm"],
//!   "thresholds": [0.75, 0.8, 0.85, 0.9, 0.95],
//!   "glm_mode": "pairwise",
//!   "chain_orders": true,
//!   "seed": 0
//! }
//! ```
//!
//! `decomposition` may instead be `{"strategy": "fixed_width", "width": 10}`
//! or `{"strategy": "explicit", "bounds": [30, 79, 86, 90, 95, 100]}`.

use jndmap_core::evaluate::DEFAULT_THRESHOLDS;
use jndmap_core::screening::ScreeningMethod;
use jndmap_core::{BalanceBy, Family, GlmMode, TestKind};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const SEED_ENV: &str = "JNDMAP_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case", deny_unknown_fields)]
pub enum DecompositionConfig {
    Balanced {
        k: usize,
        #[serde(default)]
        balance_by: BalanceBy,
    },
    FixedWidth {
        width: f64,
    },
    Explicit {
        bounds: Vec<f64>,
    },
}

impl Default for DecompositionConfig {
    fn default() -> Self {
        DecompositionConfig::Balanced { k: 5, balance_by: BalanceBy::Stimuli }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub alpha: f64,
    pub test: TestKind,
    pub screening: ScreeningMethod,
    pub decomposition: DecompositionConfig,
    pub bin_width: f64,
    pub families: Vec<Family>,
    pub thresholds: Vec<f64>,
    pub glm_mode: GlmMode,
    /// Predict 2nd and higher JNDs by chaining 1st-order predictions.
    pub chain_orders: bool,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            alpha: 0.05,
            test: TestKind::Welch,
            screening: ScreeningMethod::Bt500,
            decomposition: DecompositionConfig::default(),
            bin_width: 2.0,
            families: Family::ALL.to_vec(),
            thresholds: DEFAULT_THRESHOLDS.to_vec(),
            glm_mode: GlmMode::Pairwise,
            chain_orders: true,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Usage(format!("invalid configuration: {m}")));
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if !(self.bin_width > 0.0 && self.bin_width.is_finite()) {
            return bad(format!("bin_width must be positive, got {}", self.bin_width));
        }
        if self.families.is_empty() {
            return bad("families is empty".into());
        }
        if self.thresholds.is_empty() {
            return bad("thresholds is empty".into());
        }
        if let Some(t) = self.thresholds.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
            return bad(format!("thresholds must lie in (0, 1), got {t}"));
        }
        match &self.decomposition {
            DecompositionConfig::Balanced { k, .. } if *k < 2 => bad("k must be at least 2".into()),
            DecompositionConfig::FixedWidth { width } if !(*width > 0.0) => {
                bad(format!("width must be positive, got {width}"))
            }
            DecompositionConfig::Explicit { bounds } if bounds.len() < 2 => {
                bad("explicit bounds need at least two values".into())
            }
            _ => Ok(()),
        }
    }

    /// Stable serialisation used for the manifest hash.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("configuration serialises")
    }
}

/// Reads `JNDMAP_SEED`, if set.
pub fn seed_from_env() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Usage(format!("{SEED_ENV} must be an unsigned integer, got {v:?}"))),
        Err(_) => Ok(None),
    }
}
