//! Closed forms of the four mapping-function families.

use core::fmt;
use core::str::FromStr;

use alloc::format;
use libm::exp;

use crate::Error;

/// Parametric family of a mapping function ΔVMAF → P_SD.
///
/// | family      | P(Δ)                                              |
/// |-------------|---------------------------------------------------|
/// | `logistic5` | β1·(0.5 − 1/(1+exp(β2(Δ−β3)))) + β4·Δ + β5        |
/// | `cubic4`    | β1 + β2·Δ + β3·Δ² + β4·Δ³                         |
/// | `logistic2` | 1/(1+exp(−β1(Δ−β2)))                              |
/// | `glm`       | 1/(1+exp(−(β0+β1·Δ)))                             |
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Family {
    Logistic5,
    Cubic4,
    Logistic2,
    Glm,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::Logistic5, Family::Cubic4, Family::Logistic2, Family::Glm];

    pub fn n_params(self) -> usize {
        match self {
            Family::Logistic5 => 5,
            Family::Cubic4 => 4,
            Family::Logistic2 | Family::Glm => 2,
        }
    }

    /// Machine name used in files and on the command line.
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Logistic5 => "logistic5",
            Family::Cubic4 => "cubic4",
            Family::Logistic2 => "logistic2",
            Family::Glm => "glm",
        }
    }

    /// Column header used in result tables.
    pub fn label(self) -> &'static str {
        match self {
            Family::Logistic5 => "5-para",
            Family::Cubic4 => "4-para",
            Family::Logistic2 => "2-para",
            Family::Glm => "GLM",
        }
    }

    /// Unclamped model value.
    pub fn value(self, p: &[f64], x: f64) -> f64 {
        match self {
            Family::Logistic5 => p[0] * (0.5 - 1.0 / (1.0 + exp(p[1] * (x - p[2])))) + p[3] * x + p[4],
            Family::Cubic4 => p[0] + x * (p[1] + x * (p[2] + x * p[3])),
            Family::Logistic2 => sigmoid(p[0] * (x - p[1])),
            Family::Glm => sigmoid(p[0] + p[1] * x),
        }
    }

    /// dP/dΔ of the unclamped model.
    pub fn slope(self, p: &[f64], x: f64) -> f64 {
        match self {
            Family::Logistic5 => {
                let s = sigmoid(p[1] * (x - p[2]));
                p[0] * p[1] * s * (1.0 - s) + p[3]
            }
            Family::Cubic4 => p[1] + x * (2.0 * p[2] + 3.0 * x * p[3]),
            Family::Logistic2 => {
                let s = sigmoid(p[0] * (x - p[1]));
                p[0] * s * (1.0 - s)
            }
            Family::Glm => {
                let s = sigmoid(p[0] + p[1] * x);
                p[1] * s * (1.0 - s)
            }
        }
    }

    /// ∂P/∂β written into `out`.
    pub fn param_grad(self, p: &[f64], x: f64, out: &mut [f64]) {
        match self {
            Family::Logistic5 => {
                // s = 1/(1+e^u), u = β2(x−β3); ∂s/∂u = −s(1−s)
                let s = 1.0 / (1.0 + exp(p[1] * (x - p[2])));
                let ds = s * (1.0 - s);
                out[0] = 0.5 - s;
                out[1] = p[0] * ds * (x - p[2]);
                out[2] = -p[0] * ds * p[1];
                out[3] = x;
                out[4] = 1.0;
            }
            Family::Cubic4 => {
                out[0] = 1.0;
                out[1] = x;
                out[2] = x * x;
                out[3] = x * x * x;
            }
            Family::Logistic2 => {
                let s = sigmoid(p[0] * (x - p[1]));
                let ds = s * (1.0 - s);
                out[0] = ds * (x - p[1]);
                out[1] = -ds * p[0];
            }
            Family::Glm => {
                let s = sigmoid(p[0] + p[1] * x);
                let ds = s * (1.0 - s);
                out[0] = ds;
                out[1] = ds * x;
            }
        }
    }

    /// Maps parameters onto the representative of their equivalence class.
    /// The 5-parameter logistic is invariant under (β1, β2) → (−β1, −β2).
    pub fn canonicalize(self, p: &mut [f64]) {
        if self == Family::Logistic5 && p[1] < 0.0 {
            p[0] = -p[0];
            p[1] = -p[1];
        }
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + exp(-z))
    } else {
        let e = exp(z);
        e / (1.0 + e)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "logistic5" | "5-para" => Ok(Family::Logistic5),
            "cubic4" | "4-para" => Ok(Family::Cubic4),
            "logistic2" | "2-para" => Ok(Family::Logistic2),
            "glm" | "GLM" => Ok(Family::Glm),
            other => Err(Error::InvalidParameter(format!("unknown family {other:?}"))),
        }
    }
}
