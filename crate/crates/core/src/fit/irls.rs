//! Logistic GLM P(Δ) = 1/(1+exp(−(β0+β1Δ))) by iteratively reweighted least
//! squares on binomial observations.

use alloc::format;
use alloc::vec::Vec;

use super::family::sigmoid;
use crate::linalg;
use crate::{Error, Result};

/// Slope magnitude imposed when the two classes are perfectly separated.
pub const SEPARATION_SLOPE_CAP: f64 = 50.0;
pub const MAX_IRLS_ITER: u32 = 100;

/// Binomial observations: success fraction `y` out of weight `n` at `x`.
#[derive(Debug, Clone, Default)]
pub(crate) struct Binomial {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub n: Vec<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct GlmFit {
    pub beta: [f64; 2],
    pub deviance: f64,
    pub gradient_norm: f64,
    pub iterations: u32,
    pub separation: bool,
}

fn xlogy_ratio(y: f64, mu: f64) -> f64 {
    if y <= 0.0 {
        0.0
    } else {
        y * libm::log(y / mu)
    }
}

impl Binomial {
    pub fn total_weight(&self) -> f64 {
        self.n.iter().sum()
    }

    fn mu(&self, beta: &[f64; 2], i: usize) -> f64 {
        sigmoid(beta[0] + beta[1] * self.x[i])
    }

    pub fn deviance(&self, beta: &[f64; 2]) -> f64 {
        (0..self.x.len())
            .map(|i| {
                let mu = self.mu(beta, i).clamp(1e-300, 1.0 - 1e-16);
                let y = self.y[i];
                2.0 * self.n[i] * (xlogy_ratio(y, mu) + xlogy_ratio(1.0 - y, 1.0 - mu))
            })
            .sum()
    }

    /// ∇D = −2 Σ n (y − μ) (1, x)
    pub fn deviance_gradient(&self, beta: &[f64; 2]) -> [f64; 2] {
        let mut g = [0.0; 2];
        for i in 0..self.x.len() {
            let e = self.n[i] * (self.y[i] - self.mu(beta, i));
            g[0] -= 2.0 * e;
            g[1] -= 2.0 * e * self.x[i];
        }
        g
    }

    /// Increasing (`Some(true)`) or decreasing (`Some(false)`) perfect or
    /// quasi-complete separation of failures and successes along x.
    fn separation(&self) -> Option<bool> {
        let mut fail = (f64::INFINITY, f64::NEG_INFINITY);
        let mut succ = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..self.x.len() {
            if self.n[i] <= 0.0 {
                continue;
            }
            let x = self.x[i];
            if self.y[i] < 1.0 {
                fail = (fail.0.min(x), fail.1.max(x));
            }
            if self.y[i] > 0.0 {
                succ = (succ.0.min(x), succ.1.max(x));
            }
            if self.y[i] > 0.0 && self.y[i] < 1.0 {
                // a mixed observation can never be separated
                return None;
            }
        }
        if fail.1 <= succ.0 {
            Some(true)
        } else if succ.1 <= fail.0 {
            Some(false)
        } else {
            None
        }
    }

    /// Intercept maximising the likelihood for a fixed slope (the score is
    /// decreasing in β0, so plain bisection suffices).
    fn intercept_for_slope(&self, slope: f64) -> f64 {
        let score = |b0: f64| -> f64 {
            // y(1 − μ) − (1 − y)μ, written without the cancelling 1 − μ
            (0..self.x.len())
                .map(|i| {
                    let eta = b0 + slope * self.x[i];
                    self.n[i] * (self.y[i] * sigmoid(-eta) - (1.0 - self.y[i]) * sigmoid(eta))
                })
                .sum()
        };
        let (mut lo, mut hi) = (-1e6, 1e6);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if score(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

fn check_labels(obs: &Binomial) -> Result<()> {
    let total = obs.total_weight();
    if obs.x.len() < 2 || total <= 0.0 {
        return Err(Error::InsufficientData("GLM needs at least two weighted observations".into()));
    }
    let successes: f64 = obs.y.iter().zip(&obs.n).map(|(y, n)| y * n).sum();
    if successes <= 0.0 || successes >= total {
        let level = if successes <= 0.0 { 0 } else { 1 };
        return Err(Error::Fit(format!("all labels are {level}: the GLM is flat at {level} with no finite maximum")));
    }
    Ok(())
}

/// Maximum-likelihood fit by Newton/IRLS with step halving.
pub(crate) fn fit(obs: &Binomial) -> Result<GlmFit> {
    check_labels(obs)?;

    if let Some(increasing) = obs.separation() {
        let slope = if increasing { SEPARATION_SLOPE_CAP } else { -SEPARATION_SLOPE_CAP };
        let beta = [obs.intercept_for_slope(slope), slope];
        let g = obs.deviance_gradient(&beta);
        return Ok(GlmFit {
            beta,
            deviance: obs.deviance(&beta),
            gradient_norm: libm::hypot(g[0], g[1]),
            iterations: 0,
            separation: true,
        });
    }

    let total = obs.total_weight();
    let ybar = obs.y.iter().zip(&obs.n).map(|(y, n)| y * n).sum::<f64>() / total;
    let mut beta = [libm::log(ybar / (1.0 - ybar)), 0.0];
    let mut dev = obs.deviance(&beta);

    for iter in 1..=MAX_IRLS_ITER {
        // Newton step: (Xᵀ W X) δ = Xᵀ n (y − μ)
        let (mut h00, mut h01, mut h11, mut s0, mut s1) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for i in 0..obs.x.len() {
            let mu = obs.mu(&beta, i);
            let w = obs.n[i] * mu * (1.0 - mu);
            let x = obs.x[i];
            h00 += w;
            h01 += w * x;
            h11 += w * x * x;
            let e = obs.n[i] * (obs.y[i] - mu);
            s0 += e;
            s1 += e * x;
        }
        let step = linalg::solve(alloc::vec![h00, h01, h01, h11], alloc::vec![s0, s1])
            .ok_or_else(|| Error::Fit("singular IRLS system (all observations at one ΔVMAF?)".into()))?;

        let mut t = 1.0;
        let mut next = [beta[0] + step[0], beta[1] + step[1]];
        let mut next_dev = obs.deviance(&next);
        while !(next_dev <= dev * (1.0 + 1e-12) + 1e-300) && t > 1e-10 {
            t *= 0.5;
            next = [beta[0] + t * step[0], beta[1] + t * step[1]];
            next_dev = obs.deviance(&next);
        }
        let moved = libm::hypot(next[0] - beta[0], next[1] - beta[1]);
        beta = next;
        dev = next_dev;

        let g = obs.deviance_gradient(&beta);
        let gnorm = libm::hypot(g[0], g[1]);
        if moved <= 1e-13 * (1.0 + libm::hypot(beta[0], beta[1])) || gnorm <= 1e-12 {
            return Ok(GlmFit { beta, deviance: dev, gradient_norm: gnorm, iterations: iter, separation: false });
        }
    }
    Err(Error::Fit(format!(
        "IRLS did not converge in {MAX_IRLS_ITER} iterations (slope {:.3e}); the classes are close to separated",
        beta[1]
    )))
}

/// Minimises D(β)/Σn + λ Σ_g max(0, −dP/dΔ(x_g))² by damped Newton with a
/// finite-difference Hessian. Used only when the unconstrained fit decreases.
pub(crate) fn fit_penalized(obs: &Binomial, start: [f64; 2], grid: &[f64], lambda: f64) -> ([f64; 2], u32) {
    let total = obs.total_weight();
    let objective = |b: &[f64; 2]| -> f64 {
        let pen: f64 = grid
            .iter()
            .map(|&x| {
                let s = sigmoid(b[0] + b[1] * x);
                let slope = b[1] * s * (1.0 - s);
                if slope < 0.0 {
                    slope * slope
                } else {
                    0.0
                }
            })
            .sum();
        obs.deviance(b) / total + lambda * pen
    };
    let grad = |b: &[f64; 2]| -> [f64; 2] {
        let mut g = [0.0; 2];
        for (k, gk) in g.iter_mut().enumerate() {
            let h = 1e-6 * (1.0 + libm::fabs(b[k]));
            let (mut hi, mut lo) = (*b, *b);
            hi[k] += h;
            lo[k] -= h;
            *gk = (objective(&hi) - objective(&lo)) / (2.0 * h);
        }
        g
    };

    let mut b = start;
    let mut f = objective(&b);
    let mut damping = 1e-6;
    let mut iterations = 0;
    for _ in 0..200 {
        iterations += 1;
        let g = grad(&b);
        let mut hess = [0.0; 4];
        for k in 0..2 {
            let h = 1e-4 * (1.0 + libm::fabs(b[k]));
            let (mut hi, mut lo) = (b, b);
            hi[k] += h;
            lo[k] -= h;
            let (gh, gl) = (grad(&hi), grad(&lo));
            hess[k * 2] = (gh[0] - gl[0]) / (2.0 * h);
            hess[k * 2 + 1] = (gh[1] - gl[1]) / (2.0 * h);
        }
        let sym = 0.5 * (hess[1] + hess[2]);
        let mut accepted = false;
        while damping < 1e12 {
            let lhs = alloc::vec![hess[0] + damping, sym, sym, hess[3] + damping];
            if let Some(step) = linalg::solve(lhs, alloc::vec![-g[0], -g[1]]) {
                let cand = [b[0] + step[0], b[1] + step[1]];
                let fc = objective(&cand);
                if fc < f {
                    let gain = f - fc;
                    b = cand;
                    f = fc;
                    damping = (damping * 0.3).max(1e-12);
                    accepted = true;
                    if gain <= 1e-15 * (1.0 + f) {
                        return (b, iterations);
                    }
                    break;
                }
            }
            damping *= 10.0;
        }
        if !accepted {
            break;
        }
    }
    (b, iterations)
}
