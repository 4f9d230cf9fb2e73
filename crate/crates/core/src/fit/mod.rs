//! Fitting monotone mapping functions ΔVMAF → P_SD.
//!
//! The three point-wise families minimise the support-weighted squared error
//! over the P_SD points with Levenberg–Marquardt from eight deterministic
//! starts. The GLM maximises the binomial likelihood by IRLS, on pair-level
//! labels when available and on support-weighted points otherwise.
//!
//! Every fit is checked for monotonicity on a dense grid of its domain. A
//! failing fit is retried with a hinge penalty λ·Σ max(0, −dP/dΔ)² on that
//! grid (λ = 1000, doubled on each of up to three further retries); if none
//! passes, the fit is kept for reporting but marked invalid.

mod family;
pub(crate) mod irls;
mod lm;

use alloc::format;
use alloc::vec::Vec;

pub use family::Family;

use crate::codist::PsdPoint;
use crate::significance::RatedPair;
use crate::{Error, Result};
use irls::Binomial;

/// Number of grid points used by the monotonicity check.
pub const MONOTONE_GRID: usize = 1000;
/// Allowed drop between consecutive grid values.
pub const MONOTONE_TOL: f64 = 1e-9;

/// Data the GLM is fitted on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum GlmMode {
    /// Binary (ΔVMAF, sig) observations, one per pair.
    #[default]
    Pairwise,
    /// P_SD points weighted by their support.
    Points,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    /// Interval of ΔVMAF the function is defined on. Defaults to
    /// `[0, max observed Δ]`.
    pub domain: Option<(f64, f64)>,
    pub starts: usize,
    pub lambda: f64,
    pub penalty_retries: u32,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { domain: None, starts: 8, lambda: 1e3, penalty_retries: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FitReport {
    /// √(Σ w (P − y)²) for point families; binomial deviance for the GLM.
    pub residual_norm: f64,
    pub monotone: bool,
    pub iterations: u32,
    /// Penalised refits performed (0 when the plain fit was monotone).
    pub penalty_rounds: u32,
    /// Accepted for prediction.
    pub valid: bool,
    /// GLM only: classes perfectly separated, slope capped.
    pub separation: bool,
    /// GLM only: ‖∇ deviance‖ at the returned parameters.
    pub gradient_norm: Option<f64>,
    /// Index of the winning start for multi-start fits.
    pub start_index: Option<u32>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MappingFunction {
    pub family: Family,
    pub params: Vec<f64>,
    pub domain: (f64, f64),
    pub fit_report: FitReport,
}

impl MappingFunction {
    /// Model value at `delta` (clamped to the domain), clamped to [0, 1].
    pub fn eval(&self, delta: f64) -> f64 {
        self.eval_flagged(delta).0
    }

    /// As [`eval`](Self::eval), also reporting whether `delta` was outside
    /// the domain.
    pub fn eval_flagged(&self, delta: f64) -> (f64, bool) {
        let (lo, hi) = self.domain;
        let x = delta.clamp(lo, hi);
        let v = self.family.value(&self.params, x);
        let v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
        (v, x != delta)
    }

    /// Non-decreasing on a [`MONOTONE_GRID`]-point grid, within [`MONOTONE_TOL`].
    pub fn is_monotone(&self) -> bool {
        let grid = grid(self.domain, MONOTONE_GRID);
        grid.windows(2).all(|w| self.eval(w[1]) >= self.eval(w[0]) - MONOTONE_TOL)
    }
}

/// `evaluate_mf`: the mapping function at `delta_obj`, in [0, 1].
pub fn evaluate_mf(mf: &MappingFunction, delta_obj: f64) -> f64 {
    mf.eval(delta_obj)
}

/// `n` evenly spaced points covering `[lo, hi]` inclusive.
pub fn grid((lo, hi): (f64, f64), n: usize) -> Vec<f64> {
    if n < 2 {
        return alloc::vec![lo];
    }
    (0..n).map(|i| if i == n - 1 { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 }).collect()
}

struct PointProblem<'a> {
    family: Family,
    x: &'a [f64],
    y: &'a [f64],
    sqrt_w: Vec<f64>,
    penalty_grid: &'a [f64],
    sqrt_lambda: f64,
}

impl PointProblem<'_> {
    fn hinge(&self, p: &[f64], x: f64) -> f64 {
        self.sqrt_lambda * (-self.family.slope(p, x)).max(0.0)
    }
}

impl lm::LeastSquares for PointProblem<'_> {
    fn n_params(&self) -> usize {
        self.family.n_params()
    }

    fn residuals(&self, p: &[f64], r: &mut Vec<f64>) {
        r.clear();
        for i in 0..self.x.len() {
            r.push(self.sqrt_w[i] * (self.family.value(p, self.x[i]) - self.y[i]));
        }
        if self.sqrt_lambda > 0.0 {
            for &g in self.penalty_grid {
                r.push(self.hinge(p, g));
            }
        }
    }

    fn jacobian(&self, p: &[f64], jac: &mut Vec<f64>) {
        let n = self.n_params();
        jac.clear();
        let mut row = [0.0; 5];
        for i in 0..self.x.len() {
            self.family.param_grad(p, self.x[i], &mut row[..n]);
            jac.extend(row[..n].iter().map(|v| v * self.sqrt_w[i]));
        }
        if self.sqrt_lambda > 0.0 {
            let mut work = p.to_vec();
            for &g in self.penalty_grid {
                if self.hinge(p, g) == 0.0 {
                    jac.extend(core::iter::repeat_n(0.0, n));
                    continue;
                }
                for j in 0..n {
                    let h = 1e-7 * (1.0 + libm::fabs(p[j]));
                    work[j] = p[j] + h;
                    let up = -self.family.slope(&work, g);
                    work[j] = p[j] - h;
                    let down = -self.family.slope(&work, g);
                    work[j] = p[j];
                    jac.push(self.sqrt_lambda * (up - down) / (2.0 * h));
                }
            }
        }
    }
}

/// Deterministic starting points spanning plausible slopes and midpoints.
fn starts(family: Family, x: &[f64], y: &[f64], count: usize) -> Vec<Vec<f64>> {
    let xmin = x.iter().copied().fold(f64::INFINITY, f64::min);
    let xmax = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = (xmax - xmin).max(1e-6);
    let ymin = y.iter().copied().fold(f64::INFINITY, f64::min);
    let ymax = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ymean = y.iter().sum::<f64>() / y.len() as f64;
    (0..count)
        .map(|i| {
            let mid = xmin + span * (1 + 2 * (i % 4)) as f64 / 8.0;
            let slope = if i < 4 { 4.0 } else { 12.0 } / span;
            match family {
                Family::Logistic2 => alloc::vec![slope, mid],
                Family::Logistic5 => {
                    alloc::vec![(ymax - ymin).max(0.1), slope, mid, 0.0, 0.5 * (ymin + ymax)]
                }
                Family::Cubic4 => {
                    let k = (i as f64 - 3.5) / 3.5;
                    alloc::vec![ymean, k * (ymax - ymin) / span, 0.0, 0.0]
                }
                Family::Glm => alloc::vec![-slope * mid, slope],
            }
        })
        .collect()
}

fn fit_points(
    family: Family,
    points: &[PsdPoint],
    penalty_grid: &[f64],
    lambda: f64,
    n_starts: usize,
) -> (Vec<f64>, f64, u32, u32) {
    let x: Vec<f64> = points.iter().map(|p| p.delta_obj).collect();
    let y: Vec<f64> = points.iter().map(|p| p.p_sd).collect();
    let total: f64 = points.iter().map(|p| f64::from(p.support)).sum();
    let problem = PointProblem {
        family,
        x: &x,
        y: &y,
        sqrt_w: points.iter().map(|p| libm::sqrt(f64::from(p.support) / total)).collect(),
        penalty_grid,
        sqrt_lambda: libm::sqrt(lambda),
    };
    let mut best: Option<(Vec<f64>, f64, u32, u32)> = None;
    let mut total_iter = 0;
    for (i, start) in starts(family, &x, &y, n_starts).into_iter().enumerate() {
        let out = lm::minimize(&problem, &start);
        total_iter += out.iterations;
        let better = match &best {
            None => out.cost.is_finite(),
            Some((_, c, _, _)) => out.cost < *c * (1.0 - 1e-12),
        };
        if better {
            best = Some((out.params, out.cost, out.iterations, i as u32));
        }
    }
    let (mut params, _, _, start) = best.unwrap_or_else(|| (starts(family, &x, &y, 1).remove(0), f64::INFINITY, 0, 0));
    family.canonicalize(&mut params);
    // report the data residual only, without the penalty rows
    let wsse: f64 = points
        .iter()
        .map(|p| {
            let e = family.value(&params, p.delta_obj) - p.p_sd;
            f64::from(p.support) * e * e
        })
        .sum();
    (params, libm::sqrt(wsse), total_iter, start)
}

fn binomial_from(points: &[PsdPoint], pairs: Option<&[RatedPair]>) -> Binomial {
    let mut obs = Binomial::default();
    match pairs {
        Some(pairs) => {
            for p in pairs {
                obs.x.push(p.delta_obj);
                obs.y.push(if p.sig { 1.0 } else { 0.0 });
                obs.n.push(1.0);
            }
        }
        None => {
            for p in points {
                obs.x.push(p.delta_obj);
                obs.y.push(p.p_sd);
                obs.n.push(f64::from(p.support));
            }
        }
    }
    obs
}

fn default_domain(points: &[PsdPoint], pairs: Option<&[RatedPair]>) -> (f64, f64) {
    let max_x = match pairs {
        Some(pairs) => pairs.iter().map(|p| p.delta_obj).fold(0.0, f64::max),
        None => points.iter().map(|p| p.delta_obj).fold(0.0, f64::max),
    };
    (0.0, max_x)
}

/// Fits one family to the P_SD points of a range.
///
/// For [`Family::Glm`], `pairs_for_glm` switches to pair-level binary
/// observations. A fit that stays non-monotone after the penalty retries is
/// returned with `fit_report.valid == false`.
pub fn fit_mapping(
    points: &[PsdPoint],
    family: Family,
    pairs_for_glm: Option<&[RatedPair]>,
    opts: &FitOptions,
) -> Result<MappingFunction> {
    let pairs = if family == Family::Glm { pairs_for_glm } else { None };
    let needed = family.n_params().max(4);
    if pairs.is_none() && points.len() < needed {
        return Err(Error::InsufficientData(format!(
            "{family} needs at least {needed} P_SD points, got {}",
            points.len()
        )));
    }
    let domain = opts.domain.unwrap_or_else(|| default_domain(points, pairs));
    if !(domain.0.is_finite() && domain.1.is_finite() && domain.0 < domain.1) {
        return Err(Error::InvalidParameter(format!("degenerate fit domain {domain:?}")));
    }
    let penalty_grid = grid(domain, MONOTONE_GRID);

    let mut mf = if family == Family::Glm {
        let obs = binomial_from(points, pairs);
        let fit = irls::fit(&obs)?;
        MappingFunction {
            family,
            params: fit.beta.to_vec(),
            domain,
            fit_report: FitReport {
                residual_norm: fit.deviance,
                iterations: fit.iterations,
                separation: fit.separation,
                gradient_norm: Some(fit.gradient_norm),
                ..FitReport::default()
            },
        }
    } else {
        let (params, residual_norm, iterations, start) = fit_points(family, points, &[], 0.0, opts.starts);
        MappingFunction {
            family,
            params,
            domain,
            fit_report: FitReport { residual_norm, iterations, start_index: Some(start), ..FitReport::default() },
        }
    };

    mf.fit_report.monotone = mf.is_monotone();
    if mf.fit_report.monotone {
        mf.fit_report.valid = true;
        return Ok(mf);
    }

    let mut lambda = opts.lambda;
    for round in 1..=opts.penalty_retries + 1 {
        let candidate = if family == Family::Glm {
            let obs = binomial_from(points, pairs);
            let start = [mf.params[0], mf.params[1]];
            let (beta, iterations) = irls::fit_penalized(&obs, start, &penalty_grid, lambda);
            let g = obs.deviance_gradient(&beta);
            MappingFunction {
                family,
                params: beta.to_vec(),
                domain,
                fit_report: FitReport {
                    residual_norm: obs.deviance(&beta),
                    iterations: mf.fit_report.iterations + iterations,
                    gradient_norm: Some(libm::hypot(g[0], g[1])),
                    ..FitReport::default()
                },
            }
        } else {
            let (params, residual_norm, iterations, start) =
                fit_points(family, points, &penalty_grid, lambda, opts.starts);
            MappingFunction {
                family,
                params,
                domain,
                fit_report: FitReport {
                    residual_norm,
                    iterations: mf.fit_report.iterations + iterations,
                    start_index: Some(start),
                    ..FitReport::default()
                },
            }
        };
        mf.fit_report.penalty_rounds = round;
        mf.fit_report.iterations = candidate.fit_report.iterations;
        if candidate.is_monotone() {
            let mut accepted = candidate;
            accepted.fit_report.penalty_rounds = round;
            accepted.fit_report.monotone = true;
            accepted.fit_report.valid = true;
            return Ok(accepted);
        }
        lambda *= 2.0;
    }
    mf.fit_report.valid = false;
    Ok(mf)
}
