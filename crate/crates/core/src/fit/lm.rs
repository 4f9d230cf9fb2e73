//! Levenberg–Marquardt for small dense least-squares problems.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg;

/// A residual vector r(β) ∈ ℝ^m with its Jacobian.
pub(crate) trait LeastSquares {
    fn n_params(&self) -> usize;
    /// Fills `r` (cleared first) with the residuals at `p`.
    fn residuals(&self, p: &[f64], r: &mut Vec<f64>);
    /// Fills `jac` (cleared first) with the row-major m × n Jacobian at `p`.
    fn jacobian(&self, p: &[f64], jac: &mut Vec<f64>);
}

#[derive(Debug, Clone)]
pub(crate) struct LmOutcome {
    pub params: Vec<f64>,
    /// ½‖r‖²
    pub cost: f64,
    pub iterations: u32,
}

pub(crate) const MAX_ITER: u32 = 2000;

fn half_sq(r: &[f64]) -> f64 {
    0.5 * r.iter().map(|v| v * v).sum::<f64>()
}

/// Minimises ½‖r(β)‖² from `start` with Marquardt scaling and Nielsen's
/// damping update.
pub(crate) fn minimize(problem: &impl LeastSquares, start: &[f64]) -> LmOutcome {
    let n = problem.n_params();
    let mut p = start.to_vec();
    let mut r = Vec::new();
    let mut jac = Vec::new();
    problem.residuals(&p, &mut r);
    let mut cost = half_sq(&r);
    if !cost.is_finite() {
        return LmOutcome { params: p, cost: f64::INFINITY, iterations: 0 };
    }

    let mut mu = -1.0;
    let mut nu = 2.0;
    let mut trial = Vec::new();
    let mut r_trial = Vec::new();
    let mut iterations = 0;
    let mut fresh = true;
    let (mut jtj, mut g) = (vec![0.0; n * n], vec![0.0; n]);

    while iterations < MAX_ITER {
        iterations += 1;
        if fresh {
            problem.jacobian(&p, &mut jac);
            let m = r.len();
            jtj.iter_mut().for_each(|v| *v = 0.0);
            g.iter_mut().for_each(|v| *v = 0.0);
            for i in 0..m {
                let row = &jac[i * n..(i + 1) * n];
                if r[i] == 0.0 && row.iter().all(|&v| v == 0.0) {
                    continue;
                }
                for a in 0..n {
                    g[a] += row[a] * r[i];
                    for b in a..n {
                        jtj[a * n + b] += row[a] * row[b];
                    }
                }
            }
            for a in 0..n {
                for b in 0..a {
                    jtj[a * n + b] = jtj[b * n + a];
                }
            }
            if g.iter().all(|v| libm::fabs(*v) <= 1e-300) {
                break;
            }
            if mu < 0.0 {
                let max_diag = (0..n).map(|a| jtj[a * n + a]).fold(0.0, f64::max);
                mu = 1e-3 * max_diag.max(1e-300);
            }
            fresh = false;
        }

        let max_diag = (0..n).map(|a| jtj[a * n + a]).fold(0.0, f64::max);
        let scale: Vec<f64> = (0..n).map(|a| jtj[a * n + a].max(1e-12 * max_diag).max(1e-300)).collect();
        let mut lhs = jtj.clone();
        for a in 0..n {
            lhs[a * n + a] += mu * scale[a];
        }
        let step = match linalg::solve(lhs, g.iter().map(|v| -v).collect()) {
            Some(s) => s,
            None => {
                mu *= nu;
                nu *= 2.0;
                if !mu.is_finite() {
                    break;
                }
                continue;
            }
        };

        let p_norm = libm::sqrt(p.iter().map(|v| v * v).sum::<f64>());
        let step_norm = libm::sqrt(step.iter().map(|v| v * v).sum::<f64>());
        if step_norm <= 1e-15 * (p_norm + 1e-15) {
            break;
        }

        trial.clear();
        trial.extend(p.iter().zip(&step).map(|(a, b)| a + b));
        problem.residuals(&trial, &mut r_trial);
        let new_cost = half_sq(&r_trial);
        let predicted: f64 = 0.5 * (0..n).map(|a| step[a] * (mu * scale[a] * step[a] - g[a])).sum::<f64>();
        let rho = if predicted > 0.0 { (cost - new_cost) / predicted } else { -1.0 };

        if new_cost.is_finite() && rho > 0.0 {
            let improvement = cost - new_cost;
            core::mem::swap(&mut p, &mut trial);
            core::mem::swap(&mut r, &mut r_trial);
            cost = new_cost;
            fresh = true;
            let t = 2.0 * rho - 1.0;
            mu *= (1.0 - t * t * t).max(1.0 / 3.0);
            nu = 2.0;
            if cost <= 1e-34 || improvement <= 1e-18 * cost && step_norm <= 1e-10 * (p_norm + 1e-10) {
                break;
            }
        } else {
            mu *= nu;
            nu *= 2.0;
            if !mu.is_finite() || mu > 1e300 {
                break;
            }
        }
    }
    LmOutcome { params: p, cost, iterations }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Rosenbrock;

    impl LeastSquares for Rosenbrock {
        fn n_params(&self) -> usize {
            2
        }
        fn residuals(&self, p: &[f64], r: &mut Vec<f64>) {
            r.clear();
            r.push(10.0 * (p[1] - p[0] * p[0]));
            r.push(1.0 - p[0]);
        }
        fn jacobian(&self, p: &[f64], jac: &mut Vec<f64>) {
            jac.clear();
            jac.extend([-20.0 * p[0], 10.0, -1.0, 0.0]);
        }
    }

    #[test]
    fn solves_rosenbrock() {
        let out = minimize(&Rosenbrock, &[-1.2, 1.0]);
        assert!((out.params[0] - 1.0).abs() < 1e-10, "{:?}", out);
        assert!((out.params[1] - 1.0).abs() < 1e-10);
        assert!(out.cost < 1e-20);
    }
}
