//! Descriptive statistics and the Student-t distribution.

use libm::{exp, fabs, lgamma, log};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance (n − 1 denominator). Zero for fewer than two values.
pub fn sample_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Central moment of order `k` with population (n) denominator.
pub fn central_moment(xs: &[f64], k: i32) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| libm::pow(x - m, k as f64)).sum::<f64>() / xs.len() as f64
}

/// Kurtosis coefficient β2 = m4 / m2², population estimator.
///
/// Returns `None` when the sample has no spread.
pub fn kurtosis(xs: &[f64]) -> Option<f64> {
    let m2 = central_moment(xs, 2);
    if m2 <= 0.0 {
        return None;
    }
    Some(central_moment(xs, 4) / (m2 * m2))
}

const CF_EPS: f64 = 1e-16;
const CF_TINY: f64 = 1e-300;
const CF_MAX_ITER: usize = 1000;

/// Continued fraction for the incomplete beta (modified Lentz).
fn beta_cf(x: f64, a: f64, b: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if fabs(d) < CF_TINY {
        d = CF_TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if fabs(d) < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if fabs(c) < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if fabs(d) < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if fabs(c) < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if fabs(del - 1.0) < CF_EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta function I_x(a, b).
pub fn inc_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = lgamma(a + b) - lgamma(a) - lgamma(b) + a * log(x) + b * log(1.0 - x);
    if x < (a + 1.0) / (a + b + 2.0) {
        exp(ln_front) * beta_cf(x, a, b) / a
    } else {
        1.0 - exp(ln_front) * beta_cf(1.0 - x, b, a) / b
    }
}

/// CDF of Student's t-distribution with `df` degrees of freedom.
pub fn student_t_cdf(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return if t > 0.0 { 1.0 } else { 0.0 };
    }
    let tail = 0.5 * inc_beta(df / (df + t * t), 0.5 * df, 0.5);
    if t > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Two-sided p-value P(|T| ≥ |t|).
pub fn student_t_two_sided(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    inc_beta(df / (df + t * t), 0.5 * df, 0.5).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn inc_beta_closed_forms() {
        // I_x(1, 1) = x, I_x(a, 1) = x^a, I_x(1, b) = 1 - (1-x)^b
        for &x in &[0.01, 0.2, 0.5, 0.77, 0.999] {
            assert_abs_diff_eq!(inc_beta(x, 1.0, 1.0), x, epsilon = 1e-14);
            assert_abs_diff_eq!(inc_beta(x, 3.5, 1.0), libm::pow(x, 3.5), epsilon = 1e-14);
            assert_abs_diff_eq!(
                inc_beta(x, 1.0, 2.5),
                1.0 - libm::pow(1.0 - x, 2.5),
                epsilon = 1e-14
            );
        }
    }

    #[test]
    fn t_cdf_against_table() {
        // Cauchy (df = 1) has a closed form.
        for &t in &[-3.0, -0.5, 0.0, 1.0, 7.0] {
            let expected = 0.5 + libm::atan(t) / core::f64::consts::PI;
            assert_abs_diff_eq!(student_t_cdf(t, 1.0), expected, epsilon = 1e-14);
        }
        // df = 2: F(t) = 1/2 + t / (2 sqrt(2 + t^2))
        for &t in &[-2.0, 0.3, 4.0] {
            let expected = 0.5 + t / (2.0 * libm::sqrt(2.0 + t * t));
            assert_abs_diff_eq!(student_t_cdf(t, 2.0), expected, epsilon = 1e-14);
        }
        // Two-sided 5% critical value for df = 10 is 2.228139
        assert_abs_diff_eq!(student_t_two_sided(2.228_138_851_986, 10.0), 0.05, epsilon = 1e-9);
    }

    #[test]
    fn kurtosis_of_two_point_distribution_is_one() {
        assert_abs_diff_eq!(kurtosis(&[1.0, 5.0, 1.0, 5.0]).unwrap(), 1.0, epsilon = 1e-15);
        assert!(kurtosis(&[3.0, 3.0]).is_none());
    }
}
