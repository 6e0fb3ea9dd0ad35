//! Scalar math shims and numerically careful summation.
//!
//! All transcendental calls go through `libm` so the crate behaves
//! identically with and without `std`.

pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

pub fn powi(x: f64, n: i32) -> f64 {
    libm::pow(x, n as f64)
}

pub fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

/// Standard logistic function, stable for large |x|.
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + exp(-x))
    } else {
        let e = exp(x);
        e / (1.0 + e)
    }
}

/// logit(p) = ln(p / (1 - p))
pub fn logit(p: f64) -> f64 {
    ln(p / (1.0 - p))
}

/// d/dx logistic(x) = logistic(x) (1 - logistic(x))
pub fn dlogistic(x: f64) -> f64 {
    let s = logistic(x);
    s * (1.0 - s)
}

/// Kahan compensated sum; gives a thread-count-independent total for a
/// fixed input order.
pub fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for v in values {
        let y = v - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}

/// log(sum(exp(x_i))) without overflow.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + ln(compensated_sum(xs.iter().map(|&x| exp(x - m))))
}

pub const LN_2PI: f64 = 1.837877066409345483560659472811;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logistic_basics() {
        assert_eq!(logistic(0.0), 0.5);
        assert!((logistic(2.0) + logistic(-2.0) - 1.0).abs() < 1e-15);
        assert!(logistic(-800.0) >= 0.0);
        assert!(logistic(800.0) <= 1.0);
    }

    #[test]
    fn logit_inverts_logistic() {
        for &p in &[1e-6, 0.3, 0.5, 0.9, 1.0 - 1e-6] {
            assert!((logistic(logit(p)) - p).abs() < 1e-12);
        }
    }

    #[test]
    fn logsumexp_matches_naive() {
        let xs = [0.3f64, -1.2, 2.5, 0.0];
        let naive = xs.iter().map(|&x| x.exp()).sum::<f64>().ln();
        assert!((logsumexp(&xs) - naive).abs() < 1e-14);
    }
}
