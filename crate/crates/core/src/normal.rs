//! Standard normal density, distribution function and Mills ratio.
//!
//! Everything that can underflow is also offered in log form. The Mills ratio
//! `R(x) = Φ(-x)/φ(x)` switches from `erfc` to a continued fraction in the
//! upper tail, where the quotient of two tiny numbers loses precision.

use std::f64::consts::{PI, SQRT_2};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const CF_SWITCH: f64 = 3.0;

/// Standard normal density `φ(x)`.
pub fn pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// `ln φ(x)`.
pub fn ln_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

/// Standard normal distribution function `Φ(x)`.
pub fn cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// `ln Φ(x)`, accurate deep into the lower tail.
pub fn ln_cdf(x: f64) -> f64 {
    if x < -CF_SWITCH {
        ln_pdf(x) + ln_mills(-x)
    } else {
        (0.5 * libm::erfc(-x / SQRT_2)).ln()
    }
}

/// Mills ratio `R(x) = Φ(-x)/φ(x)`.
pub fn mills(x: f64) -> f64 {
    ln_mills(x).exp()
}

/// `ln R(x)`.
pub fn ln_mills(x: f64) -> f64 {
    if x >= CF_SWITCH {
        mills_cf(x).ln()
    } else {
        (0.5 * libm::erfc(x / SQRT_2)).ln() + 0.5 * x * x + LN_SQRT_2PI
    }
}

/// `ln(Φ(b) - Φ(a))` for `a <= b`, avoiding cancellation in either tail.
pub fn ln_cdf_diff(a: f64, b: f64) -> f64 {
    if a >= b {
        return f64::NEG_INFINITY;
    }
    if a > 0.0 {
        // Φ(b) - Φ(a) = Φ(-a) - Φ(-b)
        let hi = ln_cdf(-a);
        let lo = ln_cdf(-b);
        hi + (-(lo - hi).exp()).ln_1p()
    } else {
        let hi = ln_cdf(b);
        let lo = ln_cdf(a);
        hi + (-(lo - hi).exp()).ln_1p()
    }
}

/// `ln(exp(a) + exp(b) + ...)` over a slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|&x| (x - m).exp()).sum::<f64>().ln()
}

// Modified Lentz evaluation of R(x) = 1/(x + 1/(x + 2/(x + 3/(x + ...)))).
fn mills_cf(x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for n in 1..2000 {
        let a = n as f64;
        d = x + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = x + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    1.0 / f
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mills_branches_agree_near_switch() {
        let below = (0.5 * libm::erfc(CF_SWITCH / SQRT_2)) / pdf(CF_SWITCH);
        let cf = mills_cf(CF_SWITCH);
        assert!((below - cf).abs() / cf < 1e-13, "{below} vs {cf}");
    }

    #[test]
    fn mills_at_zero() {
        assert!((mills(0.0) - 0.5 / pdf(0.0)).abs() < 1e-15);
    }

    #[test]
    fn mills_upper_tail_asymptote() {
        let x: f64 = 40.0;
        let asym = 1.0 / x * (1.0 - 1.0 / (x * x) + 3.0 / x.powi(4));
        assert!((mills(x) - asym).abs() / asym < 1e-8);
    }

    #[test]
    fn ln_cdf_deep_tail_is_finite() {
        let v = ln_cdf(-60.0);
        assert!(v.is_finite());
        // leading term -x^2/2 - ln x - ln sqrt(2 pi)
        let lead = -1800.0 - 60f64.ln() - LN_SQRT_2PI;
        assert!((v - lead).abs() < 1e-3);
    }

    #[test]
    fn cdf_diff_matches_direct() {
        let d = ln_cdf_diff(-0.3, 1.1).exp();
        assert!((d - (cdf(1.1) - cdf(-0.3))).abs() < 1e-15);
        let d = ln_cdf_diff(5.0, 6.0).exp();
        assert!((d - (cdf(-5.0) - cdf(-6.0))).abs() / d < 1e-12);
    }
}
