//! Normal distribution helpers.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;

/// Standard normal cumulative distribution function.
///
/// Evaluated as `erfc(-x/√2)/2`, so the lower tail keeps full relative precision down to
/// underflow (around `x = -38`).
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Scaled complementary error function `exp(x²)·erfc(x)` for `x ≥ 0`.
pub fn erfcx(x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if x < 4.0 {
        return (x * x).exp() * libm::erfc(x);
    }
    // Continued fraction, evaluated bottom-up; 60 levels are ample for x >= 4.
    let mut frac = 0.0;
    for k in (1..=60).rev() {
        frac = (k as f64 * 0.5) / (x + frac);
    }
    FRAC_1_SQRT_PI / (x + frac)
}

/// `ln N(x)` without underflow for very negative `x`.
pub fn ln_norm_cdf(x: f64) -> f64 {
    if x > -5.0 {
        norm_cdf(x).ln()
    } else {
        let u = -x * FRAC_1_SQRT_2;
        (0.5 * erfcx(u)).ln() - u * u
    }
}
