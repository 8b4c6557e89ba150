//! Black-Scholes pricing and inversion (zero rates, no dividends), the small-time
//! Black-Scholes expansion, and the two-term implied-volatility expansion.
//!
//! Prices of out-of-the-money options are handled through their logarithm, so that deep
//! wings where the price itself underflows can still be inverted.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::asymptotics::LeadingOrder;
use crate::error::{Error, Result};
use crate::model::{MarketSpec, Moneyness};
use crate::special::{erfcx, norm_cdf};

/// `C_BS(t; x, K, σ) = e^x N(d₊) − K N(d₋)`.
pub fn bs_call_price(x: f64, strike: f64, t: f64, sigma: f64) -> f64 {
    let spot = x.exp();
    let intrinsic = (spot - strike).max(0.0);
    if sigma <= 0.0 || t <= 0.0 {
        return intrinsic;
    }
    if sigma.is_infinite() {
        return spot;
    }
    let k = strike.ln() - x;
    if k == 0.0 {
        let v = sigma * t.sqrt();
        // 2N(v/2) − 1 = erf(v/(2√2)), exact for small v.
        return spot * libm::erf(0.5 * v * FRAC_1_SQRT_2);
    }
    intrinsic + ln_otm_price(x, strike, t, sigma).exp()
}

/// Put price by parity.
pub fn bs_put_price(x: f64, strike: f64, t: f64, sigma: f64) -> f64 {
    bs_call_price(x, strike, t, sigma) - x.exp() + strike
}

/// Logarithm of the Black-Scholes price of the out-of-the-money option at `strike`: the call
/// when `K > e^x`, the put when `K < e^x`.
///
/// With `s = σ√t` the time value is `K e^{−d₋²/2} (erfcx(−d₊/√2) − erfcx(−d₋/√2)) / 2`
/// for the call and the mirror image for the put, which never underflows.
pub fn ln_otm_price(x: f64, strike: f64, t: f64, sigma: f64) -> f64 {
    let k = strike.ln() - x;
    let s = sigma * t.sqrt();
    // Reduce the put to the call by the symmetry d → −d; `m = |k|`.
    let m = k.abs();
    let d_minus = -m / s - 0.5 * s;
    let d_plus = -m / s + 0.5 * s;
    // Larger of the two prices' reference strikes: K for calls, e^x for puts.
    let base = if k > 0.0 { strike.ln() } else { x };
    if d_plus < -1.0 {
        let a = -d_plus * FRAC_1_SQRT_2;
        let b = -d_minus * FRAC_1_SQRT_2;
        let diff = erfcx(a) - erfcx(b);
        base - 0.5 * d_minus * d_minus + (0.5 * diff).ln()
    } else {
        // Moderate wing: the direct difference has no catastrophic cancellation.
        let (hi, lo) = if k > 0.0 {
            (x, strike.ln())
        } else {
            (strike.ln(), x)
        };
        let value = hi.exp() * norm_cdf(d_plus) - lo.exp() * norm_cdf(d_minus);
        value.ln()
    }
}

/// `∂ ln P / ∂ ln σ` for the out-of-the-money price `P`.
fn ln_otm_elasticity(x: f64, strike: f64, t: f64, sigma: f64, ln_price: f64) -> f64 {
    let k = (strike.ln() - x).abs();
    let s = sigma * t.sqrt();
    let d_plus = -k / s + 0.5 * s;
    // vega·σ/P with vega = S φ(d₊) √t for the call, K φ(d₋) √t = S φ(d₊) √t for the put.
    let ln_spot_side = if strike.ln() > x { x } else { strike.ln() };
    (ln_spot_side - 0.5 * d_plus * d_plus - 0.5 * (2.0 * PI).ln() + s.ln() - ln_price).exp()
}

/// The volatility whose out-of-the-money Black-Scholes price has logarithm `ln_price`.
pub fn bs_invert_ln_otm(x: f64, strike: f64, t: f64, ln_price: f64) -> Result<f64> {
    let k = strike.ln() - x;
    if k == 0.0 {
        return Err(Error::AtTheMoney { strike });
    }
    if !(t > 0.0) {
        return Err(Error::NoSolution(format!(
            "maturity must be positive, got {t}"
        )));
    }
    // As σ → ∞ the OTM call tends to e^x and the OTM put to K.
    let ceiling = if k > 0.0 { x } else { strike.ln() };
    if !(ln_price < ceiling) || ln_price.is_nan() {
        return Err(Error::NoSolution(format!(
            "log price {ln_price} is not below the upper arbitrage bound {ceiling}"
        )));
    }
    if ln_price == f64::NEG_INFINITY {
        return Err(Error::NoSolution("price equals the intrinsic value".into()));
    }
    let f = |ls: f64| ln_otm_price(x, strike, t, ls.exp()) - ln_price;
    let (mut lo, mut hi) = (-3.0f64, 0.0f64);
    while f(lo) > 0.0 {
        hi = lo;
        lo -= 4.0;
        if lo < -60.0 {
            return Err(Error::NoSolution("implied volatility below 1e-26".into()));
        }
    }
    while f(hi) < 0.0 {
        lo = hi;
        hi += 2.0;
        if hi > 30.0 {
            return Err(Error::NoSolution("implied volatility above 1e13".into()));
        }
    }
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // Safeguarded Newton polish in ln σ.
    let mut ls = 0.5 * (lo + hi);
    for _ in 0..3 {
        let sigma = ls.exp();
        let lp = ln_otm_price(x, strike, t, sigma);
        let slope = ln_otm_elasticity(x, strike, t, sigma, lp);
        if !(slope > 0.0 && slope.is_finite()) {
            break;
        }
        let next = ls - (lp - ln_price) / slope;
        if !(next > lo - 1e-12 && next < hi + 1e-12) {
            break;
        }
        ls = next;
    }
    Ok(ls.exp())
}

/// The unique `σ` with `bs_call_price(x, K, t, σ) = price`.
///
/// In-the-money calls are converted to out-of-the-money puts by parity first, so a price that
/// is indistinguishable from its intrinsic value in double precision has no solution.
pub fn bs_invert(x: f64, strike: f64, t: f64, price: f64) -> Result<f64> {
    let spot = x.exp();
    let intrinsic = (spot - strike).max(0.0);
    if !(price > intrinsic && price < spot) {
        return Err(Error::NoSolution(format!(
            "call price {price} outside the open interval ({intrinsic}, {spot})"
        )));
    }
    if strike == spot {
        // 2N(σ√t/2) − 1 = price/S
        let v = 2.0 * std::f64::consts::SQRT_2 * erfinv(price / spot);
        return Ok(v / t.sqrt());
    }
    let otm = price - intrinsic;
    bs_invert_ln_otm(x, strike, t, otm.ln())
}

/// Inverse error function on (−1, 1) by Newton iteration.
fn erfinv(y: f64) -> f64 {
    let mut w = 0.0f64;
    for _ in 0..100 {
        let step = (libm::erf(w) - y) / (2.0 / PI.sqrt() * (-w * w).exp());
        w -= step;
        if step.abs() < 1e-16 * w.abs().max(1e-300) {
            break;
        }
    }
    w
}

/// `(e^x − K)^+ + Kσ³t^{3/2}/(√(2π)k²)·exp(−k²/(2σ²t) − k/2)` with `k = ln K − x`.
pub fn bs_expansion(x: f64, strike: f64, t: f64, sigma: f64) -> Result<f64> {
    let time_value = bs_expansion_ln_time_value(x, strike, t, sigma)?.exp();
    Ok((x.exp() - strike).max(0.0) + time_value)
}

/// Logarithm of the time-value term of [`bs_expansion`].
pub fn bs_expansion_ln_time_value(x: f64, strike: f64, t: f64, sigma: f64) -> Result<f64> {
    let k = strike.ln() - x;
    if k == 0.0 {
        return Err(Error::AtTheMoney { strike });
    }
    let v = sigma * sigma * t;
    Ok(strike.ln() + 1.5 * v.ln()
        - 0.5 * (2.0 * PI).ln()
        - 2.0 * k.abs().ln()
        - k * k / (2.0 * v)
        - 0.5 * k)
}

/// Two-term small-maturity expansion `σ̂² ≈ σ₁(1 + σ₂)` of the implied variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IvExpansion {
    pub sigma1: f64,
    pub sigma2: f64,
    pub iv_sq: f64,
    pub iv: f64,
    /// False when the coefficient is degenerate or `σ₂ ≤ −1`.
    pub valid: bool,
}

/// `σ₁ = k²/(2t ln(1/t))`, `σ₂ = ln(4√π b e^{k/2} ln(1/t)^{3/2}/(K|k|))/ln(1/t)`.
///
/// `coefficient` is `b₁` for strikes above the spot and `b̃₁` below it.
pub fn iv_expansion(spec: &MarketSpec, coefficient: &LeadingOrder) -> Result<IvExpansion> {
    if spec.moneyness() == Moneyness::AtTheMoney {
        return Err(Error::AtTheMoney {
            strike: spec.strike,
        });
    }
    let t = spec.t;
    if !(t < 1.0) {
        return Err(Error::Domain {
            what: "the implied volatility expansion (needs t < 1)",
            value: t,
        });
    }
    let k = spec.log_moneyness();
    let l = -t.ln();
    let sigma1 = k * k / (2.0 * t * l);
    let b = coefficient.coefficient;
    if coefficient.degenerate || !(b > 0.0) {
        return Ok(IvExpansion {
            sigma1,
            sigma2: f64::NEG_INFINITY,
            iv_sq: f64::NEG_INFINITY,
            iv: 0.0,
            valid: false,
        });
    }
    let sigma2 =
        ((4.0 * PI.sqrt() * b).ln() + 0.5 * k + 1.5 * l.ln() - spec.strike.ln() - k.abs().ln()) / l;
    let iv_sq = sigma1 * (1.0 + sigma2);
    Ok(IvExpansion {
        sigma1,
        sigma2,
        iv_sq,
        iv: iv_sq.max(0.0).sqrt(),
        valid: sigma2 > -1.0,
    })
}
