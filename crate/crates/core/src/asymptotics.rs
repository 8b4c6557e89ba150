//! First-order small-maturity coefficients of off-the-money LETF option prices.
//!
//! An out-of-the-money call is worth `b₁·t + o(t)` and an out-of-the-money put
//! `b̃₁·t + o(t)`; in-the-money prices follow by put-call parity.

use crate::error::Result;
use crate::levy::{JumpKind, KouParams, LevyModel};
use crate::model::{MarketSpec, Moneyness, Side};
use crate::quadrature::Bound;

/// `intrinsic + coefficient·t`, with the coefficient split into its default and
/// jump-integral parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeadingOrder {
    pub side: Side,
    /// `b₁` or `b̃₁`, per unit time.
    pub coefficient: f64,
    /// `Kν(A^c)`: the part of `b̃₁` paid on default. Zero for calls.
    pub default_part: f64,
    pub intrinsic: f64,
    /// The coefficient vanishes identically; the true price is of higher order in `t`.
    pub degenerate: bool,
}

impl LeadingOrder {
    pub fn price(&self, t: f64) -> f64 {
        self.intrinsic + self.coefficient * t
    }

    /// `coefficient − default_part`.
    pub fn integral_part(&self) -> f64 {
        self.coefficient - self.default_part
    }
}

/// `z₀ = ln((Ke^{−x} − 1 + β)/β)`, or `None` when the argument is not positive.
fn z0(spec: &MarketSpec) -> Option<f64> {
    let arg = (spec.strike / spec.spot() - 1.0) / spec.beta();
    (arg > -1.0).then(|| arg.ln_1p())
}

/// `(S·(β(e^z − 1) + 1) − K)`, the LETF value after a jump `z` minus the strike.
#[inline]
fn excess(spot: f64, beta: f64, strike: f64, z: f64) -> f64 {
    spot * (1.0 + beta * z.exp_m1()) - strike
}

/// Integration range of the call coefficient, `None` when structurally degenerate.
fn call_range(spec: &MarketSpec) -> Option<(Bound, Bound)> {
    let z0 = z0(spec)?;
    Some(if spec.beta() >= 1.0 {
        (Bound::Finite(z0), Bound::PosInf)
    } else {
        (Bound::NegInf, Bound::Finite(z0))
    })
}

fn put_range(spec: &MarketSpec) -> (Bound, Bound) {
    // For an OTM put the argument of z₀ always lies in (−1, ∞).
    let z0 = z0(spec).expect("OTM put has a finite z0");
    if spec.beta() >= 1.0 {
        (spec.map.a_lower(), Bound::Finite(z0))
    } else {
        (Bound::Finite(z0), spec.map.a_upper())
    }
}

fn call_order(coefficient: f64, degenerate: bool) -> LeadingOrder {
    LeadingOrder {
        side: Side::Call,
        coefficient,
        default_part: 0.0,
        intrinsic: 0.0,
        degenerate,
    }
}

/// `b₁ = ∫_A (S₀βe^z − (β−1)S₀ − K)^+ ν(dz)` for an OTM call (`K > e^x`).
///
/// Inverse funds with `β ≥ 1 − Ke^{−x}` cannot reach the strike with a single jump; the
/// coefficient is then reported as 0 with `degenerate` set.
pub fn b1_call(spec: &MarketSpec, model: &LevyModel) -> Result<LeadingOrder> {
    spec.require_otm_call()?;
    let Some(range) = call_range(spec) else {
        return Ok(call_order(0.0, true));
    };
    let value = match model.kind() {
        JumpKind::Kou(k) => kou_call(spec, k, range),
        _ => call_quadrature(spec, model, range)?,
    };
    Ok(call_order(value.max(0.0), false))
}

/// [`b1_call`] by quadrature whatever the model family.
pub fn b1_call_by_quadrature(spec: &MarketSpec, model: &LevyModel) -> Result<LeadingOrder> {
    spec.require_otm_call()?;
    let Some(range) = call_range(spec) else {
        return Ok(call_order(0.0, true));
    };
    Ok(call_order(
        call_quadrature(spec, model, range)?.max(0.0),
        false,
    ))
}

fn call_quadrature(spec: &MarketSpec, model: &LevyModel, (lo, hi): (Bound, Bound)) -> Result<f64> {
    let (s, beta, k) = (spec.spot(), spec.beta(), spec.strike);
    model.integrate(|z| excess(s, beta, k, z).max(0.0), lo, hi)
}

fn kou_call(spec: &MarketSpec, k: &KouParams, (lo, hi): (Bound, Bound)) -> f64 {
    let (s, beta) = (spec.spot(), spec.beta());
    let c = (beta - 1.0) * s + spec.strike;
    if let (Bound::Finite(z0), Bound::PosInf) = (lo, hi) {
        k.lambda
            * k.p
            * (s * beta * k.eta1 / (k.eta1 - 1.0) * (-(k.eta1 - 1.0) * z0).exp()
                - c * (-k.eta1 * z0).exp())
    } else {
        let Bound::Finite(z0) = hi else {
            unreachable!()
        };
        k.lambda
            * k.q
            * (s * beta * k.eta2 / (k.eta2 + 1.0) * ((k.eta2 + 1.0) * z0).exp()
                - c * (k.eta2 * z0).exp())
    }
}

/// `b̃₁ = Kν(A^c) + ∫_A (K − S₀βe^z + (β−1)S₀)^+ ν(dz)` for an OTM put (`K < e^x`).
pub fn b1_put(spec: &MarketSpec, model: &LevyModel) -> Result<LeadingOrder> {
    spec.require_otm_put()?;
    let range = put_range(spec);
    let integral = match model.kind() {
        JumpKind::Kou(k) => kou_put(spec, k, range),
        _ => put_quadrature(spec, model, range)?,
    };
    put_order(spec, model, integral)
}

/// [`b1_put`] by quadrature whatever the model family.
pub fn b1_put_by_quadrature(spec: &MarketSpec, model: &LevyModel) -> Result<LeadingOrder> {
    spec.require_otm_put()?;
    let integral = put_quadrature(spec, model, put_range(spec))?;
    let default_part = spec.strike * model.default_intensity_by_quadrature(&spec.map)?;
    Ok(LeadingOrder {
        side: Side::Put,
        coefficient: default_part + integral.max(0.0),
        default_part,
        intrinsic: 0.0,
        degenerate: false,
    })
}

fn put_order(spec: &MarketSpec, model: &LevyModel, integral: f64) -> Result<LeadingOrder> {
    let default_part = spec.strike * model.default_intensity(&spec.map)?;
    Ok(LeadingOrder {
        side: Side::Put,
        coefficient: default_part + integral.max(0.0),
        default_part,
        intrinsic: 0.0,
        degenerate: false,
    })
}

fn put_quadrature(spec: &MarketSpec, model: &LevyModel, (lo, hi): (Bound, Bound)) -> Result<f64> {
    let (s, beta, k) = (spec.spot(), spec.beta(), spec.strike);
    model.integrate(|z| (-excess(s, beta, k, z)).max(0.0), lo, hi)
}

fn kou_put(spec: &MarketSpec, k: &KouParams, (lo, hi): (Bound, Bound)) -> f64 {
    let (s, beta) = (spec.spot(), spec.beta());
    let c = spec.strike + (beta - 1.0) * s;
    // exp of an infinite endpoint is 0 here, which is what the integral needs.
    if beta >= 1.0 {
        let (Bound::Finite(z0), edge) = (hi, lo.value()) else {
            unreachable!()
        };
        let e2 = k.eta2;
        k.lambda
            * k.q
            * (c * ((e2 * z0).exp() - (e2 * edge).exp())
                - s * beta * e2 / (e2 + 1.0)
                    * (((e2 + 1.0) * z0).exp() - ((e2 + 1.0) * edge).exp()))
    } else {
        let (Bound::Finite(z0), edge) = (lo, hi.value()) else {
            unreachable!()
        };
        let e1 = k.eta1;
        k.lambda
            * k.p
            * (c * ((-e1 * z0).exp() - (-e1 * edge).exp())
                - s * beta * e1 / (e1 - 1.0)
                    * ((-(e1 - 1.0) * z0).exp() - (-(e1 - 1.0) * edge).exp()))
    }
}

/// Leading-order price of a call or put at any off-the-money strike.
///
/// OTM options use their own coefficient; ITM options add their intrinsic value to the
/// coefficient of the complementary OTM option.
pub fn leading_price(spec: &MarketSpec, model: &LevyModel, side: Side) -> Result<LeadingOrder> {
    let otm = match spec.moneyness() {
        Moneyness::AtTheMoney => {
            return Err(crate::error::Error::AtTheMoney {
                strike: spec.strike,
            })
        }
        Moneyness::OtmCall => b1_call(spec, model)?,
        Moneyness::OtmPut => b1_put(spec, model)?,
    };
    Ok(LeadingOrder {
        side,
        intrinsic: spec.intrinsic(side),
        ..otm
    })
}

/// `∂b₁/∂β = e^x ∫(e^z − 1) h` over the call integration range; 0 when degenerate.
pub fn db1_dbeta(spec: &MarketSpec, model: &LevyModel) -> Result<f64> {
    spec.require_otm_call()?;
    let Some((lo, hi)) = call_range(spec) else {
        return Ok(0.0);
    };
    Ok(spec.spot() * model.integrate(f64::exp_m1, lo, hi)?)
}

/// Unleveraged ETF option whose first-order coefficient equals `b₁` of an OTM LETF call.
///
/// For `β ≥ 1` it is a call with spot `βS₀` and strike `K + (β − 1)S₀`; for `β ≤ −1` a put
/// with spot `|β|S₀` and strike `−K − (β − 1)S₀`. Returns `None` when the LETF call is
/// degenerate.
pub fn etf_equivalent(spec: &MarketSpec) -> Result<Option<(MarketSpec, Side)>> {
    spec.require_otm_call()?;
    let (beta, s0) = (spec.beta(), spec.spot());
    let (strike, side) = if beta >= 1.0 {
        (spec.strike + (beta - 1.0) * s0, Side::Call)
    } else {
        (-spec.strike - (beta - 1.0) * s0, Side::Put)
    };
    if !(strike > 0.0) {
        return Ok(None);
    }
    let x = (beta.abs() * s0).ln();
    Ok(Some((MarketSpec::new(x, strike, spec.t, 1.0)?, side)))
}

/// `P(τ ≤ t) = 1 − exp(−t·ν(A^c))`.
pub fn default_probability(spec: &MarketSpec, model: &LevyModel) -> Result<f64> {
    Ok(-(-spec.t * model.default_intensity(&spec.map)?).exp_m1())
}
