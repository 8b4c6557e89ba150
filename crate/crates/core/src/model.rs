//! Local volatility, market specification and the risk-neutral drifts of the log-ETF `X`
//! and the log-LETF `Y`.

use crate::error::{invalid, Error, Result};
use crate::levy::{JumpKind, LeverageMap, LevyModel};
use crate::quadrature::Bound;

/// `σ(x) = a + b·tanh(cx)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalVol {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl LocalVol {
    /// Requires `a > |b|`, so that `σ` is bounded away from zero.
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && c.is_finite()) {
            return Err(invalid("a", "local volatility parameters must be finite"));
        }
        if !(a > b.abs()) {
            return Err(invalid("a", format!("need a > |b|, got a = {a}, b = {b}")));
        }
        Ok(LocalVol { a, b, c })
    }

    /// Constant volatility; `sigma = 0` gives a deterministic (pure jump) diffusion part.
    pub fn constant(sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(invalid(
                "a",
                format!("volatility must be non-negative, got {sigma}"),
            ));
        }
        Ok(LocalVol {
            a: sigma,
            b: 0.0,
            c: 0.0,
        })
    }

    #[inline]
    pub fn sigma(&self, x: f64) -> f64 {
        self.a + self.b * (self.c * x).tanh()
    }

    /// `‖σ‖∞ = a + |b|`.
    pub fn sup_norm(&self) -> f64 {
        self.a + self.b.abs()
    }
}

/// Where the strike sits relative to the current fund value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Moneyness {
    /// `K > e^x`: calls are out of the money.
    OtmCall,
    /// `K < e^x`: puts are out of the money.
    OtmPut,
    AtTheMoney,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Call,
    Put,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Call => "call",
            Side::Put => "put",
        }
    }
}

/// Initial log-price `x` (of both ETF and LETF), strike, maturity and leverage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketSpec {
    pub x: f64,
    pub strike: f64,
    pub t: f64,
    pub map: LeverageMap,
}

impl MarketSpec {
    pub fn new(x: f64, strike: f64, t: f64, beta: f64) -> Result<Self> {
        if !x.is_finite() {
            return Err(invalid("x", "must be finite"));
        }
        if !(strike > 0.0 && strike.is_finite()) {
            return Err(invalid("strike", format!("must be positive, got {strike}")));
        }
        if !(t > 0.0 && t.is_finite()) {
            return Err(invalid("t", format!("maturity must be positive, got {t}")));
        }
        Ok(MarketSpec {
            x,
            strike,
            t,
            map: LeverageMap::new(beta)?,
        })
    }

    pub fn with_strike(&self, strike: f64) -> Result<Self> {
        Self::new(self.x, strike, self.t, self.map.beta())
    }

    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        Self::new(self.x, self.strike, self.t, beta)
    }

    pub fn with_t(&self, t: f64) -> Result<Self> {
        Self::new(self.x, self.strike, t, self.map.beta())
    }

    pub fn beta(&self) -> f64 {
        self.map.beta()
    }

    pub fn spot(&self) -> f64 {
        self.x.exp()
    }

    /// `ln K − x`.
    pub fn log_moneyness(&self) -> f64 {
        self.strike.ln() - self.x
    }

    pub fn moneyness(&self) -> Moneyness {
        let k = self.log_moneyness();
        if k > 0.0 {
            Moneyness::OtmCall
        } else if k < 0.0 {
            Moneyness::OtmPut
        } else {
            Moneyness::AtTheMoney
        }
    }

    pub fn intrinsic(&self, side: Side) -> f64 {
        match side {
            Side::Call => (self.spot() - self.strike).max(0.0),
            Side::Put => (self.strike - self.spot()).max(0.0),
        }
    }

    pub(crate) fn require_otm_call(&self) -> Result<()> {
        match self.moneyness() {
            Moneyness::OtmCall => Ok(()),
            Moneyness::AtTheMoney => Err(Error::AtTheMoney {
                strike: self.strike,
            }),
            Moneyness::OtmPut => Err(Error::Moneyness(format!(
                "strike {} is below the spot {}: the call is in the money, use the put coefficient",
                self.strike,
                self.spot()
            ))),
        }
    }

    pub(crate) fn require_otm_put(&self) -> Result<()> {
        match self.moneyness() {
            Moneyness::OtmPut => Ok(()),
            Moneyness::AtTheMoney => Err(Error::AtTheMoney {
                strike: self.strike,
            }),
            Moneyness::OtmCall => Err(Error::Moneyness(format!(
                "strike {} is above the spot {}: the put is in the money, use the call coefficient",
                self.strike,
                self.spot()
            ))),
        }
    }
}

/// `∫(e^z − 1 − z) h(z) dz`.
pub fn mu_jump_term(model: &LevyModel) -> Result<f64> {
    match model.kind() {
        JumpKind::Kou(k) => Ok(k.lambda
            * (k.p * (k.eta1 / (k.eta1 - 1.0) - 1.0 - 1.0 / k.eta1)
                + k.q * (k.eta2 / (k.eta2 + 1.0) - 1.0 + 1.0 / k.eta2))),
        JumpKind::VarianceGamma(v) => {
            // ln E[e^{Z_1}] = -ln(1 - θκ - σ²κ/2)/κ and E[Z_1] = θ.
            let inner = 1.0 - v.theta * v.kappa - 0.5 * v.sigma * v.sigma * v.kappa;
            Ok(-inner.ln() / v.kappa - v.theta)
        }
        JumpKind::Custom(_) => mu_jump_term_by_quadrature(model),
    }
}

pub fn mu_jump_term_by_quadrature(model: &LevyModel) -> Result<f64> {
    model.integrate(|z| z.exp_m1() - z, Bound::NegInf, Bound::PosInf)
}

/// `∫_A [β(e^z − 1) − u_β(z)] h(z) dz`; no elementary closed form even for Kou.
pub fn gamma_jump_term(model: &LevyModel, map: &LeverageMap) -> Result<f64> {
    let beta = map.beta();
    model.integrate(
        |z| beta * z.exp_m1() - map.u(z),
        map.a_lower(),
        map.a_upper(),
    )
}

/// The drifts `μ(u)` and `γ(u)` with their `u`-independent jump parts cached.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftPair {
    pub vol: LocalVol,
    pub beta: f64,
    pub mu_jump: f64,
    pub gamma_jump: f64,
    pub default_intensity: f64,
}

impl DriftPair {
    pub fn new(vol: LocalVol, model: &LevyModel, map: &LeverageMap) -> Result<Self> {
        Ok(DriftPair {
            vol,
            beta: map.beta(),
            mu_jump: mu_jump_term(model)?,
            gamma_jump: gamma_jump_term(model, map)?,
            default_intensity: model.default_intensity(map)?,
        })
    }

    /// `μ(u) = −σ²(u)/2 − ∫(e^z − 1 − z) h`.
    #[inline]
    pub fn mu(&self, u: f64) -> f64 {
        let s = self.vol.sigma(u);
        -0.5 * s * s - self.mu_jump
    }

    /// `γ(u) = ν(A^c) − β²σ²(u)/2 − ∫_A [β(e^z − 1) − u_β(z)] h`.
    #[inline]
    pub fn gamma(&self, u: f64) -> f64 {
        let s = self.beta * self.vol.sigma(u);
        self.default_intensity - 0.5 * s * s - self.gamma_jump
    }

    /// A bound on `sup_u max(|μ(u)|, |γ(u)|)`.
    pub fn bound(&self) -> f64 {
        let s = self.vol.sup_norm();
        let mu = 0.5 * s * s + self.mu_jump.abs();
        let gamma =
            self.default_intensity + 0.5 * self.beta * self.beta * s * s + self.gamma_jump.abs();
        mu.max(gamma)
    }
}
