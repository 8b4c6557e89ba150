//! Explicit constants of the error decomposition of the first-order price approximation.
//!
//! Only the constants with closed definitions are computed. The `λ_ε(A)·Ĉ₁·t` part of the
//! bound on `|I₂(t)/t − b₁|` needs a martingale-inequality constant that is never made
//! explicit, so [`i2_error_bound`] reports the `√t` term alone.

use crate::error::{invalid, Error, Result};
use crate::levy::{LeverageMap, LevyModel};
use crate::model::{LocalVol, MarketSpec};
use crate::quadrature::{Bound, Tolerance};

/// Smooth truncation `c_ε`: 1 on `|z| ≤ ε/2`, 0 on `|z| ≥ ε`, a quintic smoothstep between.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationFn {
    eps: f64,
}

impl TruncationFn {
    /// `eps` must lie in `(0, min(|ln(1 − 1/β)|, 1))`.
    pub fn new(eps: f64, map: &LeverageMap) -> Result<Self> {
        let limit = map.boundary().abs().min(1.0);
        if !(eps > 0.0 && eps < limit) {
            return Err(invalid(
                "eps",
                format!(
                    "truncation level must lie in (0, {limit}) for beta = {}, got {eps}",
                    map.beta()
                ),
            ));
        }
        Ok(TruncationFn { eps })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    #[inline]
    pub fn eval(&self, z: f64) -> f64 {
        let a = z.abs();
        if a <= 0.5 * self.eps {
            1.0
        } else if a >= self.eps {
            0.0
        } else {
            let s = (self.eps - a) / (0.5 * self.eps);
            s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
        }
    }

    fn kinks(&self) -> [f64; 4] {
        [-self.eps, -0.5 * self.eps, 0.5 * self.eps, self.eps]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorConstants {
    pub eps: f64,
    /// `β_ε = ln(|β|(e^ε − 1) + 1)`.
    pub beta_eps: f64,
    /// `λ_ε(A) = ∫_A (1 − c_ε) h`.
    pub lambda_eps: f64,
    /// `d_ε = ν(A^c) − ∫_A β(e^z − 1)(1 − c_ε) h`.
    pub d_eps: f64,
    /// `c = 3β²‖σ‖∞² + ½∫_{A₀}{[β(e^z−1)+1]⁴ − 1 − β(e^z−1) − 3u_β} c_ε h`.
    pub c_const: f64,
    /// `Ĉ₂ = c^{1/2} + ν(A^c) + |β| ∫_{A∩{|z|≥ε}} |e^z − 1| h`.
    pub c2_hat: f64,
    /// `Ĉ₃ = 1 ∨ exp(ν(A^c) − β ∫_{A∩{|z|≥ε}} (e^z − 1) h)`.
    pub c3_hat: f64,
    /// `E[e^{u_β(J)}]` for a big jump `J` with density `1_A (1 − c_ε) h / λ_ε(A)`.
    pub mean_exp_jump: f64,
    pub default_intensity: f64,
}

pub fn error_constants(
    model: &LevyModel,
    map: &LeverageMap,
    vol: &LocalVol,
    trunc: &TruncationFn,
) -> Result<ErrorConstants> {
    let beta = map.beta();
    let eps = trunc.eps();
    let (lo, hi) = (map.a_lower(), map.a_upper());
    let kinks = trunc.kinks();
    let tol = Tolerance::default();
    let integrate = |f: &dyn Fn(f64) -> f64, lo: Bound, hi: Bound| {
        model.integrate_split(f, lo, hi, &kinks, tol)
    };
    // Integrals over A ∩ {|z| ≥ ε}.
    let outer = |f: &dyn Fn(f64) -> f64| -> Result<f64> {
        let left_hi = Bound::Finite(-eps);
        let right_lo = Bound::Finite(eps);
        let left = if lo.value() < -eps {
            integrate(f, lo, left_hi)?
        } else {
            0.0
        };
        let right = if hi.value() > eps {
            integrate(f, right_lo, hi)?
        } else {
            0.0
        };
        Ok(left + right)
    };

    let nu_ac = model.default_intensity(map)?;
    let beta_eps = (beta.abs() * eps.exp_m1()).ln_1p();
    let lambda_eps = integrate(&|z| 1.0 - trunc.eval(z), lo, hi)?;
    let d_eps = nu_ac - integrate(&|z| beta * z.exp_m1() * (1.0 - trunc.eval(z)), lo, hi)?;
    let inner = Bound::Finite(-eps);
    let inner_hi = Bound::Finite(eps);
    let quartic = integrate(
        &|z| {
            let a = beta * z.exp_m1();
            let u = map.u(z);
            let b = 1.0 + a;
            ((b * b) * (b * b) - 1.0 - a - 3.0 * u) * trunc.eval(z)
        },
        inner,
        inner_hi,
    )?;
    let sup = vol.sup_norm();
    let c_const = 3.0 * beta * beta * sup * sup + 0.5 * quartic;
    if !(c_const >= 0.0) {
        return Err(Error::NoSolution(format!(
            "negative constant c = {c_const}"
        )));
    }
    let c2_hat = c_const.sqrt() + nu_ac + beta.abs() * outer(&|z| z.exp_m1().abs())?;
    let c3_hat = (nu_ac - beta * outer(&f64::exp_m1)?).exp().max(1.0);
    let mean_exp_jump = if lambda_eps > 0.0 {
        integrate(
            &|z| (1.0 + beta * z.exp_m1()) * (1.0 - trunc.eval(z)),
            lo,
            hi,
        )? / lambda_eps
    } else {
        f64::NAN
    };
    Ok(ErrorConstants {
        eps,
        beta_eps,
        lambda_eps,
        d_eps,
        c_const,
        c2_hat,
        c3_hat,
        mean_exp_jump,
        default_intensity: nu_ac,
    })
}

/// The computable part `(3/2)·Ĉ₂·E[e^{u_β(J)}]·(e^x/K)·Ĉ₃·√t` of the bound on
/// `|I₂(t)/t − b₁|`.
pub fn i2_error_bound(constants: &ErrorConstants, spec: &MarketSpec) -> Result<f64> {
    spec.require_otm_call()?;
    if !(constants.mean_exp_jump.is_finite()) {
        return Err(Error::NoSolution("no big jumps: λ_ε(A) = 0".into()));
    }
    Ok(1.5
        * constants.c2_hat
        * constants.mean_exp_jump
        * (spec.spot() / spec.strike)
        * constants.c3_hat
        * spec.t.sqrt())
}
