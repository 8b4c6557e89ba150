//! Lévy jump measures, the leverage transform of jump sizes, and integration against the
//! measure.
//!
//! A jump of log-size `z` in the ETF moves the leveraged fund by the factor
//! `β(e^z − 1) + 1`. Sizes for which that factor is not positive wipe the fund out; the rest
//! form the predefault domain `A`, on which the log-jump of the fund is
//! `u_β(z) = ln(β(e^z − 1) + 1)`.

use std::fmt;
use std::sync::Arc;

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::quadrature::{self, Bound, Tolerance};

/// Half-width of the panel around the origin that is integrated on its own for
/// infinite-activity densities.
pub const ORIGIN_PANEL: f64 = 1e-4;

/// Double-exponential (Kou) jump parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KouParams {
    /// Jump intensity per year.
    pub lambda: f64,
    /// Probability of an up jump.
    pub p: f64,
    /// Probability of a down jump.
    pub q: f64,
    /// Rate of the exponential up-jump sizes.
    pub eta1: f64,
    /// Rate of the exponential down-jump sizes.
    pub eta2: f64,
}

impl KouParams {
    pub fn new(lambda: f64, p: f64, q: f64, eta1: f64, eta2: f64) -> Result<Self> {
        let params = KouParams {
            lambda,
            p,
            q,
            eta1,
            eta2,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(invalid(
                "lambda",
                format!("must be positive, got {}", self.lambda),
            ));
        }
        if !(self.p > 0.0 && self.q > 0.0) {
            return Err(invalid(
                "p",
                "jump direction probabilities must both be positive",
            ));
        }
        if (self.p + self.q - 1.0).abs() > 4.0 * f64::EPSILON {
            return Err(invalid(
                "q",
                format!("p + q must equal 1, got {}", self.p + self.q),
            ));
        }
        if !(self.eta1 > 1.0 && self.eta1.is_finite()) {
            return Err(invalid(
                "eta1",
                format!(
                    "must exceed 1 for a finite exponential moment, got {}",
                    self.eta1
                ),
            ));
        }
        if !(self.eta2 > 0.0 && self.eta2.is_finite()) {
            return Err(invalid(
                "eta2",
                format!("must be positive, got {}", self.eta2),
            ));
        }
        Ok(())
    }
}

/// Variance Gamma parameters: a Brownian motion with drift `theta` and volatility `sigma`
/// run on a Gamma clock with variance rate `kappa`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VgParams {
    pub kappa: f64,
    pub theta: f64,
    pub sigma: f64,
}

impl VgParams {
    pub fn new(kappa: f64, theta: f64, sigma: f64) -> Result<Self> {
        let params = VgParams {
            kappa,
            theta,
            sigma,
        };
        params.validate()?;
        Ok(params)
    }

    /// Skew coefficient `θ/σ²`.
    pub fn a(&self) -> f64 {
        self.theta / (self.sigma * self.sigma)
    }

    /// Decay coefficient `sqrt(A² + 2/(κσ²))`.
    pub fn b(&self) -> f64 {
        let a = self.a();
        (a * a + 2.0 / (self.kappa * self.sigma * self.sigma)).sqrt()
    }

    /// Exponential decay rate of the right tail.
    pub fn right_rate(&self) -> f64 {
        self.b() - self.a()
    }

    /// Exponential decay rate of the left tail.
    pub fn left_rate(&self) -> f64 {
        self.b() + self.a()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(invalid(
                "kappa",
                format!("must be positive, got {}", self.kappa),
            ));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(invalid(
                "sigma",
                format!("must be positive, got {}", self.sigma),
            ));
        }
        if !self.theta.is_finite() {
            return Err(invalid("theta", "must be finite"));
        }
        if self.right_rate() <= 1.0 {
            return Err(invalid(
                "theta",
                format!(
                    "right tail rate B - A = {} must exceed 1 so that e^((1+δ)z) is integrable",
                    self.right_rate()
                ),
            ));
        }
        Ok(())
    }
}

pub type DensityFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A user supplied Lévy density.
#[derive(Clone)]
pub struct CustomDensity {
    pub density: DensityFn,
    /// Whether the measure has finite total mass.
    pub finite_activity: bool,
}

impl fmt::Debug for CustomDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomDensity")
            .field("finite_activity", &self.finite_activity)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
pub enum JumpKind {
    Kou(KouParams),
    VarianceGamma(VgParams),
    Custom(CustomDensity),
}

/// A validated Lévy measure `ν(dz) = h(z) dz` with its exponential-moment margin `δ`.
#[derive(Debug, Clone)]
pub struct LevyModel {
    kind: JumpKind,
    delta: f64,
}

impl LevyModel {
    pub fn kou(params: KouParams) -> Result<Self> {
        params.validate()?;
        Ok(LevyModel {
            kind: JumpKind::Kou(params),
            delta: 0.5 * (params.eta1 - 1.0),
        })
    }

    pub fn variance_gamma(params: VgParams) -> Result<Self> {
        params.validate()?;
        Ok(LevyModel {
            kind: JumpKind::VarianceGamma(params),
            delta: (0.5 * (params.right_rate() - 1.0)).min(0.5),
        })
    }

    /// Wraps an arbitrary density. The integrability conditions `∫_{|z|>1}|z|h < ∞` and
    /// `∫_{z>1} e^{(1+δ)z} h < ∞` are checked numerically; smoothness of `h` is not.
    pub fn custom(
        density: impl Fn(f64) -> f64 + Send + Sync + 'static,
        finite_activity: bool,
        delta: f64,
    ) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(invalid("delta", "must be positive"));
        }
        let model = LevyModel {
            kind: JumpKind::Custom(CustomDensity {
                density: Arc::new(density),
                finite_activity,
            }),
            delta,
        };
        for z in [-2.0, -0.5, 0.5, 2.0] {
            let h = model.density(z)?;
            if !(h >= 0.0 && h.is_finite()) {
                return Err(invalid(
                    "density",
                    format!("h({z}) = {h} is not a finite non-negative number"),
                ));
            }
        }
        // Floating point cannot see a slowly divergent tail, so compare the mass of the far
        // tail (1e3, 1e6) with the near one (1, 1e3): a convergent tail is far smaller.
        let tol = Tolerance::absolute(1e-10);
        let tail_ok = |f: &dyn Fn(f64) -> f64| -> bool {
            let part = |lo: f64, hi: f64| {
                quadrature::integrate_with_breaks(
                    f,
                    Bound::Finite(lo),
                    Bound::Finite(hi),
                    &[10.0, 100.0, 1e4, 1e5],
                    tol,
                )
                .map(|e| e.value)
            };
            match (part(1.0, 1e3), part(1e3, 1e6)) {
                (Ok(near), Ok(far)) => far.is_finite() && far <= 0.1 * near.max(1e-12),
                _ => false,
            }
        };
        if !tail_ok(&|z| z * (model.h(z) + model.h(-z))) {
            return Err(invalid(
                "density",
                "∫_{|z|>1} |z| h(z) dz does not converge",
            ));
        }
        let weighted = |z: f64| {
            let h = model.h(z);
            if h == 0.0 {
                0.0
            } else {
                ((1.0 + delta) * z + h.ln()).exp()
            }
        };
        if !tail_ok(&weighted) {
            return Err(invalid(
                "density",
                "∫_{z>1} e^{(1+δ)z} h(z) dz does not converge",
            ));
        }
        Ok(model)
    }

    /// A model without jumps.
    pub fn none() -> Self {
        LevyModel {
            kind: JumpKind::Custom(CustomDensity {
                density: Arc::new(|_| 0.0),
                finite_activity: true,
            }),
            delta: 0.5,
        }
    }

    pub fn kind(&self) -> &JumpKind {
        &self.kind
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn is_finite_activity(&self) -> bool {
        match &self.kind {
            JumpKind::Kou(_) => true,
            JumpKind::VarianceGamma(_) => false,
            JumpKind::Custom(c) => c.finite_activity,
        }
    }

    /// Notes on assumptions that could not be verified for this model.
    pub fn assumption_warnings(&self) -> Vec<String> {
        match &self.kind {
            JumpKind::Custom(_) => vec![
                "bounded derivatives of h away from the origin are not verified for custom densities".into(),
                "decay of e^{-ky} h^(k)(y) as y -> -inf (needed for inverse funds) is not verified".into(),
            ],
            _ => Vec::new(),
        }
    }

    /// `h(z)` without the origin check; returns 0 at the origin.
    #[inline]
    pub(crate) fn h(&self, z: f64) -> f64 {
        match &self.kind {
            JumpKind::Kou(k) => {
                if z > 0.0 {
                    k.lambda * k.p * k.eta1 * (-k.eta1 * z).exp()
                } else if z < 0.0 {
                    k.lambda * k.q * k.eta2 * (k.eta2 * z).exp()
                } else {
                    0.0
                }
            }
            JumpKind::VarianceGamma(v) => {
                if z == 0.0 {
                    0.0
                } else {
                    (v.a() * z - v.b() * z.abs()).exp() / (v.kappa * z.abs())
                }
            }
            JumpKind::Custom(c) => {
                if z == 0.0 {
                    0.0
                } else {
                    (c.density)(z)
                }
            }
        }
    }

    /// The Lévy density `h(z)`, defined for `z ≠ 0`.
    pub fn density(&self, z: f64) -> Result<f64> {
        if z == 0.0 || z.is_nan() {
            return Err(Error::Domain {
                what: "the Lévy density",
                value: z,
            });
        }
        Ok(self.h(z))
    }

    /// `∫_lo^hi f(z) h(z) dz` by adaptive quadrature.
    ///
    /// The range is split at the origin (and at `±1`); for infinite-activity models the
    /// panel `[-1e-4, 1e-4]` is integrated separately. A range straddling the origin of an
    /// infinite-activity model requires `f(0) = 0`, otherwise the integral may diverge.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, lo: Bound, hi: Bound) -> Result<f64> {
        self.integrate_tol(f, lo, hi, Tolerance::default())
    }

    pub fn integrate_tol<F: Fn(f64) -> f64>(
        &self,
        f: F,
        lo: Bound,
        hi: Bound,
        tol: Tolerance,
    ) -> Result<f64> {
        self.integrate_split(f, lo, hi, &[], tol)
    }

    /// [`integrate`](Self::integrate) with extra break points, for integrands with kinks.
    pub fn integrate_split<F: Fn(f64) -> f64>(
        &self,
        f: F,
        lo: Bound,
        hi: Bound,
        extra: &[f64],
        tol: Tolerance,
    ) -> Result<f64> {
        let straddles = lo.value() < 0.0 && hi.value() > 0.0;
        if straddles && !self.is_finite_activity() && f(0.0) != 0.0 {
            return Err(Error::Domain {
                what: "an integrand that must vanish at the origin of an infinite-activity measure",
                value: f(0.0),
            });
        }
        let mut breaks: Vec<f64> = if self.is_finite_activity() {
            vec![-1.0, 0.0, 1.0]
        } else {
            vec![-1.0, -ORIGIN_PANEL, 0.0, ORIGIN_PANEL, 1.0]
        };
        breaks.extend_from_slice(extra);
        let est = quadrature::integrate_with_breaks(
            |z| {
                let h = self.h(z);
                if h == 0.0 {
                    0.0
                } else {
                    f(z) * h
                }
            },
            lo,
            hi,
            &breaks,
            tol,
        )?;
        Ok(est.value)
    }

    /// `∫_lo^hi payoff(z) h(z) dz`; alias of [`integrate`](Self::integrate).
    pub fn integrate_plus_payoff<F: Fn(f64) -> f64>(
        &self,
        payoff: F,
        lo: Bound,
        hi: Bound,
    ) -> Result<f64> {
        self.integrate(payoff, lo, hi)
    }

    /// `ν((lo, hi))`; the range must not straddle the origin for infinite activity.
    pub fn measure(&self, lo: Bound, hi: Bound) -> Result<f64> {
        self.integrate(|_| 1.0, lo, hi)
    }

    /// Mass of `{|z| > eps}`.
    pub fn tail_mass(&self, eps: f64) -> Result<f64> {
        if let JumpKind::Kou(k) = &self.kind {
            return Ok(k.lambda * (k.p * (-k.eta1 * eps).exp() + k.q * (-k.eta2 * eps).exp()));
        }
        Ok(self.measure(Bound::NegInf, Bound::Finite(-eps))?
            + self.measure(Bound::Finite(eps), Bound::PosInf)?)
    }

    /// Density `g(w)` of the log-jumps of the leveraged fund.
    ///
    /// Zero outside `u_β(A)`. At `w = 0` the density is singular for infinite-activity models
    /// (a domain error) and taken as 0 otherwise.
    pub fn transformed_density(&self, map: &LeverageMap, w: f64) -> Result<f64> {
        if w == 0.0 {
            return if self.is_finite_activity() {
                Ok(0.0)
            } else {
                Err(Error::Domain {
                    what: "the transformed density of an infinite-activity measure",
                    value: w,
                })
            };
        }
        if !map.in_image(w) {
            return Ok(0.0);
        }
        let z = map.u_beta_inv(w)?;
        let h = self.h(z);
        if h == 0.0 {
            return Ok(0.0);
        }
        // e^w / |β + e^w - 1|, arranged so that large w does not overflow.
        let jacobian = if w > 0.0 {
            1.0 / (1.0 + (map.beta() - 1.0) * (-w).exp()).abs()
        } else {
            let ew = w.exp();
            ew / ((map.beta() - 1.0) + ew).abs()
        };
        Ok(h * jacobian)
    }

    /// Default intensity `ν(A^c)`: the rate of jumps that wipe the fund out.
    pub fn default_intensity(&self, map: &LeverageMap) -> Result<f64> {
        if map.beta() == 1.0 {
            return Ok(0.0);
        }
        if let JumpKind::Kou(k) = &self.kind {
            // e^{edge} = 1 - 1/β, raised directly to keep powers of two exact
            let base = 1.0 - 1.0 / map.beta();
            return Ok(if map.beta() > 1.0 {
                k.lambda * k.q * base.powf(k.eta2)
            } else {
                k.lambda * k.p * base.powf(-k.eta1)
            });
        }
        self.default_intensity_by_quadrature(map)
    }

    /// `ν(A^c)` by quadrature regardless of the model family.
    pub fn default_intensity_by_quadrature(&self, map: &LeverageMap) -> Result<f64> {
        let (lo, hi) = map.default_region();
        self.measure(lo, hi)
    }

    /// Draws a single jump size; infinite-activity models need a truncation level `eps`.
    pub fn sample_jump<R: Rng + ?Sized>(&self, rng: &mut R, eps: Option<f64>) -> Result<f64> {
        let sampler = JumpSampler::new(self, eps)?;
        if sampler.rate() == 0.0 {
            return Err(Error::Unsupported(
                "the measure has no jumps to sample".into(),
            ));
        }
        Ok(sampler.sample(rng))
    }
}

/// The leverage ratio together with its predefault domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeverageMap {
    beta: f64,
    // ln(1 - 1/β); -∞ at β = 1.
    boundary: f64,
}

impl LeverageMap {
    pub fn new(beta: f64) -> Result<Self> {
        if !beta.is_finite() || beta.abs() < 1.0 {
            return Err(invalid(
                "beta",
                format!("leverage must lie in (-inf, -1] U [1, inf), got {beta}"),
            ));
        }
        let boundary = if beta == 1.0 {
            f64::NEG_INFINITY
        } else {
            (-1.0 / beta).ln_1p()
        };
        Ok(LeverageMap { beta, boundary })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `ln(1 - 1/β)`, the finite end of `A` (`-∞` when `β = 1`).
    pub fn boundary(&self) -> f64 {
        self.boundary
    }

    /// Lower end of the predefault domain `A`.
    pub fn a_lower(&self) -> Bound {
        if self.beta >= 1.0 {
            Bound::from(self.boundary)
        } else {
            Bound::NegInf
        }
    }

    /// Upper end of the predefault domain `A`.
    pub fn a_upper(&self) -> Bound {
        if self.beta >= 1.0 {
            Bound::PosInf
        } else {
            Bound::Finite(self.boundary)
        }
    }

    /// Upper end of `u_β(A)`: `+∞` for `β ≥ 1`, `ln(1 - β)` for `β ≤ -1`.
    pub fn u_upper(&self) -> Bound {
        if self.beta >= 1.0 {
            Bound::PosInf
        } else {
            Bound::Finite((-self.beta).ln_1p())
        }
    }

    /// The complement `A^c` as an interval (empty at `β = 1`).
    pub fn default_region(&self) -> (Bound, Bound) {
        if self.beta == 1.0 {
            (Bound::NegInf, Bound::NegInf)
        } else if self.beta > 1.0 {
            (Bound::NegInf, Bound::Finite(self.boundary))
        } else {
            (Bound::Finite(self.boundary), Bound::PosInf)
        }
    }

    /// Whether `z ∈ A`.
    #[inline]
    pub fn in_domain(&self, z: f64) -> bool {
        if self.beta >= 1.0 {
            z > self.boundary
        } else {
            z < self.boundary
        }
    }

    /// Whether `w ∈ u_β(A)`.
    pub fn in_image(&self, w: f64) -> bool {
        match self.u_upper() {
            Bound::Finite(top) => w < top,
            _ => !w.is_nan(),
        }
    }

    /// `ln(β(e^z - 1) + 1)` for `z ∈ A`, evaluated without cancellation near the origin.
    #[inline]
    pub(crate) fn u(&self, z: f64) -> f64 {
        if self.beta == 1.0 {
            return z;
        }
        (self.beta * z.exp_m1()).ln_1p()
    }

    pub fn u_beta(&self, z: f64) -> Result<f64> {
        if !self.in_domain(z) {
            return Err(Error::JumpCausesDefault { z });
        }
        Ok(self.u(z))
    }

    /// Inverse of [`u_beta`](Self::u_beta): `ln((e^w - 1)/β + 1)`.
    pub fn u_beta_inv(&self, w: f64) -> Result<f64> {
        if !self.in_image(w) {
            return Err(Error::Domain {
                what: "the inverse leverage transform",
                value: w,
            });
        }
        if self.beta == 1.0 {
            return Ok(w);
        }
        Ok((w.exp_m1() / self.beta).ln_1p())
    }
}

#[derive(Debug, Clone, Copy)]
enum SamplerKind {
    Empty,
    Kou {
        p: f64,
        eta1: f64,
        eta2: f64,
    },
    VgTails {
        eps: f64,
        right_prob: f64,
        right_rate: f64,
        left_rate: f64,
    },
}

/// Sampler for the jumps of `ν` restricted to `{|z| > eps}`, with their total rate.
#[derive(Debug, Clone, Copy)]
pub struct JumpSampler {
    kind: SamplerKind,
    rate: f64,
}

impl JumpSampler {
    /// `eps` is ignored for Kou (all jumps are sampled) and required for Variance Gamma.
    pub fn new(model: &LevyModel, eps: Option<f64>) -> Result<Self> {
        match model.kind() {
            JumpKind::Kou(k) => Ok(JumpSampler {
                kind: SamplerKind::Kou {
                    p: k.p,
                    eta1: k.eta1,
                    eta2: k.eta2,
                },
                rate: k.lambda,
            }),
            JumpKind::VarianceGamma(v) => {
                let eps = match eps {
                    Some(e) if e > 0.0 && e.is_finite() => e,
                    _ => {
                        return Err(invalid(
                            "eps",
                            "variance gamma jumps can only be sampled above a positive truncation level",
                        ))
                    }
                };
                let right = model.measure(Bound::Finite(eps), Bound::PosInf)?;
                let left = model.measure(Bound::NegInf, Bound::Finite(-eps))?;
                Ok(JumpSampler {
                    kind: SamplerKind::VgTails {
                        eps,
                        right_prob: right / (right + left),
                        right_rate: v.right_rate(),
                        left_rate: v.left_rate(),
                    },
                    rate: right + left,
                })
            }
            JumpKind::Custom(_) => {
                let mass = model.tail_mass(eps.unwrap_or(0.0).max(1e-12))?;
                if mass == 0.0 {
                    Ok(JumpSampler {
                        kind: SamplerKind::Empty,
                        rate: 0.0,
                    })
                } else {
                    Err(Error::Unsupported(
                        "jump sampling is implemented for Kou and Variance Gamma measures only"
                            .into(),
                    ))
                }
            }
        }
    }

    /// Intensity of the sampled jumps.
    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.kind {
            SamplerKind::Empty => 0.0,
            SamplerKind::Kou { p, eta1, eta2 } => {
                let up = rng.random::<f64>() < p;
                let e = -open_unit(rng).ln();
                if up {
                    e / eta1
                } else {
                    -e / eta2
                }
            }
            SamplerKind::VgTails {
                eps,
                right_prob,
                right_rate,
                left_rate,
            } => {
                let (sign, rate) = if rng.random::<f64>() < right_prob {
                    (1.0, right_rate)
                } else {
                    (-1.0, left_rate)
                };
                // Target ∝ e^{-rate·z}/z on (eps, ∞); propose eps + Exp(rate), accept w.p. eps/z.
                loop {
                    let z = eps - open_unit(rng).ln() / rate;
                    if rng.random::<f64>() * z < eps {
                        return sign * z;
                    }
                }
            }
        }
    }
}

/// Uniform on `(0, 1]`.
#[inline]
pub(crate) fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}
