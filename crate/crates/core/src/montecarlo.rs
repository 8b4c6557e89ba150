//! Monte Carlo simulation of the coupled log-ETF / log-LETF dynamics with default.
//!
//! Every path draws from its own ChaCha stream selected by `(seed, path index)`, and results
//! are reduced in path order with pairwise summation, so estimates do not depend on how the
//! paths are spread over threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;

use crate::asymptotics::{b1_call, b1_put};
use crate::error::{invalid, Error, Result};
use crate::impliedvol::{bs_invert, bs_invert_ln_otm, iv_expansion};
use crate::levy::{open_unit, JumpKind, JumpSampler, LeverageMap, LevyModel, VgParams};
use crate::model::{DriftPair, LocalVol, MarketSpec, Moneyness, Side};
use crate::quadrature::{Bound, Tolerance};

/// Default small-jump cutoff for infinite-activity models.
pub const DEFAULT_VG_EPS: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Euler steps on the uniform grid merged with the times of jumps larger than `eps`;
    /// smaller jumps are replaced by a matched Gaussian.
    JumpAdapted,
    /// Exact Variance Gamma increments on the uniform grid (Variance Gamma only).
    GridIncrement,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub paths: u64,
    /// Euler steps per maturity.
    pub steps: u32,
    /// Small-jump cutoff; ignored for finite-activity models, whose jumps are all simulated.
    pub eps: Option<f64>,
    pub seed: u64,
    pub scheme: Scheme,
    /// Pair each path with its mirror image (all Gaussian draws negated). `paths` must be even.
    pub antithetic: bool,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            paths: 1_000_000,
            steps: 100,
            eps: None,
            seed: 0,
            scheme: Scheme::JumpAdapted,
            antithetic: false,
        }
    }
}

impl McConfig {
    pub fn new(paths: u64, steps: u32, seed: u64) -> Self {
        McConfig {
            paths,
            steps,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self, model: &LevyModel, map: &LeverageMap) -> Result<()> {
        if self.paths == 0 {
            return Err(invalid("paths", "must be at least 1"));
        }
        if self.steps == 0 {
            return Err(invalid("steps", "must be at least 1"));
        }
        if self.antithetic && self.paths % 2 == 1 {
            return Err(invalid("paths", "must be even with antithetic variates"));
        }
        if !model.is_finite_activity() {
            let eps = self.eps();
            let limit = map.boundary().abs();
            if !(eps > 0.0 && eps < limit) {
                return Err(invalid(
                    "eps",
                    format!(
                        "small-jump cutoff must lie in (0, {limit}) for beta = {}, got {eps}",
                        map.beta()
                    ),
                ));
            }
        }
        if self.scheme == Scheme::GridIncrement
            && !matches!(model.kind(), JumpKind::VarianceGamma(_))
        {
            return Err(invalid(
                "scheme",
                "grid increments are only available for Variance Gamma",
            ));
        }
        Ok(())
    }

    /// The cutoff in effect.
    pub fn eps(&self) -> f64 {
        self.eps.unwrap_or(DEFAULT_VG_EPS)
    }
}

/// Terminal (or current) state of one path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathState {
    pub x: f64,
    pub y: f64,
    pub defaulted: bool,
    pub time: f64,
}

impl PathState {
    pub fn etf(&self) -> f64 {
        self.x.exp()
    }

    /// `1{τ > t} e^{Y_t}`.
    pub fn letf(&self) -> f64 {
        if self.defaulted {
            0.0
        } else {
            self.y.exp()
        }
    }

    pub fn payoff(&self, strike: f64, side: Side) -> f64 {
        match side {
            Side::Call => (self.letf() - strike).max(0.0),
            Side::Put => (strike - self.letf()).max(0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McResult {
    pub price: f64,
    pub stderr: f64,
    pub default_fraction: f64,
    /// Black-Scholes implied volatility of `price`, when inside the arbitrage bounds.
    pub implied_vol: Option<f64>,
    /// Number of independent samples behind `stderr` (pairs under antithetic sampling).
    pub samples: u64,
}

/// Mean and standard error of a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleMean {
    pub mean: f64,
    pub stderr: f64,
    pub samples: u64,
}

/// Sum by recursive halving; the result depends only on the order of `values`.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 32 {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

pub fn sample_mean(values: &[f64]) -> SampleMean {
    let n = values.len();
    if n == 0 {
        return SampleMean {
            mean: f64::NAN,
            stderr: f64::NAN,
            samples: 0,
        };
    }
    let mean = pairwise_sum(values) / n as f64;
    let stderr = if n > 1 {
        let dev: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
        (pairwise_sum(&dev) / (n - 1) as f64 / n as f64).sqrt()
    } else {
        0.0
    };
    SampleMean {
        mean,
        stderr,
        samples: n as u64,
    }
}

/// `θG + σ√G·N` with `G ~ Gamma(dt/κ, κ)`: an exact Variance Gamma increment over `dt`.
pub fn sample_vg_increment<R: Rng + ?Sized>(params: &VgParams, dt: f64, rng: &mut R) -> f64 {
    let g = Gamma::new(dt / params.kappa, params.kappa)
        .expect("positive shape and scale")
        .sample(rng);
    let n: f64 = StandardNormal.sample(rng);
    params.theta * g + params.sigma * g.sqrt() * n
}

/// Terminal states of all paths; antithetic partners are adjacent.
#[derive(Debug, Clone)]
pub struct Paths {
    pub states: Vec<PathState>,
    pub antithetic: bool,
}

impl Paths {
    /// Mean and standard error of `f` over independent sampling units.
    pub fn mean_of<F: Fn(&PathState) -> f64 + Sync>(&self, f: F) -> SampleMean {
        let values: Vec<f64> = if self.antithetic {
            self.states
                .par_chunks(2)
                .map(|pair| 0.5 * (f(&pair[0]) + f(&pair[1])))
                .collect()
        } else {
            self.states.par_iter().map(&f).collect()
        };
        sample_mean(&values)
    }

    pub fn default_fraction(&self) -> f64 {
        let n = self.states.iter().filter(|s| s.defaulted).count();
        n as f64 / self.states.len() as f64
    }
}

/// A configured simulator for one market specification.
#[derive(Debug, Clone)]
pub struct Simulator {
    spec: MarketSpec,
    vol: LocalVol,
    cfg: McConfig,
    drifts: DriftPair,
    sampler: JumpSampler,
    // ∫_{|z|>ε} z h and ∫_{A∩{|z|>ε}} u_β h: compensators of the simulated jumps.
    x_comp: f64,
    y_comp: f64,
    // Cholesky factor of the small-jump covariance of (X, Y): [l11, l21, l22].
    chol: [f64; 3],
    vg: Option<VgParams>,
}

impl Simulator {
    pub fn new(
        spec: &MarketSpec,
        vol: &LocalVol,
        model: &LevyModel,
        cfg: &McConfig,
    ) -> Result<Self> {
        cfg.validate(model, &spec.map)?;
        let map = spec.map;
        let drifts = DriftPair::new(*vol, model, &map)?;
        let vg = match model.kind() {
            JumpKind::VarianceGamma(v) => Some(*v),
            _ => None,
        };
        let finite = model.is_finite_activity();
        let eps = if finite { 0.0 } else { cfg.eps() };
        let sampler = JumpSampler::new(model, (!finite).then_some(eps))?;

        let (x_comp, y_comp, chol) = if cfg.scheme == Scheme::GridIncrement {
            // Only ∫_A u_β h is needed: Y's jumps are compensated as a whole per step.
            let y = model.integrate(|z| map.u(z), map.a_lower(), map.a_upper())?;
            (0.0, y, [0.0; 3])
        } else if finite {
            let x = model.integrate(|z| z, Bound::NegInf, Bound::PosInf)?;
            let y = model.integrate(|z| map.u(z), map.a_lower(), map.a_upper())?;
            (x, y, [0.0; 3])
        } else {
            let outer = |f: &dyn Fn(f64) -> f64, lo: Bound, hi: Bound| -> Result<f64> {
                Ok(model.integrate(f, lo, Bound::Finite(-eps))?
                    + model.integrate(f, Bound::Finite(eps), hi)?)
            };
            let x = outer(&|z| z, Bound::NegInf, Bound::PosInf)?;
            let y = outer(&|z| map.u(z), map.a_lower(), map.a_upper())?;
            let tol = Tolerance::absolute(1e-16);
            let inner = |f: &dyn Fn(f64) -> f64| {
                model.integrate_tol(f, Bound::Finite(-eps), Bound::Finite(eps), tol)
            };
            let vxx = inner(&|z| z * z)?;
            let vxy = inner(&|z| z * map.u(z))?;
            let vyy = inner(&|z| map.u(z) * map.u(z))?;
            let l11 = vxx.sqrt();
            let l21 = if l11 > 0.0 { vxy / l11 } else { 0.0 };
            let l22 = (vyy - l21 * l21).max(0.0).sqrt();
            (x, y, [l11, l21, l22])
        };

        Ok(Simulator {
            spec: *spec,
            vol: *vol,
            cfg: *cfg,
            drifts,
            sampler,
            x_comp,
            y_comp,
            chol,
            vg,
        })
    }

    pub fn config(&self) -> &McConfig {
        &self.cfg
    }

    pub fn spec(&self) -> &MarketSpec {
        &self.spec
    }

    pub fn drifts(&self) -> &DriftPair {
        &self.drifts
    }

    /// Intensity of the individually simulated jumps.
    pub fn big_jump_rate(&self) -> f64 {
        self.sampler.rate()
    }

    /// The random stream of sampling unit `index`.
    pub fn stream(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        rng.set_stream(index);
        rng
    }

    /// Simulates one path; `sign = −1` negates every Gaussian draw.
    pub fn simulate_path_with<R: Rng + ?Sized>(&self, rng: &mut R, sign: f64) -> PathState {
        match self.cfg.scheme {
            Scheme::JumpAdapted => self.jump_adapted(rng, sign),
            Scheme::GridIncrement => self.grid_increment(rng, sign),
        }
    }

    fn jump_adapted<R: Rng + ?Sized>(&self, rng: &mut R, sign: f64) -> PathState {
        let t = self.spec.t;
        let map = &self.spec.map;
        let rate = self.sampler.rate();
        let mut jumps = Vec::new();
        if rate > 0.0 {
            let mut s = 0.0;
            loop {
                s += -open_unit(rng).ln() / rate;
                if s >= t {
                    break;
                }
                jumps.push(s);
            }
        }

        let mut state = PathState {
            x: self.spec.x,
            y: self.spec.x,
            defaulted: false,
            time: 0.0,
        };
        let h = t / self.cfg.steps as f64;
        let mut next_jump = 0;
        for k in 0..self.cfg.steps {
            let end = if k + 1 == self.cfg.steps {
                t
            } else {
                (k + 1) as f64 * h
            };
            while next_jump < jumps.len() && jumps[next_jump] <= end {
                let tau = jumps[next_jump];
                let dt = tau - state.time;
                self.diffuse(&mut state, dt, rng, sign);
                state.time = tau;
                let z = self.sampler.sample(rng);
                if map.in_domain(z) {
                    state.y += map.u(z);
                } else {
                    state.defaulted = true;
                }
                state.x += z;
                next_jump += 1;
            }
            let dt = end - state.time;
            self.diffuse(&mut state, dt, rng, sign);
            state.time = end;
        }
        state
    }

    #[inline]
    fn diffuse<R: Rng + ?Sized>(&self, state: &mut PathState, dt: f64, rng: &mut R, sign: f64) {
        if dt <= 0.0 {
            return;
        }
        let sq = dt.sqrt();
        let n: f64 = StandardNormal.sample(rng);
        let dw = sign * sq * n;
        let (small_x, small_y) = if self.chol[0] > 0.0 || self.chol[2] > 0.0 {
            let a: f64 = StandardNormal.sample(rng);
            let b: f64 = StandardNormal.sample(rng);
            let (a, b) = (sign * a, sign * b);
            (
                self.chol[0] * a * sq,
                (self.chol[1] * a + self.chol[2] * b) * sq,
            )
        } else {
            (0.0, 0.0)
        };
        let x = state.x;
        let sigma = self.vol.sigma(x);
        if !state.defaulted {
            state.y +=
                (self.drifts.gamma(x) - self.y_comp) * dt + self.drifts.beta * sigma * dw + small_y;
        }
        state.x += (self.drifts.mu(x) - self.x_comp) * dt + sigma * dw + small_x;
    }

    fn grid_increment<R: Rng + ?Sized>(&self, rng: &mut R, sign: f64) -> PathState {
        let vg = self
            .vg
            .expect("validated: grid increments need Variance Gamma");
        let map = &self.spec.map;
        let t = self.spec.t;
        let dt = t / self.cfg.steps as f64;
        let sq = dt.sqrt();
        let gamma = Gamma::new(dt / vg.kappa, vg.kappa).expect("positive shape and scale");
        let mut state = PathState {
            x: self.spec.x,
            y: self.spec.x,
            defaulted: false,
            time: 0.0,
        };
        for k in 0..self.cfg.steps {
            let n: f64 = StandardNormal.sample(rng);
            let dw = sign * sq * n;
            let g = gamma.sample(rng);
            let m: f64 = StandardNormal.sample(rng);
            let dz = vg.theta * g + vg.sigma * g.sqrt() * sign * m;
            let x = state.x;
            let sigma = self.vol.sigma(x);
            if !state.defaulted {
                if map.in_domain(dz) {
                    state.y +=
                        self.drifts.gamma(x) * dt + self.drifts.beta * sigma * dw + map.u(dz)
                            - self.y_comp * dt;
                } else {
                    state.defaulted = true;
                }
            }
            state.x += self.drifts.mu(x) * dt + sigma * dw + dz - vg.theta * dt;
            state.time = if k + 1 == self.cfg.steps {
                t
            } else {
                (k + 1) as f64 * dt
            };
        }
        state
    }

    /// Simulates every path. With antithetic sampling, unit `j` produces paths `2j, 2j+1`.
    pub fn run(&self) -> Paths {
        let states = if self.cfg.antithetic {
            let pairs: Vec<[PathState; 2]> = (0..self.cfg.paths / 2)
                .into_par_iter()
                .map(|j| {
                    let rng = self.stream(j);
                    let plus = self.simulate_path_with(&mut rng.clone(), 1.0);
                    let minus = self.simulate_path_with(&mut rng.clone(), -1.0);
                    [plus, minus]
                })
                .collect();
            pairs.into_iter().flatten().collect()
        } else {
            (0..self.cfg.paths)
                .into_par_iter()
                .map(|i| self.simulate_path_with(&mut self.stream(i), 1.0))
                .collect()
        };
        Paths {
            states,
            antithetic: self.cfg.antithetic,
        }
    }

    /// Price estimate for the strike of the simulator's spec.
    pub fn estimate_price(&self, side: Side) -> McResult {
        let paths = self.run();
        price_from_paths(&self.spec, &paths, side)
    }
}

/// Summarises the payoff of `side` at `spec.strike` over simulated paths.
pub fn price_from_paths(spec: &MarketSpec, paths: &Paths, side: Side) -> McResult {
    let strike = spec.strike;
    let m = paths.mean_of(|s| s.payoff(strike, side));
    McResult {
        price: m.mean,
        stderr: m.stderr,
        default_fraction: paths.default_fraction(),
        implied_vol: implied_vol_of(spec, m.mean, side),
        samples: m.samples,
    }
}

/// Black-Scholes implied volatility of a call or put price; `None` outside the bounds.
pub fn implied_vol_of(spec: &MarketSpec, price: f64, side: Side) -> Option<f64> {
    let (x, k, t) = (spec.x, spec.strike, spec.t);
    let otm_side = match spec.moneyness() {
        Moneyness::OtmCall => Side::Call,
        Moneyness::OtmPut => Side::Put,
        Moneyness::AtTheMoney => {
            let call = if side == Side::Call {
                price
            } else {
                price + spec.spot() - k
            };
            return bs_invert(x, k, t, call).ok();
        }
    };
    if side == otm_side {
        if price > 0.0 {
            bs_invert_ln_otm(x, k, t, price.ln()).ok()
        } else {
            None
        }
    } else {
        let call = if side == Side::Call {
            price
        } else {
            price + spec.spot() - k
        };
        bs_invert(x, k, t, call).ok()
    }
}

pub fn simulate_path<R: Rng + ?Sized>(
    spec: &MarketSpec,
    vol: &LocalVol,
    model: &LevyModel,
    cfg: &McConfig,
    rng: &mut R,
) -> Result<PathState> {
    Ok(Simulator::new(spec, vol, model, cfg)?.simulate_path_with(rng, 1.0))
}

pub fn estimate_price(
    spec: &MarketSpec,
    vol: &LocalVol,
    model: &LevyModel,
    cfg: &McConfig,
    side: Side,
) -> Result<McResult> {
    Ok(Simulator::new(spec, vol, model, cfg)?.estimate_price(side))
}

/// One strike of a simulated smile, priced on the out-of-the-money side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmileRow {
    pub strike: f64,
    pub log_moneyness: f64,
    pub side: Side,
    pub mc_price: f64,
    pub mc_stderr: f64,
    pub mc_iv: Option<f64>,
    /// Implied volatilities of `price ∓ stderr`.
    pub mc_iv_low: Option<f64>,
    pub mc_iv_high: Option<f64>,
    pub asym_iv: f64,
    pub asym_valid: bool,
    pub default_fraction: f64,
}

impl SmileRow {
    /// Both implied volatilities are usable.
    pub fn valid(&self) -> bool {
        self.mc_iv.is_some() && self.asym_valid
    }
}

/// Monte Carlo and asymptotic implied volatilities across `strikes`, all priced on one set
/// of paths. At-the-money strikes are rejected.
pub fn smile(
    spec: &MarketSpec,
    strikes: &[f64],
    vol: &LocalVol,
    model: &LevyModel,
    cfg: &McConfig,
) -> Result<Vec<SmileRow>> {
    for &k in strikes {
        if spec.with_strike(k)?.moneyness() == Moneyness::AtTheMoney {
            return Err(Error::AtTheMoney { strike: k });
        }
    }
    let paths = Simulator::new(spec, vol, model, cfg)?.run();
    smile_from_paths(spec, strikes, model, &paths)
}

pub fn smile_from_paths(
    spec: &MarketSpec,
    strikes: &[f64],
    model: &LevyModel,
    paths: &Paths,
) -> Result<Vec<SmileRow>> {
    strikes
        .iter()
        .map(|&k| {
            let s = spec.with_strike(k)?;
            let (side, coefficient) = match s.moneyness() {
                Moneyness::OtmCall => (Side::Call, b1_call(&s, model)?),
                Moneyness::OtmPut => (Side::Put, b1_put(&s, model)?),
                Moneyness::AtTheMoney => return Err(Error::AtTheMoney { strike: k }),
            };
            let mc = price_from_paths(&s, paths, side);
            let asym = iv_expansion(&s, &coefficient)?;
            Ok(SmileRow {
                strike: k,
                log_moneyness: s.log_moneyness(),
                side,
                mc_price: mc.price,
                mc_stderr: mc.stderr,
                mc_iv: mc.implied_vol,
                mc_iv_low: implied_vol_of(&s, mc.price - mc.stderr, side),
                mc_iv_high: implied_vol_of(&s, mc.price + mc.stderr, side),
                asym_iv: asym.iv,
                asym_valid: asym.valid,
                default_fraction: mc.default_fraction,
            })
        })
        .collect()
}
