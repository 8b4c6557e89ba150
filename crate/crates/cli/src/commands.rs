//! Subcommand implementations. Each produces a CSV table and a count of flagged rows.

use letf_core::asymptotics::{
    b1_call, b1_call_by_quadrature, b1_put, b1_put_by_quadrature, leading_price,
};
use letf_core::errorbounds::{error_constants, i2_error_bound, TruncationFn};
use letf_core::levy::{KouParams, LeverageMap, LevyModel, VgParams};
use letf_core::model::{mu_jump_term, mu_jump_term_by_quadrature, MarketSpec, Moneyness, Side};
use letf_core::montecarlo::{smile_from_paths, Scheme, Simulator};

use crate::config::{ConfigError, LoadedConfig};
use crate::output::{num, opt, Table};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("numeric failure: {0}")]
    Numeric(#[from] letf_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 4,
            CliError::Io(_) => 1,
        }
    }
}

/// A finished table; `flagged` rows make the run a partial success.
#[derive(Debug)]
pub struct Outcome {
    pub table: Table,
    pub flagged: usize,
}

fn option_moneyness(spec: &MarketSpec, side: Side) -> &'static str {
    match (spec.moneyness(), side) {
        (Moneyness::AtTheMoney, _) => "atm",
        (Moneyness::OtmCall, Side::Call) | (Moneyness::OtmPut, Side::Put) => "otm",
        _ => "itm",
    }
}

pub fn price(cfg: &LoadedConfig) -> Result<Outcome, CliError> {
    let model = cfg.model()?;
    let t = cfg.maturity()?;
    let x = cfg.config.market.x;
    let mut table = Table::new(&[
        "beta",
        "K",
        "side",
        "moneyness",
        "coefficient",
        "intrinsic",
        "leading_price",
        "degenerate",
        "status",
    ]);
    table.meta("t", num(t));
    table.meta("x", num(x));
    let mut flagged = 0;
    for beta in cfg.betas()? {
        for k in cfg.strikes()? {
            let spec = MarketSpec::new(x, k, t, beta)?;
            for side in [Side::Call, Side::Put] {
                let mut row = vec![
                    num(beta),
                    num(k),
                    side.as_str().into(),
                    option_moneyness(&spec, side).into(),
                ];
                if spec.moneyness() == Moneyness::AtTheMoney {
                    flagged += 1;
                    row.extend([
                        String::new(),
                        num(spec.intrinsic(side)),
                        String::new(),
                        String::new(),
                    ]);
                    row.push("unsupported".into());
                } else {
                    let lo = leading_price(&spec, &model, side)?;
                    row.extend([
                        num(lo.coefficient),
                        num(lo.intrinsic),
                        num(lo.price(t)),
                        lo.degenerate.to_string(),
                        "ok".into(),
                    ]);
                }
                table.row(row);
            }
        }
    }
    Ok(Outcome { table, flagged })
}

pub fn density(cfg: &LoadedConfig) -> Result<Outcome, CliError> {
    let model = cfg.model()?;
    let grid = cfg.density(!model.is_finite_activity())?;
    let mut table = Table::new(&["z", "h", "g", "beta"]);
    let betas = cfg.betas()?;
    for &beta in &betas {
        let map = LeverageMap::new(beta)?;
        if let Some(end) = map.u_upper().finite() {
            table.meta(&format!("support-endpoint beta={}", num(beta)), num(end));
        }
    }
    for beta in betas {
        let map = LeverageMap::new(beta)?;
        let mut zs = grid.abscissae();
        if let Some(end) = map.u_upper().finite() {
            zs.push(end);
            zs.sort_by(f64::total_cmp);
            zs.dedup();
        }
        for z in zs {
            let h = model.density(z)?;
            let g = model.transformed_density(&map, z)?;
            table.row(vec![num(z), num(h), num(g), num(beta)]);
        }
    }
    Ok(Outcome { table, flagged: 0 })
}

pub fn smile(
    cfg: &LoadedConfig,
    paths: Option<u64>,
    seed: Option<u64>,
) -> Result<Outcome, CliError> {
    let model = cfg.model()?;
    let vol = cfg.local_vol()?;
    let t = cfg.maturity()?;
    let x = cfg.config.market.x;
    let mc = cfg.mc(paths, seed)?;
    let strikes = cfg.strikes()?;
    let mut table = Table::new(&[
        "beta",
        "K",
        "log_moneyness",
        "side",
        "mc_price",
        "mc_stderr",
        "mc_iv",
        "mc_stderr_low",
        "mc_stderr_high",
        "asym_iv",
        "default_fraction",
        "valid",
    ]);
    table.meta("seed", mc.seed.to_string());
    table.meta("paths", mc.paths.to_string());
    table.meta("steps", mc.steps.to_string());
    table.meta(
        "scheme",
        match mc.scheme {
            Scheme::JumpAdapted => "jump_adapted",
            Scheme::GridIncrement => "grid_increment",
        }
        .into(),
    );
    if !model.is_finite_activity() {
        table.meta("eps", num(mc.eps()));
    }
    table.meta("antithetic", mc.antithetic.to_string());
    table.meta("t", num(t));
    table.meta("x", num(x));

    let mut flagged = 0;
    for beta in cfg.betas()? {
        let base = MarketSpec::new(x, 1.0, t, beta)?;
        let otm: Vec<f64> = strikes
            .iter()
            .copied()
            .filter(|&k| {
                base.with_strike(k)
                    .map(|s| s.moneyness() != Moneyness::AtTheMoney)
                    .unwrap_or(false)
            })
            .collect();
        let rows = if otm.is_empty() {
            Vec::new()
        } else {
            let paths = Simulator::new(&base, &vol, &model, &mc)?.run();
            smile_from_paths(&base, &otm, &model, &paths)?
        };
        let mut rows = rows.into_iter().peekable();
        for &k in &strikes {
            match rows.peek() {
                Some(r) if r.strike == k => {
                    let r = rows.next().expect("peeked");
                    let valid = r.valid();
                    flagged += usize::from(!valid);
                    let asym = if r.asym_valid {
                        num(r.asym_iv)
                    } else {
                        String::new()
                    };
                    table.row(vec![
                        num(beta),
                        num(k),
                        num(r.log_moneyness),
                        r.side.as_str().into(),
                        num(r.mc_price),
                        num(r.mc_stderr),
                        opt(r.mc_iv),
                        opt(r.mc_iv_low),
                        opt(r.mc_iv_high),
                        asym,
                        num(r.default_fraction),
                        valid.to_string(),
                    ]);
                }
                _ => {
                    flagged += 1;
                    let mut row = vec![num(beta), num(k), num(k.ln() - x), String::new()];
                    row.extend(std::iter::repeat_n(String::new(), 7));
                    row.push("false".into());
                    table.row(row);
                }
            }
        }
    }
    Ok(Outcome { table, flagged })
}

pub fn diagnose(cfg: &LoadedConfig) -> Result<Outcome, CliError> {
    let model = cfg.model()?;
    let vol = cfg.local_vol()?;
    let t = cfg.maturity()?;
    let x = cfg.config.market.x;
    let trunc = cfg.trunc()?.clone();
    if let Some(k) = trunc.strike {
        if k <= x.exp() {
            return Err(cfg
                .error_at(
                    &["trunc", "strike"],
                    "the error bound needs an out-of-the-money call strike",
                )
                .into());
        }
    }
    let mut table = Table::new(&[
        "beta",
        "eps",
        "status",
        "beta_eps",
        "lambda_eps",
        "d_eps",
        "c_const",
        "c2_hat",
        "c3_hat",
        "mean_exp_jump",
        "default_intensity",
        "i2_bound",
    ]);
    if let Some(k) = trunc.strike {
        table.meta("strike", num(k));
    }
    table.meta("t", num(t));
    let mut flagged = 0;
    for beta in cfg.betas()? {
        let map = LeverageMap::new(beta)?;
        for &eps in &trunc.eps {
            let Ok(c_eps) = TruncationFn::new(eps, &map) else {
                flagged += 1;
                let mut row = vec![num(beta), num(eps), "invalid_eps".into()];
                row.extend(std::iter::repeat_n(String::new(), 9));
                table.row(row);
                continue;
            };
            let c = error_constants(&model, &map, &vol, &c_eps)?;
            let bound = match trunc.strike {
                Some(k) => num(i2_error_bound(&c, &MarketSpec::new(x, k, t, beta)?)?),
                None => String::new(),
            };
            table.row(vec![
                num(beta),
                num(eps),
                "ok".into(),
                num(c.beta_eps),
                num(c.lambda_eps),
                num(c.d_eps),
                num(c.c_const),
                num(c.c2_hat),
                num(c.c3_hat),
                num(c.mean_exp_jump),
                num(c.default_intensity),
                bound,
            ]);
        }
    }
    Ok(Outcome { table, flagged })
}

/// Closed forms against quadrature for the reference Kou and Variance Gamma models.
/// Rows failing their tolerance are flagged.
pub fn selftest() -> Result<Outcome, CliError> {
    let kou = LevyModel::kou(KouParams::new(15.0, 1.0 / 3.0, 2.0 / 3.0, 25.0, 15.0)?)?;
    let vg = LevyModel::variance_gamma(VgParams::new(0.1083, -0.3726, 0.4344)?)?;
    let betas = [-3.0, -2.0, -1.0, 1.0, 2.0, 3.0];
    let mut table = Table::new(&["check", "max_abs_error", "tolerance", "status"]);
    let mut flagged = 0;
    let mut record = |table: &mut Table, name: &str, err: f64, tol: f64| {
        let ok = err <= tol;
        flagged += usize::from(!ok);
        table.row(vec![
            name.into(),
            num(err),
            num(tol),
            if ok { "ok" } else { "drift" }.into(),
        ]);
    };

    let mut err: f64 = 0.0;
    for beta in betas {
        for i in 1..=10 {
            let up = MarketSpec::new(0.0, 1.0 + 0.1 * i as f64, 5.0 / 365.0, beta)?;
            let down = up.with_strike(1.0 - 0.09 * i as f64)?;
            err = err.max(
                (b1_call(&up, &kou)?.coefficient - b1_call_by_quadrature(&up, &kou)?.coefficient)
                    .abs(),
            );
            err = err.max(
                (b1_put(&down, &kou)?.coefficient - b1_put_by_quadrature(&down, &kou)?.coefficient)
                    .abs(),
            );
        }
    }
    record(&mut table, "kou_leading_coefficients", err, 1e-9);

    let mut err: f64 = 0.0;
    for beta in betas {
        let map = LeverageMap::new(beta)?;
        err = err
            .max((kou.default_intensity(&map)? - kou.default_intensity_by_quadrature(&map)?).abs());
    }
    record(&mut table, "kou_default_intensity", err, 1e-12);

    for (name, m) in [("kou_mu_jump_term", &kou), ("vg_mu_jump_term", &vg)] {
        let err = (mu_jump_term(m)? - mu_jump_term_by_quadrature(m)?).abs();
        record(&mut table, name, err, 1e-9);
    }
    Ok(Outcome { table, flagged })
}
