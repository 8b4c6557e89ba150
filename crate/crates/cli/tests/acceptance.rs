//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::process::Command;
use std::time::{Duration, Instant};

use letf_core::asymptotics::{
    b1_call, b1_call_by_quadrature, b1_put, b1_put_by_quadrature, etf_equivalent, leading_price,
};
use letf_core::impliedvol::{bs_invert_ln_otm, iv_expansion};
use letf_core::levy::{KouParams, LeverageMap, LevyModel, VgParams};
use letf_core::model::{LocalVol, MarketSpec, Side};
use letf_core::montecarlo::{smile_from_paths, McConfig, PathState, Simulator, SmileRow};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const T: f64 = 5.0 / 365.0;

fn kou() -> LevyModel {
    LevyModel::kou(KouParams::new(15.0, 1.0 / 3.0, 2.0 / 3.0, 25.0, 15.0).unwrap()).unwrap()
}

fn vg() -> LevyModel {
    LevyModel::variance_gamma(VgParams::new(0.1083, -0.3726, 0.4344).unwrap()).unwrap()
}

fn kou_vol() -> LocalVol {
    LocalVol::new(0.05, -0.02, 0.5).unwrap()
}

fn vg_vol() -> LocalVol {
    LocalVol::new(0.005, -0.002, 0.5).unwrap()
}

/// `ln K − x` grid on `[−0.06, 0.06]` without the money.
fn strike_grid() -> Vec<f64> {
    (-6..=6)
        .filter(|i| *i != 0)
        .map(|i| (0.01 * i as f64).exp())
        .collect()
}

struct Verdict {
    pass: bool,
    detail: String,
}

type Criterion = (u32, &'static str, fn() -> Verdict);

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn criterion_1() -> Verdict {
    let m = kou();
    let (lambda, p, q, eta1, eta2) = (15.0f64, 1.0 / 3.0, 2.0 / 3.0, 25.0f64, 15.0f64);
    let call = b1_call(&MarketSpec::new(0.0, 1.1, T, 1.0).unwrap(), &m)
        .unwrap()
        .coefficient;
    let call_ref = lambda * p * 1.1f64.powf(1.0 - eta1) / (eta1 - 1.0);
    let put = b1_put(&MarketSpec::new(0.0, 0.9, T, 1.0).unwrap(), &m)
        .unwrap()
        .coefficient;
    let put_ref = lambda * q * 0.9f64.powf(1.0 + eta2) / (eta2 + 1.0);
    let closed = ((call - call_ref) / call_ref)
        .abs()
        .max(((put - put_ref) / put_ref).abs());

    let mut quad: f64 = 0.0;
    for beta in [-3.0, -2.0, -1.0, 1.0, 2.0, 3.0] {
        for i in 1..=10 {
            let up = MarketSpec::new(0.0, 1.0 + 0.05 * i as f64, T, beta).unwrap();
            let down = up.with_strike(1.0 - 0.05 * i as f64 + 0.01).unwrap();
            let c = b1_call(&up, &m).unwrap().coefficient
                - b1_call_by_quadrature(&up, &m).unwrap().coefficient;
            let p = b1_put(&down, &m).unwrap().coefficient
                - b1_put_by_quadrature(&down, &m).unwrap().coefficient;
            quad = quad.max(c.abs()).max(p.abs());
        }
    }
    verdict(
        closed < 1e-12 && quad < 1e-9,
        format!("closed-form rel err {closed:.2e} (tol 1e-12), quadrature abs err {quad:.2e} (tol 1e-9)"),
    )
}

fn criterion_2() -> Verdict {
    let m = kou();
    let map = LeverageMap::new(2.0).unwrap();
    let exact = 10.0 * 2f64.powi(-15);
    let closed = m.default_intensity(&map).unwrap();
    let quad = m.default_intensity_by_quadrature(&map).unwrap();
    let intensity_ok = closed == exact && (closed - quad).abs() < 1e-12;

    let n: u64 = 10_000_000;
    let spec = MarketSpec::new(0.0, 1.05, T, 2.0).unwrap();
    let sim = Simulator::new(&spec, &kou_vol(), &m, &McConfig::new(n, 100, 20_170)).unwrap();
    let frac = sim.run().default_fraction();
    let p = -(-T * exact).exp_m1();
    let se = (p * (1.0 - p) / n as f64).sqrt();
    let z = (frac - p) / se;
    verdict(
        intensity_ok && z.abs() < 3.0,
        format!(
            "nu(A^c) = {closed:e} vs 10*2^-15 = {exact:e}, quadrature diff {:.1e}; MC default fraction {frac:e} vs {p:e} over {n} paths, z = {z:.2} (|z| < 3)",
            (closed - quad).abs()
        ),
    )
}

fn criterion_3() -> Verdict {
    let m = kou();
    let spec = MarketSpec::new(0.0, 1.05, T, 2.0).unwrap();
    let b1 = b1_call(&spec, &m).unwrap().coefficient;
    let mut rows = Vec::new();
    for days in [20.0, 10.0, 5.0, 2.0] {
        let s = spec.with_t(days / 365.0).unwrap();
        let r = Simulator::new(&s, &kou_vol(), &m, &McConfig::new(1_000_000, 100, 31))
            .unwrap()
            .estimate_price(Side::Call);
        rows.push((days, r.price / s.t, r.stderr / s.t));
    }
    // Successive distances to b₁ may not grow by more than two combined standard errors.
    let mut monotone = true;
    for w in rows.windows(2) {
        let (d0, d1) = ((w[0].1 - b1).abs(), (w[1].1 - b1).abs());
        let slack = 2.0 * (w[0].2.powi(2) + w[1].2.powi(2)).sqrt();
        monotone &= d1 <= d0 + slack;
    }
    let last = rows.last().unwrap();
    let rel = (last.1 - b1).abs() / b1;
    let ci_rel = (rel - 2.0 * last.2 / b1).max(0.0);
    let listing: Vec<String> = rows
        .iter()
        .map(|(d, r, se)| format!("t={d}/365: {r:.5}±{se:.5}"))
        .collect();
    verdict(
        monotone && ci_rel < 0.10,
        format!(
            "b1 = {b1:.5}; price/t {}; t=2/365 rel gap {:.1}% (tol 10%, CI-adjusted {:.1}%)",
            listing.join(", "),
            100.0 * rel,
            100.0 * ci_rel
        ),
    )
}

/// Least-squares slope of `(k, v)` pairs.
fn slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mk = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mv = points.iter().map(|p| p.1).sum::<f64>() / n;
    let num: f64 = points.iter().map(|p| (p.0 - mk) * (p.1 - mv)).sum();
    let den: f64 = points.iter().map(|p| (p.0 - mk).powi(2)).sum();
    num / den
}

fn smile_checks(label: &str, model: &LevyModel, vol: &LocalVol, cfg: &McConfig) -> (bool, String) {
    let strikes = strike_grid();
    let mut ok = true;
    let mut notes = Vec::new();
    for beta in [-2.0, -1.0, 1.0, 2.0] {
        let spec = MarketSpec::new(0.0, 1.0, T, beta).unwrap();
        let paths = Simulator::new(&spec, vol, model, cfg).unwrap().run();
        let rows: Vec<SmileRow> = smile_from_paths(&spec, &strikes, model, &paths).unwrap();
        let valid: Vec<&SmileRow> = rows.iter().filter(|r| r.valid()).collect();
        // Below: asymptotic IV under the MC IV of price + 3 standard errors.
        let below = valid
            .iter()
            .filter(|r| {
                let hi = letf_core::montecarlo::implied_vol_of(
                    &spec.with_strike(r.strike).unwrap(),
                    r.mc_price + 3.0 * r.mc_stderr,
                    r.side,
                );
                hi.is_some_and(|hi| r.asym_iv < hi)
            })
            .count();
        let strict = valid
            .iter()
            .filter(|r| r.mc_iv.is_some_and(|mc| r.asym_iv < mc))
            .count();
        if strict != valid.len() {
            notes.push(format!(
                "{label} beta={beta}: strictly below at {strict}/{} strikes",
                valid.len()
            ));
        }
        let mut slopes_agree = true;
        for side in [Side::Put, Side::Call] {
            let pts: Vec<&&SmileRow> = valid.iter().filter(|r| r.side == side).collect();
            if pts.len() < 2 {
                continue;
            }
            let asym: Vec<(f64, f64)> = pts.iter().map(|r| (r.log_moneyness, r.asym_iv)).collect();
            let mc: Vec<(f64, f64)> = pts
                .iter()
                .map(|r| (r.log_moneyness, r.mc_iv.unwrap()))
                .collect();
            let (sa, sm) = (slope(&asym), slope(&mc));
            if sa.signum() != sm.signum() {
                slopes_agree = false;
                notes.push(format!(
                    "{label} beta={beta} {} slopes asym {sa:.3} mc {sm:.3}",
                    side.as_str()
                ));
            }
        }
        let invalid = rows.len() - valid.len();
        if below != valid.len() {
            notes.push(format!(
                "{label} beta={beta}: asym < mc at {below}/{} strikes",
                valid.len()
            ));
        }
        if invalid > 0 {
            notes.push(format!("{label} beta={beta}: {invalid} invalid strikes"));
        }
        ok &= below == valid.len() && slopes_agree && !valid.is_empty();
    }
    (ok, notes.join("; "))
}

fn criterion_4() -> Verdict {
    let cfg = McConfig::new(100_000, 100, 44);
    let (kou_ok, kou_notes) = smile_checks("kou", &kou(), &kou_vol(), &cfg);
    let (vg_ok, vg_notes) = smile_checks("vg", &vg(), &vg_vol(), &cfg);
    let notes = [kou_notes, vg_notes]
        .into_iter()
        .filter(|s| !s.is_empty())
        .collect::<Vec<_>>();
    verdict(
        kou_ok && vg_ok,
        format!(
            "Kou {}, VG {} (1e5 paths, 3-stderr band){}",
            if kou_ok { "ok" } else { "failed" },
            if vg_ok { "ok" } else { "failed" },
            if notes.is_empty() {
                String::new()
            } else {
                format!(": {}", notes.join("; "))
            }
        ),
    )
}

fn criterion_5() -> Verdict {
    let m = kou();
    let mut errs = Vec::new();
    for t in [1e-2, 1e-3, 1e-4, 1e-5] {
        let s = MarketSpec::new(0.0, 1.1, t, 1.0).unwrap();
        let b = b1_call(&s, &m).unwrap();
        let e = iv_expansion(&s, &b).unwrap();
        let iv = bs_invert_ln_otm(0.0, 1.1, t, (b.coefficient * t).ln()).unwrap();
        errs.push((iv * iv - e.iv_sq).abs() / e.sigma1);
    }
    let decreasing = errs.windows(2).all(|w| w[1] < w[0]);
    let mut spread: f64 = 0.0;
    let one = MarketSpec::new(0.0, 1.1, T, 1.0).unwrap();
    let s1 = iv_expansion(&one, &b1_call(&one, &m).unwrap())
        .unwrap()
        .sigma1;
    for beta in [-3.0, -2.0, -1.0, 2.0, 3.0] {
        let s = one.with_beta(beta).unwrap();
        let e = iv_expansion(&s, &b1_call(&s, &m).unwrap()).unwrap();
        spread = spread.max((e.sigma1 - s1).abs());
    }
    verdict(
        decreasing && spread <= 1e-15,
        format!(
            "relative errors {} over t = 1e-2..1e-5; sigma1 spread across beta {spread:.1e} (tol 1e-15)",
            errs.iter().map(|e| format!("{e:.4}")).collect::<Vec<_>>().join(" > ")
        ),
    )
}

fn criterion_6() -> Verdict {
    let mut parity_ok = true;
    let mut worst_price_ulps: f64 = 0.0;
    for m in [kou(), vg()] {
        for beta in [-3.0, -2.0, -1.0, 1.0, 2.0, 3.0] {
            for k in [0.8, 0.9, 0.97, 1.03, 1.1, 1.3] {
                let s = MarketSpec::new(0.0, k, T, beta).unwrap();
                let call = leading_price(&s, &m, Side::Call).unwrap();
                let put = leading_price(&s, &m, Side::Put).unwrap();
                parity_ok &= put.intrinsic - call.intrinsic == k - s.spot();
                parity_ok &= put.coefficient.to_bits() == call.coefficient.to_bits();
                let diff = put.price(T) - call.price(T) - (k - s.spot());
                worst_price_ulps = worst_price_ulps.max(diff.abs() / (f64::EPSILON * k));
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut hedge_err: f64 = 0.0;
    for i in 0..50 {
        let m = if i % 2 == 0 { kou() } else { vg() };
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let beta = sign * rng.random_range(1.0..3.0);
        let x = rng.random_range(-0.2..0.2);
        let k = (x + rng.random_range(0.005..0.4f64)).exp();
        let s = MarketSpec::new(x, k, T, beta).unwrap();
        let b1 = b1_call(&s, &m).unwrap();
        let err = match etf_equivalent(&s).unwrap() {
            Some((e, side)) => {
                (leading_price(&e, &m, side).unwrap().coefficient - b1.coefficient).abs()
            }
            None if b1.degenerate => 0.0,
            None => f64::INFINITY,
        };
        hedge_err = hedge_err.max(err);
    }
    verdict(
        parity_ok && worst_price_ulps <= 2.0 && hedge_err < 1e-9,
        format!(
            "intrinsic and coefficient parity exact: {parity_ok}; assembled prices within {worst_price_ulps:.1} ulp; ETF-equivalent max diff over 50 random specs {hedge_err:.1e} (tol 1e-9)"
        ),
    )
}

fn criterion_7() -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, m) in [("kou", kou()), ("vg", vg())] {
        let below = b1_call(&MarketSpec::new(0.0, 2.0 - 1e-3, T, -1.0).unwrap(), &m).unwrap();
        let above = b1_call(&MarketSpec::new(0.0, 2.0 + 1e-3, T, -1.0).unwrap(), &m).unwrap();
        ok &= below.coefficient > 0.0
            && !below.degenerate
            && above.coefficient == 0.0
            && above.degenerate;
        parts.push(format!(
            "{name}: b1(2-1e-3) = {:e}, b1(2+1e-3) = {} degenerate={}",
            below.coefficient, above.coefficient, above.degenerate
        ));
    }
    verdict(ok, parts.join("; "))
}

fn criterion_8() -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, m, vol) in [("kou", kou(), kou_vol()), ("vg", vg(), vg_vol())] {
        for beta in [-2.0, 2.0] {
            let spec = MarketSpec::new(0.0, 1.05, T, beta).unwrap();
            let p = Simulator::new(&spec, &vol, &m, &McConfig::new(100_000, 100, 88))
                .unwrap()
                .run();
            for (label, s) in [
                ("S", p.mean_of(PathState::etf)),
                ("L", p.mean_of(PathState::letf)),
            ] {
                let z = (s.mean - 1.0) / s.stderr;
                ok &= z.abs() < 3.0;
                parts.push(format!("{name} beta={beta} {label} z={z:.2}"));
            }
        }
    }
    verdict(ok, parts.join(", "))
}

fn criterion_9() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.json");
    std::fs::write(
        &config,
        r#"{
  "model": {"kind": "kou", "lambda": 15, "p": 0.3333333333333333, "q": 0.6666666666666667, "eta1": 25, "eta2": 15},
  "localvol": {"a": 0.05, "b": -0.02, "c": 0.5},
  "market": {"t": 0.0136986301369863, "betas": [-2, -1, 1, 2],
             "log_moneyness_grid": {"from": -0.06, "to": 0.06, "count": 13}},
  "mc": {"paths": 20000, "steps": 100, "seed": 9}
}"#,
    )
    .unwrap();
    let mut outputs = Vec::new();
    for threads in ["1", "3"] {
        let out = dir.path().join(format!("smile-{threads}.csv"));
        let status = Command::new(env!("CARGO_BIN_EXE_letf"))
            .args(["smile", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .env("LETF_THREADS", threads)
            .status()
            .unwrap();
        outputs.push((status.code(), std::fs::read(&out).unwrap_or_default()));
    }
    let identical = !outputs[0].1.is_empty() && outputs[0].1 == outputs[1].1;
    verdict(
        identical,
        format!(
            "LETF_THREADS=1 vs 3: exit codes {:?}/{:?}, {} bytes, identical = {identical}",
            outputs[0].0,
            outputs[1].0,
            outputs[0].1.len()
        ),
    )
}

fn main() {
    let criteria: [Criterion; 9] = [
        (1, "Kou closed-form oracle suite", criterion_1),
        (2, "default intensity and MC default fraction", criterion_2),
        (3, "price/t convergence to b1", criterion_3),
        (4, "smile claims at desk scale", criterion_4),
        (5, "implied volatility expansion", criterion_5),
        (6, "parity and ETF equivalence", criterion_6),
        (7, "degeneracy boundary", criterion_7),
        (8, "martingale suite", criterion_8),
        (9, "determinism across thread counts", criterion_9),
    ];
    let filter: Vec<u32> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut failed = 0;
    for (n, name, run) in criteria {
        if !filter.is_empty() && !filter.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let v = run();
        let took: Duration = start.elapsed();
        failed += usize::from(!v.pass);
        println!(
            "{} criterion {n} ({name}) [{:.1}s]: {}",
            if v.pass { "PASS" } else { "FAIL" },
            took.as_secs_f64(),
            v.detail
        );
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
