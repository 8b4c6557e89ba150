use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const KOU: &str = r#"{
  "model": {"kind": "kou", "lambda": 15, "p": 0.3333333333333333, "q": 0.6666666666666667,
            "eta1": 25, "eta2": 15},
  "localvol": {"a": 0.05, "b": -0.02, "c": 0.5},
  "market": {"t": 0.0136986301369863, "betas": [2, -2, 1, -1], MARKET},
  "mc": {"paths": 4000, "steps": 20, "seed": 1},
  "trunc": {"eps": [0.1, 0.9], "strike": 1.05}
}"#;

fn kou_config(market: &str) -> String {
    KOU.replace("MARKET", market)
}

struct Run {
    dir: TempDir,
}

impl Run {
    fn new() -> Self {
        Run {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn write(&self, name: &str, text: &str) -> PathBuf {
        let p = self.dir.path().join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    fn letf(&self, args: &[&str], config: &Path) -> (Output, String) {
        let out = self.dir.path().join("out.csv");
        let _ = std::fs::remove_file(&out);
        let output = Command::new(env!("CARGO_BIN_EXE_letf"))
            .args(args)
            .arg("--config")
            .arg(config)
            .arg("--out")
            .arg(&out)
            .output()
            .unwrap();
        (output, std::fs::read_to_string(&out).unwrap_or_default())
    }
}

/// Header and records of a CSV with `#` comments.
fn parse(csv: &str) -> (Vec<String>, Vec<csv::StringRecord>) {
    assert!(csv.starts_with("# schema-version: 1\n"), "{csv}");
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(csv.as_bytes());
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|x| x.unwrap()).collect();
    (header, rows)
}

fn col(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap()
}

#[test]
fn price_table_covers_every_cell_in_order() {
    let run = Run::new();
    let cfg = run.write(
        "c.json",
        &kou_config(r#""log_moneyness_grid": {"from": -0.06, "to": 0.06, "count": 13}"#),
    );
    let (o, text) = run.letf(&["price"], &cfg);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let (h, rows) = parse(&text);
    assert_eq!(rows.len(), 4 * 12 * 2);
    let betas: Vec<f64> = rows
        .iter()
        .map(|r| r[col(&h, "beta")].parse().unwrap())
        .collect();
    assert!(betas.windows(2).all(|w| w[0] <= w[1]));
    // Put minus call equals K − 1 for each strike.
    for pair in rows.chunks(2) {
        let k: f64 = pair[0][col(&h, "K")].parse().unwrap();
        let c: f64 = pair[0][col(&h, "leading_price")].parse().unwrap();
        let p: f64 = pair[1][col(&h, "leading_price")].parse().unwrap();
        assert!((p - c - (k - 1.0)).abs() < 1e-15);
    }
}

#[test]
fn empty_strikes_give_a_header_only_table() {
    let run = Run::new();
    let cfg = run.write("c.json", &kou_config(r#""strikes": []"#));
    let (o, text) = run.letf(&["price"], &cfg);
    assert_eq!(o.status.code(), Some(0));
    let (h, rows) = parse(&text);
    assert!(rows.is_empty() && h.len() == 9);
}

#[test]
fn at_the_money_rows_are_flagged() {
    let run = Run::new();
    let cfg = run.write("c.json", &kou_config(r#""strikes": [0.95, 1.0, 1.05]"#));
    let (o, text) = run.letf(&["price"], &cfg);
    assert_eq!(o.status.code(), Some(3));
    let (h, rows) = parse(&text);
    let flagged = rows
        .iter()
        .filter(|r| &r[col(&h, "status")] == "unsupported")
        .count();
    assert_eq!(flagged, 8);
    assert_eq!(rows.len(), 24);
}

#[test]
fn density_support_and_unit_leverage() {
    let run = Run::new();
    let cfg = run.write(
        "c.json",
        r#"{
  "model": {"kind": "kou", "lambda": 1, "p": 0.3333333333333333, "q": 0.6666666666666667,
            "eta1": 3, "eta2": 1.5},
  "localvol": {"a": 0.05, "b": -0.02, "c": 0.5},
  "market": {"t": 0.01, "betas": [-2, 1, 2]},
  "density": {"z_max": 2, "points": 100}
}"#,
    );
    let (o, text) = run.letf(&["density"], &cfg);
    assert_eq!(o.status.code(), Some(0));
    let end: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("# support-endpoint beta=-2.0: "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((end - 3f64.ln()).abs() < 1e-15);
    let (h, rows) = parse(&text);
    let (z, hh, g, b) = (col(&h, "z"), col(&h, "h"), col(&h, "g"), col(&h, "beta"));
    let mut saw_endpoint = false;
    for r in &rows {
        let zv: f64 = r[z].parse().unwrap();
        assert_ne!(zv, 0.0);
        match &r[b] {
            "1.0" => assert_eq!(r[hh], r[g]),
            "-2.0" if zv >= end => {
                saw_endpoint |= zv == end;
                assert_eq!(r[g].parse::<f64>().unwrap(), 0.0);
            }
            _ => {}
        }
    }
    assert!(saw_endpoint);
}

#[test]
fn smile_schema_and_overrides() {
    let run = Run::new();
    let cfg = run.write("c.json", &kou_config(r#""log_moneyness": [-0.04, 0.04]"#));
    let (o, text) = run.letf(&["smile", "--paths", "2000", "--seed", "77"], &cfg);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert!(text.contains("# seed: 77\n") && text.contains("# paths: 2000\n"));
    let (h, rows) = parse(&text);
    assert_eq!(rows.len(), 8);
    for r in &rows {
        let mc: f64 = r[col(&h, "mc_iv")].parse().unwrap();
        let lo: f64 = r[col(&h, "mc_stderr_low")].parse().unwrap();
        let hi: f64 = r[col(&h, "mc_stderr_high")].parse().unwrap();
        assert!(lo < mc && mc < hi);
        assert_eq!(&r[col(&h, "valid")], "true");
    }
    let (_, again) = run.letf(&["smile", "--paths", "2000", "--seed", "77"], &cfg);
    assert_eq!(text, again);
}

#[test]
fn zero_paths_is_a_located_config_error() {
    let run = Run::new();
    let cfg = run.write(
        "c.json",
        &kou_config(r#""strikes": [1.05]"#).replace("\"paths\": 4000", "\"paths\": 0"),
    );
    let (o, text) = run.letf(&["smile"], &cfg);
    assert_eq!(o.status.code(), Some(2));
    assert!(text.is_empty());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 6") && err.contains("paths"), "{err}");
}

#[test]
fn malformed_json_is_a_config_error() {
    let run = Run::new();
    let cfg = run.write("c.json", "{\n  \"model\": [\n}");
    let (o, _) = run.letf(&["price"], &cfg);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line"));
}

#[test]
fn diagnose_flags_invalid_truncation_levels() {
    let run = Run::new();
    let cfg = run.write("c.json", &kou_config(r#""strikes": []"#));
    let (o, text) = run.letf(&["diagnose"], &cfg);
    assert_eq!(o.status.code(), Some(3));
    let (h, rows) = parse(&text);
    assert_eq!(rows.len(), 8);
    for r in &rows {
        let eps = &r[col(&h, "eps")];
        let beta: f64 = r[col(&h, "beta")].parse().unwrap();
        let expect_ok = eps == "0.1" || (beta == 1.0 && eps == "0.9");
        assert_eq!(&r[col(&h, "status")] == "ok", expect_ok, "{r:?}");
        if beta == 2.0 && eps == "0.1" {
            let bound: f64 = r[col(&h, "i2_bound")].parse().unwrap();
            assert!((bound - 0.320_629_446_799_398_8).abs() < 1e-9);
        }
    }
}

#[test]
fn output_directory_routing() {
    let run = Run::new();
    let dir = run.dir.path().join("results");
    let text = kou_config(r#""strikes": [1.1]"#).replace(
        "\"trunc\"",
        &format!(
            "\"output\": {{\"directory\": {:?}}},\n  \"trunc\"",
            dir.display().to_string()
        ),
    );
    let cfg = run.write("c.json", &text);
    let status = Command::new(env!("CARGO_BIN_EXE_letf"))
        .args(["price", "--config"])
        .arg(&cfg)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(std::fs::read_to_string(dir.join("price.csv"))
        .unwrap()
        .starts_with("# schema-version: 1"));
}

#[test]
fn selftest_passes() {
    let o = Command::new(env!("CARGO_BIN_EXE_letf"))
        .arg("selftest")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let (h, rows) = parse(&String::from_utf8(o.stdout).unwrap());
    assert!(rows.len() >= 4);
    assert!(rows.iter().all(|r| &r[col(&h, "status")] == "ok"));
}

#[test]
fn bad_thread_count_is_rejected() {
    let run = Run::new();
    let cfg = run.write("c.json", &kou_config(r#""strikes": [1.1]"#));
    let o = Command::new(env!("CARGO_BIN_EXE_letf"))
        .args(["price", "--config"])
        .arg(&cfg)
        .env("LETF_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}
