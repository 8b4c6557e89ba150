//! JSON run configuration and its validation.

use std::fmt;

use letf_core::levy::{KouParams, LevyModel, VgParams};
use letf_core::model::LocalVol;
use letf_core::montecarlo::{McConfig, Scheme};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    pub localvol: LocalVolSection,
    pub market: MarketSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc: Option<McSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trunc: Option<TruncSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<DensitySection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Kou,
    VarianceGamma,
}

/// Parameters of the jump part; which fields are required depends on `kind`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub kind: ModelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalVolSection {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketSection {
    #[serde(default)]
    pub x: f64,
    pub t: f64,
    pub betas: Vec<f64>,
    /// Absolute strikes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strikes: Option<Vec<f64>>,
    /// Strikes given as `ln K − x`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_moneyness: Option<Vec<f64>>,
    /// Evenly spaced `ln K − x` values with the at-the-money point removed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_moneyness_grid: Option<Grid>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub from: f64,
    pub to: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeName {
    JumpAdapted,
    GridIncrement,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSection {
    pub paths: u64,
    #[serde(default = "default_steps")]
    pub steps: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default = "default_scheme")]
    pub scheme: SchemeName,
    #[serde(default)]
    pub antithetic: bool,
}

fn default_steps() -> u32 {
    100
}

fn default_scheme() -> SchemeName {
    SchemeName::JumpAdapted
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directory: Option<String>,
    #[serde(default = "default_format")]
    pub format: String,
}

fn default_format() -> String {
    "csv".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncSection {
    pub eps: Vec<f64>,
    /// Strike for the error bound column; omitted means no bound is reported.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strike: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensitySection {
    /// The grid covers `[−z_max, z_max]` without the origin.
    pub z_max: f64,
    pub points: usize,
    /// Log-spaced magnitudes; defaults to on for infinite-activity models.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_spacing: Option<bool>,
    /// Smallest magnitude of a log-spaced grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_min: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, self.column) {
            (Some(l), Some(c)) => {
                write!(f, "config error at line {l}, column {c}: {}", self.message)
            }
            (Some(l), None) => write!(f, "config error at line {l}: {}", self.message),
            _ => write!(f, "config error: {}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Positions of every object key in a JSON document, keyed by its path.
#[derive(Debug, Default)]
struct KeyIndex {
    keys: Vec<(Vec<String>, usize, usize)>,
}

impl KeyIndex {
    fn scan(src: &str) -> Self {
        let mut keys = Vec::new();
        let mut path: Vec<String> = Vec::new();
        let mut pending: Option<String> = None;
        let chars: Vec<char> = src.chars().collect();
        let (mut line, mut col) = (1usize, 1usize);
        let mut i = 0;
        let advance = |c: char, line: &mut usize, col: &mut usize| {
            if c == '\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
        };
        while i < chars.len() {
            let c = chars[i];
            match c {
                '"' => {
                    let (start_line, start_col) = (line, col);
                    let mut s = String::new();
                    advance(c, &mut line, &mut col);
                    i += 1;
                    while i < chars.len() && chars[i] != '"' {
                        if chars[i] == '\\' && i + 1 < chars.len() {
                            advance(chars[i], &mut line, &mut col);
                            i += 1;
                        }
                        s.push(chars[i]);
                        advance(chars[i], &mut line, &mut col);
                        i += 1;
                    }
                    if i < chars.len() {
                        advance(chars[i], &mut line, &mut col);
                        i += 1;
                    }
                    let mut j = i;
                    while j < chars.len() && chars[j].is_whitespace() {
                        j += 1;
                    }
                    if j < chars.len() && chars[j] == ':' {
                        let mut full: Vec<String> =
                            path.iter().filter(|p| !p.is_empty()).cloned().collect();
                        full.push(s.clone());
                        keys.push((full, start_line, start_col));
                        pending = Some(s);
                    }
                    continue;
                }
                '{' | '[' => path.push(pending.take().unwrap_or_default()),
                '}' | ']' => {
                    path.pop();
                    pending = None;
                }
                ',' => pending = None,
                _ => {}
            }
            advance(c, &mut line, &mut col);
            i += 1;
        }
        KeyIndex { keys }
    }

    fn find(&self, path: &[&str]) -> Option<(usize, usize)> {
        self.keys
            .iter()
            .find(|(p, _, _)| p.len() == path.len() && p.iter().zip(path).all(|(a, b)| a == b))
            .map(|&(_, l, c)| (l, c))
    }
}

/// A parsed configuration together with the source positions of its keys.
#[derive(Debug)]
pub struct LoadedConfig {
    pub config: RunConfig,
    index: KeyIndex,
}

impl LoadedConfig {
    pub fn parse(src: &str) -> Result<Self, ConfigError> {
        let config: RunConfig = serde_json::from_str(src).map_err(|e| ConfigError {
            line: Some(e.line()),
            column: Some(e.column()),
            message: e.to_string(),
        })?;
        Ok(LoadedConfig {
            config,
            index: KeyIndex::scan(src),
        })
    }

    pub fn from_config(config: RunConfig) -> Self {
        let src = serde_json::to_string_pretty(&config).expect("config serializes");
        LoadedConfig {
            config,
            index: KeyIndex::scan(&src),
        }
    }

    /// Error located at `path`, or at its closest enclosing section.
    pub fn error_at(&self, path: &[&str], message: impl Into<String>) -> ConfigError {
        let pos = (1..=path.len())
            .rev()
            .find_map(|n| self.index.find(&path[..n]));
        ConfigError {
            line: pos.map(|p| p.0),
            column: pos.map(|p| p.1),
            message: format!("{}: {}", path.join("."), message.into()),
        }
    }

    pub fn model(&self) -> Result<LevyModel, ConfigError> {
        let m = &self.config.model;
        let need = |v: Option<f64>, key: &'static str| {
            v.ok_or_else(|| self.error_at(&["model", key], "missing parameter"))
        };
        let core = |key: &str, e: letf_core::Error| self.error_at(&["model", key], e.to_string());
        match m.kind {
            ModelKind::Kou => {
                let params = KouParams::new(
                    need(m.lambda, "lambda")?,
                    need(m.p, "p")?,
                    need(m.q, "q")?,
                    need(m.eta1, "eta1")?,
                    need(m.eta2, "eta2")?,
                )
                .map_err(|e| core(param_name(&e), e))?;
                LevyModel::kou(params).map_err(|e| core("kind", e))
            }
            ModelKind::VarianceGamma => {
                let params = VgParams::new(
                    need(m.kappa, "kappa")?,
                    need(m.theta, "theta")?,
                    need(m.sigma, "sigma")?,
                )
                .map_err(|e| core(param_name(&e), e))?;
                LevyModel::variance_gamma(params).map_err(|e| core("kind", e))
            }
        }
    }

    pub fn local_vol(&self) -> Result<LocalVol, ConfigError> {
        let v = self.config.localvol;
        LocalVol::new(v.a, v.b, v.c)
            .map_err(|e| self.error_at(&["localvol", param_name(&e)], e.to_string()))
    }

    /// Leverage ratios in ascending order.
    pub fn betas(&self) -> Result<Vec<f64>, ConfigError> {
        let mut betas = self.config.market.betas.clone();
        for &b in &betas {
            letf_core::levy::LeverageMap::new(b)
                .map_err(|e| self.error_at(&["market", "betas"], e.to_string()))?;
        }
        betas.sort_by(f64::total_cmp);
        betas.dedup();
        Ok(betas)
    }

    pub fn maturity(&self) -> Result<f64, ConfigError> {
        let t = self.config.market.t;
        if !(t > 0.0 && t.is_finite()) {
            return Err(self.error_at(
                &["market", "t"],
                format!("maturity must be positive, got {t}"),
            ));
        }
        if !self.config.market.x.is_finite() {
            return Err(self.error_at(&["market", "x"], "must be finite"));
        }
        Ok(t)
    }

    /// Strikes in ascending order.
    pub fn strikes(&self) -> Result<Vec<f64>, ConfigError> {
        let m = &self.config.market;
        let given = [
            m.strikes.is_some(),
            m.log_moneyness.is_some(),
            m.log_moneyness_grid.is_some(),
        ];
        if given.iter().filter(|g| **g).count() > 1 {
            return Err(self.error_at(
                &["market"],
                "give at most one of strikes, log_moneyness and log_moneyness_grid",
            ));
        }
        let mut strikes: Vec<f64> = if let Some(s) = &m.strikes {
            s.clone()
        } else if let Some(k) = &m.log_moneyness {
            k.iter().map(|k| (m.x + k).exp()).collect()
        } else if let Some(g) = m.log_moneyness_grid {
            if g.count < 2 || g.to.partial_cmp(&g.from) != Some(std::cmp::Ordering::Greater) {
                return Err(self.error_at(
                    &["market", "log_moneyness_grid"],
                    "needs from < to and count >= 2",
                ));
            }
            let h = (g.to - g.from) / (g.count - 1) as f64;
            (0..g.count)
                .map(|i| g.from + i as f64 * h)
                .filter(|k| k.abs() > 1e-12 * h)
                .map(|k| (m.x + k).exp())
                .collect()
        } else {
            Vec::new()
        };
        for &k in &strikes {
            if !(k > 0.0 && k.is_finite()) {
                let key = if m.strikes.is_some() {
                    "strikes"
                } else {
                    "log_moneyness"
                };
                return Err(self.error_at(
                    &["market", key],
                    format!("strike must be positive, got {k}"),
                ));
            }
        }
        strikes.sort_by(f64::total_cmp);
        strikes.dedup();
        Ok(strikes)
    }

    pub fn mc(&self, paths: Option<u64>, seed: Option<u64>) -> Result<McConfig, ConfigError> {
        let Some(s) = &self.config.mc else {
            return Err(self.error_at(&["mc"], "section required for Monte Carlo runs"));
        };
        let cfg = McConfig {
            paths: paths.unwrap_or(s.paths),
            steps: s.steps,
            eps: s.eps,
            seed: seed.unwrap_or(s.seed),
            scheme: match s.scheme {
                SchemeName::JumpAdapted => Scheme::JumpAdapted,
                SchemeName::GridIncrement => Scheme::GridIncrement,
            },
            antithetic: s.antithetic,
        };
        let model = self.model()?;
        for beta in self.betas()? {
            let map = letf_core::levy::LeverageMap::new(beta).expect("validated");
            cfg.validate(&model, &map)
                .map_err(|e| self.error_at(&["mc", param_name(&e)], e.to_string()))?;
        }
        Ok(cfg)
    }

    pub fn trunc(&self) -> Result<&TruncSection, ConfigError> {
        let t = self
            .config
            .trunc
            .as_ref()
            .ok_or_else(|| self.error_at(&["trunc"], "section required for diagnostics"))?;
        if let Some(k) = t.strike {
            if !(k > 0.0 && k.is_finite()) {
                return Err(self.error_at(
                    &["trunc", "strike"],
                    format!("strike must be positive, got {k}"),
                ));
            }
        }
        Ok(t)
    }

    pub fn density(&self, infinite_activity: bool) -> Result<DensityGrid, ConfigError> {
        let d =
            self.config.density.as_ref().ok_or_else(|| {
                self.error_at(&["density"], "section required for density output")
            })?;
        if !(d.z_max > 0.0 && d.z_max.is_finite()) {
            return Err(self.error_at(&["density", "z_max"], "must be positive"));
        }
        if d.points < 2 {
            return Err(self.error_at(&["density", "points"], "must be at least 2"));
        }
        let log = d.log_spacing.unwrap_or(infinite_activity);
        let z_min = d.z_min.unwrap_or(1e-4 * d.z_max);
        if log && !(z_min > 0.0 && z_min < d.z_max) {
            return Err(self.error_at(&["density", "z_min"], "must lie in (0, z_max)"));
        }
        Ok(DensityGrid {
            z_max: d.z_max,
            points: d.points,
            log,
            z_min,
        })
    }

    pub fn output_directory(&self) -> Result<Option<&str>, ConfigError> {
        match &self.config.output {
            None => Ok(None),
            Some(o) if o.format != "csv" => Err(self.error_at(
                &["output", "format"],
                format!("unsupported format {:?}", o.format),
            )),
            Some(o) => Ok(o.directory.as_deref()),
        }
    }
}

/// Name of the offending parameter in a core validation error.
fn param_name(e: &letf_core::Error) -> &'static str {
    match e {
        letf_core::Error::InvalidParameter { name, .. } => name,
        _ => "",
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityGrid {
    pub z_max: f64,
    pub points: usize,
    pub log: bool,
    pub z_min: f64,
}

impl DensityGrid {
    /// Abscissae in ascending order, symmetric about and excluding the origin.
    pub fn abscissae(&self) -> Vec<f64> {
        let half = self.points.div_ceil(2);
        let positive: Vec<f64> = if self.log {
            let (a, b) = (self.z_min.ln(), self.z_max.ln());
            (0..half)
                .map(|i| (a + (b - a) * i as f64 / (half.max(2) - 1) as f64).exp())
                .collect()
        } else {
            (0..half)
                .map(|i| self.z_max * (i as f64 + 1.0) / half as f64)
                .collect()
        };
        let mut z: Vec<f64> = positive.iter().rev().map(|v| -v).collect();
        z.extend(positive);
        z
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SRC: &str = r#"{
  "model": {"kind": "kou", "lambda": 15, "p": 0.3333333333333333, "q": 0.6666666666666667,
            "eta1": 25, "eta2": 15},
  "localvol": {"a": 0.05, "b": -0.02, "c": 0.5},
  "market": {
    "t": 0.0136986301369863,
    "betas": [2, -2, 1, -1],
    "log_moneyness_grid": {"from": -0.06, "to": 0.06, "count": 13}
  },
  "mc": {
    "paths": 0,
    "seed": 7
  }
}"#;

    #[test]
    fn key_positions() {
        let idx = KeyIndex::scan(SRC);
        assert_eq!(idx.find(&["market", "betas"]), Some((7, 5)));
        assert_eq!(idx.find(&["mc", "paths"]), Some((11, 5)));
        assert_eq!(idx.find(&["model", "eta2"]), Some((3, 25)));
        assert_eq!(idx.find(&["nope"]), None);
    }

    #[test]
    fn validation_errors_point_at_the_field() {
        let c = LoadedConfig::parse(SRC).unwrap();
        let e = c.mc(None, None).unwrap_err();
        assert_eq!(e.line, Some(11), "{e}");
        assert!(e.to_string().contains("paths"));
        assert!(c.mc(Some(10), None).is_ok());
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let e = LoadedConfig::parse("{\n  \"model\": {\"kind\": \"kou\",}\n}").unwrap_err();
        assert_eq!(e.line, Some(2));
        let e = LoadedConfig::parse(&SRC.replace("\"seed\"", "\"sed\"")).unwrap_err();
        assert_eq!(e.line, Some(12));
    }

    #[test]
    fn strike_grid_excludes_the_money() {
        let c = LoadedConfig::parse(SRC).unwrap();
        let k = c.strikes().unwrap();
        assert_eq!(k.len(), 12);
        assert!(k.iter().all(|k| (k.ln()).abs() > 1e-6));
        assert_eq!(c.betas().unwrap(), vec![-2.0, -1.0, 1.0, 2.0]);
    }

    #[test]
    fn missing_model_parameter() {
        let c = LoadedConfig::parse(&SRC.replace("\"eta1\": 25,", "")).unwrap();
        let e = c.model().unwrap_err();
        assert!(e.message.contains("eta1"), "{e}");
        assert_eq!(e.line, Some(2));
    }

    #[test]
    fn round_trip() {
        let c = LoadedConfig::parse(SRC).unwrap().config;
        let text = serde_json::to_string_pretty(&c).unwrap();
        let again = LoadedConfig::parse(&text).unwrap().config;
        assert_eq!(c, again);
    }

    #[test]
    fn density_grid() {
        let g = DensityGrid {
            z_max: 1.0,
            points: 10,
            log: true,
            z_min: 1e-3,
        };
        let z = g.abscissae();
        assert_eq!(z.len(), 10);
        assert!(z.windows(2).all(|w| w[0] < w[1]));
        assert!((z[5] - 1e-3).abs() < 1e-15 && (z[9] - 1.0).abs() < 1e-15);
        assert!(!z.contains(&0.0));
    }
}
