//! Flat `key = value` run configuration.
//!
//! Every key has a default; a config file and `--set` overrides replace them
//! in that order. [`RunConfig::to_pairs`] lists the fully resolved values,
//! which is what gets embedded in output metadata.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use mimo_adhoc::{Detector, Scenario};

use crate::CliError;

/// How a quantity is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathMode {
    /// Analytic and simulated where both exist, simulated otherwise.
    Auto,
    Analytic,
    Empirical,
    Both,
}

impl PathMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PathMode::Auto => "auto",
            PathMode::Analytic => "analytic",
            PathMode::Empirical => "empirical",
            PathMode::Both => "both",
        }
    }
}

impl FromStr for PathMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "auto" => Ok(PathMode::Auto),
            "analytic" => Ok(PathMode::Analytic),
            "empirical" => Ok(PathMode::Empirical),
            "both" => Ok(PathMode::Both),
            _ => Err(format!("expected auto|analytic|empirical|both, got {s:?}")),
        }
    }
}

/// Backend for the dominant-gain moments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LambdaBackend {
    MonteCarlo,
    Exact,
}

impl LambdaBackend {
    pub fn as_str(self) -> &'static str {
        match self {
            LambdaBackend::MonteCarlo => "mc",
            LambdaBackend::Exact => "exact",
        }
    }
}

impl FromStr for LambdaBackend {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "mc" => Ok(LambdaBackend::MonteCarlo),
            "exact" => Ok(LambdaBackend::Exact),
            _ => Err(format!("expected mc|exact, got {s:?}")),
        }
    }
}

/// Output encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(format!("expected csv|json, got {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub m: Vec<usize>,
    pub k: Vec<usize>,
    pub detector: Vec<Detector>,
    pub snr_db: f64,
    pub sinr_th_db: f64,
    pub c0: f64,
    pub radius: f64,
    pub eps: f64,
    pub theta: f64,
    pub csi_range: f64,
    pub rho_min: f64,
    pub rho_max: f64,
    pub rho_points: usize,
    pub grid_points: usize,
    pub trials: usize,
    pub outer: usize,
    pub seed: u64,
    pub lambda: LambdaBackend,
    pub lambda_samples: u64,
    pub path: PathMode,
    pub total_density: Option<f64>,
    pub criteria: Vec<usize>,
    /// Relative perturbation applied to η in `validate` (negative control).
    pub corrupt_eta: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            m: vec![4],
            k: vec![2, 20],
            detector: vec![Detector::Mmse],
            snr_db: 20.0,
            sinr_th_db: 10.0,
            c0: 1.0,
            radius: 3.0,
            eps: 0.1,
            theta: 4.0,
            csi_range: 2.0,
            rho_min: 0.01,
            rho_max: 2.0,
            rho_points: 40,
            grid_points: 200,
            trials: 10_000,
            outer: 2_000,
            seed: 1,
            lambda: LambdaBackend::MonteCarlo,
            lambda_samples: 1_000_000,
            path: PathMode::Auto,
            total_density: None,
            criteria: (1..=14).collect(),
            corrupt_eta: 0.0,
        }
    }
}

pub const KEYS: &[&str] = &[
    "c0",
    "corrupt_eta",
    "criteria",
    "csi_range",
    "detector",
    "eps",
    "grid_points",
    "k",
    "lambda",
    "lambda_samples",
    "m",
    "outer",
    "path",
    "radius",
    "rho_max",
    "rho_min",
    "rho_points",
    "seed",
    "sinr_th_db",
    "snr_db",
    "theta",
    "total_density",
    "trials",
];

fn bad(key: &str, msg: impl fmt::Display) -> CliError {
    CliError::Config(format!("{key}: {msg}"))
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, CliError>
where
    T::Err: fmt::Display,
{
    value.parse::<T>().map_err(|e| bad(key, format!("cannot parse {value:?}: {e}")))
}

/// Comma-separated items; integer items may be inclusive ranges `a:b`.
fn parse_usize_list(key: &str, value: &str) -> Result<Vec<usize>, CliError> {
    let mut out = Vec::new();
    for item in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if let Some((a, b)) = item.split_once(':') {
            let (a, b): (usize, usize) = (parse(key, a.trim())?, parse(key, b.trim())?);
            if a > b {
                return Err(bad(key, format!("empty range {item:?}")));
            }
            out.extend(a..=b);
        } else {
            out.push(parse(key, item)?);
        }
    }
    if out.is_empty() {
        return Err(bad(key, "list must not be empty"));
    }
    Ok(out)
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn float(x: f64) -> String {
    format!("{x:?}")
}

impl RunConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let value = value.trim();
        match key {
            "m" => self.m = parse_usize_list(key, value)?,
            "k" => self.k = parse_usize_list(key, value)?,
            "criteria" => self.criteria = parse_usize_list(key, value)?,
            "detector" => {
                let list = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| parse::<Detector>(key, s))
                    .collect::<Result<Vec<_>, _>>()?;
                if list.is_empty() {
                    return Err(bad(key, "list must not be empty"));
                }
                self.detector = list;
            }
            "snr_db" => self.snr_db = parse(key, value)?,
            "sinr_th_db" => self.sinr_th_db = parse(key, value)?,
            "c0" => self.c0 = parse(key, value)?,
            "radius" => self.radius = parse(key, value)?,
            "eps" => self.eps = parse(key, value)?,
            "theta" => self.theta = parse(key, value)?,
            "csi_range" => self.csi_range = parse(key, value)?,
            "rho_min" => self.rho_min = parse(key, value)?,
            "rho_max" => self.rho_max = parse(key, value)?,
            "rho_points" => self.rho_points = parse(key, value)?,
            "grid_points" => self.grid_points = parse(key, value)?,
            "trials" => self.trials = parse(key, value)?,
            "outer" => self.outer = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "lambda" => self.lambda = parse(key, value)?,
            "lambda_samples" => self.lambda_samples = parse(key, value)?,
            "path" => self.path = parse(key, value)?,
            "total_density" => {
                self.total_density = match value {
                    "" | "none" => None,
                    v => Some(parse(key, v)?),
                }
            }
            "corrupt_eta" => self.corrupt_eta = parse(key, value)?,
            _ => return Err(bad(key, "unknown configuration key")),
        }
        Ok(())
    }

    /// Applies a `key=value` override as given on the command line.
    pub fn apply_override(&mut self, item: &str) -> Result<(), CliError> {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("override {item:?} is not key=value")))?;
        self.set(key.trim(), value)
    }

    /// Applies every setting in a config text: one `key = value` per line,
    /// `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected key = value, got {raw:?}", n + 1)))?;
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    /// Resolved settings in key order; feeding them back through
    /// [`RunConfig::set`] reproduces `self`.
    pub fn to_pairs(&self) -> BTreeMap<String, String> {
        let mut out = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            out.insert(k.to_string(), v);
        };
        put("m", join(&self.m));
        put("k", join(&self.k));
        put("criteria", join(&self.criteria));
        put("detector", self.detector.iter().map(|d| d.as_str()).collect::<Vec<_>>().join(","));
        put("snr_db", float(self.snr_db));
        put("sinr_th_db", float(self.sinr_th_db));
        put("c0", float(self.c0));
        put("radius", float(self.radius));
        put("eps", float(self.eps));
        put("theta", float(self.theta));
        put("csi_range", float(self.csi_range));
        put("rho_min", float(self.rho_min));
        put("rho_max", float(self.rho_max));
        put("rho_points", self.rho_points.to_string());
        put("grid_points", self.grid_points.to_string());
        put("trials", self.trials.to_string());
        put("outer", self.outer.to_string());
        put("seed", self.seed.to_string());
        put("lambda", self.lambda.as_str().to_string());
        put("lambda_samples", self.lambda_samples.to_string());
        put("path", self.path.as_str().to_string());
        put("total_density", self.total_density.map_or("none".to_string(), float));
        put("corrupt_eta", float(self.corrupt_eta));
        out
    }

    /// Rebuilds a config from metadata pairs, ignoring keys that are not
    /// configuration settings.
    pub fn from_pairs(pairs: &BTreeMap<String, String>) -> Result<Self, CliError> {
        let mut cfg = Self::default();
        for (k, v) in pairs {
            if KEYS.contains(&k.as_str()) {
                cfg.set(k, v)?;
            }
        }
        Ok(cfg)
    }

    /// Checks cross-field invariants and every scenario that will be built.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.trials == 0 {
            return Err(bad("trials", "must be >= 1"));
        }
        if self.outer == 0 {
            return Err(bad("outer", "must be >= 1"));
        }
        if self.grid_points < 2 {
            return Err(bad("grid_points", "must be >= 2"));
        }
        if self.rho_points < 2 {
            return Err(bad("rho_points", "must be >= 2"));
        }
        if !(self.rho_min > 0.0 && self.rho_min < self.rho_max && self.rho_max.is_finite()) {
            return Err(bad("rho_min", format!("need 0 < rho_min < rho_max, got [{}, {}]", self.rho_min, self.rho_max)));
        }
        if let Some(l) = self.total_density {
            if !(l > 0.0 && l.is_finite()) {
                return Err(bad("total_density", format!("must be > 0, got {l}")));
            }
        }
        if self.lambda_samples < mimo_adhoc::randmat::MIN_MOMENT_SAMPLES {
            return Err(bad(
                "lambda_samples",
                format!("must be >= {}", mimo_adhoc::randmat::MIN_MOMENT_SAMPLES),
            ));
        }
        if !self.corrupt_eta.is_finite() {
            return Err(bad("corrupt_eta", "must be finite"));
        }
        if let Some(&c) = self.criteria.iter().find(|&&c| !(1..=14).contains(&c)) {
            return Err(bad("criteria", format!("no criterion {c}; valid range is 1..=14")));
        }
        for &m in &self.m {
            for &d in &self.detector {
                self.scenario(m, d)
                    .validate()
                    .map_err(|e| CliError::Config(e.to_string()))?;
            }
        }
        Ok(())
    }

    pub fn scenario(&self, m: usize, detector: Detector) -> Scenario<f64> {
        Scenario {
            m,
            c0: self.c0,
            radius: self.radius,
            eps: self.eps,
            theta: self.theta,
            snr_db: self.snr_db,
            sinr_th_db: self.sinr_th_db,
            detector,
            csi_range: Some(self.csi_range),
        }
    }
}
