//! Experiment configuration: defaults, flat `key = value` files and
//! command-line overrides.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use toml::Value;

use crate::allocation::{AllocationParams, RateMode};
use crate::error::{Error, Result};
use crate::propagation::{wavelength, Geometry, PathLossModel, Point};
use crate::stochgeo::PppConfig;

/// Key generation scheme compared in the scheme sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Random phases in every training round.
    RandomIrs,
    /// Rate-optimal phases held fixed during training.
    FixedIrs,
    /// Direct path only.
    NoIrs,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::RandomIrs, Scheme::FixedIrs, Scheme::NoIrs];

    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::RandomIrs => "random-irs",
            Scheme::FixedIrs => "fixed-irs",
            Scheme::NoIrs => "no-irs",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "random-irs" | "random" => Ok(Scheme::RandomIrs),
            "fixed-irs" | "fixed" => Ok(Scheme::FixedIrs),
            "no-irs" | "none" => Ok(Scheme::NoIrs),
            other => Err(format!(
                "unknown scheme `{other}` (expected random-irs, fixed-irs or no-irs)"
            )),
        }
    }
}

/// How eavesdropper positions are drawn in the scheme and allocation sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EveModel {
    /// `K` eavesdroppers uniform on the disk around Alice.
    Fixed,
    /// Poisson number of eavesdroppers with intensity `lambda_e` on the disk.
    Ppp,
}

/// Rate evaluation mode; `auto` runs the observation loop for the scheme
/// sweep and the analytic rates for the allocation sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateModeSetting {
    Auto,
    Faithful,
    Fast,
}

impl RateModeSetting {
    pub fn resolve(self, auto: RateMode) -> RateMode {
        match self {
            RateModeSetting::Auto => auto,
            RateModeSetting::Faithful => RateMode::Faithful,
            RateModeSetting::Fast => RateMode::Fast,
        }
    }
}

/// How the predicted eavesdropper correlation obtains its envelope moment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MomentMode {
    /// Independent circular Gaussian envelopes.
    Analytic,
    /// Sample moments of the nearest sampled eavesdropper's observations.
    Empirical,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    /// Carrier frequency, Hz.
    pub f_c: f64,
    pub p_dbm: f64,
    /// Noise power, dBm.
    pub sigma2_dbm: f64,
    pub delta_t: f64,
    pub l: usize,
    pub q_th: usize,
    pub n: usize,
    pub b: u32,
    pub k: usize,
    pub d_ab: f64,
    pub d1: f64,
    pub d2: f64,
    pub path_loss: PathLossModel,
    pub eve_radius: f64,
    pub lambda_e: f64,
    pub eve_model: EveModel,
    pub trials: usize,
    pub seed: u64,
    pub sweep_axis: String,
    pub sweep_values: Vec<f64>,
    pub schemes: Vec<Scheme>,
    pub mean_removal: bool,
    pub rate_mode: RateModeSetting,
    pub continuous_mrt: bool,
    /// Key samples per interval credited to the static-channel benchmarks.
    pub benchmark_key_samples: usize,
    pub alloc_l_values: Vec<usize>,
    pub alloc_p_values: Vec<f64>,
    pub ppp_n_values: Vec<usize>,
    pub ppp_radii: Vec<f64>,
    pub ppp_intensities: Vec<f64>,
    pub ppp_rounds: usize,
    pub ppp_moments: MomentMode,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            f_c: 1e9,
            p_dbm: 20.0,
            sigma2_dbm: -96.0,
            delta_t: 1e-3,
            l: 1000,
            q_th: 100,
            n: 50,
            b: 3,
            k: 4,
            d_ab: 100.0,
            d1: 5.0,
            d2: 5.0,
            path_loss: PathLossModel::default(),
            eve_radius: 1.0,
            lambda_e: 1.0,
            eve_model: EveModel::Fixed,
            trials: 500,
            seed: 1,
            sweep_axis: "P_dbm".into(),
            sweep_values: vec![0.0, 10.0, 20.0, 30.0],
            schemes: Scheme::ALL.to_vec(),
            mean_removal: true,
            rate_mode: RateModeSetting::Auto,
            continuous_mrt: false,
            benchmark_key_samples: 1,
            alloc_l_values: vec![500, 1000, 2000],
            alloc_p_values: vec![20.0, 10.0, 0.0],
            ppp_n_values: (2..=10).map(|i| i * 10).collect(),
            ppp_radii: vec![0.1, 1.0],
            ppp_intensities: vec![0.5, 2.0],
            ppp_rounds: 400,
            ppp_moments: MomentMode::Analytic,
        }
    }
}

/// Canonical spelling of every configuration key.
pub const KEYS: &[&str] = &[
    "f_c",
    "P_dbm",
    "sigma2_dbm",
    "delta_t",
    "L",
    "Q_th",
    "N",
    "B",
    "K",
    "d_ab",
    "d1",
    "d2",
    "pl0_db",
    "d0",
    "zeta_ar",
    "zeta_rb",
    "zeta_ab",
    "zeta_er",
    "zeta_eb",
    "eve_radius",
    "lambda_e",
    "eve_model",
    "trials",
    "seed",
    "sweep_axis",
    "sweep_values",
    "schemes",
    "mean_removal",
    "rate_mode",
    "continuous_mrt",
    "benchmark_key_samples",
    "alloc_L_values",
    "alloc_P_values",
    "ppp_N_values",
    "ppp_radii",
    "ppp_intensities",
    "ppp_rounds",
    "ppp_moments",
];

fn config_err(key: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        key: key.to_string(),
        reason: reason.into(),
    }
}

fn as_f64(key: &str, v: &Value) -> Result<f64> {
    match v {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        Value::String(s) => s
            .trim()
            .parse()
            .map_err(|_| config_err(key, format!("expected a number, got `{s}`"))),
        other => Err(config_err(key, format!("expected a number, got {}", other.type_str()))),
    }
}

fn as_u64(key: &str, v: &Value) -> Result<u64> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as u64),
        Value::Float(f) if *f >= 0.0 && f.fract() == 0.0 && *f < 2f64.powi(63) => Ok(*f as u64),
        Value::String(s) => s
            .trim()
            .parse()
            .map_err(|_| config_err(key, format!("expected a non-negative integer, got `{s}`"))),
        other => Err(config_err(key, format!("expected a non-negative integer, got {other}"))),
    }
}

fn as_usize(key: &str, v: &Value) -> Result<usize> {
    as_u64(key, v).and_then(|x| usize::try_from(x).map_err(|_| config_err(key, "integer too large")))
}

fn as_bool(key: &str, v: &Value) -> Result<bool> {
    match v {
        Value::Boolean(b) => Ok(*b),
        Value::Integer(0) => Ok(false),
        Value::Integer(1) => Ok(true),
        Value::String(s) => match s.trim().to_ascii_lowercase().as_str() {
            "true" | "on" | "yes" | "1" => Ok(true),
            "false" | "off" | "no" | "0" => Ok(false),
            _ => Err(config_err(key, format!("expected a boolean, got `{s}`"))),
        },
        other => Err(config_err(key, format!("expected a boolean, got {}", other.type_str()))),
    }
}

fn as_str<'a>(key: &str, v: &'a Value) -> Result<&'a str> {
    match v {
        Value::String(s) => Ok(s.as_str()),
        other => Err(config_err(key, format!("expected a string, got {}", other.type_str()))),
    }
}

/// Arrays, or comma separated strings, of items.
fn as_list<T>(key: &str, v: &Value, item: impl Fn(&str, &Value) -> Result<T>) -> Result<Vec<T>> {
    let items: Vec<Value> = match v {
        Value::Array(a) => a.clone(),
        Value::String(s) => s
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| Value::String(s.to_string()))
            .collect(),
        single => vec![single.clone()],
    };
    if items.is_empty() {
        return Err(config_err(key, "list must not be empty"));
    }
    items.iter().map(|x| item(key, x)).collect()
}

fn parse_enum<T: serde::de::DeserializeOwned>(key: &str, v: &Value, expected: &str) -> Result<T> {
    let s = as_str(key, v)?.trim().to_ascii_lowercase();
    T::deserialize(Value::String(s.clone()))
        .map_err(|_| config_err(key, format!("unknown value `{s}` (expected {expected})")))
}

/// Parses the right-hand side of a `key=value` override with TOML value
/// syntax, falling back to a bare string.
pub fn parse_override(assignment: &str) -> Result<(String, Value)> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| config_err(assignment, "expected key=value"))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()));
    Ok((key.to_string(), value))
}

impl ExperimentConfig {
    /// Applies one setting. Keys are case-insensitive.
    pub fn set(&mut self, key: &str, value: &Value) -> Result<()> {
        let lower = key.trim().to_ascii_lowercase();
        let pl = &mut self.path_loss;
        match lower.as_str() {
            "f_c" => self.f_c = as_f64(key, value)?,
            "p_dbm" => self.p_dbm = as_f64(key, value)?,
            "sigma2_dbm" => self.sigma2_dbm = as_f64(key, value)?,
            "delta_t" => self.delta_t = as_f64(key, value)?,
            "l" => self.l = as_usize(key, value)?,
            "q_th" => self.q_th = as_usize(key, value)?,
            "n" => self.n = as_usize(key, value)?,
            "b" => self.b = u32::try_from(as_u64(key, value)?).map_err(|_| config_err(key, "too many bits"))?,
            "k" => self.k = as_usize(key, value)?,
            "d_ab" => self.d_ab = as_f64(key, value)?,
            "d1" => self.d1 = as_f64(key, value)?,
            "d2" => self.d2 = as_f64(key, value)?,
            "pl0_db" => pl.pl0_db = as_f64(key, value)?,
            "d0" => pl.d0 = as_f64(key, value)?,
            "zeta_ar" => pl.zeta_ar = as_f64(key, value)?,
            "zeta_rb" => pl.zeta_rb = as_f64(key, value)?,
            "zeta_ab" => pl.zeta_ab = as_f64(key, value)?,
            "zeta_er" => pl.zeta_er = as_f64(key, value)?,
            "zeta_eb" => pl.zeta_eb = as_f64(key, value)?,
            "eve_radius" => self.eve_radius = as_f64(key, value)?,
            "lambda_e" => self.lambda_e = as_f64(key, value)?,
            "eve_model" => self.eve_model = parse_enum(key, value, "fixed or ppp")?,
            "trials" => self.trials = as_usize(key, value)?,
            "seed" => self.seed = as_u64(key, value)?,
            "sweep_axis" => {
                let axis = as_str(key, value)?;
                if !is_numeric_key(axis) {
                    return Err(config_err(key, format!("`{axis}` is not a numeric setting")));
                }
                self.sweep_axis = canonical_key(axis).unwrap_or(axis).to_string();
            }
            "sweep_values" => self.sweep_values = as_list(key, value, as_f64)?,
            "schemes" | "scheme" => {
                let list = match value {
                    Value::String(s) if s.trim().eq_ignore_ascii_case("all") => Scheme::ALL.to_vec(),
                    _ => as_list(key, value, |k, v| {
                        as_str(k, v)?.parse::<Scheme>().map_err(|e| config_err(k, e))
                    })?,
                };
                self.schemes = list;
            }
            "mean_removal" => self.mean_removal = as_bool(key, value)?,
            "rate_mode" => self.rate_mode = parse_enum(key, value, "auto, faithful or fast")?,
            "continuous_mrt" => self.continuous_mrt = as_bool(key, value)?,
            "benchmark_key_samples" => self.benchmark_key_samples = as_usize(key, value)?,
            "alloc_l_values" => self.alloc_l_values = as_list(key, value, as_usize)?,
            "alloc_p_values" => self.alloc_p_values = as_list(key, value, as_f64)?,
            "ppp_n_values" => self.ppp_n_values = as_list(key, value, as_usize)?,
            "ppp_radii" => self.ppp_radii = as_list(key, value, as_f64)?,
            "ppp_intensities" => self.ppp_intensities = as_list(key, value, as_f64)?,
            "ppp_rounds" => self.ppp_rounds = as_usize(key, value)?,
            "ppp_moments" => self.ppp_moments = parse_enum(key, value, "analytic or empirical")?,
            _ => return Err(config_err(key, "unknown setting")),
        }
        Ok(())
    }

    pub fn set_override(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = parse_override(assignment)?;
        self.set(&key, &value)
    }

    /// Applies every entry of a flat TOML document.
    pub fn merge_toml(&mut self, text: &str) -> Result<()> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
            let key = e
                .span()
                .and_then(|span| {
                    let line_start = text[..span.start].rfind('\n').map_or(0, |i| i + 1);
                    let line = text[line_start..].lines().next().unwrap_or("");
                    line.split_once('=').map(|(k, _)| k.trim().to_string())
                })
                .filter(|k| !k.is_empty())
                .unwrap_or_else(|| "<config>".to_string());
            config_err(&key, e.message().to_string())
        })?;
        for (key, value) in &table {
            if value.is_table() {
                return Err(config_err(
                    key,
                    "nested tables are not supported; use flat key = value pairs",
                ));
            }
            self.set(key, value)?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.merge_toml(&std::fs::read_to_string(path)?)?;
        Ok(cfg)
    }

    /// Checks cross-field constraints.
    pub fn validate(&self) -> Result<()> {
        let positive = |key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(config_err(key, format!("must be positive, got {v}")))
            }
        };
        positive("f_c", self.f_c)?;
        positive("delta_t", self.delta_t)?;
        positive("d_ab", self.d_ab)?;
        positive("d1", self.d1)?;
        positive("d2", self.d2)?;
        positive("eve_radius", self.eve_radius)?;
        positive("lambda_e", self.lambda_e)?;
        for (k, v) in [("P_dbm", self.p_dbm), ("sigma2_dbm", self.sigma2_dbm)] {
            if !v.is_finite() {
                return Err(config_err(k, "must be finite"));
            }
        }
        if self.n == 0 {
            return Err(config_err("N", "the surface needs at least one element"));
        }
        if self.b == 0 || self.b > 16 {
            return Err(config_err("B", "phase resolution must be between 1 and 16 bits"));
        }
        if self.q_th == 0 {
            return Err(config_err("Q_th", "at least one training round is required"));
        }
        for l in std::iter::once(self.l).chain(self.alloc_l_values.iter().copied()) {
            if l < 2 * self.q_th + 1 {
                return Err(config_err(
                    "L",
                    format!("L = {l} leaves no data slot after 2 * Q_th training slots"),
                ));
            }
        }
        if self.trials == 0 {
            return Err(config_err("trials", "at least one trial is required"));
        }
        if self.benchmark_key_samples == 0 || self.benchmark_key_samples > crate::allocation::max_rounds(self.l) {
            return Err(config_err("benchmark_key_samples", "must lie in [1, ceil(L/2) - 1]"));
        }
        if self.ppp_rounds < 2 {
            return Err(config_err("ppp_rounds", "need at least two rounds"));
        }
        if self.schemes.is_empty() {
            return Err(config_err("schemes", "select at least one scheme"));
        }
        if self.ppp_n_values.contains(&0) {
            return Err(config_err("ppp_N_values", "element counts must be positive"));
        }
        for &r in &self.ppp_radii {
            positive("ppp_radii", r)?;
        }
        for &i in &self.ppp_intensities {
            positive("ppp_intensities", i)?;
        }
        self.path_loss
            .validate()
            .map_err(|e| config_err("path_loss", e.to_string()))?;
        Ok(())
    }

    pub fn wavelength(&self) -> f64 {
        wavelength(self.f_c)
    }

    /// Estimation noise variance `sigma^2 / P`.
    pub fn noise_var(&self) -> f64 {
        10f64.powf((self.sigma2_dbm - self.p_dbm) / 10.0)
    }

    /// Reference SNR `P / sigma^2`.
    pub fn gamma_b(&self) -> f64 {
        10f64.powf((self.p_dbm - self.sigma2_dbm) / 10.0)
    }

    pub fn geometry(&self, eves: Vec<Point>) -> Result<Geometry> {
        Geometry::new(self.d_ab, self.d1, self.d2, eves)
    }

    pub fn ppp(&self, radius: f64, lambda_e: f64) -> PppConfig {
        PppConfig {
            lambda_e,
            radius,
            wavelength: self.wavelength(),
        }
    }

    pub fn allocation_params(&self, mode: RateMode) -> AllocationParams {
        AllocationParams {
            l: self.l,
            q_th: self.q_th,
            delta_t: self.delta_t,
            noise_var: self.noise_var(),
            gamma_b: self.gamma_b(),
            bits: self.b,
            continuous_mrt: self.continuous_mrt,
            mean_removal: self.mean_removal,
            mode,
        }
    }

    /// Resolved settings keyed by canonical name, for echoing into outputs.
    pub fn to_json(&self) -> serde_json::Value {
        let pl = &self.path_loss;
        serde_json::json!({
            "f_c": self.f_c,
            "P_dbm": self.p_dbm,
            "sigma2_dbm": self.sigma2_dbm,
            "delta_t": self.delta_t,
            "L": self.l,
            "Q_th": self.q_th,
            "N": self.n,
            "B": self.b,
            "K": self.k,
            "d_ab": self.d_ab,
            "d1": self.d1,
            "d2": self.d2,
            "pl0_db": pl.pl0_db,
            "d0": pl.d0,
            "zeta_ar": pl.zeta_ar,
            "zeta_rb": pl.zeta_rb,
            "zeta_ab": pl.zeta_ab,
            "zeta_er": pl.zeta_er,
            "zeta_eb": pl.zeta_eb,
            "eve_radius": self.eve_radius,
            "lambda_e": self.lambda_e,
            "eve_model": self.eve_model,
            "trials": self.trials,
            "seed": self.seed,
            "sweep_axis": self.sweep_axis,
            "sweep_values": self.sweep_values,
            "schemes": self.schemes,
            "mean_removal": self.mean_removal,
            "rate_mode": self.rate_mode,
            "continuous_mrt": self.continuous_mrt,
            "benchmark_key_samples": self.benchmark_key_samples,
            "alloc_L_values": self.alloc_l_values,
            "alloc_P_values": self.alloc_p_values,
            "ppp_N_values": self.ppp_n_values,
            "ppp_radii": self.ppp_radii,
            "ppp_intensities": self.ppp_intensities,
            "ppp_rounds": self.ppp_rounds,
            "ppp_moments": self.ppp_moments,
        })
    }
}

fn canonical_key(key: &str) -> Option<&'static str> {
    KEYS.iter().copied().find(|k| k.eq_ignore_ascii_case(key.trim()))
}

fn is_numeric_key(key: &str) -> bool {
    let mut probe = ExperimentConfig::default();
    probe.set(key, &Value::Integer(1)).is_ok()
        && !key.eq_ignore_ascii_case("sweep_values")
        && !key.to_ascii_lowercase().ends_with("_values")
        && !key.eq_ignore_ascii_case("ppp_radii")
        && !key.eq_ignore_ascii_case("ppp_intensities")
}
