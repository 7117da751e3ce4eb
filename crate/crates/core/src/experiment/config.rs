//! Flat `key = value` configuration files.
//!
//! ```text
//! # d = 3 at the critical Hurst index
//! hurst = 0.3333333333333333
//! dim = 3
//! horizon = 1
//! grid_n = 1024
//! n_paths = 2000
//! eps = 0.1, 0.05, 0.02, 0.01
//! seed = 7
//! scheme = trapezoid
//! mu_convention = signed
//! prefactor = per-coordinate
//! quad_targets = true
//! threads = 8
//! out = results/clt.csv
//! ```
//!
//! Blank lines and `#` comments are ignored; unknown or repeated keys are
//! errors.

use std::collections::HashSet;
use std::path::PathBuf;

use super::ExperimentConfig;
use crate::error::{Error, Result};
use crate::fbm::HurstModel;

pub const CONFIG_KEYS: &[&str] = &[
    "hurst",
    "dim",
    "horizon",
    "grid_n",
    "n_paths",
    "eps",
    "seed",
    "scheme",
    "mu_convention",
    "prefactor",
    "quad_targets",
    "threads",
    "out",
];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value {value:?} for {key}")))
}

/// Comma-separated list of widths.
pub fn parse_eps_list(value: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(|s| parse::<f64>("eps", s.trim()))
        .collect()
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    let (mut hurst, mut dim, mut horizon) = (
        cfg.model.hurst(),
        cfg.model.dim(),
        cfg.model.horizon(),
    );
    let mut seen = HashSet::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("line {}: expected key = value", lineno + 1))
        })?;
        let (key, value) = (key.trim(), value.trim());
        if !CONFIG_KEYS.contains(&key) {
            return Err(Error::Config(format!("line {}: unknown key {key:?}", lineno + 1)));
        }
        if !seen.insert(key.to_string()) {
            return Err(Error::Config(format!("line {}: repeated key {key:?}", lineno + 1)));
        }
        match key {
            "hurst" => hurst = parse(key, value)?,
            "dim" => dim = parse(key, value)?,
            "horizon" => horizon = parse(key, value)?,
            "grid_n" => cfg.grid_n = parse(key, value)?,
            "n_paths" => cfg.n_paths = parse(key, value)?,
            "eps" => cfg.eps_ladder = parse_eps_list(value)?,
            "seed" => cfg.master_seed = parse(key, value)?,
            "scheme" => cfg.scheme = value.parse()?,
            "mu_convention" => cfg.mu_convention = value.parse()?,
            "prefactor" => cfg.prefactor = value.parse()?,
            "quad_targets" => cfg.quad_targets = parse(key, value)?,
            "threads" => cfg.threads = Some(parse(key, value)?),
            "out" => cfg.out = Some(PathBuf::from(value)),
            _ => unreachable!("key list checked above"),
        }
    }
    cfg.model = HurstModel::first_order(hurst, dim, horizon)
        .map_err(|e| Error::Config(format!("model: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}
