//! Monte Carlo experiments: ε-ladders of the scaled estimator with
//! normality statistics and quadrature targets, and existence-regime sweeps.
//!
//! Path `i` of every ensemble is seeded with `derive_seed(master_seed, i)`,
//! so the same paths are reused at every rung of a ladder and results do not
//! depend on how paths are scheduled across threads.

mod config;
mod normality;
mod output;

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{parse_config, parse_eps_list, CONFIG_KEYS};
pub use normality::{
    kolmogorov_p, ks_distance, mean_var, normality_stats, shape_moments, NormalityStats,
    MIN_NORMALITY_SAMPLES,
};
pub use output::{
    emit_results, read_csv_rows, read_json, write_csv, write_existence_csv, OutputFormat,
    CSV_HEADER,
};

use crate::error::{Error, Result};
use crate::estimator::{dslt_ladder, FirstChaosWeights, Scheme};
use crate::fbm::{derive_seed, FbmGenerator, HurstModel, TimeGrid};
use crate::moments::PrefactorMode;
use crate::quad::{
    clt_scale_factor, first_chaos_variance, planar_target, sigma_squared, variance_pieces,
    MuConvention, QuadSpec,
};

/// Environment variable holding the default worker-thread count.
pub const THREADS_ENV: &str = "DSLT_THREADS";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: HurstModel,
    pub grid_n: usize,
    pub n_paths: usize,
    /// Strictly decreasing widths.
    pub eps_ladder: Vec<f64>,
    pub master_seed: u64,
    pub scheme: Scheme,
    pub mu_convention: MuConvention,
    pub prefactor: PrefactorMode,
    /// Attach quadrature values of the second moments to each row.
    pub quad_targets: bool,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: HurstModel::first_order(1.0 / 3.0, 3, 1.0).expect("valid default model"),
            grid_n: 1024,
            n_paths: 2000,
            eps_ladder: (0..5).map(|i| 10f64.powf(-1.0 - 0.5 * i as f64)).collect(),
            master_seed: 7,
            scheme: Scheme::ELECTED,
            mu_convention: MuConvention::ELECTED,
            prefactor: PrefactorMode::ELECTED,
            quad_targets: true,
            threads: None,
            out: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_paths < 2 {
            return Err(Error::Config(format!("n_paths must be >= 2, got {}", self.n_paths)));
        }
        if self.grid_n < 2 {
            return Err(Error::Config(format!("grid_n must be >= 2, got {}", self.grid_n)));
        }
        if self.model.order() != 1 {
            return Err(Error::Config("experiments use |k| = 1".into()));
        }
        for w in self.eps_ladder.windows(2) {
            if !(w[1] < w[0]) {
                return Err(Error::Config("eps ladder must be strictly decreasing".into()));
            }
        }
        if let Some(&e) = self.eps_ladder.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
            return Err(Error::Config(format!("eps values must be positive, got {e}")));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be positive".into()));
        }
        Ok(())
    }

    /// Explicit setting, else [`THREADS_ENV`], else hardware parallelism.
    pub fn resolved_threads(&self) -> Result<usize> {
        if let Some(t) = self.threads {
            return Ok(t);
        }
        match std::env::var(THREADS_ENV) {
            Ok(v) => v
                .trim()
                .parse::<usize>()
                .ok()
                .filter(|&t| t > 0)
                .ok_or_else(|| Error::Config(format!("{THREADS_ENV}={v:?} is not a positive integer"))),
            Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
        }
    }

    /// Limit variance of the scaled estimator, when the model is in a
    /// regime with a known central limit.
    pub fn sigma2_target(&self) -> Option<f64> {
        let m = &self.model;
        if m.dim() == 2 && (m.hurst() - 0.5).abs() < 1e-12 {
            Some(planar_target(m.horizon()))
        } else {
            sigma_squared(m).ok()
        }
    }
}

/// Runs `f` on a pool with the configured number of threads.
pub fn with_thread_budget<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LadderRow {
    pub eps: f64,
    pub n_paths: usize,
    pub grid_n: usize,
    pub raw_mean: f64,
    pub raw_var: f64,
    pub scale_factor: f64,
    pub scaled_var: f64,
    pub sigma2_target: Option<f64>,
    pub ks_stat: f64,
    /// `None` when the ensemble is below [`MIN_NORMALITY_SAMPLES`].
    pub ks_p: Option<f64>,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    /// Sample variance of the first-chaos projection.
    pub first_chaos_var: f64,
    /// Quadrature value of `E[α̂'²]` under the configured conventions.
    pub quad_var_total: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LadderResult {
    pub version: String,
    pub config: ExperimentConfig,
    pub rows: Vec<LadderRow>,
    pub notes: Vec<String>,
}

impl LadderResult {
    fn new(config: &ExperimentConfig, rows: Vec<LadderRow>) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.clone(),
            rows,
            notes: vec![
                "paths are reused across eps rows (common random numbers)".into(),
                format!(
                    "scheme={}, mu_convention={}, prefactor={}",
                    config.scheme.name(),
                    config.mu_convention.name(),
                    config.prefactor.name()
                ),
                "ks_p fits mean and variance from the sample and is approximate".into(),
            ],
        }
    }
}

/// Per-path values of the estimator and of its first-chaos projection, for
/// each width in `eps`: `(dslt[k][i], chaos[k][i])` for width `k`, path `i`.
/// One pass over each path serves all widths.
pub fn ensemble_values(config: &ExperimentConfig, eps: &[f64]) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let grid = TimeGrid::new(config.grid_n, config.model.horizon())?;
    let generator = FbmGenerator::new(&config.model, &grid)?;
    let weights = FirstChaosWeights::new(&config.model, &grid, eps, config.prefactor, config.scheme)?;
    let per_path: Vec<(Vec<f64>, Vec<f64>)> = (0..config.n_paths)
        .into_par_iter()
        .map(|i| {
            let path = generator.generate(derive_seed(config.master_seed, i as u64));
            Ok((dslt_ladder(&path, eps, config.scheme)?, weights.apply(&path)?))
        })
        .collect::<Result<_>>()?;
    let transpose = |pick: fn(&(Vec<f64>, Vec<f64>)) -> &Vec<f64>| -> Vec<Vec<f64>> {
        (0..eps.len())
            .map(|k| per_path.iter().map(|p| pick(p)[k]).collect())
            .collect()
    };
    Ok((transpose(|p| &p.0), transpose(|p| &p.1)))
}

fn ladder_row(config: &ExperimentConfig, eps: f64) -> Result<LadderRow> {
    let (mut values, mut chaos) = ensemble_values(config, &[eps])?;
    let (values, chaos) = (values.swap_remove(0), chaos.swap_remove(0));
    let (raw_mean, raw_var) = mean_var(&values);
    let (_, first_chaos_var) = mean_var(&chaos);
    let (skewness, excess_kurtosis) = shape_moments(&values);
    let ks_stat = ks_distance(&values, raw_mean, raw_var);
    let ks_p = (values.len() >= MIN_NORMALITY_SAMPLES).then(|| kolmogorov_p(ks_stat, values.len()));
    let scale_factor = clt_scale_factor(&config.model, eps);
    let quad_var_total = if config.quad_targets {
        let spec = QuadSpec::with_tolerances(1e-6, 1e-14);
        Some(variance_pieces(eps, &config.model, config.mu_convention, config.prefactor, &spec)?.total)
    } else {
        None
    };
    Ok(LadderRow {
        eps,
        n_paths: config.n_paths,
        grid_n: config.grid_n,
        raw_mean,
        raw_var,
        scale_factor,
        scaled_var: raw_var * scale_factor * scale_factor,
        sigma2_target: config.sigma2_target(),
        ks_stat,
        ks_p,
        skewness,
        excess_kurtosis,
        first_chaos_var,
        quad_var_total,
    })
}

/// Quadrature value of the first-chaos variance under the configured
/// conventions, for comparison with `first_chaos_var`.
pub fn first_chaos_target(config: &ExperimentConfig, eps: f64) -> Result<f64> {
    let spec = QuadSpec::with_tolerances(1e-6, 1e-14);
    Ok(first_chaos_variance(eps, &config.model, config.mu_convention, config.prefactor, &spec)?.value)
}

fn same_eps(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

/// Runs the ladder. With `config.out` set, rows are appended to that CSV as
/// they complete, and rows already present there are reused instead of
/// recomputed.
pub fn run_clt_ladder(config: &ExperimentConfig) -> Result<LadderResult> {
    config.validate()?;
    let threads = config.resolved_threads()?;
    let done: Vec<LadderRow> = match &config.out {
        Some(path) if path.exists() => read_csv_rows(path)?,
        _ => Vec::new(),
    };
    let mut writer = match &config.out {
        Some(path) => Some(output::CsvAppender::open(path, done.is_empty())?),
        None => None,
    };
    let mut rows = Vec::with_capacity(config.eps_ladder.len());
    for &eps in &config.eps_ladder {
        if let Some(row) = done.iter().find(|r| same_eps(r.eps, eps)) {
            rows.push(row.clone());
            continue;
        }
        let row = with_thread_budget(threads, || ladder_row(config, eps))??;
        if let Some(w) = writer.as_mut() {
            w.append(&row)?;
        }
        rows.push(row);
    }
    Ok(LadderResult::new(config, rows))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExistenceRow {
    pub hurst: f64,
    pub eps: f64,
    pub raw_var: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExistenceSummary {
    pub hurst: f64,
    /// Sufficient condition for existence in L², from the model.
    pub exists_l2: bool,
    /// `raw_var` at the smallest width over `raw_var` at the largest.
    pub growth_ratio: f64,
    /// `raw_var` increases at every rung.
    pub monotone_growth: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExistenceTable {
    pub rows: Vec<ExistenceRow>,
    pub summary: Vec<ExistenceSummary>,
}

/// For each Hurst index, the ensemble variance of the unscaled estimator
/// along the configured ladder.
pub fn run_existence_sweep(config: &ExperimentConfig, hursts: &[f64]) -> Result<ExistenceTable> {
    config.validate()?;
    let threads = config.resolved_threads()?;
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for &h in hursts {
        let model = HurstModel::new(
            h,
            config.model.dim(),
            config.model.horizon(),
            config.model.k().to_vec(),
        )
        .map_err(|e| Error::Config(format!("hurst {h}: {e}")))?;
        let cfg = ExperimentConfig {
            model: model.clone(),
            ..config.clone()
        };
        let (values, _) = with_thread_budget(threads, || ensemble_values(&cfg, &config.eps_ladder))??;
        let vars: Vec<f64> = values.iter().map(|v| mean_var(v).1).collect();
        for (&eps, &raw_var) in config.eps_ladder.iter().zip(&vars) {
            rows.push(ExistenceRow {
                hurst: h,
                eps,
                raw_var,
            });
        }
        let growth_ratio = match (vars.first(), vars.last()) {
            (Some(first), Some(last)) => last / first,
            _ => f64::NAN,
        };
        summary.push(ExistenceSummary {
            hurst: h,
            exists_l2: model.exists_l2(),
            growth_ratio,
            monotone_growth: vars.windows(2).all(|w| w[1] > w[0]),
        });
    }
    Ok(ExistenceTable { rows, summary })
}
