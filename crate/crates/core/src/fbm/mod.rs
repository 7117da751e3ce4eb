//! Fractional Brownian motion: parameter bundle, uniform grids, covariance and
//! sampled paths.
//!
//! A d-dimensional fBm has independent components, each a centered Gaussian
//! process with covariance `½(s^{2H} + u^{2H} − |s−u|^{2H})`.

mod io;
mod synth;

pub use io::{read_path, write_path, PATH_FILE_VERSION};
pub use synth::{derive_seed, fgn_autocovariance, generate_path, generate_path_with, FbmGenerator};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Relative tolerance used to decide `H·d = 1`.
pub const CRITICAL_REL_TOL: f64 = 1e-12;

/// Hurst index, dimension, horizon and derivative multi-index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HurstModel {
    hurst: f64,
    dim: usize,
    horizon: f64,
    k: Vec<u32>,
}

impl HurstModel {
    pub fn new(hurst: f64, dim: usize, horizon: f64, k: Vec<u32>) -> Result<Self> {
        if !(hurst > 0.0 && hurst < 1.0) {
            return domain(format!("Hurst index must lie in (0,1), got {hurst}"));
        }
        if dim == 0 {
            return domain("dimension must be at least 1");
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return domain(format!("time horizon must be positive, got {horizon}"));
        }
        if k.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: k.len(),
            });
        }
        Ok(Self {
            hurst,
            dim,
            horizon,
            k,
        })
    }

    /// First-order model with `k = e_1`, the case covered by the limit theorems.
    pub fn first_order(hurst: f64, dim: usize, horizon: f64) -> Result<Self> {
        let mut k = vec![0; dim.max(1)];
        k[0] = 1;
        Self::new(hurst, dim, horizon, k)
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn k(&self) -> &[u32] {
        &self.k
    }

    /// `|k|`.
    pub fn order(&self) -> u32 {
        self.k.iter().sum()
    }

    /// Number of odd entries of `k`.
    pub fn odd_count(&self) -> u32 {
        self.k.iter().filter(|&&ki| ki % 2 == 1).count() as u32
    }

    pub fn with_horizon(&self, horizon: f64) -> Result<Self> {
        Self::new(self.hurst, self.dim, horizon, self.k.clone())
    }

    /// `H·d = 1` up to [`CRITICAL_REL_TOL`].
    pub fn is_critical(&self) -> bool {
        (self.hurst * self.dim as f64 - 1.0).abs() <= CRITICAL_REL_TOL
    }

    /// Sufficient condition for L² existence of the limit DSLT at `y = 0`:
    /// `H < min{2/(2|k|+d), 1/(|k|+d−#), 1/d}` with `#` the number of odd `k_i`.
    pub fn exists_l2(&self) -> bool {
        let d = self.dim as f64;
        let order = self.order() as f64;
        let odd = self.odd_count() as f64;
        let bound = (2.0 / (2.0 * order + d))
            .min(1.0 / (order + d - odd))
            .min(1.0 / d);
        self.hurst < bound
    }
}

/// Uniform grid `0, t/n, …, t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    n: usize,
    horizon: f64,
}

impl TimeGrid {
    pub fn new(n: usize, horizon: f64) -> Result<Self> {
        if n < 2 {
            return domain(format!("grid needs at least 2 intervals, got {n}"));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return domain(format!("time horizon must be positive, got {horizon}"));
        }
        Ok(Self { n, horizon })
    }

    /// Number of intervals.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn step(&self) -> f64 {
        self.horizon / self.n as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i == self.n {
            self.horizon
        } else {
            i as f64 * self.step()
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.n).map(move |i| self.node(i))
    }
}

/// How a path was synthesized.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SynthesisMethod {
    CirculantEmbedding,
    Cholesky,
}

impl SynthesisMethod {
    pub fn code(self) -> u8 {
        match self {
            SynthesisMethod::CirculantEmbedding => 0,
            SynthesisMethod::Cholesky => 1,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(SynthesisMethod::CirculantEmbedding),
            1 => Ok(SynthesisMethod::Cholesky),
            other => Err(Error::Format(format!("unknown synthesis method code {other}"))),
        }
    }
}

/// `d` component paths sampled on a [`TimeGrid`], each starting at 0.
#[derive(Clone, Debug, PartialEq)]
pub struct FbmPath {
    model: HurstModel,
    grid: TimeGrid,
    values: Vec<Vec<f64>>,
    seed: u64,
    method: SynthesisMethod,
}

impl FbmPath {
    /// Wraps externally supplied component values (component-major, `n+1` each).
    pub fn from_values(
        model: HurstModel,
        grid: TimeGrid,
        values: Vec<Vec<f64>>,
        seed: u64,
        method: SynthesisMethod,
    ) -> Result<Self> {
        if values.len() != model.dim() {
            return Err(Error::DimensionMismatch {
                expected: model.dim(),
                got: values.len(),
            });
        }
        for comp in &values {
            if comp.len() != grid.n() + 1 {
                return Err(Error::DimensionMismatch {
                    expected: grid.n() + 1,
                    got: comp.len(),
                });
            }
            if comp[0] != 0.0 {
                return domain("fBm components must start at 0");
            }
        }
        Ok(Self {
            model,
            grid,
            values,
            seed,
            method,
        })
    }

    /// The identically zero path.
    pub fn zero(model: HurstModel, grid: TimeGrid) -> Self {
        let values = vec![vec![0.0; grid.n() + 1]; model.dim()];
        Self {
            model,
            grid,
            values,
            seed: 0,
            method: SynthesisMethod::CirculantEmbedding,
        }
    }

    pub fn model(&self) -> &HurstModel {
        &self.model
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn component(&self, i: usize) -> &[f64] {
        &self.values[i]
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn method(&self) -> SynthesisMethod {
        self.method
    }

    /// `B_T` for the component `i`.
    pub fn terminal(&self, i: usize) -> f64 {
        self.values[i][self.grid.n()]
    }

    /// The path `−B`.
    pub fn negated(&self) -> Self {
        let values = self
            .values
            .iter()
            .map(|c| c.iter().map(|v| -v).collect())
            .collect();
        Self {
            values,
            ..self.clone()
        }
    }
}

/// `E[B_s B_u] = ½(s^{2H} + u^{2H} − |s−u|^{2H})` for one component.
pub fn fbm_covariance(s: f64, u: f64, hurst: f64) -> Result<f64> {
    if !(hurst > 0.0 && hurst < 1.0) {
        return domain(format!("Hurst index must lie in (0,1), got {hurst}"));
    }
    if !(s >= 0.0 && u >= 0.0) {
        return domain(format!("times must be nonnegative, got ({s}, {u})"));
    }
    Ok(covariance_unchecked(s, u, hurst))
}

#[inline]
pub(crate) fn covariance_unchecked(s: f64, u: f64, hurst: f64) -> f64 {
    let h2 = 2.0 * hurst;
    0.5 * (s.powf(h2) + u.powf(h2) - (s - u).abs().powf(h2))
}
