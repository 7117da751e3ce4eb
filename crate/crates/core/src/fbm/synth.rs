use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::{FbmPath, HurstModel, SynthesisMethod, TimeGrid};
use crate::error::{Error, Result};

/// Eigenvalues below `-NEG_EIG_TOL * max` send the generator to Cholesky.
const NEG_EIG_TOL: f64 = 1e-10;

/// Autocovariance of fractional Gaussian noise with spacing `step`:
/// `γ(j) = ½(|j+1|^{2H} + |j−1|^{2H} − 2|j|^{2H}) step^{2H}`.
pub fn fgn_autocovariance(lag: usize, hurst: f64, step: f64) -> f64 {
    let h2 = 2.0 * hurst;
    let j = lag as f64;
    let raw = 0.5 * ((j + 1.0).powf(h2) + (j - 1.0).abs().powf(h2) - 2.0 * j.powf(h2));
    raw * step.powf(h2)
}

/// Seed of path `index` in an ensemble keyed by `master`.
///
/// The master seed is XORed with a SplitMix64 scramble of the index, so the
/// stream of path `i` depends only on `(master, i)`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    master ^ splitmix64(index)
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn component_rng(seed: u64, component: usize) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(component as u64);
    rng
}

enum Backend {
    Circulant {
        fft: Arc<dyn Fft<f64>>,
        /// `sqrt(λ_k / M)` for the circulant eigenvalues `λ_k`.
        scale: Vec<f64>,
    },
    Cholesky {
        lower: DMatrix<f64>,
    },
}

/// Reusable exact fBm sampler for one `(model, grid)` pair.
///
/// Setting up the embedding costs one FFT (or one Cholesky factorization);
/// each [`FbmGenerator::generate`] call is then `O(d n log n)`.
pub struct FbmGenerator {
    model: HurstModel,
    grid: TimeGrid,
    backend: Backend,
}

impl FbmGenerator {
    /// Circulant embedding, falling back to Cholesky when the embedding has a
    /// materially negative eigenvalue.
    pub fn new(model: &HurstModel, grid: &TimeGrid) -> Result<Self> {
        match Self::circulant(model, grid) {
            Some(backend) => Ok(Self {
                model: model.clone(),
                grid: *grid,
                backend,
            }),
            None => Self::with_method(model, grid, SynthesisMethod::Cholesky),
        }
    }

    pub fn with_method(model: &HurstModel, grid: &TimeGrid, method: SynthesisMethod) -> Result<Self> {
        let backend = match method {
            SynthesisMethod::CirculantEmbedding => match Self::circulant(model, grid) {
                Some(b) => b,
                None => {
                    return Err(Error::Domain(
                        "circulant embedding has negative eigenvalues".into(),
                    ))
                }
            },
            SynthesisMethod::Cholesky => Self::cholesky(model, grid)?,
        };
        Ok(Self {
            model: model.clone(),
            grid: *grid,
            backend,
        })
    }

    fn circulant(model: &HurstModel, grid: &TimeGrid) -> Option<Backend> {
        let n = grid.n();
        let m = 2 * n;
        let step = grid.step();
        let mut row: Vec<Complex<f64>> = (0..m)
            .map(|j| {
                let lag = if j <= n { j } else { m - j };
                Complex::new(fgn_autocovariance(lag, model.hurst(), step), 0.0)
            })
            .collect();
        let fft = FftPlanner::new().plan_fft_forward(m);
        fft.process(&mut row);
        let max = row.iter().map(|c| c.re).fold(f64::MIN, f64::max);
        if row.iter().any(|c| c.re < -NEG_EIG_TOL * max) {
            return None;
        }
        let scale = row
            .iter()
            .map(|c| (c.re.max(0.0) / m as f64).sqrt())
            .collect();
        Some(Backend::Circulant { fft, scale })
    }

    fn cholesky(model: &HurstModel, grid: &TimeGrid) -> Result<Backend> {
        let n = grid.n();
        let step = grid.step();
        let gamma: Vec<f64> = (0..n)
            .map(|j| fgn_autocovariance(j, model.hurst(), step))
            .collect();
        let cov = DMatrix::from_fn(n, n, |i, j| gamma[i.abs_diff(j)]);
        let chol = cov.cholesky().ok_or(Error::NotPositiveDefinite)?;
        Ok(Backend::Cholesky { lower: chol.l() })
    }

    pub fn method(&self) -> SynthesisMethod {
        match self.backend {
            Backend::Circulant { .. } => SynthesisMethod::CirculantEmbedding,
            Backend::Cholesky { .. } => SynthesisMethod::Cholesky,
        }
    }

    pub fn model(&self) -> &HurstModel {
        &self.model
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// One path; component `i` draws from ChaCha stream `i` of `seed`.
    pub fn generate(&self, seed: u64) -> FbmPath {
        let n = self.grid.n();
        let values = (0..self.model.dim())
            .map(|comp| {
                let mut rng = component_rng(seed, comp);
                let noise = self.noise(&mut rng);
                let mut path = Vec::with_capacity(n + 1);
                path.push(0.0);
                let mut acc = 0.0;
                for x in noise {
                    acc += x;
                    path.push(acc);
                }
                path
            })
            .collect();
        FbmPath {
            model: self.model.clone(),
            grid: self.grid,
            values,
            seed,
            method: self.method(),
        }
    }

    fn noise(&self, rng: &mut ChaCha12Rng) -> Vec<f64> {
        let n = self.grid.n();
        match &self.backend {
            Backend::Circulant { fft, scale } => {
                let mut buf: Vec<Complex<f64>> = scale
                    .iter()
                    .map(|&s| {
                        let re: f64 = rng.sample(StandardNormal);
                        let im: f64 = rng.sample(StandardNormal);
                        Complex::new(s * re, s * im)
                    })
                    .collect();
                fft.process(&mut buf);
                buf.truncate(n);
                buf.into_iter().map(|c| c.re).collect()
            }
            Backend::Cholesky { lower } => {
                let z = nalgebra::DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
                (lower * z).iter().copied().collect()
            }
        }
    }
}

/// Exact fBm sample on `grid` (circulant embedding, Cholesky fallback).
pub fn generate_path(model: &HurstModel, grid: &TimeGrid, seed: u64) -> Result<FbmPath> {
    Ok(FbmGenerator::new(model, grid)?.generate(seed))
}

/// As [`generate_path`] with an explicit synthesis method.
pub fn generate_path_with(
    model: &HurstModel,
    grid: &TimeGrid,
    seed: u64,
    method: SynthesisMethod,
) -> Result<FbmPath> {
    Ok(FbmGenerator::with_method(model, grid, method)?.generate(seed))
}
