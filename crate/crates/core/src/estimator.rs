//! Path functionals on the simplex `{0 < r < s < t}`: the regularized
//! derivative of self-intersection local time, the regularized
//! self-intersection local time, and the first-chaos projection of the
//! former.
//!
//! Two discretizations are offered:
//!
//! * `Trapezoid` evaluates the kernel at node pairs `(r_i, s_j)`, `i ≤ j`,
//!   where the path increments have their exact law, and weights them by
//!   corner averaging over the square and triangular cells;
//! * `Midpoint` evaluates once per cell at its center (squares) or centroid
//!   (diagonal triangles), with path values linearly interpolated.
//!
//! Rows of the double sum run in parallel; each row and then the row totals
//! are reduced in a fixed order with compensated summation, so results do
//! not depend on the thread count.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::fbm::{FbmPath, HurstModel, TimeGrid};
use crate::mollifier::{f_eps_deriv, gaussian};
use crate::moments::PrefactorMode;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    Midpoint,
    Trapezoid,
}

impl Scheme {
    /// Default discretization. Midpoint interpolation shrinks the increment
    /// variance of near-diagonal cells, which biases the second moment at
    /// grid-scale `ε^{1/(2H)}`; node pairs carry the exact law.
    pub const ELECTED: Scheme = Scheme::Trapezoid;

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Midpoint => "midpoint",
            Scheme::Trapezoid => "trapezoid",
        }
    }

    /// Number of kernel evaluations on an `n`-interval grid.
    pub fn n_pairs(self, n: usize) -> usize {
        match self {
            Scheme::Midpoint => n * (n + 1) / 2,
            Scheme::Trapezoid => (n + 1) * (n + 2) / 2,
        }
    }
}

impl Default for Scheme {
    fn default() -> Self {
        Scheme::ELECTED
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "midpoint" => Ok(Scheme::Midpoint),
            "trapezoid" => Ok(Scheme::Trapezoid),
            other => Err(Error::Config(format!("unknown scheme {other:?}"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct EstimatorRequest<'a> {
    pub path: &'a FbmPath,
    pub eps: f64,
    pub y: Vec<f64>,
    pub k: Vec<u32>,
    pub scheme: Scheme,
}

impl<'a> EstimatorRequest<'a> {
    /// `y = 0`, `k` from the path's model, default scheme.
    pub fn new(path: &'a FbmPath, eps: f64) -> Self {
        Self {
            path,
            eps,
            y: vec![0.0; path.dim()],
            k: path.model().k().to_vec(),
            scheme: Scheme::default(),
        }
    }

    pub fn with_y(mut self, y: Vec<f64>) -> Self {
        self.y = y;
        self
    }

    pub fn with_k(mut self, k: Vec<u32>) -> Self {
        self.k = k;
        self
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    fn validate(&self) -> Result<()> {
        check_eps(self.eps)?;
        let d = self.path.dim();
        for len in [self.y.len(), self.k.len()] {
            if len != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: len,
                });
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorValue {
    pub value: f64,
    pub n_pairs: usize,
    pub eps: f64,
    pub scheme: Scheme,
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        domain(format!("mollifier width must be positive, got {eps}"))
    }
}

/// Running Neumaier sum.
#[derive(Clone, Copy, Default)]
struct Compensated {
    sum: f64,
    comp: f64,
}

impl Compensated {
    #[inline]
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Number of squares (of side `h`, lower-left interval indices `i' < j'`)
/// and diagonal triangles having the node pair `(i, j)` as a corner.
#[inline]
fn trapezoid_weight(i: usize, j: usize, n: usize, h2: f64) -> f64 {
    let mut squares = 0u32;
    for ii in [i.wrapping_sub(1), i] {
        for jj in [j.wrapping_sub(1), j] {
            if ii < n && jj < n && ii < jj {
                squares += 1;
            }
        }
    }
    let triangles = if i == j {
        u32::from(i < n) + u32::from(i >= 1)
    } else {
        u32::from(j == i + 1)
    };
    h2 * (squares as f64 / 4.0 + triangles as f64 / 6.0)
}

/// `Σ_cells weight · g(x, s−r)` for `n_out` kernels at once. `g` receives the
/// increment `B_{s*} − B_{r*}` of every component and the time separation,
/// and writes its `n_out` values into the output slice.
fn cell_sums<G>(path: &FbmPath, scheme: Scheme, n_out: usize, g: G) -> Vec<f64>
where
    G: Fn(&[f64], f64, &mut [f64]) + Sync,
{
    let n = path.grid().n();
    let h = path.grid().step();
    let h2 = h * h;
    let d = path.dim();
    let comps = path.components();

    let row = |i: usize| -> Vec<Compensated> {
        let mut acc = vec![Compensated::default(); n_out];
        let mut x = vec![0.0; d];
        let mut out = vec![0.0; n_out];
        let mut emit = |x: &[f64], sep: f64, w: f64, acc: &mut [Compensated]| {
            out.iter_mut().for_each(|o| *o = 0.0);
            g(x, sep, &mut out);
            for (a, o) in acc.iter_mut().zip(&out) {
                a.add(w * o);
            }
        };
        match scheme {
            Scheme::Trapezoid => {
                for j in i..=n {
                    for (c, xc) in x.iter_mut().enumerate() {
                        *xc = comps[c][j] - comps[c][i];
                    }
                    let w = trapezoid_weight(i, j, n, h2);
                    emit(&x, (j - i) as f64 * h, w, &mut acc);
                }
            }
            Scheme::Midpoint => {
                if i < n {
                    for (c, xc) in x.iter_mut().enumerate() {
                        *xc = (comps[c][i + 1] - comps[c][i]) / 3.0;
                    }
                    emit(&x, h / 3.0, h2 / 2.0, &mut acc);
                    for j in (i + 1)..n {
                        for (c, xc) in x.iter_mut().enumerate() {
                            let col = &comps[c];
                            *xc = 0.5 * ((col[j] + col[j + 1]) - (col[i] + col[i + 1]));
                        }
                        emit(&x, (j - i) as f64 * h, h2, &mut acc);
                    }
                }
            }
        }
        acc
    };

    let rows: Vec<Vec<Compensated>> = (0..=n).into_par_iter().map(row).collect();
    (0..n_out)
        .map(|k| {
            let mut total = Compensated::default();
            for r in &rows {
                total.add(r[k].value());
            }
            total.value()
        })
        .collect()
}

/// `(−1)^{|k|} ∫_D f_ε^{(k)}(B_s − B_r − y) dr ds`.
pub fn dslt(req: &EstimatorRequest<'_>) -> Result<EstimatorValue> {
    req.validate()?;
    let eps = req.eps;
    let d = req.path.dim();
    let order: u32 = req.k.iter().sum();
    let sign = if order % 2 == 1 { -1.0 } else { 1.0 };
    let unit = unit_direction(&req.k);
    let y = &req.y;
    let values = cell_sums(req.path, req.scheme, 1, |x, _, out| {
        out[0] = match unit {
            Some(j) => {
                let sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                -((x[j] - y[j]) / eps) * gaussian(sq, d, eps)
            }
            None => {
                let z: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
                f_eps_deriv(&z, eps, &req.k).unwrap_or(f64::NAN)
            }
        };
    });
    Ok(EstimatorValue {
        value: sign * values[0],
        n_pairs: req.scheme.n_pairs(req.path.grid().n()),
        eps,
        scheme: req.scheme,
    })
}

fn unit_direction(k: &[u32]) -> Option<usize> {
    if k.iter().sum::<u32>() == 1 {
        k.iter().position(|&v| v == 1)
    } else {
        None
    }
}

fn first_order_direction(path: &FbmPath) -> Result<usize> {
    unit_direction(path.model().k()).ok_or_else(|| {
        Error::Domain("first-order functionals need a multi-index with |k| = 1".into())
    })
}

/// [`dslt`] at `y = 0` with the model's `|k| = 1` multi-index, for several
/// widths in one pass over the path.
pub fn dslt_ladder(path: &FbmPath, eps: &[f64], scheme: Scheme) -> Result<Vec<f64>> {
    for &e in eps {
        check_eps(e)?;
    }
    let j = first_order_direction(path)?;
    let d = path.dim();
    let norms: Vec<f64> = eps.iter().map(|&e| (2.0 * PI * e).powf(-(d as f64) / 2.0)).collect();
    let values = cell_sums(path, scheme, eps.len(), |x, _, out| {
        let sq: f64 = x.iter().map(|v| v * v).sum();
        for ((o, &e), &norm) in out.iter_mut().zip(eps).zip(&norms) {
            let expo = sq / (2.0 * e);
            if expo <= crate::mollifier::UNDERFLOW_EXPONENT {
                // (−1)·(−x_j/ε) f_ε(x)
                *o = (x[j] / e) * norm * (-expo).exp();
            }
        }
    });
    Ok(values)
}

/// `∫_D f_ε(B_s − B_r − y) dr ds`.
pub fn slt(path: &FbmPath, eps: f64, y: &[f64], scheme: Scheme) -> Result<EstimatorValue> {
    check_eps(eps)?;
    let d = path.dim();
    if y.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: y.len(),
        });
    }
    let values = cell_sums(path, scheme, 1, |x, _, out| {
        let sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        out[0] = gaussian(sq, d, eps);
    });
    Ok(EstimatorValue {
        value: values[0],
        n_pairs: scheme.n_pairs(path.grid().n()),
        eps,
        scheme,
    })
}

/// Coefficient of the first-chaos term under `mode`:
/// `(2π)^{−d/2}` per coordinate, `d(2π)^{−d/2}` for the literature's constant.
pub fn first_chaos_coefficient(dim: usize, mode: PrefactorMode) -> f64 {
    mode.factor(dim).sqrt() * (2.0 * PI).powf(-(dim as f64) / 2.0)
}

/// Projection of [`dslt`] (`y = 0`, `|k| = 1`) onto the first Wiener chaos:
/// `c Σ_cells w (ε + v)^{−1−d/2} (B^j_{s*} − B^j_{r*})`, where `v` is the
/// variance of the evaluated increment: `(s−r)^{2H}` at nodes, smaller for
/// interpolated midpoint values.
pub fn first_chaos(path: &FbmPath, eps: f64, mode: PrefactorMode, scheme: Scheme) -> Result<f64> {
    Ok(first_chaos_ladder(path, &[eps], mode, scheme)?[0])
}

/// [`first_chaos`] for several widths in one pass.
pub fn first_chaos_ladder(
    path: &FbmPath,
    eps: &[f64],
    mode: PrefactorMode,
    scheme: Scheme,
) -> Result<Vec<f64>> {
    FirstChaosWeights::new(path.model(), path.grid(), eps, mode, scheme)?.apply(path)
}

/// The first-chaos projection is linear in the path, so on a fixed grid it
/// reduces to one coefficient per node and width. Building the table costs
/// one pass over the cells; applying it costs `O(n)` per path.
#[derive(Clone, Debug)]
pub struct FirstChaosWeights {
    model: HurstModel,
    grid: TimeGrid,
    direction: usize,
    eps: Vec<f64>,
    /// `weights[k][i]` multiplies `B^j(t_i)` for width `eps[k]`.
    weights: Vec<Vec<f64>>,
}

impl FirstChaosWeights {
    pub fn new(
        model: &HurstModel,
        grid: &TimeGrid,
        eps: &[f64],
        mode: PrefactorMode,
        scheme: Scheme,
    ) -> Result<Self> {
        for &e in eps {
            check_eps(e)?;
        }
        let direction = unit_direction(model.k()).ok_or_else(|| {
            Error::Domain("first-order functionals need a multi-index with |k| = 1".into())
        })?;
        let n = grid.n();
        let h = grid.step();
        let h2 = h * h;
        let expo = -1.0 - model.dim() as f64 / 2.0;
        let p = 2.0 * model.hurst();
        let c = first_chaos_coefficient(model.dim(), mode);
        let weights = eps
            .iter()
            .map(|&e| {
                let kernel = |v: f64| c * (e + v).powf(expo);
                let mut g = vec![0.0; n + 1];
                match scheme {
                    Scheme::Trapezoid => {
                        for i in 0..=n {
                            for j in i + 1..=n {
                                let w = trapezoid_weight(i, j, n, h2) * kernel(((j - i) as f64 * h).powf(p));
                                g[j] += w;
                                g[i] -= w;
                            }
                        }
                    }
                    Scheme::Midpoint => {
                        // interpolated increments: the kernel takes their
                        // actual variance, in units of h^{2H}
                        let var = |m: usize| {
                            let dm = |k: usize| (k as f64).powf(p);
                            0.5 * dm(m) + 0.25 * (dm(m + 1) + dm(m - 1)) - 0.5
                        };
                        let hp = h.powf(p);
                        for i in 0..n {
                            let w = h2 / 2.0 * kernel(hp / 9.0) / 3.0;
                            g[i + 1] += w;
                            g[i] -= w;
                            for j in i + 1..n {
                                let w = 0.5 * h2 * kernel(hp * var(j - i));
                                g[j] += w;
                                g[j + 1] += w;
                                g[i] -= w;
                                g[i + 1] -= w;
                            }
                        }
                    }
                }
                g
            })
            .collect();
        Ok(Self {
            model: model.clone(),
            grid: grid.clone(),
            direction,
            eps: eps.to_vec(),
            weights,
        })
    }

    pub fn eps(&self) -> &[f64] {
        &self.eps
    }

    /// Projection values of `path`, one per width.
    pub fn apply(&self, path: &FbmPath) -> Result<Vec<f64>> {
        if path.model() != &self.model || path.grid() != &self.grid {
            return domain("path does not match the model and grid of the weight table");
        }
        let b = path.component(self.direction);
        cell_sums_ok(
            self.weights
                .iter()
                .map(|g| {
                    let mut acc = Compensated::default();
                    for (w, x) in g.iter().zip(b) {
                        acc.add(w * x);
                    }
                    acc.value()
                })
                .collect(),
        )
    }
}

fn cell_sums_ok(v: Vec<f64>) -> Result<Vec<f64>> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(v)
    } else {
        Err(Error::Domain("non-finite estimator value".into()))
    }
}
