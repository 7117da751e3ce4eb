//! Second moment of the regularized estimator and of its first chaos, split
//! over the three orderings of two increments.
//!
//! For `r < r'` each ordering is parametrized by its gaps `(a, b, c)` with
//! `a + b + c < t`; integrating out the left endpoint leaves the weight
//! `t − a − b − c`. The gaps are written in log-simplex coordinates
//!
//! ```text
//! S = a+b+c = t·e^{−σ},  a = S x,  b = S(1−x) y,  c = S(1−x)(1−y),
//! x = logistic(z₁),      y = logistic(z₂),
//! ```
//!
//! so that every near-singular corner and edge, which sits at scale
//! `ε^{1/(2H)}`, becomes an O(1)-wide feature of the box integrand.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{clt_scale_factor, integrate_adaptive, QuadResult, QuadSpec};
use crate::error::{domain, Error, Result};
use crate::fbm::HurstModel;
use crate::moments::{PairGeometry, PrefactorMode, Region};

/// Whether the covariance enters the integrands with its sign or in
/// absolute value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MuConvention {
    Signed,
    Absolute,
}

impl MuConvention {
    /// Convention satisfied by the estimator's Monte Carlo second moment.
    pub const ELECTED: MuConvention = MuConvention::Signed;

    pub fn apply(self, mu: f64) -> f64 {
        match self {
            MuConvention::Signed => mu,
            MuConvention::Absolute => mu.abs(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MuConvention::Signed => "signed",
            MuConvention::Absolute => "absolute",
        }
    }
}

impl std::str::FromStr for MuConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "signed" => Ok(MuConvention::Signed),
            "absolute" | "abs" => Ok(MuConvention::Absolute),
            other => Err(Error::Config(format!("unknown mu convention {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceBreakdown {
    pub eps: f64,
    pub v1: f64,
    pub v2: f64,
    pub v3: f64,
    pub total: f64,
    /// Sum of the three quadrature error estimates.
    pub error: f64,
    pub mu_convention: MuConvention,
    pub mode: PrefactorMode,
    /// `total` times the squared normalization of [`clt_scale_factor`].
    pub scaled: f64,
}

#[derive(Clone, Copy)]
enum Kernel {
    /// `|εI+Σ|^{−d/2−1} μ`
    Estimator,
    /// `(ε+λ)^{−d/2−1}(ε+ρ)^{−d/2−1} μ`
    FirstChaos,
}

/// Half-width of the logistic coordinates; the tails beyond carry a
/// relative weight below `e^{−36}`.
const LOGISTIC_RANGE: f64 = 36.0;

fn logistic_pair(z: f64) -> (f64, f64) {
    // (x, 1−x) without cancellation
    if z >= 0.0 {
        let e = (-z).exp();
        (1.0 / (1.0 + e), e / (1.0 + e))
    } else {
        let e = z.exp();
        (e / (1.0 + e), 1.0 / (1.0 + e))
    }
}

fn region_integral(
    eps: f64,
    model: &HurstModel,
    region: Region,
    kernel: Kernel,
    convention: MuConvention,
    spec: &QuadSpec,
) -> Result<QuadResult> {
    let (h, t) = (model.hurst(), model.horizon());
    let d = model.dim() as f64;
    let p = 2.0 * h;
    let expo = -d / 2.0 - 1.0;
    // contributions from S below ε^{1/(2H)}·e^{−14} are negligible
    let sigma_max = (t.ln() - eps.ln() / p).max(0.0) + 14.0;
    let integrand = |w: &[f64]| {
        let s = t * (-w[0]).exp();
        let (x, xc) = logistic_pair(w[1]);
        let (y, yc) = logistic_pair(w[2]);
        let (a, b, c) = (s * x, s * xc * y, s * xc * yc);
        let geom = PairGeometry {
            region,
            a,
            b,
            c,
            hurst: h,
        };
        let m = geom.moments();
        let mu = convention.apply(m.mu);
        if mu == 0.0 {
            return 0.0;
        }
        let core = match kernel {
            Kernel::Estimator => m.det_reg(eps).powf(expo),
            Kernel::FirstChaos => ((eps + m.lambda) * (eps + m.rho)).powf(expo),
        };
        let jac = s * s * s * xc * x * xc * y * yc;
        (t - s) * core * mu * jac
    };
    let lower = [0.0, -LOGISTIC_RANGE, -LOGISTIC_RANGE];
    let upper = [sigma_max, LOGISTIC_RANGE, LOGISTIC_RANGE];
    let spec = QuadSpec {
        singular_edges: Vec::new(),
        ..spec.clone()
    };
    let mut r = integrate_adaptive(integrand, &lower, &upper, &spec)?;
    r.value *= 2.0;
    r.error *= 2.0;
    Ok(r)
}

fn check_inputs(eps: f64, model: &HurstModel) -> Result<()> {
    if !(eps > 0.0 && eps.is_finite()) {
        return domain(format!("mollifier width must be positive, got {eps}"));
    }
    if model.order() != 1 {
        return domain("variance pieces are implemented for |k| = 1 only");
    }
    Ok(())
}

/// `V₁ + V₂ + V₃ = E[α̂'_{t,ε}(0)²]` (for the signed convention), with
/// `V_i = 2c(2π)^{−d} ∫_{D_i} |εI+Σ|^{−d/2−1} μ`, `c` the prefactor of `mode`.
pub fn variance_pieces(
    eps: f64,
    model: &HurstModel,
    convention: MuConvention,
    mode: PrefactorMode,
    spec: &QuadSpec,
) -> Result<VarianceBreakdown> {
    check_inputs(eps, model)?;
    let constant = mode.factor(model.dim()) * (2.0 * PI).powi(-(model.dim() as i32));
    let parts: Vec<QuadResult> = Region::ALL
        .par_iter()
        .map(|&region| region_integral(eps, model, region, Kernel::Estimator, convention, spec))
        .collect::<Result<_>>()?;
    let v: Vec<f64> = parts.iter().map(|r| constant * r.value).collect();
    let error = constant * parts.iter().map(|r| r.error).sum::<f64>();
    let total = v[0] + v[1] + v[2];
    let scale = clt_scale_factor(model, eps);
    Ok(VarianceBreakdown {
        eps,
        v1: v[0],
        v2: v[1],
        v3: v[2],
        total,
        error,
        mu_convention: convention,
        mode,
        scaled: total * scale * scale,
    })
}

/// `E[I₁(f_{1,ε})²]`: the same three-region integral with the determinant
/// replaced by its diagonal part `(ε+λ)(ε+ρ)`.
pub fn first_chaos_variance(
    eps: f64,
    model: &HurstModel,
    convention: MuConvention,
    mode: PrefactorMode,
    spec: &QuadSpec,
) -> Result<QuadResult> {
    check_inputs(eps, model)?;
    let constant = mode.factor(model.dim()) * (2.0 * PI).powi(-(model.dim() as i32));
    let parts: Vec<QuadResult> = Region::ALL
        .par_iter()
        .map(|&region| region_integral(eps, model, region, Kernel::FirstChaos, convention, spec))
        .collect::<Result<_>>()?;
    Ok(QuadResult {
        value: constant * parts.iter().map(|r| r.value).sum::<f64>(),
        error: constant * parts.iter().map(|r| r.error).sum::<f64>(),
        evaluations: parts.iter().map(|r| r.evaluations).sum(),
        subdivisions: parts.iter().map(|r| r.subdivisions).sum(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(h: f64, d: usize) -> HurstModel {
        HurstModel::first_order(h, d, 1.0).unwrap()
    }

    #[test]
    fn brownian_disjoint_piece_vanishes() {
        let m = model(0.5, 2);
        let v = variance_pieces(0.1, &m, MuConvention::Signed, PrefactorMode::PerCoordinate, &QuadSpec::default())
            .unwrap();
        assert_eq!(v.v3, 0.0);
        assert!(v.v1 > 0.0 && v.v2 > 0.0);
    }

    #[test]
    fn large_eps_decay() {
        // ε^{d+2}·total → 2·(2π)^{−d}·∫ (t−S) μ over the gap simplex
        let m = model(0.5, 3);
        let spec = QuadSpec::with_tolerances(1e-8, 1e-30);
        let a = variance_pieces(100.0, &m, MuConvention::Signed, PrefactorMode::PerCoordinate, &spec).unwrap();
        let b = variance_pieces(1000.0, &m, MuConvention::Signed, PrefactorMode::PerCoordinate, &spec).unwrap();
        let sa = a.total * 100f64.powi(5);
        let sb = b.total * 1000f64.powi(5);
        // for BM, ∫∫_{D²} |[r,s]∩[r',s']| = ∫₀¹ (u(1−u))² du = 1/30
        let limit = (2.0 * PI).powi(-3) / 30.0;
        assert!(((sb - limit) / limit).abs() < 0.01, "{sb} {limit}");
        assert!((sb - limit).abs() < (sa - limit).abs());
    }

    #[test]
    fn absolute_dominates_signed() {
        let m = model(1.0 / 3.0, 3);
        let spec = QuadSpec::with_tolerances(1e-7, 1e-14);
        let s = variance_pieces(0.1, &m, MuConvention::Signed, PrefactorMode::PerCoordinate, &spec).unwrap();
        let a = variance_pieces(0.1, &m, MuConvention::Absolute, PrefactorMode::PerCoordinate, &spec).unwrap();
        assert!(s.v3 < 0.0);
        assert!(a.v3 > 0.0);
        assert!(a.v1.abs() >= s.v1.abs() * (1.0 - 1e-7));
        assert!(a.v2.abs() >= s.v2.abs() * (1.0 - 1e-7));
        assert!(a.v3.abs() >= s.v3.abs() * (1.0 - 1e-7));
    }
}
