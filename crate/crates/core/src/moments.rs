//! Closed-form second moments of two fBm increments `B_s − B_r` and
//! `B_{s'} − B_{r'}` (one component), the Gaussian pair kernel
//! `E[∂f_ε(X) ∂f_ε(Y)]`, chaos coefficients and the chaos inner kernel.
//!
//! With `r < r'` the two increments sit in one of three orderings, each
//! described by three nonnegative gaps `(a, b, c)`:
//!
//! | region | ordering        | a      | b      | c      |
//! |--------|-----------------|--------|--------|--------|
//! | D1     | r < r' < s < s' | r' − r | s − r' | s' − s |
//! | D2     | r < r' < s' < s | r' − r | s' − r'| s − s' |
//! | D3     | r < s < r' < s' | s − r  | r' − s | s' − r'|

use std::f64::consts::PI;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    /// Interleaved: `r < r' < s < s'`.
    D1,
    /// Nested: `r < r' < s' < s`.
    D2,
    /// Disjoint: `r < s < r' < s'`.
    D3,
}

impl Region {
    pub const ALL: [Region; 3] = [Region::D1, Region::D2, Region::D3];
}

/// One of the three orderings with its gap coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairGeometry {
    pub region: Region,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub hurst: f64,
}

impl PairGeometry {
    pub fn new(region: Region, a: f64, b: f64, c: f64, hurst: f64) -> Result<Self> {
        if !(a >= 0.0 && b >= 0.0 && c >= 0.0) {
            return domain(format!("gaps must be nonnegative, got ({a}, {b}, {c})"));
        }
        if !(hurst > 0.0 && hurst < 1.0) {
            return domain(format!("Hurst index must lie in (0,1), got {hurst}"));
        }
        Ok(Self {
            region,
            a,
            b,
            c,
            hurst,
        })
    }

    /// Classifies the intervals `[r, s]` and `[r2, s2]`, swapping them if
    /// needed so that the first one starts first.
    pub fn from_times(r: f64, s: f64, r2: f64, s2: f64, hurst: f64) -> Result<Self> {
        if !(r <= s && r2 <= s2) {
            return domain("intervals must satisfy r <= s");
        }
        let (r, s, r2, s2) = if r <= r2 { (r, s, r2, s2) } else { (r2, s2, r, s) };
        if s <= r2 {
            Self::new(Region::D3, s - r, r2 - s, s2 - r2, hurst)
        } else if s2 <= s {
            Self::new(Region::D2, r2 - r, s2 - r2, s - s2, hurst)
        } else {
            Self::new(Region::D1, r2 - r, s - r2, s2 - s, hurst)
        }
    }

    /// `(λ, ρ)`: the variances `|s−r|^{2H}` and `|s'−r'|^{2H}`.
    pub fn variances(&self) -> (f64, f64) {
        let p = 2.0 * self.hurst;
        let (a, b, c) = (self.a, self.b, self.c);
        match self.region {
            Region::D1 => ((a + b).powf(p), (b + c).powf(p)),
            Region::D2 => ((a + b + c).powf(p), b.powf(p)),
            Region::D3 => (a.powf(p), c.powf(p)),
        }
    }

    pub fn moments(&self) -> PairMoments {
        let (lambda, rho) = self.variances();
        PairMoments {
            lambda,
            rho,
            mu: mu_exact(self),
        }
    }
}

/// `λ`, `ρ` and the signed covariance `μ` of the two increments.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairMoments {
    pub lambda: f64,
    pub rho: f64,
    pub mu: f64,
}

impl PairMoments {
    /// `|εI + Σ| = (ε+λ)(ε+ρ) − μ²`.
    pub fn det_reg(&self, eps: f64) -> f64 {
        eps * eps + eps * (self.lambda + self.rho) + (self.lambda * self.rho - self.mu * self.mu)
    }

    pub fn covariance(&self) -> Cov2 {
        Cov2 {
            s11: self.lambda,
            s22: self.rho,
            s12: self.mu,
        }
    }
}

/// Symmetric 2×2 covariance matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cov2 {
    pub s11: f64,
    pub s22: f64,
    pub s12: f64,
}

/// `(x+h)^p − x^p` without cancellation for `h ≪ x`.
#[inline]
fn pow_increment(x: f64, h: f64, p: f64) -> f64 {
    if x == 0.0 {
        h.powf(p)
    } else {
        x.powf(p) * (p * (h / x).ln_1p()).exp_m1()
    }
}

/// `(a+b+c)^p + b^p − (a+b)^p − (b+c)^p`, accurate when `a, c ≪ b`.
pub(crate) fn second_difference(a: f64, b: f64, c: f64, p: f64) -> f64 {
    if p == 1.0 {
        return 0.0;
    }
    if b == 0.0 {
        return (a + c).powf(p) - a.powf(p) - c.powf(p);
    }
    let (u, v) = (a / b, c / b);
    if u + v <= 0.5 {
        // b^p Σ_{k≥2} C(p,k) [(u+v)^k − u^k − v^k]
        let (mut binom, mut s) = (p, 0.0);
        let (mut upow, mut vpow) = (1.0, 1.0);
        let mut sum = 0.0;
        for k in 2..200 {
            binom *= (p - (k - 1) as f64) / k as f64;
            // S_k = (u+v) S_{k−1} + u v^{k−1} + v u^{k−1}
            s = (u + v) * s + u * vpow * v + v * upow * u;
            upow *= u;
            vpow *= v;
            let term = binom * s;
            sum += term;
            if term.abs() <= 1e-17 * sum.abs() {
                break;
            }
        }
        b.powf(p) * sum
    } else {
        let (small, large) = if a <= c { (a, c) } else { (c, a) };
        pow_increment(b + large, small, p) - pow_increment(b, small, p)
    }
}

/// Signed `μ = E[(B_s − B_r)(B_{s'} − B_{r'})]` from the per-region
/// second-difference identities.
pub fn mu_exact(geom: &PairGeometry) -> f64 {
    let p = 2.0 * geom.hurst;
    let (a, b, c) = (geom.a, geom.b, geom.c);
    let twice = match geom.region {
        Region::D1 => pow_increment(a, b + c, p) + b.powf(p) - c.powf(p),
        Region::D2 => pow_increment(a, b, p) + pow_increment(c, b, p),
        Region::D3 => second_difference(a, b, c, p),
    };
    0.5 * twice
}

/// `μ(x, u₁, u₂) = |E[B_{u₁}(B_{x+u₂} − B_x)]|`, straight from the covariance.
pub fn mu_bridge(x: f64, u1: f64, u2: f64, hurst: f64) -> f64 {
    let p = 2.0 * hurst;
    let v = (x + u2).powf(p) + (x - u1).abs().powf(p) - x.powf(p) - (x + u2 - u1).abs().powf(p);
    (0.5 * v).abs()
}

/// Prefactor convention for the pair kernel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PrefactorMode {
    /// `d²`, as printed in the closed form of the literature.
    Paper,
    /// `1`: the kernel of a single partial derivative `∂_j`.
    PerCoordinate,
}

impl PrefactorMode {
    /// The mode matching the estimator's definition (one partial
    /// derivative), as confirmed by the Gauss–Hermite oracle tests.
    pub const ELECTED: PrefactorMode = PrefactorMode::PerCoordinate;

    pub fn factor(self, dim: usize) -> f64 {
        match self {
            PrefactorMode::Paper => (dim * dim) as f64,
            PrefactorMode::PerCoordinate => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PrefactorMode::Paper => "paper",
            PrefactorMode::PerCoordinate => "per-coordinate",
        }
    }
}

impl std::str::FromStr for PrefactorMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(PrefactorMode::Paper),
            "per-coordinate" | "per_coordinate" => Ok(PrefactorMode::PerCoordinate),
            other => Err(Error::Config(format!("unknown prefactor mode {other:?}"))),
        }
    }
}

/// `c·(2π)^{−d}|εI+Σ|^{−d/2−1}Σ₁₂` with `c` given by `mode`.
pub fn pair_kernel(eps: f64, cov: &Cov2, dim: usize, mode: PrefactorMode) -> Result<f64> {
    if !(eps > 0.0) {
        return domain(format!("mollifier width must be positive, got {eps}"));
    }
    let det = (eps + cov.s11) * (eps + cov.s22) - cov.s12 * cov.s12;
    if !(det > 0.0) {
        return domain(format!("regularized determinant must be positive, got {det}"));
    }
    Ok(pair_kernel_from_det(det, cov.s12, dim, mode))
}

#[inline]
pub(crate) fn pair_kernel_from_det(det: f64, s12: f64, dim: usize, mode: PrefactorMode) -> f64 {
    let d = dim as f64;
    mode.factor(dim) * (2.0 * PI).powf(-d) * det.powf(-d / 2.0 - 1.0) * s12
}

/// Largest chaos order accepted by [`chaos_coefficient`].
pub const MAX_CHAOS_ORDER: u32 = 20;

/// A chaos multi-index with its coefficient.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChaosCoefficient {
    pub q_multi: Vec<u32>,
    pub beta: f64,
}

impl ChaosCoefficient {
    pub fn new(q_multi: Vec<u32>) -> Result<Self> {
        let beta = chaos_coefficient(&q_multi)?;
        Ok(Self { q_multi, beta })
    }

    pub fn order(&self) -> u32 {
        self.q_multi.iter().sum()
    }

    pub fn dim(&self) -> usize {
        self.q_multi.len()
    }
}

fn factorial(n: u32) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, k| acc * BigInt::from(k))
}

/// Rational part `R` of `β = R · (2π)^{−d/2}`:
/// `R = (−1)^q d ∏(2q_i)!/q_i! / ((2q−1)! 2^q)`.
pub fn chaos_coefficient_rational(q_multi: &[u32]) -> Result<BigRational> {
    let q: u32 = q_multi.iter().sum();
    if q == 0 {
        return domain("chaos order q = Σq_i must be at least 1");
    }
    if q > MAX_CHAOS_ORDER {
        return Err(Error::Overflow(format!(
            "chaos order {q} exceeds the supported maximum {MAX_CHAOS_ORDER}"
        )));
    }
    let d = BigInt::from(q_multi.len());
    let num = q_multi
        .iter()
        .fold(d, |acc, &qi| acc * factorial(2 * qi) / factorial(qi));
    let den = factorial(2 * q - 1) * (BigInt::one() << q as usize);
    let r = BigRational::new(num, den);
    Ok(if q % 2 == 1 { -r } else { r })
}

/// `β_{q,d}` for the multi-index `(q₁,…,q_d)`; `d` is the slice length.
pub fn chaos_coefficient(q_multi: &[u32]) -> Result<f64> {
    let r = chaos_coefficient_rational(q_multi)?;
    let d = q_multi.len() as f64;
    let mag = r
        .abs()
        .to_f64()
        .ok_or_else(|| Error::Overflow("coefficient not representable".into()))?;
    let signed = if r.is_negative() { -mag } else { mag };
    Ok(signed * (2.0 * PI).powf(-d / 2.0))
}

/// `β_q` for `d = 2`: `(−1)^q/((2q−1)! π) · (2q₁)!(2q₂)!/(q₁! q₂! 2^q)`.
pub fn chaos_coefficient_planar(q1: u32, q2: u32) -> Result<f64> {
    let q = q1 + q2;
    if q == 0 {
        return domain("chaos order must be at least 1");
    }
    if q > MAX_CHAOS_ORDER {
        return Err(Error::Overflow(format!("chaos order {q} too large")));
    }
    let num = factorial(2 * q1) * factorial(2 * q2);
    let den = factorial(2 * q - 1) * factorial(q1) * factorial(q2) * (BigInt::one() << q as usize);
    let mag = BigRational::new(num, den).to_f64().unwrap_or(f64::NAN) / PI;
    Ok(if q % 2 == 1 { -mag } else { mag })
}

/// First-order coefficient under `mode`: `β_{1,d}` for [`PrefactorMode::Paper`],
/// `β_{1,d}/d` for [`PrefactorMode::PerCoordinate`].
pub fn first_order_coefficient(dim: usize, mode: PrefactorMode) -> f64 {
    -mode.factor(dim).sqrt() * (2.0 * PI).powf(-(dim as f64) / 2.0)
}

/// `G^{(q,d)}_{ε,x}(u₁,u₂) = (ε+u₁^{2H})^{−d/2−q}(ε+u₂^{2H})^{−d/2−q} μ(x,u₁,u₂)^{2q−1}`.
pub fn chaos_inner_kernel(
    eps: f64,
    x: f64,
    u1: f64,
    u2: f64,
    q: u32,
    dim: usize,
    hurst: f64,
) -> Result<f64> {
    if !(eps > 0.0) {
        return domain(format!("mollifier width must be positive, got {eps}"));
    }
    if q == 0 {
        return domain("chaos order must be at least 1");
    }
    let p = 2.0 * hurst;
    let e = -(dim as f64) / 2.0 - q as f64;
    let mu = mu_bridge(x, u1, u2, hurst);
    Ok((eps + u1.powf(p)).powf(e) * (eps + u2.powf(p)).powf(e) * mu.powi(2 * q as i32 - 1))
}

/// `(λρ − μ²)` divided by the region's lower-bound expression:
/// D1 `(a+b)^{2H}c^{2H} + a^{2H}(b+c)^{2H}`, D2 `b^{2H}(a^{2H}+c^{2H})`,
/// D3 `(ac)^{2H}`.
pub fn lemma21_lower_bound_gap(geom: &PairGeometry) -> Result<f64> {
    let p = 2.0 * geom.hurst;
    let (a, b, c) = (geom.a, geom.b, geom.c);
    let bound = match geom.region {
        Region::D1 => (a + b).powf(p) * c.powf(p) + a.powf(p) * (b + c).powf(p),
        Region::D2 => b.powf(p) * (a.powf(p) + c.powf(p)),
        Region::D3 => (a * c).powf(p),
    };
    if !(bound > 0.0) {
        return domain("lower-bound expression vanishes for this geometry");
    }
    let m = geom.moments();
    Ok((m.lambda * m.rho - m.mu * m.mu) / bound)
}
