//! The Gaussian approximate identity `f_ε(x) = (2πε)^{-d/2} exp(−|x|²/2ε)` and
//! its partial derivatives.
//!
//! Derivatives use the closed form
//! `∂^k f_ε(x) = ∏_j (−1)^{k_j} ε^{−k_j/2} He_{k_j}(x_j/√ε) · f_ε(x)`
//! with `He_m` the probabilists' Hermite polynomials.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{domain, Result};

/// Exponent beyond which `exp(−|x|²/2ε)` is reported as exactly zero.
pub const UNDERFLOW_EXPONENT: f64 = 745.0;

/// Orders up to this use the three-term recurrence.
const RECURRENCE_MAX_ORDER: usize = 8;
const TABLE_MAX_ORDER: usize = 40;

/// Width, dimension and derivative multi-index of a mollifier.
#[derive(Clone, Debug, PartialEq)]
pub struct MollifierParams {
    eps: f64,
    k: Vec<u32>,
}

impl MollifierParams {
    pub fn new(eps: f64, k: Vec<u32>) -> Result<Self> {
        check_eps(eps)?;
        if k.is_empty() {
            return domain("multi-index must have at least one entry");
        }
        Ok(Self { eps, k })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn dim(&self) -> usize {
        self.k.len()
    }

    pub fn k(&self) -> &[u32] {
        &self.k
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        f_eps(x, self.eps)
    }

    pub fn deriv(&self, x: &[f64]) -> Result<f64> {
        f_eps_deriv(x, self.eps, &self.k)
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        domain(format!("mollifier width must be positive, got {eps}"))
    }
}

/// `f_ε(x)`.
pub fn f_eps(x: &[f64], eps: f64) -> Result<f64> {
    check_eps(eps)?;
    let sq: f64 = x.iter().map(|v| v * v).sum();
    Ok(gaussian(sq, x.len(), eps))
}

/// `∂^k f_ε(x)` for the multi-index `k`.
pub fn f_eps_deriv(x: &[f64], eps: f64, k: &[u32]) -> Result<f64> {
    check_eps(eps)?;
    if x.len() != k.len() {
        return Err(crate::Error::DimensionMismatch {
            expected: k.len(),
            got: x.len(),
        });
    }
    let sq: f64 = x.iter().map(|v| v * v).sum();
    let base = gaussian(sq, x.len(), eps);
    if base == 0.0 {
        return Ok(0.0);
    }
    let root = eps.sqrt();
    let mut factor = 1.0;
    for (&xj, &kj) in x.iter().zip(k) {
        if kj == 0 {
            continue;
        }
        let sign = if kj % 2 == 1 { -1.0 } else { 1.0 };
        factor *= sign * root.powi(-(kj as i32)) * hermite_he(kj as usize, xj / root);
    }
    Ok(factor * base)
}

/// `(2πε)^{-d/2} exp(−sq/2ε)` with the underflow cut-off.
#[inline]
pub(crate) fn gaussian(sq: f64, dim: usize, eps: f64) -> f64 {
    let expo = sq / (2.0 * eps);
    if expo > UNDERFLOW_EXPONENT {
        0.0
    } else {
        (2.0 * PI * eps).powf(-(dim as f64) / 2.0) * (-expo).exp()
    }
}

/// Probabilists' Hermite polynomial `He_m(z)`.
pub fn hermite_he(m: usize, z: f64) -> f64 {
    if m <= RECURRENCE_MAX_ORDER {
        hermite_recurrence(m, z)
    } else if m <= TABLE_MAX_ORDER {
        let coeffs = &hermite_table()[m];
        coeffs.iter().rev().fold(0.0, |acc, &c| acc * z + c)
    } else {
        hermite_recurrence(m, z)
    }
}

fn hermite_recurrence(m: usize, z: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, z);
    if m == 0 {
        return prev;
    }
    for n in 1..m {
        let next = z * cur - n as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Power-basis coefficients of `He_0 … He_TABLE_MAX_ORDER`, lowest degree first.
fn hermite_table() -> &'static Vec<Vec<f64>> {
    static TABLE: OnceLock<Vec<Vec<f64>>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table: Vec<Vec<f64>> = vec![vec![1.0], vec![0.0, 1.0]];
        for n in 1..TABLE_MAX_ORDER {
            let mut next = vec![0.0; n + 2];
            for (i, &c) in table[n].iter().enumerate() {
                next[i + 1] += c;
            }
            for (i, &c) in table[n - 1].iter().enumerate() {
                next[i] -= n as f64 * c;
            }
            table.push(next);
        }
        table
    })
}
