//! Closed-form limits at criticality and the one-dimensional singular
//! integrals whose `ε → 0` behaviour produces them.

use std::f64::consts::PI;

use super::{integrate_1d, QuadSpec};
use crate::error::{domain, Result};
use crate::fbm::HurstModel;

fn check_critical(hurst: f64, dim: usize) -> Result<()> {
    if (hurst * dim as f64 - 1.0).abs() > crate::fbm::CRITICAL_REL_TOL {
        return domain(format!("requires H·d = 1, got H = {hurst}, d = {dim}"));
    }
    Ok(())
}

fn check_small_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return domain(format!("requires 0 < ε < 1, got {eps}"));
    }
    Ok(())
}

/// `∫₀^{ε^{−1/H}} x^{H−1/2}(1+x^H)^{−d/2−1} dx`, evaluated in `x = e^u`.
pub fn lemma23_i(eps: f64, hurst: f64, dim: usize) -> Result<f64> {
    check_critical(hurst, dim)?;
    check_small_eps(eps)?;
    let d = dim as f64;
    let top = -eps.ln() / hurst;
    // below u = −80/(H+1/2) the integrand is under e^{−80}
    let bottom = -80.0 / (hurst + 0.5);
    let g = |u: f64| (u * (hurst + 0.5)).exp() * (1.0 + (u * hurst).exp()).powf(-d / 2.0 - 1.0);
    Ok(integrate_1d(g, bottom, top, &QuadSpec::with_tolerances(1e-11, 1e-300))?.value)
}

/// [`lemma23_i`] divided by `log(1/ε)`; tends to `1/H`.
pub fn lemma23_i_ratio(eps: f64, hurst: f64, dim: usize) -> Result<f64> {
    Ok(lemma23_i(eps, hurst, dim)? / (1.0 / eps).ln())
}

/// `∫₀¹ x^{2H}(ε+x^{2H})^{−d/2−1} dx`, evaluated in `x = e^{−u}`.
pub fn lemma23_ii(eps: f64, hurst: f64, dim: usize) -> Result<f64> {
    check_critical(hurst, dim)?;
    check_small_eps(eps)?;
    let d = dim as f64;
    let p = 2.0 * hurst;
    let knee = -eps.ln() / p;
    let top = knee + 80.0 / (p + 1.0);
    let g = |u: f64| {
        let x2h = (-p * u).exp();
        (-(p + 1.0) * u).exp() * (eps + x2h).powf(-d / 2.0 - 1.0)
    };
    Ok(integrate_1d(g, 0.0, top, &QuadSpec::with_tolerances(1e-11, 1e-300))?.value)
}

/// [`lemma23_ii`] divided by `log(1/ε)`; tends to `1/(2H)`.
pub fn lemma23_ii_ratio(eps: f64, hurst: f64, dim: usize) -> Result<f64> {
    Ok(lemma23_ii(eps, hurst, dim)? / (1.0 / eps).ln())
}

/// `σ² = 2H d² t^{3−4H} / ((2π)^d (1−2H)²)` at `H = 1/d`, `d ≥ 3`.
pub fn sigma_squared(model: &HurstModel) -> Result<f64> {
    let (h, d, t) = (model.hurst(), model.dim(), model.horizon());
    if d < 3 {
        return domain(format!("limit variance needs d >= 3, got {d}"));
    }
    check_critical(h, d)?;
    let df = d as f64;
    Ok(2.0 * h * df * df * t.powf(3.0 - 4.0 * h) / ((2.0 * PI).powi(d as i32) * (1.0 - 2.0 * h).powi(2)))
}

/// `5t / (64π²√2)`, the planar (`d = 2`, `H = 1/2`) limit variance.
pub fn planar_target(horizon: f64) -> f64 {
    5.0 * horizon / (64.0 * PI * PI * 2f64.sqrt())
}

/// Normalization applied to the estimator before comparing with the limit
/// law: `(log 1/ε)^{−1}` for `d = 2, H = 1/2`, otherwise
/// `(ε^{−1/H} log 1/ε)^{H−1/2}`.
pub fn clt_scale_factor(model: &HurstModel, eps: f64) -> f64 {
    let l = (1.0 / eps).ln();
    if model.dim() == 2 && (model.hurst() - 0.5).abs() < 1e-12 {
        1.0 / l
    } else {
        let h = model.hurst();
        // (ε^{−1/H} L)^{H−1/2} = exp((H−1/2)(ln L − ln ε / H))
        ((h - 0.5) * (l.ln() - eps.ln() / h)).exp()
    }
}

/// `(log 1/ε)^{2H−1} ∫_{1/log(1/ε)}^{t} (t−b) b^{2H−2} db`; tends to `t/(1−2H)`.
pub fn v3_b_factor(model: &HurstModel, eps: f64) -> Result<f64> {
    check_critical(model.hurst(), model.dim())?;
    check_small_eps(eps)?;
    let (h, t) = (model.hurst(), model.horizon());
    let l = (1.0 / eps).ln();
    let lo = 1.0 / l;
    if lo >= t {
        return domain(format!("cutoff 1/log(1/ε) = {lo} exceeds the horizon {t}"));
    }
    // b = e^v removes the power decay
    let g = |v: f64| {
        let b = v.exp();
        (t - b) * b.powf(2.0 * h - 1.0)
    };
    let r = integrate_1d(g, lo.ln(), t.ln(), &QuadSpec::with_tolerances(1e-12, 1e-300))?;
    Ok(l.powf(2.0 * h - 1.0) * r.value)
}

/// `(ε^{−1/H})^{2H−1} ∫∫_{[0, tε^{−1/(2H)}]²} ac[(1+a^{2H})(1+c^{2H})]^{−d/2−1} da dc`;
/// tends to `t^{2−4H}/(1−2H)²`. The integrand factorizes, so the square of
/// the one-dimensional integral is taken.
pub fn v3_ac_factor(model: &HurstModel, eps: f64) -> Result<f64> {
    check_critical(model.hurst(), model.dim())?;
    check_small_eps(eps)?;
    let (h, t, d) = (model.hurst(), model.horizon(), model.dim() as f64);
    let top = t.ln() - eps.ln() / (2.0 * h);
    // a = e^v; below v = −40 the integrand is under e^{−80}
    let g = |v: f64| {
        let a = v.exp();
        a * a * (1.0 + a.powf(2.0 * h)).powf(-d / 2.0 - 1.0)
    };
    let r = integrate_1d(g, -40.0, top, &QuadSpec::with_tolerances(1e-12, 1e-300))?;
    let scale = ((2.0 * h - 1.0) * (-eps.ln() / h)).exp();
    Ok(scale * r.value * r.value)
}

/// `H(1−2H) · 2d²/(2π)^d` times the two finite-ε factors.
pub fn v3_factorized_limit(model: &HurstModel, eps: f64) -> Result<f64> {
    let (h, d) = (model.hurst(), model.dim() as f64);
    let constant = h * (1.0 - 2.0 * h) * 2.0 * d * d / (2.0 * PI).powf(d);
    Ok(constant * v3_b_factor(model, eps)? * v3_ac_factor(model, eps)?)
}
