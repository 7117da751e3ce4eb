//! Deterministic adaptive integration over boxes of dimension 1 to 3 and the
//! singular integrals built on it.
//!
//! Boundary facets on which the integrand blows up can be flagged; the
//! integrator then substitutes along that axis before subdividing, so that
//! the rule never sees the raw singularity.

mod hermite;
mod limits;
mod rules;
mod variance;

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

pub use hermite::gauss_hermite;
pub use limits::{
    clt_scale_factor, lemma23_i, lemma23_i_ratio, lemma23_ii, lemma23_ii_ratio, planar_target,
    sigma_squared, v3_ac_factor, v3_b_factor, v3_factorized_limit,
};
pub use variance::{first_chaos_variance, variance_pieces, MuConvention, VarianceBreakdown};

/// Which end of an axis is singular.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Lower,
    Upper,
}

/// Substitution applied near a flagged facet.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum EdgeMap {
    /// `u = v^p` measured from the facet.
    Power(f64),
    /// `u = exp(1 − 1/v)` measured from the facet.
    Log,
}

impl EdgeMap {
    /// The map that flattens a `u^{2H−1}`-type singularity: `Power(1/(1−2H))`,
    /// or `Log` at `H = 1/2`.
    pub fn for_hurst(hurst: f64) -> Self {
        if (hurst - 0.5).abs() < 1e-12 || hurst > 0.5 {
            EdgeMap::Log
        } else {
            EdgeMap::Power(1.0 / (1.0 - 2.0 * hurst))
        }
    }

    fn eval(self, v: f64) -> (f64, f64) {
        match self {
            EdgeMap::Power(p) => (v.powf(p), p * v.powf(p - 1.0)),
            EdgeMap::Log => {
                if v <= 0.0 {
                    (0.0, 0.0)
                } else {
                    let u = (1.0 - 1.0 / v).exp();
                    (u, u / (v * v))
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingularEdge {
    pub axis: usize,
    pub side: Side,
    pub map: EdgeMap,
}

impl SingularEdge {
    pub fn lower(axis: usize, map: EdgeMap) -> Self {
        Self {
            axis,
            side: Side::Lower,
            map,
        }
    }

    pub fn upper(axis: usize, map: EdgeMap) -> Self {
        Self {
            axis,
            side: Side::Upper,
            map,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
    pub singular_edges: Vec<SingularEdge>,
}

impl Default for QuadSpec {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 1e-12,
            max_subdivisions: 1_000_000,
            singular_edges: Vec::new(),
        }
    }
}

impl QuadSpec {
    pub fn with_tolerances(rel_tol: f64, abs_tol: f64) -> Self {
        Self {
            rel_tol,
            abs_tol,
            ..Self::default()
        }
    }

    pub fn with_edge(mut self, edge: SingularEdge) -> Self {
        self.singular_edges.push(edge);
        self
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::Config("quadrature tolerances must be positive".into()));
        }
        for e in &self.singular_edges {
            if e.axis >= dim {
                return Err(Error::Config(format!(
                    "singular edge on axis {} of a {dim}-dimensional box",
                    e.axis
                )));
            }
            if let EdgeMap::Power(p) = e.map {
                if !(p >= 1.0 && p.is_finite()) {
                    return Err(Error::Config(format!("power substitution exponent {p} < 1")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
    pub subdivisions: usize,
}

/// Per-axis change of variables from the unit interval onto `[lo, hi]`.
#[derive(Clone, Copy)]
struct AxisMap {
    lo: f64,
    width: f64,
    lower: Option<EdgeMap>,
    upper: Option<EdgeMap>,
}

impl AxisMap {
    /// `(u, du/dv)` for `v ∈ [0, 1]`.
    fn eval(&self, v: f64) -> (f64, f64) {
        let (s, ds) = match (self.lower, self.upper) {
            (None, None) => (v, 1.0),
            (Some(m), None) => m.eval(v),
            (None, Some(m)) => {
                let (g, dg) = m.eval(1.0 - v);
                (1.0 - g, dg)
            }
            (Some(ml), Some(mu)) => {
                // ψ(v) = φ(v) / (φ(v) + φ̃(1−v)) keeps both endpoint behaviours
                let (a, da) = ml.eval(v);
                let (b, db) = mu.eval(1.0 - v);
                let sum = a + b;
                if sum == 0.0 {
                    (0.5, 0.0)
                } else {
                    (a / sum, (da * b + a * db) / (sum * sum))
                }
            }
        };
        (self.lo + self.width * s, self.width * ds)
    }
}

struct Subregion {
    center: [f64; 3],
    half: [f64; 3],
    value: f64,
    error: f64,
    split_axis: usize,
}

impl PartialEq for Subregion {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}

impl Eq for Subregion {}

impl PartialOrd for Subregion {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Subregion {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Integrates `f` over the box `[lower, upper]` (1 to 3 dimensions) by
/// global adaptive bisection of the cell with the largest error estimate.
///
/// Stops when the summed error estimate is at most
/// `max(abs_tol, rel_tol·|value|)`; returns [`Error::BudgetExhausted`]
/// after `max_subdivisions` bisections.
pub fn integrate_adaptive<F>(f: F, lower: &[f64], upper: &[f64], spec: &QuadSpec) -> Result<QuadResult>
where
    F: Fn(&[f64]) -> f64,
{
    let dim = lower.len();
    if dim == 0 || dim > 3 || upper.len() != dim {
        return domain(format!("box must have 1 to 3 matching bounds, got {dim}"));
    }
    for (l, u) in lower.iter().zip(upper) {
        if !(l.is_finite() && u.is_finite() && l < u) {
            return domain(format!("invalid integration bounds [{l}, {u}]"));
        }
    }
    spec.validate(dim)?;

    let maps: Vec<AxisMap> = (0..dim)
        .map(|i| {
            let edge = |side| {
                spec.singular_edges
                    .iter()
                    .find(|e| e.axis == i && e.side == side)
                    .map(|e| e.map)
            };
            AxisMap {
                lo: lower[i],
                width: upper[i] - lower[i],
                lower: edge(Side::Lower),
                upper: edge(Side::Upper),
            }
        })
        .collect();

    let mut u = [0.0; 3];
    let bad = std::cell::Cell::new(false);
    let mut mapped = |v: &[f64]| {
        let mut jac = 1.0;
        for i in 0..dim {
            let (ui, di) = maps[i].eval(v[i]);
            u[i] = ui;
            jac *= di;
        }
        if jac == 0.0 {
            return 0.0;
        }
        let y = f(&u[..dim]) * jac;
        if !y.is_finite() {
            bad.set(true);
            return 0.0;
        }
        y
    };

    let mut evaluations = 0;
    let mut estimate = |center: [f64; 3], half: [f64; 3], g: &mut dyn FnMut(&[f64]) -> f64| {
        let est = if dim == 1 {
            rules::gauss_kronrod(g, center[0], half[0])
        } else {
            rules::genz_malik(g, &center[..dim], &half[..dim])
        };
        evaluations += est.evaluations;
        Subregion {
            center,
            half,
            value: est.value,
            error: est.error,
            split_axis: est.split_axis,
        }
    };

    let root = estimate([0.5; 3], [0.5; 3], &mut mapped);
    let (mut total, mut total_err) = (root.value, root.error);
    let mut heap = BinaryHeap::new();
    heap.push(root);
    let mut subdivisions = 0;

    loop {
        if bad.get() {
            return domain("integrand is not finite inside the box");
        }
        if total_err <= spec.abs_tol.max(spec.rel_tol * total.abs()) {
            break;
        }
        if subdivisions >= spec.max_subdivisions {
            let (value, error) = resum(&heap);
            return Err(Error::BudgetExhausted {
                subdivisions,
                value,
                error,
            });
        }
        let cell = heap.pop().expect("heap is never empty");
        let axis = cell.split_axis;
        let mut half = cell.half;
        half[axis] *= 0.5;
        let mut left = cell.center;
        left[axis] -= half[axis];
        let mut right = cell.center;
        right[axis] += half[axis];
        let a = estimate(left, half, &mut mapped);
        let b = estimate(right, half, &mut mapped);
        total += a.value + b.value - cell.value;
        total_err += a.error + b.error - cell.error;
        heap.push(a);
        heap.push(b);
        subdivisions += 1;
        if subdivisions % 4096 == 0 {
            (total, total_err) = resum(&heap);
        }
    }

    let (value, error) = resum(&heap);
    Ok(QuadResult {
        value,
        error,
        evaluations,
        subdivisions,
    })
}

/// Compensated sums of cell values and errors.
fn resum(heap: &BinaryHeap<Subregion>) -> (f64, f64) {
    let mut cells: Vec<&Subregion> = heap.iter().collect();
    cells.sort_by(|x, y| {
        x.center
            .iter()
            .zip(&y.center)
            .map(|(a, b)| a.total_cmp(b))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    });
    let value = neumaier(cells.iter().map(|c| c.value));
    let error = neumaier(cells.iter().map(|c| c.error));
    (value, error)
}

/// Neumaier-compensated sum.
pub(crate) fn neumaier<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// One-dimensional convenience wrapper around [`integrate_adaptive`].
pub fn integrate_1d<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, spec: &QuadSpec) -> Result<QuadResult> {
    integrate_adaptive(|x: &[f64]| f(x[0]), &[a], &[b], spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_on_cube() {
        let r = integrate_adaptive(|_| 1.0, &[0.0; 3], &[1.0; 3], &QuadSpec::default()).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn inverse_sqrt_with_flagged_edge() {
        for map in [EdgeMap::Power(2.0), EdgeMap::Power(3.0), EdgeMap::Log] {
            let spec = QuadSpec::with_tolerances(1e-12, 1e-15).with_edge(SingularEdge::lower(0, map));
            let r = integrate_1d(|x| x.powf(-0.5), 0.0, 1.0, &spec).unwrap();
            assert!((r.value - 2.0).abs() < 1e-10, "{map:?}: {}", r.value);
        }
    }

    #[test]
    fn upper_and_two_sided_edges() {
        let spec = QuadSpec::default().with_edge(SingularEdge::upper(0, EdgeMap::Power(2.0)));
        let r = integrate_1d(|x| (1.0 - x).powf(-0.5), 0.0, 1.0, &spec).unwrap();
        assert!((r.value - 2.0).abs() < 1e-10);
        let spec = QuadSpec::default()
            .with_edge(SingularEdge::lower(0, EdgeMap::Power(2.0)))
            .with_edge(SingularEdge::upper(0, EdgeMap::Power(2.0)));
        // ∫ (x(1−x))^{-1/2} = π
        let r = integrate_1d(|x| (x * (1.0 - x)).powf(-0.5), 0.0, 1.0, &spec).unwrap();
        assert!((r.value - std::f64::consts::PI).abs() < 1e-9, "{}", r.value);
    }

    #[test]
    fn smooth_2d_and_3d() {
        let spec = QuadSpec::default();
        let r = integrate_adaptive(|x| (x[0] + x[1]).exp(), &[0.0, 0.0], &[1.0, 2.0], &spec).unwrap();
        let e = std::f64::consts::E;
        let exact = (e - 1.0) * (e * e - 1.0);
        assert!(((r.value - exact) / exact).abs() < 1e-8);
        let r = integrate_adaptive(
            |x| 1.0 / (1.0 + x[0] * x[1] * x[2]),
            &[0.0; 3],
            &[1.0; 3],
            &spec,
        )
        .unwrap();
        // Σ (−1)ⁿ/(n+1)³ = 3ζ(3)/4
        assert!((r.value - 0.901_542_677_369_696).abs() < 1e-8, "{}", r.value);
    }

    #[test]
    fn budget_is_enforced() {
        let spec = QuadSpec {
            max_subdivisions: 3,
            ..QuadSpec::with_tolerances(1e-14, 1e-300)
        };
        let err = integrate_1d(|x| x.abs().sqrt(), -1.0, 1.0, &spec).unwrap_err();
        assert!(matches!(err, Error::BudgetExhausted { subdivisions: 3, .. }));
    }

    #[test]
    fn rejects_bad_boxes() {
        let spec = QuadSpec::default();
        assert!(integrate_adaptive(|_| 1.0, &[0.0; 4], &[1.0; 4], &spec).is_err());
        assert!(integrate_adaptive(|_| 1.0, &[1.0], &[0.0], &spec).is_err());
        assert!(integrate_1d(|x| 1.0 / x, -1.0, 1.0, &spec).is_err());
    }
}
