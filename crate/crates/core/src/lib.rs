//! Numerical laboratory for the ε-regularized derivative of self-intersection
//! local time (DSLT) of d-dimensional fractional Brownian motion.
//!
//! The crate is organised bottom-up:
//!
//! * [`fbm`]: Hurst models, grids, the fBm covariance and exact path synthesis.
//! * [`mollifier`]: the Gaussian approximate identity and its Hermite-form derivatives.
//! * [`moments`]: closed-form second moments of pairs of increments and chaos coefficients.
//! * [`estimator`]: path functionals (DSLT, SLT, first-chaos projection) on sampled grids.
//! * [`quad`]: adaptive quadrature and the deterministic variance integrals.
//! * [`experiment`]: Monte Carlo ladders, normality statistics and result files.

pub mod error;
pub mod estimator;
pub mod experiment;
pub mod fbm;
pub mod moments;
pub mod mollifier;
pub mod quad;

pub use error::{Error, Result};
