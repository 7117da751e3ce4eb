use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Smallest sample accepted by [`normality_stats`].
pub const MIN_NORMALITY_SAMPLES: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalityStats {
    /// Kolmogorov–Smirnov distance to the normal law with the sample's own
    /// mean and standard deviation.
    pub ks_stat: f64,
    /// Asymptotic Kolmogorov p-value. Approximate, since both parameters
    /// were estimated from the same sample.
    pub ks_p: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
}

/// Sample mean and unbiased variance.
pub fn mean_var(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let ss: f64 = samples.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, if samples.len() > 1 { ss / (n - 1.0) } else { 0.0 })
}

/// Moment-ratio skewness `m₃/m₂^{3/2}` and excess kurtosis `m₄/m₂² − 3`
/// from central sample moments.
pub fn shape_moments(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for x in samples {
        let c = x - mean;
        let c2 = c * c;
        m2 += c2;
        m3 += c2 * c;
        m4 += c2 * c2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    if m2 == 0.0 {
        return (0.0, 0.0);
    }
    (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
}

/// KS distance between the sample and `N(mean, var)`.
pub fn ks_distance(samples: &[f64], mean: f64, var: f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let sd = var.sqrt();
    if !(sd > 0.0) {
        return 1.0;
    }
    let normal = Normal::new(mean, sd).expect("positive standard deviation");
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal.cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// `Q_KS(λ) = 2 Σ_{k≥1} (−1)^{k−1} e^{−2k²λ²}` at the small-sample corrected
/// `λ = (√n + 0.12 + 0.11/√n) D`.
pub fn kolmogorov_p(d: f64, n: usize) -> f64 {
    let rn = (n as f64).sqrt();
    let lambda = (rn + 0.12 + 0.11 / rn) * d;
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

pub fn normality_stats(samples: &[f64]) -> Result<NormalityStats> {
    if samples.len() < MIN_NORMALITY_SAMPLES {
        return Err(Error::InsufficientSamples {
            needed: MIN_NORMALITY_SAMPLES,
            got: samples.len(),
        });
    }
    let (mean, var) = mean_var(samples);
    let ks_stat = ks_distance(samples, mean, var);
    let (skewness, excess_kurtosis) = shape_moments(samples);
    Ok(NormalityStats {
        ks_stat,
        ks_p: kolmogorov_p(ks_stat, samples.len()),
        skewness,
        excess_kurtosis,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;
    use rand_distr::{Exp1, StandardNormal};

    #[test]
    fn normal_sample_passes_and_exponential_fails() {
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        let z: Vec<f64> = (0..2000).map(|_| rng.sample(StandardNormal)).collect();
        let s = normality_stats(&z).unwrap();
        assert!(s.ks_p > 0.01, "{s:?}");
        assert!(s.skewness.abs() < 0.2 && s.excess_kurtosis.abs() < 0.4);
        let e: Vec<f64> = (0..2000).map(|_| rng.sample(Exp1)).collect();
        let s = normality_stats(&e).unwrap();
        assert!(s.ks_p < 0.01, "{s:?}");
        assert!(s.skewness > 1.5);
    }

    #[test]
    fn too_few_samples() {
        assert!(matches!(
            normality_stats(&[1.0, 2.0, 3.0]),
            Err(Error::InsufficientSamples { needed: 8, got: 3 })
        ));
    }

    #[test]
    fn kolmogorov_tail_values() {
        // Q_KS(1.36) ≈ 0.049, Q_KS(1.63) ≈ 0.0098
        let n = 1_000_000;
        let scale = (n as f64).sqrt();
        assert!((kolmogorov_p(1.36 / scale, n) - 0.0494).abs() < 1e-3);
        assert!((kolmogorov_p(1.63 / scale, n) - 0.0098).abs() < 5e-4);
        assert_eq!(kolmogorov_p(0.0, 100), 1.0);
    }

    #[test]
    fn moments_of_symmetric_pair() {
        let (mean, var) = mean_var(&[-1.0, 1.0]);
        assert_eq!((mean, var), (0.0, 2.0));
        let (s, k) = shape_moments(&[-1.0, 1.0]);
        assert_eq!(s, 0.0);
        assert!((k + 2.0).abs() < 1e-15);
    }
}
