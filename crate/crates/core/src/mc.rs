//! Monte Carlo plumbing: seeded substreams, estimates with standard errors,
//! random directions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self { value, stderr: 0.0 }
    }

    /// Whether `other` lies within `k` combined standard errors of `self`.
    pub fn agrees_with(&self, other: &Estimate, k: f64) -> bool {
        let se = (self.stderr.powi(2) + other.stderr.powi(2)).sqrt();
        (self.value - other.value).abs() <= k * se
    }
}

/// Deterministic generator for substream `stream` of master seed `seed`.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniformly distributed unit vector in `R^n`.
pub fn random_direction<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Mean and standard error of the mean.
pub fn mean_and_stderr(values: &[f64]) -> Estimate {
    let n = values.len() as f64;
    if values.is_empty() {
        return Estimate::exact(0.0);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return Estimate::exact(mean);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Estimate {
        value: mean,
        stderr: (var / n).sqrt(),
    }
}

/// Ratio estimator `Σ num / Σ den` with a delta-method standard error.
pub fn ratio_estimate(num: &[f64], den: &[f64]) -> Estimate {
    let n = num.len() as f64;
    let sn: f64 = num.iter().sum();
    let sd: f64 = den.iter().sum();
    if sd == 0.0 {
        return Estimate::exact(0.0);
    }
    let r = sn / sd;
    let resid: f64 = num
        .iter()
        .zip(den)
        .map(|(a, b)| (a - r * b).powi(2))
        .sum();
    let mean_den = sd / n;
    let se = (resid / (n * (n - 1.0).max(1.0))).sqrt() / mean_den;
    Estimate { value: r, stderr: se }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn substreams_are_deterministic_and_distinct() {
        let a: u64 = substream(7, 1).gen();
        let b: u64 = substream(7, 1).gen();
        let c: u64 = substream(7, 2).gen();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn directions_are_unit() {
        let mut rng = substream(1, 0);
        for n in 1..6 {
            let d = random_direction(n, &mut rng);
            let norm: f64 = d.iter().map(|x| x * x).sum();
            assert!((norm - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn ratio_of_proportional_samples_is_exact() {
        let den = [1.0, 2.0, 3.0, 4.0];
        let num: Vec<f64> = den.iter().map(|d| 0.25 * d).collect();
        let e = ratio_estimate(&num, &den);
        assert!((e.value - 0.25).abs() < 1e-15);
        assert!(e.stderr < 1e-15);
    }
}
