//! Finite-sample estimates of inequality left-hand sides.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::states::PhotocountDistribution;
use crate::tight::TestFunction;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmpiricalDist {
    pub counts: Vec<u64>,
    pub n_samples: u64,
    pub seed: u64,
}

impl EmpiricalDist {
    pub fn frequencies(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64 / self.n_samples as f64).collect()
    }
}

/// Multinomial draw of `n_samples` events, as a chain of conditional binomials.
pub fn sample_counts(p: &PhotocountDistribution, n_samples: u64, seed: u64) -> Result<EmpiricalDist> {
    if n_samples == 0 {
        return Err(Error::Usage("n_samples must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut remaining = n_samples;
    let mut mass = 1.0;
    let k = p.probs.len();
    let mut counts = vec![0u64; k];
    for (i, &pi) in p.probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if i + 1 == k {
            counts[i] = remaining;
            break;
        }
        let q = if mass > 0.0 { (pi / mass).clamp(0.0, 1.0) } else { 0.0 };
        let c = Binomial::new(remaining, q)
            .map_err(|e| Error::Domain(format!("binomial parameters: {e}")))?
            .sample(&mut rng);
        counts[i] = c;
        remaining -= c;
        mass -= pi;
    }
    Ok(EmpiricalDist {
        counts,
        n_samples,
        seed,
    })
}

/// Plug-in estimate of `P . lambda - rhs` with its delta-method standard error.
///
/// The right-hand side is analytic and treated as exact; the last outcome
/// carries weight zero since `lambda` acts on the independent components.
pub fn estimate_margin(emp: &EmpiricalDist, tf: &TestFunction) -> Result<(f64, f64)> {
    let k = emp.counts.len();
    if tf.lambda.dim() + 1 != k {
        return Err(Error::Usage(format!(
            "test function has dimension {}, data has {k} outcomes",
            tf.lambda.dim()
        )));
    }
    let f = emp.frequencies();
    let w = |i: usize| if i + 1 < k { tf.lambda[i] } else { 0.0 };
    let mean: f64 = (0..k).map(|i| f[i] * w(i)).sum();
    let second: f64 = (0..k).map(|i| f[i] * w(i) * w(i)).sum();
    let var = (second - mean * mean).max(0.0) / emp.n_samples as f64;
    Ok((mean - tf.rhs, var.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detectors::DetectorModel;
    use crate::geometry::VectorN;

    fn tf(lambda: Vec<f64>, rhs: f64) -> TestFunction {
        TestFunction {
            lambda: VectorN::new(lambda).unwrap(),
            nodes: vec![],
            tau: None,
            detector: DetectorModel::click(2).unwrap(),
            sign: 1,
            rhs,
        }
    }

    #[test]
    fn point_mass_and_determinism() {
        let p = PhotocountDistribution::new(vec![1.0, 0.0, 0.0]).unwrap();
        let e = sample_counts(&p, 1000, 3).unwrap();
        assert_eq!(e.counts, vec![1000, 0, 0]);
        let p = PhotocountDistribution::new(vec![0.2, 0.5, 0.3]).unwrap();
        assert_eq!(sample_counts(&p, 5000, 11).unwrap(), sample_counts(&p, 5000, 11).unwrap());
        assert_ne!(sample_counts(&p, 5000, 11).unwrap(), sample_counts(&p, 5000, 12).unwrap());
        assert!(sample_counts(&p, 0, 1).is_err());
    }

    #[test]
    fn uniform_counts_within_five_sigma() {
        let p = PhotocountDistribution::new(vec![1.0 / 3.0; 3]).unwrap();
        let n = 100_000u64;
        let e = sample_counts(&p, n, 42).unwrap();
        let sigma = (n as f64 * (1.0 / 3.0) * (2.0 / 3.0)).sqrt();
        for &c in &e.counts {
            assert!((c as f64 - n as f64 / 3.0).abs() < 5.0 * sigma);
        }
        assert_eq!(e.counts.iter().sum::<u64>(), n);
    }

    #[test]
    fn zero_lambda_gives_zero() {
        let p = PhotocountDistribution::new(vec![0.2, 0.5, 0.3]).unwrap();
        let e = sample_counts(&p, 1000, 1).unwrap();
        assert_eq!(estimate_margin(&e, &tf(vec![0.0, 0.0], 0.0)).unwrap(), (0.0, 0.0));
        assert!(estimate_margin(&e, &tf(vec![0.0], 0.0)).is_err());
    }

    #[test]
    fn large_sample_limit() {
        let p = PhotocountDistribution::new(vec![0.2, 0.5, 0.3]).unwrap();
        let t = tf(vec![0.7, -1.3], 0.1);
        let exact = t.margin(p.independent());
        let e = sample_counts(&p, 10_000_000, 5).unwrap();
        let (m, s) = estimate_margin(&e, &t).unwrap();
        assert!((m - exact).abs() < 4.0 * s, "{m} vs {exact} (sigma {s})");
        // analytic standard error of the linear statistic
        let mean: f64 = 0.2 * 0.7 - 0.5 * 1.3;
        let var = 0.2 * 0.49 + 0.5 * 1.69 - mean * mean;
        assert!((s - (var / 1e7).sqrt()).abs() < 1e-3 * s);
    }
}
