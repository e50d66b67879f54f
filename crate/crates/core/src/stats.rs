//! Compensated summation and Monte Carlo estimates.

/// Neumaier-compensated sum, evaluated in iteration order.
pub fn neumaier_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
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

/// Point estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateWithError {
    pub mean: f64,
    pub stderr: f64,
    pub trials: u64,
}

impl EstimateWithError {
    /// Bernoulli proportion `successes / trials`.
    pub fn from_counts(successes: u64, trials: u64) -> Self {
        assert!(trials > 0, "estimate needs at least one trial");
        let mean = successes as f64 / trials as f64;
        EstimateWithError {
            mean,
            stderr: (mean * (1.0 - mean) / trials as f64).sqrt(),
            trials,
        }
    }

    /// Sample mean and standard error of the mean.
    pub fn from_samples(samples: &[f64]) -> Self {
        assert!(!samples.is_empty(), "estimate needs at least one sample");
        let n = samples.len() as f64;
        let mean = neumaier_sum(samples.iter().copied()) / n;
        let var = if samples.len() > 1 {
            neumaier_sum(samples.iter().map(|x| (x - mean) * (x - mean))) / (n - 1.0)
        } else {
            0.0
        };
        EstimateWithError {
            mean,
            stderr: (var / n).sqrt(),
            trials: samples.len() as u64,
        }
    }

    /// Number of standard errors separating `value` from the estimate.
    pub fn z_score(&self, value: f64) -> f64 {
        let d = (self.mean - value).abs();
        if d == 0.0 {
            0.0
        } else {
            d / self.stderr
        }
    }
}

/// Standard error of a difference of two independent estimates.
pub fn joint_stderr(a: f64, b: f64) -> f64 {
    a.hypot(b)
}
