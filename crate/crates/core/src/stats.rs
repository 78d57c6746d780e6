//! Monte Carlo summaries and the few hypothesis tests the checks rely on.

use statrs::distribution::{Binomial, DiscreteCDF};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// A Monte Carlo mean with a 95% confidence interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Plug-in standard error of `value`.
    pub std_error: f64,
    pub samples: u64,
}

impl Estimate {
    pub fn half_width(&self) -> f64 {
        0.5 * (self.ci_high - self.ci_low)
    }

    /// Wilson score interval for `successes` out of `samples` Bernoulli trials.
    pub fn wilson(successes: u64, samples: u64) -> Self {
        assert!(samples > 0 && successes <= samples);
        let n = samples as f64;
        let p = successes as f64 / n;
        let z2 = Z95 * Z95;
        let denom = 1.0 + z2 / n;
        let center = (p + z2 / (2.0 * n)) / denom;
        let spread = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
        Self {
            value: p,
            ci_low: (center - spread).max(0.0),
            ci_high: (center + spread).min(1.0),
            std_error: (p * (1.0 - p) / n).sqrt(),
            samples,
        }
    }

    /// Normal-approximation interval from a sum and a sum of squares.
    pub fn from_moments(sum: f64, sum_sq: f64, samples: u64) -> Self {
        assert!(samples > 0);
        let n = samples as f64;
        let mean = sum / n;
        let var = if samples > 1 {
            ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
        } else {
            0.0
        };
        let se = (var / n).sqrt();
        Self {
            value: mean,
            ci_low: mean - Z95 * se,
            ci_high: mean + Z95 * se,
            std_error: se,
            samples,
        }
    }

    /// Whether `target` lies within `k` standard errors. A zero standard
    /// error falls back to the binomial floor `sqrt(q (1 - q) / n)` at the
    /// target so that degenerate samples are not judged infinitely precise.
    pub fn agrees_with(&self, target: f64, k: f64) -> bool {
        let floor = (target * (1.0 - target) / self.samples as f64).abs().sqrt();
        (self.value - target).abs() <= k * self.std_error.max(floor)
    }
}

/// `P(X >= observed)` for `X ~ Binomial(trials, p)`.
pub fn binomial_upper_tail(observed: u64, trials: u64, p: f64) -> f64 {
    if observed == 0 {
        return 1.0;
    }
    if trials == 0 {
        return 0.0;
    }
    let dist = Binomial::new(p.clamp(0.0, 1.0), trials).expect("valid binomial parameters");
    dist.sf(observed - 1)
}

/// Pearson correlation of two equally long samples; zero-variance inputs
/// yield 0.
pub fn correlation(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn wilson_contains_point() {
        let e = Estimate::wilson(6321, 10_000);
        assert!(e.ci_low < 0.6321 && 0.6321 < e.ci_high);
        assert_abs_diff_eq!(e.half_width(), Z95 * e.std_error, epsilon = 2e-4);
        let edge = Estimate::wilson(0, 100);
        assert!(edge.ci_low < 1e-12);
        assert!(edge.ci_high > 0.0);
    }

    #[test]
    fn moments_of_constant_sample() {
        let e = Estimate::from_moments(50.0, 50.0, 50);
        assert_eq!(e.value, 1.0);
        assert_eq!(e.std_error, 0.0);
    }

    #[test]
    fn binomial_tail() {
        assert_eq!(binomial_upper_tail(0, 10, 0.3), 1.0);
        assert_abs_diff_eq!(binomial_upper_tail(10, 10, 0.5), 0.5f64.powi(10), epsilon = 1e-12);
        assert_abs_diff_eq!(binomial_upper_tail(1, 3, 0.5), 0.875, epsilon = 1e-12);
    }

    #[test]
    fn correlation_extremes() {
        let xs = [1.0, -1.0, 1.0, 1.0, -1.0];
        assert_abs_diff_eq!(correlation(&xs, &xs), 1.0, epsilon = 1e-12);
        let neg: Vec<f64> = xs.iter().map(|x| -x).collect();
        assert_abs_diff_eq!(correlation(&xs, &neg), -1.0, epsilon = 1e-12);
        assert_eq!(correlation(&[1.0, 1.0], &[1.0, -1.0]), 0.0);
    }
}
