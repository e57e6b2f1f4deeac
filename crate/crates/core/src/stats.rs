//! Sample summaries and Kolmogorov–Smirnov tests.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean and plug-in standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std_error: f64,
    pub count: u64,
}

impl Summary {
    /// Summarises `values` in order; the result is independent of how they were produced.
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::usage("a standard error needs at least two values"));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        Ok(Self { mean, std_error: (var / n).sqrt(), count: values.len() as u64 })
    }
}

/// Sample standard deviation with denominator `n - 1`; a single value gives 0.
pub fn sample_std_dev(values: &[f64]) -> Result<f64> {
    match values.len() {
        0 => Err(Error::usage("standard deviation of an empty sample")),
        1 => Ok(0.0),
        len => {
            let n = len as f64;
            let mean = values.iter().sum::<f64>() / n;
            let ss = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
            Ok((ss / (n - 1.0)).sqrt())
        }
    }
}

/// Welford accumulator for streaming mean and variance.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunningMoments {
    count: u64,
    mean: f64,
    m2: f64,
}

impl RunningMoments {
    pub fn push(&mut self, value: f64) {
        self.count += 1;
        let delta = value - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (value - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// Sample standard deviation (`n - 1` denominator); `None` below two values.
    pub fn std_dev(&self) -> Option<f64> {
        (self.count >= 2).then(|| (self.m2.max(0.0) / (self.count - 1) as f64).sqrt())
    }
}

/// Outcome of a Kolmogorov–Smirnov test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsTest {
    pub statistic: f64,
    /// Asymptotic p-value from the Kolmogorov distribution.
    pub p_value: f64,
    /// Rejection threshold for the statistic at level `alpha`.
    pub critical_value: f64,
    pub alpha: f64,
}

impl KsTest {
    pub fn passes(&self) -> bool {
        self.statistic <= self.critical_value
    }

    fn new(statistic: f64, effective_n: f64, alpha: f64) -> Self {
        let root = effective_n.sqrt();
        Self {
            statistic,
            p_value: kolmogorov_survival(root * statistic),
            critical_value: kolmogorov_quantile(alpha) / root,
            alpha,
        }
    }
}

/// `P(K > λ) = 2 Σ_{k≥1} (-1)^{k-1} exp(-2k²λ²)` for the Kolmogorov distribution.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = (-2.0 * k * k * lambda * lambda).exp();
        sum += if k as u64 % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Upper `alpha` quantile of the Kolmogorov distribution, `sqrt(-ln(alpha/2)/2)`.
pub fn kolmogorov_quantile(alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt()
}

fn sorted(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::usage("Kolmogorov-Smirnov test on an empty sample"));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::domain("Kolmogorov-Smirnov test on a sample containing NaN"));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Two-sample test that `a` and `b` come from the same continuous law.
pub fn ks_two_sample(a: &[f64], b: &[f64], alpha: f64) -> Result<KsTest> {
    let a = sorted(a)?;
    let b = sorted(b)?;
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let x = a[i].min(b[j]);
        while i < n && a[i] <= x {
            i += 1;
        }
        while j < m && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let effective = (n * m) as f64 / (n + m) as f64;
    Ok(KsTest::new(d, effective, alpha))
}

/// One-sample test of `sample` against the continuous CDF `cdf`.
pub fn ks_one_sample<F: Fn(f64) -> f64>(sample: &[f64], cdf: F, alpha: f64) -> Result<KsTest> {
    let v = sorted(sample)?;
    let n = v.len() as f64;
    let d = v.iter().enumerate().fold(0.0f64, |d, (i, &x)| {
        let f = cdf(x);
        d.max(f - i as f64 / n).max((i + 1) as f64 / n - f)
    });
    Ok(KsTest::new(d, n, alpha))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn summary_of_known_values() {
        let s = Summary::of(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(s.mean, 2.5);
        assert_abs_diff_eq!(s.std_error, (5.0f64 / 3.0 / 4.0).sqrt(), epsilon = 1e-15);
        assert!(Summary::of(&[1.0]).is_err());
    }

    #[test]
    fn std_dev_edge_cases() {
        assert!(sample_std_dev(&[]).is_err());
        assert_eq!(sample_std_dev(&[3.0]).unwrap(), 0.0);
        assert_eq!(sample_std_dev(&[2.0, 2.0, 2.0]).unwrap(), 0.0);
        assert_abs_diff_eq!(sample_std_dev(&[1.0, 3.0]).unwrap(), 2f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn running_moments_match_batch() {
        let xs = [0.3, -1.2, 4.0, 2.2, 0.0, 1.5];
        let mut m = RunningMoments::default();
        xs.iter().for_each(|&x| m.push(x));
        assert_abs_diff_eq!(m.std_dev().unwrap(), sample_std_dev(&xs).unwrap(), epsilon = 1e-14);
        assert_eq!(RunningMoments::default().std_dev(), None);
    }

    #[test]
    fn kolmogorov_distribution_reference_points() {
        // Standard table: P(K > 1.3581) = 0.05, P(K > 1.6276) = 0.01.
        assert_abs_diff_eq!(kolmogorov_survival(1.358_099), 0.05, epsilon = 1e-5);
        assert_abs_diff_eq!(kolmogorov_survival(1.627_624), 0.01, epsilon = 1e-5);
        assert_abs_diff_eq!(kolmogorov_quantile(0.01), 1.627_624, epsilon = 1e-5);
    }

    #[test]
    fn ks_statistics_by_hand() {
        let t = ks_two_sample(&[1.0, 2.0, 3.0], &[1.5, 2.5, 3.5], 0.01).unwrap();
        assert_abs_diff_eq!(t.statistic, 1.0 / 3.0, epsilon = 1e-15);
        let t = ks_two_sample(&[1.0, 2.0], &[3.0, 4.0], 0.01).unwrap();
        assert_eq!(t.statistic, 1.0);
        let t = ks_one_sample(&[0.25, 0.75], |x| x.clamp(0.0, 1.0), 0.01).unwrap();
        assert_abs_diff_eq!(t.statistic, 0.25, epsilon = 1e-15);
        assert!(ks_two_sample(&[], &[1.0], 0.01).is_err());
    }
}
