//! Small statistics toolkit: moments, batch means, bootstrap, weighted least
//! squares and the two-sample Kolmogorov-Smirnov statistic.

use rand::Rng;
use serde::{Deserialize, Serialize};

/// A point estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

impl Estimate {
    pub fn new(value: f64, se: f64) -> Self {
        Estimate { value, se }
    }

    pub fn exact(value: f64) -> Self {
        Estimate { value, se: 0.0 }
    }

    /// Whether `target` lies within `k` standard errors.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.se
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Mean of equal-size batch means with the batch-means standard error.
pub fn batch_means(batches: &[f64]) -> Estimate {
    Estimate::new(mean(batches), (variance(batches) / batches.len() as f64).sqrt())
}

/// Sample kurtosis `m4 / m2^2` (3 for a Gaussian).
pub fn kurtosis(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let n = xs.len() as f64;
    let m2 = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    m4 / (m2 * m2)
}

/// Bootstrap summary of a statistic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bootstrap {
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Nonparametric bootstrap of `stat` over `resamples` index resamples,
/// with a 95% percentile interval.
pub fn bootstrap<T, R, F>(data: &[T], resamples: usize, rng: &mut R, mut stat: F) -> Bootstrap
where
    T: Copy,
    R: Rng + ?Sized,
    F: FnMut(&[T]) -> f64,
{
    let n = data.len();
    let mut buf = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        buf.clear();
        buf.extend((0..n).map(|_| data[rng.random_range(0..n)]));
        values.push(stat(&buf));
    }
    let se = variance(&values).sqrt();
    values.sort_by(f64::total_cmp);
    let q = |p: f64| values[((p * (resamples - 1) as f64).round() as usize).min(resamples - 1)];
    Bootstrap {
        se,
        ci_low: q(0.025),
        ci_high: q(0.975),
    }
}

/// Weighted least squares fit of `y ~ a * u + b * w`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit2 {
    pub a: f64,
    pub b: f64,
    /// Covariance of `(a, b)` from the inverse normal matrix.
    pub cov: [[f64; 2]; 2],
}

impl LinearFit2 {
    pub fn a_se(&self) -> f64 {
        self.cov[0][0].sqrt()
    }

    pub fn b_se(&self) -> f64 {
        self.cov[1][1].sqrt()
    }

    pub fn predict(&self, u: f64, w: f64) -> f64 {
        self.a * u + self.b * w
    }
}

/// `weights` are inverse variances of `y`.
pub fn wls_fit2(u: &[f64], w: &[f64], y: &[f64], weights: &[f64]) -> LinearFit2 {
    let (mut suu, mut suw, mut sww, mut suy, mut swy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..y.len() {
        let k = weights[i];
        suu += k * u[i] * u[i];
        suw += k * u[i] * w[i];
        sww += k * w[i] * w[i];
        suy += k * u[i] * y[i];
        swy += k * w[i] * y[i];
    }
    let det = suu * sww - suw * suw;
    let inv = [[sww / det, -suw / det], [-suw / det, suu / det]];
    LinearFit2 {
        a: inv[0][0] * suy + inv[0][1] * swy,
        b: inv[1][0] * suy + inv[1][1] * swy,
        cov: inv,
    }
}

/// Two-sample Kolmogorov-Smirnov statistic `sup |F_a - F_b|`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic 1% critical value of the two-sample KS statistic.
pub fn ks_critical_1pct(na: usize, nb: usize) -> f64 {
    let (na, nb) = (na as f64, nb as f64);
    1.628 * ((na + nb) / (na * nb)).sqrt()
}
