//! Constants of the self-intersection asymptotics: mean free flight, the
//! diffusion matrix, `beta`, `J`, `c` and `c'`, plus the local limit check.

pub mod quadrature;
pub mod special;
pub mod sums;

pub use special::{compute_j, dilog_inverse_integral, dilog_real, j_integrand};
pub use sums::{discrete_sum_a20, discrete_sum_a20_exact, discrete_sum_j, discrete_sum_j_exact};

use crate::billiard::{sample_mu_bar, BilliardTable};
use crate::error::{Error, Result};
use crate::exec::{map_range, Execution};
use crate::rng::{self, Purpose};
use crate::stats::{self, batch_means, Estimate};
use crate::trajectory::Walker;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Resamples used for bootstrap standard errors of the diffusion matrix.
pub const SIGMA_BOOTSTRAP: usize = 200;

/// Monte Carlo mean free flight: `replicas` orbits of `n` flights from
/// invariant-measure starts, each orbit one batch.
pub fn estimate_mean_tau(
    table: &BilliardTable,
    replicas: u64,
    n: u64,
    seed: u64,
    mode: Execution,
) -> Result<Estimate> {
    if replicas < 2 || n == 0 {
        return Err(Error::InvalidParam("mean tau needs replicas >= 2 and n >= 1".into()));
    }
    let batches = map_range(0..replicas, mode, |rep| -> Result<f64> {
        let mut rng = rng::stream(seed, Purpose::MeanTau, rep);
        let start = sample_mu_bar(table, &mut rng);
        let mut walker = Walker::new(table, &start);
        let mut sum = 0.0;
        for _ in 0..n {
            sum += walker.advance()?.length;
        }
        Ok(sum / n as f64)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(batch_means(&batches))
}

/// Empirical covariance of `S_n / sqrt(n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaEstimate {
    pub matrix: [[f64; 2]; 2],
    pub n_used: u64,
    pub replicas: u64,
    pub standard_errors: [[f64; 2]; 2],
    /// Bootstrap standard error of the determinant.
    pub det_se: f64,
}

fn covariance(samples: &[[f64; 2]]) -> [[f64; 2]; 2] {
    let m = samples.len() as f64;
    let (mut mx, mut my) = (0.0, 0.0);
    for s in samples {
        mx += s[0];
        my += s[1];
    }
    mx /= m;
    my /= m;
    let (mut xx, mut xy, mut yy) = (0.0, 0.0, 0.0);
    for s in samples {
        let (dx, dy) = (s[0] - mx, s[1] - my);
        xx += dx * dx;
        xy += dx * dy;
        yy += dy * dy;
    }
    let k = 1.0 / (m - 1.0);
    [[xx * k, xy * k], [xy * k, yy * k]]
}

fn det2(m: &[[f64; 2]; 2]) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

impl SigmaEstimate {
    /// Build from scaled displacements `S_n / sqrt(n)`.
    pub fn from_samples(samples: &[[f64; 2]], n_used: u64, seed: u64) -> Result<Self> {
        if samples.len() < 3 {
            return Err(Error::InvalidParam("need at least 3 replicas".into()));
        }
        let matrix = covariance(samples);
        let mut rng = rng::stream(seed, Purpose::Bootstrap, n_used);
        let mut boots = Vec::with_capacity(SIGMA_BOOTSTRAP);
        let mut buf = Vec::with_capacity(samples.len());
        use rand::Rng;
        for _ in 0..SIGMA_BOOTSTRAP {
            buf.clear();
            buf.extend((0..samples.len()).map(|_| samples[rng.random_range(0..samples.len())]));
            boots.push(covariance(&buf));
        }
        let se = |f: &dyn Fn(&[[f64; 2]; 2]) -> f64| {
            let vals: Vec<f64> = boots.iter().map(f).collect();
            stats::variance(&vals).sqrt()
        };
        let standard_errors = [
            [se(&|m| m[0][0]), se(&|m| m[0][1])],
            [se(&|m| m[1][0]), se(&|m| m[1][1])],
        ];
        let det_se = se(&det2);
        let est = SigmaEstimate {
            matrix,
            n_used,
            replicas: samples.len() as u64,
            standard_errors,
            det_se,
        };
        if !est.positive_definite() {
            return Err(Error::DegenerateCovariance(matrix));
        }
        Ok(est)
    }

    pub fn det(&self) -> f64 {
        det2(&self.matrix)
    }

    pub fn eigenvalues(&self) -> [f64; 2] {
        let m = &self.matrix;
        let tr = m[0][0] + m[1][1];
        let disc = ((m[0][0] - m[1][1]).powi(2) + 4.0 * m[0][1] * m[1][0]).sqrt();
        [(tr - disc) / 2.0, (tr + disc) / 2.0]
    }

    pub fn positive_definite(&self) -> bool {
        let e = self.eigenvalues();
        e[0] > 0.0 && e[1] > 0.0 && self.matrix[0][1] == self.matrix[1][0]
    }

    pub fn inverse(&self) -> [[f64; 2]; 2] {
        let d = self.det();
        let m = &self.matrix;
        [[m[1][1] / d, -m[0][1] / d], [-m[1][0] / d, m[0][0] / d]]
    }

    /// `beta = 1 / (2 pi sqrt(det))`.
    pub fn beta(&self) -> f64 {
        1.0 / (2.0 * PI * self.det().sqrt())
    }
}

/// Final cell shifts `S_n` of `replicas` invariant-measure orbits.
pub fn sample_shifts(
    table: &BilliardTable,
    replicas: u64,
    n: u64,
    seed: u64,
    purpose: Purpose,
    mode: Execution,
) -> Result<Vec<[i64; 2]>> {
    map_range(0..replicas, mode, |rep| -> Result<[i64; 2]> {
        let mut rng = rng::stream(seed, purpose, rep);
        let start = sample_mu_bar(table, &mut rng);
        let mut walker = Walker::new(table, &start);
        for _ in 0..n {
            walker.advance()?;
        }
        Ok(walker.cell())
    })
    .into_iter()
    .collect()
}

/// Diffusion matrix estimate from `S_n / sqrt(n)` over `replicas` orbits.
pub fn estimate_sigma2(
    table: &BilliardTable,
    replicas: u64,
    n: u64,
    seed: u64,
    mode: Execution,
) -> Result<SigmaEstimate> {
    if n < 100 {
        return Err(Error::InvalidParam(format!("sigma2 needs n >= 100, got {n}")));
    }
    // Distinct n draw distinct streams so estimates at two n are independent.
    let shifts = sample_shifts(table, replicas, n, seed ^ n.rotate_left(17), Purpose::Sigma2, mode)?;
    let scale = 1.0 / (n as f64).sqrt();
    let samples: Vec<[f64; 2]> = shifts
        .iter()
        .map(|s| [s[0] as f64 * scale, s[1] as f64 * scale])
        .collect();
    SigmaEstimate::from_samples(&samples, n, seed)
}

/// `c = 2 E[tau] / (pi sqrt(det Sigma^2) |dQ|)` with delta-method error.
pub fn compute_c(mean_tau: Estimate, sigma2: &SigmaEstimate, perimeter: f64) -> Estimate {
    assert!(perimeter > 0.0 && sigma2.positive_definite());
    compute_c_raw(mean_tau, sigma2.det(), sigma2.det_se, perimeter)
}

/// [`compute_c`] on a bare determinant.
pub fn compute_c_raw(mean_tau: Estimate, det: f64, det_se: f64, perimeter: f64) -> Estimate {
    let c = 2.0 * mean_tau.value / (PI * det.sqrt() * perimeter);
    let rel_tau = if mean_tau.value != 0.0 { mean_tau.se / mean_tau.value } else { 0.0 };
    let rel_det = 0.5 * det_se / det;
    Estimate::new(c, c * (rel_tau * rel_tau + rel_det * rel_det).sqrt())
}

/// `c' = c^2 (1 + 2J - pi^2/6)` and the bracket itself.
pub fn compute_c_prime(c: Estimate, j: Estimate) -> Result<(Estimate, f64)> {
    let bracket = 1.0 + 2.0 * j.value - PI * PI / 6.0;
    if bracket <= 0.0 {
        return Err(Error::NegativeBracket(bracket));
    }
    let value = c.value * c.value * bracket;
    let se = ((2.0 * c.value * bracket * c.se).powi(2) + (2.0 * c.value * c.value * j.se).powi(2)).sqrt();
    Ok((Estimate::new(value, se), bracket))
}

/// One lattice site of the local limit comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LltEntry {
    pub site: [i64; 2],
    pub hits: u64,
    pub probability: f64,
    pub probability_se: f64,
    pub prediction: f64,
    pub ratio: f64,
    pub ratio_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LltReport {
    pub n: u64,
    pub samples: u64,
    pub beta: f64,
    pub entries: Vec<LltEntry>,
}

/// Gaussian local limit prediction `beta exp(-<Sigma^-1 N, N>/2n) / n`.
pub fn llt_prediction(sigma2: &SigmaEstimate, n: u64, site: [i64; 2]) -> f64 {
    let inv = sigma2.inverse();
    let (x, y) = (site[0] as f64, site[1] as f64);
    let q = inv[0][0] * x * x + (inv[0][1] + inv[1][0]) * x * y + inv[1][1] * y * y;
    sigma2.beta() * (-q / (2.0 * n as f64)).exp() / n as f64
}

pub const LLT_SITES: [[i64; 2]; 4] = [[0, 0], [1, 0], [0, 1], [1, 1]];

/// Empirical `P(S_n = N)` against the Gaussian local limit prediction.
pub fn llt_check(
    table: &BilliardTable,
    n: u64,
    samples: u64,
    sigma2: &SigmaEstimate,
    seed: u64,
    mode: Execution,
) -> Result<LltReport> {
    if n < 100 {
        return Err(Error::InvalidParam(format!("llt needs n >= 100, got {n}")));
    }
    // Chunked so per-replica results stay small.
    const CHUNK: u64 = 4096;
    let chunks = samples.div_ceil(CHUNK);
    let counts = map_range(0..chunks, mode, |c| -> Result<[u64; 4]> {
        let mut hits = [0u64; 4];
        for rep in c * CHUNK..((c + 1) * CHUNK).min(samples) {
            let mut rng = rng::stream(seed, Purpose::Llt, rep);
            let start = sample_mu_bar(table, &mut rng);
            let mut walker = Walker::new(table, &start);
            for _ in 0..n {
                walker.advance()?;
            }
            let s = walker.cell();
            if let Some(i) = LLT_SITES.iter().position(|&site| site == s) {
                hits[i] += 1;
            }
        }
        Ok(hits)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mut hits = [0u64; 4];
    for c in counts {
        for i in 0..4 {
            hits[i] += c[i];
        }
    }
    let entries = LLT_SITES
        .iter()
        .zip(hits)
        .map(|(&site, h)| {
            let p = h as f64 / samples as f64;
            let p_se = (p * (1.0 - p) / samples as f64).sqrt();
            let prediction = llt_prediction(sigma2, n, site);
            LltEntry {
                site,
                hits: h,
                probability: p,
                probability_se: p_se,
                prediction,
                ratio: p / prediction,
                ratio_se: p_se / prediction,
            }
        })
        .collect();
    Ok(LltReport {
        n,
        samples,
        beta: sigma2.beta(),
        entries,
    })
}

/// Budgets for [`compute_constants`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantsConfig {
    pub seed: u64,
    pub tau_replicas: u64,
    pub tau_steps: u64,
    pub sigma_replicas: u64,
    pub sigma_steps: u64,
    pub j_tolerance: f64,
}

impl Default for ConstantsConfig {
    fn default() -> Self {
        ConstantsConfig {
            seed: 0x5eed,
            tau_replicas: 1000,
            tau_steps: 1000,
            sigma_replicas: 100_000,
            sigma_steps: 400,
            j_tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantsReport {
    pub mean_tau: Estimate,
    pub mean_free_path_identity: f64,
    pub sigma2: SigmaEstimate,
    pub beta: f64,
    pub j_value: Estimate,
    pub c: Estimate,
    pub c_prime: Estimate,
    pub bracket: f64,
    pub perimeter: f64,
    pub config: ConstantsConfig,
}

impl ConstantsReport {
    /// Leading coefficient of the continuous-time count, `c / E[tau]`.
    pub fn continuous_coefficient(&self) -> f64 {
        2.0 / (PI * self.sigma2.det().sqrt() * self.perimeter)
    }
}

pub fn compute_constants(table: &BilliardTable, cfg: &ConstantsConfig, mode: Execution) -> Result<ConstantsReport> {
    let mean_tau = estimate_mean_tau(table, cfg.tau_replicas, cfg.tau_steps, cfg.seed, mode)?;
    let sigma2 = estimate_sigma2(table, cfg.sigma_replicas, cfg.sigma_steps, cfg.seed, mode)?;
    let j_value = compute_j(cfg.j_tolerance)?;
    let perimeter = table.total_perimeter();
    let c = compute_c(mean_tau, &sigma2, perimeter);
    let (c_prime, bracket) = compute_c_prime(c, j_value)?;
    Ok(ConstantsReport {
        mean_tau,
        mean_free_path_identity: table.mean_free_path(),
        beta: sigma2.beta(),
        sigma2,
        j_value,
        c,
        c_prime,
        bracket,
        perimeter,
        config: cfg.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_sigma() -> SigmaEstimate {
        SigmaEstimate {
            matrix: [[1.0, 0.0], [0.0, 1.0]],
            n_used: 400,
            replicas: 10,
            standard_errors: [[0.0; 2]; 2],
            det_se: 0.0,
        }
    }

    #[test]
    fn c_by_hand() {
        let c = compute_c(Estimate::exact(0.25), &identity_sigma(), 4.0);
        assert!((c.value - 1.0 / (8.0 * PI)).abs() < 1e-15);
        // det of 4 Sigma^2 is 16 det, so c drops by 4; a factor 2 halves it.
        let mut s = identity_sigma();
        s.matrix = [[4.0, 0.0], [0.0, 4.0]];
        assert!((compute_c(Estimate::exact(0.25), &s, 4.0).value - 0.25 * c.value).abs() < 1e-15);
        s.matrix = [[2.0, 0.0], [0.0, 2.0]];
        assert!((compute_c(Estimate::exact(0.25), &s, 4.0).value - 0.5 * c.value).abs() < 1e-15);
    }

    #[test]
    fn c_prime_cancellation() {
        let (cp, bracket) = compute_c_prime(Estimate::exact(1.0), Estimate::exact(PI * PI / 12.0)).unwrap();
        assert!((bracket - 1.0).abs() < 1e-15);
        assert!((cp.value - 1.0).abs() < 1e-15);
        let (zero, _) = compute_c_prime(Estimate::exact(0.0), Estimate::exact(1.0)).unwrap();
        assert_eq!(zero.value, 0.0);
        assert!(matches!(
            compute_c_prime(Estimate::exact(1.0), Estimate::exact(0.1)),
            Err(Error::NegativeBracket(_))
        ));
    }

    #[test]
    fn llt_origin_prediction_is_beta_over_n() {
        let s = identity_sigma();
        assert_eq!(llt_prediction(&s, 200, [0, 0]), s.beta() / 200.0);
    }

    #[test]
    fn beta_identity() {
        let mut s = identity_sigma();
        s.matrix = [[0.3, 0.05], [0.05, 0.2]];
        assert!((s.beta() * 2.0 * PI * s.det().sqrt() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_covariance_rejected() {
        let samples: Vec<[f64; 2]> = (0..50).map(|i| [i as f64, 2.0 * i as f64]).collect();
        assert!(matches!(
            SigmaEstimate::from_samples(&samples, 100, 1),
            Err(Error::DegenerateCovariance(_))
        ));
    }
}
