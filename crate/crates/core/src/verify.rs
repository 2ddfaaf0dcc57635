//! The acceptance suite: thirteen numbered criteria run at a chosen scale,
//! each reduced to a pass/fail outcome with the measured quantities.
//!
//! `Scale::Full` uses the stated sample sizes. `Scale::Quick` shrinks the
//! Monte Carlo budgets but keeps every tolerance.

use crate::billiard::{billiard_step, sample_mu_bar, BilliardTable, PhasePoint, TableSpec};
use crate::campaign::{Campaign, CampaignConfig, CampaignResult};
use crate::constants::{
    compute_c, compute_c_prime, compute_j, dilog_inverse_integral, dilog_real, discrete_sum_a20,
    discrete_sum_a20_exact, discrete_sum_j, estimate_mean_tau, estimate_sigma2, llt_check, ConstantsConfig,
    ConstantsReport, SigmaEstimate,
};
use crate::error::{Error, Result};
use crate::exec::{map_range, with_threads, Execution};
use crate::geometry::{Segment, Vec2};
use crate::intersect::{count_brute, count_grid, report_brute, report_grid};
use crate::rng::{self, Purpose};
use crate::stats::{ks_critical_1pct, ks_two_sample, Estimate};
use crate::trajectory::generate;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    #[default]
    Quick,
    Full,
}

impl std::str::FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quick" => Ok(Scale::Quick),
            "full" => Ok(Scale::Full),
            _ => Err(Error::InvalidParam(format!("unknown scale {s:?}, expected quick or full"))),
        }
    }
}

/// Sample sizes for one scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Budgets {
    pub tau_replicas: u64,
    pub tau_steps: u64,
    pub sigma_replicas: u64,
    pub llt_samples: u64,
    pub expectation_grid: Vec<u64>,
    pub expectation_replicas: u64,
    pub variance_grid: Vec<u64>,
    pub variance_replicas: u64,
    pub almost_sure_n: u64,
    pub continuous_grid: Vec<f64>,
    pub continuous_replicas: u64,
    pub oracle_trajectories: u64,
    pub ks_samples: u64,
}

impl Budgets {
    pub fn for_scale(scale: Scale) -> Self {
        match scale {
            Scale::Full => Budgets {
                tau_replicas: 1000,
                tau_steps: 1000,
                sigma_replicas: 100_000,
                llt_samples: 10_000_000,
                expectation_grid: (12..=17).map(|k| 1 << k).collect(),
                expectation_replicas: 500,
                variance_grid: vec![2500, 5000, 10_000],
                variance_replicas: 10_000,
                almost_sure_n: 1 << 20,
                continuous_grid: (0..6).map(|k| 750.0 * f64::from(1 << k)).collect(),
                continuous_replicas: 500,
                oracle_trajectories: 200,
                ks_samples: 20_000,
            },
            Scale::Quick => Budgets {
                tau_replicas: 200,
                tau_steps: 1000,
                sigma_replicas: 10_000,
                llt_samples: 200_000,
                expectation_grid: (10..=14).map(|k| 1 << k).collect(),
                expectation_replicas: 100,
                variance_grid: vec![2500, 5000, 10_000],
                variance_replicas: 1000,
                almost_sure_n: 1 << 20,
                continuous_grid: (0..4).map(|k| 375.0 * f64::from(1 << k)).collect(),
                continuous_replicas: 100,
                oracle_trajectories: 20,
                ks_samples: 5000,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub scale: Scale,
    pub seed: u64,
    pub table: TableSpec,
    /// Criteria to run; empty means all.
    pub only: Vec<u32>,
    /// Test hook: multiply the estimated diffusion matrix by this factor
    /// before anything downstream uses it.
    pub corrupt_sigma2: Option<f64>,
}

impl VerifyOptions {
    pub fn new(scale: Scale, seed: u64) -> Self {
        VerifyOptions {
            scale,
            seed,
            table: TableSpec::reference(),
            only: Vec::new(),
            corrupt_sigma2: None,
        }
    }

    fn wants(&self, id: u32) -> bool {
        self.only.is_empty() || self.only.contains(&id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionOutcome {
    pub id: u32,
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub metrics: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub scale: Scale,
    pub seed: u64,
    pub table_fingerprint: String,
    pub criteria: Vec<CriterionOutcome>,
    pub all_passed: bool,
    pub first_failure: Option<u32>,
    pub constants: Option<ConstantsReport>,
}

impl VerifyReport {
    /// One line per criterion.
    pub fn table(&self) -> String {
        let mut out = String::new();
        for c in &self.criteria {
            let mark = if c.passed { "PASS" } else { "FAIL" };
            out.push_str(&format!("[{mark}] {:>2} {}: {}\n", c.id, c.name, c.detail));
        }
        out
    }

    /// `"criterion 6 (local limit theorem)"` for the first failure.
    pub fn first_failure_label(&self) -> Option<String> {
        let id = self.first_failure?;
        let c = self.criteria.iter().find(|c| c.id == id)?;
        Some(format!("criterion {id} ({})", c.name))
    }
}

pub const CRITERIA: [(u32, &str); 13] = [
    (1, "discrete sum A20"),
    (2, "J cross-validation"),
    (3, "dilogarithm identities"),
    (4, "mean free path"),
    (5, "diffusion matrix sanity"),
    (6, "local limit theorem"),
    (7, "expectation growth"),
    (8, "variance growth"),
    (9, "almost sure convergence"),
    (10, "continuous-time growth"),
    (11, "counter oracle equivalence"),
    (12, "dynamics invariants"),
    (13, "determinism and resume"),
];


struct Outcome {
    passed: bool,
    detail: String,
    metrics: BTreeMap<String, f64>,
}

impl Outcome {
    fn new(passed: bool, detail: String, metrics: &[(&str, f64)]) -> Self {
        Outcome {
            passed,
            detail,
            metrics: metrics.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        }
    }
}

/// Shared estimates that later criteria build on.
struct Shared {
    mean_tau: Option<Estimate>,
    sigma2: Option<SigmaEstimate>,
    j: Option<Estimate>,
}

/// Runs the suite, calling `progress` after each criterion.
pub struct Verifier {
    pub opts: VerifyOptions,
    pub budgets: Budgets,
    table: BilliardTable,
    mode: Execution,
    shared: Shared,
}

impl Verifier {
    pub fn new(opts: VerifyOptions) -> Result<Self> {
        let table = BilliardTable::from_spec(&opts.table, opts.seed)?;
        Ok(Verifier {
            budgets: Budgets::for_scale(opts.scale),
            opts,
            table,
            mode: Execution::default(),
            shared: Shared {
                mean_tau: None,
                sigma2: None,
                j: None,
            },
        })
    }

    pub fn run(mut self, mut progress: impl FnMut(&CriterionOutcome, f64)) -> Result<VerifyReport> {
        let mut criteria = Vec::new();
        for (id, name) in CRITERIA {
            if !self.opts.wants(id) {
                continue;
            }
            let started = Instant::now();
            let o = self.criterion(id)?;
            let outcome = CriterionOutcome {
                id,
                name: name.to_string(),
                passed: o.passed,
                detail: o.detail,
                metrics: o.metrics,
            };
            progress(&outcome, started.elapsed().as_secs_f64());
            criteria.push(outcome);
        }
        let first_failure = criteria.iter().find(|c| !c.passed).map(|c| c.id);
        let constants = self.constants_report().ok();
        Ok(VerifyReport {
            scale: self.opts.scale,
            seed: self.opts.seed,
            table_fingerprint: self.table.fingerprint(),
            all_passed: first_failure.is_none(),
            first_failure,
            criteria,
            constants,
        })
    }

    fn criterion(&mut self, id: u32) -> Result<Outcome> {
        match id {
            1 => Ok(self.c1_a20()),
            2 => self.c2_j(),
            3 => Ok(self.c3_dilog()),
            4 => self.c4_mean_tau(),
            5 => self.c5_sigma2(),
            6 => self.c6_llt(),
            7 => self.c7_expectation(),
            8 => self.c8_variance(),
            9 => self.c9_almost_sure(),
            10 => self.c10_continuous(),
            11 => self.c11_oracles(),
            12 => self.c12_invariants(),
            13 => self.c13_determinism(),
            _ => Err(Error::InvalidParam(format!("no criterion {id}"))),
        }
    }

    fn mean_tau(&mut self) -> Result<Estimate> {
        if let Some(m) = self.shared.mean_tau {
            return Ok(m);
        }
        let b = &self.budgets;
        let m = estimate_mean_tau(&self.table, b.tau_replicas, b.tau_steps, self.opts.seed, self.mode)?;
        self.shared.mean_tau = Some(m);
        Ok(m)
    }

    fn corrupt(&self, mut s: SigmaEstimate) -> SigmaEstimate {
        if let Some(f) = self.opts.corrupt_sigma2 {
            for row in s.matrix.iter_mut() {
                for v in row.iter_mut() {
                    *v *= f;
                }
            }
            s.det_se *= f * f;
        }
        s
    }

    fn sigma_at(&self, n: u64) -> Result<SigmaEstimate> {
        let s = estimate_sigma2(&self.table, self.budgets.sigma_replicas, n, self.opts.seed, self.mode)?;
        Ok(self.corrupt(s))
    }

    fn sigma2(&mut self) -> Result<SigmaEstimate> {
        if let Some(s) = &self.shared.sigma2 {
            return Ok(s.clone());
        }
        let s = self.sigma_at(400)?;
        self.shared.sigma2 = Some(s.clone());
        Ok(s)
    }

    fn j(&mut self) -> Result<Estimate> {
        if let Some(j) = self.shared.j {
            return Ok(j);
        }
        let j = compute_j(1e-5)?;
        self.shared.j = Some(j);
        Ok(j)
    }

    fn c_value(&mut self) -> Result<Estimate> {
        let m = self.mean_tau()?;
        let s = self.sigma2()?;
        Ok(compute_c(m, &s, self.table.total_perimeter()))
    }

    fn constants_report(&mut self) -> Result<ConstantsReport> {
        let (Some(mean_tau), Some(sigma2)) = (self.shared.mean_tau, self.shared.sigma2.clone()) else {
            return Err(Error::InvalidParam("constants not computed".into()));
        };
        let j_value = self.j()?;
        let perimeter = self.table.total_perimeter();
        let c = compute_c(mean_tau, &sigma2, perimeter);
        let (c_prime, bracket) = compute_c_prime(c, j_value)?;
        let b = &self.budgets;
        Ok(ConstantsReport {
            mean_tau,
            mean_free_path_identity: self.table.mean_free_path(),
            beta: sigma2.beta(),
            sigma2,
            j_value,
            c,
            c_prime,
            bracket,
            perimeter,
            config: ConstantsConfig {
                seed: self.opts.seed,
                tau_replicas: b.tau_replicas,
                tau_steps: b.tau_steps,
                sigma_replicas: b.sigma_replicas,
                sigma_steps: 400,
                j_tolerance: 1e-5,
            },
        })
    }

    fn c1_a20(&self) -> Outcome {
        let target = PI * PI / 12.0;
        let v = discrete_sum_a20(1500);
        let rel = (v - target).abs() / target;
        let mismatches: Vec<u64> = (10..=40).filter(|&n| discrete_sum_a20_exact(n) != naive_a20(n)).collect();
        Outcome::new(
            rel <= 0.05 && mismatches.is_empty(),
            format!(
                "A20(1500) = {v:.6}, rel. deviation {rel:.4} (tol 0.05); exact mismatches for n <= 40: {mismatches:?}"
            ),
            &[("a20_1500", v), ("relative_deviation", rel), ("mismatches", mismatches.len() as f64)],
        )
    }

    fn c2_j(&mut self) -> Result<Outcome> {
        let j = self.j()?;
        let d = discrete_sum_j(1500);
        let diff = (j.value - d).abs();
        Ok(Outcome::new(
            diff <= 0.01,
            format!("J = {:.8} (bound {:.1e}), discrete sum at 1500 = {d:.6}, |diff| = {diff:.4} (tol 0.01)", j.value, j.se),
            &[("j", j.value), ("j_bound", j.se), ("discrete_sum_j_1500", d), ("abs_diff", diff)],
        ))
    }

    fn c3_dilog(&self) -> Outcome {
        let li2 = dilog_real(2.0);
        let e1 = (li2 - PI * PI / 4.0).abs();
        let q = dilog_inverse_integral(1e-9);
        let e2 = (q.value - PI * PI / 6.0).abs();
        Outcome::new(
            e1 <= 1e-6 && e2 <= 1e-6,
            format!("|Li2(2) - pi^2/4| = {e1:.2e}, |integral - pi^2/6| = {e2:.2e} (tol 1e-6)"),
            &[("li2_2_error", e1), ("integral_error", e2)],
        )
    }

    fn c4_mean_tau(&mut self) -> Result<Outcome> {
        let m = self.mean_tau()?;
        let target = self.table.mean_free_path();
        let z = (m.value - target).abs() / m.se;
        Ok(Outcome::new(
            z <= 3.0,
            format!("E[tau] = {:.6} +- {:.6}, identity {target:.6}, |z| = {z:.2} (tol 3)", m.value, m.se),
            &[("mean_tau", m.value), ("se", m.se), ("identity", target), ("z", z)],
        ))
    }

    fn c5_sigma2(&mut self) -> Result<Outcome> {
        let s = self.sigma2()?;
        let s4 = self.sigma_at(1600)?;
        let pd = s.positive_definite() && s4.positive_definite();
        let off_z = s.matrix[0][1].abs() / s.standard_errors[0][1];
        let mut worst: f64 = 0.0;
        for i in 0..2 {
            for k in 0..2 {
                let se = s.standard_errors[i][k].hypot(s4.standard_errors[i][k]);
                worst = worst.max((s.matrix[i][k] - s4.matrix[i][k]).abs() / se);
            }
        }
        let m = &s.matrix;
        Ok(Outcome::new(
            pd && off_z <= 3.0 && worst <= 3.0,
            format!(
                "Sigma2(400) = [[{:.5}, {:.5}], [{:.5}, {:.5}]]; positive definite {pd}; off-diagonal |z| = {off_z:.2}; max |z| vs n=1600 = {worst:.2} (tol 3)",
                m[0][0], m[0][1], m[1][0], m[1][1]
            ),
            &[
                ("sigma11", m[0][0]),
                ("sigma12", m[0][1]),
                ("sigma22", m[1][1]),
                ("offdiag_z", off_z),
                ("stationarity_z", worst),
            ],
        ))
    }

    fn c6_llt(&mut self) -> Result<Outcome> {
        let s = self.sigma2()?;
        let r = llt_check(&self.table, 200, self.budgets.llt_samples, &s, self.opts.seed, self.mode)?;
        let e = &r.entries[0];
        let ratio = e.ratio;
        let (e10, e01) = (&r.entries[1], &r.entries[2]);
        Ok(Outcome::new(
            (0.9..=1.1).contains(&ratio),
            format!(
                "n P(S_200 = 0) / beta = {ratio:.4} +- {:.4} (band [0.9, 1.1]); ratios at (1,0), (0,1): {:.4}, {:.4}",
                e.ratio_se, e10.ratio, e01.ratio
            ),
            &[
                ("ratio_origin", ratio),
                ("ratio_origin_se", e.ratio_se),
                ("ratio_10", e10.ratio),
                ("ratio_01", e01.ratio),
                ("beta", r.beta),
            ],
        ))
    }

    fn campaign(&self, n_grid: Vec<u64>, replicas: u64) -> Result<Campaign> {
        let cfg = CampaignConfig::new(self.opts.table.clone(), n_grid, replicas, self.opts.seed);
        Ok(Campaign::with_table(cfg, self.table.clone())?.execution(self.mode))
    }

    fn c7_expectation(&mut self) -> Result<Outcome> {
        let c = self.c_value()?;
        let b = &self.budgets;
        let res = self.campaign(b.expectation_grid.clone(), b.expectation_replicas)?.run_expectation()?;
        let fit = res.fit.expect("grid has several points");
        let rel = (fit.c_hat - c.value).abs() / c.value;
        Ok(Outcome::new(
            rel <= 0.2,
            format!(
                "c_hat = {:.4} +- {:.4} (b_hat = {:.3}), c = {:.4} +- {:.4}, rel. deviation {rel:.3} (tol 0.2)",
                fit.c_hat, fit.c_se, fit.b_hat, c.value, c.se
            ),
            &[("c_hat", fit.c_hat), ("c_hat_se", fit.c_se), ("b_hat", fit.b_hat), ("c", c.value), ("relative_deviation", rel)],
        ))
    }

    fn c8_variance(&mut self) -> Result<Outcome> {
        self.c_value()?;
        let report = self.constants_report()?;
        let b = &self.budgets;
        let mut res: CampaignResult = self.campaign(b.variance_grid.clone(), b.variance_replicas)?.run_variance()?;
        res.attach_constants(report);
        let ratios = &res.variance_ratios;
        let last = ratios.last().expect("variance grid nonempty");
        let first = &ratios[0];
        let trend_ok = (last.ratio - 1.0).abs() <= (first.ratio - 1.0).abs();
        let listing: Vec<String> = ratios.iter().map(|r| format!("{}: {:.3}", r.n, r.ratio)).collect();
        Ok(Outcome::new(
            (0.5..=1.5).contains(&last.ratio),
            format!(
                "Var/(c' n^2) at n = {} is {:.3} +- {:.3} (band [0.5, 1.5]); trend {} ({})",
                last.n,
                last.ratio,
                last.ratio_se,
                if trend_ok { "toward 1" } else { "not toward 1" },
                listing.join(", ")
            ),
            &[("ratio", last.ratio), ("ratio_se", last.ratio_se), ("ratio_first", first.ratio)],
        ))
    }

    fn c9_almost_sure(&mut self) -> Result<Outcome> {
        let c = self.c_value()?;
        let n = self.budgets.almost_sure_n;
        let grid: Vec<u64> = (10..=63).map(|k| 1u64 << k).take_while(|&m| m <= n).collect();
        let mut finals = [0.0; 2];
        for (i, seed) in [self.opts.seed, self.opts.seed ^ 0x9e37_79b9_7f4a_7c15].into_iter().enumerate() {
            let cfg = CampaignConfig::new(self.opts.table.clone(), grid.clone(), 2, seed);
            let res = Campaign::with_table(cfg, self.table.clone())?.run_almost_sure()?;
            finals[i] = res.series.last().unwrap().ratio;
        }
        let rel = (finals[0] - c.value).abs() / c.value;
        let agree = (finals[0] - finals[1]).abs() / (0.5 * (finals[0] + finals[1]));
        Ok(Outcome::new(
            rel <= 0.25 && agree <= 0.25,
            format!(
                "V_n/(n ln n) at n = {n}: {:.4} and {:.4} (second seed); c = {:.4}; rel. deviation {rel:.3}, seed disagreement {agree:.3} (tol 0.25)",
                finals[0], finals[1], c.value
            ),
            &[("ratio_seed_a", finals[0]), ("ratio_seed_b", finals[1]), ("c", c.value), ("relative_deviation", rel), ("seed_disagreement", agree)],
        ))
    }

    fn c10_continuous(&mut self) -> Result<Outcome> {
        let s = self.sigma2()?;
        let coefficient = 2.0 / (PI * s.det().sqrt() * self.table.total_perimeter());
        let b = &self.budgets;
        let mut cfg = CampaignConfig::new(self.opts.table.clone(), Vec::new(), b.continuous_replicas, self.opts.seed);
        cfg.t_grid = b.continuous_grid.clone();
        let res = Campaign::with_table(cfg, self.table.clone())?
            .execution(self.mode)
            .run_continuous()?;
        let fit = res.fit.expect("t grid has several points");
        let ratio = fit.c_hat / coefficient;
        Ok(Outcome::new(
            (0.75..=1.25).contains(&ratio),
            format!(
                "fitted coefficient {:.4} +- {:.4}, prediction {coefficient:.4}, ratio {ratio:.3} (band [0.75, 1.25]); degenerate events {}",
                fit.c_hat, fit.c_se, res.degenerate_events
            ),
            &[("fitted", fit.c_hat), ("fitted_se", fit.c_se), ("prediction", coefficient), ("ratio", ratio)],
        ))
    }

    fn c11_oracles(&self) -> Result<Outcome> {
        let mut fixtures_ok = true;
        for path in oracle_fixtures() {
            let segs: Vec<Segment> = path.windows(2).map(|w| Segment::new(w[0], w[1])).collect();
            let brute = count_brute(&segs);
            for cs in [0.3, 1.0, 5.0] {
                fixtures_ok &= count_grid(&segs, cs)? == brute;
            }
        }
        let table = &self.table;
        let seed = self.opts.seed;
        let mismatched = map_range(0..self.budgets.oracle_trajectories, self.mode, |rep| -> Result<bool> {
            let mut rng = rng::stream(seed, Purpose::Test, rep);
            let start = sample_mu_bar(table, &mut rng);
            let traj = generate(table, &start, 2000)?;
            Ok(report_grid(&traj, None)? != report_brute(&traj))
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .filter(|&m| m)
        .count();
        Ok(Outcome::new(
            fixtures_ok && mismatched == 0,
            format!(
                "fixtures agree: {fixtures_ok}; {mismatched} of {} random trajectories (n = 2000) disagree",
                self.budgets.oracle_trajectories
            ),
            &[("mismatched_trajectories", mismatched as f64)],
        ))
    }

    fn c12_invariants(&self) -> Result<Outcome> {
        let table = &self.table;
        let seed = self.opts.seed;
        let samples = self.budgets.ks_samples;
        // Reversibility over 15 steps.
        let reversal_error = map_range(0..1000, self.mode, |rep| -> Result<f64> {
            let mut rng = rng::stream(seed, Purpose::Invariants, rep);
            let p0 = sample_mu_bar(table, &mut rng);
            reversal_error(table, &p0, 15)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
        // Measure preservation on phi.
        let pairs = map_range(0..samples, self.mode, |rep| -> Result<(f64, f64)> {
            let mut rng = rng::stream(seed, Purpose::Invariants, 1_000_000 + rep);
            let mut p = sample_mu_bar(table, &mut rng);
            let fresh = sample_mu_bar(table, &mut rng).phi;
            for _ in 0..100 {
                p = billiard_step(table, &p)?.next;
            }
            Ok((p.phi, fresh))
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let (evolved, fresh): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let ks = ks_two_sample(&evolved, &fresh);
        let crit = ks_critical_1pct(evolved.len(), fresh.len());
        // Unit speed along a long orbit.
        let mut rng = rng::stream(seed, Purpose::Invariants, u64::MAX);
        let start = sample_mu_bar(table, &mut rng);
        let mut walker = crate::trajectory::Walker::new(table, &start);
        let mut speed_ok = true;
        let mut worst_speed: f64 = 0.0;
        for k in 1..=100_000u64 {
            walker.advance()?;
            let dev = (walker.velocity().norm() - 1.0).abs();
            worst_speed = worst_speed.max(dev);
            speed_ok &= dev <= 1e-10 * k as f64;
        }
        Ok(Outcome::new(
            reversal_error <= 1e-6 && ks < crit && speed_ok,
            format!(
                "max reversal error {reversal_error:.2e} (tol 1e-6); KS on phi after 100 steps {ks:.4} vs critical {crit:.4}; max speed deviation {worst_speed:.1e}"
            ),
            &[("reversal_error", reversal_error), ("ks", ks), ("ks_critical", crit), ("speed_deviation", worst_speed)],
        ))
    }

    fn c13_determinism(&self) -> Result<Outcome> {
        let mut cfg = CampaignConfig::new(self.opts.table.clone(), vec![50, 200, 800], 96, self.opts.seed);
        cfg.t_grid = vec![20.0, 80.0];
        let run = |cfg: &CampaignConfig, threads: usize| -> Result<String> {
            with_threads(Some(threads), || -> Result<String> {
                let c = Campaign::with_table(cfg.clone(), self.table.clone())?;
                let e = c.run_expectation()?;
                let t = c.run_continuous()?;
                Ok(serde_json::to_string(&(e, t))?)
            })
        };
        let one = run(&cfg, 1)?;
        let identical = [2, 8].iter().map(|&t| run(&cfg, t)).collect::<Result<Vec<_>>>()?.iter().all(|o| *o == one);
        let dir = scratch_dir()?;
        let mut resumable = cfg.clone();
        resumable.checkpoint_path = Some(dir.join("expectation.ckpt"));
        resumable.budget_secs = Some(0.0);
        let campaign = Campaign::with_table(resumable, self.table.clone())?;
        let mut interruptions = 0;
        let resumed = loop {
            match campaign.run_expectation() {
                Ok(r) => break r,
                Err(Error::BudgetExceeded { .. }) => interruptions += 1,
                Err(e) => return Err(e),
            }
        };
        let straight = Campaign::with_table(cfg.clone(), self.table.clone())?.run_expectation()?;
        let _ = std::fs::remove_dir_all(&dir);
        let resume_ok = interruptions > 0 && serde_json::to_string(&resumed)? == serde_json::to_string(&straight)?;
        Ok(Outcome::new(
            identical && resume_ok,
            format!("identical at 1/2/8 workers: {identical}; resume after {interruptions} interruptions matches: {resume_ok}"),
            &[("interruptions", interruptions as f64)],
        ))
    }
}

/// Reduce `p0` forward `steps` times, reverse, step back and compare.
pub fn reversal_error(table: &BilliardTable, p0: &PhasePoint, steps: usize) -> Result<f64> {
    let mut p = *p0;
    let mut shift = [0i64; 2];
    for _ in 0..steps {
        let s = billiard_step(table, &p)?;
        shift[0] += s.shift[0];
        shift[1] += s.shift[1];
        p = s.next;
    }
    let mut q = p.reversed();
    for _ in 0..steps {
        let s = billiard_step(table, &q)?;
        shift[0] += s.shift[0];
        shift[1] += s.shift[1];
        q = s.next;
    }
    let back = q.reversed();
    if back.disk != p0.disk || shift != [0, 0] {
        return Ok(f64::INFINITY);
    }
    let dtheta = (back.theta - p0.theta).rem_euclid(std::f64::consts::TAU);
    let dtheta = dtheta.min(std::f64::consts::TAU - dtheta);
    Ok(dtheta.max((back.phi - p0.phi).abs()))
}

/// The A20 sum by a literal loop over `k1, r, l, s`.
pub fn naive_a20(n: u64) -> BigRational {
    let mut tally: BTreeMap<u64, u64> = BTreeMap::new();
    for k1 in 1..=n {
        for r in 0..=n - k1 {
            for l in 1..=n - k1 - r {
                for s in 0..=n - k1 - r - l {
                    *tally.entry((r + l) * (l + s)).or_insert(0) += 1;
                }
            }
        }
    }
    let mut sum = BigRational::zero();
    for (den, count) in tally {
        sum += BigRational::new(BigInt::from(count), BigInt::from(den));
    }
    sum / BigRational::from_integer(BigInt::from(n * n))
}

/// Hand-built polylines with known crossings, touches and overlaps.
pub fn oracle_fixtures() -> Vec<Vec<Vec2>> {
    let v = Vec2::new;
    vec![
        vec![v(0.0, 0.0), v(2.0, 0.0), v(2.0, 1.0), v(1.0, -1.0)],
        vec![v(0.0, 0.0), v(1.0, 0.0)],
        vec![v(0.0, 0.0), v(1.0, 1.0), v(1.0, 0.0), v(0.0, 1.0), v(0.5, -1.0)],
        vec![v(0.0, 0.0), v(3.0, 0.0), v(3.0, 1.0), v(1.0, 1.0), v(1.0, 0.0), v(1.0, -1.0)],
        vec![v(0.0, 0.0), v(2.0, 0.0), v(1.0, 0.0), v(1.0, 2.0)],
        vec![v(0.0, 0.0), v(4.0, 4.0), v(4.0, 0.0), v(0.0, 4.0), v(2.0, -1.0), v(2.0, 5.0)],
    ]
}

fn scratch_dir() -> Result<std::path::PathBuf> {
    let nanos = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_nanos())
        .unwrap_or(0);
    let dir = std::env::temp_dir().join(format!("lorentz-verify-{}-{nanos}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

/// Run the suite and return the report.
pub fn verify(opts: VerifyOptions, progress: impl FnMut(&CriterionOutcome, f64)) -> Result<VerifyReport> {
    Verifier::new(opts)?.run(progress)
}
