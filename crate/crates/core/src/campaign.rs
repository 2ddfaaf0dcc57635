//! Monte Carlo campaigns over many replicas: expectation and variance of
//! `V_n`, the continuous-time count, single-path convergence and a
//! decorrelation probe.
//!
//! Replica `i` always draws from stream `i` of the campaign seed, and
//! per-replica results are gathered in index order, so results do not depend
//! on the worker count. Long runs save progress to a checkpoint after every
//! chunk of replicas and can resume from it.

use crate::billiard::{sample_mu_bar, sample_uniform_free, BilliardTable, TableSpec};
use crate::constants::ConstantsReport;
use crate::error::{Error, Result};
use crate::exec::{map_range, Execution};
use crate::geometry::{segments_intersect, Segment};
use crate::intersect::{crossing_times, tally_grid, StreamingCounter};
use crate::rng::{self, Purpose};
use crate::stats::{self, wls_fit2, Estimate};
use crate::trajectory::Walker;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const CHECKPOINT_MAGIC: [u8; 8] = *b"LLABCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;
/// Grid cell size for the intersection counters.
pub const DEFAULT_CELL_SIZE: f64 = 0.25;
/// Replicas per scheduling chunk; also the checkpoint granularity.
pub const CHUNK: u64 = 64;
/// Bootstrap resamples behind every confidence interval.
pub const CI_RESAMPLES: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CampaignKind {
    Expectation,
    Variance,
    Continuous,
    AlmostSure,
}

impl CampaignKind {
    fn tag(self) -> u8 {
        match self {
            CampaignKind::Expectation => 1,
            CampaignKind::Variance => 2,
            CampaignKind::Continuous => 3,
            CampaignKind::AlmostSure => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CampaignKind::Expectation => "expectation",
            CampaignKind::Variance => "variance",
            CampaignKind::Continuous => "continuous",
            CampaignKind::AlmostSure => "almost_sure",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    pub table: TableSpec,
    #[serde(default)]
    pub n_grid: Vec<u64>,
    #[serde(default)]
    pub t_grid: Vec<f64>,
    pub replicas: u64,
    pub seed: u64,
    /// Wall-clock limit in seconds.
    #[serde(default)]
    pub budget_secs: Option<f64>,
    #[serde(default)]
    pub checkpoint_path: Option<PathBuf>,
    #[serde(default)]
    pub cell_size: Option<f64>,
}

/// The fields that determine results, hashed into checkpoints.
#[derive(Serialize)]
struct HashedFields<'a> {
    kind: &'a str,
    table: &'a TableSpec,
    n_grid: &'a [u64],
    t_grid: &'a [f64],
    replicas: u64,
    seed: u64,
    cell_size: f64,
}

impl CampaignConfig {
    pub fn new(table: TableSpec, n_grid: Vec<u64>, replicas: u64, seed: u64) -> Self {
        CampaignConfig {
            table,
            n_grid,
            t_grid: Vec::new(),
            replicas,
            seed,
            budget_secs: None,
            checkpoint_path: None,
            cell_size: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicas < 2 {
            return Err(Error::InvalidParam(format!("replicas must be >= 2, got {}", self.replicas)));
        }
        if self.n_grid.first() == Some(&0) {
            return Err(Error::InvalidParam("n_grid entries must be >= 1".into()));
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParam("n_grid must be strictly increasing".into()));
        }
        if self.t_grid.iter().any(|t| !(*t > 0.0) || !t.is_finite()) || self.t_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParam("t_grid must be positive and strictly increasing".into()));
        }
        if self.budget_secs.is_some() && self.checkpoint_path.is_none() {
            return Err(Error::InvalidParam("a budget needs a checkpoint_path".into()));
        }
        if let Some(cs) = self.cell_size {
            if !(cs > 0.0) || !cs.is_finite() {
                return Err(Error::CellSizeNonPositive(cs));
            }
        }
        Ok(())
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size.unwrap_or(DEFAULT_CELL_SIZE)
    }

    /// SHA-256 over everything that influences the results of `kind`.
    pub fn hash(&self, kind: CampaignKind) -> [u8; 32] {
        let fields = HashedFields {
            kind: kind.name(),
            table: &self.table,
            n_grid: &self.n_grid,
            t_grid: &self.t_grid,
            replicas: self.replicas,
            seed: self.seed,
            cell_size: self.cell_size(),
        };
        let bytes = serde_json::to_vec(&fields).expect("config serializes");
        Sha256::digest(&bytes).into()
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Progress saved between chunks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Checkpoint {
    pub kind: CampaignKind,
    pub config_hash: [u8; 32],
    pub width: u32,
    /// Per-replica rows, `width` values each, in replica order. The next
    /// replica to run is `rows.len()`.
    pub rows: Vec<Vec<u64>>,
}

impl Checkpoint {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(57 + 8 * self.rows.len() * self.width as usize);
        out.extend_from_slice(&CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.push(self.kind.tag());
        out.extend_from_slice(&self.config_hash);
        out.extend_from_slice(&self.width.to_le_bytes());
        out.extend_from_slice(&(self.rows.len() as u64).to_le_bytes());
        for row in &self.rows {
            for v in row {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Checkpoint(m.to_string());
        if bytes.len() < 57 || bytes[..8] != CHECKPOINT_MAGIC {
            return Err(bad("not a checkpoint file"));
        }
        let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
        let u64_at = |i: usize| u64::from_le_bytes(bytes[i..i + 8].try_into().unwrap());
        let version = u32_at(8);
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let kind = match bytes[12] {
            1 => CampaignKind::Expectation,
            2 => CampaignKind::Variance,
            3 => CampaignKind::Continuous,
            4 => CampaignKind::AlmostSure,
            t => return Err(Error::Checkpoint(format!("unknown campaign kind {t}"))),
        };
        let config_hash: [u8; 32] = bytes[13..45].try_into().unwrap();
        let width = u32_at(45);
        let count = u64_at(49) as usize;
        if bytes.len() != 57 + 8 * count * width as usize {
            return Err(bad("truncated payload"));
        }
        let rows = (0..count)
            .map(|r| {
                (0..width as usize)
                    .map(|c| u64_at(57 + 8 * (r * width as usize + c)))
                    .collect()
            })
            .collect();
        Ok(Checkpoint {
            kind,
            config_hash,
            width,
            rows,
        })
    }

    /// Write to a sibling temporary file, then rename over `path`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut tmp = path.as_os_str().to_owned();
        tmp.push(".tmp");
        let tmp = PathBuf::from(tmp);
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&self.encode())?;
            f.sync_all()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::decode(&fs::read(path)?)
    }
}

/// Summary statistics of one grid point across replicas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridStat {
    /// `n` or `t`.
    pub x: f64,
    pub mean: f64,
    pub mean_se: f64,
    pub mean_ci: [f64; 2],
    pub variance: f64,
    pub variance_se: f64,
    pub variance_ci: [f64; 2],
}

/// `mean(y) = c_hat * x ln x + b_hat * x` by weighted least squares.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub c_hat: f64,
    pub c_se: f64,
    pub b_hat: f64,
    pub b_se: f64,
    pub cov: [[f64; 2]; 2],
    /// `(mean - fit) / mean_se` per grid point.
    pub standardized_residuals: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub n: u64,
    pub v_n: u64,
    /// `v_n / (n ln n)`.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioPoint {
    pub n: u64,
    pub ratio: f64,
    pub ratio_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignResult {
    pub kind: CampaignKind,
    pub config_hash: String,
    pub seed: u64,
    pub replicas: u64,
    pub grid: Vec<GridStat>,
    pub fit: Option<FitSummary>,
    pub series: Vec<SeriesPoint>,
    /// Max minus min of the ratio over the first and the last three points.
    pub oscillation: Option<[f64; 2]>,
    pub degenerate_events: u64,
    /// `Var(V_n) / (c' n^2)` once constants are attached.
    pub variance_ratios: Vec<RatioPoint>,
    pub constants: Option<ConstantsReport>,
}

impl CampaignResult {
    fn empty(kind: CampaignKind, config: &CampaignConfig) -> Self {
        CampaignResult {
            kind,
            config_hash: hex(&config.hash(kind)),
            seed: config.seed,
            replicas: config.replicas,
            grid: Vec::new(),
            fit: None,
            series: Vec::new(),
            oscillation: None,
            degenerate_events: 0,
            variance_ratios: Vec::new(),
            constants: None,
        }
    }

    /// Attach a constants report; variance campaigns gain their ratios.
    pub fn attach_constants(&mut self, report: ConstantsReport) {
        if self.kind == CampaignKind::Variance {
            let cp = report.c_prime.value;
            self.variance_ratios = self
                .grid
                .iter()
                .map(|g| {
                    let scale = cp * g.x * g.x;
                    RatioPoint {
                        n: g.x as u64,
                        ratio: g.variance / scale,
                        ratio_se: g.variance_se / scale,
                    }
                })
                .collect();
        }
        self.constants = Some(report);
    }

    /// One row per `(x, statistic)`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "kind,x,statistic,value")?;
        let k = self.kind.name();
        for g in &self.grid {
            let rows = [
                ("mean", g.mean),
                ("mean_se", g.mean_se),
                ("mean_ci_low", g.mean_ci[0]),
                ("mean_ci_high", g.mean_ci[1]),
                ("variance", g.variance),
                ("variance_se", g.variance_se),
                ("variance_ci_low", g.variance_ci[0]),
                ("variance_ci_high", g.variance_ci[1]),
            ];
            for (name, v) in rows {
                writeln!(w, "{k},{},{name},{v}", g.x)?;
            }
        }
        for p in &self.series {
            writeln!(w, "{k},{},v_n,{}", p.n, p.v_n)?;
            writeln!(w, "{k},{},ratio,{}", p.n, p.ratio)?;
        }
        for r in &self.variance_ratios {
            writeln!(w, "{k},{},variance_ratio,{}", r.n, r.ratio)?;
            writeln!(w, "{k},{},variance_ratio_se,{}", r.n, r.ratio_se)?;
        }
        if let Some(f) = &self.fit {
            writeln!(w, "{k},,c_hat,{}", f.c_hat)?;
            writeln!(w, "{k},,c_se,{}", f.c_se)?;
            writeln!(w, "{k},,b_hat,{}", f.b_hat)?;
            writeln!(w, "{k},,b_se,{}", f.b_se)?;
        }
        Ok(())
    }
}

/// Covariance of two indicator samples with the standard error of the
/// mean of centred products.
pub fn indicator_covariance(x: &[bool], y: &[bool]) -> Estimate {
    assert_eq!(x.len(), y.len());
    let m = x.len() as f64;
    let mx = x.iter().filter(|&&b| b).count() as f64 / m;
    let my = y.iter().filter(|&&b| b).count() as f64 / m;
    let z: Vec<f64> = x
        .iter()
        .zip(y)
        .map(|(&a, &b)| (f64::from(u8::from(a)) - mx) * (f64::from(u8::from(b)) - my))
        .collect();
    let cov = stats::mean(&z);
    Estimate::new(cov, (stats::variance(&z) / m).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovPoint {
    pub gap: u64,
    pub cov: f64,
    pub se: f64,
}

/// A campaign bound to its validated table.
pub struct Campaign {
    pub config: CampaignConfig,
    pub table: BilliardTable,
    pub mode: Execution,
}

impl Campaign {
    /// Validate the config and build (and horizon-check) its table.
    pub fn new(config: CampaignConfig) -> Result<Self> {
        config.validate()?;
        let table = BilliardTable::from_spec(&config.table, config.seed)?;
        Ok(Campaign {
            config,
            table,
            mode: Execution::default(),
        })
    }

    /// Use an already validated table.
    pub fn with_table(config: CampaignConfig, table: BilliardTable) -> Result<Self> {
        config.validate()?;
        if !table.horizon_validated() {
            return Err(Error::InvalidParam("table horizon has not been validated".into()));
        }
        Ok(Campaign {
            config,
            table,
            mode: Execution::default(),
        })
    }

    pub fn execution(mut self, mode: Execution) -> Self {
        self.mode = mode;
        self
    }

    fn load_rows(&self, kind: CampaignKind, width: usize) -> Result<Vec<Vec<u64>>> {
        let Some(path) = &self.config.checkpoint_path else {
            return Ok(Vec::new());
        };
        if !path.exists() {
            return Ok(Vec::new());
        }
        let ck = Checkpoint::load(path)?;
        if ck.kind != kind {
            return Err(Error::Checkpoint(format!(
                "checkpoint holds a {} campaign, not {}",
                ck.kind.name(),
                kind.name()
            )));
        }
        if ck.config_hash != self.config.hash(kind) {
            return Err(Error::Checkpoint("config hash mismatch".into()));
        }
        if ck.width as usize != width {
            return Err(Error::Checkpoint("row width mismatch".into()));
        }
        Ok(ck.rows)
    }

    fn save_rows(&self, kind: CampaignKind, width: usize, rows: &[Vec<u64>]) -> Result<()> {
        if let Some(path) = &self.config.checkpoint_path {
            Checkpoint {
                kind,
                config_hash: self.config.hash(kind),
                width: width as u32,
                rows: rows.to_vec(),
            }
            .save(path)?;
        }
        Ok(())
    }

    fn budget_exhausted(&self, started: Instant) -> bool {
        self.config
            .budget_secs
            .is_some_and(|b| started.elapsed().as_secs_f64() >= b)
    }

    /// Run `f` for every replica in chunks, resuming from and saving to the
    /// checkpoint.
    fn run_replicas<F>(&self, kind: CampaignKind, width: usize, f: F) -> Result<Vec<Vec<u64>>>
    where
        F: Fn(u64) -> Result<Vec<u64>> + Sync + Send,
    {
        let started = Instant::now();
        let total = self.config.replicas;
        let mut rows = self.load_rows(kind, width)?;
        while (rows.len() as u64) < total {
            let lo = rows.len() as u64;
            let hi = (lo + CHUNK).min(total);
            let batch = map_range(lo..hi, self.mode, &f)
                .into_iter()
                .collect::<Result<Vec<_>>>()?;
            rows.extend(batch);
            self.save_rows(kind, width, &rows)?;
            if (rows.len() as u64) < total && self.budget_exhausted(started) {
                return Err(Error::BudgetExceeded {
                    checkpoint: self.config.checkpoint_path.clone().unwrap_or_default(),
                });
            }
        }
        Ok(rows)
    }

    fn require_n_grid(&self) -> Result<()> {
        if self.config.n_grid.is_empty() {
            return Err(Error::InvalidParam("n_grid must not be empty".into()));
        }
        Ok(())
    }

    /// `V_n` at every grid point from one orbit of `max(n_grid)` chords.
    fn v_n_rows(&self, kind: CampaignKind) -> Result<Vec<Vec<u64>>> {
        self.require_n_grid()?;
        let grid: Vec<usize> = self.config.n_grid.iter().map(|&n| n as usize).collect();
        let n_max = *grid.last().unwrap();
        let cell = self.config.cell_size();
        let seed = self.config.seed;
        let table = &self.table;
        self.run_replicas(kind, grid.len(), |rep| {
            let mut rng = rng::stream(seed, Purpose::MuBarStart, rep);
            let start = sample_mu_bar(table, &mut rng);
            let mut walker = Walker::new(table, &start);
            let mut segments = Vec::with_capacity(n_max);
            for _ in 0..n_max {
                let f = walker.advance()?;
                segments.push(Segment::new(f.from, f.to));
            }
            let tally = tally_grid(&segments, cell, Execution::Sequential)?;
            Ok(tally.v_n_at(&grid))
        })
    }

    fn grid_stats(&self, xs: &[f64], rows: &[Vec<u64>]) -> Vec<GridStat> {
        xs.iter()
            .enumerate()
            .map(|(i, &x)| {
                let col: Vec<f64> = rows.iter().map(|r| r[i] as f64).collect();
                let m = col.len() as f64;
                let mean = stats::mean(&col);
                let variance = stats::variance(&col);
                let mut rng = rng::stream(self.config.seed, Purpose::Bootstrap, i as u64);
                let bm = stats::bootstrap(&col, CI_RESAMPLES, &mut rng, stats::mean);
                let bv = stats::bootstrap(&col, CI_RESAMPLES, &mut rng, stats::variance);
                GridStat {
                    x,
                    mean,
                    mean_se: (variance / m).sqrt(),
                    mean_ci: [bm.ci_low, bm.ci_high],
                    variance,
                    variance_se: bv.se,
                    variance_ci: [bv.ci_low, bv.ci_high],
                }
            })
            .collect()
    }

    /// Mean of `V_n` per grid point and the `(n ln n, n)` fit.
    pub fn run_expectation(&self) -> Result<CampaignResult> {
        let kind = CampaignKind::Expectation;
        let rows = self.v_n_rows(kind)?;
        let xs: Vec<f64> = self.config.n_grid.iter().map(|&n| n as f64).collect();
        let mut res = CampaignResult::empty(kind, &self.config);
        res.grid = self.grid_stats(&xs, &rows);
        res.fit = fit_grid(&res.grid);
        Ok(res)
    }

    /// Sample variance of `V_n` per grid point.
    pub fn run_variance(&self) -> Result<CampaignResult> {
        let kind = CampaignKind::Variance;
        let rows = self.v_n_rows(kind)?;
        let xs: Vec<f64> = self.config.n_grid.iter().map(|&n| n as f64).collect();
        let mut res = CampaignResult::empty(kind, &self.config);
        res.grid = self.grid_stats(&xs, &rows);
        Ok(res)
    }

    /// Continuous-time counts from uniform starts in the free unit cell.
    pub fn run_continuous(&self) -> Result<CampaignResult> {
        let kind = CampaignKind::Continuous;
        let ts = self.config.t_grid.clone();
        if ts.is_empty() {
            return Err(Error::InvalidParam("t_grid must not be empty".into()));
        }
        let t_max = *ts.last().unwrap();
        let cell = self.config.cell_size();
        let seed = self.config.seed;
        let table = &self.table;
        let rows = self.run_replicas(kind, ts.len() + 1, |rep| {
            let mut rng = rng::stream(seed, Purpose::UniformStart, rep);
            let (q, v) = sample_uniform_free(table, &mut rng);
            let (start, t0) = table.fly_to_boundary(q, v)?;
            let mut walker = Walker::new(table, &start);
            let mut points = vec![q, walker.position()];
            let mut times = vec![0.0, t0];
            while t0 + walker.time() < t_max {
                let f = walker.advance()?;
                points.push(f.to);
                times.push(t0 + walker.time());
            }
            let (when, degenerate) = crossing_times(&points, &times, cell)?;
            let mut row: Vec<u64> = ts
                .iter()
                .map(|&t| 2 * when.partition_point(|&w| w <= t) as u64)
                .collect();
            row.push(degenerate);
            Ok(row)
        })?;
        let counts: Vec<Vec<u64>> = rows.iter().map(|r| r[..ts.len()].to_vec()).collect();
        let mut res = CampaignResult::empty(kind, &self.config);
        res.grid = self.grid_stats(&ts, &counts);
        res.fit = fit_grid(&res.grid);
        res.degenerate_events = rows.iter().map(|r| r[ts.len()]).sum();
        Ok(res)
    }

    /// `V_n / (n ln n)` along one orbit at the grid points (default
    /// `2^10 .. 2^20`), counted incrementally.
    ///
    /// A checkpoint holds the series computed so far; resuming replays the
    /// orbit and refuses if the replay disagrees with the saved values.
    pub fn run_almost_sure(&self) -> Result<CampaignResult> {
        let kind = CampaignKind::AlmostSure;
        let grid: Vec<u64> = if self.config.n_grid.is_empty() {
            default_almost_sure_grid()
        } else {
            self.config.n_grid.clone()
        };
        let saved = self.load_rows(kind, 1)?;
        let started = Instant::now();
        let mut rng = rng::stream(self.config.seed, Purpose::AlmostSure, 0);
        let start = sample_mu_bar(&self.table, &mut rng);
        let mut walker = Walker::new(&self.table, &start);
        let mut counter = StreamingCounter::new(self.config.cell_size())?;
        let mut rows: Vec<Vec<u64>> = Vec::with_capacity(grid.len());
        let mut series = Vec::with_capacity(grid.len());
        for (i, &n) in grid.iter().enumerate() {
            while (counter.len() as u64) < n {
                let f = walker.advance()?;
                counter.push(&Segment::new(f.from, f.to));
            }
            let v_n = counter.report().v_n;
            if let Some(row) = saved.get(i) {
                if row[0] != v_n {
                    return Err(Error::Checkpoint(format!("replay disagrees with saved series at n = {n}")));
                }
            }
            rows.push(vec![v_n]);
            let nf = n as f64;
            series.push(SeriesPoint {
                n,
                v_n,
                ratio: v_n as f64 / (nf * nf.ln()),
            });
            if i + 1 < grid.len() && i + 1 > saved.len() && self.budget_exhausted(started) {
                self.save_rows(kind, 1, &rows)?;
                return Err(Error::BudgetExceeded {
                    checkpoint: self.config.checkpoint_path.clone().unwrap_or_default(),
                });
            }
        }
        self.save_rows(kind, 1, &rows)?;
        let mut res = CampaignResult::empty(kind, &self.config);
        res.replicas = 1;
        res.degenerate_events = counter.report().degenerate_events;
        res.oscillation = oscillation(&series);
        res.series = series;
        Ok(res)
    }

    /// Empirical `cov(1[E_{0,r}], 1[E_{0,s}] o T^gap)` over replicas, where
    /// `E_{0,k}` is the event that chords 0 and k meet.
    pub fn run_decorrelation_probe(&self, r: u64, s: u64, gaps: &[u64]) -> Result<Vec<CovPoint>> {
        if r == 0 || s == 0 {
            return Err(Error::InvalidParam("r and s must be >= 1".into()));
        }
        if gaps.is_empty() || gaps.len() > 63 {
            return Err(Error::InvalidParam("between 1 and 63 gaps".into()));
        }
        let len = (r.max(gaps.iter().max().unwrap() + s) + 1) as usize;
        let seed = self.config.seed;
        let table = &self.table;
        let masks = map_range(0..self.config.replicas, self.mode, |rep| -> Result<u64> {
            let mut rng = rng::stream(seed, Purpose::Decorrelation, rep);
            let start = sample_mu_bar(table, &mut rng);
            let mut walker = Walker::new(table, &start);
            let mut segs = Vec::with_capacity(len);
            for _ in 0..len {
                let f = walker.advance()?;
                segs.push(Segment::new(f.from, f.to));
            }
            let (r, s) = (r as usize, s as usize);
            let mut mask = u64::from(segments_intersect(&segs[0], &segs[r]));
            for (i, &g) in gaps.iter().enumerate() {
                let a = g as usize;
                if segments_intersect(&segs[a], &segs[a + s]) {
                    mask |= 1 << (i + 1);
                }
            }
            Ok(mask)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let x: Vec<bool> = masks.iter().map(|m| m & 1 == 1).collect();
        Ok(gaps
            .iter()
            .enumerate()
            .map(|(i, &gap)| {
                let y: Vec<bool> = masks.iter().map(|m| m >> (i + 1) & 1 == 1).collect();
                let est = indicator_covariance(&x, &y);
                CovPoint {
                    gap,
                    cov: est.value,
                    se: est.se,
                }
            })
            .collect())
    }
}

pub fn default_almost_sure_grid() -> Vec<u64> {
    (10..=20).map(|k| 1u64 << k).collect()
}

fn oscillation(series: &[SeriesPoint]) -> Option<[f64; 2]> {
    if series.len() < 3 {
        return None;
    }
    let spread = |pts: &[SeriesPoint]| {
        let (lo, hi) = pts
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.ratio), hi.max(p.ratio)));
        hi - lo
    };
    Some([spread(&series[..3]), spread(&series[series.len() - 3..])])
}

/// Fit `mean = c x ln x + b x`, weighted by inverse squared standard errors
/// (unit weights when some point has no spread).
pub fn fit_grid(grid: &[GridStat]) -> Option<FitSummary> {
    if grid.len() < 2 {
        return None;
    }
    let u: Vec<f64> = grid.iter().map(|g| g.x * g.x.ln()).collect();
    let w: Vec<f64> = grid.iter().map(|g| g.x).collect();
    let y: Vec<f64> = grid.iter().map(|g| g.mean).collect();
    let weighted = grid.iter().all(|g| g.mean_se > 0.0);
    let weights: Vec<f64> = grid
        .iter()
        .map(|g| if weighted { 1.0 / (g.mean_se * g.mean_se) } else { 1.0 })
        .collect();
    let fit = wls_fit2(&u, &w, &y, &weights);
    let standardized_residuals = grid
        .iter()
        .zip(u.iter().zip(&w))
        .map(|(g, (&a, &b))| {
            let r = g.mean - fit.predict(a, b);
            if weighted {
                r / g.mean_se
            } else {
                r
            }
        })
        .collect();
    Some(FitSummary {
        c_hat: fit.a,
        c_se: fit.a_se(),
        b_hat: fit.b,
        b_se: fit.b_se(),
        cov: fit.cov,
        standardized_residuals,
    })
}

pub fn run_expectation(config: &CampaignConfig) -> Result<CampaignResult> {
    Campaign::new(config.clone())?.run_expectation()
}

pub fn run_variance(config: &CampaignConfig) -> Result<CampaignResult> {
    Campaign::new(config.clone())?.run_variance()
}

pub fn run_continuous(config: &CampaignConfig) -> Result<CampaignResult> {
    Campaign::new(config.clone())?.run_continuous()
}

pub fn run_almost_sure(config: &CampaignConfig) -> Result<CampaignResult> {
    Campaign::new(config.clone())?.run_almost_sure()
}

pub fn run_decorrelation_probe(config: &CampaignConfig, r: u64, s: u64, gaps: &[u64]) -> Result<Vec<CovPoint>> {
    Campaign::new(config.clone())?.run_decorrelation_probe(r, s, gaps)
}
