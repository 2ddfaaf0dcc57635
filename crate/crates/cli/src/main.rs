//! `lorentz-lab`: validate tables, simulate and count trajectories, estimate
//! constants, run campaigns and the acceptance suite.
//!
//! Exit codes: 0 success, 1 unreadable or malformed config (or bad usage),
//! 2 invalid table, 3 infinite horizon, 4 acceptance failure, 5 budget
//! exceeded (resumable), 6 any other runtime error.

mod config;

use clap::{Parser, Subcommand, ValueEnum};
use config::{LabConfig, LoadedConfig};
use lorentz_core::billiard::{sample_mu_bar, validate_horizon, validate_table, BilliardTable, HorizonReport};
use lorentz_core::campaign::{hex, Campaign, CampaignConfig, CampaignKind, Checkpoint};
use lorentz_core::constants::compute_constants;
use lorentz_core::exec::{parallel_enabled, with_threads};
use lorentz_core::intersect::{count_continuous, report_grid};
use lorentz_core::rng::{self, Purpose};
use lorentz_core::trajectory::generate;
use lorentz_core::verify::{verify, Scale, VerifyOptions};
use lorentz_core::Error;
use serde::Serialize;
use serde_json::{json, Value};
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

const EXIT_PARSE: u8 = 1;
const EXIT_INVALID_TABLE: u8 = 2;
const EXIT_INFINITE_HORIZON: u8 = 3;
const EXIT_VERIFY_FAILED: u8 = 4;
const EXIT_BUDGET: u8 = 5;
const EXIT_RUNTIME: u8 = 6;

#[derive(Parser, Debug)]
#[command(name = "lorentz-lab", version, about = "Periodic Lorentz gas self-intersection workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Config document (bare table or lab config).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, default_value = "lorentz-out")]
    out: PathBuf,

    /// Override the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (default: available parallelism).
    #[arg(long, global = true, env = "LORENTZ_LAB_THREADS")]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check the table geometry and the finite-horizon condition.
    Validate,
    /// Dump one trajectory as CSV.
    Simulate {
        /// Reflections to record (overrides the config).
        #[arg(long)]
        n: Option<usize>,
    },
    /// Intersection report for one trajectory.
    Count {
        #[arg(long)]
        n: Option<usize>,
        /// Continuous-time horizon.
        #[arg(long)]
        t: Option<f64>,
    },
    /// Estimate E[tau], the diffusion matrix, J, c and c'.
    Constants,
    /// Run the campaigns listed in the config.
    Campaign {
        /// Resume from this checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Run the acceptance suite.
    Verify {
        #[arg(long, value_enum, default_value_t = ScaleArg::Quick)]
        scale: ScaleArg,
        /// Only these criteria (comma separated).
        #[arg(long, value_delimiter = ',', hide = true)]
        criteria: Vec<u32>,
        /// Test hook: scale the estimated diffusion matrix.
        #[arg(long, hide = true)]
        corrupt_sigma2: Option<f64>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ScaleArg {
    Quick,
    Full,
}

impl From<ScaleArg> for Scale {
    fn from(s: ScaleArg) -> Self {
        match s {
            ScaleArg::Quick => Scale::Quick,
            ScaleArg::Full => Scale::Full,
        }
    }
}

/// Failure carrying its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::BudgetExceeded { .. } => EXIT_BUDGET,
            Error::InfiniteHorizon { .. } => EXIT_INFINITE_HORIZON,
            Error::OverlappingObstacles { .. } => EXIT_INVALID_TABLE,
            _ => EXIT_RUNTIME,
        };
        Failure::new(code, e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::new(EXIT_RUNTIME, e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::new(EXIT_RUNTIME, e.to_string())
    }
}

struct Run {
    cli: Cli,
    loaded: LoadedConfig,
    seed: u64,
    outputs: Vec<String>,
    extra: serde_json::Map<String, Value>,
}

impl Run {
    fn lab(&self) -> &LabConfig {
        &self.loaded.lab
    }

    fn out_path(&mut self, name: &str) -> PathBuf {
        self.outputs.push(name.to_string());
        self.cli.out.join(name)
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), Failure> {
        let path = self.out_path(name);
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }

    fn table(&self) -> Result<BilliardTable, Failure> {
        let spec = &self.lab().table;
        let table = validate_table(&spec.disks()).map_err(|e| Failure::new(EXIT_INVALID_TABLE, e.to_string()))?;
        let report = validate_horizon(&table, spec.horizon_max_denominator, spec.horizon_probes, self.seed)
            .map_err(|e| Failure::new(EXIT_INVALID_TABLE, e.to_string()))?;
        Ok(table.with_horizon(&report)?)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_PARSE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let Some(config_path) = cli.config.clone() else {
        eprintln!("error: --config <path> is required");
        return ExitCode::from(EXIT_PARSE);
    };
    let loaded = match config::load(&config_path) {
        Ok(l) => l,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_PARSE);
        }
    };
    if let Err(e) = fs::create_dir_all(&cli.out) {
        eprintln!("error: cannot create {}: {e}", cli.out.display());
        return ExitCode::from(EXIT_RUNTIME);
    }
    let seed = cli.seed.unwrap_or(loaded.lab.seed);
    let threads = cli.threads;
    let started = Instant::now();
    let started_unix = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let mut run = Run {
        cli,
        loaded,
        seed,
        outputs: Vec::new(),
        extra: serde_json::Map::new(),
    };
    let name = subcommand_name(&run.cli.command);
    let outcome = with_threads(threads, || dispatch(&mut run));
    let code = match &outcome {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    };
    let manifest = json!({
        "tool": "lorentz-lab",
        "version": env!("CARGO_PKG_VERSION"),
        "subcommand": name,
        "config_path": config_path,
        "config_sha256": run.loaded.sha256,
        "seed": run.seed,
        "seed_source": if run.cli.seed.is_some() { "cli" } else { "config" },
        "threads": threads,
        "parallel_feature": parallel_enabled(),
        "started_unix": started_unix,
        "wall_time_secs": started.elapsed().as_secs_f64(),
        "outputs": run.outputs,
        "exit_code": code,
        "details": run.extra,
    });
    let manifest_path = run.cli.out.join(format!("{name}.manifest.json"));
    if let Err(e) = fs::write(&manifest_path, serde_json::to_string_pretty(&manifest).unwrap() + "\n") {
        eprintln!("warning: cannot write manifest {}: {e}", manifest_path.display());
    }
    ExitCode::from(code)
}

fn subcommand_name(c: &Command) -> &'static str {
    match c {
        Command::Validate => "validate",
        Command::Simulate { .. } => "simulate",
        Command::Count { .. } => "count",
        Command::Constants => "constants",
        Command::Campaign { .. } => "campaign",
        Command::Verify { .. } => "verify",
    }
}

fn dispatch(run: &mut Run) -> Result<(), Failure> {
    match &run.cli.command {
        Command::Validate => cmd_validate(run),
        Command::Simulate { n } => {
            let n = n.unwrap_or(run.lab().simulate.n);
            cmd_simulate(run, n)
        }
        Command::Count { n, t } => {
            let n = n.unwrap_or(run.lab().count.n);
            let t = t.or(run.lab().count.t);
            cmd_count(run, n, t)
        }
        Command::Constants => cmd_constants(run),
        Command::Campaign { resume } => {
            let resume = resume.clone();
            cmd_campaign(run, resume)
        }
        Command::Verify {
            scale,
            criteria,
            corrupt_sigma2,
        } => {
            let mut opts = VerifyOptions::new((*scale).into(), run.seed);
            opts.table = run.lab().table.clone();
            opts.only = criteria.clone();
            opts.corrupt_sigma2 = *corrupt_sigma2;
            cmd_verify(run, opts)
        }
    }
}

fn cmd_validate(run: &mut Run) -> Result<(), Failure> {
    let spec = run.lab().table.clone();
    let (report, failure) = match validate_table(&spec.disks()) {
        Err(e) => (
            json!({"valid": false, "error": error_json(&e)}),
            Some(Failure::new(EXIT_INVALID_TABLE, e.to_string())),
        ),
        Ok(table) => {
            let geometry = json!({
                "fingerprint": table.fingerprint(),
                "disks": table.disks().len(),
                "total_perimeter": table.total_perimeter(),
                "free_area": table.free_area(),
                "min_gap": table.min_gap(),
                "mean_free_path": table.mean_free_path(),
            });
            match validate_horizon(&table, spec.horizon_max_denominator, spec.horizon_probes, run.seed) {
                Err(e) => (
                    json!({"valid": false, "geometry": geometry, "error": error_json(&e)}),
                    Some(Failure::new(EXIT_INVALID_TABLE, e.to_string())),
                ),
                Ok(h @ HorizonReport::Infinite { direction, corridor_width }) => (
                    json!({"valid": false, "geometry": geometry, "horizon": h}),
                    Some(Failure::new(
                        EXIT_INFINITE_HORIZON,
                        format!(
                            "infinite horizon: open corridor in direction ({}, {}) of width {corridor_width}",
                            direction[0], direction[1]
                        ),
                    )),
                ),
                Ok(h) => (json!({"valid": true, "geometry": geometry, "horizon": h}), None),
            }
        }
    };
    println!("{}", serde_json::to_string_pretty(&report)?);
    run.write_json("validation.json", &report)?;
    match failure {
        Some(f) => Err(f),
        None => Ok(()),
    }
}

fn error_json(e: &Error) -> Value {
    match e {
        Error::OverlappingObstacles { i, j, translate } => json!({
            "kind": "overlapping_obstacles",
            "obstacles": [i, j],
            "translate": [translate.0, translate.1],
            "message": e.to_string(),
        }),
        Error::InvalidParam(m) => json!({"kind": "invalid_param", "message": m}),
        other => json!({"kind": "error", "message": other.to_string()}),
    }
}

fn cmd_simulate(run: &mut Run, n: usize) -> Result<(), Failure> {
    let table = run.table()?;
    let replica = run.lab().simulate.replica;
    let mut rng = rng::stream(run.seed, Purpose::MuBarStart, replica);
    let start = sample_mu_bar(&table, &mut rng);
    let traj = generate(&table, &start, n)?.with_seed(run.seed, replica);
    let path = run.out_path("trajectory.csv");
    let file = fs::File::create(path)?;
    traj.write_csv(std::io::BufWriter::new(file))?;
    run.extra.insert("n".into(), json!(n));
    run.extra.insert("replica".into(), json!(replica));
    run.extra.insert("start".into(), serde_json::to_value(start)?);
    run.extra.insert("table_fingerprint".into(), json!(traj.table_ref));
    eprintln!("wrote {} reflections to {}", traj.len(), run.cli.out.join("trajectory.csv").display());
    Ok(())
}

fn cmd_count(run: &mut Run, n: usize, t: Option<f64>) -> Result<(), Failure> {
    let table = run.table()?;
    let section = run.lab().count.clone();
    let mut rng = rng::stream(run.seed, Purpose::MuBarStart, section.replica);
    let start = sample_mu_bar(&table, &mut rng);
    let traj = generate(&table, &start, n)?;
    let mut report = report_grid(&traj, section.cell_size)?;
    if let Some(t) = t {
        report.v_t = count_continuous(&traj, t)?;
        report.t = Some(lorentz_core::intersect::OrderedTime(t));
    }
    println!("{}", serde_json::to_string_pretty(&report)?);
    run.write_json("intersection.json", &report)?;
    Ok(())
}

fn cmd_constants(run: &mut Run) -> Result<(), Failure> {
    let table = run.table()?;
    let cfg = run.lab().constants.with_seed(run.seed);
    let report = compute_constants(&table, &cfg, Default::default())?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    run.write_json("constants.json", &report)?;
    Ok(())
}

fn cmd_campaign(run: &mut Run, resume: Option<PathBuf>) -> Result<(), Failure> {
    let Some(section) = run.lab().campaign.clone() else {
        return Err(Failure::new(EXIT_PARSE, "config has no campaign section"));
    };
    let resume_kind = match &resume {
        Some(p) => Some(Checkpoint::load(p)?.kind),
        None => None,
    };
    let table = run.table()?;
    let constants = if section.attach_constants {
        let cfg = run.lab().constants.with_seed(run.seed);
        Some(compute_constants(&table, &cfg, Default::default())?)
    } else {
        None
    };
    for &kind in &section.kinds {
        let default_ckpt = run.cli.out.join(format!("{}.ckpt", kind.name()));
        let checkpoint = match (&resume, resume_kind) {
            (Some(p), Some(k)) if k == kind => p.clone(),
            _ => {
                // A fresh run never picks up stale progress.
                let _ = fs::remove_file(&default_ckpt);
                default_ckpt
            }
        };
        let cfg = CampaignConfig {
            table: run.lab().table.clone(),
            n_grid: section.n_grid.clone(),
            t_grid: section.t_grid.clone(),
            replicas: section.replicas,
            seed: run.seed,
            budget_secs: section.budget_secs,
            checkpoint_path: Some(checkpoint.clone()),
            cell_size: section.cell_size,
        };
        run.extra
            .insert(format!("{}_config_hash", kind.name()), json!(hex(&cfg.hash(kind))));
        let campaign = Campaign::with_table(cfg, table.clone())?;
        let result = match kind {
            CampaignKind::Expectation => campaign.run_expectation(),
            CampaignKind::Variance => campaign.run_variance(),
            CampaignKind::Continuous => campaign.run_continuous(),
            CampaignKind::AlmostSure => campaign.run_almost_sure(),
        };
        let mut result = match result {
            Ok(r) => r,
            Err(Error::BudgetExceeded { checkpoint }) => {
                return Err(Failure::new(
                    EXIT_BUDGET,
                    format!(
                        "{} campaign exceeded its budget; resume with --resume {}",
                        kind.name(),
                        checkpoint.display()
                    ),
                ))
            }
            Err(e) => return Err(e.into()),
        };
        if let Some(c) = &constants {
            result.attach_constants(c.clone());
        }
        let csv_path = run.out_path(&format!("campaign_{}.csv", kind.name()));
        result.write_csv(std::io::BufWriter::new(fs::File::create(csv_path)?))?;
        run.write_json(&format!("campaign_{}.json", kind.name()), &result)?;
        run.outputs.push(format!("{}.ckpt", kind.name()));
        eprintln!("{} campaign done", kind.name());
    }
    if let Some(d) = &section.decorrelation {
        let cfg = CampaignConfig::new(run.lab().table.clone(), Vec::new(), d.replicas, run.seed);
        let points = Campaign::with_table(cfg, table.clone())?.run_decorrelation_probe(d.r, d.s, &d.gaps)?;
        run.write_json("decorrelation.json", &json!({"r": d.r, "s": d.s, "points": points}))?;
    }
    Ok(())
}

fn cmd_verify(run: &mut Run, opts: VerifyOptions) -> Result<(), Failure> {
    run.extra.insert("scale".into(), serde_json::to_value(opts.scale)?);
    if opts.corrupt_sigma2.is_some() {
        run.extra.insert("corrupt_sigma2".into(), json!(opts.corrupt_sigma2));
    }
    let report = verify(opts, |c, secs| {
        eprintln!("[{}] {:>2} {} ({secs:.1}s)", if c.passed { "PASS" } else { "FAIL" }, c.id, c.name);
    })?;
    let table = report.table();
    print!("{table}");
    fs::write(run.out_path("verify.txt"), &table)?;
    run.write_json("verify.json", &report)?;
    match report.first_failure_label() {
        None => Ok(()),
        Some(label) => Err(Failure::new(EXIT_VERIFY_FAILED, format!("acceptance failed, first failing {label}"))),
    }
}
