use serde_json::Value;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use tempfile::TempDir;

const REFERENCE: &str = r#"{"disks": [
  {"center": [0.0, 0.0], "radius": 0.45},
  {"center": [0.5, 0.5], "radius": 0.2}
]}"#;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_lorentz-lab"));
    c.env_remove("LORENTZ_LAB_THREADS");
    c
}

struct Lab {
    dir: TempDir,
}

impl Lab {
    fn new() -> Self {
        Lab {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn file(&self, name: &str, body: &str) -> PathBuf {
        let p = self.dir.path().join(name);
        fs::write(&p, body).unwrap();
        p
    }

    fn out(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn run(&self, config: &Path, out: &str, args: &[&str]) -> Output {
        bin()
            .arg("--config")
            .arg(config)
            .arg("--out")
            .arg(self.out(out))
            .args(args)
            .output()
            .unwrap()
    }
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: PathBuf) -> Value {
    serde_json::from_slice(&fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))).unwrap()
}

fn lab_config(extra: &str) -> String {
    format!(r#"{{"table": {REFERENCE}, "seed": 77{extra}}}"#)
}

#[test]
fn validate_accepts_reference_table() {
    let lab = Lab::new();
    let cfg = lab.file("t.json", REFERENCE);
    let o = lab.run(&cfg, "o", &["validate"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v = json(lab.out("o/validation.json"));
    assert_eq!(v["valid"], true);
    assert_eq!(v["horizon"]["horizon"], "finite");
    assert!((v["geometry"]["free_area"].as_f64().unwrap() - 0.238164).abs() < 1e-6);
}

#[test]
fn validate_reports_open_corridor() {
    let lab = Lab::new();
    let cfg = lab.file("t.json", r#"{"disks": [{"center": [0.5, 0.5], "radius": 0.45}]}"#);
    let o = lab.run(&cfg, "o", &["validate"]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    let v = json(lab.out("o/validation.json"));
    assert_eq!(v["valid"], false);
    assert_eq!(v["horizon"]["direction"], serde_json::json!([1, 0]));
    assert!(stderr(&o).contains("infinite horizon"));
}

#[test]
fn validate_rejects_overlap_and_malformed_input() {
    let lab = Lab::new();
    let overlap = lab.file(
        "o.json",
        r#"{"disks": [{"center": [0.0, 0.0], "radius": 0.45}, {"center": [0.5, 0.5], "radius": 0.3}]}"#,
    );
    let o = lab.run(&overlap, "a", &["validate"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert_eq!(json(lab.out("a/validation.json"))["error"]["kind"], "overlapping_obstacles");

    let broken = lab.file("b.json", r#"{"disks": [{"center": [0.0, 0.0], "radius": "#);
    assert_eq!(code(&lab.run(&broken, "b", &["validate"])), 1);
    let unknown = lab.file("u.json", r#"{"disks": [], "colour": "red"}"#);
    assert_eq!(code(&lab.run(&unknown, "c", &["validate"])), 1);
    let empty = lab.file("e.json", r#"{"disks": []}"#);
    assert_eq!(code(&lab.run(&empty, "d", &["validate"])), 2);
    let missing = lab.dir.path().join("nope.json");
    assert_eq!(code(&lab.run(&missing, "e", &["validate"])), 1);
    assert_eq!(code(&bin().args(["validate"]).output().unwrap()), 1);
    assert_eq!(code(&bin().args(["--config", "x", "frobnicate"]).output().unwrap()), 1);
}

#[test]
fn simulate_writes_trajectory_and_manifest() {
    let lab = Lab::new();
    let cfg = lab.file("t.json", REFERENCE);
    let o = lab.run(&cfg, "o", &["simulate", "--n", "250", "--seed", "5"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(lab.out("o/trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "k,x,y,vx,vy,tau,Sx,Sy,obstacle");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 251);
    assert!(rows[0].starts_with("0,") && rows[250].starts_with("250,"));

    let m = json(lab.out("o/simulate.manifest.json"));
    assert_eq!(m["tool"], "lorentz-lab");
    assert_eq!(m["subcommand"], "simulate");
    assert_eq!(m["seed"], 5);
    assert_eq!(m["seed_source"], "cli");
    assert_eq!(m["exit_code"], 0);
    assert_eq!(m["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(m["config_sha256"].as_str().unwrap().len(), 64);
    assert!(m["wall_time_secs"].as_f64().unwrap() >= 0.0);
    assert!(m["outputs"].as_array().unwrap().iter().any(|x| x == "trajectory.csv"));
}

#[test]
fn every_subcommand_writes_a_manifest() {
    let lab = Lab::new();
    let cfg = lab.file(
        "lab.json",
        &lab_config(
            r#", "constants": {"tau_replicas": 20, "tau_steps": 100, "sigma_replicas": 400, "sigma_steps": 100, "j_tolerance": 1e-5},
               "campaign": {"kinds": ["expectation"], "n_grid": [20, 40], "replicas": 10, "attach_constants": false}"#,
        ),
    );
    for sub in [
        vec!["validate"],
        vec!["simulate", "--n", "10"],
        vec!["count", "--n", "50"],
        vec!["constants"],
        vec!["campaign"],
        vec!["verify", "--criteria", "3"],
    ] {
        let o = lab.run(&cfg, "o", &sub);
        assert_eq!(code(&o), 0, "{sub:?}: {}", stderr(&o));
        let m = json(lab.out(&format!("o/{}.manifest.json", sub[0])));
        assert_eq!(m["subcommand"], sub[0]);
        assert_eq!(m["seed"], 77);
        assert_eq!(m["seed_source"], "config");
        for key in ["config_sha256", "version", "wall_time_secs", "started_unix", "threads", "parallel_feature"] {
            assert!(m.get(key).is_some(), "{sub:?} manifest lacks {key}");
        }
    }
}

#[test]
fn failed_runs_still_write_a_manifest() {
    let lab = Lab::new();
    let cfg = lab.file("t.json", r#"{"disks": [{"center": [0.5, 0.5], "radius": 0.45}]}"#);
    assert_eq!(code(&lab.run(&cfg, "o", &["validate"])), 3);
    assert_eq!(json(lab.out("o/validate.manifest.json"))["exit_code"], 3);
}

#[test]
fn count_reports_intersections() {
    let lab = Lab::new();
    let cfg = lab.file("t.json", REFERENCE);
    let o = lab.run(&cfg, "o", &["count", "--n", "400"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = json(lab.out("o/intersection.json"));
    let n = r["n"].as_u64().unwrap();
    let v_n = r["v_n"].as_u64().unwrap();
    let transversal = r["transversal"].as_u64().unwrap();
    assert_eq!(n, 400);
    assert!(v_n >= 3 * n - 2);
    assert_eq!(r["v_t"].as_u64().unwrap(), 2 * transversal);
    assert!(r["v_hat_n"].as_u64().unwrap() >= n);
    assert_eq!(r["degenerate_events"], 0);

    let o = lab.run(&cfg, "p", &["count", "--n", "400", "--t", "10"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r2 = json(lab.out("p/intersection.json"));
    assert_eq!(r2["v_n"], r["v_n"]);
    assert!(r2["v_t"].as_u64().unwrap() <= r["v_t"].as_u64().unwrap());
    assert_eq!(r2["t"], 10.0);
}

#[test]
fn constants_runs_on_small_budgets() {
    let lab = Lab::new();
    let cfg = lab.file(
        "lab.json",
        &lab_config(
            r#", "constants": {"tau_replicas": 50, "tau_steps": 200, "sigma_replicas": 2000, "sigma_steps": 200, "j_tolerance": 1e-5}"#,
        ),
    );
    let o = lab.run(&cfg, "o", &["constants"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = json(lab.out("o/constants.json"));
    let tau = r["mean_tau"]["value"].as_f64().unwrap();
    assert!((tau - 0.1832).abs() < 0.01);
    assert!(r["c"]["value"].as_f64().unwrap() > 0.0);
    assert!(r["c_prime"]["value"].as_f64().unwrap() > 0.0);
    assert!((r["j_value"]["value"].as_f64().unwrap() - 1.1719536).abs() < 1e-4);
}

fn campaign_config(budget: Option<f64>) -> String {
    let budget = budget.map_or(String::new(), |b| format!(r#", "budget_secs": {b}"#));
    lab_config(&format!(
        r#", "campaign": {{"kinds": ["expectation"], "n_grid": [50, 100, 200], "replicas": 150, "attach_constants": false{budget}}}"#
    ))
}

#[test]
fn campaign_resume_matches_uninterrupted_run() {
    let lab = Lab::new();
    let whole = lab.file("whole.json", &campaign_config(None));
    let o = lab.run(&whole, "whole", &["campaign"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let reference = fs::read(lab.out("whole/campaign_expectation.json")).unwrap();

    let limited = lab.file("limited.json", &campaign_config(Some(0.0)));
    let o = lab.run(&limited, "part", &["campaign"]);
    assert_eq!(code(&o), 5, "{}", stderr(&o));
    assert!(stderr(&o).contains("--resume"));
    let ckpt = lab.out("part/expectation.ckpt");
    assert!(ckpt.exists());
    assert!(!lab.out("part/campaign_expectation.json").exists());

    let mut tries = 0;
    loop {
        let o = lab.run(&limited, "part", &["campaign", "--resume", ckpt.to_str().unwrap()]);
        tries += 1;
        match code(&o) {
            0 => break,
            5 if tries < 5 => continue,
            c => panic!("exit {c}: {}", stderr(&o)),
        }
    }
    assert_eq!(fs::read(lab.out("part/campaign_expectation.json")).unwrap(), reference);
}

#[test]
fn campaign_refuses_foreign_checkpoint() {
    let lab = Lab::new();
    let limited = lab.file("limited.json", &campaign_config(Some(0.0)));
    assert_eq!(code(&lab.run(&limited, "part", &["campaign"])), 5);
    let ckpt = lab.out("part/expectation.ckpt");
    let o = lab.run(&limited, "part", &["campaign", "--seed", "78", "--resume", ckpt.to_str().unwrap()]);
    assert_eq!(code(&o), 6, "{}", stderr(&o));
    assert!(stderr(&o).contains("hash"));
}

#[test]
fn thread_count_does_not_change_results() {
    let lab = Lab::new();
    let cfg = lab.file("c.json", &campaign_config(None));
    let o = lab.run(&cfg, "one", &["campaign", "--threads", "1"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = bin()
        .env("LORENTZ_LAB_THREADS", "4")
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(lab.out("four"))
        .arg("campaign")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(json(lab.out("four/campaign.manifest.json"))["threads"], 4);
    assert_eq!(
        fs::read(lab.out("one/campaign_expectation.json")).unwrap(),
        fs::read(lab.out("four/campaign_expectation.json")).unwrap()
    );
    assert_eq!(
        fs::read(lab.out("one/campaign_expectation.csv")).unwrap(),
        fs::read(lab.out("four/campaign_expectation.csv")).unwrap()
    );
}

#[test]
fn verify_names_the_failing_criterion() {
    let lab = Lab::new();
    let cfg = lab.file("t.json", REFERENCE);
    let o = lab.run(&cfg, "bad", &["verify", "--criteria", "6", "--corrupt-sigma2", "4"]);
    assert_eq!(code(&o), 4, "{}", stderr(&o));
    assert!(stderr(&o).contains("criterion 6 (local limit theorem)"), "{}", stderr(&o));
    let r = json(lab.out("bad/verify.json"));
    assert_eq!(r["first_failure"], 6);
    assert_eq!(r["all_passed"], false);

    let o = lab.run(&cfg, "good", &["verify", "--criteria", "6"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn verify_report_is_byte_identical_on_repeat() {
    let lab = Lab::new();
    let cfg = lab.file("t.json", REFERENCE);
    for out in ["a", "b"] {
        let o = lab.run(&cfg, out, &["verify", "--criteria", "3,4,11"]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    assert_eq!(fs::read(lab.out("a/verify.json")).unwrap(), fs::read(lab.out("b/verify.json")).unwrap());
    assert_eq!(fs::read(lab.out("a/verify.txt")).unwrap(), fs::read(lab.out("b/verify.txt")).unwrap());
}

#[test]
fn verify_quick_scale_passes() {
    let lab = Lab::new();
    let cfg = lab.file("t.json", REFERENCE);
    let o = lab.run(&cfg, "o", &["verify", "--scale", "quick"]);
    let table = String::from_utf8_lossy(&o.stdout);
    assert_eq!(table.lines().count(), 13);
    assert_eq!(code(&o), 0, "{table}{}", stderr(&o));
}

#[test]
fn subcommands_leave_the_config_untouched() {
    let lab = Lab::new();
    let body = campaign_config(None);
    let cfg = lab.file("c.json", &body);
    for sub in [
        vec!["validate"],
        vec!["simulate", "--n", "20"],
        vec!["count", "--n", "30"],
        vec!["campaign"],
    ] {
        let o = lab.run(&cfg, "o", &sub);
        assert_eq!(code(&o), 0, "{sub:?}: {}", stderr(&o));
        assert_eq!(fs::read_to_string(&cfg).unwrap(), body);
    }
}

#[test]
fn help_exits_cleanly() {
    let o = bin().arg("--help").output().unwrap();
    assert_eq!(code(&o), 0);
    let text = String::from_utf8_lossy(&o.stdout);
    for sub in ["validate", "simulate", "count", "constants", "campaign", "verify"] {
        assert!(text.contains(sub));
    }
}
