use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use powerborrow_core::{
    log_marginal_likelihood, make_reference_prior, select_delta, stats_from_summary, CriterionKind,
    PowerPosteriorContext,
};
use serde_json::Value;

const HIST: &str = r#"{"n":10,"ybar":0,"sd":0.5}"#;
const CUR: &str = r#"{"n":10,"ybar":0,"sd":0.5}"#;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_powerborrow"))
        .args(args)
        .env_remove("POWERBORROW_SEED")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn feasible_reference_and_nig() {
    let v = json(&run(&["feasible", "--n0", "10", "--p", "1"]));
    assert_eq!(v["lower"], 0.1);
    assert_eq!(v["lower_open"], true);
    assert_eq!(v["includes_zero"], false);
    let v = json(&run(&[
        "feasible",
        "--n0",
        "10",
        "--p",
        "1",
        "--prior",
        r#"{"kind":"nig","mu0":[0],"r":[[1]],"a":2,"b":1}"#,
    ]));
    assert_eq!(v["includes_zero"], true);
    assert_eq!(v["lower"], 0.0);
}

#[test]
fn feasible_rejects_short_history() {
    let out = run(&["feasible", "--n0", "3", "--p", "4"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("insufficient historical data"));
}

#[test]
fn select_matches_the_library() {
    let v = json(&run(&["select", "--hist-summary", HIST, "--current-summary", CUR]));
    let delta = v["delta"].as_f64().unwrap();
    assert!(delta > 0.1 && delta <= 1.0);
    let ctx = PowerPosteriorContext::new(
        make_reference_prior(1),
        stats_from_summary(10, 0.0, 0.5).unwrap(),
        stats_from_summary(10, 0.0, 0.5).unwrap(),
    )
    .unwrap();
    let lib = select_delta(CriterionKind::MarginalLikelihood, &ctx, 256, 1e-8).unwrap();
    assert_eq!(delta, lib.selected);
    assert_eq!(v["value"].as_f64().unwrap(), log_marginal_likelihood(delta, &ctx).unwrap());
    assert!(v["posterior"]["mean_sigma2"].as_f64().unwrap() > 0.0);
}

#[test]
fn select_dic_reports_penalty() {
    let v = json(&run(&[
        "select",
        "--hist-summary",
        r#"{"n":10,"ybar":1.0,"sd":0.5}"#,
        "--current-summary",
        CUR,
        "--criterion",
        "dic",
    ]));
    assert!(v["dic"].is_f64());
    assert!(v["p_d"].as_f64().unwrap() > 0.0);
    assert_eq!(v["dic"], v["value"]);
}

#[test]
fn profile_argmax_agrees_with_selection() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("profile.csv");
    let v = json(&run(&[
        "select",
        "--hist-summary",
        r#"{"n":10,"ybar":0.6,"sd":0.5}"#,
        "--current-summary",
        CUR,
        "--profile",
        path.to_str().unwrap(),
    ]));
    let delta = v["delta"].as_f64().unwrap();
    let text = fs::read_to_string(&path).unwrap();
    let rows: Vec<(f64, f64)> = text
        .lines()
        .skip(1)
        .filter_map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            Some((f[0].parse().ok()?, f[1].parse().ok()?))
        })
        .collect();
    let best = rows.iter().cloned().fold((f64::NAN, f64::NEG_INFINITY), |b, r| if r.1 > b.1 { r } else { b });
    let spacing = rows[1].0 - rows[0].0;
    assert!((best.0 - delta).abs() <= spacing, "grid {} vs {}", best.0, delta);
}

fn write_csv(path: &Path, rows: &[(f64, f64)]) {
    let mut s = String::from("x1,y\n");
    for (x, y) in rows {
        s.push_str(&format!("{x},{y}\n"));
    }
    fs::write(path, s).unwrap();
}

#[test]
fn csv_inputs_and_posterior() {
    let dir = tempfile::tempdir().unwrap();
    let h = dir.path().join("hist.csv");
    let c = dir.path().join("cur.csv");
    let draws = dir.path().join("draws.csv");
    write_csv(&h, &[(1.0, 1.1), (1.0, 0.7), (1.0, 1.4), (1.0, 0.9), (1.0, 1.2)]);
    write_csv(&c, &[(1.0, 0.8), (1.0, 1.3), (1.0, 1.0), (1.0, 0.6)]);
    let v = json(&run(&[
        "posterior",
        "--hist",
        h.to_str().unwrap(),
        "--current",
        c.to_str().unwrap(),
        "--delta",
        "1",
        "--draws",
        "100",
        "--seed",
        "3",
        "--output",
        draws.to_str().unwrap(),
    ]));
    // pooled mean of nine observations
    let mean = (1.1 + 0.7 + 1.4 + 0.9 + 1.2 + 0.8 + 1.3 + 1.0 + 0.6) / 9.0;
    assert!((v["location"][0].as_f64().unwrap() - mean).abs() < 1e-12);
    assert_eq!(fs::read_to_string(&draws).unwrap().lines().count(), 101);
}

#[test]
fn io_and_validation_exit_codes() {
    let out = run(&["select", "--hist", "/nonexistent/h.csv", "--current-summary", CUR]);
    assert_eq!(out.status.code(), Some(3));
    let out = run(&["select", "--current-summary", CUR]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["select", "--hist-summary", r#"{"n":1,"ybar":0,"sd":0.5}"#, "--current-summary", CUR]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn delta_posterior_summary() {
    let v = json(&run(&["delta-posterior", "--hist-summary", HIST, "--current-summary", CUR]));
    let mode = v["mode"].as_f64().unwrap();
    let mean = v["mean"].as_f64().unwrap();
    assert!(mode > 0.1 && mode <= 1.0);
    assert!(mean > 0.5 && mean < 1.0);
}

fn simulate(args: &[&str], dir: &Path, env_seed: Option<&str>) -> (Value, String) {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_powerborrow"));
    cmd.arg("simulate").args(args).arg("--out-dir").arg(dir).env_remove("POWERBORROW_SEED");
    if let Some(s) = env_seed {
        cmd.env("POWERBORROW_SEED", s);
    }
    let out = cmd.output().unwrap();
    let v = json(&out);
    let csv = fs::read_to_string(v["csv"].as_str().unwrap()).unwrap();
    (v, csv)
}

#[test]
fn fig2_is_reproducible_and_worker_invariant() {
    let dirs: Vec<_> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    let base = ["fig2", "--replicates", "50", "--seed", "7"];
    let (a, csv_a) = simulate(&[&base[..], &["--workers", "1"]].concat(), dirs[0].path(), None);
    let (b, csv_b) = simulate(&[&base[..], &["--workers", "1"]].concat(), dirs[1].path(), None);
    let (c, csv_c) = simulate(&[&base[..], &["--workers", "8"]].concat(), dirs[2].path(), None);
    assert_eq!(csv_a, csv_b);
    assert_eq!(csv_a, csv_c);
    assert_eq!(a["seed"], 7);
    assert_eq!(a["config_hash"], b["config_hash"]);
    assert_eq!(a["config_hash"], c["config_hash"]);
    assert_eq!(csv_a.lines().count(), 1 + 9 * 3);
    assert!(csv_a.starts_with("cell,method,mean_delta,log_mse,replicates,failures\n"));
}

#[test]
fn seed_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let (v, _) = simulate(&["fig2", "--replicates", "2", "--methods", "EB1"], dir.path(), Some("99"));
    assert_eq!(v["seed"], 99);
}

#[test]
fn fig1_default_table() {
    let dir = tempfile::tempdir().unwrap();
    let (v, csv) = simulate(&["fig1"], dir.path(), None);
    assert_eq!(v["records"], 93);
    assert!(csv.lines().nth(1).unwrap().starts_with("0.0,EB1,1.0,,1,0"));
    let js: Value = serde_json::from_str(&fs::read_to_string(v["json"].as_str().unwrap()).unwrap()).unwrap();
    assert_eq!(js["records"].as_array().unwrap().len(), 93);
}

#[test]
fn oracle_check_improper_case() {
    let out = run(&["oracle-check", "--case", "improper"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("PASS improper/delta=0.1 integral diverges"));
    assert!(text.contains("PASS improper/delta=0.15 finite"));
}

#[test]
fn oracle_check_default_suite() {
    let out = run(&["oracle-check", "--dic-draws", "1e5"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{text}");
    assert!(!text.contains("FAIL"));
    assert!(text.contains("PASS dic/delta=0.5"));
    let out = run(&["oracle-check", "--dic-draws", "12.5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bernoulli_table() {
    let out = run(&["bernoulli-demo", "--log-c0", "-50"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    let row: Vec<f64> = text
        .lines()
        .find(|l| l.starts_with("0.5,"))
        .unwrap()
        .split(',')
        .map(|f| f.parse().unwrap())
        .collect();
    assert!(row[1] < 1e-12);
    assert!((row[2] + 25.0).abs() < 1e-12);
}
