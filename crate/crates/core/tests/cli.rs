use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn rr_opt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rr-opt"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_str(&stdout(out)).unwrap()
}

fn write_mech(dir: &Path, name: &str, args: &[&str]) -> String {
    let mut full = vec!["mech"];
    full.extend_from_slice(args);
    let path = dir.join(name);
    fs::write(&path, stdout(&rr_opt(&full))).unwrap();
    path.to_str().unwrap().to_string()
}

fn optimal3(dir: &Path) -> String {
    write_mech(dir, "opt.json", &["--scheme", "optimal3", "--delta", "0.25", "--weight", "0.5"])
}

fn csv_rows(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn mech_schemes() {
    let out = rr_opt(&["mech", "--scheme", "optimal3", "--delta", "0.25", "--weight", "0.5"]);
    assert_eq!(stdout(&out), "{\"p0\":[0.75,0.25,0.0],\"p1\":[0.75,0.0,0.25]}\n");
    let out = rr_opt(&["mech", "--scheme", "warner", "--delta", "0.25"]);
    assert_eq!(stdout(&out), "{\"p0\":[0.625,0.375],\"p1\":[0.375,0.625]}\n");
    let out = rr_opt(&["mech", "--scheme", "holohan", "--delta", "0.25", "--theta", "0.7"]);
    assert_eq!(stdout(&out), "{\"p0\":[0.75,0.25],\"p1\":[1.0,0.0]}\n");
    // theta0 = 0.1 for this budget
    let out = rr_opt(&["mech", "--scheme", "optimal2", "--delta", "0.25", "--weight", "0.4", "--theta", "0.05"]);
    assert_eq!(stdout(&out), "{\"p0\":[1.0,0.0],\"p1\":[0.9375,0.0625]}\n");
    let out = rr_opt(&["mech", "--scheme", "optimal2", "--delta", "0.25", "--weight", "0.4", "--theta", "0.2"]);
    assert_eq!(stdout(&out), "{\"p0\":[0.625,0.375],\"p1\":[1.0,0.0]}\n");
}

#[test]
fn mech_family_spec() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("family.json");
    fs::write(&spec, r#"{"b":[0.5,0.5,1,1],"r1":2,"r2":3,"r3":4}"#).unwrap();
    let out = rr_opt(&[
        "mech", "--scheme", "family", "--delta", "0.25", "--weight", "0.5",
        "--family-spec", spec.to_str().unwrap(),
    ]);
    assert_eq!(stdout(&out), "{\"p0\":[0.375,0.375,0.25,0.0],\"p1\":[0.375,0.375,0.0,0.25]}\n");

    fs::write(&spec, r#"{"b":[0.5,0.4,1,1],"r1":2,"r2":3,"r3":4}"#).unwrap();
    let out = rr_opt(&[
        "mech", "--scheme", "family", "--delta", "0.25", "--family-spec", spec.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn exit_codes() {
    let out = rr_opt(&["mech", "--scheme", "optimal3", "--delta", "1.5"]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("(0, 1)"), "{err}");
    assert_eq!(err.lines().count(), 1);

    assert_eq!(rr_opt(&["mech", "--scheme", "nope", "--delta", "0.2"]).status.code(), Some(2));
    assert_eq!(rr_opt(&["mech", "--scheme", "holohan", "--delta", "0.2"]).status.code(), Some(2));
    assert_eq!(rr_opt(&["sweep", "--figure", "9"]).status.code(), Some(2));
    assert_eq!(
        rr_opt(&["eval", "--mech", "/nonexistent/x.json", "--metric", "uc"]).status.code(),
        Some(2)
    );

    let help = rr_opt(&["--help"]);
    assert!(String::from_utf8_lossy(&help.stdout).contains("Exit codes"));
}

#[test]
fn eval_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let mech = optimal3(dir.path());
    let out = rr_opt(&["eval", "--mech", &mech, "--metric", "fisher", "--theta", "0.5"]);
    assert_eq!(stdout(&out), "{\"fisher\":1.0}\n");
    let out = rr_opt(&["eval", "--mech", &mech, "--metric", "uc", "--weight", "0.5"]);
    assert_eq!(stdout(&out), "{\"uc\":0.25}\n");

    let v = json(&rr_opt(&["eval", "--mech", &mech, "--metric", "chernoff", "--theta1", "0.3", "--theta2", "0.7"]));
    assert!((v["chernoff"].as_f64().unwrap() - 0.021_092_097_863_377_707).abs() < 1e-9);
    assert!((v["s_star"].as_f64().unwrap() + 0.5).abs() < 1e-6);

    let v = json(&rr_opt(&["eval", "--mech", &mech, "--metric", "kl", "--theta1", "0.3", "--theta2", "0.7"]));
    assert!((v["kl"].as_f64().unwrap() - 0.084_729_786_038_720_36).abs() < 1e-12);
    let v = json(&rr_opt(&[
        "eval", "--mech", &mech, "--metric", "renyi", "--theta1", "0.3", "--theta2", "0.7", "--s", "-0.5",
    ]));
    assert!((v["renyi"].as_f64().unwrap() - 0.042_184_195_726_755_414).abs() < 1e-12);
    let v = json(&rr_opt(&["eval", "--mech", &mech, "--metric", "dp"]));
    assert!((v["dp"].as_f64().unwrap() - 0.25).abs() < 1e-15);
    let v = json(&rr_opt(&[
        "eval", "--mech", &mech, "--metric", "hk", "--theta1", "0.3", "--theta2", "0.7", "--rate", "0.2",
    ]));
    assert!(v["hk"].as_f64().unwrap() > 0.0);
}

#[test]
fn eval_mismatch_and_domain_errors() {
    let dir = tempfile::tempdir().unwrap();
    let mech = optimal3(dir.path());
    let code = |args: &[&str]| {
        let mut full = vec!["eval", "--mech", &mech];
        full.extend_from_slice(args);
        rr_opt(&full).status.code()
    };
    assert_eq!(code(&["--metric", "fisher", "--theta1", "0.3"]), Some(4));
    assert_eq!(code(&["--metric", "hoeffding", "--theta1", "0.3", "--theta2", "0.7"]), Some(4));
    assert_eq!(code(&["--metric", "renyi", "--theta1", "0.3", "--theta2", "0.7"]), Some(4));
    assert_eq!(code(&["--metric", "uc", "--theta", "0.3"]), Some(4));
    assert_eq!(code(&["--metric", "fisher", "--theta", "0"]), Some(3));
    assert_eq!(code(&["--metric", "fisher", "--theta", "1.5"]), Some(3));

    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"p0":[0.5,0.6],"p1":[0.5,0.5]}"#).unwrap();
    let out = rr_opt(&["eval", "--mech", bad.to_str().unwrap(), "--metric", "uc"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn sweep_figure_two() {
    let text = stdout(&rr_opt(&["sweep", "--figure", "2", "--delta", "0.25", "--weight", "0.5", "--grid", "99"]));
    assert!(text.starts_with("theta,max_y2,max_y3\n"));
    assert!(text.ends_with('\n') && !text.contains('\r'));
    assert!(text.lines().any(|l| l.starts_with("0.5,") && l.ends_with(",1.0")));
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 99);
    assert!(rows.iter().all(|r| r[2] >= r[1]));
}

#[test]
fn sweep_figure_three_ordering() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fig3.csv");
    stdout(&rr_opt(&["sweep", "--figure", "3", "--delta", "0.25", "--weight", "0.5", "--out", out.to_str().unwrap()]));
    let text = fs::read_to_string(out).unwrap();
    assert!(text.starts_with("theta,warner,greenberg_eta_half,holohan,optimal3\n"));
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 99);
    for r in rows {
        assert!(r[4] >= r[3] && r[3] >= r[1], "{r:?}");
        assert_eq!(r[1], r[2]);
    }
}

#[test]
fn sweep_figure_four() {
    let text = stdout(&rr_opt(&["sweep", "--figure", "4", "--grid", "3"]));
    assert!(text.starts_with("theta1,theta2,max_relative_entropy\n"));
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 9);
    for r in rows {
        if r[0] == r[1] {
            assert_eq!(r[2], 0.0);
        } else {
            assert!(r[2] > 0.0);
        }
    }
}

#[test]
fn simulate_reports() {
    let dir = tempfile::tempdir().unwrap();
    let mech = optimal3(dir.path());
    let args = ["simulate", "--mech", &mech, "--theta", "0.5", "--n", "10000", "--trials", "2000", "--seed", "3"];
    let v = json(&rr_opt(&args));
    let ratio = v["mse_over_crb"].as_f64().unwrap();
    assert!((0.9..=1.1).contains(&ratio), "{ratio}");
    let coverage = v["coverage"].as_f64().unwrap();
    assert!((0.935..=0.965).contains(&coverage), "{coverage}");
    assert!((v["crb"].as_f64().unwrap() - 1e-4).abs() < 1e-18);

    let once = ["simulate", "--mech", &mech, "--theta", "0.5", "--trials", "1", "--seed", "7"];
    assert_eq!(stdout(&rr_opt(&once)), stdout(&rr_opt(&once)));

    let zero = rr_opt(&["simulate", "--mech", &mech, "--theta", "0", "--seed", "1"]);
    assert_eq!(zero.status.code(), Some(3));
    assert_eq!(rr_opt(&["simulate", "--mech", &mech, "--theta", "0.5"]).status.code(), Some(2));
}

#[test]
fn simulate_from_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mech = optimal3(dir.path());
    let data = dir.path().join("counts.csv");
    fs::write(&data, "symbol,count\n1,50\n2,30\n3,20\n").unwrap();
    let v = json(&rr_opt(&["simulate", "--mech", &mech, "--data", data.to_str().unwrap()]));
    assert!((v["theta_hat"].as_f64().unwrap() - 0.4).abs() < 1e-10);
    assert_eq!(v["n"], 100);

    let saved = dir.path().join("saved.csv");
    stdout(&rr_opt(&[
        "simulate", "--mech", &mech, "--theta", "0.4", "--n", "500", "--seed", "2",
        "--save-counts", saved.to_str().unwrap(),
    ]));
    let text = fs::read_to_string(&saved).unwrap();
    assert!(text.starts_with("symbol,count\n"));
    let total: u64 = text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse::<u64>().unwrap()).sum();
    assert_eq!(total, 500);
}

#[test]
fn verify_certifies_and_detects_corruption() {
    let base = ["verify", "--delta", "0.25", "--weight", "0.5", "--grid", "400", "--samples", "100000", "--seed", "1"];
    let mut fisher = base.to_vec();
    fisher.extend_from_slice(&["--objective", "fisher", "--theta", "0.5"]);
    let v = json(&rr_opt(&fisher));
    let gap = v["gap"].as_f64().unwrap();
    assert!((0.0..=1e-3).contains(&gap), "{gap}");
    assert_eq!(v["certified"], true);
    assert!(v["random_accepted"].as_u64().unwrap() > 0);

    let mut kl = base.to_vec();
    kl.extend_from_slice(&["--objective", "kl", "--theta1", "0.3", "--theta2", "0.7"]);
    assert!(rr_opt(&kl).status.success());

    let mut renyi = base.to_vec();
    renyi.extend_from_slice(&["--objective", "renyi", "--theta1", "0.3", "--theta2", "0.7", "--s", "-0.5"]);
    assert!(rr_opt(&renyi).status.success());

    let mut corrupted = fisher.clone();
    corrupted.extend_from_slice(&["--expect", "0.9"]);
    assert_eq!(rr_opt(&corrupted).status.code(), Some(5));
}

#[test]
fn thread_cap_does_not_change_output() {
    let args = [
        "verify", "--objective", "fisher", "--theta", "0.3", "--delta", "0.4", "--weight", "0.45",
        "--grid", "50", "--samples", "20000", "--seed", "9",
    ];
    let default = rr_opt(&args);
    let capped = Command::new(env!("CARGO_BIN_EXE_rr-opt"))
        .args(args)
        .env("RR_OPT_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(stdout(&default), stdout(&capped));
}
