use std::process::{Command, Output};

use serde_json::Value;

const VARS: [&str; 11] = [
    "FLV_ALPHA",
    "FLV_THETA",
    "FLV_SEED",
    "FLV_SAMPLES",
    "FLV_STEP",
    "FLV_HORIZON",
    "FLV_TIME",
    "FLV_OUT",
    "FLV_FORMAT",
    "FLV_PARALLEL",
    "FLV_ACCEPTANCE_SCALE",
];

fn flv(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_flv"));
    for v in VARS {
        cmd.env_remove(v);
    }
    cmd.args(args).envs(env.iter().copied()).output().unwrap()
}

fn json_lines(out: &Output) -> Vec<Value> {
    String::from_utf8_lossy(&out.stdout).lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

#[test]
fn sample_pd_repeats_under_a_seed() {
    let args = ["sample", "pd", "--alpha", "0.5", "--theta", "0.5", "--seed", "7"];
    let (a, b) = (flv(&args, &[]), flv(&args, &[]));
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let c = flv(&["sample", "pd", "--alpha", "0.5", "--theta", "0.5", "--seed", "8"], &[]);
    assert_ne!(a.stdout, c.stdout);
    let lines = json_lines(&a);
    assert_eq!(lines.len(), 2);
    let masses = lines[1]["masses"].as_array().unwrap();
    let total: f64 = masses.iter().map(|m| m.as_f64().unwrap()).sum::<f64>() + lines[1]["defect"].as_f64().unwrap();
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn worker_count_does_not_change_output() {
    let base = ["sample", "kernel", "--samples", "12", "--time", "0.05", "--x", "0.7,0.3"];
    let one = flv(&base, &[]);
    let mut more = base.to_vec();
    more.extend(["--parallel", "3"]);
    let three = flv(&more, &[]);
    let strip = |o: &Output| json_lines(o)[1..].to_vec();
    assert!(one.status.success() && three.status.success());
    assert_eq!(strip(&one), strip(&three));
}

#[test]
fn eval_b_prints_twice_the_generator() {
    let out = flv(&["eval-b", "--alpha", "0.5", "--theta", "0", "--poly", "q[1]", "--x", "0.9,0.1"], &[]);
    assert!(out.status.success());
    let row = &json_lines(&out)[1];
    assert!((row["two_b"].as_f64().unwrap() + 1.28).abs() < 1e-12);
    assert!((row["two_b_direct"].as_f64().unwrap() + 1.28).abs() < 1e-12);
}

#[test]
fn verify_moments_reports_stationary_values() {
    let out = flv(&["verify", "moments", "--alpha", "0.5", "--theta", "0.5", "--samples", "2000"], &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let lines = json_lines(&out);
    assert_eq!(lines[1]["name"], "E[q_1]");
    assert!((lines[1]["reference"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-12);
    assert_eq!(lines[1]["pass"], true);
}

#[test]
fn failed_check_exits_one() {
    let out = flv(&["verify", "totalmass", "--samples", "100", "--ks-threshold", "1.0"], &[]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json_lines(&out)[1]["pass"], false);
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(flv(&["bogus"], &[]).status.code(), Some(2));
    assert_eq!(flv(&["sample", "pd", "--alpha", "1.5"], &[]).status.code(), Some(2));
    assert_eq!(flv(&["eval-b", "--x", "0.5"], &[]).status.code(), Some(2));
    assert_eq!(flv(&["eval-b", "--poly", "q[1]", "--x", "0.2,0.5"], &[]).status.code(), Some(2));
    let out = flv(&["sample", "besq", "--theta", "-0.5"], &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn flags_override_environment_over_defaults() {
    let header = |o: &Output| json_lines(o)[0]["config"].clone();
    let d = flv(&["sample", "pd", "--sticks", "3"], &[]);
    assert_eq!(header(&d)["alpha"], 0.5);
    let e = flv(&["sample", "pd", "--sticks", "3"], &[("FLV_ALPHA", "0.3"), ("FLV_SEED", "11")]);
    assert_eq!(header(&e)["alpha"], 0.3);
    assert_eq!(header(&e)["seed"], 11);
    let f = flv(&["sample", "pd", "--sticks", "3", "--alpha", "0.7"], &[("FLV_ALPHA", "0.3")]);
    assert_eq!(header(&f)["alpha"], 0.7);
}

#[test]
fn csv_to_file() {
    let path = std::env::temp_dir().join(format!("flv-cli-test-{}.csv", std::process::id()));
    let p = path.to_str().unwrap();
    let out = flv(&["simulate", "crp", "--customers", "5", "--steps", "4", "--format", "csv", "--out", p], &[]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::remove_file(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# command=simulate crp"));
    assert_eq!(lines[1], "path,step,tables,largest,sizes");
    assert_eq!(lines[2], "0,0,1,5,5");
    assert_eq!(lines.len(), 2 + 5);
}

#[test]
fn negative_theta_paths_run() {
    let out = flv(&["simulate", "fv", "--theta", "-0.25", "--horizon", "0.05", "--time", "0.025", "--x", "0.6,0.4"], &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let lines = json_lines(&out);
    assert_eq!(lines.len(), 1 + 3);
    for row in &lines[1..] {
        let atoms: f64 = row["masses"].as_array().unwrap().iter().map(|m| m.as_f64().unwrap()).sum();
        assert!((atoms + row["dust_mass"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn every_simulation_runs() {
    for what in ["sssp", "fv", "pdipe", "jacobi", "wf", "crp"] {
        let out = flv(&["simulate", what, "--horizon", "0.02", "--time", "0.01", "--step", "0.005", "--steps", "3"], &[]);
        assert!(out.status.success(), "{what}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(json_lines(&out).len() > 1, "{what}");
    }
    for what in ["pd", "pdrm", "pdip", "besq", "L", "Q", "kernel"] {
        let out = flv(&["sample", what, "--samples", "3", "--sticks", "20"], &[]);
        assert!(out.status.success(), "{what}: {}", String::from_utf8_lossy(&out.stderr));
        assert_eq!(json_lines(&out).len(), 4, "{what}");
    }
}
