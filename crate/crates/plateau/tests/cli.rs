use std::process::{Command, Output};

fn plateau(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_plateau")).args(args).env_remove("PLATEAU_SEED").output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

#[test]
fn two_samples_is_enough_to_run() {
    let o = plateau(&["variance", "--samples", "2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o).lines().count(), 1 + 5);
}

#[test]
fn identities_report_design_constants() {
    let o = plateau(&["identities", "--D", "3", "--d", "2", "--which", "tree", "--samples", "2000"]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    let value = |name: &str| -> f64 {
        let line = out.lines().find(|l| l.starts_with(&format!("{name},"))).unwrap();
        line.split(',').nth(1).unwrap().parse().unwrap()
    };
    assert_eq!(value("q"), 35.0);
    assert!((value("xi") - 9.0 / 35.0).abs() < 1e-15);
    assert!((value("eta") - 16.0 / 35.0).abs() < 1e-15);
}

#[test]
fn swap_twirl_has_no_error() {
    let o = plateau(&["identities", "--which", "twirl", "--x", "swap", "--samples", "20"]);
    assert_eq!(code(&o), 0);
    let line = stdout(&o).lines().find(|l| l.starts_with("twirl,")).unwrap().to_string();
    let err: f64 = line.split(',').nth(5).unwrap().parse().unwrap();
    assert!(err < 1e-13);
}

#[test]
fn failed_check_exits_one() {
    // two draws cannot reproduce a random twirl
    let o = plateau(&["identities", "--which", "twirl", "--samples", "2"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("[FAIL] twirl"));
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let layout = dir.path().join("layout.txt");
    std::fs::write(&layout, "qubits = 3\ngate 0 7\n").unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "samples = 10\nnot_a_key = 1\n").unwrap();
    for args in [
        vec!["circuit", "--layout-file", layout.to_str().unwrap()],
        vec!["variance", "--config", cfg.to_str().unwrap()],
        vec!["variance", "--case", "diagonal"],
        vec!["variance", "--n", "4:2"],
        vec!["haar-epsilon", "--seed", "-3"],
        vec!["circuit", "--O", "W"],
        vec!["identities", "--no-such-flag"],
    ] {
        let o = plateau(&args);
        assert_eq!(code(&o), 2, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn circuit_identity_observable_has_zero_variance() {
    let o = plateau(&["circuit", "--O", "I", "--samples", "500"]);
    assert_eq!(code(&o), 0);
    let row = stdout(&o).lines().nth(1).unwrap().to_string();
    let var: f64 = row.split(',').nth(4).unwrap().parse().unwrap();
    assert!(var < 1e-20);
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# small run\nsamples = 20\nn = 3\nseed = 4\n").unwrap();
    let o = plateau(&["variance", "--config", cfg.to_str().unwrap(), "--samples", "30"]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    let row: Vec<&str> = out.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[0], "3");
    assert_eq!(row[5], "30");
    assert_eq!(row[6], "7"); // per-n seed is base + n
}

#[test]
fn seed_env_is_only_a_default() {
    let run = |env: Option<&str>, args: &[&str]| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_plateau"));
        c.args(["haar-epsilon", "--n", "2", "--samples", "50"]).args(args).env_remove("PLATEAU_SEED");
        if let Some(v) = env {
            c.env("PLATEAU_SEED", v);
        }
        String::from_utf8(c.output().unwrap().stdout).unwrap()
    };
    assert_eq!(run(Some("12"), &[]), run(None, &["--seed", "12"]));
    assert_eq!(run(Some("12"), &["--seed", "3"]), run(None, &["--seed", "3"]));
    assert_ne!(run(Some("12"), &[]), run(None, &[]));
}

#[test]
fn verify_and_workers_agree() {
    let o = plateau(&["variance", "--n", "2:3", "--samples", "600", "--workers", "3", "--verify"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stderr).contains("byte-identical"));
    let one = plateau(&["circuit", "--samples", "600", "--workers", "1"]);
    let four = plateau(&["circuit", "--samples", "600", "--workers", "4"]);
    assert_eq!(stdout(&one), stdout(&four));
}

#[test]
fn json_record_tags_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.json");
    let o = plateau(&["variance", "--n", "2", "--samples", "100", "--format", "json", "--output", path.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(o.stdout.is_empty());
    let rec: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(rec["command"], "variance");
    assert_eq!(rec["seed"]["value"], 0);
    assert_eq!(rec["config"]["samples"], "100");
    let point = &rec["points"][0];
    assert_eq!(point["var_emp"]["provenance"], "empirical");
    assert_eq!(point["var_analytic"]["provenance"], "analytic");
    assert_eq!(point["n"]["provenance"], "config");
    assert_eq!(rec["wall_time_s"]["provenance"], "measured");
    let keys: Vec<&String> = rec.as_object().unwrap().keys().collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
}

#[test]
fn csv_numbers_round_trip() {
    let o = plateau(&["haar-epsilon", "--n", "1:2", "--samples", "100"]);
    let out = stdout(&o);
    let closed: Vec<f64> = out.lines().skip(1).map(|l| l.split(',').nth(3).unwrap().parse().unwrap()).collect();
    assert_eq!(closed, vec![2.0 / 3.0, 0.4]);
}
