use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use spreadid::harness::io::matrix_from_str;
use spreadid::linalg::frobenius;

fn spreadid(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spreadid"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn spark_of_random_disc_matrix_at_l5() {
    let dir = tempfile::tempdir().unwrap();
    let out = spreadid(&["spark", "--L", "5", "--probing", "random-disc", "--seed", "3"], dir.path());
    assert!(out.status.success());
    assert_eq!(stdout(&out), "spark = 6\n");
}

#[test]
fn counterexample_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["counterexample", "--L", "5", "--K", "1", "--seed", "7", "--out"];
    let mut first = args.to_vec();
    first.push("w1.json");
    let mut second = args.to_vec();
    second.push("w2.json");
    assert!(spreadid(&first, dir.path()).status.success());
    assert!(spreadid(&second, dir.path()).status.success());
    let a = fs::read(dir.path().join("w1.json")).unwrap();
    let b = fs::read(dir.path().join("w2.json")).unwrap();
    assert_eq!(a, b);
    let v: serde_json::Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(v["gamma"].as_array().unwrap().len(), 3);
    assert_eq!(v["gamma_prime"].as_array().unwrap().len(), 3);
    assert!(v["mismatch"].as_f64().unwrap() < 1e-9);
}

#[test]
fn gen_matrix_writes_readable_container() {
    let dir = tempfile::tempdir().unwrap();
    let out = spreadid(&["gen-matrix", "--L", "7", "--probing", "alltop"], dir.path());
    assert!(out.status.success());
    let a = matrix_from_str(&stdout(&out)).unwrap();
    assert_eq!(a.shape(), (7, 49));
    // every column has the norm of the unit-norm sequence
    for j in 0..49 {
        assert!((a.column(j).norm() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn simulate_then_recover_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("spec.json"),
        r#"{"l": 7, "e": 2, "d": 3, "probing": "random-disc", "seed": 5, "support": [[0, 1], [3, 2], [6, 6]]}"#,
    )
    .unwrap();
    let sim = spreadid(
        &["simulate", "--spec", "spec.json", "--out", "y.txt", "--probe-out", "c.txt", "--truth-out", "s.txt"],
        dir.path(),
    );
    assert!(sim.status.success(), "{}", String::from_utf8_lossy(&sim.stderr));
    for solver in ["music", "omp"] {
        let rec = spreadid(
            &[
                "recover", "--y", "y.txt", "--L", "7", "--E", "2", "--D", "3", "--probe", "c.txt", "--solver", solver,
                "--out", "r.json", "--spreading-out", "sh.txt",
            ],
            dir.path(),
        );
        assert!(rec.status.success(), "{}", String::from_utf8_lossy(&rec.stderr));
        let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
        assert_eq!(r["support_indices"], serde_json::json!([1, 23, 48]));
        let truth = matrix_from_str(&fs::read_to_string(dir.path().join("s.txt")).unwrap()).unwrap();
        let est = matrix_from_str(&fs::read_to_string(dir.path().join("sh.txt")).unwrap()).unwrap();
        assert!(frobenius(&(&est - &truth)) / frobenius(&truth) < 1e-9);
    }
}

#[test]
fn compressive_recover_reports_consumed_samples() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("spec.json"),
        r#"{"l": 5, "e": 1, "d": 1, "probing": "random-disc", "seed": 2, "support": [[0, 0], [1, 0]]}"#,
    )
    .unwrap();
    assert!(spreadid(&["simulate", "--spec", "spec.json", "--out", "y.txt", "--probe-out", "c.txt"], dir.path())
        .status
        .success());
    let rec = spreadid(
        &["recover", "--y", "y.txt", "--L", "5", "--E", "1", "--D", "1", "--probe", "c.txt", "--solver", "oracle", "--rows", "4"],
        dir.path(),
    );
    assert!(rec.status.success(), "{}", String::from_utf8_lossy(&rec.stderr));
    let r: serde_json::Value = serde_json::from_str(&stdout(&rec)).unwrap();
    assert_eq!(r["support_indices"], serde_json::json!([0, 5]));
    assert_eq!(r["diagnostics"]["consumed_samples"], serde_json::json!([0, 1, 2, 3]));
}

#[test]
fn sweep_writes_one_row_per_cell_and_is_thread_independent() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("c.json"),
        r#"{"L": 7, "ed_pairs": [[1, 1], [2, 2]], "probing": "random-disc", "solver": "music",
            "delta_grid": [0.3, 0.6], "snr_db": "inf", "trials": 4, "seed": 9}"#,
    )
    .unwrap();
    for (threads, name) in [("1", "r1.csv"), ("3", "r3.csv")] {
        let out = spreadid(
            &["sweep", "--config", "c.json", "--out", name, "--threads", threads, "--emit-trials", "t.csv"],
            dir.path(),
        );
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let r1 = fs::read_to_string(dir.path().join("r1.csv")).unwrap();
    let r3 = fs::read_to_string(dir.path().join("r3.csv")).unwrap();
    assert_eq!(r1, r3);
    let lines: Vec<&str> = r1.lines().collect();
    assert_eq!(lines.len(), 5);
    assert!(lines[0].starts_with("delta,gamma_card,e,d,ed,"));
    let trials = fs::read_to_string(dir.path().join("t.csv")).unwrap();
    assert_eq!(trials.lines().count(), 17);
}

#[test]
fn malformed_config_exits_1_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.json"), "{\n  \"L\": 5,\n  \"trials\": ten\n}\n").unwrap();
    let out = spreadid(&["sweep", "--config", "c.json", "--out", "r.csv"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn validation_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [&[&str]; 4] = [
        &["stability", "--L", "5", "--gamma", "0,99"],
        &["counterexample", "--L", "5", "--K", "0"],
        &["gen-matrix", "--L", "5", "--probing", "chirp"],
        &["no-such-command"],
    ];
    for args in cases {
        assert_eq!(spreadid(args, dir.path()).status.code(), Some(1), "{args:?}");
    }
}

#[test]
fn stability_reports_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let out = spreadid(&["stability", "--L", "5", "--seed", "1", "--gamma", "4"], dir.path());
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["gamma_card"], 1);
    assert!((v["alpha"].as_f64().unwrap() - v["beta"].as_f64().unwrap()).abs() < 1e-12);
}
