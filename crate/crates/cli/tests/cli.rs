use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn opsample(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_opsample"))
        .args(args)
        .env_remove("OPSAMPLE_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const STAIRCASE: &str = r#"{"T": 1.0, "L": 3, "P": 4, "cells": [[0, 0], [1, 0], [2, 1]]}"#;

#[test]
fn gen_window_certifies_spark() {
    let o = opsample(&["gen-window", "--L", "5", "--target", "full", "--seed", "1"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.trim_end().ends_with("spark=6"));
    let json: Value = serde_json::from_str(text.rsplit_once("spark=").unwrap().0).unwrap();
    assert_eq!(json["L"], 5);
    assert_eq!(json["seed"], 1);

    let one = opsample(&["gen-window", "--L", "1"]);
    assert!(stdout(&one).contains("spark=2"));

    let bad = opsample(&["gen-window", "--L", "4", "--target", "spark_k", "--k", "2"]);
    assert_eq!(bad.status.code(), Some(2));
    let missing = opsample(&["gen-window"]);
    assert_eq!(missing.status.code(), Some(2));
    let failed = opsample(&["gen-window", "--L", "3", "--max-draws", "0"]);
    assert_eq!(failed.status.code(), Some(3));
}

#[test]
fn seed_falls_back_to_environment() {
    let run = |env: Option<&str>, args: &[&str]| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_opsample"));
        c.args(args).env_remove("OPSAMPLE_SEED");
        if let Some(v) = env {
            c.env("OPSAMPLE_SEED", v);
        }
        c.output().unwrap().stdout
    };
    let from_env = run(Some("7"), &["gen-window", "--L", "3"]);
    let from_flag = run(None, &["gen-window", "--L", "3", "--seed", "7"]);
    assert_eq!(from_env, from_flag);
    assert_ne!(from_env, run(None, &["gen-window", "--L", "3"]));
}

#[test]
fn rectify_reports_classes() {
    let dir = tempfile::tempdir().unwrap();
    let single = dir.path().join("single.json");
    std::fs::write(&single, r#"{"T": 1.0, "L": 3, "P": 4, "cells": [[1, 2]]}"#).unwrap();
    let o = opsample(&["rectify", "--support", p(&single)]);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["num_classes"], 1);

    let stair = dir.path().join("stair.json");
    std::fs::write(&stair, STAIRCASE).unwrap();
    let v: Value = serde_json::from_slice(&opsample(&["rectify", "--support", p(&stair)]).stdout).unwrap();
    assert_eq!(v["exact_cover"], true);
    assert!((v["bandwidth"].as_f64().unwrap() - v["omega"].as_f64().unwrap()).abs() < 1e-12);

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"T": 1.0, "L": 2, "P": 2, "cells": [[0, 0], [0, 1], [1, 0]]}"#).unwrap();
    assert_eq!(opsample(&["rectify", "--support", p(&bad)]).status.code(), Some(2));
    let absent = dir.path().join("absent.json");
    assert_eq!(opsample(&["rectify", "--support", p(&absent)]).status.code(), Some(4));
}

#[test]
fn simulate_identify_verify_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = |name: &str| dir.path().join(name);
    std::fs::write(d("s.json"), STAIRCASE).unwrap();
    assert!(opsample(&["gen-window", "--L", "3", "--seed", "2", "--out", p(&d("w.json"))]).status.success());
    let sim = |tag: &str| {
        let o = opsample(&[
            "simulate", "--seed", "5", "--support", p(&d("s.json")), "--window", p(&d("w.json")),
            "--response", p(&d(&format!("r{tag}.csv"))), "--zak", p(&d(&format!("z{tag}.csv"))),
            "--eta-out", p(&d(&format!("eta{tag}.csv"))),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    };
    sim("");
    sim("2");
    for f in ["r", "z", "eta"] {
        assert_eq!(std::fs::read(d(&format!("{f}.csv"))).unwrap(), std::fs::read(d(&format!("{f}2.csv"))).unwrap());
    }

    let v = opsample(&["verify", "--eta", p(&d("eta.csv")), "--window", p(&d("w.json")), "--response", p(&d("r.csv"))]);
    assert!(v.status.success());
    assert!(stdout(&v).contains(" ok"));

    let o = opsample(&[
        "identify", "--window", p(&d("w.json")), "--response", p(&d("r.csv")), "--support", p(&d("s.json")),
        "--truth", p(&d("eta.csv")), "--eta-out", p(&d("hat.csv")), "--report", p(&d("rep.json")),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rep: Value = serde_json::from_str(&std::fs::read_to_string(d("rep.json")).unwrap()).unwrap();
    assert_eq!(rep["formula"], "sharp");
    assert!(rep["relative_l2_error"].as_f64().unwrap() <= 1e-9);
    assert!(d("hat.csv").exists());

    let missing = opsample(&["identify", "--window", p(&d("w.json")), "--response", p(&d("r.csv"))]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn zero_spreading_function_gives_zero_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = |name: &str| dir.path().join(name);
    std::fs::write(d("s.json"), r#"{"T": 1.0, "L": 2, "P": 2, "cells": [[0, 0]]}"#).unwrap();
    std::fs::write(d("w.json"), r#"{"L": 2, "weights": [[1.0, 0.0], [0.5, 0.5]], "seed": null}"#).unwrap();
    std::fs::write(d("eta.csv"), "# T=1,L=2,P=2\ni,j,re,im\n0,0,0,0\n").unwrap();
    let o = opsample(&[
        "simulate", "--support", p(&d("s.json")), "--window", p(&d("w.json")), "--eta", p(&d("eta.csv")),
        "--response", p(&d("r.csv")), "--zak", p(&d("z.csv")),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["r.csv", "z.csv"] {
        let text = std::fs::read_to_string(d(f)).unwrap();
        for line in text.lines().skip(2) {
            let fields: Vec<&str> = line.split(',').collect();
            let n = fields.len();
            assert_eq!(fields[n - 2].parse::<f64>().unwrap(), 0.0);
            assert_eq!(fields[n - 1].parse::<f64>().unwrap(), 0.0);
        }
    }
}

#[test]
fn chirp_and_unknown_support_modes() {
    let dir = tempfile::tempdir().unwrap();
    let d = |name: &str| dir.path().join(name);
    std::fs::write(d("s.json"), STAIRCASE).unwrap();
    opsample(&["gen-window", "--L", "3", "--out", p(&d("w.json"))]);
    let bad = opsample(&[
        "simulate", "--support", p(&d("s.json")), "--window", p(&d("w.json")), "--chirp", "0.25",
        "--response", p(&d("r.csv")),
    ]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("chirp"));

    std::fs::write(d("two.json"), r#"{"T": 1.0, "L": 5, "P": 4, "cells": [[0, 3], [2, 1]]}"#).unwrap();
    opsample(&["gen-window", "--L", "5", "--seed", "4", "--out", p(&d("w5.json"))]);
    let o = opsample(&[
        "simulate", "--support", p(&d("two.json")), "--window", p(&d("w5.json")), "--response", p(&d("r5.csv")),
        "--eta-out", p(&d("eta5.csv")),
    ]);
    assert!(o.status.success());
    let o = opsample(&[
        "identify", "--unknown-support", "--kmax", "2", "--window", p(&d("w5.json")), "--response",
        p(&d("r5.csv")), "--truth", p(&d("eta5.csv")),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rep: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(rep["gamma"], serde_json::json!([[0, 3], [2, 1]]));
    assert!(rep["relative_l2_error"].as_f64().unwrap() <= 1e-9);

    let o = opsample(&["recover-support", "--kmax", "1", "--window", p(&d("w5.json")), "--response", p(&d("r5.csv"))]);
    assert_eq!(o.status.code(), Some(3));
    let o = opsample(&[
        "recover-support", "--window", p(&d("w5.json")), "--response", p(&d("r5.csv")), "--support-out",
        p(&d("est.json")),
    ]);
    assert!(o.status.success());
    assert!(std::fs::read_to_string(d("est.json")).unwrap().contains("\"cells\""));
}

#[test]
fn rates_and_bunched_plan() {
    let dir = tempfile::tempdir().unwrap();
    let d = |name: &str| dir.path().join(name);
    std::fs::write(d("s.json"), STAIRCASE).unwrap();
    opsample(&["gen-window", "--L", "3", "--out", p(&d("w.json"))]);
    let v: Value =
        serde_json::from_slice(&opsample(&["rates", "--support", p(&d("s.json")), "--window", p(&d("w.json"))]).stdout)
            .unwrap();
    assert_eq!(v["necessary_ok"], true);

    std::fs::write(d("small.json"), r#"{"T": 1.0, "L": 7, "P": 2, "cells": [[1, 1], [4, 2]]}"#).unwrap();
    let o = opsample(&["rates", "--bunched", "--support", p(&d("small.json")), "--window-out", p(&d("b.json"))]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["sufficient_margin"].as_f64().unwrap() > 0.0);
    assert!(v.get("dead_time_fraction").is_some());
    assert!(d("b.json").exists());
    let o = opsample(&["rates", "--bunched", "--eps", "0", "--support", p(&d("small.json"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn spark_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let w = dir.path().join("w.json");
    opsample(&["gen-window", "--L", "3", "--out", p(&w)]);
    let o = opsample(&["spark", "--window", p(&w), "--threads", "1"]);
    assert_eq!(stdout(&o).trim(), "spark=4");
    let o = opsample(&["spark", "--window", p(&w), "--at-least", "4"]);
    assert_eq!(stdout(&o).trim(), "spark>=4: true");
}
