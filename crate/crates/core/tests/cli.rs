use std::path::Path;
use std::process::{Command, Output};

fn rcm(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rcm-align"))
        .args(args)
        .current_dir(dir)
        .env_remove("RCM_ALIGN_SEED")
        .output()
        .unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn full_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let steps: &[&[&str]] = &[
        &[
            "simulate",
            "--seed",
            "1",
            "--free-space",
            "--duration",
            "40",
            "-o",
            "free.csv",
        ],
        &[
            "train",
            "--dataset",
            "free.csv",
            "--model",
            "model.json",
            "--report",
            "train.json",
        ],
        &[
            "simulate",
            "--seed",
            "2",
            "--d-true-mm",
            "40",
            "--duration",
            "30",
            "-o",
            "tel.csv",
        ],
        &[
            "estimate-force",
            "--dataset",
            "tel.csv",
            "--model",
            "model.json",
            "--d-mm",
            "40",
            "-o",
            "f.csv",
        ],
        &[
            "estimate-d",
            "--dataset",
            "tel.csv",
            "--model",
            "model.json",
            "--d-star-mm",
            "40",
            "--report",
            "d.json",
        ],
    ];
    for args in steps {
        let out = rcm(d, args);
        assert!(
            out.status.success(),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    assert_eq!(json(&d.join("train.json"))["status"], "ok");
    let report = json(&d.join("d.json"));
    let d_hat = report["result"]["d_hat"].as_f64().unwrap();
    assert!((d_hat - 0.040).abs() < 0.005, "{report}");
    assert!(d.join("tel.csv.cfg").exists());
    let forces = std::fs::read_to_string(d.join("f.csv")).unwrap();
    assert!(forces.starts_with("t,fx_hat,fy_hat,fz_hat,fx,fy,fz\n"));
}

#[test]
fn report_goes_to_stdout_without_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = rcm(dir.path(), &["simulate", "--duration", "1", "-o", "a.csv"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["samples"], 200);
}

#[test]
fn errors_exit_two_with_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = rcm(
        dir.path(),
        &["estimate-d", "--dataset", "missing.csv", "--report", "r.json"],
    );
    assert_eq!(out.status.code(), Some(2));
    let v = json(&dir.path().join("r.json"));
    assert_eq!(v["status"], "error");
    assert!(v["error"].as_str().unwrap().contains("missing.csv"));

    let out = rcm(dir.path(), &["estimate-force", "--d-mm", "30"]);
    assert_eq!(out.status.code(), Some(2));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["status"], "error");
}

#[test]
fn train_refuses_contact_data() {
    let dir = tempfile::tempdir().unwrap();
    assert!(rcm(dir.path(), &["simulate", "--duration", "5", "-o", "c.csv"])
        .status
        .success());
    let out = rcm(dir.path(), &["train", "--dataset", "c.csv", "--model", "m.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("m.json").exists());
}

#[test]
fn disjoint_stiffness_ranges_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for (name, k) in [("a.csv", "600"), ("b.csv", "1500")] {
        let out = rcm(
            d,
            &[
                "simulate",
                "--kind",
                "pivot",
                "--theta-star-deg",
                "30",
                "--d-true-mm",
                "30",
                "--k-true",
                k,
                "--noise-free",
                "--duration",
                "10",
                "--sample-rate",
                "50",
                "-o",
                name,
            ],
        );
        assert!(out.status.success());
    }
    let out = rcm(
        d,
        &[
            "calibrate-k",
            "--pivot",
            "a.csv:30:30",
            "--pivot",
            "b.csv:30:30",
            "--report",
            "k.json",
        ],
    );
    assert_eq!(
        out.status.code(),
        Some(1),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v = json(&d.join("k.json"));
    assert_eq!(v["status"], "failed");
    assert!(v["error"].is_string());
    let ranges: Vec<_> = v["configurations"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["range"].clone())
        .collect();
    assert_eq!(ranges.len(), 2);
    assert!(ranges[0]["upper"].as_f64().unwrap() < ranges[1]["lower"].as_f64().unwrap());
}

#[test]
fn config_file_and_seed_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("run.cfg"), "seed = 5\nduration = 2\nd_true = 0.02\n").unwrap();
    let run = |extra: &[&str], env: Option<&str>, out: &str| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_rcm-align"));
        cmd.args(["simulate", "--config", "run.cfg", "-o", out])
            .args(extra)
            .current_dir(d);
        match env {
            Some(v) => cmd.env("RCM_ALIGN_SEED", v),
            None => cmd.env_remove("RCM_ALIGN_SEED"),
        };
        assert!(cmd.output().unwrap().status.success());
        std::fs::read_to_string(d.join(format!("{out}.cfg"))).unwrap()
    };
    let file_only = run(&[], None, "a.csv");
    assert!(file_only.contains("traj_seed = 5") && file_only.contains("d_true = 0.02"));
    assert!(run(&[], Some("9"), "b.csv").contains("traj_seed = 9"));
    let cli = run(&["--seed", "11", "--d-true-mm", "35"], Some("9"), "c.csv");
    assert!(cli.contains("traj_seed = 11") && cli.contains("d_true = 0.035"));
}

#[test]
fn sweep_to_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let out = rcm(dir.path(), &["sweep", "--theta-deg", "0,45", "--d-mm", "20"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines[0], "d,theta,force");
    assert_eq!(lines.len(), 3);
    let f: f64 = lines[2].rsplit(',').next().unwrap().parse().unwrap();
    assert!((f - 900.0 * 0.020 * f64::to_radians(45.0).sin()).abs() < 1e-9);
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.cfg"), "k_ture = 900\n").unwrap();
    let out = rcm(dir.path(), &["sweep", "--config", "bad.cfg", "-o", "s.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("k_ture"));
}
