use std::path::PathBuf;
use std::process::{Command, Output};

use hdanova::dgp::{gen_panel, DgpKind, DgpSpec, Shift};
use hdanova::harness::{parse_report, ReportFormat};
use hdanova::panel::save_panel;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_hdanova"));
    cmd.env_remove("HDANOVA_THREADS");
    cmd
}

fn temp(name: &str) -> PathBuf {
    std::env::temp_dir().join(format!("hdanova-cli-{}-{name}", std::process::id()))
}

fn panel_file(name: &str, shift: Shift) -> PathBuf {
    let spec = DgpSpec {
        kind: DgpKind::Independent,
        lengths: vec![60, 70],
        dim: 12,
        shift,
        burn_in: 200,
        seed: 4,
    };
    let (panel, _) = gen_panel(&spec).unwrap();
    let path = temp(name);
    save_panel(&panel, &path).unwrap();
    path
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("JSON on stdout")
}

#[test]
fn test_exit_codes() {
    let shifted = panel_file("shifted.csv", Shift::Uniform(5.0));
    let out = bin().args(["test", "--B", "3", "--B1", "6", "--H", "5", "--input"]).arg(&shifted).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    let report = stdout_json(&out);
    assert_eq!(report["reject"], true);
    assert_eq!(report["schema_version"], 1);

    let null = panel_file("null.csv", Shift::None);
    let out = bin().args(["test", "--B", "3", "--B1", "6", "--H", "5", "--input"]).arg(&null).output().unwrap();
    let report = stdout_json(&out);
    let code = out.status.code().unwrap();
    assert_eq!(code == 3, report["reject"] == true);
    assert!(code == 0 || code == 3);

    let out = bin().args(["test", "--input", "/nonexistent/panel.csv"]).output().unwrap();
    let code = out.status.code().unwrap();
    assert!(code != 0 && code != 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));

    let out = bin().args(["test", "--alpha", "2", "--input"]).arg(&null).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    std::fs::remove_file(shifted).unwrap();
    std::fs::remove_file(null).unwrap();
}

#[test]
fn test_is_reproducible_and_seeded() {
    let path = panel_file("seeded.csv", Shift::None);
    let run = |seed: &str| {
        let out = bin().args(["test", "--auto-bandwidth", "--seed", seed, "--input"]).arg(&path).output().unwrap();
        let mut v = stdout_json(&out);
        v["wall_time_ms"] = serde_json::Value::Null;
        v
    };
    let a = run("9");
    assert_eq!(a, run("9"));
    assert_eq!(a["auto_bandwidth"], true);
    assert_ne!(a["quantile"], run("10")["quantile"]);
    std::fs::remove_file(path).unwrap();
}

#[test]
fn malformed_csv_is_an_error() {
    let path = temp("bad.csv");
    std::fs::write(&path, "group,time,x1\n1,1,0.5\n1,2,NaN\n1,3,1\n2,1,1\n2,2,1\n2,3,1\n").unwrap();
    let out = bin().args(["test", "--input"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("malformed"));
    std::fs::remove_file(path).unwrap();
}

#[test]
fn bandwidth_and_variance_reports() {
    let path = panel_file("bw.csv", Shift::None);
    let out = bin().args(["bandwidth", "--input"]).arg(&path).output().unwrap();
    assert!(out.status.success());
    let v = stdout_json(&out);
    let (b, b1) = (v["B"].as_u64().unwrap(), v["B1"].as_u64().unwrap());
    assert!(b < b1 && b1 < 60);
    assert!(v["H"].as_f64().unwrap() >= 2.0);

    let out = bin()
        .args(["diagnose-variance", "--B", "3", "--B1", "6", "--H", "4", "--input"])
        .arg(&path)
        .output()
        .unwrap();
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert_eq!(v["groups"].as_array().unwrap().len(), 2);
    assert!(v["groups"][0]["value"].as_f64().unwrap() >= 0.0);

    let out = bin()
        .args(["diagnose-variance", "--format", "csv", "--input"])
        .arg(&path)
        .output()
        .unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.starts_with("group,B,B1,H,scale,value"));
    std::fs::remove_file(path).unwrap();
}

#[test]
fn simulate_formats_and_thread_env() {
    let run = |format: &str, threads: Option<&str>| {
        let mut cmd = bin();
        cmd.args(["simulate", "--fast", "--kind", "nonlinear", "--format", format, "--seed", "3"]);
        if let Some(t) = threads {
            cmd.env("HDANOVA_THREADS", t);
        }
        let out = cmd.output().unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        String::from_utf8(out.stdout).unwrap()
    };
    let json = run("json", Some("1"));
    assert_eq!(json, run("json", Some("4")));
    let rows = parse_report(&json, ReportFormat::Json).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].replicates, 50);
    assert_eq!(rows[0].lengths, vec![80, 80]);

    let csv = run("csv", None);
    let csv_rows = parse_report(&csv, ReportFormat::Csv).unwrap();
    assert_eq!(csv_rows, rows);
}

#[test]
fn simulate_sweep_file() {
    let cfg = temp("sweep.toml");
    std::fs::write(
        &cfg,
        "[experiment.1]\nkind = \"independent\"\nlengths = [40, 50]\ndim = 10\nreplicates = 5\nboot_count = 20\nB = 3\nB1 = 6\nH = 4\n\n\
         [experiment.2]\nkind = \"moving-average\"\nshift = \"uniform:1\"\nlengths = [40, 50, 45]\ndim = 10\nreplicates = 5\nboot_count = 20\nB = 8\nB1 = 12\nH = 4\n",
    )
    .unwrap();
    let report = temp("sweep.csv");
    let out = bin()
        .args(["simulate", "--format", "csv", "--threads", "2", "--config"])
        .arg(&cfg)
        .arg("--output")
        .arg(&report)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = parse_report(&std::fs::read_to_string(&report).unwrap(), ReportFormat::Csv).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].kind, DgpKind::Independent);
    assert_eq!(rows[1].lengths, vec![40, 50, 45]);
    assert_eq!(rows[1].rate, 1.0);

    std::fs::write(&cfg, "[experiment.1]\nkind = \"garch\"\n").unwrap();
    let out = bin().args(["simulate", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    std::fs::remove_file(cfg).unwrap();
    std::fs::remove_file(report).unwrap();
}

#[test]
fn zero_threads_rejected() {
    let out = bin().args(["simulate", "--fast", "--threads", "0"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
