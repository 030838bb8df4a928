use std::fs;
use std::process::{Command, Output};

use zorich::io::{read_pgm, CsvTable, Ledger};

fn zorich(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zorich"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn calibrate_writes_a_valid_ledger() {
    let o = zorich(&["calibrate"]);
    assert!(o.status.success());
    let ledger = Ledger::from_json_str(&stdout(&o)).unwrap();
    assert!(ledger.m < ledger.m_upper);
    assert!((ledger.a - (ledger.m_upper.exp() - ledger.m)).abs() <= 1e-12 * ledger.a);
    ledger.to_calibration().unwrap();
}

#[test]
fn larger_alpha_lowers_m_upper() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"alpha": 0.9}"#).unwrap();
    let hi = Ledger::from_json_str(&stdout(&zorich(&["--config", cfg.to_str().unwrap(), "calibrate"]))).unwrap();
    let lo = Ledger::from_json_str(&stdout(&zorich(&["calibrate"]))).unwrap();
    assert!(hi.m_upper < lo.m_upper);
}

#[test]
fn small_a_override_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"a_override": 2.0}"#).unwrap();
    let o = zorich(&["--config", cfg.to_str().unwrap(), "calibrate"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("infeasible"));
}

#[test]
fn hair_csv_has_one_converged_row_per_sample() {
    let o = zorich(&[
        "hair",
        "--address",
        r#"{"prefix":[],"tail":{"periodic":[[0,0]]}}"#,
        "--t-min",
        "0.5",
        "--t-max",
        "2",
        "--samples",
        "64",
        "--strict",
    ]);
    assert!(o.status.success());
    let table = CsvTable::parse(&stdout(&o)).unwrap();
    assert_eq!(table.header.join(","), "t,x1,x2,x3,dx1,dx2,dx3,k,c0_err,c1_err,flags");
    assert_eq!(table.rows.len(), 64);
    let flags = table.column("flags").unwrap();
    assert!(table.rows.iter().all(|r| r[flags].is_empty()));
    assert_eq!(table.float(63, "t").unwrap(), 2.0);
}

#[test]
fn odd_entries_are_rejected() {
    let o = zorich(&["hair", "--address", r#"{"prefix":[[1,0]],"tail":{"periodic":[[0,0]]}}"#, "--t-min", "1", "--t-max", "2"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("not in S"));
}

#[test]
fn endpoint_sample_is_marked() {
    let o = zorich(&[
        "hair",
        "--address",
        r#"{"prefix":[],"tail":{"growth":{"tau":0.5,"dir":[1,0]}}}"#,
        "--t-min",
        "1",
        "--t-max",
        "1.5",
        "--samples",
        "2",
        "--endpoint",
    ]);
    assert!(o.status.success());
    let table = CsvTable::parse(&stdout(&o)).unwrap();
    assert_eq!(table.rows.len(), 3);
    assert!((table.float(0, "t").unwrap() - 0.5).abs() <= 1e-6);
    let flags = table.column("flags").unwrap();
    assert!(table.rows[0][flags].contains("endpoint"));
}

#[test]
fn below_t_s_is_an_error() {
    let o = zorich(&["hair", "--address", r#"{"prefix":[],"tail":{"growth":{"tau":1,"dir":[1,0]}}}"#, "--t-min", "0.5", "--t-max", "2"]);
    assert!(!o.status.success());
}

#[test]
fn tsub_reports_the_growth_rate() {
    let o = zorich(&["tsub", "--address", r#"{"prefix":[],"tail":{"growth":{"tau":1,"dir":[0,-1]}}}"#]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["t_s"].as_f64().unwrap() - 1.0).abs() <= 1e-6);
    assert_eq!(v["admissible"], true);
}

#[test]
fn convergence_table_and_strict_rate() {
    let o = zorich(&["hair-convergence", "--t", "1", "--k-min", "1", "--k-max", "20", "--strict"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = CsvTable::parse(&stdout(&o)).unwrap();
    assert_eq!(table.header.join(","), "k,c0,c1");
    assert_eq!(table.rows.len(), 20);
    assert!(table.float(0, "c0").unwrap() > table.float(2, "c0").unwrap());
    assert!(!zorich(&["hair-convergence", "--t", "1", "--k-max", "3"]).status.success());
}

#[test]
fn orbit_csv_follows_the_map() {
    let o = zorich(&["orbit", "--point", "0.1,-0.2,3", "--budget", "5"]);
    assert!(o.status.success());
    let table = CsvTable::parse(&stdout(&o)).unwrap();
    assert_eq!(table.header.join(","), "step,x1,x2,x3,height,tract_r,omega");
    assert_eq!(table.rows[0][table.column("tract_r").unwrap()], "0;0");
    assert!(String::from_utf8_lossy(&o.stderr).contains("HEIGHT_OVERFLOW"));
    assert!(!zorich(&["orbit", "--point", "1,2"]).status.success());
}

#[test]
fn slice_writes_pgm() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.pgm");
    let o = zorich(&["slice", "--width", "24", "--height", "12", "--budget", "16", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let img = read_pgm(&fs::read(&out).unwrap()).unwrap();
    assert_eq!((img.width, img.height), (24, 12));
    assert!(img.pixels.contains(&0));
    assert!(!zorich(&["slice", "--axis", "2"]).status.success());
}

#[test]
fn lemma_check_uses_ledger_constants() {
    let dir = tempfile::tempdir().unwrap();
    let ledger = dir.path().join("l.json");
    assert!(zorich(&["calibrate", "--sample", "--out", ledger.to_str().unwrap()]).status.success());
    let l = Ledger::from_json_str(&fs::read_to_string(&ledger).unwrap()).unwrap();
    let sampled = l.sampled.expect("sampled constants recorded");
    let o = zorich(&["--ledger", ledger.to_str().unwrap(), "lemma-check", "--k", "2", "--t", "0.5"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["constants"]["c4"].as_f64().unwrap(), sampled.c4);
    assert_eq!(v["report"]["holds"], true);
}

#[test]
fn verify_is_deterministic_and_passes() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    assert!(zorich(&["verify", "--seed", "7", "--out", a.to_str().unwrap()]).status.success());
    assert!(zorich(&["verify", "--seed", "7", "--out", b.to_str().unwrap()]).status.success());
    let (ra, rb) = (fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(ra, rb);
    let v: serde_json::Value = serde_json::from_slice(&ra).unwrap();
    assert_eq!(v["all_hard_passed"], true);
    assert_eq!(v["seed"], 7);
    let names: Vec<_> = v["report_only"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    assert!(names.contains(&"sampled_constants") && names.contains(&"omega_fraction"));
}

#[test]
fn corrupted_ledger_fails_verify() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("l.json");
    let mut l = Ledger::from_json_str(&stdout(&zorich(&["calibrate"]))).unwrap();
    l.m = l.m_upper + 1.0;
    fs::write(&path, l.to_json_string().unwrap()).unwrap();
    let o = zorich(&["--ledger", path.to_str().unwrap(), "verify"]);
    assert!(!o.status.success());
    assert!(o.stdout.is_empty());
}
