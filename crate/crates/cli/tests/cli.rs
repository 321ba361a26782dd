use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn summit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_summit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn short_run(out: &Path, seed: &str) -> Output {
    summit(&[
        "run",
        "--scenario",
        "1",
        "--seed",
        seed,
        "--duration",
        "900",
        "--svg",
        "--out",
        out.to_str().unwrap(),
    ])
}

#[test]
fn run_writes_every_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = short_run(dir.path(), "7");
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for name in [
        "journal.tsv",
        "traces.tsv",
        "behavior_points.tsv",
        "general_overview.csv",
        "groups.csv",
        "context_transitions.csv",
        "sat_solver.csv",
        "context_sharing.csv",
        "weather_threats.csv",
        "spatial_proximity.csv",
        "dumps.csv",
        "dumps.json",
        "sim_events.tsv",
        "summary.json",
    ] {
        assert!(dir.path().join(name).is_file(), "missing {name}");
    }
    let frames = fs::read_dir(dir.path().join("frames")).unwrap().count();
    assert_eq!(frames, 3);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["traces"]["rejected"], 0);
}

#[test]
fn same_seed_gives_identical_journals() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert!(short_run(a.path(), "3").status.success());
    assert!(short_run(b.path(), "3").status.success());
    let ja = fs::read(a.path().join("journal.tsv")).unwrap();
    let jb = fs::read(b.path().join("journal.tsv")).unwrap();
    assert!(!ja.is_empty());
    assert_eq!(ja, jb);
}

#[test]
fn generated_traces_pass_the_checker() {
    let dir = tempfile::tempdir().unwrap();
    assert!(short_run(dir.path(), "11").status.success());
    let traces = dir.path().join("traces.tsv");
    let o = summit(&["lang", "check", traces.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn checker_rejects_a_malformed_sentence() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.tsv");
    fs::write(&path, "T1\tE2;E3;\nT2\tE2E6m;\n").unwrap();
    let o = summit(&["lang", "check", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("1 of 2 traces accepted"));
}

#[test]
fn unknown_scenario_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = summit(&[
        "run",
        "--scenario",
        "9",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_input_file_is_a_usage_error() {
    let o = summit(&["lang", "check", "/nonexistent/traces.tsv"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn dump_dfa_reports_five_states() {
    let o = summit(&["lang", "dump-dfa"]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("states 5\n"));
}

fn categories(dir: &Path) -> Vec<(String, u64)> {
    let mut r = csv::Reader::from_path(dir.join("categories.csv")).unwrap();
    r.records()
        .map(|rec| {
            let rec = rec.unwrap();
            (rec[0].to_string(), rec[1].parse().unwrap())
        })
        .collect()
}

#[test]
fn preliminary_writes_forty_eight_rows_and_orders_categories() {
    let dir = tempfile::tempdir().unwrap();
    let o = summit(&[
        "preliminary",
        "--seeds",
        "30",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv::Reader::from_path(dir.path().join("preliminary.csv"))
        .unwrap()
        .records()
        .count();
    assert_eq!(rows, 48);
    let c = categories(dir.path());
    let get = |name: &str| c.iter().find(|(n, _)| n == name).unwrap().1;
    assert!(get("Relations") > get("Activity"));
    assert!(get("Relations") > get("Location"));
}

#[test]
fn preliminary_with_no_tourists_counts_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let o = summit(&[
        "preliminary",
        "--peak",
        "0",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert!(categories(dir.path()).iter().all(|(_, n)| *n == 0));
}
