use std::path::PathBuf;
use std::process::{Command, Output};

use gpm_cli::{emit_metrics, exit_code, parse_json, OutputFormat, Record, CSV_HEADER};
use gpm_core::Error;

fn gpm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gpm")).args(args).output().expect("binary runs")
}

fn data(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "failed: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn records(args: &[&str]) -> Vec<Record> {
    let mut full = args.to_vec();
    full.extend(["--output", "json"]);
    parse_json(&stdout(&gpm(&full))).unwrap()
}

fn bundled() -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(data(""))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".el"))
        .collect();
    names.sort();
    names
}

#[test]
fn triangle_cc_matches_oracle_checksum() {
    let out = stdout(&gpm(&["run", "--input", &data("triangle.el"), "--algorithm", "cc", "--engine", "pregel", "--workers", "1"]));
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], CSV_HEADER.join(","));
    let checksum = lines[1].split(',').nth(21).unwrap();
    let oracle = stdout(&gpm(&["oracle", "--input", &data("triangle.el"), "--algorithm", "cc"]));
    assert!(oracle.contains(&format!("checksum={checksum}")), "{oracle}");
}

#[test]
fn engines_agree_on_checksums_but_not_traffic() {
    let r = records(&["run", "--input", &data("triangle.el"), "--algorithm", "cc", "--engine", "pregel,gas-sync"]);
    assert_eq!(r.len(), 2);
    assert_eq!(r[0].checksum, r[1].checksum);
    assert_ne!(r[0].messages_sent, r[1].messages_sent);
}

#[test]
fn bundled_graphs_agree_across_engines() {
    for name in bundled() {
        let cc = records(&["run", "--input", &data(&name), "--algorithm", "cc", "--engine",
            "pregel,gas-sync,gas-async,gas-message,graph-centric,pact", "--workers", "1,3"]);
        assert!(cc.iter().all(|r| r.checksum == cc[0].checksum), "{name}: cc");
        let pr = records(&["run", "--input", &data(&name), "--algorithm", "pagerank", "--engine",
            "pregel,gas-sync,graph-centric,pact", "--workers", "1,3"]);
        assert!(pr.iter().all(|r| r.checksum == pr[0].checksum), "{name}: pagerank");
    }
}

#[test]
fn weak_scaling_grows_the_graph() {
    let r = records(&["run", "--generate", "dm", "--edges-per-worker", "16000", "--workers", "1,2,4,8",
        "--algorithm", "cc", "--engine", "pregel"]);
    assert_eq!(r.len(), 4);
    for rec in &r {
        assert_eq!(rec.vertices, (16_000 * rec.workers + 3).div_ceil(2));
        assert!(rec.edges.abs_diff(16_000 * rec.workers) <= 1);
        assert_eq!(rec.summary, Some(1.0));
    }
}

#[test]
fn seeded_runs_are_byte_identical() {
    let args = ["run", "--generate", "dm", "--vertices", "300", "--seed", "5", "--algorithm",
        "community,clustering-approx", "--engine", "pregel", "--workers", "1,4", "--repetitions", "2",
        "--samples", "2000", "--output", "json"];
    let a = stdout(&gpm(&args));
    let b = stdout(&gpm(&args));
    assert_eq!(a, b);
    assert!(parse_json(&a).unwrap().iter().all(|r| r.wall_time_ms.is_none()));
}

#[test]
fn checkpoint_and_kill_flags_recover() {
    let dir = tempfile::tempdir().unwrap();
    let base = ["run", "--input", &data("path_64.el"), "--algorithm", "cc", "--engine", "pregel", "--workers", "4"];
    let clean = records(&base);
    let mut faulty = base.to_vec();
    let d = dir.path().to_string_lossy().into_owned();
    faulty.extend(["--checkpoint-every", "2", "--kill-at-superstep", "5", "--checkpoint-dir", &d]);
    let recovered = records(&faulty);
    assert_eq!(recovered[0].checksum, clean[0].checksum);
    assert_eq!(recovered[0].recoveries, 1);
}

#[test]
fn results_use_input_ids() {
    let dir = tempfile::tempdir().unwrap();
    let results = dir.path().join("labels.tsv");
    let summary = dir.path().join("summary.txt");
    stdout(&gpm(&["run", "--input", &data("sparse_ids.el"), "--algorithm", "cc", "--engine", "graph-centric",
        "--workers", "2", "--results", results.to_str().unwrap(), "--summary", summary.to_str().unwrap()]));
    let text = std::fs::read_to_string(&results).unwrap();
    let input = std::fs::read_to_string(data("sparse_ids.el")).unwrap();
    let ids: std::collections::BTreeSet<&str> =
        input.lines().filter(|l| !l.starts_with('#')).flat_map(|l| l.split_whitespace()).collect();
    for line in text.lines() {
        let (v, label) = line.split_once('\t').unwrap();
        assert!(ids.contains(v) && ids.contains(label), "{line}");
    }
    assert!(std::fs::read_to_string(&summary).unwrap().starts_with("components="));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.el");
    std::fs::write(&bad, "0 1\n1 two\n").unwrap();
    let o = gpm(&["run", "--input", bad.to_str().unwrap(), "--algorithm", "cc", "--engine", "pregel"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));

    let hub = dir.path().join("hub.el");
    let edges: String = (1..=8000).map(|v| format!("0 {v}\n")).collect();
    std::fs::write(&hub, edges).unwrap();
    let o = gpm(&["run", "--input", hub.to_str().unwrap(), "--algorithm", "clustering-exact", "--engine", "pregel"]);
    assert_eq!(o.status.code(), Some(4));

    let o = gpm(&["run", "--input", &data("triangle.el"), "--algorithm", "pagerank", "--engine", "gas-message"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("valid pairs are"));
    assert!(o.stdout.is_empty(), "nothing may run before validation");

    assert_eq!(exit_code(&Error::Contract("boundary write".into())), 3);
    assert_eq!(exit_code(&Error::Resource("memory".into())), 4);
}

fn sample_record() -> Record {
    parse_json(&stdout(&gpm(&["run", "--input", &data("bridged_triangles.el"), "--algorithm", "pagerank",
        "--engine", "pregel", "--output", "json", "--timing"])))
    .unwrap()
    .remove(0)
}

#[test]
fn emit_metrics_contract() {
    let r = sample_record();
    let csv = emit_metrics(std::slice::from_ref(&r), OutputFormat::Csv).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert_eq!(csv.lines().nth(1).unwrap().split(',').count(), CSV_HEADER.len());
    assert!(matches!(emit_metrics(&[], OutputFormat::Csv), Err(Error::Argument(_))));
    assert!(matches!("xml".parse::<OutputFormat>(), Err(Error::Argument(_))));

    let records = vec![r.clone(), Record { repetition: 1, summary: None, ..r }];
    let json = emit_metrics(&records, OutputFormat::Json).unwrap();
    assert_eq!(parse_json(&json).unwrap(), records);
    // field names are shared between the two formats
    let value: serde_json::Value = serde_json::from_str(&json).unwrap();
    let keys: Vec<&str> = value[0].as_object().unwrap().keys().map(String::as_str).collect();
    let mut header = CSV_HEADER.to_vec();
    header.sort_unstable();
    let mut keys_sorted = keys.clone();
    keys_sorted.sort_unstable();
    assert_eq!(keys_sorted, header);
}
