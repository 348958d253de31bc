use std::path::Path;
use std::process::{Command, Output};

fn rfsm(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rfsm")).args(args).current_dir(cwd).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn seed_is_mandatory() {
    let dir = tempfile::tempdir().unwrap();
    let o = rfsm(&["partition_check"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--seed"));
}

#[test]
fn run_then_verify_then_tamper() {
    let dir = tempfile::tempdir().unwrap();
    let o = rfsm(&["partition_check", "--seed", "3", "--out", "pc"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let text = stdout(&o);
    assert!(text.lines().any(|l| l.starts_with("PASS equal_area_max_dev")));
    assert!(text.contains("partition_check: all checks passed"));
    for f in ["manifest.json", "results.csv", "summary.csv", "report.json", "partition_8.json", "partition_128.json"] {
        assert!(dir.path().join("pc").join(f).exists(), "missing {f}");
    }
    let (header, _) = rfsm::experiment_harness::persist::read_csv(&dir.path().join("pc/results.csv")).unwrap();
    assert_eq!(header, ["metric", "value", "comparator", "tolerance", "rule", "pass", "source"]);

    let again = rfsm(&["verify", "pc"], dir.path());
    assert_eq!(again.status.code(), Some(0));

    std::fs::write(dir.path().join("pc/partition_32.json"), "[]").unwrap();
    let bad = rfsm(&["verify", "pc/manifest.json"], dir.path());
    assert_eq!(bad.status.code(), Some(1));
    assert!(stdout(&bad).contains("partition_32.json does not match its digest"));
}

#[test]
fn config_file_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("u.toml"),
        "seed = 99\nout = \"ignored\"\n[model]\nd = 1\n[field]\nkind = \"two_point\"\na = [0.5]\n[sizes]\ntriples = 2000\n",
    )
    .unwrap();
    let o = rfsm(&["ultrametricity", "--config", "u.toml", "--seed", "4", "--out", "um", "--workers", "1"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), String::from_utf8_lossy(&o.stderr));
    let m = rfsm::experiment_harness::RunManifest::load(&dir.path().join("um/manifest.json")).unwrap();
    assert_eq!((m.config.seed, m.config.model.d, m.config.sizes.triples), (4, 1, 2000));
    assert_eq!(m.record("violation_rate").unwrap().value, 0.0);
    // every number in the sample file carries 17 significant digits
    let line = std::fs::read_to_string(dir.path().join("um/triples.jsonl")).unwrap();
    let first = line.lines().next().unwrap();
    let v: serde_json::Value = serde_json::from_str(first).unwrap();
    assert!(v.is_object());
    assert!(first.contains("e"), "{first}");

    let bad = rfsm(&["ultrametricity", "--config", "missing.toml", "--seed", "1"], dir.path());
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn default_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let o = rfsm(&["partition_check", "--seed", "11"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(dir.path().join("runs/partition_check-11/manifest.json").exists());
}
