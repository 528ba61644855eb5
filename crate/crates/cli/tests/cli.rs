use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hitl-crystal"))
        .arg("--state")
        .arg(dir.join("camp"))
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn write_table_subset(dir: &Path, ids: &[u32]) -> std::path::PathBuf {
    let table = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/table_s4.csv")).unwrap();
    let mut lines = table.lines();
    let mut csv = format!("{}\n", lines.next().unwrap());
    for l in lines {
        let id: u32 = l.split(',').next().unwrap().parse().unwrap();
        if ids.contains(&id) {
            csv.push_str(l);
            csv.push('\n');
        }
    }
    let path = dir.join(format!("records_{}.csv", ids[0]));
    std::fs::write(&path, csv).unwrap();
    path
}

#[test]
fn campaign_round_trip_through_the_cli() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let config = dir.join("config.json");
    std::fs::write(
        &config,
        json!({
            "nsga2": {"population": 30, "generations": 10},
            "walk": {"n_walkers": 500, "steps_per_walker": 1, "step_fraction": 0.25, "n_output": 100},
            "analysis": {
                "backend": "forest",
                "n_permutations": 4,
                "max_explained": 10,
                "forest_search": {"n_trees": [5], "max_depth": [null], "min_samples_split": [2], "min_samples_leaf": [1], "n_trials": 1}
            },
            "n_probes": 4
        })
        .to_string(),
    )
    .unwrap();
    let cfg = config.to_str().unwrap();

    let first = write_table_subset(dir, &(1..=8).collect::<Vec<_>>());
    let out = ok(dir, &["--config", cfg, "import", first.to_str().unwrap()]);
    assert!(out.contains("imported 8 records"), "{out}");

    let out = ok(dir, &["iterate", "--strategy", "pareto", "--seed", "3"]);
    assert!(out.starts_with("iteration 1: batch 0"), "{out}");

    let report: Value = serde_json::from_str(&ok(dir, &["report"])).unwrap();
    assert_eq!(report["iteration"], 1);
    assert_eq!(report["seed"], 3);
    let csv = ok(dir, &["report", "--iteration", "1", "--format", "candidates"]);
    assert!(csv.lines().count() > 1);
    let analysis = ok(dir, &["report", "--format", "csv"]);
    assert!(analysis.contains("random_control"));

    ok(dir, &["review", "--batch", "0", "--candidate", "0", "--decision", "approve"]);
    let again = run(dir, &["review", "--batch", "0", "--candidate", "0", "--decision", "reject"]);
    assert!(!again.status.success());
    assert!(String::from_utf8_lossy(&again.stderr).contains("already reviewed"));

    let one = write_table_subset(dir, &[9]);
    let out = ok(dir, &["ingest", one.to_str().unwrap(), "--batch", "0", "--candidate", "0"]);
    assert!(out.contains("experiment 9"), "{out}");

    let out = ok(dir, &["space", "min-delta-t", "2"]);
    assert!(out.contains("* A n_points=10000 min_delta_t=2"), "{out}");

    let state: Value = serde_json::from_str(&std::fs::read_to_string(dir.join("camp/state.json")).unwrap()).unwrap();
    assert_eq!(state["records"].as_array().unwrap().len(), 9);
    let log = std::fs::read_to_string(dir.join("camp/events.jsonl")).unwrap();
    assert_eq!(log.lines().count() as u64, state["events"].as_array().unwrap().len() as u64);

    let bad = run(dir, &["iterate", "--strategy", "midpoint"]);
    assert!(!bad.status.success());
}

#[test]
fn small_replication_writes_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let out_dir = dir.join("study");
    let out = ok(
        dir,
        &["replicate", "--pool-size", "3000", "--instances", "3", "--seed", "5", "--out", out_dir.to_str().unwrap()],
    );
    assert_eq!(out.lines().filter(|l| l.contains("rate")).count(), 4, "{out}");
    for f in ["study_result.json", "rates.csv", "trajectories.csv"] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
    let rates = std::fs::read_to_string(out_dir.join("rates.csv")).unwrap();
    assert_eq!(rates.lines().count(), 5);
}
