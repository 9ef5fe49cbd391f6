use std::path::Path;
use std::process::{Command, Output};

use chronostore::docstore::{Value, WriteBatch};
use chronostore::layout::{names, LayoutKind};
use chronostore::mutation::Graph;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chronostore"))
        .args(args)
        .env_remove("CHRONOSTORE_DATA_DIR")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> serde_json::Value {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn transform_load_query_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (dump, events, store) = (dir.path().join("dump"), dir.path().join("ev.tsv"), dir.path().join("s.chrn"));
    let gen = ok(&["generate", "ldbc", s(&dump), "--persons", "120", "--forums", "30", "--knows", "200", "--memberships", "150"]);
    let kept = ["Person", "Forum", "knows", "hasMember"];
    let sum = |field: &str| kept.iter().map(|k| gen["summary"][field][k].as_u64().unwrap_or(0)).sum::<u64>();
    let expected = sum("rows_by_kind") + sum("deletions_by_kind");

    let t = ok(&["transform", s(&dump), "--out", s(&events)]);
    assert_eq!(t["events"].as_u64().unwrap(), expected);

    for layout in ["st", "mt"] {
        let l = ok(&["load", s(&events), "--layout", layout, "--out", s(&store)]);
        let applied: u64 = l["applied"].as_object().unwrap().values().map(|v| v.as_u64().unwrap()).sum();
        assert_eq!(applied, expected);
        assert_eq!(l["format"], "events");

        let out = run(&["query", "average_degree", "--store", s(&store), "--granularity", "100000000000", "--mode", "rr"]);
        assert!(out.status.success());
        let lines: Vec<serde_json::Value> =
            std::str::from_utf8(&out.stdout).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert!(!lines.is_empty());
        assert!(String::from_utf8_lossy(&out.stderr).contains("documents_fetched"));
        assert_eq!(ok(&["verify", "--store", s(&store)])["checks"].as_array().unwrap().len(), 5);
    }

    let direct = ok(&["load", s(&dump), "--out", s(&store)]);
    assert_eq!(direct["format"], "ldbc");
}

#[test]
fn one_hop_on_toy_store() {
    let dir = tempfile::tempdir().unwrap();
    let (edges, store) = (dir.path().join("edges.tsv"), dir.path().join("s.chrn"));
    std::fs::write(&edges, "1\t2\t0\t9\n1\t3\t5\t6\n2\t3\t0\t9\n").unwrap();
    ok(&["load", s(&edges), "--snapshots", "10", "--out", s(&store)]);
    assert_eq!(ok(&["query", "one_hop", "--store", s(&store), "--vid", "1"]), serde_json::json!([2, 3]));
    assert_eq!(ok(&["query", "one_hop", "--store", s(&store), "--vid", "1", "--start", "0", "--end", "5"]), serde_json::json!([2]));
    let snap = ok(&["query", "snapshot", "--store", s(&store), "--at", "7", "--layout", "mt"]);
    assert_eq!(snap["vertices"].as_object().unwrap().keys().collect::<Vec<_>>(), ["1", "2", "3"]);
    // snapshot lists need their range
    assert_eq!(run(&["load", s(&edges), "--out", s(&store)]).status.code(), Some(2));
}

#[test]
fn usage_and_input_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["query", "pagerank", "--store", "x"]).status.code(), Some(2));
    assert_eq!(run(&["verify", "--store", s(&dir.path().join("missing"))]).status.code(), Some(2));
    assert_eq!(run(&["verify"]).status.code(), Some(2));
    let bad = dir.path().join("bad.tsv");
    std::fs::write(&bad, "#chronostore-events v1 unit=snapshot origin=0\n1\tINSERT_EDGE\t{\"src\":1,\"dst\":2}\n").unwrap();
    let out = run(&["load", s(&bad), "--out", s(&dir.path().join("s.chrn"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"), "{}", String::from_utf8_lossy(&out.stderr));
    let skipped = ok(&["load", s(&bad), "--skip-errors", "--out", s(&dir.path().join("s.chrn"))]);
    assert_eq!(skipped["errors"]["EndpointNotAlive"], 1);
}

#[test]
fn empty_input_loads_an_empty_store() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.tsv");
    std::fs::write(&empty, "").unwrap();
    let l = ok(&["load", s(&empty), "--out", s(&dir.path().join("s.chrn"))]);
    assert_eq!((l["vertices"].as_u64(), l["documents"].as_u64()), (Some(0), Some(0)));
}

#[test]
fn data_dir_env_names_the_default_store() {
    let dir = tempfile::tempdir().unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_chronostore"))
        .args(["generate", "synthetic", "--vertices", "50", "--horizon", "40"])
        .env("CHRONOSTORE_DATA_DIR", dir.path())
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    assert!(dir.path().join("store.chrn").exists());
}

#[test]
fn verify_reports_asymmetric_edges() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.chrn");
    let mut g = Graph::new(LayoutKind::Mt).unwrap();
    g.insert_node(1, 0).unwrap();
    g.insert_node(2, 0).unwrap();
    g.insert_edge(1, 2, 3).unwrap();
    let mut batch = WriteBatch::new();
    batch.delete(names::E_IN_EXIST, vec![Value::UInt(2), Value::UInt(1), Value::UInt(3)]);
    g.store().commit_batch(batch).unwrap();
    g.persist_checkpoint(&path).unwrap();

    let out = run(&["verify", "--store", s(&path)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("symmetry"));
}

#[test]
fn bench_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("s.chrn");
    ok(&["generate", "synthetic", "--vertices", "60", "--horizon", "50", "--out", s(&store)]);
    let stem = dir.path().join("r");
    let b = ok(&["bench", "--store", s(&store), "--reps", "1", "--warmup", "0", "--out", s(&stem), "--mode", "ra,id"]);
    assert_eq!(b["cells"], 16);
    assert_eq!(std::fs::read_to_string(dir.path().join("r.csv")).unwrap().lines().count(), 17);
    assert_eq!(run(&["bench", "--store", s(&store), "--fractions", "0"]).status.code(), Some(2));
}
