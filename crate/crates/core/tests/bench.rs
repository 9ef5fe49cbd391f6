use chronostore::bench::{run_bench, synthetic_graph, BenchQuery, BenchSpec, SyntheticSpec};
use chronostore::layout::LayoutKind;
use chronostore::query::QueryMode;

fn toy() -> chronostore::mutation::Graph {
    let spec = SyntheticSpec { vertices: 150, horizon: 200, out_degree: 3, max_edge_len: 30, seed: 9 };
    synthetic_graph(LayoutKind::St, &spec).unwrap()
}

#[test]
fn full_grid_is_result_equal() {
    let g = toy();
    let dir = tempfile::tempdir().unwrap();
    let spec = BenchSpec { reps: 2, batch_size: 16, ..Default::default() };
    let report = run_bench(&g, &spec, dir.path()).unwrap();
    assert_eq!(report.cells.len(), 24);
    assert_eq!(report.attestations.len(), 4);
    assert!(report.attestations.iter().all(|a| a.cells == 6));
    for c in &report.cells {
        if c.mode == Some(QueryMode::Id) {
            assert!(c.metrics.peak_buffered <= 16, "{c:?}");
        }
    }
    for layout in LayoutKind::ALL {
        let fetched = |mode, f| report.cell(layout, Some(mode), f).unwrap().metrics.documents_fetched;
        let fr = &spec.fractions;
        assert!(fr.iter().all(|f| fetched(QueryMode::Ra, *f) == fetched(QueryMode::Ra, 100.0)));
        for mode in [QueryMode::Rr, QueryMode::Id] {
            assert!(fr.windows(2).all(|w| fetched(mode, w[0]) <= fetched(mode, w[1])), "{layout} {mode}");
        }
        let docs = report.builds.iter().find(|b| b.layout == layout).unwrap().documents as f64;
        assert_eq!(fetched(QueryMode::Ra, 1.0), docs);
    }

    let (json, csv) = report.save(&dir.path().join("report")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(json).unwrap()).unwrap();
    assert_eq!(v["cells"].as_array().unwrap().len(), 24);
    assert_eq!(std::fs::read_to_string(csv).unwrap().lines().count(), 25);
}

#[test]
fn payloads_are_deterministic() {
    let g = toy();
    let spec = BenchSpec { reps: 1, warmup: 0, seed: 5, query: BenchQuery::AverageDegree, ..Default::default() };
    let a = run_bench(&g, &spec, tempfile::tempdir().unwrap().path()).unwrap();
    let b = run_bench(&g, &spec, tempfile::tempdir().unwrap().path()).unwrap();
    assert_eq!(a.attestations, b.attestations);
}

#[test]
fn local_queries_use_one_cell_per_layout() {
    let g = toy();
    let dir = tempfile::tempdir().unwrap();
    for query in [BenchQuery::OneHop, BenchQuery::VertexHistory] {
        let spec = BenchSpec { query, reps: 3, fractions: vec![1.0, 100.0], ..Default::default() };
        let report = run_bench(&g, &spec, dir.path()).unwrap();
        assert_eq!(report.cells.len(), 4);
        assert!(report.cells.iter().all(|c| c.mode.is_none()));
    }
    let bad = BenchSpec { fractions: vec![0.0], ..Default::default() };
    assert!(run_bench(&g, &bad, dir.path()).is_err());
}
