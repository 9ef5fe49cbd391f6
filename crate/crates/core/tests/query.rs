mod common;

use std::collections::BTreeMap;

use chronostore::layout::{Layout, LayoutKind};
use chronostore::mutation::{ErrorPolicy, Graph, PropTarget};
use chronostore::query::{
    self, average_degree, clamp_interval, degree_distribution, execute_global, one_hop, snapshot_at, vertex_history,
    DegreeHistogram, GlobalQuery, GlobalQueryKind, QueryError, QueryMode, QueryOptions,
};
use chronostore::temporal::ALIVE_END;
use common::{iv, random_stream, StreamParams};

fn toy(kind: LayoutKind) -> Graph {
    let mut g = Graph::new(kind).unwrap();
    for v in 1..=3 {
        g.insert_node(v, 0).unwrap();
    }
    g.insert_edge(1, 2, 1).unwrap();
    g.insert_edge(1, 3, 2).unwrap();
    g.delete_edge(1, 2, 5).unwrap();
    g.delete_edge(1, 3, 8).unwrap();
    for v in 1..=3 {
        g.delete_node(v, 10).unwrap();
    }
    g
}

#[test]
fn degree_example_at_bucket_three() {
    for kind in LayoutKind::ALL {
        let g = toy(kind);
        for mode in QueryMode::ALL {
            let (h, _) = degree_distribution(&g.snapshot(), g.layout(), &iv(3, 4), 1, mode, &QueryOptions::default()).unwrap();
            assert_eq!(h, vec![DegreeHistogram { bucket: 3, counts: BTreeMap::from([(1, 2), (2, 1)]) }], "{kind} {mode}");
            let (h, _) = degree_distribution(&g.snapshot(), g.layout(), &iv(10, 12), 1, mode, &QueryOptions::default()).unwrap();
            assert!(h.iter().all(|b| b.counts.is_empty() && b.vertices() == 0));
            let (a, _) = average_degree(&g.snapshot(), g.layout(), &iv(10, 11), 1, mode, &QueryOptions::default()).unwrap();
            assert_eq!(a[0].mean, 0.0);
        }
    }
}

#[test]
fn single_edge_mean_is_one() {
    let mut g = Graph::new(LayoutKind::Mt).unwrap();
    g.insert_node(1, 0).unwrap();
    g.insert_node(2, 0).unwrap();
    g.insert_edge(1, 2, 0).unwrap();
    let (a, _) = average_degree(&g.snapshot(), g.layout(), &iv(0, 1), 1, QueryMode::Id, &QueryOptions::default()).unwrap();
    assert_eq!(a[0].mean, 1.0);
}

#[test]
fn local_query_examples() {
    for kind in LayoutKind::ALL {
        let mut g = toy(kind);
        let snap = g.snapshot();
        let l = g.layout();
        assert!(one_hop(&snap, l, 2, &iv(0, 1)).unwrap().is_empty());
        assert_eq!(one_hop(&snap, l, 2, &iv(1, 2)).unwrap().into_iter().collect::<Vec<_>>(), vec![1]);
        assert_eq!(one_hop(&snap, l, 1, &iv(0, 100)).unwrap().len(), 2);
        assert!(one_hop(&snap, l, 1, &iv(10, 100)).unwrap().is_empty());
        assert!(vertex_history(&snap, l, 1, &iv(20, 30)).unwrap().is_none());
        assert!(snapshot_at(&snap, l, 0).unwrap().edges.is_empty());

        g.insert_node(7, 12).unwrap();
        g.insert_property(PropTarget::Node(7), "color", "red".into(), 13).unwrap();
        g.delete_property(PropTarget::Node(7), "color", 19).unwrap();
        let snap = g.snapshot();
        let h = vertex_history(&snap, l, 7, &iv(15, 30)).unwrap().unwrap();
        assert_eq!(h.attributes["color"][0].interval, iv(15, 19));
        assert!(snapshot_at(&snap, l, 11).unwrap().vertices.is_empty());
        assert!(snapshot_at(&snap, l, ALIVE_END).unwrap().vertices.is_empty());
    }
}

#[test]
fn invalid_global_queries() {
    let g = toy(LayoutKind::St);
    let opts = QueryOptions::default();
    let r = degree_distribution(&g.snapshot(), g.layout(), &iv(0, 10), 0, QueryMode::Ra, &opts);
    assert!(matches!(r, Err(QueryError::Invalid(_))));
    let r = degree_distribution(&g.snapshot(), g.layout(), &iv(0, ALIVE_END), 1, QueryMode::Ra, &opts);
    assert!(matches!(r, Err(QueryError::Invalid(_))));
    let q = clamp_interval(&iv(0, ALIVE_END), g.clock() + 1).unwrap();
    assert_eq!(q, iv(0, 11));
    assert!(degree_distribution(&g.snapshot(), g.layout(), &q, 1, QueryMode::Ra, &opts).is_ok());
}

#[test]
fn modes_and_layouts_agree_with_oracle() {
    for seed in 0..25 {
        let (events, oracle) = random_stream(seed, StreamParams::default());
        let q = iv(0, oracle.horizon() + 1);
        let expected = oracle.degree_distribution(&q, 3);
        for kind in LayoutKind::ALL {
            let mut g = Graph::new(kind).unwrap();
            g.apply_stream(&events, ErrorPolicy::SkipAndCount).unwrap();
            let snap = g.snapshot();
            for mode in QueryMode::ALL {
                let opts = QueryOptions { batch_size: 7 };
                let (h, m) = degree_distribution(&snap, g.layout(), &q, 3, mode, &opts).unwrap();
                assert_eq!(h, expected, "seed {seed} {kind} {mode}");
                if mode == QueryMode::Ra {
                    assert_eq!(m.documents_fetched, snap.total_documents() as u64);
                }
                if mode == QueryMode::Id {
                    assert!(m.peak_buffered <= 7);
                }
            }
        }
    }
}

#[test]
fn histogram_conservation() {
    let (events, oracle) = random_stream(77, StreamParams::default());
    let mut g = Graph::new(LayoutKind::St).unwrap();
    g.apply_stream(&events, ErrorPolicy::SkipAndCount).unwrap();
    let q = iv(0, oracle.horizon() + 1);
    let (h, _) = degree_distribution(&g.snapshot(), g.layout(), &q, 1, QueryMode::Rr, &QueryOptions::default()).unwrap();
    for b in &h {
        let s = oracle.at(b.bucket);
        assert_eq!(b.vertices(), s.vertices.len() as u64);
        let loops = s.edges.keys().filter(|(a, c)| a == c).count() as u64;
        assert_eq!(b.total_degree(), 2 * s.edges.len() as u64 - loops);
    }
}

#[test]
fn fetch_counts_are_ordered_on_partial_ranges() {
    let mut g = Graph::new(LayoutKind::Mt).unwrap();
    for v in 0..200u64 {
        g.insert_node(v, v).unwrap();
    }
    for v in 1..200u64 {
        g.insert_edge(v - 1, v, 200 + v).unwrap();
    }
    for v in 0..150u64 {
        g.delete_node(v, 400 + v).unwrap();
    }
    for kind in LayoutKind::ALL {
        let g = g.convert(kind).unwrap();
        let snap = g.snapshot();
        let q = iv(560, 600);
        let opts = QueryOptions::default();
        let f = |mode| degree_distribution(&snap, g.layout(), &q, 10, mode, &opts).unwrap().1;
        let (ra, rr, id) = (f(QueryMode::Ra), f(QueryMode::Rr), f(QueryMode::Id));
        assert!(id.documents_fetched <= rr.documents_fetched, "{kind} {id:?} {rr:?}");
        assert!(rr.documents_fetched < ra.documents_fetched, "{kind} {rr:?} {ra:?}");
        assert!(rr.keys_fetched > 0);
    }
}

#[test]
fn json_lines_shape() {
    let g = toy(LayoutKind::St);
    let query = GlobalQuery { kind: GlobalQueryKind::DegreeDistribution, interval: iv(3, 5), granularity: 1 };
    let (r, _) = execute_global(&g.snapshot(), g.layout(), &query, QueryMode::Id, &QueryOptions::default()).unwrap();
    assert_eq!(r.to_json_lines(), "{\"bucket\":3,\"counts\":{\"1\":2,\"2\":1}}\n{\"bucket\":4,\"counts\":{\"1\":2,\"2\":1}}\n");
    let query = GlobalQuery { kind: GlobalQueryKind::AverageDegree, ..query };
    let (r, _) = execute_global(&g.snapshot(), g.layout(), &query, QueryMode::Ra, &QueryOptions::default()).unwrap();
    let first = r.to_json_lines().lines().next().unwrap().to_owned();
    let v: serde_json::Value = serde_json::from_str(&first).unwrap();
    assert_eq!(v["total_degree"], 4);
    assert_eq!(v["vertices"], 3);
    assert!("bogus".parse::<GlobalQueryKind>().is_err());
    assert_eq!("RR".parse::<QueryMode>().unwrap(), QueryMode::Rr);
    let _ = Layout::new(LayoutKind::St);
    let _ = query::MAX_BUCKETS;
}
