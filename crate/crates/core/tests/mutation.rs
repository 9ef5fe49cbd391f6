mod common;

use std::collections::BTreeMap;

use chronostore::docstore::{FaultPlan, Value};
use chronostore::layout::{AttrEntry, LayoutKind};
use chronostore::mutation::{
    EdgeRecord, ErrorPolicy, EventKind, Graph, MutationError, MutationEvent, NodeRecord, PropTarget,
};
use chronostore::query;
use chronostore::temporal::{IntervalSet, ALIVE_END};
use chronostore::verify::verify;
use common::{iv, random_stream, Oracle, StreamParams};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

fn lifespan(g: &Graph, vid: u64) -> Vec<(u64, u64)> {
    g.node(vid).unwrap().map(|n| n.lifespan.iter().map(|i| (i.start(), i.end())).collect()).unwrap_or_default()
}

fn graphs() -> Vec<Graph> {
    LayoutKind::ALL.into_iter().map(|k| Graph::new(k).unwrap()).collect()
}

#[test]
fn insert_node_examples() {
    for mut g in graphs() {
        g.insert_node(1, 5).unwrap();
        assert_eq!(lifespan(&g, 1), vec![(5, ALIVE_END)]);
        assert!(matches!(g.insert_node(1, 6), Err(MutationError::AlreadyAlive { vid: 1, t: 6 })));
        g.delete_node(1, 10).unwrap();
        g.insert_node(1, 12).unwrap();
        assert_eq!(lifespan(&g, 1), vec![(5, 10), (12, ALIVE_END)]);
    }
}

#[test]
fn insert_edge_examples() {
    for mut g in graphs() {
        g.insert_node(1, 0).unwrap();
        g.insert_node(2, 0).unwrap();
        let before = g.store().content_hash();
        assert!(matches!(g.insert_edge(1, 3, 1), Err(MutationError::EndpointNotAlive { vid: 3, .. })));
        assert_eq!(g.store().content_hash(), before);
        g.insert_edge(1, 2, 1).unwrap();
        assert!(matches!(g.insert_edge(1, 2, 2), Err(MutationError::EdgeAlreadyAlive { .. })));
        g.delete_edge(1, 2, 4).unwrap();
        g.insert_edge(1, 2, 6).unwrap();
        let out = g.node(1).unwrap().unwrap().out_edges[&2].intervals.clone();
        assert_eq!(out, IntervalSet::from_intervals([iv(1, 4), iv(6, ALIVE_END)]).unwrap());
        assert_eq!(g.node(2).unwrap().unwrap().in_edges[&1].intervals, out);
    }
}

#[test]
fn property_examples() {
    for mut g in graphs() {
        g.insert_node(1, 0).unwrap();
        g.insert_property(PropTarget::Node(1), "color", "red".into(), 3).unwrap();
        assert!(matches!(
            g.insert_property(PropTarget::Node(1), "color", "blue".into(), 4),
            Err(MutationError::PropertyAlreadyAlive { .. })
        ));
        assert!(matches!(
            g.insert_property(PropTarget::Node(9), "color", "red".into(), 4),
            Err(MutationError::OwnerNotAlive { .. })
        ));
        g.delete_property(PropTarget::Node(1), "color", 7).unwrap();
        g.insert_property(PropTarget::Node(1), "color", "blue".into(), 7).unwrap();
        let h = &g.node(1).unwrap().unwrap().attributes["color"];
        assert_eq!(
            h,
            &vec![
                AttrEntry { value: "red".into(), interval: iv(3, 7) },
                AttrEntry { value: "blue".into(), interval: iv(7, ALIVE_END) }
            ]
        );
        let snap = g.snapshot();
        assert_eq!(query::snapshot_at(&snap, g.layout(), 6).unwrap().vertices[&1]["color"], Value::from("red"));
        assert!(matches!(
            g.delete_property(PropTarget::Node(1), "rank", 8),
            Err(MutationError::NotAliveAt { .. })
        ));
    }
}

#[test]
fn delete_node_cascades_to_both_endpoints() {
    for mut g in graphs() {
        for v in 0..4 {
            g.insert_node(v, 0).unwrap();
        }
        g.insert_edge(0, 1, 1).unwrap();
        g.insert_edge(2, 0, 1).unwrap();
        g.insert_edge(0, 3, 2).unwrap();
        g.insert_property(PropTarget::Edge(0, 1), "w", Value::UInt(4), 2).unwrap();
        g.insert_property(PropTarget::Node(0), "color", "red".into(), 2).unwrap();
        g.delete_node(0, 5).unwrap();
        let n0 = g.node(0).unwrap().unwrap();
        assert_eq!(n0.lifespan.as_slice(), &[iv(0, 5)]);
        assert_eq!(n0.attributes["color"][0].interval, iv(2, 5));
        assert_eq!(n0.out_edges[&1].attributes["w"][0].interval, iv(2, 5));
        for nbr in [1, 3] {
            assert_eq!(g.node(nbr).unwrap().unwrap().in_edges[&0].intervals.last().unwrap().end(), 5);
        }
        assert_eq!(g.node(2).unwrap().unwrap().out_edges[&0].intervals.as_slice(), &[iv(1, 5)]);
        assert!(matches!(g.delete_node(0, 6), Err(MutationError::NotAliveAt { .. })));
        assert!(verify(&g.snapshot(), g.layout()).passed());
    }
}

#[test]
fn delete_edge_ends_its_properties() {
    for mut g in graphs() {
        g.insert_node(1, 0).unwrap();
        g.insert_node(2, 0).unwrap();
        g.insert_edge(1, 2, 0).unwrap();
        g.insert_property(PropTarget::Edge(1, 2), "w", Value::UInt(1), 1).unwrap();
        g.delete_edge(1, 2, 3).unwrap();
        let e = &g.node(1).unwrap().unwrap().out_edges[&2];
        assert_eq!(e.attributes["w"][0].interval, iv(1, 3));
        assert!(matches!(g.delete_edge(1, 2, 4), Err(MutationError::NotAliveAt { .. })));
    }
}

#[test]
fn deleting_at_creation_instant_removes_the_entity() {
    for mut g in graphs() {
        g.insert_node(1, 4).unwrap();
        g.delete_node(1, 4).unwrap();
        assert!(g.node(1).unwrap().is_none());
        assert_eq!(g.snapshot().total_documents(), 0);
    }
}

#[test]
fn stream_order_and_stats() {
    let mut g = Graph::new(LayoutKind::St).unwrap();
    assert_eq!(g.apply_stream(&[], ErrorPolicy::FailFast).unwrap().total_applied(), 0);
    let events = vec![MutationEvent::InsertNode { vid: 1, t: 5 }, MutationEvent::InsertNode { vid: 2, t: 3 }];
    let err = g.apply_stream(&events, ErrorPolicy::SkipAndCount).unwrap_err();
    assert!(matches!(err, MutationError::AtEvent { index: 1, .. }));
    assert_eq!(err.name(), "OutOfOrder");
    assert!(matches!(g.insert_node(3, 4), Err(MutationError::OutOfOrder { .. })));
    assert!(matches!(g.insert_node(3, ALIVE_END), Err(MutationError::InvalidTime(_))));

    let mut g = Graph::new(LayoutKind::Mt).unwrap();
    let events = vec![
        MutationEvent::InsertNode { vid: 1, t: 0 },
        MutationEvent::InsertNode { vid: 1, t: 1 },
        MutationEvent::InsertEdge { src: 1, dst: 9, t: 1 },
    ];
    let stats = g.apply_stream(&events, ErrorPolicy::SkipAndCount).unwrap();
    assert_eq!(stats.applied(EventKind::InsertNode), 1);
    assert_eq!(stats.errors, BTreeMap::from([("AlreadyAlive".into(), 1), ("EndpointNotAlive".into(), 1)]));
    let mut g = Graph::new(LayoutKind::Mt).unwrap();
    assert!(matches!(g.apply_stream(&events, ErrorPolicy::FailFast), Err(MutationError::AtEvent { index: 1, .. })));
}

#[test]
fn replay_matches_oracle_histories() {
    for seed in 0..40 {
        let (events, oracle) = random_stream(seed, StreamParams::default());
        for kind in LayoutKind::ALL {
            let mut g = Graph::new(kind).unwrap();
            g.apply_stream(&events, ErrorPolicy::SkipAndCount).unwrap();
            let nodes: Vec<_> = g.nodes().unwrap();
            let expected: Vec<_> = oracle.all_vids().into_iter().filter_map(|v| oracle.history(v)).collect();
            assert_eq!(nodes, expected, "seed {seed} {kind}");
            assert!(verify(&g.snapshot(), g.layout()).passed(), "seed {seed} {kind}");
        }
    }
}

#[test]
fn every_error_leaves_state_unchanged() {
    let (events, _) = random_stream(99, StreamParams { noise: 0.5, ..Default::default() });
    let mut g = Graph::new(LayoutKind::Mt).unwrap();
    let mut failures = 0;
    for ev in &events {
        let before = g.store().content_hash();
        if g.apply(ev).is_err() {
            failures += 1;
            assert_eq!(g.store().content_hash(), before);
        }
    }
    assert!(failures > 20);
}

#[test]
fn aborted_batches_leave_no_trace() {
    for kind in LayoutKind::ALL {
        let (events, _) = random_stream(5, StreamParams::default());
        let mut g = Graph::new(kind).unwrap();
        g.store().set_fault_plan(Some(FaultPlan::new(1, 0.1)));
        let mut committed = Vec::new();
        for ev in &events {
            if g.apply(ev).is_ok() {
                committed.push(ev.clone());
            }
        }
        assert!(g.store().fault_plan().unwrap().aborted() > 0);
        let mut replay = Graph::new(kind).unwrap();
        replay.apply_stream(&committed, ErrorPolicy::FailFast).unwrap();
        assert_eq!(g.nodes().unwrap(), replay.nodes().unwrap());
        assert_eq!(g.store().content_hash(), replay.store().content_hash());
    }
}

#[test]
fn bulk_load_validates_and_matches_events() {
    let rec = |vid, s, e| NodeRecord { vid, lifespan: IntervalSet::single(iv(s, e)), attributes: BTreeMap::new() };
    for kind in LayoutKind::ALL {
        let mut g = Graph::new(kind).unwrap();
        assert_eq!(g.bulk_load(vec![], vec![]).unwrap().vertices, 0);
        let bad = EdgeRecord { src: 1, dst: 2, intervals: IntervalSet::single(iv(0, 20)), attributes: BTreeMap::new() };
        let err = g.bulk_load(vec![rec(1, 0, 10), rec(2, 0, 30)], vec![bad]).unwrap_err();
        assert!(matches!(err, MutationError::InvariantViolation(ref v) if v.iter().any(|m| m.contains("node 1"))));
        assert_eq!(g.snapshot().total_documents(), 0);

        let mut attrs = BTreeMap::new();
        attrs.insert("w".to_owned(), vec![AttrEntry { value: Value::UInt(2), interval: iv(3, 5) }]);
        let edge = EdgeRecord { src: 1, dst: 2, intervals: IntervalSet::single(iv(2, 8)), attributes: attrs };
        g.bulk_load(vec![rec(1, 0, 10), rec(2, 0, 30)], vec![edge]).unwrap();

        let mut e = Graph::new(kind).unwrap();
        let events = vec![
            MutationEvent::InsertNode { vid: 1, t: 0 },
            MutationEvent::InsertNode { vid: 2, t: 0 },
            MutationEvent::InsertEdge { src: 1, dst: 2, t: 2 },
            MutationEvent::InsertProperty { target: PropTarget::Edge(1, 2), name: "w".into(), value: Value::UInt(2), t: 3 },
            MutationEvent::DeleteProperty { target: PropTarget::Edge(1, 2), name: "w".into(), t: 5 },
            MutationEvent::DeleteEdge { src: 1, dst: 2, t: 8 },
            MutationEvent::DeleteNode { vid: 1, t: 10 },
            MutationEvent::DeleteNode { vid: 2, t: 30 },
        ];
        e.apply_stream(&events, ErrorPolicy::FailFast).unwrap();
        assert_eq!(g.store().content_hash(), e.store().content_hash());
    }
}

#[test]
fn cascade_closure_after_random_deletes() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for kind in LayoutKind::ALL {
        let mut g = Graph::new(kind).unwrap();
        for v in 0..60 {
            g.insert_node(v, 0).unwrap();
        }
        for _ in 0..400 {
            let _ = g.insert_edge(rng.gen_range(0..60), rng.gen_range(0..60), 1);
        }
        let mut t = 2;
        for _ in 0..300 {
            let res = if rng.gen_bool(0.3) {
                g.delete_node(rng.gen_range(0..60), t)
            } else {
                g.delete_edge(rng.gen_range(0..60), rng.gen_range(0..60), t)
            };
            if res.is_ok() && rng.gen_bool(0.3) {
                t += 1;
            }
        }
        let report = verify(&g.snapshot(), g.layout());
        assert!(report.passed(), "{:?}", report.failed_checks());
    }
}

#[test]
fn reopened_graph_resumes_its_clock() {
    let (events, _) = random_stream(3, StreamParams::default());
    let mut g = Graph::new(LayoutKind::St).unwrap();
    g.apply_stream(&events, ErrorPolicy::SkipAndCount).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.chrn");
    g.persist_checkpoint(&path).unwrap();
    let back = Graph::load_checkpoint(&path).unwrap();
    assert_eq!(back.nodes().unwrap(), g.nodes().unwrap());
    assert!(back.clock() <= g.clock());
    assert_eq!(back.lifespans().len(), g.lifespans().len());
    let _ = Oracle::new(1);
}
