use std::io::Write;

use chronostore::docstore::Value;
use chronostore::ingest::{
    self, generate_ldbc_fixture, load_event_stream, read_event_file, read_ldbc_dump, read_snapshot_file, to_events,
    to_records, transform_ldbc_dump, write_event_file, FixtureParams, IngestError, LdbcOptions, SchemaFilter,
    SnapshotOptions, TickMapping, TickUnit,
};
use chronostore::layout::LayoutKind;
use chronostore::mutation::{ErrorPolicy, EventKind, Graph, MutationEvent, PropTarget};
use chronostore::temporal::ALIVE_END;
use proptest::prelude::*;

fn small() -> FixtureParams {
    FixtureParams { persons: 300, forums: 100, knows: 500, memberships: 400, noise_rows: 50, ..Default::default() }
}

#[test]
fn transform_is_sorted_and_conserves_events() {
    let dir = tempfile::tempdir().unwrap();
    let summary = generate_ldbc_fixture(dir.path(), &small()).unwrap();
    let (events, stats) = transform_ldbc_dump(dir.path(), &LdbcOptions::default()).unwrap();
    let (rows, deletions) = summary.totals(["Person", "Forum", "knows", "hasMember"]);
    assert_eq!(stats.rows, rows);
    assert_eq!(stats.deletions, deletions);
    assert_eq!(events.len() as u64, rows + deletions);
    assert_eq!(stats.rows_filtered_out, summary.totals(["Post", "hasCreator"]).0);
    assert!(events.windows(2).all(|w| w[0].time() <= w[1].time()));
    let kinds: std::collections::BTreeSet<_> = stats.rows_by_kind.keys().cloned().collect();
    assert_eq!(kinds, ["Forum", "Person", "hasMember", "knows"].map(String::from).into());
    for w in events.windows(2) {
        if w[0].time() == w[1].time() {
            assert!(!(!w[0].kind().is_insert() && w[1].kind().is_insert()), "delete before insert at {}", w[0].time());
        }
    }
}

#[test]
fn stream_and_bulk_loads_agree() {
    let dir = tempfile::tempdir().unwrap();
    generate_ldbc_fixture(dir.path(), &small()).unwrap();
    for with_properties in [false, true] {
        let opts = LdbcOptions { with_properties, ..Default::default() };
        let mut data = read_ldbc_dump(dir.path(), &opts).unwrap();
        let events = to_events(&data.rows, &mut data.stats);
        let (nodes, edges) = to_records(&data.rows);
        for kind in LayoutKind::ALL {
            let mut streamed = Graph::new(kind).unwrap();
            let stats = streamed.apply_stream(&events, ErrorPolicy::FailFast).unwrap();
            assert_eq!(stats.total_applied(), data.stats.events());
            let mut bulk = Graph::new(kind).unwrap();
            bulk.bulk_load(nodes.clone(), edges.clone()).unwrap();
            assert_eq!(streamed.nodes().unwrap(), bulk.nodes().unwrap());
            assert_eq!(streamed.store().content_hash(), bulk.store().content_hash());
        }
    }
}

#[test]
fn event_file_round_trip_and_load() {
    let dir = tempfile::tempdir().unwrap();
    generate_ldbc_fixture(dir.path(), &small()).unwrap();
    let (events, _) = transform_ldbc_dump(dir.path(), &LdbcOptions::default()).unwrap();
    let path = dir.path().join("events.tsv");
    write_event_file(&path, &TickMapping::ldbc(), &events).unwrap();
    let back = read_event_file(&path).unwrap();
    assert_eq!(back.events, events);
    assert_eq!(back.mapping, Some(TickMapping::ldbc()));

    let mut g = Graph::new(LayoutKind::Mt).unwrap();
    let stats = load_event_stream(&mut g, &path, ErrorPolicy::FailFast).unwrap();
    assert_eq!(stats.total_applied() as usize, events.len());
    assert_eq!(stats.total_errors(), 0);
}

#[test]
fn stream_file_errors_carry_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("e.tsv");
    let mut f = std::fs::File::create(&path).unwrap();
    writeln!(f, "#chronostore-events v1 unit=snapshot origin=0").unwrap();
    writeln!(f, "1\tINSERT_NODE\t{{\"vid\":1}}").unwrap();
    writeln!(f, "2\tINSERT_EDGE\t{{\"src\":1,\"dst\":9}}").unwrap();
    writeln!(f, "0\tINSERT_NODE\t{{\"vid\":2}}").unwrap();
    drop(f);
    let mut g = Graph::new(LayoutKind::St).unwrap();
    assert!(matches!(load_event_stream(&mut g, &path, ErrorPolicy::FailFast), Err(IngestError::OutOfOrder { line: 4, .. })));
    assert_eq!(g.snapshot().total_documents(), 0);

    let lines = std::fs::read_to_string(&path).unwrap();
    std::fs::write(&path, lines.lines().take(3).collect::<Vec<_>>().join("\n")).unwrap();
    let err = load_event_stream(&mut g, &path, ErrorPolicy::FailFast).unwrap_err();
    assert!(matches!(err, IngestError::Apply { line: 3, .. }), "{err}");
    let mut g = Graph::new(LayoutKind::St).unwrap();
    let stats = load_event_stream(&mut g, &path, ErrorPolicy::SkipAndCount).unwrap();
    assert_eq!((stats.applied(EventKind::InsertNode), stats.total_errors()), (1, 1));

    std::fs::write(&path, "").unwrap();
    let mut g = Graph::new(LayoutKind::St).unwrap();
    assert_eq!(load_event_stream(&mut g, &path, ErrorPolicy::FailFast).unwrap().total_applied(), 0);
    assert_eq!(g.snapshot().total_documents(), 0);
}

#[test]
fn snapshot_dataset_loads() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("edges.tsv");
    std::fs::write(&path, "1\t2\t0\t155\n2\t3\t10\t20\n3\t1\t30\t40\n").unwrap();
    let (nodes, edges) = read_snapshot_file(&path, SnapshotOptions::new(156)).unwrap();
    assert_eq!(edges[0].intervals.as_slice()[0].end(), 156);
    let mut g = Graph::new(LayoutKind::St).unwrap();
    let stats = g.bulk_load(nodes, edges).unwrap();
    assert_eq!((stats.vertices, stats.edges), (3, 3));
    assert!(chronostore::verify::verify(&g.snapshot(), g.layout()).passed());
    std::fs::write(&path, "1\t2\t9\t3\n").unwrap();
    assert!(matches!(read_snapshot_file(&path, SnapshotOptions::new(156)), Err(IngestError::Parse { line: 1, .. })));
    assert!(read_snapshot_file(&dir.path().join("missing"), SnapshotOptions::new(1)).is_err());
}

#[test]
fn ldbc_rows_with_bad_dates_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("person_0_0.csv"),
        "creationDate|deletionDate|id\n2010-02-01T00:00:00.000+0000||1\n2010-03-01T00:00:00.000+0000|2010-01-01T00:00:00.000+0000|2\n",
    )
    .unwrap();
    let err = read_ldbc_dump(dir.path(), &LdbcOptions::default()).unwrap_err();
    assert!(matches!(err, IngestError::Row { line: 3, .. }), "{err}");

    let only_people = LdbcOptions { filter: SchemaFilter::parse("Person").unwrap(), ..Default::default() };
    std::fs::write(dir.path().join("person_0_0.csv"), "creationDate|deletionDate|id\n2009-02-01T00:00:00.000+0000||1\n").unwrap();
    assert!(read_ldbc_dump(dir.path(), &only_people).unwrap_err().to_string().contains("overflow"));
}

fn value() -> impl Strategy<Value = Value> {
    prop_oneof![
        Just(Value::Null),
        any::<bool>().prop_map(Value::Bool),
        any::<u64>().prop_map(Value::UInt),
        (i64::MIN..0).prop_map(Value::Int),
        (-1000i32..1000).prop_map(|x| Value::Float(x as f64 / 4.0 + 0.125)),
        "[ -~\t]{0,12}".prop_map(Value::Str),
    ]
}

fn target() -> impl Strategy<Value = PropTarget> {
    prop_oneof![any::<u64>().prop_map(PropTarget::Node), (any::<u64>(), any::<u64>()).prop_map(|(s, d)| PropTarget::Edge(s, d))]
}

fn event() -> impl Strategy<Value = MutationEvent> {
    let t = 0..ALIVE_END;
    prop_oneof![
        (any::<u64>(), t.clone()).prop_map(|(vid, t)| MutationEvent::InsertNode { vid, t }),
        (any::<u64>(), t.clone()).prop_map(|(vid, t)| MutationEvent::DeleteNode { vid, t }),
        (any::<u64>(), any::<u64>(), t.clone()).prop_map(|(src, dst, t)| MutationEvent::InsertEdge { src, dst, t }),
        (any::<u64>(), any::<u64>(), t.clone()).prop_map(|(src, dst, t)| MutationEvent::DeleteEdge { src, dst, t }),
        (target(), "[a-zA-Z_\"\\\\]{1,8}", value(), t.clone())
            .prop_map(|(target, name, value, t)| MutationEvent::InsertProperty { target, name, value, t }),
        (target(), "[a-z]{1,8}", t).prop_map(|(target, name, t)| MutationEvent::DeleteProperty { target, name, t }),
    ]
}

proptest! {
    #[test]
    fn event_lines_round_trip(mut events in prop::collection::vec(event(), 0..40)) {
        events.sort_by_key(MutationEvent::time);
        let mut buf = Vec::new();
        ingest::write_events(&mut buf, &TickMapping::snapshots(), &events).unwrap();
        let back = ingest::parse_events(&buf[..]).unwrap();
        prop_assert_eq!(back.events, events);
    }

    #[test]
    fn tick_mapping_preserves_order(origin in -1_000_000i128..1_000_000, a in 0i128..1 << 62, b in 0i128..1 << 62) {
        for unit in [TickUnit::Year, TickUnit::Snapshot, TickUnit::EpochMs] {
            let m = TickMapping::new(unit, origin);
            let (ta, tb) = (m.to_tick(origin + a).unwrap(), m.to_tick(origin + b).unwrap());
            prop_assert_eq!(a.cmp(&b), ta.cmp(&tb));
            prop_assert_eq!(m.to_raw(ta), origin + a);
        }
    }
}
