//! Snapshot-indexed edge lists: `src<TAB>dst<TAB>first<TAB>last`, where
//! snapshot `i` is tick `i` and a record covers `[first, last + 1)`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use super::IngestError;
use crate::mutation::{EdgeRecord, NodeRecord};
use crate::temporal::{Interval, IntervalSet, Vid};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SnapshotOptions {
    pub snapshots: u64,
    /// Every vertex lives over all snapshots instead of the union of its
    /// incident edges.
    pub full_range_vertices: bool,
}

impl SnapshotOptions {
    pub fn new(snapshots: u64) -> Self {
        Self { snapshots, full_range_vertices: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SnapshotEdgeRecord {
    pub src: Vid,
    pub dst: Vid,
    pub first: u64,
    pub last: u64,
}

impl SnapshotEdgeRecord {
    pub fn interval(&self) -> Interval {
        Interval::new(self.first, self.last + 1).expect("first <= last")
    }
}

pub fn parse_snapshot_line(line: &str, snapshots: u64) -> Result<SnapshotEdgeRecord, String> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    let [src, dst, first, last] = fields[..] else {
        return Err(format!("expected 4 fields, got {}", fields.len()));
    };
    let num = |s: &str| s.parse::<u64>().map_err(|_| format!("bad number {s:?}"));
    let rec = SnapshotEdgeRecord { src: num(src)?, dst: num(dst)?, first: num(first)?, last: num(last)? };
    if rec.first > rec.last {
        return Err(format!("first snapshot {} after last {}", rec.first, rec.last));
    }
    if rec.last >= snapshots {
        return Err(format!("snapshot {} outside 0..{snapshots}", rec.last));
    }
    Ok(rec)
}

/// Reads the edge list into bulk-load records. Repeated pairs union their
/// intervals; `#` lines are comments.
pub fn read_snapshot_dataset(
    reader: impl BufRead,
    opts: SnapshotOptions,
) -> Result<(Vec<NodeRecord>, Vec<EdgeRecord>), IngestError> {
    if opts.snapshots == 0 {
        return Err(IngestError::Parse { line: 0, msg: "snapshot count must be positive".into() });
    }
    let mut edges: BTreeMap<(Vid, Vid), IntervalSet> = BTreeMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let rec = parse_snapshot_line(line, opts.snapshots).map_err(|msg| IngestError::Parse { line: i + 1, msg })?;
        edges.entry((rec.src, rec.dst)).or_default().union_insert(rec.interval());
    }
    let mut lifespans: BTreeMap<Vid, IntervalSet> = BTreeMap::new();
    let full = Interval::new(0, opts.snapshots).expect("positive snapshot count");
    for ((s, d), ivs) in &edges {
        for v in [s, d] {
            let span = lifespans.entry(*v).or_default();
            if opts.full_range_vertices {
                *span = IntervalSet::single(full);
            } else {
                for iv in ivs.iter() {
                    span.union_insert(*iv);
                }
            }
        }
    }
    let nodes = lifespans
        .into_iter()
        .map(|(vid, lifespan)| NodeRecord { vid, lifespan, attributes: BTreeMap::new() })
        .collect();
    let edges = edges
        .into_iter()
        .map(|((src, dst), intervals)| EdgeRecord { src, dst, intervals, attributes: BTreeMap::new() })
        .collect();
    Ok((nodes, edges))
}

pub fn read_snapshot_file(
    path: &Path,
    opts: SnapshotOptions,
) -> Result<(Vec<NodeRecord>, Vec<EdgeRecord>), IngestError> {
    let f = File::open(path).map_err(|e| IngestError::io(path, e))?;
    read_snapshot_dataset(BufReader::new(f), opts)
}
