//! Local and global queries over a committed snapshot.
//!
//! Local queries (vertex history, one-hop) decode single nodes by key.
//! Global queries (degree distribution, average degree) run in one of three
//! modes that differ only in what is fetched and where filtering happens:
//! RA reads every document and filters on the client, RR finds relevant
//! vertex keys first and fetches their records by key, ID pushes the
//! interval predicate and a projection into the store.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::docstore::codec::encoded_len;
use crate::docstore::{BufferGauge, Cursor, Document, ScanSpec, Snapshot, StoreError, Value, DEFAULT_BATCH_SIZE};
use crate::layout::{interval_of, names, require_u64, u, DiachronicNode, Layout, LayoutError, LayoutKind};
use crate::temporal::{Interval, TimeInstant, Vid, ALIVE_END};

/// Upper bound on buckets per global query.
pub const MAX_BUCKETS: u64 = 1 << 20;

#[derive(Debug, Error)]
pub enum QueryError {
    #[error("invalid query: {0}")]
    Invalid(String),
    #[error(transparent)]
    Layout(#[from] LayoutError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryMode {
    Ra,
    Rr,
    Id,
}

impl QueryMode {
    pub const ALL: [QueryMode; 3] = [QueryMode::Ra, QueryMode::Rr, QueryMode::Id];

    pub fn as_str(self) -> &'static str {
        match self {
            QueryMode::Ra => "ra",
            QueryMode::Rr => "rr",
            QueryMode::Id => "id",
        }
    }
}

impl fmt::Display for QueryMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for QueryMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ra" => Ok(QueryMode::Ra),
            "rr" => Ok(QueryMode::Rr),
            "id" => Ok(QueryMode::Id),
            other => Err(format!("unknown mode {other:?} (expected ra, rr or id)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegreeHistogram {
    pub bucket: TimeInstant,
    /// Degree to number of vertices with that degree.
    pub counts: BTreeMap<u64, u64>,
}

impl DegreeHistogram {
    pub fn vertices(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn total_degree(&self) -> u64 {
        self.counts.iter().map(|(d, n)| d * n).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AverageDegree {
    pub bucket: TimeInstant,
    pub total_degree: u64,
    pub vertices: u64,
    pub mean: f64,
}

impl From<&DegreeHistogram> for AverageDegree {
    fn from(h: &DegreeHistogram) -> Self {
        let (total_degree, vertices) = (h.total_degree(), h.vertices());
        let mean = if vertices == 0 { 0.0 } else { total_degree as f64 / vertices as f64 };
        AverageDegree { bucket: h.bucket, total_degree, vertices, mean }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GlobalQueryKind {
    DegreeDistribution,
    AverageDegree,
}

impl FromStr for GlobalQueryKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "degree_distribution" => Ok(GlobalQueryKind::DegreeDistribution),
            "average_degree" => Ok(GlobalQueryKind::AverageDegree),
            other => Err(format!("unknown global query {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GlobalQuery {
    pub kind: GlobalQueryKind,
    pub interval: Interval,
    pub granularity: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum GlobalResult {
    DegreeDistribution(Vec<DegreeHistogram>),
    AverageDegree(Vec<AverageDegree>),
}

impl GlobalResult {
    /// One JSON object per bucket.
    pub fn write_json_lines(&self, out: &mut impl Write) -> std::io::Result<()> {
        fn lines<T: Serialize>(items: &[T], out: &mut impl Write) -> std::io::Result<()> {
            for item in items {
                serde_json::to_writer(&mut *out, item)?;
                out.write_all(b"\n")?;
            }
            Ok(())
        }
        match self {
            GlobalResult::DegreeDistribution(h) => lines(h, out),
            GlobalResult::AverageDegree(a) => lines(a, out),
        }
    }

    pub fn to_json_lines(&self) -> String {
        let mut buf = Vec::new();
        self.write_json_lines(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("json is utf-8")
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct QueryMetrics {
    #[serde(serialize_with = "as_secs")]
    pub wall: Duration,
    /// Whole or projected documents handed to the client.
    pub documents_fetched: u64,
    /// Key-only records read by RR's first phase.
    pub keys_fetched: u64,
    /// Most documents held by the client at once.
    pub peak_buffered: u64,
    /// Encoded size of everything fetched.
    pub bytes: u64,
}

fn as_secs<S: serde::Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(d.as_secs_f64())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QueryOptions {
    pub batch_size: usize,
}

impl Default for QueryOptions {
    fn default() -> Self {
        Self { batch_size: DEFAULT_BATCH_SIZE }
    }
}

/// State of the graph at one instant.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct StaticGraph {
    pub vertices: BTreeMap<Vid, BTreeMap<String, Value>>,
    /// Source to target to edge attributes.
    pub edges: BTreeMap<Vid, BTreeMap<Vid, BTreeMap<String, Value>>>,
}

impl StaticGraph {
    pub fn edge_count(&self) -> usize {
        self.edges.values().map(BTreeMap::len).sum()
    }
}

/// History of `vid` restricted to `q`.
pub fn vertex_history(
    snap: &Snapshot,
    layout: Layout,
    vid: Vid,
    q: &Interval,
) -> Result<Option<DiachronicNode>, QueryError> {
    Ok(layout.decode_node(snap, vid)?.and_then(|n| n.restrict(q)))
}

/// Neighbors joined to `vid` (either direction) by an edge overlapping `q`.
pub fn one_hop(snap: &Snapshot, layout: Layout, vid: Vid, q: &Interval) -> Result<BTreeSet<Vid>, QueryError> {
    Ok(layout.decode_node(snap, vid)?.map(|n| n.neighbors_in(q)).unwrap_or_default())
}

pub fn snapshot_at(snap: &Snapshot, layout: Layout, t: TimeInstant) -> Result<StaticGraph, QueryError> {
    let mut g = StaticGraph::default();
    let Ok(q) = Interval::point(t) else {
        return Ok(g);
    };
    let vids: BTreeSet<Vid> =
        layout.relevance_keys(snap, &q, DEFAULT_BATCH_SIZE, None)?.collect_all()?.into_iter().map(|(v, _)| v).collect();
    for vid in vids {
        let node = layout
            .decode_node(snap, vid)?
            .ok_or_else(|| LayoutError::Corrupt(format!("relevant vertex {vid} does not decode")))?;
        g.vertices.insert(vid, node.attributes_at(t));
        let out: BTreeMap<Vid, BTreeMap<String, Value>> = node
            .out_edges
            .iter()
            .filter(|(_, e)| e.is_alive_at(t))
            .map(|(n, e)| (*n, crate::layout::attrs_at(&e.attributes, t)))
            .collect();
        if !out.is_empty() {
            g.edges.insert(vid, out);
        }
    }
    Ok(g)
}

/// Bucket start instants `q.start, q.start + g, ... < q.end`.
pub fn bucket_starts(q: &Interval, granularity: u64) -> Vec<TimeInstant> {
    let mut out = Vec::new();
    let mut b = q.start();
    while b < q.end() {
        out.push(b);
        b = match b.checked_add(granularity) {
            Some(n) => n,
            None => break,
        };
    }
    out
}

fn check_global(q: &GlobalQuery) -> Result<u64, QueryError> {
    if q.granularity == 0 {
        return Err(QueryError::Invalid("granularity must be at least 1".into()));
    }
    if q.interval.end() == ALIVE_END {
        return Err(QueryError::Invalid("global queries need a bounded interval; clamp it to the store horizon".into()));
    }
    let n = q.interval.len().div_ceil(q.granularity);
    if n > MAX_BUCKETS {
        return Err(QueryError::Invalid(format!("{n} buckets exceed the limit of {MAX_BUCKETS}")));
    }
    Ok(n)
}

/// Client-side degree fold shared by all modes. Records outside the query
/// interval are ignored here, which is all the filtering RA gets.
struct DegreeAcc {
    q: Interval,
    g: u64,
    nbuckets: u64,
    /// (vid, bucket index) -> (alive, degree)
    cells: BTreeMap<(Vid, u64), (bool, u64)>,
}

impl DegreeAcc {
    fn new(q: Interval, g: u64, nbuckets: u64) -> Self {
        Self { q, g, nbuckets, cells: BTreeMap::new() }
    }

    fn buckets(&self, iv: &Interval) -> std::ops::Range<u64> {
        let Some(c) = iv.intersect(&self.q) else {
            return 0..0;
        };
        let first = (c.start() - self.q.start()).div_ceil(self.g);
        // last bucket start strictly below c.end
        let last = (c.end() - 1 - self.q.start()) / self.g + 1;
        first..last.min(self.nbuckets).max(first)
    }

    fn vertex(&mut self, vid: Vid, iv: &Interval) {
        for k in self.buckets(iv) {
            self.cells.entry((vid, k)).or_default().0 = true;
        }
    }

    fn edge(&mut self, vid: Vid, iv: &Interval) {
        for k in self.buckets(iv) {
            self.cells.entry((vid, k)).or_default().1 += 1;
        }
    }

    fn out_edge(&mut self, src: Vid, iv: &Interval) {
        self.edge(src, iv);
    }

    /// Incoming side of `src -> dst`; a self-loop was already counted.
    fn in_edge(&mut self, dst: Vid, src: Vid, iv: &Interval) {
        if src != dst {
            self.edge(dst, iv);
        }
    }

    fn finish(self) -> Vec<DegreeHistogram> {
        let mut hist: Vec<DegreeHistogram> = (0..self.nbuckets)
            .map(|k| DegreeHistogram { bucket: self.q.start() + k * self.g, counts: BTreeMap::new() })
            .collect();
        for ((_, k), (alive, deg)) in self.cells {
            if alive {
                *hist[k as usize].counts.entry(deg).or_default() += 1;
            }
        }
        hist
    }

    /// Folds an ST document (one lifespan fragment with embedded edges).
    fn st_doc(&mut self, d: &Document) -> Result<(), LayoutError> {
        let vid = require_u64(d, "vid")?;
        self.vertex(vid, &interval_of(d)?);
        for e in d.get_list("out") {
            let e = e.as_doc().ok_or_else(|| LayoutError::Corrupt("edge item is not a document".into()))?;
            self.out_edge(vid, &interval_of(e)?);
        }
        for e in d.get_list("in") {
            let e = e.as_doc().ok_or_else(|| LayoutError::Corrupt("edge item is not a document".into()))?;
            self.in_edge(vid, require_u64(e, "nbr")?, &interval_of(e)?);
        }
        Ok(())
    }

    /// Folds a record of one of the MT existence collections.
    fn mt_doc(&mut self, collection: &str, d: &Document) -> Result<(), LayoutError> {
        match collection {
            names::V_EXIST => self.vertex(require_u64(d, "vid")?, &interval_of(d)?),
            names::E_OUT_EXIST => self.out_edge(require_u64(d, "src")?, &interval_of(d)?),
            names::E_IN_EXIST => self.in_edge(require_u64(d, "dst")?, require_u64(d, "src")?, &interval_of(d)?),
            _ => {}
        }
        Ok(())
    }
}

struct Meter {
    gauge: BufferGauge,
    documents: u64,
    keys: u64,
    bytes: u64,
}

impl Meter {
    fn new() -> Self {
        Self { gauge: BufferGauge::new(), documents: 0, keys: 0, bytes: 0 }
    }

    /// Drains a cursor batch by batch into `f`.
    fn drain(
        &mut self,
        mut cursor: Cursor,
        mut f: impl FnMut(&Document) -> Result<(), LayoutError>,
    ) -> Result<(), QueryError> {
        while let Some(batch) = cursor.next_batch() {
            for d in batch.iter() {
                f(d)?;
            }
        }
        let s = cursor.stats();
        self.documents += s.returned;
        self.bytes += s.bytes;
        Ok(())
    }

    /// Keyed fetch of one document, counted as fetched and buffered while
    /// in use.
    fn get(&mut self, snap: &Snapshot, coll: &str, key: Vec<Value>) -> Result<Option<Document>, QueryError> {
        let d = snap.get_by_key(coll, &key)?;
        if let Some(d) = &d {
            self.documents += 1;
            self.bytes += encoded_len(d) as u64;
        }
        Ok(d)
    }

    fn metrics(&self, wall: Duration) -> QueryMetrics {
        QueryMetrics {
            wall,
            documents_fetched: self.documents,
            keys_fetched: self.keys,
            peak_buffered: self.gauge.peak() as u64,
            bytes: self.bytes,
        }
    }
}

fn scan(spec: ScanSpec, opts: &QueryOptions, gauge: &BufferGauge) -> ScanSpec {
    spec.batch_size(opts.batch_size).gauge(gauge.clone())
}

fn fold_ra(snap: &Snapshot, layout: Layout, acc: &mut DegreeAcc, m: &mut Meter, opts: &QueryOptions) -> Result<(), QueryError> {
    layout.check(snap)?;
    let colls: Vec<String> = snap.collection_names().cloned().collect();
    for coll in colls {
        let cursor = snap.scan(scan(ScanSpec::full(coll.as_str()), opts, &m.gauge))?;
        match layout.kind() {
            LayoutKind::St => m.drain(cursor, |d| acc.st_doc(d))?,
            LayoutKind::Mt => m.drain(cursor, |d| acc.mt_doc(&coll, d))?,
        }
    }
    Ok(())
}

fn fold_rr(snap: &Snapshot, layout: Layout, acc: &mut DegreeAcc, m: &mut Meter, opts: &QueryOptions) -> Result<(), QueryError> {
    let mut keys = layout.relevance_keys(snap, &acc.q, opts.batch_size, None)?;
    let mut relevant: BTreeMap<Vid, Vec<Interval>> = BTreeMap::new();
    while let Some(batch) = keys.next_batch() {
        for (vid, iv) in batch? {
            relevant.entry(vid).or_default().push(iv);
        }
    }
    m.keys += keys.stats().returned;
    m.bytes += keys.stats().bytes;
    for (vid, frags) in relevant {
        match layout.kind() {
            LayoutKind::St => {
                for iv in frags {
                    if let Some(d) = m.get(snap, names::ST_NODES, layout.vertex_key(vid, &iv))? {
                        m.gauge.acquire(1);
                        let r = acc.st_doc(&d);
                        m.gauge.release(1);
                        r?;
                    }
                }
            }
            LayoutKind::Mt => {
                let mut held = 0;
                for iv in &frags {
                    if let Some(d) = m.get(snap, names::V_EXIST, layout.vertex_key(vid, iv))? {
                        m.gauge.acquire(1);
                        held += 1;
                        acc.mt_doc(names::V_EXIST, &d)?;
                    }
                }
                for coll in [names::E_OUT_EXIST, names::E_IN_EXIST] {
                    let spec = scan(ScanSpec::key_prefix(coll, vec![u(vid)]), opts, &m.gauge);
                    m.drain(snap.scan(spec)?, |d| acc.mt_doc(coll, d))?;
                }
                m.gauge.release(held);
            }
        }
    }
    Ok(())
}

fn fold_id(snap: &Snapshot, layout: Layout, acc: &mut DegreeAcc, m: &mut Meter, opts: &QueryOptions) -> Result<(), QueryError> {
    let q = acc.q;
    let g = Some(m.gauge.clone());
    match layout.kind() {
        LayoutKind::St => {
            let needed = ["vid", "start", "end", "out.start", "out.end", "in.nbr", "in.start", "in.end"];
            let cursor = layout.pushdown_scan(snap, names::ST_NODES, &q, &needed, opts.batch_size, g)?;
            m.drain(cursor, |d| acc.st_doc(d))?;
        }
        LayoutKind::Mt => {
            let plan: [(&str, &[&str]); 3] = [
                (names::V_EXIST, &["vid", "start", "end"]),
                (names::E_OUT_EXIST, &["src", "start", "end"]),
                (names::E_IN_EXIST, &["src", "dst", "start", "end"]),
            ];
            for (coll, needed) in plan {
                let cursor = layout.pushdown_scan(snap, coll, &q, needed, opts.batch_size, g.clone())?;
                m.drain(cursor, |d| acc.mt_doc(coll, d))?;
            }
        }
    }
    Ok(())
}

/// Degree histograms per bucket, with the metrics of the chosen mode.
pub fn degree_distribution(
    snap: &Snapshot,
    layout: Layout,
    q: &Interval,
    granularity: u64,
    mode: QueryMode,
    opts: &QueryOptions,
) -> Result<(Vec<DegreeHistogram>, QueryMetrics), QueryError> {
    let query = GlobalQuery { kind: GlobalQueryKind::DegreeDistribution, interval: *q, granularity };
    let nbuckets = check_global(&query)?;
    let started = Instant::now();
    let mut acc = DegreeAcc::new(*q, granularity, nbuckets);
    let mut m = Meter::new();
    match mode {
        QueryMode::Ra => fold_ra(snap, layout, &mut acc, &mut m, opts)?,
        QueryMode::Rr => fold_rr(snap, layout, &mut acc, &mut m, opts)?,
        QueryMode::Id => fold_id(snap, layout, &mut acc, &mut m, opts)?,
    }
    let hist = acc.finish();
    Ok((hist, m.metrics(started.elapsed())))
}

pub fn average_degree(
    snap: &Snapshot,
    layout: Layout,
    q: &Interval,
    granularity: u64,
    mode: QueryMode,
    opts: &QueryOptions,
) -> Result<(Vec<AverageDegree>, QueryMetrics), QueryError> {
    let (hist, metrics) = degree_distribution(snap, layout, q, granularity, mode, opts)?;
    Ok((hist.iter().map(AverageDegree::from).collect(), metrics))
}

pub fn execute_global(
    snap: &Snapshot,
    layout: Layout,
    query: &GlobalQuery,
    mode: QueryMode,
    opts: &QueryOptions,
) -> Result<(GlobalResult, QueryMetrics), QueryError> {
    let (hist, metrics) = degree_distribution(snap, layout, &query.interval, query.granularity, mode, opts)?;
    let result = match query.kind {
        GlobalQueryKind::DegreeDistribution => GlobalResult::DegreeDistribution(hist),
        GlobalQueryKind::AverageDegree => GlobalResult::AverageDegree(hist.iter().map(AverageDegree::from).collect()),
    };
    Ok((result, metrics))
}

/// `q` with an unbounded end replaced by `horizon`.
pub fn clamp_interval(q: &Interval, horizon: TimeInstant) -> Result<Interval, QueryError> {
    if q.end() != ALIVE_END {
        return Ok(*q);
    }
    Interval::new(q.start(), horizon.max(q.start() + 1)).map_err(|e| QueryError::Invalid(e.to_string()))
}
