//! Diachronic nodes and their two physical layouts.
//!
//! A [`DiachronicNode`] is the full history of one vertex: lifespan,
//! attribute histories and the histories of its incoming and outgoing
//! edges. [`Layout`] maps it onto doc-store collections either as one
//! document per lifespan interval (ST) or split across existence and
//! per-attribute collections for vertices and edges (MT).

mod mt;
mod node;
mod st;

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Bound;
use std::str::FromStr;

use thiserror::Error;

use crate::docstore::{
    BufferGauge, CmpOp, CollectionSpec, Cursor, Document, Key, Predicate, Projection, ScanSpec, Snapshot, StoreError, Value,
    WriteBatch,
};
use crate::temporal::{Interval, Vid};

pub use node::{coalesce, AttrEntry, AttrHistory, DiachronicNode, EdgeHistory, NodeCounts};
pub(crate) use node::attrs_at;

#[derive(Debug, Error)]
pub enum LayoutError {
    #[error("store does not hold a {0} layout")]
    Mismatch(LayoutKind),
    #[error("corrupt layout: {0}")]
    Corrupt(String),
    #[error("invalid node {vid}: {reason}")]
    InvalidNode { vid: Vid, reason: String },
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayoutKind {
    St,
    Mt,
}

impl LayoutKind {
    pub const ALL: [LayoutKind; 2] = [LayoutKind::St, LayoutKind::Mt];

    pub fn as_str(self) -> &'static str {
        match self {
            LayoutKind::St => "st",
            LayoutKind::Mt => "mt",
        }
    }
}

impl fmt::Display for LayoutKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LayoutKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "st" => Ok(LayoutKind::St),
            "mt" => Ok(LayoutKind::Mt),
            other => Err(format!("unknown layout {other:?} (expected st or mt)")),
        }
    }
}

/// Collection names used by the layouts.
pub mod names {
    pub const ST_NODES: &str = "nodes";
    pub const V_EXIST: &str = "v_exist";
    pub const V_ATTR: &str = "v_attr_";
    pub const E_OUT_EXIST: &str = "e_out_exist";
    pub const E_OUT_ATTR: &str = "e_out_attr_";
    pub const E_IN_EXIST: &str = "e_in_exist";
    pub const E_IN_ATTR: &str = "e_in_attr_";
}

/// A layout bound to its collections. Stateless apart from the kind; the
/// store handle is passed per call.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    kind: LayoutKind,
}

pub(crate) fn u(v: u64) -> Value {
    Value::UInt(v)
}

pub(crate) fn interval_of(doc: &Document) -> Result<Interval, LayoutError> {
    let s = doc.get_u64("start");
    let e = doc.get_u64("end");
    match (s, e) {
        (Some(s), Some(e)) => Interval::new(s, e).map_err(|err| LayoutError::Corrupt(err.to_string())),
        _ => Err(LayoutError::Corrupt(format!("record without interval: {doc:?}"))),
    }
}

pub(crate) fn require_u64(doc: &Document, field: &str) -> Result<u64, LayoutError> {
    doc.get_u64(field).ok_or_else(|| LayoutError::Corrupt(format!("record without {field}: {doc:?}")))
}

/// Overlap test `start < q.end && end > q.start` over a `(start, end)` index.
pub(crate) fn overlap_scan(collection: &str, q: &Interval) -> ScanSpec {
    ScanSpec::index_range(collection, "start_end", Bound::Unbounded, Bound::Excluded(vec![u(q.end())]))
        .filter(Predicate::cmp("end", CmpOp::Gt, q.start()))
}

impl Layout {
    pub fn new(kind: LayoutKind) -> Self {
        Self { kind }
    }

    pub fn kind(&self) -> LayoutKind {
        self.kind
    }

    /// Detects the layout a store was created with.
    pub fn detect(snap: &Snapshot) -> Option<Layout> {
        if snap.collection(names::ST_NODES).is_some() {
            Some(Layout::new(LayoutKind::St))
        } else if snap.collection(names::V_EXIST).is_some() {
            Some(Layout::new(LayoutKind::Mt))
        } else {
            None
        }
    }

    /// Batch creating the base collections and their indexes (idempotent).
    pub fn schema_batch(&self) -> WriteBatch {
        let mut b = WriteBatch::new();
        let specs = match self.kind {
            LayoutKind::St => st::collections(),
            LayoutKind::Mt => mt::base_collections(),
        };
        specs.into_iter().for_each(|s| b.ensure_collection(s));
        b
    }

    pub fn check(&self, snap: &Snapshot) -> Result<(), LayoutError> {
        let base = match self.kind {
            LayoutKind::St => names::ST_NODES,
            LayoutKind::Mt => names::V_EXIST,
        };
        if snap.collection(base).is_none() {
            return Err(LayoutError::Mismatch(self.kind));
        }
        Ok(())
    }

    /// Batch that stores `node` from scratch.
    pub fn encode_node(&self, node: &DiachronicNode) -> Result<WriteBatch, LayoutError> {
        self.encode_change(None, Some(node))
    }

    /// Batch turning the stored form of `old` into that of `new`. `None`
    /// on either side means the node has no records.
    pub fn encode_change(
        &self,
        old: Option<&DiachronicNode>,
        new: Option<&DiachronicNode>,
    ) -> Result<WriteBatch, LayoutError> {
        if let Some(n) = new {
            n.validate().map_err(|reason| LayoutError::InvalidNode { vid: n.vid, reason })?;
        }
        if let (Some(o), Some(n)) = (old, new) {
            if o.vid != n.vid {
                return Err(LayoutError::InvalidNode { vid: n.vid, reason: format!("replaces node {}", o.vid) });
            }
        }
        let mut batch = WriteBatch::new();
        match self.kind {
            LayoutKind::St => st::encode_change(old, new, &mut batch),
            LayoutKind::Mt => mt::encode_change(old, new, &mut batch),
        }
        Ok(batch)
    }

    pub fn decode_node(&self, snap: &Snapshot, vid: Vid) -> Result<Option<DiachronicNode>, LayoutError> {
        self.check(snap)?;
        match self.kind {
            LayoutKind::St => st::decode(snap, vid),
            LayoutKind::Mt => mt::decode(snap, vid),
        }
    }

    /// Every stored vertex id.
    pub fn vids(&self, snap: &Snapshot) -> Result<Vec<Vid>, LayoutError> {
        self.check(snap)?;
        let coll = match self.kind {
            LayoutKind::St => names::ST_NODES,
            LayoutKind::Mt => names::V_EXIST,
        };
        let mut out: Vec<Vid> = Vec::new();
        for (key, _) in snap.collection(coll).expect("checked").iter() {
            let vid = key[0].as_u64().ok_or_else(|| LayoutError::Corrupt(format!("bad key {key:?}")))?;
            if out.last() != Some(&vid) {
                out.push(vid);
            }
        }
        Ok(out)
    }

    /// Name of the collection holding vertex existence records.
    pub fn vertex_collection(&self) -> &'static str {
        match self.kind {
            LayoutKind::St => names::ST_NODES,
            LayoutKind::Mt => names::V_EXIST,
        }
    }

    /// Vertex ids and lifespan fragments overlapping `q`, read through the
    /// `(start, end)` index with only those fields projected.
    pub fn relevance_keys(
        &self,
        snap: &Snapshot,
        q: &Interval,
        batch_size: usize,
        gauge: Option<BufferGauge>,
    ) -> Result<RelevanceCursor, LayoutError> {
        self.check(snap)?;
        let mut spec = overlap_scan(self.vertex_collection(), q)
            .project(Projection::paths(["vid", "start", "end"]))
            .batch_size(batch_size);
        if let Some(g) = gauge {
            spec = spec.gauge(g);
        }
        Ok(RelevanceCursor { inner: snap.scan(spec)? })
    }

    /// Field paths a pushdown scan may project from `collection`.
    pub fn schema_paths(&self, collection: &str) -> &'static [&'static str] {
        match self.kind {
            LayoutKind::St => st::SCHEMA_PATHS,
            LayoutKind::Mt => mt::schema_paths(collection),
        }
    }

    /// Server-side overlap filter plus projection on one layout collection.
    pub fn pushdown_scan(
        &self,
        snap: &Snapshot,
        collection: &str,
        q: &Interval,
        needed: &[&str],
        batch_size: usize,
        gauge: Option<BufferGauge>,
    ) -> Result<Cursor, LayoutError> {
        self.check(snap)?;
        let allowed = self.schema_paths(collection);
        for path in needed {
            if !allowed.iter().any(|a| a == path || a.starts_with(&format!("{path}."))) {
                return Err(StoreError::PredicateType(format!("{path:?} is not a field of {collection}")).into());
            }
        }
        let mut spec = ScanSpec::full(collection)
            .filter(Predicate::overlaps("start", "end", *q))
            .project(Projection::paths(needed.iter().copied()))
            .batch_size(batch_size);
        if let Some(g) = gauge {
            spec = spec.gauge(g);
        }
        Ok(snap.scan(spec)?)
    }

    /// Stored record count per collection.
    pub fn record_counts(&self, snap: &Snapshot) -> BTreeMap<String, usize> {
        snap.collections().map(|c| (c.name().to_owned(), c.len())).collect()
    }

    /// Record count this layout must hold for nodes with the given totals.
    pub fn expected_records(&self, counts: &NodeCounts) -> usize {
        match self.kind {
            LayoutKind::St => counts.lifespan_intervals,
            LayoutKind::Mt => {
                // out + in equals twice the edge intervals once both
                // endpoints are stored
                counts.lifespan_intervals
                    + counts.attribute_intervals
                    + counts.edge_intervals
                    + counts.in_edge_intervals
                    + counts.edge_attribute_intervals
            }
        }
    }

    /// Primary key of the record carrying the lifespan interval starting at
    /// `start`.
    pub fn vertex_key(&self, vid: Vid, iv: &Interval) -> Key {
        match self.kind {
            LayoutKind::St => vec![u(vid), u(iv.start()), u(iv.end())],
            LayoutKind::Mt => vec![u(vid), u(iv.start())],
        }
    }
}

/// Stream of `(vid, lifespan fragment)` pairs.
pub struct RelevanceCursor {
    inner: Cursor,
}

impl RelevanceCursor {
    pub fn next_batch(&mut self) -> Option<Result<Vec<(Vid, Interval)>, LayoutError>> {
        let batch = self.inner.next_batch()?;
        Some(batch.iter().map(|d| Ok((require_u64(d, "vid")?, interval_of(d)?))).collect())
    }

    pub fn stats(&self) -> crate::docstore::CursorStats {
        self.inner.stats()
    }

    pub fn collect_all(mut self) -> Result<Vec<(Vid, Interval)>, LayoutError> {
        let mut out = Vec::new();
        while let Some(b) = self.next_batch() {
            out.extend(b?);
        }
        Ok(out)
    }
}

/// Stored records of one node, by collection and primary key.
pub(crate) type RecordSet = BTreeMap<(String, Key), Document>;

/// Appends the ops that turn `old` records into `new` ones. Collections
/// in `ensure` are created first when missing.
pub(crate) fn diff_records(old: &RecordSet, new: &RecordSet, ensure: Vec<CollectionSpec>, batch: &mut WriteBatch) {
    for spec in ensure {
        batch.ensure_collection(spec);
    }
    for (coll, key) in old.keys() {
        if !new.contains_key(&(coll.clone(), key.clone())) {
            batch.delete(coll.clone(), key.clone());
        }
    }
    for ((coll, key), doc) in new {
        if old.get(&(coll.clone(), key.clone())) != Some(doc) {
            batch.upsert(coll.clone(), doc.clone());
        }
    }
}

pub(crate) fn entry_doc(e: &AttrEntry) -> Document {
    Document::new().with("value", e.value.clone()).with("start", e.interval.start()).with("end", e.interval.end())
}

pub(crate) fn corrupt(e: impl fmt::Display) -> LayoutError {
    LayoutError::Corrupt(e.to_string())
}
