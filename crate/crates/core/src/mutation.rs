//! Event-driven mutation of a stored temporal graph.
//!
//! Every operation reads the affected diachronic nodes from the last
//! committed snapshot, edits them in memory and commits the difference as
//! one atomic batch, so a failed or aborted commit leaves no trace.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::docstore::{Snapshot, Store, StoreError, Value, WriteBatch};
use crate::layout::{coalesce, AttrEntry, AttrHistory, DiachronicNode, EdgeHistory, Layout, LayoutError, LayoutKind, NodeCounts};
use crate::temporal::{Interval, IntervalSet, LifespanIndex, TemporalError, TimeInstant, Vid, ALIVE_END};

/// Owner of a property.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PropTarget {
    Node(Vid),
    Edge(Vid, Vid),
}

impl fmt::Display for PropTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PropTarget::Node(v) => write!(f, "node {v}"),
            PropTarget::Edge(s, d) => write!(f, "edge {s}->{d}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EventKind {
    InsertNode,
    InsertEdge,
    InsertProperty,
    DeleteNode,
    DeleteEdge,
    DeleteProperty,
}

impl EventKind {
    pub const ALL: [EventKind; 6] = [
        EventKind::InsertNode,
        EventKind::InsertEdge,
        EventKind::InsertProperty,
        EventKind::DeleteNode,
        EventKind::DeleteEdge,
        EventKind::DeleteProperty,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::InsertNode => "INSERT_NODE",
            EventKind::InsertEdge => "INSERT_EDGE",
            EventKind::InsertProperty => "INSERT_PROPERTY",
            EventKind::DeleteNode => "DELETE_NODE",
            EventKind::DeleteEdge => "DELETE_EDGE",
            EventKind::DeleteProperty => "DELETE_PROPERTY",
        }
    }

    pub fn parse(s: &str) -> Option<EventKind> {
        EventKind::ALL.into_iter().find(|k| k.as_str() == s)
    }

    pub fn is_insert(self) -> bool {
        matches!(self, EventKind::InsertNode | EventKind::InsertEdge | EventKind::InsertProperty)
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum MutationEvent {
    InsertNode { vid: Vid, t: TimeInstant },
    InsertEdge { src: Vid, dst: Vid, t: TimeInstant },
    InsertProperty { target: PropTarget, name: String, value: Value, t: TimeInstant },
    DeleteNode { vid: Vid, t: TimeInstant },
    DeleteEdge { src: Vid, dst: Vid, t: TimeInstant },
    DeleteProperty { target: PropTarget, name: String, t: TimeInstant },
}

impl MutationEvent {
    pub fn time(&self) -> TimeInstant {
        match self {
            MutationEvent::InsertNode { t, .. }
            | MutationEvent::InsertEdge { t, .. }
            | MutationEvent::InsertProperty { t, .. }
            | MutationEvent::DeleteNode { t, .. }
            | MutationEvent::DeleteEdge { t, .. }
            | MutationEvent::DeleteProperty { t, .. } => *t,
        }
    }

    pub fn kind(&self) -> EventKind {
        match self {
            MutationEvent::InsertNode { .. } => EventKind::InsertNode,
            MutationEvent::InsertEdge { .. } => EventKind::InsertEdge,
            MutationEvent::InsertProperty { .. } => EventKind::InsertProperty,
            MutationEvent::DeleteNode { .. } => EventKind::DeleteNode,
            MutationEvent::DeleteEdge { .. } => EventKind::DeleteEdge,
            MutationEvent::DeleteProperty { .. } => EventKind::DeleteProperty,
        }
    }
}

#[derive(Debug, Error)]
pub enum MutationError {
    #[error("node {vid} is already alive at {t}")]
    AlreadyAlive { vid: Vid, t: TimeInstant },
    #[error("endpoint {vid} is not alive at {t}")]
    EndpointNotAlive { vid: Vid, t: TimeInstant },
    #[error("edge {src}->{dst} is already alive at {t}")]
    EdgeAlreadyAlive { src: Vid, dst: Vid, t: TimeInstant },
    #[error("{target} is not alive at {t}")]
    OwnerNotAlive { target: PropTarget, t: TimeInstant },
    #[error("property {name:?} of {target} is already alive at {t}")]
    PropertyAlreadyAlive { target: PropTarget, name: String, t: TimeInstant },
    #[error("{what} is not alive at {t}")]
    NotAliveAt { what: String, t: TimeInstant },
    #[error("event at {t} precedes the last applied instant {clock}")]
    OutOfOrder { t: TimeInstant, clock: TimeInstant },
    #[error("time {0} is not a valid instant")]
    InvalidTime(TimeInstant),
    #[error("invariant violation: {}", .0.join("; "))]
    InvariantViolation(Vec<String>),
    #[error("event {index}: {source}")]
    AtEvent { index: usize, source: Box<MutationError> },
    #[error(transparent)]
    Layout(#[from] LayoutError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

impl MutationError {
    /// Short stable name used for error counters.
    pub fn name(&self) -> &'static str {
        match self {
            MutationError::AlreadyAlive { .. } => "AlreadyAlive",
            MutationError::EndpointNotAlive { .. } => "EndpointNotAlive",
            MutationError::EdgeAlreadyAlive { .. } => "EdgeAlreadyAlive",
            MutationError::OwnerNotAlive { .. } => "OwnerNotAlive",
            MutationError::PropertyAlreadyAlive { .. } => "PropertyAlreadyAlive",
            MutationError::NotAliveAt { .. } => "NotAliveAt",
            MutationError::OutOfOrder { .. } => "OutOfOrder",
            MutationError::InvalidTime(_) => "InvalidTime",
            MutationError::InvariantViolation(_) => "InvariantViolation",
            MutationError::AtEvent { source, .. } => source.name(),
            MutationError::Layout(_) => "Layout",
            MutationError::Store(StoreError::Aborted { .. }) => "Aborted",
            MutationError::Store(_) => "Store",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum ErrorPolicy {
    #[default]
    FailFast,
    SkipAndCount,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ApplyStats {
    pub applied: BTreeMap<EventKind, u64>,
    pub errors: BTreeMap<String, u64>,
}

impl ApplyStats {
    pub fn applied(&self, kind: EventKind) -> u64 {
        self.applied.get(&kind).copied().unwrap_or(0)
    }

    pub fn total_applied(&self) -> u64 {
        self.applied.values().sum()
    }

    pub fn total_errors(&self) -> u64 {
        self.errors.values().sum()
    }
}

/// A vertex with explicit intervals, for bulk loading.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeRecord {
    pub vid: Vid,
    pub lifespan: IntervalSet,
    pub attributes: BTreeMap<String, AttrHistory>,
}

/// An edge with explicit intervals, for bulk loading.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeRecord {
    pub src: Vid,
    pub dst: Vid,
    pub intervals: IntervalSet,
    pub attributes: BTreeMap<String, AttrHistory>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct GraphStats {
    pub vertices: usize,
    /// Distinct directed vertex pairs that ever had an edge.
    pub edges: usize,
    pub intervals: NodeCounts,
    pub documents: usize,
}

fn before(t: TimeInstant) -> Option<Interval> {
    Interval::new(0, t).ok()
}

fn clip_history(h: &mut AttrHistory, t: TimeInstant) {
    let Some(q) = before(t) else {
        h.clear();
        return;
    };
    h.retain_mut(|e| match e.interval.intersect(&q) {
        Some(iv) => {
            e.interval = iv;
            true
        }
        None => false,
    });
}

fn clip_edge(e: &EdgeHistory, t: TimeInstant) -> Option<EdgeHistory> {
    let q = before(t)?;
    let intervals = e.intervals.intersect(&q);
    if intervals.is_empty() {
        return None;
    }
    let mut attributes = e.attributes.clone();
    attributes.values_mut().for_each(|h| clip_history(h, t));
    attributes.retain(|_, h| !h.is_empty());
    Some(EdgeHistory { intervals, attributes })
}

fn alive_entry(h: Option<&AttrHistory>, t: TimeInstant) -> bool {
    h.is_some_and(|h| h.iter().any(|e| e.interval.contains(t)))
}

fn push_entry(h: &mut AttrHistory, value: Value, t: TimeInstant) {
    let entry = AttrEntry { value, interval: Interval::alive_from(t).expect("checked time") };
    let pos = h.partition_point(|e| e.interval.start() < t);
    h.insert(pos, entry);
    coalesce(h);
}

/// Nodes touched by one operation, with their committed form.
struct Txn<'a> {
    snap: &'a Snapshot,
    layout: Layout,
    nodes: BTreeMap<Vid, (Option<DiachronicNode>, Option<DiachronicNode>)>,
}

impl<'a> Txn<'a> {
    fn new(snap: &'a Snapshot, layout: Layout) -> Self {
        Self { snap, layout, nodes: BTreeMap::new() }
    }

    fn load(&mut self, vid: Vid) -> Result<(), MutationError> {
        if !self.nodes.contains_key(&vid) {
            let old = self.layout.decode_node(self.snap, vid)?;
            self.nodes.insert(vid, (old.clone(), old));
        }
        Ok(())
    }

    fn node(&mut self, vid: Vid) -> Result<Option<&mut DiachronicNode>, MutationError> {
        self.load(vid)?;
        Ok(self.nodes.get_mut(&vid).and_then(|(_, n)| n.as_mut()))
    }

    fn node_or_new(&mut self, vid: Vid) -> Result<&mut DiachronicNode, MutationError> {
        self.load(vid)?;
        Ok(self.nodes.get_mut(&vid).expect("loaded").1.get_or_insert_with(|| DiachronicNode::new(vid)))
    }

    fn alive(&mut self, vid: Vid, t: TimeInstant) -> Result<bool, MutationError> {
        Ok(self.node(vid)?.is_some_and(|n| n.is_alive_at(t)))
    }

    fn set(&mut self, vid: Vid, node: Option<DiachronicNode>) {
        self.nodes.get_mut(&vid).expect("loaded").1 = node;
    }

    fn into_batch(self) -> Result<(WriteBatch, Vec<(Vid, Option<IntervalSet>)>), MutationError> {
        let mut batch = WriteBatch::new().with_base(self.snap.version());
        let mut lifespans = Vec::new();
        for (vid, (old, new)) in self.nodes {
            if old == new {
                continue;
            }
            batch.extend(self.layout.encode_change(old.as_ref(), new.as_ref())?);
            lifespans.push((vid, new.map(|n| n.lifespan)));
        }
        Ok((batch, lifespans))
    }
}

/// A temporal graph stored in one layout.
pub struct Graph {
    store: Store,
    layout: Layout,
    lifespans: LifespanIndex,
    clock: TimeInstant,
}

impl Graph {
    pub fn new(kind: LayoutKind) -> Result<Self, MutationError> {
        let layout = Layout::new(kind);
        let store = Store::new();
        store.commit_batch(layout.schema_batch())?;
        Ok(Self { store, layout, lifespans: LifespanIndex::new(), clock: 0 })
    }

    /// Wraps an existing store. The clock resumes after the latest stored
    /// interval bound.
    pub fn open(store: Store) -> Result<Self, MutationError> {
        let snap = store.snapshot();
        let layout = Layout::detect(&snap).ok_or_else(|| {
            LayoutError::Corrupt("store holds neither layout".into())
        })?;
        let mut g = Self { store, layout, lifespans: LifespanIndex::new(), clock: 0 };
        for node in g.nodes()? {
            g.clock = g.clock.max(latest_bound(&node));
            g.lifespans.set(node.vid, node.lifespan);
        }
        g.lifespans.rebuild();
        Ok(g)
    }

    pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Self, MutationError> {
        Self::open(Store::load_checkpoint(path)?)
    }

    pub fn persist_checkpoint(&self, path: impl AsRef<Path>) -> Result<(), MutationError> {
        Ok(self.store.persist_checkpoint(path)?)
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn snapshot(&self) -> Snapshot {
        self.store.snapshot()
    }

    /// Last instant any applied event referred to.
    pub fn clock(&self) -> TimeInstant {
        self.clock
    }

    pub fn lifespans(&self) -> &LifespanIndex {
        &self.lifespans
    }

    pub fn node(&self, vid: Vid) -> Result<Option<DiachronicNode>, MutationError> {
        Ok(self.layout.decode_node(&self.snapshot(), vid)?)
    }

    /// Every stored node, in vid order.
    pub fn nodes(&self) -> Result<Vec<DiachronicNode>, MutationError> {
        let snap = self.snapshot();
        let mut out = Vec::new();
        for vid in self.layout.vids(&snap)? {
            out.extend(self.layout.decode_node(&snap, vid)?);
        }
        Ok(out)
    }

    pub fn stats(&self) -> Result<GraphStats, MutationError> {
        let mut s = GraphStats { documents: self.snapshot().total_documents(), ..Default::default() };
        for n in self.nodes()? {
            s.vertices += 1;
            s.edges += n.out_edges.len();
            s.intervals += n.counts();
        }
        Ok(s)
    }

    /// The same graph re-encoded in another layout.
    pub fn convert(&self, kind: LayoutKind) -> Result<Graph, MutationError> {
        let mut g = Graph::new(kind)?;
        let mut batch = WriteBatch::new();
        for n in self.nodes()? {
            batch.extend(g.layout.encode_node(&n)?);
            g.lifespans.set(n.vid, n.lifespan);
        }
        g.store.commit_batch(batch)?;
        g.lifespans.rebuild();
        g.clock = self.clock;
        Ok(g)
    }

    fn check_time(&self, t: TimeInstant) -> Result<(), MutationError> {
        if t == ALIVE_END {
            return Err(MutationError::InvalidTime(t));
        }
        if t < self.clock {
            return Err(MutationError::OutOfOrder { t, clock: self.clock });
        }
        Ok(())
    }

    fn commit(&mut self, txn: Txn<'_>, t: TimeInstant) -> Result<(), MutationError> {
        let (batch, lifespans) = txn.into_batch()?;
        if !batch.is_empty() {
            self.store.commit_batch(batch)?;
        }
        for (vid, l) in lifespans {
            match l {
                Some(l) => self.lifespans.set(vid, l),
                None => {
                    self.lifespans.remove(&vid);
                }
            }
        }
        self.clock = t;
        Ok(())
    }

    pub fn insert_node(&mut self, vid: Vid, t: TimeInstant) -> Result<(), MutationError> {
        self.check_time(t)?;
        let snap = self.snapshot();
        let mut txn = Txn::new(&snap, self.layout);
        let node = txn.node_or_new(vid)?;
        if node.is_alive_at(t) {
            return Err(MutationError::AlreadyAlive { vid, t });
        }
        node.lifespan.union_insert(Interval::alive_from(t).expect("checked time"));
        self.commit(txn, t)
    }

    pub fn insert_edge(&mut self, src: Vid, dst: Vid, t: TimeInstant) -> Result<(), MutationError> {
        self.check_time(t)?;
        let snap = self.snapshot();
        let mut txn = Txn::new(&snap, self.layout);
        for v in [src, dst] {
            if !txn.alive(v, t)? {
                return Err(MutationError::EndpointNotAlive { vid: v, t });
            }
        }
        let iv = Interval::alive_from(t).expect("checked time");
        let s = txn.node(src)?.expect("alive");
        let out = s.out_edges.entry(dst).or_default();
        if out.is_alive_at(t) {
            return Err(MutationError::EdgeAlreadyAlive { src, dst, t });
        }
        out.intervals.union_insert(iv);
        txn.node(dst)?.expect("alive").in_edges.entry(src).or_default().intervals.union_insert(iv);
        self.commit(txn, t)
    }

    pub fn insert_property(
        &mut self,
        target: PropTarget,
        name: &str,
        value: Value,
        t: TimeInstant,
    ) -> Result<(), MutationError> {
        self.check_time(t)?;
        let snap = self.snapshot();
        let mut txn = Txn::new(&snap, self.layout);
        let not_alive = MutationError::OwnerNotAlive { target, t };
        let attrs = match target {
            PropTarget::Node(v) => match txn.node(v)? {
                Some(n) if n.is_alive_at(t) => &mut n.attributes,
                _ => return Err(not_alive),
            },
            PropTarget::Edge(s, d) => match txn.node(s)?.and_then(|n| n.out_edges.get_mut(&d)) {
                Some(e) if e.is_alive_at(t) => &mut e.attributes,
                _ => return Err(not_alive),
            },
        };
        if alive_entry(attrs.get(name), t) {
            return Err(MutationError::PropertyAlreadyAlive { target, name: name.to_owned(), t });
        }
        push_entry(attrs.entry(name.to_owned()).or_default(), value, t);
        self.commit(txn, t)
    }

    /// Ends the node at `t` together with its properties and every incident
    /// edge (on both endpoints) and the edges' properties.
    pub fn delete_node(&mut self, vid: Vid, t: TimeInstant) -> Result<(), MutationError> {
        self.check_time(t)?;
        let snap = self.snapshot();
        let mut txn = Txn::new(&snap, self.layout);
        let node = match txn.node(vid)? {
            Some(n) if n.is_alive_at(t) => n.clone(),
            _ => return Err(MutationError::NotAliveAt { what: format!("node {vid}"), t }),
        };
        let reaches = |e: &EdgeHistory| e.intervals.last().is_some_and(|iv| iv.end() > t);
        let outs: Vec<Vid> = node.out_edges.iter().filter(|(_, e)| reaches(e)).map(|(n, _)| *n).collect();
        let ins: Vec<Vid> = node.in_edges.iter().filter(|(_, e)| reaches(e)).map(|(n, _)| *n).collect();
        for nbr in outs {
            clip_pair(&mut txn, vid, nbr, t)?;
        }
        for nbr in ins {
            clip_pair(&mut txn, nbr, vid, t)?;
        }
        let node = txn.node(vid)?.expect("alive").clone();
        txn.set(vid, before(t).and_then(|q| node.restrict(&q)));
        self.commit(txn, t)
    }

    pub fn delete_edge(&mut self, src: Vid, dst: Vid, t: TimeInstant) -> Result<(), MutationError> {
        self.check_time(t)?;
        let snap = self.snapshot();
        let mut txn = Txn::new(&snap, self.layout);
        let alive = txn.node(src)?.and_then(|n| n.out_edges.get(&dst)).is_some_and(|e| e.is_alive_at(t));
        if !alive {
            return Err(MutationError::NotAliveAt { what: format!("edge {src}->{dst}"), t });
        }
        clip_pair(&mut txn, src, dst, t)?;
        self.commit(txn, t)
    }

    pub fn delete_property(&mut self, target: PropTarget, name: &str, t: TimeInstant) -> Result<(), MutationError> {
        self.check_time(t)?;
        let snap = self.snapshot();
        let mut txn = Txn::new(&snap, self.layout);
        let attrs = match target {
            PropTarget::Node(v) => txn.node(v)?.map(|n| &mut n.attributes),
            PropTarget::Edge(s, d) => txn.node(s)?.and_then(|n| n.out_edges.get_mut(&d)).map(|e| &mut e.attributes),
        };
        let Some(attrs) = attrs.filter(|a| alive_entry(a.get(name), t)) else {
            return Err(MutationError::NotAliveAt { what: format!("property {name:?} of {target}"), t });
        };
        let h = attrs.get_mut(name).expect("alive");
        clip_history(h, t);
        if h.is_empty() {
            attrs.remove(name);
        }
        self.commit(txn, t)
    }

    pub fn apply(&mut self, event: &MutationEvent) -> Result<(), MutationError> {
        match event {
            MutationEvent::InsertNode { vid, t } => self.insert_node(*vid, *t),
            MutationEvent::InsertEdge { src, dst, t } => self.insert_edge(*src, *dst, *t),
            MutationEvent::InsertProperty { target, name, value, t } => {
                self.insert_property(*target, name, value.clone(), *t)
            }
            MutationEvent::DeleteNode { vid, t } => self.delete_node(*vid, *t),
            MutationEvent::DeleteEdge { src, dst, t } => self.delete_edge(*src, *dst, *t),
            MutationEvent::DeleteProperty { target, name, t } => self.delete_property(*target, name, *t),
        }
    }

    /// Applies events in order. A decreasing timestamp always stops the
    /// stream; other errors stop it under [`ErrorPolicy::FailFast`] and are
    /// counted otherwise.
    pub fn apply_stream<'e, I>(&mut self, events: I, policy: ErrorPolicy) -> Result<ApplyStats, MutationError>
    where
        I: IntoIterator<Item = &'e MutationEvent>,
    {
        let mut stats = ApplyStats::default();
        let mut last = 0;
        for (index, ev) in events.into_iter().enumerate() {
            let t = ev.time();
            if t < last {
                let source = Box::new(MutationError::OutOfOrder { t, clock: last });
                return Err(MutationError::AtEvent { index, source });
            }
            last = t;
            match self.apply(ev) {
                Ok(()) => *stats.applied.entry(ev.kind()).or_default() += 1,
                Err(e) if policy == ErrorPolicy::SkipAndCount => {
                    log::debug!("skipping event {index}: {e}");
                    *stats.errors.entry(e.name().to_owned()).or_default() += 1;
                }
                Err(e) => return Err(MutationError::AtEvent { index, source: Box::new(e) }),
            }
        }
        Ok(stats)
    }

    /// Loads nodes and edges with explicit intervals in one batch, without
    /// per-event checks. The merged result must satisfy every node
    /// invariant; otherwise nothing is written.
    pub fn bulk_load(&mut self, nodes: Vec<NodeRecord>, edges: Vec<EdgeRecord>) -> Result<GraphStats, MutationError> {
        let snap = self.snapshot();
        let mut txn = Txn::new(&snap, self.layout);
        let mut violations = Vec::new();
        let mut stats = GraphStats::default();
        for rec in nodes {
            let n = txn.node_or_new(rec.vid)?;
            for iv in rec.lifespan.iter() {
                if n.lifespan.insert(*iv).is_err() {
                    violations.push(format!("node {}: lifespan {iv} overlaps an existing one", rec.vid));
                }
            }
            for (name, h) in rec.attributes {
                let dst = n.attributes.entry(name).or_default();
                dst.extend(h);
                dst.sort_by_key(|e| e.interval.start());
                coalesce(dst);
            }
            stats.vertices += 1;
        }
        for rec in edges {
            let (src, dst) = (rec.src, rec.dst);
            for v in [src, dst] {
                if txn.node(v)?.is_none() {
                    violations.push(format!("edge {src}->{dst}: endpoint {v} does not exist"));
                }
            }
            if txn.node(src)?.is_none() || txn.node(dst)?.is_none() {
                continue;
            }
            let out = txn.node(src)?.expect("exists").out_edges.entry(dst).or_default();
            for iv in rec.intervals.iter() {
                if out.intervals.insert(*iv).is_err() {
                    violations.push(format!("edge {src}->{dst}: interval {iv} overlaps an existing one"));
                }
            }
            for (name, h) in rec.attributes {
                let a = out.attributes.entry(name).or_default();
                a.extend(h);
                a.sort_by_key(|e| e.interval.start());
                coalesce(a);
            }
            let inc = txn.node(dst)?.expect("exists").in_edges.entry(src).or_default();
            rec.intervals.iter().for_each(|iv| inc.intervals.union_insert(*iv));
            stats.edges += 1;
        }
        let mut max_t = self.clock;
        for (vid, (_, n)) in &txn.nodes {
            if let Some(n) = n {
                if let Err(reason) = n.validate() {
                    violations.push(format!("node {vid}: {reason}"));
                }
                max_t = max_t.max(latest_bound(n));
            }
        }
        if !violations.is_empty() {
            return Err(MutationError::InvariantViolation(violations));
        }
        let docs_before = snap.total_documents();
        self.commit(txn, max_t)?;
        self.lifespans.rebuild();
        stats.documents = self.snapshot().total_documents() - docs_before;
        Ok(stats)
    }

    pub fn bulk_load_nodes(&mut self, nodes: Vec<NodeRecord>) -> Result<GraphStats, MutationError> {
        self.bulk_load(nodes, Vec::new())
    }

    pub fn bulk_load_edges(&mut self, edges: Vec<EdgeRecord>) -> Result<GraphStats, MutationError> {
        self.bulk_load(Vec::new(), edges)
    }
}

/// Clips edge `src -> dst` (and its properties) to before `t` on both ends.
fn clip_pair(txn: &mut Txn<'_>, src: Vid, dst: Vid, t: TimeInstant) -> Result<(), MutationError> {
    let s = txn.node(src)?.ok_or_else(|| LayoutError::Corrupt(format!("edge endpoint {src} missing")))?;
    match s.out_edges.get(&dst).and_then(|e| clip_edge(e, t)) {
        Some(e) => s.out_edges.insert(dst, e),
        None => s.out_edges.remove(&dst),
    };
    let d = txn.node(dst)?.ok_or_else(|| LayoutError::Corrupt(format!("edge endpoint {dst} missing")))?;
    match d.in_edges.get(&src).and_then(|e| clip_edge(e, t)) {
        Some(e) => d.in_edges.insert(src, e),
        None => d.in_edges.remove(&src),
    };
    Ok(())
}

/// Largest start or finite end stored anywhere in the node.
fn latest_bound(n: &DiachronicNode) -> TimeInstant {
    let bound = |iv: &Interval| if iv.is_alive() { iv.start() } else { iv.end() };
    let sets = n.out_edges.values().chain(n.in_edges.values()).flat_map(|e| {
        e.intervals.iter().copied().chain(e.attributes.values().flatten().map(|a| a.interval))
    });
    n.lifespan
        .iter()
        .copied()
        .chain(n.attributes.values().flatten().map(|a| a.interval))
        .chain(sets)
        .map(|iv| bound(&iv))
        .max()
        .unwrap_or(0)
}

impl From<TemporalError> for MutationError {
    fn from(e: TemporalError) -> Self {
        MutationError::InvariantViolation(vec![e.to_string()])
    }
}
