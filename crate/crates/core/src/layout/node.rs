use std::collections::BTreeMap;

use serde::Serialize;

use crate::docstore::Value;
use crate::temporal::{Interval, IntervalSet, TimeInstant, Vid};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AttrEntry {
    pub value: Value,
    pub interval: Interval,
}

/// Values of one attribute over time; entries are sorted and disjoint.
pub type AttrHistory = Vec<AttrEntry>;

/// Merges entries that touch and carry the same value, so a history is
/// determined by its value at each instant.
pub fn coalesce(h: &mut AttrHistory) {
    let mut out: AttrHistory = Vec::with_capacity(h.len());
    for e in h.drain(..) {
        match out.last_mut() {
            Some(last) if last.interval.end() == e.interval.start() && last.value == e.value => {
                last.interval = Interval::new(last.interval.start(), e.interval.end()).expect("ordered");
            }
            _ => out.push(e),
        }
    }
    *h = out;
}

fn history_ok(h: &AttrHistory) -> bool {
    h.windows(2).all(|w| {
        let touching = w[0].interval.end() == w[1].interval.start() && w[0].value == w[1].value;
        w[0].interval.end() <= w[1].interval.start() && !touching
    })
}

pub(crate) fn value_at(h: &AttrHistory, t: TimeInstant) -> Option<&Value> {
    h.iter().find(|e| e.interval.contains(t)).map(|e| &e.value)
}

fn clip(h: &AttrHistory, q: &Interval) -> AttrHistory {
    h.iter()
        .filter_map(|e| e.interval.intersect(q).map(|iv| AttrEntry { value: e.value.clone(), interval: iv }))
        .collect()
}

fn clip_attrs(attrs: &BTreeMap<String, AttrHistory>, q: &Interval) -> BTreeMap<String, AttrHistory> {
    attrs
        .iter()
        .map(|(k, h)| (k.clone(), clip(h, q)))
        .filter(|(_, h)| !h.is_empty())
        .collect()
}

pub(crate) fn attrs_at(attrs: &BTreeMap<String, AttrHistory>, t: TimeInstant) -> BTreeMap<String, Value> {
    attrs.iter().filter_map(|(k, h)| value_at(h, t).map(|v| (k.clone(), v.clone()))).collect()
}

/// History of the edges between a node and one neighbor in one direction.
/// Edge attributes live on the outgoing side only.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct EdgeHistory {
    pub intervals: IntervalSet,
    pub attributes: BTreeMap<String, AttrHistory>,
}

impl EdgeHistory {
    pub fn is_alive_at(&self, t: TimeInstant) -> bool {
        self.intervals.contains(t)
    }

    fn restrict(&self, q: &Interval) -> Option<EdgeHistory> {
        let intervals = self.intervals.intersect(q);
        (!intervals.is_empty()).then(|| EdgeHistory { intervals, attributes: clip_attrs(&self.attributes, q) })
    }

    fn validate(&self, owner: &IntervalSet) -> Result<(), String> {
        if self.intervals.is_empty() {
            return Err("edge without intervals".into());
        }
        if let Some(iv) = self.intervals.iter().find(|iv| !owner.covers(iv)) {
            return Err(format!("edge interval {iv} outside lifespan"));
        }
        for (name, h) in &self.attributes {
            if !history_ok(h) {
                return Err(format!("edge attribute {name} is overlapping or not coalesced"));
            }
            if let Some(e) = h.iter().find(|e| !self.intervals.covers(&e.interval)) {
                return Err(format!("edge attribute {name} interval {} outside edge", e.interval));
            }
        }
        Ok(())
    }
}

/// Totals used for space accounting.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct NodeCounts {
    pub lifespan_intervals: usize,
    pub attribute_intervals: usize,
    /// Outgoing edge intervals; each is stored once per direction.
    pub edge_intervals: usize,
    pub in_edge_intervals: usize,
    /// Attribute intervals on outgoing edges.
    pub edge_attribute_intervals: usize,
}

impl std::ops::AddAssign for NodeCounts {
    fn add_assign(&mut self, o: Self) {
        self.lifespan_intervals += o.lifespan_intervals;
        self.attribute_intervals += o.attribute_intervals;
        self.edge_intervals += o.edge_intervals;
        self.in_edge_intervals += o.in_edge_intervals;
        self.edge_attribute_intervals += o.edge_attribute_intervals;
    }
}

/// Full history of one vertex.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DiachronicNode {
    pub vid: Vid,
    pub lifespan: IntervalSet,
    pub attributes: BTreeMap<String, AttrHistory>,
    pub out_edges: BTreeMap<Vid, EdgeHistory>,
    pub in_edges: BTreeMap<Vid, EdgeHistory>,
}

impl DiachronicNode {
    pub fn new(vid: Vid) -> Self {
        Self {
            vid,
            lifespan: IntervalSet::new(),
            attributes: BTreeMap::new(),
            out_edges: BTreeMap::new(),
            in_edges: BTreeMap::new(),
        }
    }

    pub fn with_lifespan(vid: Vid, lifespan: IntervalSet) -> Self {
        Self { lifespan, ..Self::new(vid) }
    }

    /// Checks the containment invariants: non-empty lifespan, attributes and
    /// edges inside it, edge attributes inside their edge.
    pub fn validate(&self) -> Result<(), String> {
        if self.lifespan.is_empty() {
            return Err("empty lifespan".into());
        }
        for (name, h) in &self.attributes {
            if h.is_empty() || !history_ok(h) {
                return Err(format!("attribute {name} is empty, overlapping or not coalesced"));
            }
            if let Some(e) = h.iter().find(|e| !self.lifespan.covers(&e.interval)) {
                return Err(format!("attribute {name} interval {} outside lifespan", e.interval));
            }
        }
        if let Some((nbr, _)) = self.in_edges.iter().find(|(_, e)| !e.attributes.is_empty()) {
            return Err(format!("in-edge from {nbr} carries attributes"));
        }
        for (dir, edges) in [("out", &self.out_edges), ("in", &self.in_edges)] {
            for (nbr, e) in edges {
                e.validate(&self.lifespan).map_err(|m| format!("{dir}-edge to {nbr}: {m}"))?;
            }
        }
        Ok(())
    }

    pub fn is_alive_at(&self, t: TimeInstant) -> bool {
        self.lifespan.contains(t)
    }

    /// The node with every interval clipped to `q`, or `None` when its
    /// lifespan misses `q`.
    pub fn restrict(&self, q: &Interval) -> Option<DiachronicNode> {
        let lifespan = self.lifespan.intersect(q);
        if lifespan.is_empty() {
            return None;
        }
        let edges = |m: &BTreeMap<Vid, EdgeHistory>| {
            m.iter().filter_map(|(n, e)| e.restrict(q).map(|e| (*n, e))).collect::<BTreeMap<_, _>>()
        };
        Some(DiachronicNode {
            vid: self.vid,
            lifespan,
            attributes: clip_attrs(&self.attributes, q),
            out_edges: edges(&self.out_edges),
            in_edges: edges(&self.in_edges),
        })
    }

    /// Attribute values valid at `t`.
    pub fn attributes_at(&self, t: TimeInstant) -> BTreeMap<String, Value> {
        attrs_at(&self.attributes, t)
    }

    /// Neighbors reachable by an edge (either direction) alive somewhere in `q`.
    pub fn neighbors_in(&self, q: &Interval) -> std::collections::BTreeSet<Vid> {
        self.out_edges
            .iter()
            .chain(self.in_edges.iter())
            .filter(|(_, e)| e.intervals.overlaps(q))
            .map(|(n, _)| *n)
            .collect()
    }

    /// Incident edge records alive at `t`; a self-loop counts once.
    pub fn degree_at(&self, t: TimeInstant) -> u64 {
        let out = self.out_edges.values().filter(|e| e.is_alive_at(t)).count();
        let inc = self
            .in_edges
            .iter()
            .filter(|(n, e)| **n != self.vid && e.is_alive_at(t))
            .count();
        (out + inc) as u64
    }

    pub fn counts(&self) -> NodeCounts {
        let attr_entries = |m: &BTreeMap<String, AttrHistory>| m.values().map(Vec::len).sum::<usize>();
        NodeCounts {
            lifespan_intervals: self.lifespan.len(),
            attribute_intervals: attr_entries(&self.attributes),
            edge_intervals: self.out_edges.values().map(|e| e.intervals.len()).sum(),
            in_edge_intervals: self.in_edges.values().map(|e| e.intervals.len()).sum(),
            edge_attribute_intervals: self.out_edges.values().map(|e| attr_entries(&e.attributes)).sum(),
        }
    }
}
