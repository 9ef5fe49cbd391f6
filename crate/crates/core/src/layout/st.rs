//! Single-table layout: one document per (vertex, lifespan interval) with
//! attributes and edges embedded as arrays.

use std::collections::BTreeMap;

use super::names::ST_NODES;
use super::node::{AttrEntry, AttrHistory, DiachronicNode, EdgeHistory};
use super::{corrupt, diff_records, entry_doc, interval_of, require_u64, u, LayoutError, RecordSet};
use crate::docstore::{CollectionSpec, Document, IndexDef, ScanSpec, Snapshot, Value, WriteBatch};
use crate::temporal::{Interval, Vid};

pub(super) const SCHEMA_PATHS: &[&str] = &[
    "vid",
    "start",
    "end",
    "attrs.name",
    "attrs.value",
    "attrs.start",
    "attrs.end",
    "out.nbr",
    "out.start",
    "out.end",
    "out.attrs.name",
    "out.attrs.value",
    "out.attrs.start",
    "out.attrs.end",
    "in.nbr",
    "in.start",
    "in.end",
];

pub(super) fn collections() -> Vec<CollectionSpec> {
    vec![CollectionSpec::new(ST_NODES, ["vid", "start", "end"])
        .index(IndexDef::new("vid", ["vid"]))
        .index(IndexDef::new("start_end", ["start", "end"]))
        .index(IndexDef::new("key", ["vid", "start", "end"]))]
}

fn named(name: &str, e: &AttrEntry) -> Value {
    entry_doc(e).with("name", name).into()
}

fn records(node: &DiachronicNode) -> RecordSet {
    let mut docs: BTreeMap<u64, Document> = node
        .lifespan
        .iter()
        .map(|iv| (iv.start(), Document::new().with("vid", node.vid).with("start", iv.start()).with("end", iv.end())))
        .collect();
    let mut lists: BTreeMap<(u64, &str), Vec<Value>> = BTreeMap::new();
    // Every stored interval lies inside exactly one lifespan fragment.
    let frag = |iv: &Interval| node.lifespan.find(iv.start()).map(|f| f.start()).expect("validated node");
    for (name, h) in &node.attributes {
        for e in h {
            lists.entry((frag(&e.interval), "attrs")).or_default().push(named(name, e));
        }
    }
    for (field, edges) in [("out", &node.out_edges), ("in", &node.in_edges)] {
        for (nbr, edge) in edges {
            for iv in edge.intervals.iter() {
                let mut d = Document::new().with("nbr", *nbr).with("start", iv.start()).with("end", iv.end());
                let attrs: Vec<Value> = edge
                    .attributes
                    .iter()
                    .flat_map(|(name, h)| h.iter().filter(|e| iv.covers(&e.interval)).map(|e| named(name, e)))
                    .collect();
                if !attrs.is_empty() {
                    d.insert("attrs", attrs);
                }
                lists.entry((frag(iv), field)).or_default().push(d.into());
            }
        }
    }
    for ((start, field), items) in lists {
        docs.get_mut(&start).expect("fragment exists").insert(field, items);
    }
    docs.into_values()
        .map(|d| {
            let key = vec![u(node.vid), d.get("start").cloned().unwrap(), d.get("end").cloned().unwrap()];
            ((ST_NODES.to_owned(), key), d)
        })
        .collect()
}

pub(super) fn encode_change(old: Option<&DiachronicNode>, new: Option<&DiachronicNode>, batch: &mut WriteBatch) {
    let old = old.map(records).unwrap_or_default();
    let new = new.map(records).unwrap_or_default();
    diff_records(&old, &new, Vec::new(), batch);
}

fn attr_item(item: &Value) -> Result<(String, AttrEntry), LayoutError> {
    let d = item.as_doc().ok_or_else(|| corrupt("attribute item is not a document"))?;
    let name = d.get_str("name").ok_or_else(|| corrupt("attribute without name"))?.to_owned();
    let value = d.get("value").cloned().ok_or_else(|| corrupt("attribute without value"))?;
    Ok((name, AttrEntry { value, interval: interval_of(d)? }))
}

fn push_attr(map: &mut BTreeMap<String, AttrHistory>, (name, e): (String, AttrEntry)) {
    map.entry(name).or_default().push(e);
}

pub(super) fn decode(snap: &Snapshot, vid: Vid) -> Result<Option<DiachronicNode>, LayoutError> {
    let docs = snap.scan(ScanSpec::key_prefix(ST_NODES, vec![u(vid)]))?.collect_all();
    if docs.is_empty() {
        return Ok(None);
    }
    let mut node = DiachronicNode::new(vid);
    for d in &docs {
        if require_u64(d, "vid")? != vid {
            return Err(corrupt(format!("document under key {vid} has another vid")));
        }
        node.lifespan.insert(interval_of(d)?).map_err(corrupt)?;
        for item in d.get_list("attrs") {
            push_attr(&mut node.attributes, attr_item(item)?);
        }
        for (field, edges) in [("out", &mut node.out_edges), ("in", &mut node.in_edges)] {
            for item in d.get_list(field) {
                let e = item.as_doc().ok_or_else(|| corrupt("edge item is not a document"))?;
                let entry: &mut EdgeHistory = edges.entry(require_u64(e, "nbr")?).or_default();
                entry.intervals.insert(interval_of(e)?).map_err(corrupt)?;
                for a in e.get_list("attrs") {
                    push_attr(&mut entry.attributes, attr_item(a)?);
                }
            }
        }
    }
    sort_histories(&mut node.attributes);
    for e in node.out_edges.values_mut().chain(node.in_edges.values_mut()) {
        sort_histories(&mut e.attributes);
    }
    Ok(Some(node))
}

pub(super) fn sort_histories(m: &mut BTreeMap<String, AttrHistory>) {
    m.values_mut().for_each(|h| h.sort_by_key(|e| e.interval.start()));
}
