//! Multi-table layout: existence records for vertices and both edge
//! directions, plus one collection per attribute name.

use std::collections::BTreeSet;

use super::names::{E_IN_EXIST, E_OUT_ATTR, E_OUT_EXIST, V_ATTR, V_EXIST};
use super::node::{AttrEntry, DiachronicNode};
use super::st::sort_histories;
use super::{corrupt, diff_records, entry_doc, interval_of, require_u64, u, LayoutError, RecordSet};
use crate::docstore::{CollectionSpec, Document, IndexDef, ScanSpec, Snapshot, WriteBatch};
use crate::temporal::Vid;

const V_PATHS: &[&str] = &["vid", "start", "end"];
const V_ATTR_PATHS: &[&str] = &["vid", "start", "end", "value"];
const E_OUT_PATHS: &[&str] = &["src", "dst", "start", "end"];
const E_ATTR_PATHS: &[&str] = &["src", "dst", "start", "end", "value"];

fn start_end() -> IndexDef {
    IndexDef::new("start_end", ["start", "end"])
}

fn v_attr_spec(name: &str) -> CollectionSpec {
    CollectionSpec::new(format!("{V_ATTR}{name}"), ["vid", "start"]).index(start_end())
}

fn edge_spec(name: String, key: [&str; 3]) -> CollectionSpec {
    CollectionSpec::new(name, key)
        .index(IndexDef::new("src_start", ["src", "start"]))
        .index(IndexDef::new("dst_start", ["dst", "start"]))
        .index(start_end())
}

fn e_attr_spec(name: &str) -> CollectionSpec {
    edge_spec(format!("{E_OUT_ATTR}{name}"), ["src", "dst", "start"])
}

pub(super) fn base_collections() -> Vec<CollectionSpec> {
    vec![
        CollectionSpec::new(V_EXIST, ["vid", "start"]).index(start_end()),
        edge_spec(E_OUT_EXIST.to_owned(), ["src", "dst", "start"]),
        edge_spec(E_IN_EXIST.to_owned(), ["dst", "src", "start"]),
    ]
}

pub(super) fn schema_paths(collection: &str) -> &'static [&'static str] {
    if collection == V_EXIST {
        V_PATHS
    } else if collection.starts_with(V_ATTR) {
        V_ATTR_PATHS
    } else if collection == E_OUT_EXIST || collection == E_IN_EXIST {
        E_OUT_PATHS
    } else if collection.starts_with(E_OUT_ATTR) {
        E_ATTR_PATHS
    } else {
        &[]
    }
}

fn records(node: &DiachronicNode) -> RecordSet {
    let mut out = RecordSet::new();
    let vid = node.vid;
    for iv in node.lifespan.iter() {
        let d = Document::new().with("vid", vid).with("start", iv.start()).with("end", iv.end());
        out.insert((V_EXIST.to_owned(), vec![u(vid), u(iv.start())]), d);
    }
    for (name, h) in &node.attributes {
        for e in h {
            let d = entry_doc(e).with("vid", vid);
            out.insert((format!("{V_ATTR}{name}"), vec![u(vid), u(e.interval.start())]), d);
        }
    }
    for (nbr, edge) in &node.out_edges {
        for iv in edge.intervals.iter() {
            let d = Document::new().with("src", vid).with("dst", *nbr).with("start", iv.start()).with("end", iv.end());
            out.insert((E_OUT_EXIST.to_owned(), vec![u(vid), u(*nbr), u(iv.start())]), d);
        }
        for (name, h) in &edge.attributes {
            for e in h {
                let d = entry_doc(e).with("src", vid).with("dst", *nbr);
                out.insert((format!("{E_OUT_ATTR}{name}"), vec![u(vid), u(*nbr), u(e.interval.start())]), d);
            }
        }
    }
    for (nbr, edge) in &node.in_edges {
        for iv in edge.intervals.iter() {
            let d = Document::new().with("dst", vid).with("src", *nbr).with("start", iv.start()).with("end", iv.end());
            out.insert((E_IN_EXIST.to_owned(), vec![u(vid), u(*nbr), u(iv.start())]), d);
        }
    }
    out
}

pub(super) fn encode_change(old: Option<&DiachronicNode>, new: Option<&DiachronicNode>, batch: &mut WriteBatch) {
    let old_recs = old.map(records).unwrap_or_default();
    let new_recs = new.map(records).unwrap_or_default();
    // Attribute collections are created on first use.
    let old_colls: BTreeSet<&String> = old_recs.keys().map(|(c, _)| c).collect();
    let mut ensure = Vec::new();
    let mut seen = BTreeSet::new();
    for (c, _) in new_recs.keys() {
        if old_colls.contains(c) || !seen.insert(c) {
            continue;
        }
        if let Some(name) = c.strip_prefix(V_ATTR) {
            ensure.push(v_attr_spec(name));
        } else if let Some(name) = c.strip_prefix(E_OUT_ATTR) {
            ensure.push(e_attr_spec(name));
        }
    }
    diff_records(&old_recs, &new_recs, ensure, batch);
}

fn prefix_docs(snap: &Snapshot, coll: &str, vid: Vid) -> Result<Vec<Document>, LayoutError> {
    Ok(snap.scan(ScanSpec::key_prefix(coll, vec![u(vid)]))?.collect_all())
}

pub(super) fn decode(snap: &Snapshot, vid: Vid) -> Result<Option<DiachronicNode>, LayoutError> {
    let exist = prefix_docs(snap, V_EXIST, vid)?;
    let attr_colls: Vec<String> = snap
        .collection_names()
        .filter(|n| n.starts_with(V_ATTR) || n.starts_with(E_OUT_ATTR))
        .cloned()
        .collect();
    if exist.is_empty() {
        let dependent = [E_OUT_EXIST, E_IN_EXIST].into_iter().chain(attr_colls.iter().map(String::as_str));
        for coll in dependent {
            let mut c = snap.scan(ScanSpec::key_prefix(coll, vec![u(vid)]).batch_size(1))?;
            if c.next_batch().is_some() {
                return Err(corrupt(format!("{coll} holds records of vertex {vid} without an existence record")));
            }
        }
        return Ok(None);
    }
    let mut node = DiachronicNode::new(vid);
    for d in &exist {
        node.lifespan.insert(interval_of(d)?).map_err(corrupt)?;
    }
    for coll in &attr_colls {
        for d in prefix_docs(snap, coll, vid)? {
            let value = d.get("value").cloned().ok_or_else(|| corrupt(format!("{coll} record without value")))?;
            let entry = AttrEntry { value, interval: interval_of(&d)? };
            if let Some(name) = coll.strip_prefix(V_ATTR) {
                node.attributes.entry(name.to_owned()).or_default().push(entry);
            } else {
                let name = coll.strip_prefix(E_OUT_ATTR).expect("filtered");
                let dst = require_u64(&d, "dst")?;
                node.out_edges.entry(dst).or_default().attributes.entry(name.to_owned()).or_default().push(entry);
            }
        }
    }
    for (coll, field, edges) in [(E_OUT_EXIST, "dst", &mut node.out_edges), (E_IN_EXIST, "src", &mut node.in_edges)] {
        for d in prefix_docs(snap, coll, vid)? {
            let nbr = require_u64(&d, field)?;
            edges.entry(nbr).or_default().intervals.insert(interval_of(&d)?).map_err(corrupt)?;
        }
    }
    if let Some((nbr, _)) = node.out_edges.iter().find(|(_, e)| e.intervals.is_empty()) {
        return Err(corrupt(format!("edge attributes of {vid}->{nbr} without an edge")));
    }
    sort_histories(&mut node.attributes);
    for e in node.out_edges.values_mut() {
        sort_histories(&mut e.attributes);
    }
    Ok(Some(node))
}
