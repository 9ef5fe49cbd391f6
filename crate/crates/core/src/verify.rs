//! Whole-store invariant checks.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::docstore::Snapshot;
use crate::layout::{DiachronicNode, Layout, NodeCounts};
use crate::temporal::Vid;

/// At most this many violations are kept per check.
const MAX_REPORTED: usize = 20;

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub violations: usize,
    pub examples: Vec<String>,
}

impl CheckResult {
    fn new(name: &'static str) -> Self {
        Self { name, violations: 0, examples: Vec::new() }
    }

    fn fail(&mut self, msg: String) {
        self.violations += 1;
        if self.examples.len() < MAX_REPORTED {
            self.examples.push(msg);
        }
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub layout: String,
    pub vertices: usize,
    pub documents: usize,
    pub counts: NodeCounts,
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(CheckResult::passed)
    }

    pub fn failed_checks(&self) -> Vec<&'static str> {
        self.checks.iter().filter(|c| !c.passed()).map(|c| c.name).collect()
    }
}

/// Runs index consistency, decodability, containment, out/in symmetry and
/// space accounting over every stored vertex.
pub fn verify(snap: &Snapshot, layout: Layout) -> VerifyReport {
    let mut index = CheckResult::new("index_consistency");
    for (coll, idx) in snap.verify_indexes() {
        index.fail(format!("index {idx} of {coll} disagrees with its documents"));
    }

    let mut decode = CheckResult::new("decode");
    let mut nodes: BTreeMap<Vid, DiachronicNode> = BTreeMap::new();
    match layout.vids(snap) {
        Ok(vids) => {
            for vid in vids {
                match layout.decode_node(snap, vid) {
                    Ok(Some(n)) => {
                        nodes.insert(vid, n);
                    }
                    Ok(None) => decode.fail(format!("vertex {vid} listed but absent")),
                    Err(e) => decode.fail(format!("vertex {vid}: {e}")),
                }
            }
        }
        Err(e) => decode.fail(e.to_string()),
    }

    let mut containment = CheckResult::new("containment");
    let mut symmetry = CheckResult::new("symmetry");
    let mut counts = NodeCounts::default();
    for (vid, n) in &nodes {
        if let Err(reason) = n.validate() {
            containment.fail(format!("vertex {vid}: {reason}"));
        }
        counts += n.counts();
        for (nbr, e) in &n.out_edges {
            let mirror = nodes.get(nbr).and_then(|m| m.in_edges.get(vid));
            if mirror.map(|m| &m.intervals) != Some(&e.intervals) {
                symmetry.fail(format!("out-edge {vid}->{nbr} has no matching in-edge"));
            }
        }
        for (nbr, e) in &n.in_edges {
            let mirror = nodes.get(nbr).and_then(|m| m.out_edges.get(vid));
            if mirror.map(|m| &m.intervals) != Some(&e.intervals) {
                symmetry.fail(format!("in-edge {nbr}->{vid} has no matching out-edge"));
            }
        }
    }

    let mut space = CheckResult::new("space_accounting");
    let documents = snap.total_documents();
    let expected = layout.expected_records(&counts);
    if documents != expected {
        space.fail(format!("{documents} records stored, {expected} expected from {} vertices", nodes.len()));
    }

    VerifyReport {
        layout: layout.kind().to_string(),
        vertices: nodes.len(),
        documents,
        counts,
        checks: vec![index, decode, containment, symmetry, space],
    }
}
