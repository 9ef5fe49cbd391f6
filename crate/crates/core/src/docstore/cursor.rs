use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::ops::{Bound, Deref};
use std::sync::atomic::{AtomicUsize, Ordering as AtomicOrdering};
use std::sync::Arc;

use super::codec::encoded_len;
use super::collection::{Collection, IndexEntry, Key};
use super::predicate::Predicate;
use super::value::{Document, Projection};

pub const DEFAULT_BATCH_SIZE: usize = 64;

/// Counts documents currently held on the client side of a scan, and the
/// high-water mark.
#[derive(Debug, Clone, Default)]
pub struct BufferGauge(Arc<GaugeInner>);

#[derive(Debug, Default)]
struct GaugeInner {
    current: AtomicUsize,
    peak: AtomicUsize,
}

impl BufferGauge {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn acquire(&self, n: usize) {
        let now = self.0.current.fetch_add(n, AtomicOrdering::SeqCst) + n;
        self.0.peak.fetch_max(now, AtomicOrdering::SeqCst);
    }

    pub fn release(&self, n: usize) {
        self.0.current.fetch_sub(n, AtomicOrdering::SeqCst);
    }

    pub fn current(&self) -> usize {
        self.0.current.load(AtomicOrdering::SeqCst)
    }

    pub fn peak(&self) -> usize {
        self.0.peak.load(AtomicOrdering::SeqCst)
    }
}

/// Documents handed to the client by one cursor step. They count against
/// the gauge until the batch is dropped.
#[derive(Debug)]
pub struct DocBatch {
    docs: Vec<Document>,
    gauge: BufferGauge,
}

impl DocBatch {
    fn new(docs: Vec<Document>, gauge: BufferGauge) -> Self {
        gauge.acquire(docs.len());
        Self { docs, gauge }
    }

    /// Takes ownership of the documents; they stop counting as buffered.
    pub fn into_docs(mut self) -> Vec<Document> {
        let docs = std::mem::take(&mut self.docs);
        self.gauge.release(docs.len());
        docs
    }
}

impl Deref for DocBatch {
    type Target = [Document];

    fn deref(&self) -> &[Document] {
        &self.docs
    }
}

impl Drop for DocBatch {
    fn drop(&mut self) {
        self.gauge.release(self.docs.len());
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Access {
    Full,
    /// Range over an index. Bounds are key prefixes: a bound with fewer
    /// components than the index compares only on those components.
    Index { index: String, lower: Bound<Key>, upper: Bound<Key> },
    /// Range over the primary key, with the same prefix semantics.
    KeyRange { lower: Bound<Key>, upper: Bound<Key> },
}

/// Everything a scan needs: where to read, what to keep and how much to
/// hand out per step.
#[derive(Debug, Clone)]
pub struct ScanSpec {
    pub collection: String,
    pub access: Access,
    pub filter: Predicate,
    pub projection: Projection,
    pub batch_size: usize,
    pub gauge: Option<BufferGauge>,
}

impl ScanSpec {
    pub fn full(collection: impl Into<String>) -> Self {
        Self {
            collection: collection.into(),
            access: Access::Full,
            filter: Predicate::True,
            projection: Projection::All,
            batch_size: DEFAULT_BATCH_SIZE,
            gauge: None,
        }
    }

    pub fn index_range(collection: impl Into<String>, index: impl Into<String>, lower: Bound<Key>, upper: Bound<Key>) -> Self {
        Self { access: Access::Index { index: index.into(), lower, upper }, ..Self::full(collection) }
    }

    pub fn key_range(collection: impl Into<String>, lower: Bound<Key>, upper: Bound<Key>) -> Self {
        Self { access: Access::KeyRange { lower, upper }, ..Self::full(collection) }
    }

    /// All documents whose primary key starts with `prefix`.
    pub fn key_prefix(collection: impl Into<String>, prefix: Key) -> Self {
        Self::key_range(collection, Bound::Included(prefix.clone()), Bound::Included(prefix))
    }

    pub fn filter(mut self, p: Predicate) -> Self {
        self.filter = p;
        self
    }

    pub fn project(mut self, p: Projection) -> Self {
        self.projection = p;
        self
    }

    pub fn batch_size(mut self, n: usize) -> Self {
        self.batch_size = n.max(1);
        self
    }

    pub fn gauge(mut self, g: BufferGauge) -> Self {
        self.gauge = Some(g);
        self
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CursorStats {
    /// Documents the store evaluated.
    pub examined: u64,
    /// Documents returned to the client.
    pub returned: u64,
    /// Encoded size of the returned (projected) documents.
    pub bytes: u64,
}

enum Plan {
    Full,
    Keys { lower: Bound<Key>, upper: Bound<Key> },
    Index { pos: usize, lower: Bound<Key>, upper: Bound<Key>, seen: Option<BTreeSet<Key>> },
}

enum Resume {
    Start,
    Doc(Key),
    Entry(IndexEntry),
    Done,
}

/// Incremental result stream over a consistent snapshot of one collection.
pub struct Cursor {
    coll: Collection,
    plan: Plan,
    filter: Predicate,
    projection: Projection,
    batch_size: usize,
    gauge: BufferGauge,
    resume: Resume,
    stats: CursorStats,
}

fn prefix_cmp(key: &Key, bound: &Key) -> Ordering {
    for (k, b) in key.iter().zip(bound) {
        match k.cmp(b) {
            Ordering::Equal => {}
            o => return o,
        }
    }
    if key.len() < bound.len() {
        Ordering::Less
    } else {
        Ordering::Equal
    }
}

fn before_lower(key: &Key, lower: &Bound<Key>) -> bool {
    matches!(lower, Bound::Excluded(p) if prefix_cmp(key, p) == Ordering::Equal)
}

fn past_upper(key: &Key, upper: &Bound<Key>) -> bool {
    match upper {
        Bound::Included(p) => prefix_cmp(key, p) == Ordering::Greater,
        Bound::Excluded(p) => prefix_cmp(key, p) != Ordering::Less,
        Bound::Unbounded => false,
    }
}

impl Cursor {
    pub(crate) fn new(coll: Collection, spec: ScanSpec, index_pos: Option<usize>) -> Self {
        let plan = match (spec.access, index_pos) {
            (Access::KeyRange { lower, upper }, _) => Plan::Keys { lower, upper },
            (Access::Index { lower, upper, .. }, Some(pos)) => {
                let seen = coll.spec().indexes[pos].multikey.then(BTreeSet::new);
                Plan::Index { pos, lower, upper, seen }
            }
            _ => Plan::Full,
        };
        Self {
            coll,
            plan,
            filter: spec.filter,
            projection: spec.projection,
            batch_size: spec.batch_size.max(1),
            gauge: spec.gauge.unwrap_or_default(),
            resume: Resume::Start,
            stats: CursorStats::default(),
        }
    }

    pub fn stats(&self) -> CursorStats {
        self.stats
    }

    pub fn gauge(&self) -> &BufferGauge {
        &self.gauge
    }

    pub fn is_done(&self) -> bool {
        matches!(self.resume, Resume::Done)
    }

    fn accept(&mut self, doc: &Document, out: &mut Vec<Document>) {
        self.stats.examined += 1;
        if self.filter.eval(doc) {
            let projected = doc.project(&self.projection);
            self.stats.returned += 1;
            self.stats.bytes += encoded_len(&projected) as u64;
            out.push(projected);
        }
    }

    /// Next batch of at most `batch_size` documents, or `None` when the scan
    /// is exhausted.
    pub fn next_batch(&mut self) -> Option<DocBatch> {
        let mut out = Vec::with_capacity(self.batch_size.min(1024));
        let resume = std::mem::replace(&mut self.resume, Resume::Done);
        // Cheap clone: shares structure with the snapshot.
        let coll = self.coll.clone();
        match &mut self.plan {
            Plan::Full => {
                let lower = match resume {
                    Resume::Start => Bound::Unbounded,
                    Resume::Doc(k) => Bound::Excluded(k),
                    _ => return None,
                };
                for (k, d) in coll.docs().range((lower, Bound::Unbounded)) {
                    self.accept(d, &mut out);
                    if out.len() >= self.batch_size {
                        self.resume = Resume::Doc(k.clone());
                        break;
                    }
                }
            }
            Plan::Keys { lower, upper } => {
                let (lower, upper) = (lower.clone(), upper.clone());
                let start = match (resume, &lower) {
                    (Resume::Doc(k), _) => Bound::Excluded(k),
                    (Resume::Start, Bound::Included(p) | Bound::Excluded(p)) => Bound::Included(p.clone()),
                    (Resume::Start, Bound::Unbounded) => Bound::Unbounded,
                    _ => return None,
                };
                for (k, d) in coll.docs().range((start, Bound::Unbounded)) {
                    if before_lower(k, &lower) {
                        continue;
                    }
                    if past_upper(k, &upper) {
                        break;
                    }
                    self.accept(d, &mut out);
                    if out.len() >= self.batch_size {
                        self.resume = Resume::Doc(k.clone());
                        break;
                    }
                }
            }
            Plan::Index { .. } => {
                let Plan::Index { pos, lower, upper, .. } = &self.plan else { unreachable!() };
                let (pos, lower, upper) = (*pos, lower.clone(), upper.clone());
                let start = match (&resume, &lower) {
                    (Resume::Entry(e), _) => Bound::Excluded(e.clone()),
                    (Resume::Start, Bound::Included(p) | Bound::Excluded(p)) => Bound::Included((p.clone(), Vec::new())),
                    (Resume::Start, Bound::Unbounded) => Bound::Unbounded,
                    _ => return None,
                };
                for entry in coll.index_entries(pos).range((start, Bound::Unbounded)) {
                    if before_lower(&entry.0, &lower) {
                        continue;
                    }
                    if past_upper(&entry.0, &upper) {
                        break;
                    }
                    if let Plan::Index { seen: Some(seen), .. } = &mut self.plan {
                        if !seen.insert(entry.1.clone()) {
                            continue;
                        }
                    }
                    if let Some(d) = coll.get(&entry.1) {
                        self.accept(d, &mut out);
                    }
                    if out.len() >= self.batch_size {
                        self.resume = Resume::Entry(entry.clone());
                        break;
                    }
                }
            }
        }
        if out.is_empty() {
            self.resume = Resume::Done;
            return None;
        }
        Some(DocBatch::new(out, self.gauge.clone()))
    }

    /// Drains the cursor into owned documents.
    pub fn collect_all(mut self) -> Vec<Document> {
        let mut all = Vec::new();
        while let Some(batch) = self.next_batch() {
            all.extend(batch.into_docs());
        }
        all
    }
}

impl Iterator for Cursor {
    type Item = DocBatch;

    fn next(&mut self) -> Option<DocBatch> {
        self.next_batch()
    }
}
