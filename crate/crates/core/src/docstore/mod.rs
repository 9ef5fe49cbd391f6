//! Embedded document store: named collections of nested documents with
//! ordered secondary indexes, range and filtered scans with server-side
//! projection, streaming cursors, atomic write batches and checkpoint files.
//!
//! Writers are serialized. Every commit publishes a new immutable
//! [`StoreState`]; readers and cursors keep the state they started from.

mod checkpoint;
pub mod codec;
mod collection;
mod cursor;
mod predicate;
mod value;

use std::path::Path;
use std::sync::{Arc, Mutex, RwLock};

use imbl::OrdMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use collection::{Collection, CollectionSpec, IndexDef, Key};
pub use cursor::{Access, BufferGauge, Cursor, CursorStats, DocBatch, ScanSpec, DEFAULT_BATCH_SIZE};
pub use predicate::{CmpOp, Predicate};
pub use value::{Document, PathTree, Projection, Value};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("collection {0:?} already exists")]
    DuplicateCollection(String),
    #[error("unknown collection {0:?}")]
    UnknownCollection(String),
    #[error("unknown index {index:?} on collection {collection:?}")]
    UnknownIndex { collection: String, index: String },
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("write conflict: batch based on version {expected}, store is at {actual}")]
    Conflict { expected: u64, actual: u64 },
    #[error("predicate type error: {0}")]
    PredicateType(String),
    #[error("batch aborted at operation {op_index}")]
    Aborted { op_index: usize },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),
}

/// Version of the committed state a batch produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CommitToken(pub u64);

#[derive(Debug, Clone)]
pub enum BatchOp {
    CreateCollection(CollectionSpec),
    /// Creates the collection unless one with that name exists.
    EnsureCollection(CollectionSpec),
    Upsert { collection: String, doc: Document },
    Delete { collection: String, key: Key },
    Update { collection: String, key: Key, field: String, value: Value },
}

/// Ordered operations applied all-or-nothing.
#[derive(Debug, Clone, Default)]
pub struct WriteBatch {
    ops: Vec<BatchOp>,
    base: Option<CommitToken>,
}

impl WriteBatch {
    pub fn new() -> Self {
        Self::default()
    }

    /// Fail with [`StoreError::Conflict`] unless the store is still at `base`.
    pub fn with_base(mut self, base: CommitToken) -> Self {
        self.base = Some(base);
        self
    }

    pub fn push(&mut self, op: BatchOp) {
        self.ops.push(op);
    }

    pub fn create_collection(&mut self, spec: CollectionSpec) {
        self.push(BatchOp::CreateCollection(spec));
    }

    pub fn ensure_collection(&mut self, spec: CollectionSpec) {
        self.push(BatchOp::EnsureCollection(spec));
    }

    pub fn upsert(&mut self, collection: impl Into<String>, doc: Document) {
        self.push(BatchOp::Upsert { collection: collection.into(), doc });
    }

    pub fn delete(&mut self, collection: impl Into<String>, key: Key) {
        self.push(BatchOp::Delete { collection: collection.into(), key });
    }

    pub fn update(&mut self, collection: impl Into<String>, key: Key, field: impl Into<String>, value: Value) {
        self.push(BatchOp::Update { collection: collection.into(), key, field: field.into(), value });
    }

    pub fn extend(&mut self, other: WriteBatch) {
        self.ops.extend(other.ops);
    }

    pub fn ops(&self) -> &[BatchOp] {
        &self.ops
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }
}

/// One committed version of the whole store. Cheap to clone.
#[derive(Debug, Clone, Default)]
pub struct StoreState {
    version: u64,
    collections: OrdMap<String, Collection>,
}

pub type Snapshot = Arc<StoreState>;

impl StoreState {
    pub fn version(&self) -> CommitToken {
        CommitToken(self.version)
    }

    pub fn collection(&self, name: &str) -> Option<&Collection> {
        self.collections.get(name)
    }

    fn require(&self, name: &str) -> Result<&Collection, StoreError> {
        self.collection(name).ok_or_else(|| StoreError::UnknownCollection(name.to_owned()))
    }

    pub fn collections(&self) -> impl Iterator<Item = &Collection> {
        self.collections.values()
    }

    pub fn collection_names(&self) -> impl Iterator<Item = &String> {
        self.collections.keys()
    }

    pub fn total_documents(&self) -> usize {
        self.collections.values().map(Collection::len).sum()
    }

    pub fn get_by_key(&self, collection: &str, key: &Key) -> Result<Option<Document>, StoreError> {
        Ok(self.require(collection)?.get(key).map(|d| Document::clone(d)))
    }

    pub fn scan(&self, spec: ScanSpec) -> Result<Cursor, StoreError> {
        spec.filter.validate()?;
        let coll = self.require(&spec.collection)?.clone();
        let index_pos = match &spec.access {
            Access::Full | Access::KeyRange { .. } => None,
            Access::Index { index, .. } => Some(coll.index_position(index).ok_or_else(|| {
                StoreError::UnknownIndex { collection: spec.collection.clone(), index: index.clone() }
            })?),
        };
        Ok(Cursor::new(coll, spec, index_pos))
    }

    pub fn index_range_scan(
        &self,
        collection: &str,
        index: &str,
        lower: std::ops::Bound<Key>,
        upper: std::ops::Bound<Key>,
        projection: Projection,
        batch_size: usize,
    ) -> Result<Cursor, StoreError> {
        self.scan(ScanSpec::index_range(collection, index, lower, upper).project(projection).batch_size(batch_size))
    }

    pub fn filtered_scan(
        &self,
        collection: &str,
        predicate: Predicate,
        projection: Projection,
        batch_size: usize,
    ) -> Result<Cursor, StoreError> {
        self.scan(ScanSpec::full(collection).filter(predicate).project(projection).batch_size(batch_size))
    }

    /// SHA-256 over collection definitions and documents in key order.
    /// Index entries are derived data and not hashed.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        let mut buf = Vec::new();
        for coll in self.collections.values() {
            buf.clear();
            checkpoint::encode_spec(coll.spec(), &mut buf);
            hasher.update((buf.len() as u64).to_le_bytes());
            hasher.update(&buf);
            for (_, doc) in coll.iter() {
                buf.clear();
                codec::encode_document(doc, &mut buf);
                hasher.update((buf.len() as u64).to_le_bytes());
                hasher.update(&buf);
            }
        }
        hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// `(collection, index)` pairs whose entries differ from a rebuild.
    pub fn verify_indexes(&self) -> Vec<(String, String)> {
        self.collections
            .values()
            .flat_map(|c| c.verify_indexes().into_iter().map(|i| (c.name().to_owned(), i)))
            .collect()
    }

    fn apply(&mut self, op: BatchOp) -> Result<(), StoreError> {
        match op {
            BatchOp::CreateCollection(spec) => {
                if self.collections.contains_key(&spec.name) {
                    return Err(StoreError::DuplicateCollection(spec.name));
                }
                self.collections.insert(spec.name.clone(), Collection::new(spec)?);
            }
            BatchOp::EnsureCollection(spec) => {
                if !self.collections.contains_key(&spec.name) {
                    self.collections.insert(spec.name.clone(), Collection::new(spec)?);
                }
            }
            BatchOp::Upsert { collection, doc } => {
                self.collection_mut(&collection)?.upsert(doc)?;
            }
            BatchOp::Delete { collection, key } => {
                self.collection_mut(&collection)?.delete(&key);
            }
            BatchOp::Update { collection, key, field, value } => {
                self.collection_mut(&collection)?.update_field(&key, &field, value)?;
            }
        }
        Ok(())
    }

    fn collection_mut(&mut self, name: &str) -> Result<&mut Collection, StoreError> {
        self.collections.get_mut(name).ok_or_else(|| StoreError::UnknownCollection(name.to_owned()))
    }
}

/// Randomly aborts a fraction of batches part-way through. Test support
/// for atomicity checks.
#[derive(Debug, Clone)]
pub struct FaultPlan {
    rng: ChaCha8Rng,
    abort_probability: f64,
    aborted: u64,
}

impl FaultPlan {
    pub fn new(seed: u64, abort_probability: f64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed), abort_probability, aborted: 0 }
    }

    pub fn aborted(&self) -> u64 {
        self.aborted
    }

    fn abort_point(&mut self, len: usize) -> Option<usize> {
        if len == 0 || !self.rng.gen_bool(self.abort_probability.clamp(0.0, 1.0)) {
            return None;
        }
        self.aborted += 1;
        Some(self.rng.gen_range(0..len))
    }
}

/// Shared store handle: one writer at a time, any number of readers.
#[derive(Debug, Default)]
pub struct Store {
    state: RwLock<Snapshot>,
    writer: Mutex<Option<FaultPlan>>,
}

impl Store {
    pub fn new() -> Self {
        Self::default()
    }

    fn from_state(state: StoreState) -> Self {
        Self { state: RwLock::new(Arc::new(state)), writer: Mutex::new(None) }
    }

    /// Last committed state.
    pub fn snapshot(&self) -> Snapshot {
        self.state.read().expect("store lock poisoned").clone()
    }

    pub fn create_collection(&self, spec: CollectionSpec) -> Result<CommitToken, StoreError> {
        let mut b = WriteBatch::new();
        b.create_collection(spec);
        self.commit_batch(b)
    }

    pub fn set_fault_plan(&self, plan: Option<FaultPlan>) {
        *self.writer.lock().expect("writer lock poisoned") = plan;
    }

    pub fn fault_plan(&self) -> Option<FaultPlan> {
        self.writer.lock().expect("writer lock poisoned").clone()
    }

    /// Applies every operation or none of them.
    pub fn commit_batch(&self, batch: WriteBatch) -> Result<CommitToken, StoreError> {
        let mut fault = self.writer.lock().expect("writer lock poisoned");
        let current = self.snapshot();
        if let Some(base) = batch.base {
            if base.0 != current.version {
                return Err(StoreError::Conflict { expected: base.0, actual: current.version });
            }
        }
        let abort_at = fault.as_mut().and_then(|f| f.abort_point(batch.ops.len()));
        let mut next = StoreState::clone(&current);
        for (i, op) in batch.ops.into_iter().enumerate() {
            if abort_at == Some(i) {
                return Err(StoreError::Aborted { op_index: i });
            }
            next.apply(op)?;
        }
        next.version += 1;
        let token = CommitToken(next.version);
        *self.state.write().expect("store lock poisoned") = Arc::new(next);
        Ok(token)
    }

    pub fn persist_checkpoint(&self, path: impl AsRef<Path>) -> Result<(), StoreError> {
        checkpoint::write(&self.snapshot(), path.as_ref())
    }

    pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        checkpoint::read(path.as_ref()).map(Self::from_state)
    }

    pub fn content_hash(&self) -> String {
        self.snapshot().content_hash()
    }

    /// Drops an entry from an index without touching documents.
    #[doc(hidden)]
    pub fn corrupt_index_for_testing(&self, collection: &str, index: &str) -> bool {
        let _w = self.writer.lock().expect("writer lock poisoned");
        let mut next = StoreState::clone(&self.snapshot());
        let ok = next.collections.get_mut(collection).is_some_and(|c| c.corrupt_index(index));
        *self.state.write().expect("store lock poisoned") = Arc::new(next);
        ok
    }
}
