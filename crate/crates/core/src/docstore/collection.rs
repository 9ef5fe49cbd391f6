use std::collections::BTreeSet;
use std::sync::Arc;

use imbl::{OrdMap, OrdSet};

use super::value::{Document, Value};
use super::StoreError;

/// Composite primary key, one value per key field.
pub type Key = Vec<Value>;

/// `(index key, primary key)`.
pub(crate) type IndexEntry = (Key, Key);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexDef {
    pub name: String,
    pub fields: Vec<String>,
    /// Index every element of list-valued paths.
    pub multikey: bool,
}

impl IndexDef {
    pub fn new<I, S>(name: impl Into<String>, fields: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self { name: name.into(), fields: fields.into_iter().map(Into::into).collect(), multikey: false }
    }

    pub fn multikey(mut self) -> Self {
        self.multikey = true;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CollectionSpec {
    pub name: String,
    pub key_fields: Vec<String>,
    pub indexes: Vec<IndexDef>,
}

impl CollectionSpec {
    pub fn new<I, S>(name: impl Into<String>, key_fields: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self { name: name.into(), key_fields: key_fields.into_iter().map(Into::into).collect(), indexes: Vec::new() }
    }

    pub fn index(mut self, def: IndexDef) -> Self {
        self.indexes.push(def);
        self
    }

    fn validate(&self) -> Result<(), StoreError> {
        if self.name.is_empty() || self.key_fields.is_empty() {
            return Err(StoreError::Validation(format!(
                "collection {:?} needs a name and at least one key field",
                self.name
            )));
        }
        let mut names = BTreeSet::new();
        for idx in &self.indexes {
            if idx.fields.is_empty() || !names.insert(idx.name.as_str()) {
                return Err(StoreError::Validation(format!(
                    "index {:?} on {:?} is empty or duplicated",
                    idx.name, self.name
                )));
            }
        }
        Ok(())
    }
}

/// Named set of documents with ordered secondary indexes. Cloning is cheap;
/// clones share structure and diverge on write.
#[derive(Debug, Clone)]
pub struct Collection {
    spec: CollectionSpec,
    docs: OrdMap<Key, Arc<Document>>,
    indexes: Vec<OrdSet<IndexEntry>>,
}

impl Collection {
    pub fn new(spec: CollectionSpec) -> Result<Self, StoreError> {
        spec.validate()?;
        let indexes = vec![OrdSet::new(); spec.indexes.len()];
        Ok(Self { spec, docs: OrdMap::new(), indexes })
    }

    pub fn spec(&self) -> &CollectionSpec {
        &self.spec
    }

    pub fn name(&self) -> &str {
        &self.spec.name
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn get(&self, key: &Key) -> Option<&Arc<Document>> {
        self.docs.get(key)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Key, &Arc<Document>)> {
        self.docs.iter()
    }

    pub(crate) fn docs(&self) -> &OrdMap<Key, Arc<Document>> {
        &self.docs
    }

    pub(crate) fn index_entries(&self, pos: usize) -> &OrdSet<IndexEntry> {
        &self.indexes[pos]
    }

    pub fn index_position(&self, name: &str) -> Option<usize> {
        self.spec.indexes.iter().position(|i| i.name == name)
    }

    pub fn index_len(&self, name: &str) -> Option<usize> {
        self.index_position(name).map(|p| self.indexes[p].len())
    }

    /// Extracts the primary key; every key field must hold exactly one
    /// non-null scalar.
    pub fn key_of(&self, doc: &Document) -> Result<Key, StoreError> {
        self.spec
            .key_fields
            .iter()
            .map(|f| match doc.resolve(f).as_slice() {
                [v] if v.is_scalar() && **v != Value::Null => Ok((*v).clone()),
                other => Err(StoreError::Validation(format!(
                    "{}: key field {f:?} must be one scalar, found {} value(s)",
                    self.spec.name,
                    other.len()
                ))),
            })
            .collect()
    }

    fn index_keys(def: &IndexDef, doc: &Document) -> Vec<Key> {
        let mut combos: Vec<Key> = vec![Vec::new()];
        for field in &def.fields {
            let mut vals: Vec<Value> = doc.resolve(field).into_iter().cloned().collect();
            if vals.is_empty() {
                vals.push(Value::Null);
            }
            if !def.multikey {
                vals.truncate(1);
            }
            combos = combos
                .into_iter()
                .flat_map(|prefix| {
                    vals.iter().map(move |v| {
                        let mut k = prefix.clone();
                        k.push(v.clone());
                        k
                    })
                })
                .collect();
        }
        let unique: BTreeSet<Key> = combos.into_iter().collect();
        unique.into_iter().collect()
    }

    fn add_entries(&mut self, key: &Key, doc: &Document) {
        for (pos, def) in self.spec.indexes.iter().enumerate() {
            for ik in Self::index_keys(def, doc) {
                self.indexes[pos].insert((ik, key.clone()));
            }
        }
    }

    fn remove_entries(&mut self, key: &Key, doc: &Document) {
        for (pos, def) in self.spec.indexes.iter().enumerate() {
            for ik in Self::index_keys(def, doc) {
                self.indexes[pos].remove(&(ik, key.clone()));
            }
        }
    }

    pub fn upsert(&mut self, doc: Document) -> Result<Key, StoreError> {
        let key = self.key_of(&doc)?;
        if let Some(old) = self.docs.get(&key).cloned() {
            self.remove_entries(&key, &old);
        }
        self.add_entries(&key, &doc);
        self.docs.insert(key.clone(), Arc::new(doc));
        Ok(key)
    }

    pub fn delete(&mut self, key: &Key) -> bool {
        match self.docs.remove(key) {
            Some(old) => {
                self.remove_entries(key, &old);
                true
            }
            None => false,
        }
    }

    pub fn update_field(&mut self, key: &Key, field: &str, value: Value) -> Result<(), StoreError> {
        if self.spec.key_fields.iter().any(|k| k == field || k.starts_with(&format!("{field}."))) {
            return Err(StoreError::Validation(format!("key field {field:?} is immutable")));
        }
        let mut doc = match self.docs.get(key) {
            Some(d) => Document::clone(d),
            None => {
                return Err(StoreError::Validation(format!(
                    "{}: no document with key {key:?}",
                    self.spec.name
                )))
            }
        };
        doc.insert(field, value);
        self.upsert(doc)?;
        Ok(())
    }

    /// Names of indexes whose entries differ from a full rebuild.
    pub fn verify_indexes(&self) -> Vec<String> {
        let mut bad = Vec::new();
        for (pos, def) in self.spec.indexes.iter().enumerate() {
            let rebuilt: OrdSet<IndexEntry> = self
                .docs
                .iter()
                .flat_map(|(k, d)| Self::index_keys(def, d).into_iter().map(move |ik| (ik, k.clone())))
                .collect();
            if rebuilt != self.indexes[pos] {
                bad.push(def.name.clone());
            }
        }
        bad
    }

    /// Drops one entry from the named index. Only meant for exercising
    /// consistency checks.
    #[doc(hidden)]
    pub fn corrupt_index(&mut self, name: &str) -> bool {
        let Some(pos) = self.index_position(name) else { return false };
        match self.indexes[pos].get_min().cloned() {
            Some(e) => {
                self.indexes[pos].remove(&e);
                true
            }
            None => {
                self.indexes[pos].insert((vec![Value::Str("bogus".into())], vec![Value::Null]));
                true
            }
        }
    }
}
