use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// A scalar, list or nested document stored in a collection.
#[derive(Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Null,
    Bool(bool),
    UInt(u64),
    Int(i64),
    Float(f64),
    Str(String),
    List(Vec<Value>),
    Doc(Document),
}

impl Value {
    fn rank(&self) -> u8 {
        match self {
            Value::Null => 0,
            Value::Bool(_) => 1,
            Value::UInt(_) | Value::Int(_) | Value::Float(_) => 2,
            Value::Str(_) => 3,
            Value::List(_) => 4,
            Value::Doc(_) => 5,
        }
    }

    pub fn is_scalar(&self) -> bool {
        !matches!(self, Value::List(_) | Value::Doc(_))
    }

    pub fn is_numeric(&self) -> bool {
        self.rank() == 2
    }

    /// Class name used in type errors.
    pub fn kind(&self) -> &'static str {
        match self {
            Value::Null => "null",
            Value::Bool(_) => "bool",
            Value::UInt(_) | Value::Int(_) | Value::Float(_) => "number",
            Value::Str(_) => "string",
            Value::List(_) => "list",
            Value::Doc(_) => "document",
        }
    }

    pub fn as_u64(&self) -> Option<u64> {
        match *self {
            Value::UInt(v) => Some(v),
            Value::Int(v) => u64::try_from(v).ok(),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[Value]> {
        match self {
            Value::List(items) => Some(items),
            _ => None,
        }
    }

    pub fn as_doc(&self) -> Option<&Document> {
        match self {
            Value::Doc(d) => Some(d),
            _ => None,
        }
    }

    fn cmp_numeric(&self, other: &Value) -> Ordering {
        fn int(v: &Value) -> Option<i128> {
            match *v {
                Value::UInt(x) => Some(x as i128),
                Value::Int(x) => Some(x as i128),
                _ => None,
            }
        }
        fn float(v: &Value) -> f64 {
            match *v {
                Value::UInt(x) => x as f64,
                Value::Int(x) => x as f64,
                Value::Float(x) => x,
                _ => unreachable!("numeric rank"),
            }
        }
        match (int(self), int(other)) {
            (Some(a), Some(b)) => a.cmp(&b),
            _ => float(self).total_cmp(&float(other)),
        }
    }
}

impl Ord for Value {
    fn cmp(&self, other: &Self) -> Ordering {
        match self.rank().cmp(&other.rank()) {
            Ordering::Equal => {}
            o => return o,
        }
        match (self, other) {
            (Value::Null, Value::Null) => Ordering::Equal,
            (Value::Bool(a), Value::Bool(b)) => a.cmp(b),
            (Value::Str(a), Value::Str(b)) => a.cmp(b),
            (Value::List(a), Value::List(b)) => a.cmp(b),
            (Value::Doc(a), Value::Doc(b)) => a.cmp(b),
            _ => self.cmp_numeric(other),
        }
    }
}

impl PartialOrd for Value {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Value {}

impl fmt::Debug for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Null => f.write_str("null"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::UInt(v) => write!(f, "{v}"),
            Value::Int(v) => write!(f, "{v}"),
            Value::Float(v) => write!(f, "{v:?}"),
            Value::Str(s) => write!(f, "{s:?}"),
            Value::List(items) => f.debug_list().entries(items).finish(),
            Value::Doc(d) => fmt::Debug::fmt(d, f),
        }
    }
}

impl From<u64> for Value {
    fn from(v: u64) -> Self {
        Value::UInt(v)
    }
}

impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Int(v)
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Float(v)
    }
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Bool(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Str(v.to_owned())
    }
}

impl From<String> for Value {
    fn from(v: String) -> Self {
        Value::Str(v)
    }
}

impl From<Document> for Value {
    fn from(v: Document) -> Self {
        Value::Doc(v)
    }
}

impl From<Vec<Value>> for Value {
    fn from(v: Vec<Value>) -> Self {
        Value::List(v)
    }
}

/// Ordered field map. Field paths use `.` to descend into nested documents;
/// a path that crosses a list descends into every element.
#[derive(Clone, Default, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Document {
    fields: BTreeMap<String, Value>,
}

impl Document {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, field: impl Into<String>, value: impl Into<Value>) -> Self {
        self.fields.insert(field.into(), value.into());
        self
    }

    pub fn insert(&mut self, field: impl Into<String>, value: impl Into<Value>) -> Option<Value> {
        self.fields.insert(field.into(), value.into())
    }

    pub fn remove(&mut self, field: &str) -> Option<Value> {
        self.fields.remove(field)
    }

    pub fn get(&self, field: &str) -> Option<&Value> {
        self.fields.get(field)
    }

    pub fn contains_field(&self, field: &str) -> bool {
        self.fields.contains_key(field)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Value)> {
        self.fields.iter()
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn get_u64(&self, field: &str) -> Option<u64> {
        self.get(field).and_then(Value::as_u64)
    }

    pub fn get_str(&self, field: &str) -> Option<&str> {
        self.get(field).and_then(Value::as_str)
    }

    pub fn get_list(&self, field: &str) -> &[Value] {
        self.get(field).and_then(Value::as_list).unwrap_or(&[])
    }

    /// All values reachable by `path`. Lists met along the way, and a list
    /// at the end of the path, are flattened.
    pub fn resolve<'a>(&'a self, path: &str) -> Vec<&'a Value> {
        let segments: Vec<&str> = path.split('.').collect();
        let mut out = Vec::new();
        resolve_in_doc(self, &segments, &mut out);
        out
    }

    /// Copy of the document keeping only the listed paths. Absent paths are
    /// omitted silently.
    pub fn project(&self, projection: &Projection) -> Document {
        match projection {
            Projection::All => self.clone(),
            Projection::Paths(tree) => project_doc(self, tree),
        }
    }
}

impl std::fmt::Debug for Document {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map().entries(self.fields.iter()).finish()
    }
}

fn resolve_in_doc<'a>(doc: &'a Document, segments: &[&str], out: &mut Vec<&'a Value>) {
    if let Some((head, rest)) = segments.split_first() {
        if let Some(v) = doc.fields.get(*head) {
            resolve_in_value(v, rest, out);
        }
    }
}

fn resolve_in_value<'a>(value: &'a Value, segments: &[&str], out: &mut Vec<&'a Value>) {
    match value {
        Value::List(items) => items.iter().for_each(|item| resolve_in_value(item, segments, out)),
        Value::Doc(d) if !segments.is_empty() => resolve_in_doc(d, segments, out),
        v if segments.is_empty() => out.push(v),
        _ => {}
    }
}

/// Field whitelist applied before documents leave the store.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum Projection {
    #[default]
    All,
    Paths(PathTree),
}

impl Projection {
    pub fn paths<I, S>(paths: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut tree = PathTree::default();
        for p in paths {
            tree.add(p.as_ref());
        }
        Projection::Paths(tree)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PathTree {
    leaf: bool,
    children: BTreeMap<String, PathTree>,
}

impl PathTree {
    fn add(&mut self, path: &str) {
        let mut node = self;
        for seg in path.split('.') {
            node = node.children.entry(seg.to_owned()).or_default();
        }
        node.leaf = true;
    }
}

fn project_doc(doc: &Document, tree: &PathTree) -> Document {
    let mut out = Document::new();
    for (name, sub) in &tree.children {
        if let Some(v) = doc.fields.get(name) {
            if let Some(p) = project_value(v, sub) {
                out.fields.insert(name.clone(), p);
            }
        }
    }
    out
}

fn project_value(value: &Value, tree: &PathTree) -> Option<Value> {
    if tree.leaf {
        return Some(value.clone());
    }
    match value {
        Value::Doc(d) => Some(Value::Doc(project_doc(d, tree))),
        Value::List(items) => Some(Value::List(
            items.iter().filter(|v| !v.is_scalar()).filter_map(|v| project_value(v, tree)).collect(),
        )),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Document {
        let edge = |n: u64, s: u64| Value::Doc(Document::new().with("nbr", n).with("start", s).with("end", s + 2));
        Document::new()
            .with("vid", 7u64)
            .with("name", "x")
            .with("out", vec![edge(1, 0), edge(2, 5)])
    }

    #[test]
    fn resolve_descends_lists() {
        let d = sample();
        assert_eq!(d.resolve("out.start"), vec![&Value::UInt(0), &Value::UInt(5)]);
        assert_eq!(d.resolve("vid"), vec![&Value::UInt(7)]);
        assert!(d.resolve("missing.x").is_empty());
    }

    #[test]
    fn projection_whitelists_paths() {
        let d = sample();
        let p = d.project(&Projection::paths(["vid"]));
        assert_eq!(p, Document::new().with("vid", 7u64));

        let p = d.project(&Projection::paths(["vid", "out.start", "nope"]));
        let out = p.get_list("out");
        assert_eq!(out.len(), 2);
        assert_eq!(out[1].as_doc().unwrap(), &Document::new().with("start", 5u64));
        assert!(p.get("name").is_none());
    }

    #[test]
    fn numeric_ordering_mixes_classes() {
        assert_eq!(Value::UInt(3), Value::Int(3));
        assert!(Value::Int(-1) < Value::UInt(0));
        assert!(Value::Float(2.5) < Value::UInt(3));
        assert!(Value::UInt(u64::MAX) > Value::Int(i64::MAX));
        assert!(Value::Null < Value::Bool(false));
        assert!(Value::UInt(10) < Value::Str("a".into()));
    }
}
