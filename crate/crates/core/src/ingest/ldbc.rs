//! LDBC SNB style CSV dumps.
//!
//! Files are classified by name: `person_0_0.csv` holds Person rows,
//! `forum_hasMember_person_0_0.csv` holds hasMember edges from Forum to
//! Person. Spark-style `part-*.csv` files take the name of their directory.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{IngestError, TickMapping, TickUnit};
use crate::docstore::Value;
use crate::layout::AttrEntry;
use crate::mutation::{EdgeRecord, MutationEvent, NodeRecord, PropTarget};
use crate::temporal::{Interval, IntervalSet, TimeInstant, Vid, ALIVE_END};

pub const ENTITY_KINDS: [&str; 8] = ["Person", "Forum", "Post", "Comment", "Organisation", "Place", "Tag", "TagClass"];

pub const EDGE_KINDS: [&str; 17] = [
    "knows",
    "hasMember",
    "hasModerator",
    "hasCreator",
    "likes",
    "hasTag",
    "hasInterest",
    "studyAt",
    "workAt",
    "isLocatedIn",
    "containerOf",
    "replyOf",
    "isPartOf",
    "isSubclassOf",
    "hasType",
    "email",
    "speaks",
];

const KIND_BITS: u32 = 4;
const ID_BITS: u32 = 64 - KIND_BITS;

/// Deletion dates at or past 9999-01-01 mean "never deleted".
const OPEN_END_MS: i128 = 253_370_764_800_000;

/// Vertex id of entity `id` of the given kind: the kind's index in
/// [`ENTITY_KINDS`] in the top bits, the id below. Person ids map to
/// themselves.
pub fn entity_vid(kind: &str, id: u64) -> Result<Vid, IngestError> {
    let tag = ENTITY_KINDS.iter().position(|k| *k == kind).ok_or_else(|| IngestError::UnknownKind(kind.to_owned()))?;
    if id >> ID_BITS != 0 {
        return Err(IngestError::Overflow(format!("{kind} id {id} needs more than {ID_BITS} bits")));
    }
    Ok(((tag as u64) << ID_BITS) | id)
}

pub fn split_vid(vid: Vid) -> (&'static str, u64) {
    (ENTITY_KINDS[(vid >> ID_BITS) as usize % ENTITY_KINDS.len()], vid & ((1 << ID_BITS) - 1))
}

fn canonical_entity(s: &str) -> Option<&'static str> {
    ENTITY_KINDS.iter().copied().find(|k| k.eq_ignore_ascii_case(s))
}

fn canonical_edge(s: &str) -> Option<&'static str> {
    EDGE_KINDS.iter().copied().find(|k| k.eq_ignore_ascii_case(s))
}

/// Entity and edge kinds that survive the transform.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaFilter {
    kinds: BTreeSet<&'static str>,
}

impl SchemaFilter {
    /// Person, Forum, knows and hasMember.
    pub fn reduced() -> Self {
        Self::parse("Person,Forum,knows,hasMember").expect("known kinds")
    }

    pub fn parse(spec: &str) -> Result<Self, IngestError> {
        let mut kinds = BTreeSet::new();
        for name in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let k = canonical_entity(name)
                .or_else(|| canonical_edge(name))
                .ok_or_else(|| IngestError::UnknownKind(name.to_owned()))?;
            kinds.insert(k);
        }
        Ok(Self { kinds })
    }

    pub fn allows(&self, kind: &str) -> bool {
        self.kinds.contains(kind)
    }

    pub fn kinds(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.kinds.iter().copied()
    }
}

impl Default for SchemaFilter {
    fn default() -> Self {
        Self::reduced()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnNames {
    pub creation: String,
    pub deletion: String,
    pub id: String,
    /// Dropped rather than turned into properties.
    pub ignored: Vec<String>,
}

impl Default for ColumnNames {
    fn default() -> Self {
        Self {
            creation: "creationDate".into(),
            deletion: "deletionDate".into(),
            id: "id".into(),
            ignored: vec!["explicitlyDeleted".into()],
        }
    }
}

#[derive(Debug, Clone)]
pub struct LdbcOptions {
    pub delimiter: u8,
    pub filter: SchemaFilter,
    pub mapping: TickMapping,
    pub columns: ColumnNames,
    /// Emit the remaining columns as properties valid over the row's life.
    pub with_properties: bool,
}

impl Default for LdbcOptions {
    fn default() -> Self {
        Self {
            delimiter: b'|',
            filter: SchemaFilter::reduced(),
            mapping: TickMapping::ldbc(),
            columns: ColumnNames::default(),
            with_properties: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RowKind {
    Entity { kind: &'static str, vid: Vid },
    Edge { kind: &'static str, src: Vid, dst: Vid },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LdbcRow {
    pub kind: RowKind,
    pub created: TimeInstant,
    pub deleted: Option<TimeInstant>,
    pub props: Vec<(String, Value)>,
}

impl LdbcRow {
    fn interval(&self) -> Interval {
        Interval::new(self.created, self.deleted.unwrap_or(ALIVE_END)).expect("creation precedes deletion")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct TransformStats {
    pub files_read: u64,
    pub files_skipped: u64,
    /// Rows that passed the filter.
    pub rows: u64,
    pub rows_filtered_out: u64,
    /// Rows carrying a deletion date.
    pub deletions: u64,
    pub rows_by_kind: BTreeMap<String, u64>,
    pub inserts: u64,
    pub deletes: u64,
    pub properties: u64,
}

impl TransformStats {
    pub fn events(&self) -> u64 {
        self.inserts + self.deletes + self.properties
    }
}

#[derive(Debug, Clone, Default)]
pub struct LdbcData {
    pub rows: Vec<LdbcRow>,
    pub stats: TransformStats,
}

enum FileKind {
    Entity(&'static str),
    Edge { kind: &'static str, from: &'static str, to: &'static str },
}

fn classify(path: &Path) -> Option<FileKind> {
    let stem = path.file_stem()?.to_str()?;
    let name = if stem.starts_with("part-") { path.parent()?.file_name()?.to_str()? } else { stem };
    let mut parts: Vec<&str> = name.split('_').collect();
    while parts.len() > 1 && parts.last().is_some_and(|p| p.chars().all(|c| c.is_ascii_digit())) {
        parts.pop();
    }
    match parts[..] {
        [e] => canonical_entity(e).map(FileKind::Entity),
        [a, rel, b] => Some(FileKind::Edge { kind: canonical_edge(rel)?, from: canonical_entity(a)?, to: canonical_entity(b)? }),
        _ => None,
    }
}

fn csv_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), IngestError> {
    for entry in fs::read_dir(dir).map_err(|e| IngestError::io(dir, e))? {
        let path = entry.map_err(|e| IngestError::io(dir, e))?.path();
        if path.is_dir() {
            csv_files(&path, out)?;
        } else if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
            out.push(path);
        }
    }
    Ok(())
}

fn find_column(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h.trim().eq_ignore_ascii_case(name))
}

fn read_file(
    path: &Path,
    kind: &FileKind,
    opts: &LdbcOptions,
    data: &mut LdbcData,
) -> Result<(), IngestError> {
    let mut rdr = csv::ReaderBuilder::new().delimiter(opts.delimiter).has_headers(true).from_path(path)?;
    let headers = rdr.headers()?.clone();
    let cols = &opts.columns;
    let row_err = |line: u64, msg: String| IngestError::Row { path: path.to_owned(), line, msg };
    let creation = find_column(&headers, &cols.creation).ok_or_else(|| row_err(1, format!("no {} column", cols.creation)))?;
    let deletion = find_column(&headers, &cols.deletion);
    let id_cols: Vec<usize> = match kind {
        FileKind::Entity(_) => vec![find_column(&headers, &cols.id).ok_or_else(|| row_err(1, format!("no {} column", cols.id)))?],
        FileKind::Edge { .. } => {
            let ends: Vec<usize> = headers
                .iter()
                .enumerate()
                .filter(|(_, h)| {
                    let h = h.trim().to_ascii_lowercase();
                    h.ends_with("id") && h != cols.id.to_ascii_lowercase()
                })
                .map(|(i, _)| i)
                .take(2)
                .collect();
            if ends.len() != 2 {
                return Err(row_err(1, "edge file needs two endpoint id columns".into()));
            }
            ends
        }
    };
    let skip: BTreeSet<usize> = [Some(creation), deletion]
        .into_iter()
        .flatten()
        .chain(id_cols.iter().copied())
        .chain(cols.ignored.iter().filter_map(|n| find_column(&headers, n)))
        .collect();

    let label = match kind {
        FileKind::Entity(k) | FileKind::Edge { kind: k, .. } => *k,
    };
    let mut record = csv::StringRecord::new();
    while rdr.read_record(&mut record)? {
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| record.get(i).unwrap_or("").trim();
        let parse_id = |i: usize| field(i).parse::<u64>().map_err(|_| row_err(line, format!("bad id {:?}", field(i))));
        let tick = |raw: i128| opts.mapping.to_tick(raw).map_err(|e| row_err(line, e.to_string()));
        let raw_created = opts.mapping.parse_raw(field(creation)).map_err(|e| row_err(line, e.to_string()))?;
        let created = tick(raw_created)?;
        let deleted = match deletion.map(field).filter(|s| !s.is_empty()) {
            None => None,
            Some(s) => {
                let raw = opts.mapping.parse_raw(s).map_err(|e| row_err(line, e.to_string()))?;
                let open = match opts.mapping.unit {
                    TickUnit::EpochMs => raw >= OPEN_END_MS,
                    TickUnit::Year => raw >= 9999,
                    TickUnit::Snapshot => false,
                };
                if open { None } else { Some(tick(raw)?) }
            }
        };
        if deleted.is_some_and(|d| d <= created) {
            return Err(row_err(line, format!("deletion {deleted:?} does not follow creation {created}")));
        }
        let row_kind = match kind {
            FileKind::Entity(k) => RowKind::Entity { kind: k, vid: entity_vid(k, parse_id(id_cols[0])?)? },
            FileKind::Edge { kind, from, to } => RowKind::Edge {
                kind,
                src: entity_vid(from, parse_id(id_cols[0])?)?,
                dst: entity_vid(to, parse_id(id_cols[1])?)?,
            },
        };
        let props = if opts.with_properties {
            headers
                .iter()
                .enumerate()
                .filter(|(i, _)| !skip.contains(i))
                .filter(|(i, _)| !field(*i).is_empty())
                .map(|(i, h)| (h.trim().to_owned(), Value::Str(field(i).to_owned())))
                .collect()
        } else {
            Vec::new()
        };
        data.stats.rows += 1;
        data.stats.deletions += deleted.is_some() as u64;
        *data.stats.rows_by_kind.entry(label.to_owned()).or_default() += 1;
        data.rows.push(LdbcRow { kind: row_kind, created, deleted, props });
    }
    Ok(())
}

/// Reads every CSV file under `dir` whose kind passes the filter. Entity
/// files are read before edge files, each group in path order.
pub fn read_ldbc_dump(dir: &Path, opts: &LdbcOptions) -> Result<LdbcData, IngestError> {
    let mut files = Vec::new();
    csv_files(dir, &mut files)?;
    files.sort();
    let mut data = LdbcData::default();
    let mut entity_files = Vec::new();
    let mut edge_files = Vec::new();
    for path in files {
        match classify(&path) {
            Some(k @ FileKind::Entity(e)) if opts.filter.allows(e) => entity_files.push((path, k)),
            Some(k @ FileKind::Edge { kind, from, to })
                if opts.filter.allows(kind) && opts.filter.allows(from) && opts.filter.allows(to) =>
            {
                edge_files.push((path, k))
            }
            Some(_) => {
                data.stats.files_skipped += 1;
                data.stats.rows_filtered_out += count_rows(&path, opts.delimiter)?;
            }
            None => {
                log::debug!("skipping unrecognised file {}", path.display());
                data.stats.files_skipped += 1;
            }
        }
    }
    for (path, kind) in entity_files.iter().chain(&edge_files) {
        read_file(path, kind, opts, &mut data)?;
        data.stats.files_read += 1;
    }
    Ok(data)
}

fn count_rows(path: &Path, delimiter: u8) -> Result<u64, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().delimiter(delimiter).has_headers(true).from_path(path)?;
    let mut n = 0;
    let mut rec = csv::ByteRecord::new();
    while rdr.read_byte_record(&mut rec)? {
        n += 1;
    }
    Ok(n)
}

/// Intra-tick order: node, edge, property inserts, then property, edge,
/// node deletes; input order otherwise.
fn phase(ev: &MutationEvent) -> u8 {
    match ev {
        MutationEvent::InsertNode { .. } => 0,
        MutationEvent::InsertEdge { .. } => 1,
        MutationEvent::InsertProperty { .. } => 2,
        MutationEvent::DeleteProperty { .. } => 3,
        MutationEvent::DeleteEdge { .. } => 4,
        MutationEvent::DeleteNode { .. } => 5,
    }
}

/// Chronological event stream for `rows`. Property values end with their
/// owner, so no property deletes are emitted.
pub fn to_events(rows: &[LdbcRow], stats: &mut TransformStats) -> Vec<MutationEvent> {
    let mut events = Vec::with_capacity(rows.len() * 2);
    for row in rows {
        let t = row.created;
        let (insert, target) = match row.kind {
            RowKind::Entity { vid, .. } => (MutationEvent::InsertNode { vid, t }, PropTarget::Node(vid)),
            RowKind::Edge { src, dst, .. } => (MutationEvent::InsertEdge { src, dst, t }, PropTarget::Edge(src, dst)),
        };
        events.push(insert);
        stats.inserts += 1;
        for (name, value) in &row.props {
            events.push(MutationEvent::InsertProperty { target, name: name.clone(), value: value.clone(), t });
            stats.properties += 1;
        }
        if let Some(t) = row.deleted {
            events.push(match row.kind {
                RowKind::Entity { vid, .. } => MutationEvent::DeleteNode { vid, t },
                RowKind::Edge { src, dst, .. } => MutationEvent::DeleteEdge { src, dst, t },
            });
            stats.deletes += 1;
        }
    }
    events.sort_by_key(|ev| (ev.time(), phase(ev)));
    events
}

/// The same rows as interval records for a bulk load.
pub fn to_records(rows: &[LdbcRow]) -> (Vec<NodeRecord>, Vec<EdgeRecord>) {
    let mut nodes: BTreeMap<Vid, NodeRecord> = BTreeMap::new();
    let mut edges: BTreeMap<(Vid, Vid), EdgeRecord> = BTreeMap::new();
    for row in rows {
        let iv = row.interval();
        let attrs = match row.kind {
            RowKind::Entity { vid, .. } => {
                let n = nodes.entry(vid).or_insert_with(|| NodeRecord {
                    vid,
                    lifespan: IntervalSet::new(),
                    attributes: BTreeMap::new(),
                });
                n.lifespan.union_insert(iv);
                &mut n.attributes
            }
            RowKind::Edge { src, dst, .. } => {
                let e = edges.entry((src, dst)).or_insert_with(|| EdgeRecord {
                    src,
                    dst,
                    intervals: IntervalSet::new(),
                    attributes: BTreeMap::new(),
                });
                e.intervals.union_insert(iv);
                &mut e.attributes
            }
        };
        for (name, value) in &row.props {
            attrs.entry(name.clone()).or_default().push(AttrEntry { value: value.clone(), interval: iv });
        }
    }
    (nodes.into_values().collect(), edges.into_values().collect())
}

pub fn transform_ldbc_dump(dir: &Path, opts: &LdbcOptions) -> Result<(Vec<MutationEvent>, TransformStats), IngestError> {
    let mut data = read_ldbc_dump(dir, opts)?;
    let events = to_events(&data.rows, &mut data.stats);
    Ok((events, data.stats))
}
