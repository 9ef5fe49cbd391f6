//! Deterministic LDBC-style dump for tests and benchmarks.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use chrono::DateTime;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{IngestError, LDBC_ORIGIN_MS};

/// Three years of milliseconds.
const SPAN_MS: u64 = 3 * 365 * 24 * 3600 * 1000;
const OPEN_END: &str = "9999-12-31T00:00:00.000+0000";

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureParams {
    pub persons: usize,
    pub forums: usize,
    pub knows: usize,
    pub memberships: usize,
    /// Share of rows given a deletion date of their own; edges also end when
    /// an endpoint does.
    pub deletion_rate: f64,
    /// Post and hasCreator rows that the reduced filter must drop.
    pub noise_rows: usize,
    pub seed: u64,
}

impl Default for FixtureParams {
    fn default() -> Self {
        Self { persons: 3000, forums: 1000, knows: 4000, memberships: 3000, deletion_rate: 0.1, noise_rows: 200, seed: 42 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct FixtureSummary {
    pub rows_by_kind: BTreeMap<String, u64>,
    pub deletions_by_kind: BTreeMap<String, u64>,
}

impl FixtureSummary {
    /// Rows and deletions over the given kinds.
    pub fn totals<'a>(&self, kinds: impl IntoIterator<Item = &'a str>) -> (u64, u64) {
        kinds.into_iter().fold((0, 0), |(r, d), k| {
            (r + self.rows_by_kind.get(k).copied().unwrap_or(0), d + self.deletions_by_kind.get(k).copied().unwrap_or(0))
        })
    }
}

#[derive(Clone, Copy)]
struct Life {
    created: u64,
    deleted: Option<u64>,
}

impl Life {
    fn end(&self) -> u64 {
        self.deleted.unwrap_or(SPAN_MS)
    }
}

fn date(ms: u64) -> String {
    let abs = LDBC_ORIGIN_MS as i64 + ms as i64;
    DateTime::from_timestamp_millis(abs).expect("in range").format("%Y-%m-%dT%H:%M:%S%.3f+0000").to_string()
}

struct Gen {
    rng: ChaCha8Rng,
    rate: f64,
}

impl Gen {
    fn entity(&mut self) -> Life {
        let created = self.rng.gen_range(0..SPAN_MS * 4 / 5);
        let deleted = self.rng.gen_bool(self.rate).then(|| self.rng.gen_range(created + 1..=SPAN_MS));
        Life { created, deleted }
    }

    /// A life inside both endpoints' overlap, or `None` if they never meet.
    fn edge(&mut self, a: Life, b: Life) -> Option<Life> {
        let lo = a.created.max(b.created);
        let hi = a.end().min(b.end());
        if lo + 1 >= hi {
            return None;
        }
        // Ties with the endpoint's creation exercise intra-tick ordering.
        let created = if self.rng.gen_bool(0.2) { lo } else { self.rng.gen_range(lo..hi - 1) };
        let bounded = a.deleted.is_some() || b.deleted.is_some();
        let deleted = if bounded {
            Some(if self.rng.gen_bool(0.5) { hi } else { self.rng.gen_range(created + 1..=hi) })
        } else if self.rng.gen_bool(self.rate) {
            Some(self.rng.gen_range(created + 1..=SPAN_MS))
        } else {
            None
        };
        Some(Life { created, deleted })
    }
}

struct Table {
    name: &'static str,
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
    deletions: u64,
}

impl Table {
    fn new(name: &'static str, header: &[&'static str]) -> Self {
        Self { name, header: header.to_vec(), rows: Vec::new(), deletions: 0 }
    }

    fn push(&mut self, life: Life, open_end: &str, rest: Vec<String>) {
        let deleted = match life.deleted {
            Some(d) => {
                self.deletions += 1;
                date(d)
            }
            None => open_end.to_owned(),
        };
        let mut row = vec![date(life.created), deleted, life.deleted.is_some().to_string()];
        row.extend(rest);
        self.rows.push(row);
    }
}

/// Writes pipe-delimited Person, Forum, knows and hasMember files (plus
/// Post/hasCreator noise) under `dir/dynamic`.
pub fn generate_ldbc_fixture(dir: &Path, p: &FixtureParams) -> Result<FixtureSummary, IngestError> {
    let mut g = Gen { rng: ChaCha8Rng::seed_from_u64(p.seed), rate: p.deletion_rate };
    let base = ["creationDate", "deletionDate", "explicitlyDeleted"];
    let cols = |extra: &[&'static str]| base.iter().chain(extra).copied().collect::<Vec<_>>();

    let mut persons = Table::new("person", &cols(&["id", "firstName", "lastName"]));
    let person_lives: Vec<Life> = (0..p.persons)
        .map(|i| {
            let life = g.entity();
            persons.push(life, OPEN_END, vec![i.to_string(), format!("P{i}"), format!("L{}", i % 97)]);
            life
        })
        .collect();
    let mut forums = Table::new("forum", &cols(&["id", "title"]));
    let forum_lives: Vec<Life> = (0..p.forums)
        .map(|i| {
            let life = g.entity();
            forums.push(life, "", vec![i.to_string(), format!("Forum {i}")]);
            life
        })
        .collect();

    let mut knows = Table::new("person_knows_person", &cols(&["Person1Id", "Person2Id"]));
    let mut seen = BTreeSet::new();
    let mut attempts = 0;
    while knows.rows.len() < p.knows && p.persons > 1 && attempts < p.knows * 20 {
        attempts += 1;
        let (a, b) = (g.rng.gen_range(0..p.persons), g.rng.gen_range(0..p.persons));
        if a == b || !seen.insert((a.min(b), a.max(b))) {
            continue;
        }
        if let Some(life) = g.edge(person_lives[a], person_lives[b]) {
            knows.push(life, "", vec![a.to_string(), b.to_string()]);
        }
    }

    let mut members = Table::new("forum_hasMember_person", &cols(&["ForumId", "PersonId"]));
    let mut seen = BTreeSet::new();
    let mut attempts = 0;
    while members.rows.len() < p.memberships && p.persons > 0 && p.forums > 0 && attempts < p.memberships * 20 {
        attempts += 1;
        let (f, q) = (g.rng.gen_range(0..p.forums), g.rng.gen_range(0..p.persons));
        if !seen.insert((f, q)) {
            continue;
        }
        if let Some(life) = g.edge(forum_lives[f], person_lives[q]) {
            members.push(life, "", vec![f.to_string(), q.to_string()]);
        }
    }

    let mut posts = Table::new("post", &cols(&["id", "content"]));
    let mut creators = Table::new("post_hasCreator_person", &cols(&["PostId", "PersonId"]));
    for i in 0..p.noise_rows {
        let life = g.entity();
        posts.push(life, "", vec![i.to_string(), "hello".into()]);
        if p.persons > 0 {
            creators.push(life, "", vec![i.to_string(), g.rng.gen_range(0..p.persons).to_string()]);
        }
    }

    let out = dir.join("dynamic");
    fs::create_dir_all(&out).map_err(|e| IngestError::io(&out, e))?;
    let mut summary = FixtureSummary::default();
    let kinds = [("Person", &persons), ("Forum", &forums), ("knows", &knows), ("hasMember", &members), ("Post", &posts), ("hasCreator", &creators)];
    for (kind, table) in kinds {
        let path = out.join(format!("{}_0_0.csv", table.name));
        let mut w = csv::WriterBuilder::new().delimiter(b'|').from_path(&path)?;
        w.write_record(&table.header)?;
        for row in &table.rows {
            w.write_record(row)?;
        }
        w.flush().map_err(|e| IngestError::io(&path, e))?;
        summary.rows_by_kind.insert(kind.to_owned(), table.rows.len() as u64);
        summary.deletions_by_kind.insert(kind.to_owned(), table.deletions);
    }
    Ok(summary)
}
