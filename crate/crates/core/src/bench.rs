//! Benchmark grids over layout × mode × history fraction, plus synthetic
//! stores to run them on.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::layout::LayoutKind;
use crate::mutation::{EdgeRecord, Graph, MutationError, NodeRecord};
use crate::query::{
    execute_global, one_hop, vertex_history, GlobalQuery, GlobalQueryKind, QueryError, QueryMetrics, QueryMode,
    QueryOptions,
};
use crate::temporal::{Interval, IntervalSet, TimeInstant, Vid};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid bench spec: {0}")]
    Invalid(String),
    #[error("results differ at {fraction}% between {first} and {other}")]
    Mismatch { fraction: f64, first: String, other: String },
    #[error(transparent)]
    Mutation(#[from] MutationError),
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchQuery {
    OneHop,
    VertexHistory,
    DegreeDistribution,
    AverageDegree,
}

impl BenchQuery {
    pub const ALL: [BenchQuery; 4] =
        [BenchQuery::OneHop, BenchQuery::VertexHistory, BenchQuery::DegreeDistribution, BenchQuery::AverageDegree];

    pub fn as_str(self) -> &'static str {
        match self {
            BenchQuery::OneHop => "one_hop",
            BenchQuery::VertexHistory => "vertex_history",
            BenchQuery::DegreeDistribution => "degree_distribution",
            BenchQuery::AverageDegree => "average_degree",
        }
    }

    /// Global queries run under every mode; local ones use keyed access only.
    pub fn is_global(self) -> bool {
        matches!(self, BenchQuery::DegreeDistribution | BenchQuery::AverageDegree)
    }
}

impl fmt::Display for BenchQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BenchQuery {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BenchQuery::ALL.into_iter().find(|q| q.as_str() == s).ok_or_else(|| {
            format!("unknown query {s:?} (expected one_hop, vertex_history, degree_distribution or average_degree)")
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSpec {
    pub layouts: Vec<LayoutKind>,
    pub modes: Vec<QueryMode>,
    pub query: BenchQuery,
    /// Percentages of history, each in (0, 100]; a fraction `f` queries
    /// `[0, ceil(f/100 * horizon))`.
    pub fractions: Vec<f64>,
    pub reps: usize,
    pub warmup: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Bucket width for global queries; defaults to a twentieth of the horizon.
    pub granularity: Option<u64>,
    /// Vertices cycled through by local queries.
    pub sample: usize,
}

impl Default for BenchSpec {
    fn default() -> Self {
        Self {
            layouts: LayoutKind::ALL.to_vec(),
            modes: QueryMode::ALL.to_vec(),
            query: BenchQuery::DegreeDistribution,
            fractions: vec![1.0, 25.0, 50.0, 100.0],
            reps: 10,
            warmup: 1,
            batch_size: QueryOptions::default().batch_size,
            seed: 0,
            granularity: None,
            sample: 16,
        }
    }
}

impl BenchSpec {
    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: &str| Err(BenchError::Invalid(m.to_owned()));
        if self.layouts.is_empty() || (self.query.is_global() && self.modes.is_empty()) {
            return bad("need at least one layout and mode");
        }
        if self.fractions.is_empty() || self.fractions.iter().any(|f| !(*f > 0.0 && *f <= 100.0)) {
            return bad("fractions must lie in (0, 100]");
        }
        if self.reps == 0 || self.batch_size == 0 || self.sample == 0 || self.granularity == Some(0) {
            return bad("reps, batch size, sample and granularity must be positive");
        }
        Ok(())
    }

    fn cell_modes(&self) -> Vec<Option<QueryMode>> {
        if self.query.is_global() {
            self.modes.iter().copied().map(Some).collect()
        } else {
            vec![None]
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct TimeSummary {
    pub mean: f64,
    pub median: f64,
    pub p95: f64,
    pub min: f64,
    pub max: f64,
}

impl TimeSummary {
    pub fn of(samples: &[Duration]) -> Self {
        if samples.is_empty() {
            return Self::default();
        }
        let mut s: Vec<f64> = samples.iter().map(Duration::as_secs_f64).collect();
        s.sort_by(f64::total_cmp);
        let n = s.len();
        let median = if n % 2 == 1 { s[n / 2] } else { (s[n / 2 - 1] + s[n / 2]) / 2.0 };
        let p95 = s[((n as f64 * 0.95).ceil() as usize).clamp(1, n) - 1];
        Self { mean: s.iter().sum::<f64>() / n as f64, median, p95, min: s[0], max: s[n - 1] }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct MetricSummary {
    pub documents_fetched: f64,
    pub keys_fetched: f64,
    pub bytes: f64,
    pub peak_buffered: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BuildReport {
    pub layout: LayoutKind,
    pub build_secs: f64,
    pub checkpoint_bytes: u64,
    pub documents: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellReport {
    pub layout: LayoutKind,
    pub mode: Option<QueryMode>,
    pub fraction: f64,
    pub interval: Interval,
    pub reps: usize,
    pub open_secs: f64,
    pub wall: TimeSummary,
    pub metrics: MetricSummary,
}

/// Every cell of one fraction produced the payload with this digest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Attestation {
    pub fraction: String,
    pub cells: usize,
    pub digest: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub spec: BenchSpec,
    pub horizon: TimeInstant,
    pub builds: Vec<BuildReport>,
    pub attestations: Vec<Attestation>,
    pub cells: Vec<CellReport>,
}

#[derive(Serialize)]
struct CsvRow<'a> {
    query: &'a str,
    layout: &'a str,
    mode: &'a str,
    fraction: f64,
    start: u64,
    end: u64,
    reps: usize,
    mean_s: f64,
    median_s: f64,
    p95_s: f64,
    documents_fetched: f64,
    keys_fetched: f64,
    peak_buffered: u64,
    bytes: f64,
    checkpoint_bytes: u64,
    build_s: f64,
}

impl BenchReport {
    pub fn cell(&self, layout: LayoutKind, mode: Option<QueryMode>, fraction: f64) -> Option<&CellReport> {
        self.cells.iter().find(|c| c.layout == layout && c.mode == mode && c.fraction == fraction)
    }

    pub fn write_json(&self, w: impl Write) -> Result<(), BenchError> {
        Ok(serde_json::to_writer_pretty(w, self)?)
    }

    pub fn write_csv(&self, w: impl Write) -> Result<(), BenchError> {
        let mut out = csv::Writer::from_writer(w);
        for c in &self.cells {
            let build = self.builds.iter().find(|b| b.layout == c.layout);
            out.serialize(CsvRow {
                query: self.spec.query.as_str(),
                layout: c.layout.as_str(),
                mode: c.mode.map_or("key", QueryMode::as_str),
                fraction: c.fraction,
                start: c.interval.start(),
                end: c.interval.end(),
                reps: c.reps,
                mean_s: c.wall.mean,
                median_s: c.wall.median,
                p95_s: c.wall.p95,
                documents_fetched: c.metrics.documents_fetched,
                keys_fetched: c.metrics.keys_fetched,
                peak_buffered: c.metrics.peak_buffered,
                bytes: c.metrics.bytes,
                checkpoint_bytes: build.map_or(0, |b| b.checkpoint_bytes),
                build_s: build.map_or(0.0, |b| b.build_secs),
            })?;
        }
        out.flush()?;
        Ok(())
    }

    /// Writes `<stem>.json` and `<stem>.csv`.
    pub fn save(&self, stem: &Path) -> Result<(PathBuf, PathBuf), BenchError> {
        let json = stem.with_extension("json");
        let csv = stem.with_extension("csv");
        self.write_json(fs::File::create(&json)?)?;
        self.write_csv(fs::File::create(&csv)?)?;
        Ok((json, csv))
    }
}

/// `[0, ceil(fraction% of horizon))`, never empty.
pub fn fraction_interval(horizon: TimeInstant, fraction: f64) -> Interval {
    let end = ((horizon as f64) * fraction / 100.0).ceil() as u64;
    Interval::new(0, end.clamp(1, horizon.max(1))).expect("non-empty")
}

struct Runner<'a> {
    spec: &'a BenchSpec,
    vids: Vec<Vid>,
    granularity: u64,
}

impl Runner<'_> {
    fn opts(&self) -> QueryOptions {
        QueryOptions { batch_size: self.spec.batch_size }
    }

    fn global(&self, q: Interval) -> GlobalQuery {
        let kind = match self.spec.query {
            BenchQuery::AverageDegree => GlobalQueryKind::AverageDegree,
            _ => GlobalQueryKind::DegreeDistribution,
        };
        GlobalQuery { kind, interval: q, granularity: self.granularity }
    }

    /// One timed execution; local queries touch `vids[rep % len]`.
    fn run(&self, g: &Graph, q: Interval, mode: Option<QueryMode>, rep: usize) -> Result<(Duration, QueryMetrics), BenchError> {
        let snap = g.snapshot();
        let started = Instant::now();
        let metrics = match (self.spec.query, mode) {
            (BenchQuery::OneHop, _) => {
                std::hint::black_box(one_hop(&snap, g.layout(), self.vids[rep % self.vids.len()], &q)?);
                QueryMetrics::default()
            }
            (BenchQuery::VertexHistory, _) => {
                std::hint::black_box(vertex_history(&snap, g.layout(), self.vids[rep % self.vids.len()], &q)?);
                QueryMetrics::default()
            }
            (_, mode) => {
                let (r, m) = execute_global(&snap, g.layout(), &self.global(q), mode.unwrap_or(QueryMode::Id), &self.opts())?;
                std::hint::black_box(r);
                m
            }
        };
        Ok((started.elapsed(), metrics))
    }

    /// The full result for `q`, as canonical JSON.
    fn payload(&self, g: &Graph, q: Interval, mode: Option<QueryMode>) -> Result<String, BenchError> {
        let snap = g.snapshot();
        Ok(match (self.spec.query, mode) {
            (BenchQuery::OneHop, _) => {
                let mut out = BTreeMap::new();
                for v in &self.vids {
                    out.insert(*v, one_hop(&snap, g.layout(), *v, &q)?);
                }
                serde_json::to_string(&out)?
            }
            (BenchQuery::VertexHistory, _) => {
                let mut out = BTreeMap::new();
                for v in &self.vids {
                    out.insert(*v, format!("{:?}", vertex_history(&snap, g.layout(), *v, &q)?));
                }
                serde_json::to_string(&out)?
            }
            (_, mode) => {
                let (r, _) = execute_global(&snap, g.layout(), &self.global(q), mode.unwrap_or(QueryMode::Id), &self.opts())?;
                r.to_json_lines()
            }
        })
    }
}

fn label(layout: LayoutKind, mode: Option<QueryMode>) -> String {
    match mode {
        Some(m) => format!("{layout}/{m}"),
        None => layout.to_string(),
    }
}

fn fraction_label(f: f64) -> String {
    format!("{f}")
}

/// Runs the grid. Each layout is built from `base` and checkpointed under
/// `workdir`; every cell re-opens its checkpoint so no state carries over.
/// Before any timing, all cells of a fraction must return identical results.
pub fn run_bench(base: &Graph, spec: &BenchSpec, workdir: &Path) -> Result<BenchReport, BenchError> {
    spec.validate()?;
    let horizon = base.clock().saturating_add(1);
    let mut all: Vec<Vid> = base.lifespans().iter().map(|(v, _)| *v).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    all.shuffle(&mut rng);
    all.truncate(spec.sample);
    all.sort_unstable();
    if all.is_empty() {
        all.push(0);
    }
    let runner = Runner { spec, vids: all, granularity: spec.granularity.unwrap_or((horizon / 20).max(1)) };

    fs::create_dir_all(workdir)?;
    let mut builds = Vec::new();
    let mut paths = BTreeMap::new();
    for &layout in &spec.layouts {
        let started = Instant::now();
        let g = base.convert(layout)?;
        let path = workdir.join(format!("{layout}.chrn"));
        g.persist_checkpoint(&path)?;
        builds.push(BuildReport {
            layout,
            build_secs: started.elapsed().as_secs_f64(),
            checkpoint_bytes: fs::metadata(&path)?.len(),
            documents: g.snapshot().total_documents(),
        });
        paths.insert(layout, path);
    }

    let mut attestations = Vec::new();
    for &f in &spec.fractions {
        let q = fraction_interval(horizon, f);
        let mut first: Option<(String, String)> = None;
        let mut cells = 0;
        for &layout in &spec.layouts {
            let g = Graph::load_checkpoint(&paths[&layout])?;
            for mode in spec.cell_modes() {
                let payload = runner.payload(&g, q, mode)?;
                cells += 1;
                match &first {
                    None => first = Some((label(layout, mode), payload)),
                    Some((name, p)) if *p != payload => {
                        return Err(BenchError::Mismatch { fraction: f, first: name.clone(), other: label(layout, mode) });
                    }
                    Some(_) => {}
                }
            }
        }
        let digest = Sha256::digest(first.map(|(_, p)| p).unwrap_or_default().as_bytes());
        let digest = digest.iter().map(|b| format!("{b:02x}")).collect();
        attestations.push(Attestation { fraction: fraction_label(f), cells, digest });
    }

    let mut cells = Vec::new();
    for &layout in &spec.layouts {
        for mode in spec.cell_modes() {
            for &f in &spec.fractions {
                let q = fraction_interval(horizon, f);
                let opened = Instant::now();
                let g = Graph::load_checkpoint(&paths[&layout])?;
                let open_secs = opened.elapsed().as_secs_f64();
                for rep in 0..spec.warmup {
                    runner.run(&g, q, mode, rep)?;
                }
                let mut walls = Vec::with_capacity(spec.reps);
                let mut m = MetricSummary::default();
                for rep in 0..spec.reps {
                    let (wall, metrics) = runner.run(&g, q, mode, rep)?;
                    walls.push(wall);
                    m.documents_fetched += metrics.documents_fetched as f64;
                    m.keys_fetched += metrics.keys_fetched as f64;
                    m.bytes += metrics.bytes as f64;
                    m.peak_buffered = m.peak_buffered.max(metrics.peak_buffered);
                }
                let n = spec.reps as f64;
                m.documents_fetched /= n;
                m.keys_fetched /= n;
                m.bytes /= n;
                cells.push(CellReport {
                    layout,
                    mode,
                    fraction: f,
                    interval: q,
                    reps: spec.reps,
                    open_secs,
                    wall: TimeSummary::of(&walls),
                    metrics: m,
                });
            }
        }
    }
    Ok(BenchReport { spec: spec.clone(), horizon, builds, attestations, cells })
}

/// Shape of a generated store: every vertex lives over `[0, horizon)`;
/// each has `out_degree` out-edges to distinct random targets, alive over
/// an interval with uniform start and length in `1..=max_edge_len`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub vertices: u64,
    pub horizon: TimeInstant,
    pub out_degree: u64,
    pub max_edge_len: u64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self { vertices: 10_000, horizon: 1000, out_degree: 4, max_edge_len: 100, seed: 1 }
    }
}

pub fn synthetic_records(spec: &SyntheticSpec) -> (Vec<NodeRecord>, Vec<EdgeRecord>) {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let life = Interval::new(0, spec.horizon.max(1)).expect("positive horizon");
    let nodes = (0..spec.vertices)
        .map(|vid| NodeRecord { vid, lifespan: IntervalSet::single(life), attributes: BTreeMap::new() })
        .collect();
    let mut edges = Vec::new();
    if spec.vertices > 1 {
        for src in 0..spec.vertices {
            let mut targets = BTreeSet::new();
            while (targets.len() as u64) < spec.out_degree.min(spec.vertices - 1) {
                let dst = rng.gen_range(0..spec.vertices);
                if dst != src {
                    targets.insert(dst);
                }
            }
            for dst in targets {
                let start = rng.gen_range(0..life.end());
                let len = rng.gen_range(1..=spec.max_edge_len.max(1));
                let iv = Interval::new(start, (start + len).min(life.end())).expect("non-empty");
                edges.push(EdgeRecord { src, dst, intervals: IntervalSet::single(iv), attributes: BTreeMap::new() });
            }
        }
    }
    (nodes, edges)
}

pub fn synthetic_graph(kind: LayoutKind, spec: &SyntheticSpec) -> Result<Graph, MutationError> {
    let mut g = Graph::new(kind)?;
    let (nodes, edges) = synthetic_records(spec);
    g.bulk_load(nodes, edges)?;
    Ok(g)
}
