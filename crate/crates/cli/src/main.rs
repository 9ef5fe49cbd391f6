use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use chronostore::bench::{self, BenchError, BenchQuery, BenchSpec, SyntheticSpec};
use chronostore::ingest::{
    self, generate_ldbc_fixture, FixtureParams, LdbcOptions, SchemaFilter, SnapshotOptions, TickMapping,
};
use chronostore::layout::LayoutKind;
use chronostore::mutation::{ApplyStats, ErrorPolicy, Graph};
use chronostore::query::{self, GlobalQuery, GlobalQueryKind, QueryMode, QueryOptions};
use chronostore::temporal::{Interval, ALIVE_END};
use chronostore::verify::verify;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

const STORE_FILE: &str = "store.chrn";

/// Temporal property-graph store: load, transform, query, benchmark, verify.
#[derive(Parser)]
#[command(name = "chronostore", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a store from an event stream, snapshot edge list or LDBC dump.
    Load(LoadArgs),
    /// Turn an LDBC-style CSV dump into a chronological event stream.
    Transform(TransformArgs),
    /// Run one query and print its result as JSON.
    Query(QueryArgs),
    /// Time a query over layouts × modes × history fractions.
    Bench(BenchArgs),
    /// Check every store invariant; exits 1 on any violation.
    Verify(StoreArg),
    /// Write generated test data.
    #[command(subcommand)]
    Generate(GenerateCommand),
}

#[derive(Args)]
struct StoreArg {
    /// Store checkpoint [default: $CHRONOSTORE_DATA_DIR/store.chrn]
    #[arg(long)]
    store: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    /// Event stream if the file starts with the stream header, else snapshot list.
    Auto,
    Events,
    Snapshot,
    Ldbc,
}

#[derive(Args)]
struct LdbcArgs {
    /// Comma-separated entity and edge kinds to keep.
    #[arg(long, default_value = "Person,Forum,knows,hasMember")]
    filter: String,
    #[arg(long, default_value = "|")]
    delimiter: char,
    /// Keep the remaining columns as properties.
    #[arg(long)]
    with_properties: bool,
}

impl LdbcArgs {
    fn options(&self) -> Result<LdbcOptions> {
        if !self.delimiter.is_ascii() {
            bail!("delimiter must be a single ASCII character");
        }
        Ok(LdbcOptions {
            delimiter: self.delimiter as u8,
            filter: SchemaFilter::parse(&self.filter)?,
            with_properties: self.with_properties,
            ..Default::default()
        })
    }
}

#[derive(Args)]
struct LoadArgs {
    /// Input file (or directory for --format ldbc).
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Auto)]
    format: Format,
    #[arg(long, default_value = "st")]
    layout: LayoutKind,
    /// Number of snapshots in a snapshot edge list.
    #[arg(long)]
    snapshots: Option<u64>,
    /// Snapshot lists: every vertex lives over the whole range.
    #[arg(long)]
    full_range_vertices: bool,
    /// Count failing events instead of stopping at the first.
    #[arg(long)]
    skip_errors: bool,
    #[command(flatten)]
    ldbc: LdbcArgs,
    /// Store checkpoint to write [default: $CHRONOSTORE_DATA_DIR/store.chrn]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TransformArgs {
    /// Directory holding the CSV dump.
    input: PathBuf,
    #[command(flatten)]
    ldbc: LdbcArgs,
    /// Event stream file to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum QueryName {
    #[value(name = "one_hop")]
    OneHop,
    #[value(name = "vertex_history")]
    VertexHistory,
    #[value(name = "snapshot")]
    Snapshot,
    #[value(name = "degree_distribution")]
    DegreeDistribution,
    #[value(name = "average_degree")]
    AverageDegree,
}

#[derive(Args)]
struct QueryArgs {
    #[arg(value_enum)]
    query: QueryName,
    #[command(flatten)]
    store: StoreArg,
    #[arg(long, default_value = "id")]
    mode: QueryMode,
    /// Convert the store to this layout before querying.
    #[arg(long)]
    layout: Option<LayoutKind>,
    #[arg(long, default_value_t = 64)]
    batch_size: usize,
    #[arg(long)]
    vid: Option<u64>,
    #[arg(long, default_value_t = 0)]
    start: u64,
    /// Exclusive end; global queries default to one past the last recorded change.
    #[arg(long)]
    end: Option<u64>,
    /// Instant for `snapshot`.
    #[arg(long)]
    at: Option<u64>,
    #[arg(long, default_value_t = 1)]
    granularity: u64,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    store: StoreArg,
    #[arg(long, value_delimiter = ',', default_value = "st,mt")]
    layout: Vec<LayoutKind>,
    #[arg(long, value_delimiter = ',', default_value = "ra,rr,id")]
    mode: Vec<QueryMode>,
    #[arg(long, default_value = "degree_distribution")]
    query: BenchQuery,
    #[arg(long, value_delimiter = ',', default_value = "1,25,50,100")]
    fractions: Vec<f64>,
    #[arg(long, default_value_t = 10)]
    reps: usize,
    #[arg(long, default_value_t = 1)]
    warmup: usize,
    #[arg(long, default_value_t = 64)]
    batch_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Bucket width for global queries [default: horizon / 20]
    #[arg(long)]
    granularity: Option<u64>,
    /// Vertices cycled through by local queries.
    #[arg(long, default_value_t = 16)]
    sample: usize,
    /// Report path stem; `.json` and `.csv` are appended.
    #[arg(long, default_value = "bench_report")]
    out: PathBuf,
    /// Where per-layout checkpoints go [default: a temporary directory]
    #[arg(long)]
    workdir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum GenerateCommand {
    /// LDBC-style CSV dump (Person, Forum, knows, hasMember and noise).
    Ldbc {
        out: PathBuf,
        #[arg(long, default_value_t = 3000)]
        persons: usize,
        #[arg(long, default_value_t = 1000)]
        forums: usize,
        #[arg(long, default_value_t = 4000)]
        knows: usize,
        #[arg(long, default_value_t = 3000)]
        memberships: usize,
        #[arg(long, default_value_t = 0.1)]
        deletion_rate: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Store with uniformly spread edge intervals.
    Synthetic {
        #[arg(long, default_value_t = 10_000)]
        vertices: u64,
        #[arg(long, default_value_t = 1000)]
        horizon: u64,
        #[arg(long, default_value_t = 4)]
        out_degree: u64,
        #[arg(long, default_value_t = 100)]
        max_edge_len: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "st")]
        layout: LayoutKind,
        /// Store checkpoint to write [default: $CHRONOSTORE_DATA_DIR/store.chrn]
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Failures that map to exit code 1 rather than 2.
#[derive(Debug)]
struct InvariantFailure(String);

impl std::fmt::Display for InvariantFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InvariantFailure {}

fn store_path(explicit: Option<PathBuf>) -> Result<PathBuf> {
    if let Some(p) = explicit {
        return Ok(p);
    }
    match std::env::var_os("CHRONOSTORE_DATA_DIR") {
        Some(dir) => Ok(Path::new(&dir).join(STORE_FILE)),
        None => bail!("no store given: pass --store/--out or set CHRONOSTORE_DATA_DIR"),
    }
}

fn open(store: Option<PathBuf>) -> Result<Graph> {
    let path = store_path(store)?;
    Graph::load_checkpoint(&path).with_context(|| format!("opening {}", path.display()))
}

fn save(g: &Graph, out: Option<PathBuf>) -> Result<PathBuf> {
    let path = store_path(out)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    g.persist_checkpoint(&path).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn print_json(v: &serde_json::Value) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, v)?;
    writeln!(out)?;
    Ok(())
}

fn detect_format(path: &Path) -> Result<Format> {
    if path.is_dir() {
        return Ok(Format::Ldbc);
    }
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut first = String::new();
    BufReader::new(f).read_line(&mut first)?;
    Ok(if first.starts_with(ingest::HEADER_TAG) || first.trim().is_empty() { Format::Events } else { Format::Snapshot })
}

fn cmd_load(a: LoadArgs) -> Result<()> {
    let started = Instant::now();
    let format = match a.format {
        Format::Auto => detect_format(&a.input)?,
        f => f,
    };
    let policy = if a.skip_errors { ErrorPolicy::SkipAndCount } else { ErrorPolicy::FailFast };
    let mut g = Graph::new(a.layout)?;
    let mut apply = ApplyStats::default();
    let format_name = match format {
        Format::Events => {
            apply = ingest::load_event_stream(&mut g, &a.input, policy)?;
            "events"
        }
        Format::Snapshot => {
            let snapshots = a.snapshots.ok_or_else(|| anyhow!("--snapshots is required for snapshot edge lists"))?;
            let opts = SnapshotOptions { snapshots, full_range_vertices: a.full_range_vertices };
            let (nodes, edges) = ingest::read_snapshot_file(&a.input, opts)?;
            g.bulk_load(nodes, edges)?;
            "snapshot"
        }
        Format::Ldbc => {
            let (events, _) = ingest::transform_ldbc_dump(&a.input, &a.ldbc.options()?)?;
            apply = g.apply_stream(&events, policy)?;
            "ldbc"
        }
        Format::Auto => unreachable!("resolved above"),
    };
    let path = save(&g, a.out)?;
    let stats = g.stats()?;
    print_json(&json!({
        "store": path,
        "format": format_name,
        "layout": a.layout,
        "build_secs": started.elapsed().as_secs_f64(),
        "vertices": stats.vertices,
        "edges": stats.edges,
        "documents": stats.documents,
        "intervals": stats.intervals,
        "applied": apply.applied,
        "errors": apply.errors,
    }))
}

fn cmd_transform(a: TransformArgs) -> Result<()> {
    if !a.input.is_dir() {
        bail!("{} is not a directory", a.input.display());
    }
    let opts = a.ldbc.options()?;
    let (events, stats) = ingest::transform_ldbc_dump(&a.input, &opts)?;
    ingest::write_event_file(&a.out, &TickMapping::ldbc(), &events)?;
    print_json(&json!({ "out": a.out, "events": events.len(), "stats": stats }))
}

fn cmd_query(a: QueryArgs) -> Result<()> {
    let mut g = open(a.store.store)?;
    if let Some(kind) = a.layout.filter(|k| *k != g.layout().kind()) {
        g = g.convert(kind)?;
    }
    let snap = g.snapshot();
    let layout = g.layout();
    let vid = || a.vid.ok_or_else(|| anyhow!("--vid is required for this query"));
    let q = Interval::new(a.start, a.end.unwrap_or(ALIVE_END))?;
    let started = Instant::now();
    let mut out = io::stdout().lock();
    match a.query {
        QueryName::OneHop => serde_json::to_writer(&mut out, &query::one_hop(&snap, layout, vid()?, &q)?)?,
        QueryName::VertexHistory => serde_json::to_writer(&mut out, &query::vertex_history(&snap, layout, vid()?, &q)?)?,
        QueryName::Snapshot => {
            let t = a.at.ok_or_else(|| anyhow!("--at is required for snapshot"))?;
            serde_json::to_writer(&mut out, &query::snapshot_at(&snap, layout, t)?)?
        }
        QueryName::DegreeDistribution | QueryName::AverageDegree => {
            let kind = if a.query == QueryName::AverageDegree {
                GlobalQueryKind::AverageDegree
            } else {
                GlobalQueryKind::DegreeDistribution
            };
            let interval = query::clamp_interval(&q, g.clock().saturating_add(1))?;
            let gq = GlobalQuery { kind, interval, granularity: a.granularity };
            let (result, metrics) =
                query::execute_global(&snap, layout, &gq, a.mode, &QueryOptions { batch_size: a.batch_size })?;
            result.write_json_lines(&mut out)?;
            eprintln!("{}", json!({ "interval": interval, "mode": a.mode, "layout": layout.kind(), "metrics": metrics }));
            return Ok(());
        }
    }
    writeln!(out)?;
    eprintln!("{}", json!({ "wall": started.elapsed().as_secs_f64(), "layout": layout.kind() }));
    Ok(())
}

fn cmd_bench(a: BenchArgs) -> Result<()> {
    let g = open(a.store.store)?;
    let spec = BenchSpec {
        layouts: a.layout,
        modes: a.mode,
        query: a.query,
        fractions: a.fractions,
        reps: a.reps,
        warmup: a.warmup,
        batch_size: a.batch_size,
        seed: a.seed,
        granularity: a.granularity,
        sample: a.sample,
    };
    let tmp = tempfile::tempdir()?;
    let workdir = a.workdir.unwrap_or_else(|| tmp.path().to_path_buf());
    let result = bench::run_bench(&g, &spec, &workdir);
    let report = match result {
        Err(e @ BenchError::Mismatch { .. }) => return Err(InvariantFailure(e.to_string()).into()),
        r => r?,
    };
    let (json_path, csv_path) = report.save(&a.out)?;
    for c in &report.cells {
        let mode = c.mode.map_or("key".to_owned(), |m| m.to_string());
        eprintln!(
            "{:<3} {:<3} {:>6}%  median {:>10.6}s  p95 {:>10.6}s  fetched {:>10.1}  peak {:>5}",
            c.layout, mode, c.fraction, c.wall.median, c.wall.p95, c.metrics.documents_fetched, c.metrics.peak_buffered
        );
    }
    print_json(&json!({
        "json": json_path,
        "csv": csv_path,
        "cells": report.cells.len(),
        "results_identical": true,
        "attestations": report.attestations,
    }))
}

fn cmd_verify(a: StoreArg) -> Result<()> {
    let g = open(a.store)?;
    let report = verify(&g.snapshot(), g.layout());
    print_json(&serde_json::to_value(&report)?)?;
    if !report.passed() {
        return Err(InvariantFailure(format!("violated: {}", report.failed_checks().join(", "))).into());
    }
    Ok(())
}

fn cmd_generate(c: GenerateCommand) -> Result<()> {
    match c {
        GenerateCommand::Ldbc { out, persons, forums, knows, memberships, deletion_rate, seed } => {
            let p = FixtureParams { persons, forums, knows, memberships, deletion_rate, seed, ..Default::default() };
            let summary = generate_ldbc_fixture(&out, &p)?;
            print_json(&json!({ "out": out, "summary": summary }))
        }
        GenerateCommand::Synthetic { vertices, horizon, out_degree, max_edge_len, seed, layout, out } => {
            let spec = SyntheticSpec { vertices, horizon, out_degree, max_edge_len, seed };
            let g = bench::synthetic_graph(layout, &spec)?;
            let path = save(&g, out)?;
            print_json(&json!({ "store": path, "spec": spec, "documents": g.snapshot().total_documents() }))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Load(a) => cmd_load(a),
        Command::Transform(a) => cmd_transform(a),
        Command::Query(a) => cmd_query(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Generate(c) => cmd_generate(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<InvariantFailure>() => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
