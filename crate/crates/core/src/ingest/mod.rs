//! Dataset loaders and the LDBC-dump to event-stream transformer.

mod events;
mod fixture;
mod ldbc;
mod snapshot;
mod ticks;

use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::mutation::MutationError;

pub use events::{
    format_event, load_event_stream, parse_event, parse_events, read_event_file, write_event_file, write_events,
    EventStream, HEADER_TAG,
};
pub use fixture::{generate_ldbc_fixture, FixtureParams, FixtureSummary};
pub use ldbc::{
    entity_vid, read_ldbc_dump, split_vid, to_events, to_records, transform_ldbc_dump, ColumnNames, LdbcData,
    LdbcOptions, LdbcRow, RowKind, SchemaFilter, TransformStats, EDGE_KINDS, ENTITY_KINDS,
};
pub use snapshot::{parse_snapshot_line, read_snapshot_dataset, read_snapshot_file, SnapshotEdgeRecord, SnapshotOptions};
pub use ticks::{TickMapping, TickUnit, LDBC_ORIGIN_MS};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Stream(#[from] io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("{}:{line}: {msg}", path.display())]
    Row { path: PathBuf, line: u64, msg: String },
    #[error("timestamp overflow: {0}")]
    Overflow(String),
    #[error("unknown kind {0:?}")]
    UnknownKind(String),
    #[error("line {line}: time {t} is before the previous event at {prev}")]
    OutOfOrder { line: usize, t: u64, prev: u64 },
    #[error("line {line}: {source}")]
    Apply { line: usize, source: MutationError },
    #[error(transparent)]
    Mutation(#[from] MutationError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl IngestError {
    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        IngestError::Io { path: path.to_owned(), source }
    }
}
