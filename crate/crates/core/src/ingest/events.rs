//! Line-oriented event stream files:
//!
//! ```text
//! #chronostore-events v1 unit=epoch-ms origin=1262304000000
//! 0	INSERT_NODE	{"vid":1}
//! 5	INSERT_PROPERTY	{"src":1,"dst":2,"name":"w","value":3}
//! ```

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{IngestError, TickMapping, TickUnit};
use crate::docstore::Value;
use crate::mutation::{ApplyStats, ErrorPolicy, EventKind, Graph, MutationError, MutationEvent, PropTarget};
use crate::temporal::{TimeInstant, Vid};

pub const HEADER_TAG: &str = "#chronostore-events v1";

#[derive(Debug, Clone, PartialEq)]
pub struct EventStream {
    /// `None` for a file without a header (only allowed when empty of events
    /// or hand-written).
    pub mapping: Option<TickMapping>,
    pub events: Vec<MutationEvent>,
    /// 1-based source line of each event.
    pub lines: Vec<usize>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Payload {
    #[serde(skip_serializing_if = "Option::is_none")]
    vid: Option<Vid>,
    #[serde(skip_serializing_if = "Option::is_none")]
    src: Option<Vid>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dst: Option<Vid>,
    #[serde(skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    value: Option<Value>,
}

impl Payload {
    fn target(target: &PropTarget) -> Self {
        match *target {
            PropTarget::Node(vid) => Payload { vid: Some(vid), ..Default::default() },
            PropTarget::Edge(s, d) => Payload { src: Some(s), dst: Some(d), ..Default::default() },
        }
    }

    fn vid(&self) -> Result<Vid, String> {
        self.vid.ok_or_else(|| "missing \"vid\"".to_owned())
    }

    fn pair(&self) -> Result<(Vid, Vid), String> {
        match (self.src, self.dst) {
            (Some(s), Some(d)) => Ok((s, d)),
            _ => Err("missing \"src\"/\"dst\"".to_owned()),
        }
    }

    fn prop_target(&self) -> Result<PropTarget, String> {
        match (self.vid, self.src, self.dst) {
            (Some(v), None, None) => Ok(PropTarget::Node(v)),
            (None, Some(s), Some(d)) => Ok(PropTarget::Edge(s, d)),
            _ => Err("property needs either \"vid\" or \"src\" and \"dst\"".to_owned()),
        }
    }

    fn name(&self) -> Result<String, String> {
        self.name.clone().ok_or_else(|| "missing \"name\"".to_owned())
    }
}

pub fn format_event(ev: &MutationEvent) -> String {
    let payload = match ev {
        MutationEvent::InsertNode { vid, .. } | MutationEvent::DeleteNode { vid, .. } => {
            Payload { vid: Some(*vid), ..Default::default() }
        }
        MutationEvent::InsertEdge { src, dst, .. } | MutationEvent::DeleteEdge { src, dst, .. } => {
            Payload { src: Some(*src), dst: Some(*dst), ..Default::default() }
        }
        MutationEvent::InsertProperty { target, name, value, .. } => {
            Payload { name: Some(name.clone()), value: Some(value.clone()), ..Payload::target(target) }
        }
        MutationEvent::DeleteProperty { target, name, .. } => Payload { name: Some(name.clone()), ..Payload::target(target) },
    };
    let json = serde_json::to_string(&payload).expect("payload serializes");
    format!("{}\t{}\t{}", ev.time(), ev.kind(), json)
}

pub fn parse_event(line: &str) -> Result<MutationEvent, String> {
    let mut parts = line.splitn(3, '\t');
    let (Some(t), Some(kind), Some(json)) = (parts.next(), parts.next(), parts.next()) else {
        return Err("expected t<TAB>KIND<TAB>payload".to_owned());
    };
    let t: TimeInstant = t.trim().parse().map_err(|_| format!("bad time {t:?}"))?;
    let kind = EventKind::parse(kind.trim()).ok_or_else(|| format!("unknown event kind {kind:?}"))?;
    let p: Payload = serde_json::from_str(json).map_err(|e| format!("bad payload: {e}"))?;
    Ok(match kind {
        EventKind::InsertNode => MutationEvent::InsertNode { vid: p.vid()?, t },
        EventKind::DeleteNode => MutationEvent::DeleteNode { vid: p.vid()?, t },
        EventKind::InsertEdge => {
            let (src, dst) = p.pair()?;
            MutationEvent::InsertEdge { src, dst, t }
        }
        EventKind::DeleteEdge => {
            let (src, dst) = p.pair()?;
            MutationEvent::DeleteEdge { src, dst, t }
        }
        EventKind::InsertProperty => MutationEvent::InsertProperty {
            target: p.prop_target()?,
            name: p.name()?,
            // A JSON null value reads back as an absent field.
            value: p.value.clone().unwrap_or(Value::Null),
            t,
        },
        EventKind::DeleteProperty => MutationEvent::DeleteProperty { target: p.prop_target()?, name: p.name()?, t },
    })
}

fn parse_header(line: &str) -> Result<TickMapping, String> {
    let rest = line.strip_prefix(HEADER_TAG).ok_or_else(|| format!("expected header {HEADER_TAG:?}"))?;
    let (mut unit, mut origin) = (None, None);
    for field in rest.split_whitespace() {
        match field.split_once('=') {
            Some(("unit", u)) => unit = Some(u.parse::<TickUnit>().map_err(|e| e.to_string())?),
            Some(("origin", o)) => origin = Some(o.parse::<i128>().map_err(|_| format!("bad origin {o:?}"))?),
            _ => return Err(format!("unexpected header field {field:?}")),
        }
    }
    match (unit, origin) {
        (Some(unit), Some(origin)) => Ok(TickMapping::new(unit, origin)),
        _ => Err("header needs unit= and origin=".to_owned()),
    }
}

/// Parses a whole stream, rejecting decreasing timestamps.
pub fn parse_events(reader: impl BufRead) -> Result<EventStream, IngestError> {
    let mut out = EventStream { mapping: None, events: Vec::new(), lines: Vec::new() };
    let mut prev: Option<TimeInstant> = None;
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let trimmed = line.trim_end_matches('\r');
        if trimmed.trim().is_empty() {
            continue;
        }
        if trimmed.starts_with('#') {
            if trimmed.starts_with(HEADER_TAG) {
                if line_no != 1 {
                    return Err(IngestError::Parse { line: line_no, msg: "header must be the first line".into() });
                }
                out.mapping = Some(parse_header(trimmed).map_err(|msg| IngestError::Parse { line: line_no, msg })?);
            }
            continue;
        }
        let ev = parse_event(trimmed).map_err(|msg| IngestError::Parse { line: line_no, msg })?;
        if let Some(p) = prev {
            if ev.time() < p {
                return Err(IngestError::OutOfOrder { line: line_no, t: ev.time(), prev: p });
            }
        }
        prev = Some(ev.time());
        out.events.push(ev);
        out.lines.push(line_no);
    }
    Ok(out)
}

pub fn read_event_file(path: &Path) -> Result<EventStream, IngestError> {
    let f = File::open(path).map_err(|e| IngestError::io(path, e))?;
    parse_events(BufReader::new(f))
}

pub fn write_events(mut w: impl Write, mapping: &TickMapping, events: &[MutationEvent]) -> Result<(), IngestError> {
    writeln!(w, "{HEADER_TAG} {}", mapping.header_fields())?;
    let mut prev = 0;
    for (i, ev) in events.iter().enumerate() {
        if ev.time() < prev {
            return Err(IngestError::OutOfOrder { line: i + 2, t: ev.time(), prev });
        }
        prev = ev.time();
        writeln!(w, "{}", format_event(ev))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_event_file(path: &Path, mapping: &TickMapping, events: &[MutationEvent]) -> Result<(), IngestError> {
    let f = File::create(path).map_err(|e| IngestError::io(path, e))?;
    write_events(BufWriter::new(f), mapping, events)
}

/// Parses `path` and replays it into `graph`. Errors raised by an event are
/// reported with the event's line number.
pub fn load_event_stream(graph: &mut Graph, path: &Path, policy: ErrorPolicy) -> Result<ApplyStats, IngestError> {
    let stream = read_event_file(path)?;
    graph.apply_stream(&stream.events, policy).map_err(|e| match e {
        MutationError::AtEvent { index, source } => IngestError::Apply { line: stream.lines[index], source: *source },
        other => IngestError::Mutation(other),
    })
}
