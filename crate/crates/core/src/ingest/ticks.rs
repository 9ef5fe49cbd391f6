use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Datelike, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use super::IngestError;
use crate::temporal::{TimeInstant, ALIVE_END};

/// Granularity of source timestamps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TickUnit {
    #[serde(rename = "year")]
    Year,
    #[serde(rename = "snapshot")]
    Snapshot,
    #[serde(rename = "epoch-ms")]
    EpochMs,
}

impl TickUnit {
    pub fn as_str(self) -> &'static str {
        match self {
            TickUnit::Year => "year",
            TickUnit::Snapshot => "snapshot",
            TickUnit::EpochMs => "epoch-ms",
        }
    }
}

impl fmt::Display for TickUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TickUnit {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "year" => Ok(TickUnit::Year),
            "snapshot" => Ok(TickUnit::Snapshot),
            "epoch-ms" => Ok(TickUnit::EpochMs),
            other => Err(IngestError::Parse { line: 0, msg: format!("unknown tick unit {other:?}") }),
        }
    }
}

/// Order-preserving map from source timestamps to ticks: `tick = raw - origin`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TickMapping {
    pub unit: TickUnit,
    pub origin: i128,
}

/// 2010-01-01T00:00:00Z in epoch milliseconds.
pub const LDBC_ORIGIN_MS: i128 = 1_262_304_000_000;

impl TickMapping {
    pub fn new(unit: TickUnit, origin: i128) -> Self {
        Self { unit, origin }
    }

    pub fn snapshots() -> Self {
        Self::new(TickUnit::Snapshot, 0)
    }

    pub fn ldbc() -> Self {
        Self::new(TickUnit::EpochMs, LDBC_ORIGIN_MS)
    }

    pub fn to_tick(&self, raw: i128) -> Result<TimeInstant, IngestError> {
        let d = raw.checked_sub(self.origin).ok_or_else(|| overflow(raw, self))?;
        if d < 0 || d >= ALIVE_END as i128 {
            return Err(overflow(raw, self));
        }
        Ok(d as TimeInstant)
    }

    pub fn to_raw(&self, tick: TimeInstant) -> i128 {
        self.origin + tick as i128
    }

    /// Parses a source timestamp in this mapping's unit: an integer, or for
    /// `year`/`epoch-ms` also an ISO-8601 date or date-time.
    pub fn parse_raw(&self, s: &str) -> Result<i128, IngestError> {
        let s = s.trim();
        if let Ok(n) = s.parse::<i128>() {
            return Ok(n);
        }
        let dt = match self.unit {
            TickUnit::Snapshot => None,
            _ => parse_datetime(s),
        };
        match (self.unit, dt) {
            (TickUnit::Year, Some(dt)) => Ok(dt.year() as i128),
            (TickUnit::EpochMs, Some(dt)) => Ok(dt.and_utc().timestamp_millis() as i128),
            _ => Err(IngestError::Parse { line: 0, msg: format!("bad {} timestamp {s:?}", self.unit) }),
        }
    }

    pub fn parse_tick(&self, s: &str) -> Result<TimeInstant, IngestError> {
        self.to_tick(self.parse_raw(s)?)
    }

    pub fn header_fields(&self) -> String {
        format!("unit={} origin={}", self.unit, self.origin)
    }
}

fn overflow(raw: i128, m: &TickMapping) -> IngestError {
    IngestError::Overflow(format!("timestamp {raw} is outside the tick range of origin {} ({})", m.origin, m.unit))
}

fn parse_datetime(s: &str) -> Option<NaiveDateTime> {
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.naive_utc());
    }
    // LDBC writes offsets without a colon.
    if let Ok(dt) = DateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S%.f%z") {
        return Some(dt.naive_utc());
    }
    if let Ok(dt) = NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S%.f") {
        return Some(dt);
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d").ok().and_then(|d| d.and_hms_opt(0, 0, 0))
}
