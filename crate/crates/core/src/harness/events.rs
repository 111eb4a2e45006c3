//! Event logs shared by all three methods.
//!
//! Columns, in order: `tick,event_type,org_id,parent_id,slot,lifespan,cause,generation`.
//! Fields that do not apply are left empty. Self-replicator rows come
//! straight from the world and have no generation. Baseline rows are one
//! `death` per episode evaluation with `tick` and `generation` set to the
//! generation index, `slot` to the member index and `org_id` to the running
//! evaluation count.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::FitnessRecord;
use crate::envs::DeathCause;
use crate::error::{Error, Result};
use crate::world::{Event, EventKind};

pub const EVENT_COLUMNS: [&str; 8] = [
    "tick",
    "event_type",
    "org_id",
    "parent_id",
    "slot",
    "lifespan",
    "cause",
    "generation",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRecord {
    pub tick: u64,
    pub event_type: EventKind,
    pub org_id: u64,
    pub parent_id: Option<u64>,
    pub slot: Option<usize>,
    pub lifespan: Option<u64>,
    pub cause: Option<DeathCause>,
    pub generation: Option<u64>,
}

impl EventRecord {
    pub fn is_death(&self) -> bool {
        self.event_type == EventKind::Death
    }
}

impl From<&Event> for EventRecord {
    fn from(e: &Event) -> Self {
        Self {
            tick: e.tick,
            event_type: e.kind,
            org_id: e.org_id,
            parent_id: e.parent_id,
            slot: Some(e.slot),
            lifespan: e.lifespan,
            cause: e.cause,
            generation: None,
        }
    }
}

/// Converts a baseline evaluation; `index` is its position in the run.
pub fn baseline_record(r: &FitnessRecord, index: u64) -> EventRecord {
    EventRecord {
        tick: r.generation,
        event_type: EventKind::Death,
        org_id: index,
        parent_id: None,
        slot: Some(r.member),
        lifespan: Some(r.lifespan),
        cause: r.cause,
        generation: Some(r.generation),
    }
}

/// Streaming CSV writer for event records.
pub struct EventWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> EventWriter<W> {
    pub fn new(out: W) -> Self {
        Self {
            inner: csv::WriterBuilder::new().has_headers(true).from_writer(out),
        }
    }

    pub fn write(&mut self, record: &EventRecord) -> csv::Result<()> {
        self.inner.serialize(record)
    }

    pub fn finish(mut self) -> std::io::Result<W> {
        self.inner.flush()?;
        self.inner.into_inner().map_err(|e| e.into_error())
    }
}

/// Serializes `records` with a header row.
pub fn write_events<W: Write>(records: &[EventRecord], out: W) -> csv::Result<W> {
    let mut w = EventWriter::new(out);
    if records.is_empty() {
        w.inner.write_record(EVENT_COLUMNS)?;
    }
    for r in records {
        w.write(r)?;
    }
    Ok(w.finish()?)
}

pub fn read_events<R: Read>(input: R) -> csv::Result<Vec<EventRecord>> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    if headers.iter().ne(EVENT_COLUMNS) {
        return Err(csv::Error::from(std::io::Error::new(
            std::io::ErrorKind::InvalidData,
            format!("unexpected header {:?}", headers.iter().collect::<Vec<_>>()),
        )));
    }
    r.deserialize().collect()
}

pub fn load_events(path: &Path) -> Result<Vec<EventRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_events(std::io::BufReader::new(file)).map_err(|e| Error::parse(path, e))
}
