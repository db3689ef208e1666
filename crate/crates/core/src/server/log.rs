use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde_json::Value;

use super::events::{Event, EventRecord};
use super::ServerError;

/// Append-only JSON-lines event log, optionally backed by a file.
///
/// Appends reach the file (and are synced) before they become visible in
/// memory, so a caller that got a sequence number back can rely on it.
#[derive(Debug, Default)]
pub struct EventLog {
    records: Vec<EventRecord>,
    file: Option<(PathBuf, File)>,
}

impl EventLog {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens (or creates) a log file, checking every record already in it.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, ServerError> {
        let path = path.as_ref().to_path_buf();
        let records = if path.exists() {
            let text = std::fs::read_to_string(&path).map_err(|e| ServerError::StorageFailure(e.to_string()))?;
            parse_log(&text)?
        } else {
            Vec::new()
        };
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| ServerError::StorageFailure(format!("{}: {e}", path.display())))?;
        Ok(Self {
            records,
            file: Some((path, file)),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.file.as_ref().map(|(p, _)| p.as_path())
    }

    pub fn records(&self) -> &[EventRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last_seq(&self) -> u64 {
        self.records.last().map_or(0, |r| r.global_seq)
    }

    /// Records with a sequence number above `seq`.
    pub fn since(&self, seq: u64) -> &[EventRecord] {
        let start = self.records.partition_point(|r| r.global_seq <= seq);
        &self.records[start..]
    }

    pub fn append(&mut self, event: &Event, timestamp: DateTime<Utc>) -> Result<u64, ServerError> {
        let record = EventRecord::new(self.last_seq() + 1, event, timestamp);
        if let Some((path, file)) = &mut self.file {
            file.write_all(record.to_line().as_bytes())
                .and_then(|_| file.sync_data())
                .map_err(|e| ServerError::StorageFailure(format!("{}: {e}", path.display())))?;
        }
        let seq = record.global_seq;
        self.records.push(record);
        Ok(seq)
    }

    /// Appends an untyped record after checking its payload schema. A
    /// rejected record leaves the log unchanged.
    pub fn append_value(&mut self, kind: &str, payload: &Value, timestamp: DateTime<Utc>) -> Result<u64, ServerError> {
        let event = Event::from_parts(kind, payload)?;
        self.append(&event, timestamp)
    }

    /// The whole log as JSON lines.
    pub fn to_jsonl(&self) -> String {
        self.records.iter().map(EventRecord::to_line).collect()
    }
}

/// Parses JSON lines, rejecting gaps, bad checksums, and payloads that do
/// not match their kind.
pub fn parse_log(text: &str) -> Result<Vec<EventRecord>, ServerError> {
    let mut records = Vec::new();
    for (index, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let lineno = index + 1;
        let record: EventRecord = serde_json::from_str(line)
            .map_err(|e| ServerError::CorruptLog(format!("line {lineno}: {e}")))?;
        check_record(&record, records.len() as u64 + 1)
            .map_err(|e| ServerError::CorruptLog(format!("line {lineno}: {e}")))?;
        records.push(record);
    }
    Ok(records)
}

pub(crate) fn check_record(record: &EventRecord, expected_seq: u64) -> Result<Event, String> {
    if record.global_seq != expected_seq {
        return Err(format!("expected sequence {expected_seq}, found {}", record.global_seq));
    }
    if record.checksum != record.compute_checksum() {
        return Err(format!("checksum mismatch at sequence {}", record.global_seq));
    }
    record.event().map_err(|e| e.to_string())
}
