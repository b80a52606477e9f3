//! Sliding metadata window: fresh data for a bounded period, continuously
//! overwritten. Stores compact per-event metadata (selector plus numeric
//! tokens), never full payload text.

use std::collections::VecDeque;

use crate::telemetry::{Selector, TelemetryEvent, Timestamp};

/// Compact record kept in the window.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaRecord {
    pub ts: Timestamp,
    pub selector: Selector,
    pub numeric: Vec<(String, f64)>,
}

impl MetaRecord {
    pub fn from_event(e: &TelemetryEvent) -> Self {
        let numeric = e
            .additional
            .iter()
            .filter_map(|t| {
                t.value
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .map(|v| (t.key.clone(), v))
            })
            .collect();
        MetaRecord { ts: e.timestamp, selector: e.selector, numeric }
    }
}

/// Ring of metadata records no older than `duration_s` relative to the
/// newest record. Insertion evicts stale entries.
#[derive(Debug, Clone)]
pub struct MetadataWindow {
    duration_s: u64,
    records: VecDeque<MetaRecord>,
    newest: Option<Timestamp>,
}

impl MetadataWindow {
    pub const DEFAULT_DURATION_S: u64 = 3600;

    pub fn new(duration_s: u64) -> Self {
        MetadataWindow { duration_s, records: VecDeque::new(), newest: None }
    }

    pub fn duration_s(&self) -> u64 {
        self.duration_s
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn newest(&self) -> Option<Timestamp> {
        self.newest
    }

    pub fn oldest(&self) -> Option<Timestamp> {
        self.records.front().map(|r| r.ts)
    }

    /// Inserts one record (callers supply records in timestamp order) and
    /// evicts everything older than the window relative to the newest.
    pub fn insert(&mut self, record: MetaRecord) {
        self.newest = Some(match self.newest {
            Some(n) if n > record.ts => n,
            _ => record.ts,
        });
        self.records.push_back(record);
        let newest = self.newest.unwrap();
        while let Some(front) = self.records.front() {
            if newest.seconds_since(front.ts) > self.duration_s as i64 {
                self.records.pop_front();
            } else {
                break;
            }
        }
    }

    /// Records whose timestamps intersect `[from, to]`, newest first.
    pub fn query(&self, from: Timestamp, to: Timestamp) -> Vec<&MetaRecord> {
        self.records.iter().rev().filter(|r| r.ts >= from && r.ts <= to).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &MetaRecord> {
        self.records.iter()
    }
}
