//! Pre-process engine: ingests raw records from multiple source adapters,
//! normalizes them into [`TelemetryEvent`]s, writes the raw event log and
//! forwards the same ordered stream downstream to the rules engine.
//!
//! Adapters may produce concurrently in principle; the pipeline is the
//! serialization point that establishes one global order by
//! `(timestamp, adapter registration order, per-adapter sequence)`.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use thiserror::Error;

use crate::telemetry::{
    format_event, GeoPoint, KeyValue, Selector, TelemetryEvent, Timestamp,
};

/// Raw sources the pre-processor understands.
///
/// The enum order is the conventional adapter registration order; putting
/// the manufacturer log first lets same-second flight-state samples reach
/// the kinematics tracker before the other sources normalize.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum SourceKind {
    MfrLog,
    RfSample,
    GpsStatus,
    WifiFrame,
    NetCounter,
}

impl SourceKind {
    pub const ALL: [SourceKind; 5] = [
        SourceKind::MfrLog,
        SourceKind::RfSample,
        SourceKind::GpsStatus,
        SourceKind::WifiFrame,
        SourceKind::NetCounter,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SourceKind::MfrLog => "MFR_LOG",
            SourceKind::RfSample => "RF_SAMPLE",
            SourceKind::GpsStatus => "GPS_STATUS",
            SourceKind::WifiFrame => "WIFI_FRAME",
            SourceKind::NetCounter => "NET_COUNTER",
        }
    }
}

impl fmt::Display for SourceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SourceKind {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SourceKind::ALL.iter().copied().find(|k| k.as_str() == s).ok_or(())
    }
}

/// One raw record from a source adapter.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecord {
    pub kind: SourceKind,
    pub ts: Timestamp,
    pub fields: Vec<KeyValue>,
}

impl RawRecord {
    pub fn new(kind: SourceKind, ts: Timestamp, fields: Vec<KeyValue>) -> Self {
        RawRecord { kind, ts, fields }
    }

    pub fn field(&self, key: &str) -> Option<&str> {
        self.fields.iter().find(|f| f.key == key).map(|f| f.value.as_str())
    }

    pub fn f64_field(&self, key: &str) -> Option<f64> {
        self.field(key).and_then(|v| v.parse().ok()).filter(|v: &f64| v.is_finite())
    }

    /// `<source_kind> <capture_ts> key=value ...`
    pub fn to_line(&self) -> String {
        let mut line = format!("{} {}", self.kind, self.ts);
        for f in &self.fields {
            line.push(' ');
            line.push_str(&f.to_string());
        }
        line
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("raw record line {line}: {message}")]
pub struct RawParseError {
    pub line: usize,
    pub message: String,
}

/// Parses one raw record line.
pub fn parse_raw_record(line: &str) -> Result<RawRecord, RawParseError> {
    let toks: Vec<&str> = line.split_whitespace().collect();
    let err = |message: String| RawParseError { line: 1, message };
    if toks.len() < 2 {
        return Err(err(format!("expected `<source_kind> <ts> key=value...`, got {} fields", toks.len())));
    }
    let kind: SourceKind =
        toks[0].parse().map_err(|_| err(format!("unknown source kind `{}`", toks[0])))?;
    let ts: Timestamp =
        toks[1].parse().map_err(|_| err(format!("malformed timestamp `{}`", toks[1])))?;
    let mut fields = Vec::with_capacity(toks.len() - 2);
    for t in &toks[2..] {
        fields.push(
            KeyValue::from_token(t).map_err(|_| err(format!("bad key=value token `{t}`")))?,
        );
    }
    Ok(RawRecord { kind, ts, fields })
}

/// A raw stream entry: a record, or a corrupt line that will count as a
/// drop when the pipeline runs.
#[derive(Debug, Clone, PartialEq)]
pub enum RawEntry {
    Record(RawRecord),
    Corrupt(String),
}

/// Reads a raw adapter replay file. Corrupt lines are preserved as
/// [`RawEntry::Corrupt`] so ingest statistics reflect them.
pub fn read_raw_entries(text: &str) -> Vec<RawEntry> {
    text.lines()
        .filter(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|l| match parse_raw_record(l) {
            Ok(r) => RawEntry::Record(r),
            Err(e) => RawEntry::Corrupt(e.message),
        })
        .collect()
}

/// Splits a mixed raw stream into per-kind adapters in registration order,
/// preserving per-kind record order. Corrupt entries land on the first
/// adapter so they are still counted.
pub fn split_into_adapters(entries: Vec<RawEntry>) -> Vec<Adapter> {
    let mut adapters: Vec<Adapter> =
        SourceKind::ALL.iter().map(|&kind| Adapter { kind, entries: Vec::new() }).collect();
    for e in entries {
        match e {
            RawEntry::Record(r) => {
                let idx = SourceKind::ALL.iter().position(|&k| k == r.kind).unwrap();
                adapters[idx].entries.push(RawEntry::Record(r));
            }
            RawEntry::Corrupt(msg) => adapters[0].entries.push(RawEntry::Corrupt(msg)),
        }
    }
    adapters
}

/// One registered source adapter with its pending records.
#[derive(Debug, Clone)]
pub struct Adapter {
    pub kind: SourceKind,
    pub entries: Vec<RawEntry>,
}

/// Latest flight state known to the pipeline; stamped onto every
/// normalized event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kinematics {
    pub speed_kmh: f64,
    pub heading_deg: f64,
    pub geo: GeoPoint,
}

impl Default for Kinematics {
    fn default() -> Self {
        // Zeros until the first flight-state sample arrives.
        Kinematics { speed_kmh: 0.0, heading_deg: 0.0, geo: GeoPoint::origin() }
    }
}

/// Extracts a flight-state update if the record carries the full set of
/// kinematic fields.
pub fn kinematics_update(r: &RawRecord) -> Option<Kinematics> {
    let speed = r.f64_field("speed_kmh")?;
    let heading = r.f64_field("heading_deg")?;
    let lat = r.f64_field("lat")?;
    let lon = r.f64_field("lon")?;
    let alt = r.f64_field("alt_m")?;
    let geo = GeoPoint::new(lat, lon, alt).ok()?;
    if speed < 0.0 || !(0.0..360.0).contains(&heading) {
        return None;
    }
    Some(Kinematics { speed_kmh: speed, heading_deg: heading, geo })
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NormalizeError {
    #[error("missing field `{0}`")]
    MissingField(&'static str),
    #[error("invalid value for `{field}`: `{value}`")]
    InvalidValue { field: &'static str, value: String },
}

fn required<'a>(r: &'a RawRecord, key: &'static str) -> Result<&'a str, NormalizeError> {
    r.field(key).ok_or(NormalizeError::MissingField(key))
}

fn required_f64(r: &RawRecord, key: &'static str) -> Result<f64, NormalizeError> {
    let raw = required(r, key)?;
    raw.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| NormalizeError::InvalidValue { field: key, value: raw.to_string() })
}

const MFR_SEVERITIES: [&str; 5] = ["debug", "info", "warning", "error", "emergency"];

/// Normalizes one raw record into a telemetry event, stamping the current
/// kinematics. Selector assignment:
///
/// - `RF_SAMPLE` -> FREQUENCY with `freq_mhz` / `power_db`;
/// - `GPS_STATUS` without a fix -> SIGNAL_LOSS `link=GPS`, with a fix ->
///   GENERAL with `sat_count` / `interval_s`;
/// - `WIFI_FRAME` -> GENERAL with `event=<TYPE>` (deauthentication frames
///   arrive as `event=DEAUTH`) plus `src` when present;
/// - `NET_COUNTER` -> GENERAL with `event=NET_PKT bytes=<n>`;
/// - `MFR_LOG` -> EMERGENCY when severity is emergency, DEBUG otherwise,
///   passing non-kinematic fields through.
pub fn normalize(r: &RawRecord, kin: &Kinematics) -> Result<TelemetryEvent, NormalizeError> {
    let (selector, additional) = match r.kind {
        SourceKind::RfSample => {
            let freq = required_f64(r, "freq_mhz")?;
            let power = required_f64(r, "power_db")?;
            (
                Selector::Frequency,
                vec![
                    KeyValue::new("freq_mhz", crate::telemetry::fmt_num(freq)).unwrap(),
                    KeyValue::new("power_db", crate::telemetry::fmt_num(power)).unwrap(),
                ],
            )
        }
        SourceKind::GpsStatus => {
            let fix = required(r, "fix")?;
            match fix {
                "false" => (
                    Selector::SignalLoss,
                    vec![KeyValue::new("link", "GPS").unwrap()],
                ),
                "true" => {
                    let sat = required(r, "sat_count")?.to_string();
                    sat.parse::<u32>().map_err(|_| NormalizeError::InvalidValue {
                        field: "sat_count",
                        value: sat.clone(),
                    })?;
                    let interval = required_f64(r, "interval_s")?;
                    (
                        Selector::General,
                        vec![
                            KeyValue::new("sat_count", sat).unwrap(),
                            KeyValue::new("interval_s", crate::telemetry::fmt_num(interval))
                                .unwrap(),
                        ],
                    )
                }
                other => {
                    return Err(NormalizeError::InvalidValue {
                        field: "fix",
                        value: other.to_string(),
                    })
                }
            }
        }
        SourceKind::WifiFrame => {
            let event = required(r, "event")?.to_string();
            let mut tokens = vec![KeyValue::new("event", event).unwrap()];
            if let Some(src) = r.field("src") {
                tokens.push(KeyValue::new("src", src).unwrap());
            }
            (Selector::General, tokens)
        }
        SourceKind::NetCounter => {
            let bytes = required(r, "bytes")?.to_string();
            bytes.parse::<u64>().map_err(|_| NormalizeError::InvalidValue {
                field: "bytes",
                value: bytes.clone(),
            })?;
            (
                Selector::General,
                vec![
                    KeyValue::new("event", "NET_PKT").unwrap(),
                    KeyValue::new("bytes", bytes).unwrap(),
                ],
            )
        }
        SourceKind::MfrLog => {
            let severity = required(r, "severity")?;
            if !MFR_SEVERITIES.contains(&severity) {
                return Err(NormalizeError::InvalidValue {
                    field: "severity",
                    value: severity.to_string(),
                });
            }
            let selector =
                if severity == "emergency" { Selector::Emergency } else { Selector::Debug };
            let passthrough: Vec<KeyValue> = r
                .fields
                .iter()
                .filter(|f| {
                    !matches!(
                        f.key.as_str(),
                        "severity" | "speed_kmh" | "heading_deg" | "lat" | "lon" | "alt_m"
                    )
                })
                .cloned()
                .collect();
            (selector, passthrough)
        }
    };

    TelemetryEvent::new(r.ts, kin.speed_kmh, kin.heading_deg, kin.geo, selector, additional)
        .map_err(|_| NormalizeError::InvalidValue { field: "kinematics", value: String::new() })
}

/// Per-adapter ingest counters; `read = normalized + dropped` always.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdapterStats {
    pub kind: SourceKind,
    pub read: u64,
    pub normalized: u64,
    pub dropped: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IngestStats {
    pub adapters: Vec<AdapterStats>,
}

impl IngestStats {
    pub fn total_read(&self) -> u64 {
        self.adapters.iter().map(|a| a.read).sum()
    }

    pub fn total_normalized(&self) -> u64 {
        self.adapters.iter().map(|a| a.normalized).sum()
    }

    pub fn total_dropped(&self) -> u64 {
        self.adapters.iter().map(|a| a.dropped).sum()
    }
}

/// Downstream consumer of the normalized stream. The sequence number is
/// the global stream position, which orders events within the same second.
pub trait EventSink {
    fn accept(&mut self, seq: u64, event: &TelemetryEvent) -> std::io::Result<()>;
}

/// Sink that buffers events in memory.
#[derive(Debug, Default)]
pub struct VecSink {
    pub events: Vec<TelemetryEvent>,
}

impl EventSink for VecSink {
    fn accept(&mut self, _seq: u64, event: &TelemetryEvent) -> std::io::Result<()> {
        self.events.push(event.clone());
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("event sink unavailable after {delivered} events: {source}")]
    SinkUnavailable {
        delivered: u64,
        partial: IngestStats,
        source: std::io::Error,
    },
    #[error("log writer unavailable after {delivered} events: {source}")]
    LogUnavailable {
        delivered: u64,
        partial: IngestStats,
        source: std::io::Error,
    },
}

/// Runs the pre-process pipeline over registered adapters.
///
/// Every record is merged into a single stream ordered by
/// `(timestamp, adapter registration order, per-adapter sequence)`, then
/// normalized, appended to `log` and forwarded to `sink` — one line and one
/// sink call per event, so the log and the downstream stream are always the
/// same set. Corrupt entries and normalization failures drop the record and
/// count against the owning adapter.
pub fn run_pipeline(
    adapters: &[Adapter],
    sink: &mut dyn EventSink,
    log: &mut dyn Write,
) -> Result<IngestStats, PipelineError> {
    let mut stats = IngestStats {
        adapters: adapters
            .iter()
            .map(|a| AdapterStats { kind: a.kind, read: 0, normalized: 0, dropped: 0 })
            .collect(),
    };

    // Flattened (adapter order, per-adapter order) plus a stable sort by
    // timestamp gives the documented global order.
    let mut merged: Vec<(Timestamp, usize, &RawRecord)> = Vec::new();
    for (idx, adapter) in adapters.iter().enumerate() {
        for entry in &adapter.entries {
            match entry {
                RawEntry::Record(r) => {
                    stats.adapters[idx].read += 1;
                    if r.kind == adapter.kind {
                        merged.push((r.ts, idx, r));
                    } else {
                        // Source kind is fixed per adapter.
                        stats.adapters[idx].dropped += 1;
                    }
                }
                RawEntry::Corrupt(_) => {
                    stats.adapters[idx].read += 1;
                    stats.adapters[idx].dropped += 1;
                }
            }
        }
    }
    merged.sort_by_key(|(ts, _, _)| *ts);

    let mut kin = Kinematics::default();
    let mut seq: u64 = 0;
    for (_, adapter_idx, record) in merged {
        if let Some(update) = kinematics_update(record) {
            kin = update;
        }
        match normalize(record, &kin) {
            Ok(event) => {
                let line = format_event(&event);
                if let Err(e) = writeln!(log, "{line}") {
                    return Err(PipelineError::LogUnavailable {
                        delivered: seq,
                        partial: stats,
                        source: e,
                    });
                }
                if let Err(e) = sink.accept(seq, &event) {
                    return Err(PipelineError::SinkUnavailable {
                        delivered: seq,
                        partial: stats,
                        source: e,
                    });
                }
                stats.adapters[adapter_idx].normalized += 1;
                seq += 1;
            }
            Err(_) => {
                stats.adapters[adapter_idx].dropped += 1;
            }
        }
    }

    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::telemetry::{kv, parse_log};

    fn ts(secs: i64) -> Timestamp {
        Timestamp::from_epoch_seconds(secs).unwrap()
    }

    fn rf(secs: i64, freq: f64, power: f64) -> RawRecord {
        RawRecord::new(
            SourceKind::RfSample,
            ts(secs),
            vec![kv("freq_mhz", freq), kv("power_db", power)],
        )
    }

    fn mfr(secs: i64, speed: f64) -> RawRecord {
        RawRecord::new(
            SourceKind::MfrLog,
            ts(secs),
            vec![
                kv("severity", "info"),
                kv("code", "FC_STATUS"),
                kv("speed_kmh", speed),
                kv("heading_deg", "90.0"),
                kv("lat", "39.1"),
                kv("lon", "-76.8"),
                kv("alt_m", "120.0"),
            ],
        )
    }

    #[test]
    fn rf_sample_normalizes_to_frequency_event() {
        let e = normalize(&rf(0, 1575.42, -110.0), &Kinematics::default()).unwrap();
        assert_eq!(e.selector, Selector::Frequency);
        assert_eq!(e.token("freq_mhz"), Some("1575.42"));
        assert_eq!(e.token("power_db"), Some("-110.0"));
    }

    #[test]
    fn gps_without_fix_becomes_signal_loss() {
        let r = RawRecord::new(SourceKind::GpsStatus, ts(0), vec![kv("fix", "false")]);
        let e = normalize(&r, &Kinematics::default()).unwrap();
        assert_eq!(e.selector, Selector::SignalLoss);
        assert_eq!(e.token("link"), Some("GPS"));
    }

    #[test]
    fn gps_with_fix_keeps_sat_and_interval() {
        let r = RawRecord::new(
            SourceKind::GpsStatus,
            ts(0),
            vec![kv("fix", "true"), kv("sat_count", 7), kv("interval_s", "1.05")],
        );
        let e = normalize(&r, &Kinematics::default()).unwrap();
        assert_eq!(e.selector, Selector::General);
        assert_eq!(e.numeric_token("sat_count"), Some(7.0));
    }

    #[test]
    fn missing_field_drops_record() {
        let r = RawRecord::new(SourceKind::RfSample, ts(0), vec![kv("freq_mhz", "1575.42")]);
        assert_eq!(
            normalize(&r, &Kinematics::default()),
            Err(NormalizeError::MissingField("power_db"))
        );
    }

    #[test]
    fn deauth_frame_becomes_general_event() {
        let r = RawRecord::new(
            SourceKind::WifiFrame,
            ts(0),
            vec![kv("event", "DEAUTH"), kv("src", "rogue1")],
        );
        let e = normalize(&r, &Kinematics::default()).unwrap();
        assert_eq!(e.selector, Selector::General);
        assert_eq!(e.token("event"), Some("DEAUTH"));
        assert_eq!(e.token("src"), Some("rogue1"));
    }

    #[test]
    fn net_counter_becomes_net_pkt_event() {
        let r = RawRecord::new(SourceKind::NetCounter, ts(0), vec![kv("bytes", 1460)]);
        let e = normalize(&r, &Kinematics::default()).unwrap();
        assert_eq!(e.token("event"), Some("NET_PKT"));
        assert_eq!(e.numeric_token("bytes"), Some(1460.0));
    }

    #[test]
    fn mfr_severity_splits_emergency_from_debug() {
        let mk = |sev: &str| {
            RawRecord::new(
                SourceKind::MfrLog,
                ts(0),
                vec![kv("severity", sev), kv("code", "MOTOR")],
            )
        };
        assert_eq!(
            normalize(&mk("emergency"), &Kinematics::default()).unwrap().selector,
            Selector::Emergency
        );
        for sev in ["debug", "info", "warning", "error"] {
            assert_eq!(
                normalize(&mk(sev), &Kinematics::default()).unwrap().selector,
                Selector::Debug
            );
        }
        assert!(normalize(&mk("panic"), &Kinematics::default()).is_err());
    }

    #[test]
    fn raw_record_line_round_trips() {
        let r = rf(8, 2412.0, -72.5);
        let back = parse_raw_record(&r.to_line()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn unknown_source_kind_rejected() {
        let e = parse_raw_record("SONAR 1970-01-01T00:00:08Z depth=3").unwrap_err();
        assert!(e.message.contains("unknown source kind"));
    }

    #[test]
    fn pipeline_merges_by_timestamp_then_registration_order() {
        // Two adapters with interleaved timestamps; oracle is a stable sort
        // of the flattened input by timestamp.
        let a = Adapter {
            kind: SourceKind::RfSample,
            entries: vec![
                RawEntry::Record(rf(0, 2412.0, -70.0)),
                RawEntry::Record(rf(2, 2412.0, -71.0)),
                RawEntry::Record(rf(2, 2412.0, -72.0)),
            ],
        };
        let b = Adapter {
            kind: SourceKind::NetCounter,
            entries: vec![
                RawEntry::Record(RawRecord::new(
                    SourceKind::NetCounter,
                    ts(1),
                    vec![kv("bytes", 1)],
                )),
                RawEntry::Record(RawRecord::new(
                    SourceKind::NetCounter,
                    ts(2),
                    vec![kv("bytes", 2)],
                )),
            ],
        };
        let mut sink = VecSink::default();
        let mut log = Vec::new();
        let stats = run_pipeline(&[a, b], &mut sink, &mut log).unwrap();

        let got: Vec<(i64, &str)> = sink
            .events
            .iter()
            .map(|e| (e.timestamp.epoch_seconds(), e.selector.as_str()))
            .collect();
        // t=0 RF, t=1 NET, t=2 RF (adapter 0 first, both records), t=2 NET.
        assert_eq!(
            got,
            vec![(0, "FREQUENCY"), (1, "GENERAL"), (2, "FREQUENCY"), (2, "FREQUENCY"), (2, "GENERAL")]
        );
        assert_eq!(stats.total_normalized(), 5);
        assert_eq!(stats.total_dropped(), 0);
    }

    #[test]
    fn pipeline_dual_write_log_equals_stream() {
        let adapters = vec![
            Adapter {
                kind: SourceKind::RfSample,
                entries: (0..20).map(|i| RawEntry::Record(rf(i, 2412.0, -70.0))).collect(),
            },
            Adapter {
                kind: SourceKind::MfrLog,
                entries: (0..20).map(|i| RawEntry::Record(mfr(i, 36.0))).collect(),
            },
        ];
        let mut sink = VecSink::default();
        let mut log = Vec::new();
        run_pipeline(&adapters, &mut sink, &mut log).unwrap();
        let replayed = parse_log(std::str::from_utf8(&log).unwrap()).unwrap();
        assert_eq!(replayed, sink.events);
    }

    #[test]
    fn kinematics_stamp_follows_latest_flight_state() {
        // MFR_LOG registered first: the same-second flight state applies to
        // the RF sample at t=5; the one at t=3 still sees t=0 state.
        let adapters = vec![
            Adapter {
                kind: SourceKind::MfrLog,
                entries: vec![RawEntry::Record(mfr(0, 10.0)), RawEntry::Record(mfr(5, 50.0))],
            },
            Adapter {
                kind: SourceKind::RfSample,
                entries: vec![
                    RawEntry::Record(rf(3, 2412.0, -70.0)),
                    RawEntry::Record(rf(5, 2412.0, -70.0)),
                ],
            },
        ];
        let mut sink = VecSink::default();
        let mut log = Vec::new();
        run_pipeline(&adapters, &mut sink, &mut log).unwrap();
        let rf_events: Vec<&TelemetryEvent> =
            sink.events.iter().filter(|e| e.selector == Selector::Frequency).collect();
        assert_eq!(rf_events[0].speed_kmh, 10.0);
        assert_eq!(rf_events[1].speed_kmh, 50.0);
        // Before the first flight-state sample, zeros.
        let first = &sink.events[0];
        assert_eq!(first.speed_kmh, 10.0); // the mfr event itself carries its own update
    }

    #[test]
    fn empty_sources_produce_zero_stats() {
        let adapters: Vec<Adapter> = SourceKind::ALL
            .iter()
            .map(|&kind| Adapter { kind, entries: vec![] })
            .collect();
        let mut sink = VecSink::default();
        let mut log = Vec::new();
        let stats = run_pipeline(&adapters, &mut sink, &mut log).unwrap();
        assert_eq!(stats.total_read(), 0);
        assert!(sink.events.is_empty());
        assert!(log.is_empty());
    }

    #[test]
    fn corrupt_entry_counts_as_drop_and_prefix_is_delivered() {
        let adapters = vec![Adapter {
            kind: SourceKind::RfSample,
            entries: vec![
                RawEntry::Record(rf(0, 2412.0, -70.0)),
                RawEntry::Record(rf(1, 2412.0, -70.0)),
                RawEntry::Corrupt("bad line".into()),
            ],
        }];
        let mut sink = VecSink::default();
        let mut log = Vec::new();
        let stats = run_pipeline(&adapters, &mut sink, &mut log).unwrap();
        assert_eq!(sink.events.len(), 2);
        assert_eq!(stats.adapters[0].read, 3);
        assert_eq!(stats.adapters[0].normalized, 2);
        assert_eq!(stats.adapters[0].dropped, 1);
    }

    #[test]
    fn read_equals_normalized_plus_dropped() {
        let adapters = vec![Adapter {
            kind: SourceKind::RfSample,
            entries: vec![
                RawEntry::Record(rf(0, 2412.0, -70.0)),
                RawEntry::Record(RawRecord::new(
                    SourceKind::RfSample,
                    ts(1),
                    vec![kv("freq_mhz", "2412.0")], // missing power_db
                )),
                RawEntry::Corrupt("junk".into()),
            ],
        }];
        let mut sink = VecSink::default();
        let mut log = Vec::new();
        let stats = run_pipeline(&adapters, &mut sink, &mut log).unwrap();
        for a in &stats.adapters {
            assert_eq!(a.read, a.normalized + a.dropped);
        }
        assert_eq!(stats.total_dropped(), 2);
    }

    #[test]
    fn failing_sink_aborts_with_partial_stats() {
        struct FailAfter(u64);
        impl EventSink for FailAfter {
            fn accept(&mut self, seq: u64, _e: &TelemetryEvent) -> std::io::Result<()> {
                if seq >= self.0 {
                    Err(std::io::Error::other("sink closed"))
                } else {
                    Ok(())
                }
            }
        }
        let adapters = vec![Adapter {
            kind: SourceKind::RfSample,
            entries: (0..10).map(|i| RawEntry::Record(rf(i, 2412.0, -70.0))).collect(),
        }];
        let mut sink = FailAfter(4);
        let mut log = Vec::new();
        match run_pipeline(&adapters, &mut sink, &mut log) {
            Err(PipelineError::SinkUnavailable { delivered, .. }) => assert_eq!(delivered, 4),
            other => panic!("expected SinkUnavailable, got {other:?}"),
        }
    }

    #[test]
    fn mismatched_record_kind_is_dropped() {
        let adapters = vec![Adapter {
            kind: SourceKind::NetCounter,
            entries: vec![RawEntry::Record(rf(0, 2412.0, -70.0))],
        }];
        let mut sink = VecSink::default();
        let mut log = Vec::new();
        let stats = run_pipeline(&adapters, &mut sink, &mut log).unwrap();
        assert_eq!(stats.adapters[0].dropped, 1);
        assert!(sink.events.is_empty());
    }
}
