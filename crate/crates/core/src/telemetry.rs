//! Normalized telemetry events and the line-oriented log format.
//!
//! Every observation the sensing pipeline handles is a [`TelemetryEvent`]: a
//! timestamped, geo-tagged record carrying a [`Selector`] tag and free-form
//! `key=value` payload tokens. Events render to single whitespace-separated
//! text lines (`format_event`) and parse back losslessly (`parse_event`).
//! The line format is the contract between the pre-process engine, the audit
//! repository and scenario replay.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Latest instant representable: 9999-12-31T23:59:59Z.
const MAX_EPOCH_SECONDS: i64 = 253_402_300_799;

/// Seconds-resolution UTC instant, rendered `YYYY-MM-DDThh:mm:ssZ`.
///
/// Ordering is the natural instant ordering. Sub-second ordering of events
/// within the same second is carried out-of-band by ingestion sequence
/// numbers, never in the text form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp(i64);

impl Timestamp {
    /// Builds a timestamp from seconds since the Unix epoch.
    /// Accepts 1970-01-01T00:00:00Z through 9999-12-31T23:59:59Z.
    pub fn from_epoch_seconds(secs: i64) -> Result<Self, EventError> {
        if (0..=MAX_EPOCH_SECONDS).contains(&secs) {
            Ok(Timestamp(secs))
        } else {
            Err(EventError::OutOfRange {
                field: "timestamp",
                value: secs as f64,
            })
        }
    }

    pub fn epoch_seconds(&self) -> i64 {
        self.0
    }

    /// Saturating forward offset, clamped to the representable range.
    pub fn plus_seconds(&self, secs: u64) -> Timestamp {
        let s = self.0.saturating_add(secs as i64).min(MAX_EPOCH_SECONDS);
        Timestamp(s)
    }

    /// Signed distance in seconds from `earlier` to `self`.
    pub fn seconds_since(&self, earlier: Timestamp) -> i64 {
        self.0 - earlier.0
    }
}

// Civil-date conversion, days relative to 1970-01-01.
fn days_from_civil(y: i64, m: u32, d: u32) -> i64 {
    let y = if m <= 2 { y - 1 } else { y };
    let era = if y >= 0 { y } else { y - 399 } / 400;
    let yoe = y - era * 400;
    let mp = if m > 2 { m - 3 } else { m + 9 } as i64;
    let doy = (153 * mp + 2) / 5 + d as i64 - 1;
    let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    era * 146_097 + doe - 719_468
}

fn civil_from_days(z: i64) -> (i64, u32, u32) {
    let z = z + 719_468;
    let era = if z >= 0 { z } else { z - 146_096 } / 146_097;
    let doe = z - era * 146_097;
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let y = yoe + era * 400;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let d = (doy - (153 * mp + 2) / 5 + 1) as u32;
    let m = if mp < 10 { mp + 3 } else { mp - 9 } as u32;
    (if m <= 2 { y + 1 } else { y }, m, d)
}

fn is_leap(y: i64) -> bool {
    y % 4 == 0 && (y % 100 != 0 || y % 400 == 0)
}

fn days_in_month(y: i64, m: u32) -> u32 {
    match m {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        2 => {
            if is_leap(y) {
                29
            } else {
                28
            }
        }
        _ => 0,
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let days = self.0.div_euclid(86_400);
        let sod = self.0.rem_euclid(86_400);
        let (y, m, d) = civil_from_days(days);
        write!(
            f,
            "{:04}-{:02}-{:02}T{:02}:{:02}:{:02}Z",
            y,
            m,
            d,
            sod / 3600,
            (sod / 60) % 60,
            sod % 60
        )
    }
}

impl FromStr for Timestamp {
    type Err = EventError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || EventError::MalformedTimestamp { text: s.to_string() };
        let b = s.as_bytes();
        if b.len() != 20 || b[4] != b'-' || b[7] != b'-' || b[10] != b'T' || b[13] != b':' || b[16] != b':' || b[19] != b'Z' {
            return Err(bad());
        }
        let num = |range: std::ops::Range<usize>| -> Result<i64, EventError> {
            let part = &s[range];
            if !part.bytes().all(|c| c.is_ascii_digit()) {
                return Err(bad());
            }
            part.parse::<i64>().map_err(|_| bad())
        };
        let (y, mo, d) = (num(0..4)?, num(5..7)? as u32, num(8..10)? as u32);
        let (h, mi, sec) = (num(11..13)?, num(14..16)?, num(17..19)?);
        if !(1970..=9999).contains(&y)
            || !(1..=12).contains(&mo)
            || d < 1
            || d > days_in_month(y, mo)
            || h > 23
            || mi > 59
            || sec > 59
        {
            return Err(bad());
        }
        Ok(Timestamp(days_from_civil(y, mo, d) * 86_400 + h * 3600 + mi * 60 + sec))
    }
}

/// Renders a float with at least one decimal place, using the shortest
/// representation that round-trips exactly. `0` becomes `0.0`, `-115`
/// becomes `-115.0`, `1575.42` stays `1575.42`.
pub fn fmt_num(v: f64) -> String {
    let mut s = format!("{v}");
    if !s.contains('.') && !s.contains('e') && !s.contains("inf") && !s.contains("NaN") {
        s.push_str(".0");
    }
    s
}

/// WGS-84-style coordinate with altitude, rendered `lat,lon,alt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoPoint {
    pub lat_deg: f64,
    pub lon_deg: f64,
    pub alt_m: f64,
}

impl GeoPoint {
    pub fn new(lat_deg: f64, lon_deg: f64, alt_m: f64) -> Result<Self, EventError> {
        if !(-90.0..=90.0).contains(&lat_deg) {
            return Err(EventError::OutOfRange { field: "latitude", value: lat_deg });
        }
        if !(-180.0..=180.0).contains(&lon_deg) {
            return Err(EventError::OutOfRange { field: "longitude", value: lon_deg });
        }
        if !alt_m.is_finite() {
            return Err(EventError::OutOfRange { field: "altitude", value: alt_m });
        }
        Ok(GeoPoint { lat_deg, lon_deg, alt_m })
    }

    pub fn origin() -> Self {
        GeoPoint { lat_deg: 0.0, lon_deg: 0.0, alt_m: 0.0 }
    }
}

impl fmt::Display for GeoPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", fmt_num(self.lat_deg), fmt_num(self.lon_deg), fmt_num(self.alt_m))
    }
}

/// Taxonomy tag grouping telemetry events so the rules engine never has to
/// text-match against irrelevant records. Closed set of five.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Selector {
    Debug,
    Emergency,
    Frequency,
    General,
    SignalLoss,
}

impl Selector {
    pub const ALL: [Selector; 5] = [
        Selector::Debug,
        Selector::Emergency,
        Selector::Frequency,
        Selector::General,
        Selector::SignalLoss,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Selector::Debug => "DEBUG",
            Selector::Emergency => "EMERGENCY",
            Selector::Frequency => "FREQUENCY",
            Selector::General => "GENERAL",
            Selector::SignalLoss => "SIGNAL_LOSS",
        }
    }
}

impl fmt::Display for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Selector {
    type Err = EventError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "DEBUG" => Ok(Selector::Debug),
            "EMERGENCY" => Ok(Selector::Emergency),
            "FREQUENCY" => Ok(Selector::Frequency),
            "GENERAL" => Ok(Selector::General),
            "SIGNAL_LOSS" => Ok(Selector::SignalLoss),
            _ => Err(EventError::UnknownSelector { text: s.to_string() }),
        }
    }
}

/// One `key=value` payload token. Neither half may contain whitespace and
/// the key may not be empty or contain `=`; the value may be empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyValue {
    pub key: String,
    pub value: String,
}

impl KeyValue {
    pub fn new(key: impl Into<String>, value: impl Into<String>) -> Result<Self, EventError> {
        let kv = KeyValue { key: key.into(), value: value.into() };
        if kv.key.is_empty()
            || kv.key.contains('=')
            || kv.key.chars().any(char::is_whitespace)
            || kv.value.chars().any(char::is_whitespace)
        {
            return Err(EventError::BadToken { token: format!("{}={}", kv.key, kv.value) });
        }
        Ok(kv)
    }

    /// Splits a raw `key=value` token at the first `=`.
    pub fn from_token(token: &str) -> Result<Self, EventError> {
        match token.split_once('=') {
            Some((k, v)) if !k.is_empty() => KeyValue::new(k, v),
            _ => Err(EventError::BadToken { token: token.to_string() }),
        }
    }
}

impl fmt::Display for KeyValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}", self.key, self.value)
    }
}

/// Convenience constructor for payload tokens with trusted inputs.
/// Panics on malformed keys; intended for literal keys in generators.
pub fn kv(key: &str, value: impl fmt::Display) -> KeyValue {
    KeyValue::new(key, value.to_string()).expect("malformed key=value token")
}

/// Opaque short drone identifier: non-empty, no whitespace.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DroneId(String);

impl DroneId {
    pub fn new(id: impl Into<String>) -> Result<Self, EventError> {
        let id = id.into();
        if id.is_empty() || id.chars().any(char::is_whitespace) {
            return Err(EventError::BadDroneId { text: id });
        }
        Ok(DroneId(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for DroneId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for DroneId {
    type Err = EventError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DroneId::new(s)
    }
}

/// One normalized observation: the unit of everything downstream.
#[derive(Debug, Clone, PartialEq)]
pub struct TelemetryEvent {
    pub timestamp: Timestamp,
    pub speed_kmh: f64,
    pub heading_deg: f64,
    pub geo: GeoPoint,
    pub selector: Selector,
    pub additional: Vec<KeyValue>,
}

impl TelemetryEvent {
    pub fn new(
        timestamp: Timestamp,
        speed_kmh: f64,
        heading_deg: f64,
        geo: GeoPoint,
        selector: Selector,
        additional: Vec<KeyValue>,
    ) -> Result<Self, EventError> {
        if !speed_kmh.is_finite() || speed_kmh < 0.0 {
            return Err(EventError::OutOfRange { field: "speed_kmh", value: speed_kmh });
        }
        if !(0.0..360.0).contains(&heading_deg) {
            return Err(EventError::OutOfRange { field: "heading_deg", value: heading_deg });
        }
        Ok(TelemetryEvent { timestamp, speed_kmh, heading_deg, geo, selector, additional })
    }

    /// First payload token value for `key`, if present.
    pub fn token(&self, key: &str) -> Option<&str> {
        self.additional.iter().find(|t| t.key == key).map(|t| t.value.as_str())
    }

    /// `token(key)` parsed as a float.
    pub fn numeric_token(&self, key: &str) -> Option<f64> {
        self.token(key).and_then(|v| v.parse::<f64>().ok()).filter(|v| v.is_finite())
    }
}

/// Construction-time validation failures for the domain types.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EventError {
    #[error("{field} out of range: {value}")]
    OutOfRange { field: &'static str, value: f64 },
    #[error("malformed timestamp `{text}`")]
    MalformedTimestamp { text: String },
    #[error("unknown selector `{text}`")]
    UnknownSelector { text: String },
    #[error("malformed key=value token `{token}`")]
    BadToken { token: String },
    #[error("invalid drone id `{text}`")]
    BadDroneId { text: String },
}

/// Renders one event as a log line:
/// `<timestamp> <speed_kmh> <heading_deg> <lat,lon,alt> <selector> <key=value>...`
pub fn format_event(e: &TelemetryEvent) -> String {
    let mut line = format!(
        "{} {} {} {} {}",
        e.timestamp,
        fmt_num(e.speed_kmh),
        fmt_num(e.heading_deg),
        e.geo,
        e.selector
    );
    for t in &e.additional {
        line.push(' ');
        line.push_str(&t.to_string());
    }
    line
}

impl fmt::Display for TelemetryEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_event(self))
    }
}

/// Log-line parse failure. `line` is 1-based; standalone parses report 1.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub kind: ParseErrorKind,
}

impl ParseError {
    pub fn with_line(mut self, line: usize) -> Self {
        self.line = line;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseErrorKind {
    #[error("malformed timestamp `{text}`")]
    MalformedTimestamp { text: String },
    #[error("unknown selector `{text}`")]
    UnknownSelector { text: String },
    #[error("bad field count in {context}: expected {expected}, found {found}")]
    BadFieldCount { context: &'static str, expected: usize, found: usize },
    #[error("bad key=value token `{token}`")]
    BadKeyValueToken { token: String },
    #[error("invalid number in field {field}: `{text}`")]
    InvalidNumber { field: &'static str, text: String },
}

fn err(kind: ParseErrorKind) -> ParseError {
    ParseError { line: 1, kind }
}

fn parse_f64(field: &'static str, text: &str) -> Result<f64, ParseError> {
    let v: f64 = text
        .parse()
        .map_err(|_| err(ParseErrorKind::InvalidNumber { field, text: text.to_string() }))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(err(ParseErrorKind::InvalidNumber { field, text: text.to_string() }))
    }
}

/// Parses one log line back into an event. Inverse of [`format_event`] on
/// its image; tolerant of repeated interior whitespace. Total: any input
/// yields an event or a structured error, never a panic.
pub fn parse_event(line: &str) -> Result<TelemetryEvent, ParseError> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() < 5 {
        return Err(err(ParseErrorKind::BadFieldCount {
            context: "event line",
            expected: 5,
            found: fields.len(),
        }));
    }

    let timestamp: Timestamp = fields[0]
        .parse()
        .map_err(|_| err(ParseErrorKind::MalformedTimestamp { text: fields[0].to_string() }))?;

    let speed_kmh = parse_f64("speed_kmh", fields[1])?;
    if speed_kmh < 0.0 {
        return Err(err(ParseErrorKind::InvalidNumber {
            field: "speed_kmh",
            text: fields[1].to_string(),
        }));
    }
    let heading_deg = parse_f64("heading_deg", fields[2])?;
    if !(0.0..360.0).contains(&heading_deg) {
        return Err(err(ParseErrorKind::InvalidNumber {
            field: "heading_deg",
            text: fields[2].to_string(),
        }));
    }

    let geo_parts: Vec<&str> = fields[3].split(',').collect();
    if geo_parts.len() != 3 {
        return Err(err(ParseErrorKind::BadFieldCount {
            context: "geo",
            expected: 3,
            found: geo_parts.len(),
        }));
    }
    let lat = parse_f64("latitude", geo_parts[0])?;
    let lon = parse_f64("longitude", geo_parts[1])?;
    let alt = parse_f64("altitude", geo_parts[2])?;
    let geo = GeoPoint::new(lat, lon, alt).map_err(|e| match e {
        EventError::OutOfRange { field, .. } => err(ParseErrorKind::InvalidNumber {
            field,
            text: fields[3].to_string(),
        }),
        _ => err(ParseErrorKind::BadFieldCount { context: "geo", expected: 3, found: 3 }),
    })?;

    let selector: Selector = fields[4]
        .parse()
        .map_err(|_| err(ParseErrorKind::UnknownSelector { text: fields[4].to_string() }))?;

    let mut additional = Vec::with_capacity(fields.len() - 5);
    for token in &fields[5..] {
        let t = KeyValue::from_token(token)
            .map_err(|_| err(ParseErrorKind::BadKeyValueToken { token: token.to_string() }))?;
        additional.push(t);
    }

    TelemetryEvent::new(timestamp, speed_kmh, heading_deg, geo, selector, additional).map_err(
        |_| err(ParseErrorKind::BadFieldCount { context: "event line", expected: 5, found: 5 }),
    )
}

/// Parses an entire log text, skipping blank lines. Errors carry the
/// offending 1-based line number.
pub fn parse_log(text: &str) -> Result<Vec<TelemetryEvent>, ParseError> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_event(line).map_err(|e| e.with_line(idx + 1))?);
    }
    Ok(out)
}
