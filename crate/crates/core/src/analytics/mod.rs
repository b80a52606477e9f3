//! The stateful stage of the pipeline: sliding metadata window, stateful
//! signature completion, trend detection, alert emission and the
//! operating-mode state machine.
//!
//! One [`AnalyticsEngine`] owns all mutable detection state for one drone.
//! It consumes the ordered event stream plus the rule matches produced by
//! the rules engine and emits [`Alert`]s and mode transitions.

mod mode;
mod stateful;
mod trend;
mod window;

pub use mode::{Mode, ModeInput, ModeMachine, ModeTransition};
pub use stateful::{StatefulMatcher, Trigger};
pub use trend::{interval_constancy, CovReading, TrendDetection, TrendDetector, TrendError};
pub use window::{MetaRecord, MetadataWindow};

use std::fmt;

use thiserror::Error;

use crate::rules::{ActionLevel, RuleMatch};
use crate::telemetry::{DroneId, TelemetryEvent, Timestamp};

/// Rule name used for alerts raised by the GPS interval-constancy trend
/// detector (no signature file entry; the detector is always on).
pub const INTERVAL_CONSTANCY_RULE: &str = "gps_interval_constancy";

/// A fired signature, ready for mode stepping, countermeasures and the
/// alert log.
#[derive(Debug, Clone, PartialEq)]
pub struct Alert {
    pub emitted: Timestamp,
    pub drone: DroneId,
    pub rule: String,
    pub level: ActionLevel,
    pub count: u64,
    pub first: Timestamp,
    pub last: Timestamp,
    pub detail: String,
}

impl Alert {
    /// `<ts> ALERT <drone> <level> <rule> count=<n> first=<ts> last=<ts> <detail...>`
    pub fn to_line(&self) -> String {
        let mut line = format!(
            "{} ALERT {} {} {} count={} first={} last={}",
            self.emitted, self.drone, self.level, self.rule, self.count, self.first, self.last
        );
        if !self.detail.is_empty() {
            line.push(' ');
            line.push_str(&self.detail);
        }
        line
    }
}

impl fmt::Display for Alert {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_line())
    }
}

/// Tunables for the analytics stage, readable from a line-oriented
/// `key value` file.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticsConfig {
    pub window_s: u64,
    pub quiet_period_s: u64,
    pub cov_threshold: f64,
    pub cov_min_samples: usize,
}

impl Default for AnalyticsConfig {
    fn default() -> Self {
        AnalyticsConfig {
            window_s: MetadataWindow::DEFAULT_DURATION_S,
            quiet_period_s: ModeMachine::DEFAULT_QUIET_PERIOD_S,
            cov_threshold: 0.01,
            cov_min_samples: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: unknown config key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: bad value for `{key}`: `{value}`")]
    BadValue { line: usize, key: String, value: String },
    #[error("line {line}: expected `key value`")]
    Malformed { line: usize },
}

impl AnalyticsConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = AnalyticsConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let n = idx + 1;
            let mut parts = line.split_whitespace();
            let (Some(key), Some(value), None) = (parts.next(), parts.next(), parts.next())
            else {
                return Err(ConfigError::Malformed { line: n });
            };
            let bad = || ConfigError::BadValue {
                line: n,
                key: key.to_string(),
                value: value.to_string(),
            };
            match key {
                "window_s" => cfg.window_s = value.parse().map_err(|_| bad())?,
                "quiet_period_s" => cfg.quiet_period_s = value.parse().map_err(|_| bad())?,
                "cov_threshold" => {
                    cfg.cov_threshold = value.parse().map_err(|_| bad())?;
                    if !cfg.cov_threshold.is_finite() || cfg.cov_threshold <= 0.0 {
                        return Err(bad());
                    }
                }
                "cov_min_samples" => cfg.cov_min_samples = value.parse().map_err(|_| bad())?,
                _ => {
                    return Err(ConfigError::UnknownKey { line: n, key: key.to_string() });
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        format!(
            "window_s {}\nquiet_period_s {}\ncov_threshold {}\ncov_min_samples {}\n",
            self.window_s, self.quiet_period_s, self.cov_threshold, self.cov_min_samples
        )
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyticsError {
    #[error("non-monotonic timestamp: {ts} after {prev}")]
    NonMonotonicTimestamp { ts: Timestamp, prev: Timestamp },
}

/// Distance covered, integrated from reported speed over elapsed time.
/// The speed reported at an event holds until the next event.
#[derive(Debug, Clone, Default)]
pub struct Odometer {
    total_m: f64,
    last: Option<(Timestamp, f64)>,
}

impl Odometer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn total_m(&self) -> f64 {
        self.total_m
    }

    /// Advances along the event stream; the first event contributes zero.
    /// Rejects events that step backwards in time.
    pub fn advance(&mut self, e: &TelemetryEvent) -> Result<f64, AnalyticsError> {
        if let Some((prev_ts, prev_speed)) = self.last {
            let dt = e.timestamp.seconds_since(prev_ts);
            if dt < 0 {
                return Err(AnalyticsError::NonMonotonicTimestamp { ts: e.timestamp, prev: prev_ts });
            }
            self.total_m += prev_speed / 3.6 * dt as f64;
        }
        self.last = Some((e.timestamp, e.speed_kmh));
        Ok(self.total_m)
    }
}

/// What processing one event produced.
#[derive(Debug, Clone, Default)]
pub struct EventOutcome {
    /// Rising-edge trend detection, already packaged as an alert.
    pub trend_alert: Option<Alert>,
    /// Event arrived out of order and was excluded from state updates.
    pub rejected_non_monotonic: bool,
}

/// All per-drone detection state.
#[derive(Debug, Clone)]
pub struct AnalyticsEngine {
    drone: DroneId,
    window: MetadataWindow,
    matcher: StatefulMatcher,
    odometer: Odometer,
    trend: TrendDetector,
    modes: ModeMachine,
    rejected_events: u64,
}

impl AnalyticsEngine {
    pub fn new(drone: DroneId, config: &AnalyticsConfig, start: Timestamp) -> Self {
        AnalyticsEngine {
            drone,
            window: MetadataWindow::new(config.window_s),
            matcher: StatefulMatcher::new(),
            odometer: Odometer::new(),
            trend: TrendDetector::new(config.cov_min_samples, config.cov_threshold),
            modes: ModeMachine::new(start, config.quiet_period_s),
            rejected_events: 0,
        }
    }

    pub fn drone(&self) -> &DroneId {
        &self.drone
    }

    pub fn mode(&self) -> Mode {
        self.modes.mode()
    }

    pub fn odometer_m(&self) -> f64 {
        self.odometer.total_m()
    }

    pub fn window(&self) -> &MetadataWindow {
        &self.window
    }

    pub fn rejected_events(&self) -> u64 {
        self.rejected_events
    }

    /// Feeds one event into window, odometer and trend state.
    pub fn process_event(&mut self, e: &TelemetryEvent) -> EventOutcome {
        let mut outcome = EventOutcome::default();
        if self.odometer.advance(e).is_err() {
            self.rejected_events += 1;
            outcome.rejected_non_monotonic = true;
            return outcome;
        }
        self.window.insert(MetaRecord::from_event(e));
        if let Some(interval) = e.numeric_token("interval_s") {
            if let Some(d) = self.trend.push_interval(e.timestamp, interval) {
                outcome.trend_alert = Some(Alert {
                    emitted: e.timestamp,
                    drone: self.drone.clone(),
                    rule: INTERVAL_CONSTANCY_RULE.to_string(),
                    level: ActionLevel::Emergency,
                    count: d.sample_count as u64,
                    first: d.first,
                    last: d.last,
                    detail: format!("cov={:.6}", d.cov),
                });
            }
        }
        outcome
    }

    /// Feeds rule matches for one event, completing stateful signatures.
    pub fn process_matches(&mut self, matches: &[RuleMatch], now: Timestamp) -> Vec<Alert> {
        let odometer = self.odometer.total_m();
        matches
            .iter()
            .filter_map(|m| {
                self.matcher.ingest_match(m, now, odometer).map(|t| Alert {
                    emitted: now,
                    drone: self.drone.clone(),
                    rule: m.rule.clone(),
                    level: m.level,
                    count: t.count,
                    first: t.first,
                    last: t.last,
                    detail: t.detail,
                })
            })
            .collect()
    }

    /// Advances the mode machine one step.
    pub fn step_mode(
        &mut self,
        alerts: &[Alert],
        swarm_notices: usize,
        now: Timestamp,
    ) -> Option<ModeTransition> {
        let mut inputs: Vec<ModeInput<'_>> =
            alerts.iter().map(|a| ModeInput::Alert(a.level, a.rule.as_str())).collect();
        for _ in 0..swarm_notices {
            inputs.push(ModeInput::SwarmNotice);
        }
        self.modes.step(&inputs, now)
    }
}
