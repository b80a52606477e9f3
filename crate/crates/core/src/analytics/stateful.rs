//! Stateful signature completion: REPEAT accumulations gated on distance
//! covered, RATE accumulations gated on a time window with burst cooldown.

use std::collections::BTreeMap;

use crate::rules::{RuleMatch, StatefulSpec};
use crate::telemetry::Timestamp;

/// Per-rule pending accumulation.
#[derive(Debug, Clone)]
enum PendingState {
    Repeat { entries: Vec<(Timestamp, f64)> },
    Rate { times: Vec<Timestamp>, cooldown_until: Option<Timestamp> },
}

/// What a completed stateful (or pass-through stateless) match contributes
/// to an alert.
#[derive(Debug, Clone, PartialEq)]
pub struct Trigger {
    pub count: u64,
    pub first: Timestamp,
    pub last: Timestamp,
    pub detail: String,
}

/// Tracks pending per-rule state across the match stream of one drone.
#[derive(Debug, Clone, Default)]
pub struct StatefulMatcher {
    states: BTreeMap<String, PendingState>,
}

impl StatefulMatcher {
    pub fn new() -> Self {
        Self::default()
    }

    /// Feeds one rule match. Stateless rules trigger immediately; REPEAT
    /// rules trigger once enough matches span enough odometer distance and
    /// then reset; RATE rules trigger when more than `count` matches fall
    /// within the window, then ignore the rest of the burst for one window.
    pub fn ingest_match(
        &mut self,
        m: &RuleMatch,
        now: Timestamp,
        odometer_m: f64,
    ) -> Option<Trigger> {
        match m.stateful {
            None => {
                let detail = m
                    .event
                    .additional
                    .iter()
                    .map(|t| t.to_string())
                    .collect::<Vec<_>>()
                    .join(" ");
                Some(Trigger { count: 1, first: m.ts, last: m.ts, detail })
            }
            Some(StatefulSpec::Repeat { count, min_distance_m }) => {
                let state = self
                    .states
                    .entry(m.rule.clone())
                    .or_insert_with(|| PendingState::Repeat { entries: Vec::new() });
                let PendingState::Repeat { entries } = state else {
                    return None;
                };
                entries.push((m.ts, odometer_m));
                let span = entries.last().unwrap().1 - entries.first().unwrap().1;
                if entries.len() >= count as usize && span >= min_distance_m {
                    let trigger = Trigger {
                        count: entries.len() as u64,
                        first: entries.first().unwrap().0,
                        last: entries.last().unwrap().0,
                        detail: format!("span_m={}", crate::telemetry::fmt_num(span)),
                    };
                    entries.clear();
                    Some(trigger)
                } else {
                    None
                }
            }
            Some(StatefulSpec::Rate { count, window_s }) => {
                let state = self.states.entry(m.rule.clone()).or_insert_with(|| {
                    PendingState::Rate { times: Vec::new(), cooldown_until: None }
                });
                let PendingState::Rate { times, cooldown_until } = state else {
                    return None;
                };
                if let Some(until) = *cooldown_until {
                    if now < until {
                        return None;
                    }
                    *cooldown_until = None;
                }
                times.push(m.ts);
                // Window covers `window_s` distinct seconds ending at the
                // newest match.
                let newest = *times.last().unwrap();
                times.retain(|t| newest.seconds_since(*t) < window_s as i64);
                if times.len() as u64 > count as u64 {
                    let trigger = Trigger {
                        count: times.len() as u64,
                        first: *times.first().unwrap(),
                        last: newest,
                        detail: format!("window_s={window_s}"),
                    };
                    times.clear();
                    *cooldown_until = Some(now.plus_seconds(window_s as u64));
                    Some(trigger)
                } else {
                    None
                }
            }
        }
    }
}
