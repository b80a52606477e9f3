//! Response policy: maps alerts and mode changes to observable state on the
//! drone. Everything here is modeled as configuration state, not physical
//! action: which GNSS constellation guides the drone, which channel carries
//! data out, whether the AGC is engaged, what the cameras do.
//!
//! The trigger policy lives in [`apply_policy`] alone so alternates can be
//! swapped in and tested against the same state type.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::analytics::{Alert, Mode};
use crate::rules::ActionLevel;
use crate::telemetry::{DroneId, Timestamp};

/// Satellite navigation constellations, in fallback rotation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gnss {
    Gps,
    Galileo,
    BeiDou,
    Irnss,
    Glonass,
}

impl Gnss {
    pub const ROTATION: [Gnss; 5] =
        [Gnss::Gps, Gnss::Galileo, Gnss::BeiDou, Gnss::Irnss, Gnss::Glonass];

    /// Next constellation in the fixed fallback order, wrapping around.
    pub fn next(&self) -> Gnss {
        let i = Gnss::ROTATION.iter().position(|g| g == self).unwrap();
        Gnss::ROTATION[(i + 1) % Gnss::ROTATION.len()]
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Gnss::Gps => "GPS",
            Gnss::Galileo => "GALILEO",
            Gnss::BeiDou => "BEIDOU",
            Gnss::Irnss => "IRNSS",
            Gnss::Glonass => "GLONASS",
        }
    }
}

impl fmt::Display for Gnss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Gnss {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Gnss::ROTATION.iter().copied().find(|g| g.as_str() == s).ok_or(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommChannel {
    Primary,
    ThreeG,
    Sms,
    Wimax,
}

impl CommChannel {
    pub fn as_str(&self) -> &'static str {
        match self {
            CommChannel::Primary => "PRIMARY",
            CommChannel::ThreeG => "3G",
            CommChannel::Sms => "SMS",
            CommChannel::Wimax => "WIMAX",
        }
    }
}

impl fmt::Display for CommChannel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaptureMode {
    TimeLapse,
    ElevatedCapture,
    Streaming,
}

impl CaptureMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            CaptureMode::TimeLapse => "TIME_LAPSE",
            CaptureMode::ElevatedCapture => "ELEVATED_CAPTURE",
            CaptureMode::Streaming => "STREAMING",
        }
    }
}

impl fmt::Display for CaptureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Active countermeasure settings of one drone.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountermeasureState {
    pub active_gnss: Gnss,
    pub comm_channel: CommChannel,
    pub agc_enabled: bool,
    pub capture_mode: CaptureMode,
    /// Continuous audit forwarding is never switched off.
    pub log_forwarding: bool,
}

impl Default for CountermeasureState {
    fn default() -> Self {
        CountermeasureState {
            active_gnss: Gnss::Gps,
            comm_channel: CommChannel::Primary,
            agc_enabled: false,
            capture_mode: CaptureMode::TimeLapse,
            log_forwarding: true,
        }
    }
}

/// One recorded field change.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CmChange {
    pub field: &'static str,
    pub old: String,
    pub new: String,
    pub cause: String,
}

impl CmChange {
    /// `<ts> CM <drone> <field> <old> -> <new> cause=<rule|mode>`
    pub fn to_line(&self, ts: Timestamp, drone: &DroneId) -> String {
        format!("{ts} CM {drone} {} {} -> {} cause={}", self.field, self.old, self.new, self.cause)
    }
}

fn record<T: fmt::Display + PartialEq>(
    changes: &mut Vec<CmChange>,
    field: &'static str,
    old: &T,
    new: &T,
    cause: &str,
) {
    if old != new {
        changes.push(CmChange {
            field,
            old: old.to_string(),
            new: new.to_string(),
            cause: cause.to_string(),
        });
    }
}

/// Pure transition function from (state, alert, mode) to the next state
/// plus the list of changes it made.
///
/// Policy, in order:
/// - `gps_spoof` / `sat_count_anomaly`: rotate the active constellation and
///   engage the AGC;
/// - `lost_link` with a GPS link at Elevated or above: rotate as well;
/// - any Emergency alert: fall back to 3G and stream captures;
/// - mode Monitor / SwarmMonitor: elevated capture;
/// - mode Normal (after de-escalation): restore defaults, forwarding on.
pub fn apply_policy(
    state: &CountermeasureState,
    alert: Option<&Alert>,
    mode: Mode,
) -> (CountermeasureState, Vec<CmChange>) {
    let mut next = state.clone();
    let mut changes = Vec::new();

    if let Some(a) = alert {
        let spoofish = a.rule == "gps_spoof"
            || a.rule == "sat_count_anomaly"
            || a.rule == crate::analytics::INTERVAL_CONSTANCY_RULE;
        let gps_link_lost = a.rule == "lost_link"
            && a.detail.split_whitespace().any(|t| t == "link=GPS")
            && mode.rank() >= Mode::Elevated.rank();

        if spoofish || gps_link_lost {
            let rotated = next.active_gnss.next();
            record(&mut changes, "gnss", &next.active_gnss, &rotated, &a.rule);
            next.active_gnss = rotated;
            if spoofish && !next.agc_enabled {
                record(&mut changes, "agc", &"off", &"on", &a.rule);
                next.agc_enabled = true;
            }
        }

        if a.level == ActionLevel::Emergency {
            record(&mut changes, "comm", &next.comm_channel, &CommChannel::ThreeG, &a.rule);
            next.comm_channel = CommChannel::ThreeG;
            record(&mut changes, "capture", &next.capture_mode, &CaptureMode::Streaming, &a.rule);
            next.capture_mode = CaptureMode::Streaming;
        }
    }

    match mode {
        Mode::Monitor | Mode::SwarmMonitor => {
            let cause = format!("mode={mode}");
            record(&mut changes, "capture", &next.capture_mode, &CaptureMode::ElevatedCapture, &cause);
            next.capture_mode = CaptureMode::ElevatedCapture;
        }
        Mode::Normal => {
            let defaults = CountermeasureState::default();
            let cause = "mode=Normal";
            record(&mut changes, "gnss", &next.active_gnss, &defaults.active_gnss, cause);
            record(&mut changes, "comm", &next.comm_channel, &defaults.comm_channel, cause);
            if next.agc_enabled {
                record(&mut changes, "agc", &"on", &"off", cause);
            }
            record(&mut changes, "capture", &next.capture_mode, &defaults.capture_mode, cause);
            next = CountermeasureState { log_forwarding: next.log_forwarding, ..defaults };
        }
        _ => {}
    }

    (next, changes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GnssBand {
    L1,
    L2,
    L5,
}

impl GnssBand {
    pub fn as_str(&self) -> &'static str {
        match self {
            GnssBand::L1 => "L1",
            GnssBand::L2 => "L2",
            GnssBand::L5 => "L5",
        }
    }
}

impl fmt::Display for GnssBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GnssBand {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "L1" => Ok(GnssBand::L1),
            "L2" => Ok(GnssBand::L2),
            "L5" => Ok(GnssBand::L5),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CmError {
    #[error("no band table entry for {constellation} {band}")]
    UnknownBand { constellation: Gnss, band: GnssBand },
}

/// Shipped carrier table.
const GNSS_BANDS: [(Gnss, GnssBand, f64); 4] = [
    (Gnss::Gps, GnssBand::L1, 1575.42),
    (Gnss::Glonass, GnssBand::L1, 1602.0),
    (Gnss::Gps, GnssBand::L2, 1227.6),
    (Gnss::Glonass, GnssBand::L2, 1246.0),
];

/// Center frequency in MHz for a constellation/band pair.
pub fn gnss_band_lookup(constellation: Gnss, band: GnssBand) -> Result<f64, CmError> {
    GNSS_BANDS
        .iter()
        .find(|(g, b, _)| *g == constellation && *b == band)
        .map(|(_, _, mhz)| *mhz)
        .ok_or(CmError::UnknownBand { constellation, band })
}
