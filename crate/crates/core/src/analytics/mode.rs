//! Operating-mode state machine: graduated escalation on alerts and swarm
//! inputs, single-rank de-escalation after quiet periods.

use std::fmt;
use std::str::FromStr;

use crate::rules::ActionLevel;
use crate::telemetry::Timestamp;

/// Drone operation sensing modes. Solo modes order Normal < Monitor <
/// Elevated < Evasive; the swarm overlays rank with their solo
/// counterparts (SwarmMonitor with Monitor, SwarmElevated with Elevated).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Normal,
    Monitor,
    SwarmMonitor,
    Elevated,
    SwarmElevated,
    Evasive,
}

impl Mode {
    pub const ALL: [Mode; 6] = [
        Mode::Normal,
        Mode::Monitor,
        Mode::SwarmMonitor,
        Mode::Elevated,
        Mode::SwarmElevated,
        Mode::Evasive,
    ];

    /// Escalation rank; swarm overlays share the rank of their solo twin.
    pub fn rank(&self) -> u8 {
        match self {
            Mode::Normal => 0,
            Mode::Monitor | Mode::SwarmMonitor => 1,
            Mode::Elevated | Mode::SwarmElevated => 2,
            Mode::Evasive => 3,
        }
    }

    pub fn is_swarm(&self) -> bool {
        matches!(self, Mode::SwarmMonitor | Mode::SwarmElevated)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Normal => "Normal",
            Mode::Monitor => "Monitor",
            Mode::SwarmMonitor => "SwarmMonitor",
            Mode::Elevated => "Elevated",
            Mode::SwarmElevated => "SwarmElevated",
            Mode::Evasive => "Evasive",
        }
    }

    /// One rank down. Swarm overlays fall within the overlay first, then to
    /// Normal.
    pub fn step_down(&self) -> Mode {
        match self {
            Mode::Evasive => Mode::Elevated,
            Mode::SwarmElevated => Mode::SwarmMonitor,
            Mode::Elevated => Mode::Monitor,
            Mode::SwarmMonitor | Mode::Monitor => Mode::Normal,
            Mode::Normal => Mode::Normal,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Mode::ALL.iter().copied().find(|m| m.as_str() == s).ok_or(())
    }
}

/// One observed mode change.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeTransition {
    pub ts: Timestamp,
    pub from: Mode,
    pub to: Mode,
    pub cause: String,
}

impl ModeTransition {
    pub fn to_line(&self, drone: &crate::telemetry::DroneId) -> String {
        format!("{} MODE {} {} -> {} cause={}", self.ts, drone, self.from, self.to, self.cause)
    }
}

/// Inputs that drive escalation in one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeInput<'a> {
    /// A locally raised alert at the given level, labelled by rule name.
    Alert(ActionLevel, &'a str),
    /// A group or assistance message received from a peer.
    SwarmNotice,
}

impl ModeInput<'_> {
    /// Mode this input demands given the current mode.
    fn target(&self, current: Mode) -> Mode {
        match self {
            ModeInput::Alert(ActionLevel::Info, _) => Mode::Monitor,
            ModeInput::Alert(ActionLevel::Elevated, _) => Mode::Elevated,
            // A locally raised Group alert elevates the local drone too; the
            // swarm effect travels by broadcast.
            ModeInput::Alert(ActionLevel::Group, _) => Mode::Elevated,
            ModeInput::Alert(ActionLevel::Emergency, _) => Mode::Evasive,
            ModeInput::SwarmNotice => {
                if current.rank() >= Mode::Elevated.rank() {
                    Mode::SwarmElevated
                } else {
                    Mode::SwarmMonitor
                }
            }
        }
    }

    fn label(&self) -> String {
        match self {
            ModeInput::Alert(_, rule) => rule.to_string(),
            ModeInput::SwarmNotice => "swarm".to_string(),
        }
    }
}

/// Per-drone mode machine.
///
/// Escalation happens in the same step as its cause. De-escalation steps
/// down exactly one rank after `quiet_period_s` without any input at or
/// above the current rank; repeated quiet periods step further.
#[derive(Debug, Clone)]
pub struct ModeMachine {
    mode: Mode,
    quiet_period_s: u64,
    last_sustain: Timestamp,
}

impl ModeMachine {
    pub const DEFAULT_QUIET_PERIOD_S: u64 = 300;

    pub fn new(start: Timestamp, quiet_period_s: u64) -> Self {
        ModeMachine { mode: Mode::Normal, quiet_period_s, last_sustain: start }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Advances the machine by one step at `now`, applying every input.
    /// Returns the transition if the mode changed.
    pub fn step(&mut self, inputs: &[ModeInput<'_>], now: Timestamp) -> Option<ModeTransition> {
        let from = self.mode;
        let mut cause = None;

        for input in inputs {
            let target = input.target(self.mode);
            // Inputs at or above the current rank re-arm the quiet timer.
            if target.rank() >= self.mode.rank() {
                self.last_sustain = now;
            }
            let next = escalate(self.mode, target);
            if next != self.mode {
                self.mode = next;
                cause = Some(input.label());
            }
        }

        if cause.is_none()
            && self.mode != Mode::Normal
            && now.seconds_since(self.last_sustain) >= self.quiet_period_s as i64
        {
            self.mode = self.mode.step_down();
            self.last_sustain = now;
            cause = Some("quiet_period".to_string());
        }

        (self.mode != from).then(|| ModeTransition { ts: now, from, to: self.mode, cause: cause.unwrap_or_default() })
    }
}

/// Raises `current` toward `target`. Higher rank wins; on equal rank the
/// swarm overlay wins (a notice adds fleet context without losing rank).
fn escalate(current: Mode, target: Mode) -> Mode {
    let overlay_wins =
        target.rank() == current.rank() && target.is_swarm() && !current.is_swarm();
    if target.rank() > current.rank() || overlay_wins {
        target
    } else {
        current
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ts(secs: i64) -> Timestamp {
        Timestamp::from_epoch_seconds(secs).unwrap()
    }

    fn machine() -> ModeMachine {
        ModeMachine::new(ts(0), 300)
    }

    #[test]
    fn emergency_alert_forces_evasive() {
        let mut m = machine();
        let tr = m.step(&[ModeInput::Alert(ActionLevel::Emergency, "gps_spoof")], ts(1)).unwrap();
        assert_eq!(tr.from, Mode::Normal);
        assert_eq!(tr.to, Mode::Evasive);
        assert_eq!(tr.cause, "gps_spoof");
    }

    #[test]
    fn info_alert_raises_to_monitor_only() {
        let mut m = machine();
        m.step(&[ModeInput::Alert(ActionLevel::Info, "lost_link")], ts(1));
        assert_eq!(m.mode(), Mode::Monitor);
        m.step(&[ModeInput::Alert(ActionLevel::Info, "lost_link")], ts(2));
        assert_eq!(m.mode(), Mode::Monitor);
    }

    #[test]
    fn group_alert_elevates_locally() {
        let mut m = machine();
        m.step(&[ModeInput::Alert(ActionLevel::Group, "ddos")], ts(1));
        assert_eq!(m.mode(), Mode::Elevated);
    }

    #[test]
    fn swarm_notice_from_normal_enters_swarm_monitor() {
        let mut m = machine();
        m.step(&[ModeInput::SwarmNotice], ts(1));
        assert_eq!(m.mode(), Mode::SwarmMonitor);
    }

    #[test]
    fn swarm_notice_at_elevated_enters_swarm_elevated() {
        let mut m = machine();
        m.step(&[ModeInput::Alert(ActionLevel::Elevated, "wifi_deauth")], ts(1));
        m.step(&[ModeInput::SwarmNotice], ts(2));
        assert_eq!(m.mode(), Mode::SwarmElevated);
    }

    #[test]
    fn swarm_notice_never_downgrades_evasive() {
        let mut m = machine();
        m.step(&[ModeInput::Alert(ActionLevel::Emergency, "gps_spoof")], ts(1));
        m.step(&[ModeInput::SwarmNotice], ts(2));
        assert_eq!(m.mode(), Mode::Evasive);
    }

    #[test]
    fn quiet_period_steps_down_one_rank() {
        let mut m = machine();
        m.step(&[ModeInput::Alert(ActionLevel::Info, "lost_link")], ts(0));
        assert_eq!(m.mode(), Mode::Monitor);
        // Simulated clock: step once per second with no input.
        for t in 1..300 {
            assert_eq!(m.step(&[], ts(t)), None);
            assert_eq!(m.mode(), Mode::Monitor);
        }
        let tr = m.step(&[], ts(300)).unwrap();
        assert_eq!(tr.to, Mode::Normal);
        assert_eq!(tr.cause, "quiet_period");
    }

    #[test]
    fn repeated_quiet_periods_step_further() {
        let mut m = machine();
        m.step(&[ModeInput::Alert(ActionLevel::Emergency, "gps_spoof")], ts(0));
        m.step(&[], ts(300));
        assert_eq!(m.mode(), Mode::Elevated);
        m.step(&[], ts(600));
        assert_eq!(m.mode(), Mode::Monitor);
        m.step(&[], ts(900));
        assert_eq!(m.mode(), Mode::Normal);
        assert_eq!(m.step(&[], ts(1200)), None);
    }

    #[test]
    fn lower_level_inputs_do_not_sustain_higher_mode() {
        let mut m = machine();
        m.step(&[ModeInput::Alert(ActionLevel::Emergency, "gps_spoof")], ts(0));
        // Elevated alerts keep arriving but rank below Evasive.
        for t in 1..300 {
            m.step(&[ModeInput::Alert(ActionLevel::Elevated, "wifi_deauth")], ts(t));
        }
        m.step(&[], ts(300));
        assert_eq!(m.mode(), Mode::Elevated);
        // Now the Elevated alerts sustain Elevated.
        m.step(&[ModeInput::Alert(ActionLevel::Elevated, "wifi_deauth")], ts(301));
        m.step(&[], ts(600));
        assert_eq!(m.mode(), Mode::Elevated);
    }

    #[test]
    fn swarm_elevated_decays_through_swarm_monitor() {
        let mut m = machine();
        m.step(&[ModeInput::Alert(ActionLevel::Elevated, "x")], ts(0));
        m.step(&[ModeInput::SwarmNotice], ts(1));
        assert_eq!(m.mode(), Mode::SwarmElevated);
        m.step(&[], ts(301));
        assert_eq!(m.mode(), Mode::SwarmMonitor);
        m.step(&[], ts(601));
        assert_eq!(m.mode(), Mode::Normal);
    }

    #[test]
    fn mode_ranks_follow_table_order() {
        assert!(Mode::Normal.rank() < Mode::Monitor.rank());
        assert!(Mode::Monitor.rank() < Mode::Elevated.rank());
        assert!(Mode::Elevated.rank() < Mode::Evasive.rank());
        assert_eq!(Mode::Monitor.rank(), Mode::SwarmMonitor.rank());
        assert_eq!(Mode::Elevated.rank(), Mode::SwarmElevated.rank());
        assert_eq!(Mode::ALL.len(), 6);
    }
}
