//! Simulated fleet fabric: group-alert propagation, continuous audit-log
//! forwarding and rogue-emitter localization.
//!
//! Drones are independent actors exchanging messages over a planar
//! topology; the simulation advances in deterministic rounds. A drone's
//! link models its radio as a whole: a downed link neither receives
//! broadcasts nor forwards logs.

mod locate;

pub use locate::{
    bearing_locate, tdoa_locate, BearingObs, EmitterEstimate, LocateError, LocateMethod,
    PlanarPoint, TimingObs, SPEED_OF_LIGHT_M_S,
};

use std::collections::BTreeMap;

use thiserror::Error;

use crate::analytics::Alert;
use crate::rules::ActionLevel;
use crate::telemetry::{DroneId, Timestamp};

/// Inter-drone message envelope.
#[derive(Debug, Clone, PartialEq)]
pub struct SwarmMessage {
    pub sender: DroneId,
    pub sent_at: Timestamp,
    pub payload: SwarmPayload,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SwarmPayload {
    /// A Group-level alert propagated to nearby drones.
    GroupAlert(Alert),
    /// An Emergency-level call for assistance.
    AssistRequest(Alert),
    /// Forwarded telemetry log lines.
    LogBatch(Vec<String>),
    /// A localization observation contributed during an assist.
    TriangObs(TriangObs),
}

impl SwarmPayload {
    /// Whether receiving this message escalates the receiver's mode.
    pub fn is_escalating(&self) -> bool {
        matches!(self, SwarmPayload::GroupAlert(_) | SwarmPayload::AssistRequest(_))
    }
}

/// One localization observation: either a synchronized arrival time or a
/// bearing, with the receiver position it was taken from.
#[derive(Debug, Clone, PartialEq)]
pub enum TriangObs {
    Timing(TimingObs),
    Bearing(BearingObs),
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct LinkState {
    down_at: Option<u64>,
    latency_rounds: u32,
}

impl Default for LinkState {
    fn default() -> Self {
        LinkState { down_at: None, latency_rounds: 1 }
    }
}

/// Fleet layout for the simulation: planar drone positions, a neighbor
/// radius and per-drone link schedules.
#[derive(Debug, Clone)]
pub struct FleetTopology {
    drones: Vec<(DroneId, PlanarPoint)>,
    radius_m: f64,
    links: BTreeMap<DroneId, LinkState>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TopologyError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("duplicate drone `{0}`")]
    DuplicateDrone(String),
    #[error("radius must be positive")]
    BadRadius,
    #[error("unknown drone `{0}`")]
    UnknownDrone(String),
}

impl FleetTopology {
    pub fn new(radius_m: f64) -> Result<Self, TopologyError> {
        if !radius_m.is_finite() || radius_m <= 0.0 {
            return Err(TopologyError::BadRadius);
        }
        Ok(FleetTopology { drones: Vec::new(), radius_m, links: BTreeMap::new() })
    }

    /// Parses the topology file format:
    /// `DRONE <id> <x_m> <y_m>` | `RADIUS <m>` | `LINK <id> DOWN_AT <tick>`.
    pub fn parse(text: &str) -> Result<Self, TopologyError> {
        let mut topo = FleetTopology { drones: Vec::new(), radius_m: 0.0, links: BTreeMap::new() };
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let n = idx + 1;
            let toks: Vec<&str> = line.split_whitespace().collect();
            let perr = |message: String| TopologyError::Parse { line: n, message };
            match toks[0] {
                "DRONE" if toks.len() == 4 => {
                    let id: DroneId = toks[1]
                        .parse()
                        .map_err(|_| perr(format!("bad drone id `{}`", toks[1])))?;
                    let x: f64 =
                        toks[2].parse().map_err(|_| perr(format!("bad x `{}`", toks[2])))?;
                    let y: f64 =
                        toks[3].parse().map_err(|_| perr(format!("bad y `{}`", toks[3])))?;
                    topo.add_drone(id, PlanarPoint::new(x, y))?;
                }
                "RADIUS" if toks.len() == 2 => {
                    topo.radius_m =
                        toks[1].parse().map_err(|_| perr(format!("bad radius `{}`", toks[1])))?;
                }
                "LINK" if toks.len() == 4 && toks[2] == "DOWN_AT" => {
                    let id: DroneId = toks[1]
                        .parse()
                        .map_err(|_| perr(format!("bad drone id `{}`", toks[1])))?;
                    let tick: u64 =
                        toks[3].parse().map_err(|_| perr(format!("bad tick `{}`", toks[3])))?;
                    topo.set_link_down_at(&id, tick)?;
                }
                _ => return Err(perr(format!("unrecognized line `{line}`"))),
            }
        }
        if !topo.radius_m.is_finite() || topo.radius_m <= 0.0 {
            return Err(TopologyError::BadRadius);
        }
        Ok(topo)
    }

    pub fn add_drone(&mut self, id: DroneId, pos: PlanarPoint) -> Result<(), TopologyError> {
        if self.drones.iter().any(|(d, _)| *d == id) {
            return Err(TopologyError::DuplicateDrone(id.to_string()));
        }
        self.links.insert(id.clone(), LinkState::default());
        self.drones.push((id, pos));
        Ok(())
    }

    pub fn set_link_down_at(&mut self, id: &DroneId, tick: u64) -> Result<(), TopologyError> {
        match self.links.get_mut(id) {
            Some(l) => {
                l.down_at = Some(tick);
                Ok(())
            }
            None => Err(TopologyError::UnknownDrone(id.to_string())),
        }
    }

    pub fn set_link_latency(&mut self, id: &DroneId, rounds: u32) -> Result<(), TopologyError> {
        match self.links.get_mut(id) {
            Some(l) => {
                l.latency_rounds = rounds.max(1);
                Ok(())
            }
            None => Err(TopologyError::UnknownDrone(id.to_string())),
        }
    }

    pub fn set_position(&mut self, id: &DroneId, pos: PlanarPoint) -> Result<(), TopologyError> {
        match self.drones.iter_mut().find(|(d, _)| d == id) {
            Some((_, p)) => {
                *p = pos;
                Ok(())
            }
            None => Err(TopologyError::UnknownDrone(id.to_string())),
        }
    }

    pub fn position(&self, id: &DroneId) -> Option<PlanarPoint> {
        self.drones.iter().find(|(d, _)| d == id).map(|(_, p)| *p)
    }

    pub fn radius_m(&self) -> f64 {
        self.radius_m
    }

    /// Drones in declaration order.
    pub fn drones(&self) -> impl Iterator<Item = &DroneId> {
        self.drones.iter().map(|(d, _)| d)
    }

    pub fn link_up(&self, id: &DroneId, tick: u64) -> bool {
        match self.links.get(id) {
            Some(l) => l.down_at.is_none_or(|down| tick < down),
            None => false,
        }
    }

    pub fn link_latency(&self, id: &DroneId) -> u32 {
        self.links.get(id).map(|l| l.latency_rounds).unwrap_or(1)
    }
}

/// One scheduled delivery from a broadcast.
#[derive(Debug, Clone, PartialEq)]
pub struct Delivery {
    pub receiver: DroneId,
    /// Rounds after the send tick at which the message arrives.
    pub rounds: u32,
}

/// Outcome of one group broadcast.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DeliveryReport {
    pub deliveries: Vec<Delivery>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SwarmError {
    #[error("alert level {0} does not involve nearby drones")]
    LevelBelowGroup(ActionLevel),
    #[error("origin drone `{0}` is not in the topology")]
    UnknownOrigin(String),
}

/// Propagates a Group- or Emergency-level alert from `origin` to every
/// drone within the neighbor radius whose link is up at `tick`. Down links
/// simply omit delivery; a downed origin reaches nobody.
pub fn broadcast_group(
    topology: &FleetTopology,
    origin: &DroneId,
    alert: &Alert,
    tick: u64,
) -> Result<DeliveryReport, SwarmError> {
    if alert.level < ActionLevel::Group {
        return Err(SwarmError::LevelBelowGroup(alert.level));
    }
    let origin_pos = topology
        .position(origin)
        .ok_or_else(|| SwarmError::UnknownOrigin(origin.to_string()))?;

    let mut report = DeliveryReport::default();
    if !topology.link_up(origin, tick) {
        return Ok(report);
    }
    for (id, pos) in &topology.drones {
        if id == origin {
            continue;
        }
        if origin_pos.distance(*pos) <= topology.radius_m && topology.link_up(id, tick) {
            report
                .deliveries
                .push(Delivery { receiver: id.clone(), rounds: topology.link_latency(id) });
        }
    }
    Ok(report)
}

/// Central append-only store of forwarded log lines, with a per-drone
/// high-water mark into each drone's local log.
#[derive(Debug, Clone, Default)]
pub struct AuditRepository {
    entries: Vec<(DroneId, String)>,
    hwm: BTreeMap<DroneId, usize>,
}

impl AuditRepository {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn high_water_mark(&self, drone: &DroneId) -> usize {
        self.hwm.get(drone).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Lines received from one drone, in arrival order.
    pub fn lines_for(&self, drone: &DroneId) -> Vec<&str> {
        self.entries.iter().filter(|(d, _)| d == drone).map(|(_, l)| l.as_str()).collect()
    }

    /// Full dump, one `<drone_id> <log line>` per line, arrival order.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (d, l) in &self.entries {
            out.push_str(d.as_str());
            out.push(' ');
            out.push_str(l);
            out.push('\n');
        }
        out
    }
}

/// Forwards every log line past the repository's high-water mark for
/// `drone`. While the link is down the lines simply stay buffered in the
/// local log; once the drone is destroyed, whatever was forwarded is all
/// the repository will ever hold.
///
/// Returns the updated high-water mark.
pub fn forward_logs(
    repo: &mut AuditRepository,
    drone: &DroneId,
    local_log: &[String],
    link_up: bool,
) -> usize {
    let hwm = repo.high_water_mark(drone);
    if !link_up {
        return hwm;
    }
    for line in &local_log[hwm.min(local_log.len())..] {
        repo.entries.push((drone.clone(), line.clone()));
    }
    let new_hwm = local_log.len().max(hwm);
    repo.hwm.insert(drone.clone(), new_hwm);
    new_hwm
}
