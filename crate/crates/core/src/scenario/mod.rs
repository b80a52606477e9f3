//! Deterministic attack scenarios: the scenario file format, the seeded
//! generator behind it and the end-to-end pipeline runner.
//!
//! A scenario fixes a fleet, a flight plan and a list of attack intervals.
//! Everything downstream of the seed is reproducible bit for bit: the raw
//! record streams, the event logs, the alerts, the audit repository and the
//! run report.

mod generate;
mod run;

pub use generate::{generate, Generated};
pub use run::{
    check_expectations, simulate, write_generate_dir, write_run_dir, Detection, RunError,
    RunReport, SimResult, TriangulationReport,
};

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::swarm::{LocateMethod, PlanarPoint};
use crate::telemetry::{DroneId, GeoPoint, KeyValue, Timestamp};

/// Multiplicative congruential generator over the Mersenne prime modulus
/// 2^31 - 1 with multiplier 48271. Chosen so any language's integer
/// arithmetic reproduces the stream exactly; the parameters are quoted in
/// the shipped scenario file headers.
#[derive(Debug, Clone)]
pub struct Lcg {
    state: u64,
}

impl Lcg {
    pub const MODULUS: u64 = 2_147_483_647;
    pub const MULTIPLIER: u64 = 48_271;

    pub fn new(seed: u64) -> Self {
        let state = seed % Self::MODULUS;
        Lcg { state: if state == 0 { 1 } else { state } }
    }

    pub fn next_u31(&mut self) -> u32 {
        self.state = self.state * Self::MULTIPLIER % Self::MODULUS;
        self.state as u32
    }

    /// Uniform in (0, 1).
    pub fn next_f64(&mut self) -> f64 {
        self.next_u31() as f64 / Self::MODULUS as f64
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in `[0, n)`.
    pub fn below(&mut self, n: u32) -> u32 {
        self.next_u31() % n.max(1)
    }
}

/// Attack vectors the generator can stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttackKind {
    GpsJam,
    GpsSpoof,
    WifiDeauth,
    Ddos,
    /// Placeholder interval that stages nothing.
    None,
}

impl AttackKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            AttackKind::GpsJam => "GPS_JAM",
            AttackKind::GpsSpoof => "GPS_SPOOF",
            AttackKind::WifiDeauth => "WIFI_DEAUTH",
            AttackKind::Ddos => "DDOS",
            AttackKind::None => "NONE",
        }
    }
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AttackKind {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "GPS_JAM" => Ok(AttackKind::GpsJam),
            "GPS_SPOOF" => Ok(AttackKind::GpsSpoof),
            "WIFI_DEAUTH" => Ok(AttackKind::WifiDeauth),
            "DDOS" => Ok(AttackKind::Ddos),
            "NONE" => Ok(AttackKind::None),
            _ => Err(()),
        }
    }
}

/// One staged attack: `[start_s, end_s)` against one drone.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackInterval {
    pub kind: AttackKind,
    pub start_s: u64,
    pub end_s: u64,
    pub drone: DroneId,
    pub params: Vec<KeyValue>,
}

impl AttackInterval {
    pub fn contains(&self, tick: u64) -> bool {
        (self.start_s..self.end_s).contains(&tick)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DroneSpec {
    pub id: DroneId,
    pub start_pos: PlanarPoint,
}

/// Piecewise-constant flight segment, effective from `start_s` until the
/// next segment for the same drone.
#[derive(Debug, Clone, PartialEq)]
pub struct FlightSegment {
    pub drone: DroneId,
    pub start_s: u64,
    pub speed_kmh: f64,
    pub heading_deg: f64,
}

/// Parsed scenario: everything the generator and runner need.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub name: String,
    pub seed: u64,
    pub duration_s: u64,
    pub start: Timestamp,
    pub origin_lat: f64,
    pub origin_lon: f64,
    pub altitude_m: f64,
    pub radius_m: f64,
    pub drones: Vec<DroneSpec>,
    pub flights: Vec<FlightSegment>,
    pub attacks: Vec<AttackInterval>,
    pub emitter: Option<PlanarPoint>,
    pub links_down: Vec<(DroneId, u64)>,
    pub destroys: Vec<(DroneId, u64)>,
    pub triang_method: LocateMethod,
    pub triang_noise_ns: f64,
    pub triang_noise_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid scenario: {0}")]
    InvalidSpec(String),
}

impl ScenarioSpec {
    pub fn drone_index(&self, id: &DroneId) -> Option<usize> {
        self.drones.iter().position(|d| d.id == *id)
    }

    pub fn destroyed_at(&self, id: &DroneId) -> Option<u64> {
        self.destroys.iter().find(|(d, _)| d == id).map(|(_, t)| *t)
    }

    pub fn tick_timestamp(&self, tick: u64) -> Timestamp {
        self.start.plus_seconds(tick)
    }

    fn validate(self) -> Result<Self, ScenarioError> {
        let inv = |m: String| Err(ScenarioError::InvalidSpec(m));
        if self.name.is_empty() {
            return inv("missing `name`".into());
        }
        if self.duration_s == 0 {
            return inv("duration_s must be positive".into());
        }
        if self.drones.is_empty() {
            return inv("at least one DRONE line required".into());
        }
        if !self.radius_m.is_finite() || self.radius_m <= 0.0 {
            return inv("radius_m must be positive".into());
        }
        for a in &self.attacks {
            if a.end_s < a.start_s || a.end_s > self.duration_s {
                return inv(format!(
                    "attack {} interval {}..{} outside 0..{}",
                    a.kind, a.start_s, a.end_s, self.duration_s
                ));
            }
            if self.drone_index(&a.drone).is_none() {
                return inv(format!("attack targets unknown drone `{}`", a.drone));
            }
        }
        for f in &self.flights {
            if self.drone_index(&f.drone).is_none() {
                return inv(format!("flight plan for unknown drone `{}`", f.drone));
            }
            if !(0.0..360.0).contains(&f.heading_deg) || f.speed_kmh < 0.0 {
                return inv(format!("bad flight segment for `{}`", f.drone));
            }
        }
        for (d, _) in self.links_down.iter().chain(self.destroys.iter()) {
            if self.drone_index(d).is_none() {
                return inv(format!("unknown drone `{d}`"));
            }
        }
        Ok(self)
    }
}

/// Parses the scenario file: lowercase `key value` scalars plus structured
/// uppercase lines (`DRONE`, `FLIGHT`, `ATTACK`, `EMITTER`, `LINK`,
/// `DESTROY`). `#` comments the rest of a line.
pub fn parse_scenario(text: &str) -> Result<ScenarioSpec, ScenarioError> {
    let mut spec = ScenarioSpec {
        name: String::new(),
        seed: 1,
        duration_s: 0,
        start: "2020-03-01T19:40:08Z".parse().unwrap(),
        origin_lat: 39.0,
        origin_lon: -76.8,
        altitude_m: 100.0,
        radius_m: 1000.0,
        drones: Vec::new(),
        flights: Vec::new(),
        attacks: Vec::new(),
        emitter: None,
        links_down: Vec::new(),
        destroys: Vec::new(),
        triang_method: LocateMethod::Tdoa,
        triang_noise_ns: 0.0,
        triang_noise_deg: 0.0,
    };

    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let n = idx + 1;
        let perr = |message: String| ScenarioError::Parse { line: n, message };
        let toks: Vec<&str> = line.split_whitespace().collect();

        let f64_tok = |t: &str| -> Result<f64, ScenarioError> {
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| perr(format!("bad number `{t}`")))
        };
        let u64_tok = |t: &str| -> Result<u64, ScenarioError> {
            t.parse::<u64>().map_err(|_| perr(format!("bad integer `{t}`")))
        };
        let id_tok = |t: &str| -> Result<DroneId, ScenarioError> {
            t.parse::<DroneId>().map_err(|_| perr(format!("bad drone id `{t}`")))
        };

        match toks[0] {
            "DRONE" if toks.len() == 4 => {
                let id = id_tok(toks[1])?;
                if spec.drones.iter().any(|d| d.id == id) {
                    return Err(perr(format!("duplicate drone `{id}`")));
                }
                let pos = PlanarPoint::new(f64_tok(toks[2])?, f64_tok(toks[3])?);
                spec.drones.push(DroneSpec { id, start_pos: pos });
            }
            "FLIGHT" if toks.len() == 5 => {
                spec.flights.push(FlightSegment {
                    drone: id_tok(toks[1])?,
                    start_s: u64_tok(toks[2])?,
                    speed_kmh: f64_tok(toks[3])?,
                    heading_deg: f64_tok(toks[4])?,
                });
            }
            "ATTACK" if toks.len() >= 4 => {
                let kind: AttackKind = toks[1]
                    .parse()
                    .map_err(|_| perr(format!("unknown attack kind `{}`", toks[1])))?;
                let start_s = u64_tok(toks[2])?;
                let end_s = u64_tok(toks[3])?;
                let mut drone = None;
                let mut params = Vec::new();
                for t in &toks[4..] {
                    let kvp = KeyValue::from_token(t)
                        .map_err(|_| perr(format!("bad attack parameter `{t}`")))?;
                    if kvp.key == "drone" {
                        drone = Some(id_tok(&kvp.value)?);
                    } else {
                        params.push(kvp);
                    }
                }
                let drone = match drone {
                    Some(d) => d,
                    None => {
                        spec.drones
                            .first()
                            .ok_or_else(|| perr("ATTACK before any DRONE".into()))?
                            .id
                            .clone()
                    }
                };
                spec.attacks.push(AttackInterval { kind, start_s, end_s, drone, params });
            }
            "EMITTER" if toks.len() == 3 => {
                spec.emitter = Some(PlanarPoint::new(f64_tok(toks[1])?, f64_tok(toks[2])?));
            }
            "LINK" if toks.len() == 4 && toks[2] == "DOWN_AT" => {
                spec.links_down.push((id_tok(toks[1])?, u64_tok(toks[3])?));
            }
            "DESTROY" if toks.len() == 4 && toks[2] == "AT" => {
                spec.destroys.push((id_tok(toks[1])?, u64_tok(toks[3])?));
            }
            key if key.chars().next().is_some_and(|c| c.is_lowercase()) => {
                if toks.len() != 2 {
                    return Err(perr(format!("expected `{key} <value>`")));
                }
                let v = toks[1];
                match key {
                    "name" => spec.name = v.to_string(),
                    "seed" => spec.seed = u64_tok(v)?,
                    "duration_s" => spec.duration_s = u64_tok(v)?,
                    "start" => {
                        spec.start = v
                            .parse()
                            .map_err(|_| perr(format!("bad start timestamp `{v}`")))?;
                    }
                    "origin_lat" => spec.origin_lat = f64_tok(v)?,
                    "origin_lon" => spec.origin_lon = f64_tok(v)?,
                    "altitude_m" => spec.altitude_m = f64_tok(v)?,
                    "radius_m" => spec.radius_m = f64_tok(v)?,
                    "triang_method" => {
                        spec.triang_method = match v {
                            "tdoa" => LocateMethod::Tdoa,
                            "bearing" => LocateMethod::Bearing,
                            _ => return Err(perr(format!("bad triang_method `{v}`"))),
                        };
                    }
                    "triang_noise_ns" => spec.triang_noise_ns = f64_tok(v)?,
                    "triang_noise_deg" => spec.triang_noise_deg = f64_tok(v)?,
                    _ => return Err(perr(format!("unknown key `{key}`"))),
                }
            }
            _ => return Err(perr(format!("unrecognized line `{line}`"))),
        }
    }

    spec.validate()
}

/// Local tangent-plane mapping fixed per scenario: planar meters to
/// geodetic coordinates around the scenario origin.
#[derive(Debug, Clone, Copy)]
pub struct TangentPlane {
    origin_lat: f64,
    origin_lon: f64,
    meters_per_deg_lon: f64,
}

const METERS_PER_DEG_LAT: f64 = 111_320.0;

impl TangentPlane {
    pub fn new(origin_lat: f64, origin_lon: f64) -> Self {
        TangentPlane {
            origin_lat,
            origin_lon,
            meters_per_deg_lon: METERS_PER_DEG_LAT * origin_lat.to_radians().cos(),
        }
    }

    pub fn to_geo(&self, p: PlanarPoint, alt_m: f64) -> GeoPoint {
        let lat = (self.origin_lat + p.y_m / METERS_PER_DEG_LAT).clamp(-90.0, 90.0);
        let lon = (self.origin_lon + p.x_m / self.meters_per_deg_lon).clamp(-180.0, 180.0);
        GeoPoint::new(quantize(lat, 1e6), quantize(lon, 1e6), quantize(alt_m, 1e3)).unwrap()
    }
}

/// Rounds to 1/`scale` units for tidy, exactly-round-tripping text.
pub(crate) fn quantize(v: f64, scale: f64) -> f64 {
    (v * scale).round() / scale
}

/// Flight state effective at one tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlightState {
    pub speed_kmh: f64,
    pub heading_deg: f64,
}

/// Per-drone flight state lookup and position integration. Positions are a
/// pure function of the spec, so the generator and the runner always agree.
pub fn flight_state(spec: &ScenarioSpec, drone: &DroneId, tick: u64) -> FlightState {
    let mut state = FlightState { speed_kmh: 0.0, heading_deg: 0.0 };
    let mut best_start = None;
    for seg in spec.flights.iter().filter(|f| f.drone == *drone && f.start_s <= tick) {
        if best_start.is_none_or(|b| seg.start_s >= b) {
            best_start = Some(seg.start_s);
            state = FlightState { speed_kmh: seg.speed_kmh, heading_deg: seg.heading_deg };
        }
    }
    state
}

/// Positions per drone per tick, `[drone_index][tick]` with
/// `duration_s + 1` entries. Heading is clockwise from north.
pub fn integrate_positions(spec: &ScenarioSpec) -> Vec<Vec<PlanarPoint>> {
    spec.drones
        .iter()
        .map(|d| {
            let mut path = Vec::with_capacity(spec.duration_s as usize + 1);
            let mut pos = d.start_pos;
            path.push(pos);
            for t in 0..spec.duration_s {
                let fs = flight_state(spec, &d.id, t);
                let theta = fs.heading_deg.to_radians();
                let v = fs.speed_kmh / 3.6;
                pos = PlanarPoint::new(pos.x_m + v * theta.sin(), pos.y_m + v * theta.cos());
                path.push(pos);
            }
            path
        })
        .collect()
}
