//! Drone RF-spectrum attack sensing engine with a deterministic
//! attack-scenario simulator.
//!
//! The crate models the full onboard sensing pipeline of a delivery drone
//! and the fleet fabric around it:
//!
//! - [`telemetry`] — the normalized event, selector taxonomy and the
//!   bit-exact log line format.
//! - [`preprocess`] — multi-source ingestion, normalization, dual write to
//!   the raw log and the rules engine.
//! - [`rules`] — the signature grammar, the default signature set and
//!   stateless evaluation.
//! - [`analytics`] — sliding metadata window, stateful signature completion,
//!   trend detection and the operating-mode state machine.
//! - [`swarm`] — group alert propagation, audit-log forwarding and rogue
//!   emitter localization (TDoA and bearing intersection).
//! - [`countermeasures`] — the response policy: GNSS rotation, fallback
//!   comms, AGC and capture modes.
//! - [`scenario`] — seeded attack-scenario generation, the end-to-end
//!   runner and the run report.
//!
//! Everything is deterministic: the same scenario, seed, rules and config
//! produce bit-identical artifact files on every run.

pub mod analytics;
pub mod countermeasures;
pub mod preprocess;
pub mod rules;
pub mod scenario;
pub mod swarm;
pub mod telemetry;

pub use analytics::{Alert, AnalyticsConfig, AnalyticsEngine, Mode};
pub use rules::{ActionLevel, RuleMatch, SignatureRule};
pub use scenario::{RunReport, ScenarioSpec};
pub use telemetry::{DroneId, GeoPoint, Selector, TelemetryEvent, Timestamp};
