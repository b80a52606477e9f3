//! End-to-end pipeline runner and the run report.
//!
//! `simulate` wires generation -> pre-process -> rules -> analytics ->
//! swarm -> countermeasures for every drone in lock-step one-second ticks,
//! then scores the run against the scenario's own ground truth. All maps
//! iterate in deterministic order, so two runs of the same inputs produce
//! bit-identical artifact text.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

use crate::analytics::{
    Alert, AnalyticsConfig, AnalyticsEngine, Mode, INTERVAL_CONSTANCY_RULE,
};
use crate::countermeasures::{apply_policy, CountermeasureState};
use crate::preprocess::{
    run_pipeline, split_into_adapters, IngestStats, PipelineError, RawEntry, VecSink,
};
use crate::rules::{eval_event, ActionLevel, SignatureRule};
use crate::swarm::{
    bearing_locate, broadcast_group, forward_logs, tdoa_locate, AuditRepository, BearingObs,
    EmitterEstimate, FleetTopology, LocateError, LocateMethod, PlanarPoint, SwarmMessage,
    SwarmPayload, TimingObs, TriangObs, SPEED_OF_LIGHT_M_S,
};
use crate::telemetry::{DroneId, TelemetryEvent};

use super::generate::{generate, Generated};
use super::{integrate_positions, AttackKind, Lcg, ScenarioSpec};

/// Detection outcome for one staged attack.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub kind: AttackKind,
    pub drone: DroneId,
    pub start_s: u64,
    pub end_s: u64,
    /// Seconds from attack start to the first qualifying alert, if any.
    pub latency_s: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriangulationReport {
    pub method: LocateMethod,
    pub estimate: PlanarPoint,
    pub residual: f64,
    pub error_m: f64,
    pub converged: bool,
    pub observations: usize,
}

/// Everything a run measures, computed against the scenario ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub scenario: String,
    pub seed: u64,
    pub duration_s: u64,
    pub events_total: u64,
    pub ingest: Vec<(DroneId, IngestStats)>,
    pub rule_alerts: BTreeMap<String, u64>,
    pub alerts_total: u64,
    pub detections: Vec<Detection>,
    pub false_positives: u64,
    pub peak_modes: Vec<(DroneId, Mode)>,
    pub final_modes: Vec<(DroneId, Mode)>,
    pub destroyed: Vec<(DroneId, u64)>,
    pub triangulation: Option<TriangulationReport>,
    pub audit_lines: Vec<(DroneId, u64)>,
    pub audit_completeness: f64,
    level_alerts: BTreeMap<u8, u64>,
}

impl RunReport {
    /// Alerts at or above `level`.
    pub fn alerts_at_or_above(&self, level: ActionLevel) -> u64 {
        self.level_alerts.iter().filter(|(l, _)| **l >= level as u8).map(|(_, n)| n).sum()
    }

    pub fn latency_for(&self, kind: AttackKind, drone: &DroneId) -> Option<u64> {
        self.detections
            .iter()
            .find(|d| d.kind == kind && d.drone == *drone)
            .and_then(|d| d.latency_s)
    }

    pub fn peak_mode(&self, drone: &DroneId) -> Option<Mode> {
        self.peak_modes.iter().find(|(d, _)| d == drone).map(|(_, m)| *m)
    }

    pub fn final_mode(&self, drone: &DroneId) -> Option<Mode> {
        self.final_modes.iter().find(|(d, _)| d == drone).map(|(_, m)| *m)
    }

    pub fn audit_lines_for(&self, drone: &DroneId) -> u64 {
        self.audit_lines.iter().find(|(d, _)| d == drone).map(|(_, n)| *n).unwrap_or(0)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("scenario {}\n", self.scenario));
        out.push_str(&format!("seed {}\n", self.seed));
        out.push_str(&format!("duration_s {}\n", self.duration_s));
        out.push_str(&format!("events_total {}\n", self.events_total));
        for (drone, stats) in &self.ingest {
            for a in &stats.adapters {
                out.push_str(&format!(
                    "ingest {drone} {} read={} normalized={} dropped={}\n",
                    a.kind, a.read, a.normalized, a.dropped
                ));
            }
        }
        for (rule, n) in &self.rule_alerts {
            out.push_str(&format!("rule_alerts {rule} {n}\n"));
        }
        out.push_str(&format!("alerts_total {}\n", self.alerts_total));
        for level in ActionLevel::ALL {
            out.push_str(&format!(
                "alerts_at_or_above {level} {}\n",
                self.alerts_at_or_above(level)
            ));
        }
        for d in &self.detections {
            let latency = match d.latency_s {
                Some(l) => l.to_string(),
                None => "none".to_string(),
            };
            out.push_str(&format!(
                "detection {} {} start_s={} end_s={} latency_s={latency}\n",
                d.kind, d.drone, d.start_s, d.end_s
            ));
        }
        out.push_str(&format!("false_positives {}\n", self.false_positives));
        for (d, m) in &self.peak_modes {
            out.push_str(&format!("peak_mode {d} {m}\n"));
        }
        for (d, m) in &self.final_modes {
            out.push_str(&format!("final_mode {d} {m}\n"));
        }
        for (d, t) in &self.destroyed {
            out.push_str(&format!("destroyed {d} {t}\n"));
        }
        if let Some(t) = &self.triangulation {
            out.push_str(&format!(
                "triangulation method={} x_m={:.6} y_m={:.6} residual={:.6} error_m={:.6} \
                 observations={} converged={}\n",
                t.method, t.estimate.x_m, t.estimate.y_m, t.residual, t.error_m, t.observations,
                t.converged
            ));
        }
        for (d, n) in &self.audit_lines {
            out.push_str(&format!("audit_lines {d} {n}\n"));
        }
        out.push_str(&format!("audit_completeness {:.6}\n", self.audit_completeness));
        out
    }
}

/// Artifact file contents of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifacts {
    pub raw: Vec<(DroneId, String)>,
    pub ground_truth: String,
    pub logs: Vec<(DroneId, String)>,
    pub alerts_log: String,
    pub actions_log: String,
    pub modes_log: String,
    pub audit_dump: String,
    pub report_text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub report: RunReport,
    pub artifacts: Artifacts,
    /// Every alert in emission order, for programmatic consumers.
    pub alerts: Vec<Alert>,
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("pre-process pipeline failed for drone {drone}: {source}")]
    Pipeline {
        drone: DroneId,
        #[source]
        source: PipelineError,
    },
    #[error("artifact io: {0}")]
    Io(#[from] io::Error),
}

fn rule_matches_kind(rule: &str, kind: AttackKind) -> bool {
    match kind {
        AttackKind::GpsSpoof => {
            rule == "gps_spoof" || rule == "sat_count_anomaly" || rule == INTERVAL_CONSTANCY_RULE
        }
        AttackKind::GpsJam => rule == "gps_spoof" || rule == "lost_link",
        AttackKind::WifiDeauth => rule == "wifi_deauth",
        AttackKind::Ddos => rule == "ddos",
        AttackKind::None => false,
    }
}

fn bearing_from(from: PlanarPoint, to: PlanarPoint) -> f64 {
    let dx = to.x_m - from.x_m;
    let dy = to.y_m - from.y_m;
    dx.atan2(dy).to_degrees().rem_euclid(360.0)
}

/// Runs the full pipeline for every drone of `spec`.
pub fn simulate(
    spec: &ScenarioSpec,
    rules: &[SignatureRule],
    config: &AnalyticsConfig,
) -> Result<SimResult, RunError> {
    let generated = generate(spec);
    let positions = integrate_positions(spec);
    let n_drones = spec.drones.len();

    // Fleet fabric.
    let mut topology = FleetTopology::new(spec.radius_m).expect("validated radius");
    for d in &spec.drones {
        topology.add_drone(d.id.clone(), d.start_pos).expect("unique ids");
    }
    for (d, tick) in &spec.links_down {
        topology.set_link_down_at(d, *tick).expect("validated drone");
    }

    // Pre-process every drone's raw stream into events plus its local log.
    let mut per_drone_events: Vec<Vec<TelemetryEvent>> = Vec::with_capacity(n_drones);
    let mut per_drone_lines: Vec<Vec<String>> = Vec::with_capacity(n_drones);
    let mut ingest: Vec<(DroneId, IngestStats)> = Vec::with_capacity(n_drones);
    for (drone, records) in &generated.streams {
        let entries: Vec<RawEntry> = records.iter().cloned().map(RawEntry::Record).collect();
        let adapters = split_into_adapters(entries);
        let mut sink = VecSink::default();
        let mut log: Vec<u8> = Vec::new();
        let stats = run_pipeline(&adapters, &mut sink, &mut log)
            .map_err(|source| RunError::Pipeline { drone: drone.clone(), source })?;
        let log_text = String::from_utf8(log).expect("log lines are UTF-8");
        per_drone_lines.push(log_text.lines().map(|l| l.to_string()).collect());
        per_drone_events.push(sink.events);
        ingest.push((drone.clone(), stats));
    }

    // Per-tick index into each drone's ordered event list.
    let mut event_cursor = vec![0usize; n_drones];
    // Cumulative log line counts per tick boundary, for forwarding.
    let line_tick = |events: &[TelemetryEvent], i: usize| -> u64 {
        events[i].timestamp.seconds_since(spec.start).max(0) as u64
    };

    // Engines and per-drone state.
    let mut engines: Vec<AnalyticsEngine> = spec
        .drones
        .iter()
        .map(|d| AnalyticsEngine::new(d.id.clone(), config, spec.start))
        .collect();
    let mut cm_states: Vec<CountermeasureState> =
        (0..n_drones).map(|_| CountermeasureState::default()).collect();
    let mut peaks: Vec<Mode> = vec![Mode::Normal; n_drones];
    let mut repo = AuditRepository::new();
    let mut forwarded_available = vec![0usize; n_drones];

    // Scheduled swarm deliveries: arrival tick -> (receiver index, message).
    let mut deliveries: BTreeMap<u64, Vec<(usize, SwarmMessage)>> = BTreeMap::new();

    let mut alerts_log = String::new();
    let mut actions_log = String::new();
    let mut modes_log = String::new();
    let mut all_alerts: Vec<Alert> = Vec::new();
    let mut triangulation: Option<TriangulationReport> = None;
    let mut noise_rng = Lcg::new(spec.seed.wrapping_add(99_991));

    for tick in 0..spec.duration_s {
        let now = spec.tick_timestamp(tick);
        for (idx, d) in spec.drones.iter().enumerate() {
            topology.set_position(&d.id, positions[idx][tick as usize]).unwrap();
        }
        let arrived = deliveries.remove(&tick).unwrap_or_default();

        for idx in 0..n_drones {
            let drone = spec.drones[idx].id.clone();
            if spec.destroyed_at(&drone).is_some_and(|at| tick >= at) {
                continue;
            }

            let notices = arrived
                .iter()
                .filter(|(rx, m)| *rx == idx && m.payload.is_escalating())
                .count();

            // Drain this tick's events through rules and analytics.
            let mut tick_alerts: Vec<Alert> = Vec::new();
            let events = &per_drone_events[idx];
            while event_cursor[idx] < events.len()
                && line_tick(events, event_cursor[idx]) == tick
            {
                let event = &events[event_cursor[idx]];
                event_cursor[idx] += 1;
                let outcome = engines[idx].process_event(event);
                if outcome.rejected_non_monotonic {
                    continue;
                }
                if let Some(a) = outcome.trend_alert {
                    tick_alerts.push(a);
                }
                let matches = eval_event(rules, event);
                tick_alerts.extend(engines[idx].process_matches(&matches, event.timestamp));
            }

            let transition = engines[idx].step_mode(&tick_alerts, notices, now);
            let mode_now = engines[idx].mode();
            if mode_now.rank() > peaks[idx].rank() {
                peaks[idx] = mode_now;
            }

            for alert in &tick_alerts {
                alerts_log.push_str(&alert.to_line());
                alerts_log.push('\n');

                if alert.level >= ActionLevel::Group {
                    let report = broadcast_group(&topology, &drone, alert, tick)
                        .expect("level checked above");
                    for delivery in &report.deliveries {
                        let rx_idx = spec.drone_index(&delivery.receiver).unwrap();
                        let payload = if alert.level == ActionLevel::Emergency {
                            SwarmPayload::AssistRequest(alert.clone())
                        } else {
                            SwarmPayload::GroupAlert(alert.clone())
                        };
                        deliveries
                            .entry(tick + delivery.rounds as u64)
                            .or_default()
                            .push((
                                rx_idx,
                                SwarmMessage {
                                    sender: drone.clone(),
                                    sent_at: now,
                                    payload,
                                },
                            ));
                    }
                    if triangulation.is_none() && !report.deliveries.is_empty() {
                        triangulation = attempt_triangulation(
                            spec,
                            &topology,
                            &positions,
                            &drone,
                            &report.deliveries.iter().map(|de| de.receiver.clone()).collect::<Vec<_>>(),
                            tick,
                            &mut noise_rng,
                        );
                    }
                }

                let (next_cm, changes) = apply_policy(&cm_states[idx], Some(alert), mode_now);
                cm_states[idx] = next_cm;
                for c in changes {
                    actions_log.push_str(&c.to_line(now, &drone));
                    actions_log.push('\n');
                }
            }
            all_alerts.extend(tick_alerts);

            if let Some(tr) = transition {
                modes_log.push_str(&tr.to_line(&drone));
                modes_log.push('\n');
                let (next_cm, changes) = apply_policy(&cm_states[idx], None, tr.to);
                cm_states[idx] = next_cm;
                for c in changes {
                    actions_log.push_str(&c.to_line(now, &drone));
                    actions_log.push('\n');
                }
            }
        }

        // Log forwarding: everything written up to and including this tick.
        for idx in 0..n_drones {
            let drone = &spec.drones[idx].id;
            if spec.destroyed_at(drone).is_some_and(|at| tick >= at) {
                continue;
            }
            let events = &per_drone_events[idx];
            let mut avail = forwarded_available[idx];
            while avail < events.len() && line_tick(events, avail) <= tick {
                avail += 1;
            }
            forwarded_available[idx] = avail;
            forward_logs(
                &mut repo,
                drone,
                &per_drone_lines[idx][..avail],
                topology.link_up(drone, tick),
            );
        }
    }

    // Score the run against the scenario's own ground truth.
    let mut rule_alerts: BTreeMap<String, u64> = BTreeMap::new();
    let mut level_alerts: BTreeMap<u8, u64> = BTreeMap::new();
    for a in &all_alerts {
        *rule_alerts.entry(a.rule.clone()).or_default() += 1;
        *level_alerts.entry(a.level as u8).or_default() += 1;
    }

    let alert_tick = |a: &Alert| a.emitted.seconds_since(spec.start).max(0) as u64;
    let detections: Vec<Detection> = spec
        .attacks
        .iter()
        .filter(|at| at.kind != AttackKind::None)
        .map(|at| {
            let latency_s = all_alerts
                .iter()
                .filter(|a| {
                    a.drone == at.drone
                        && rule_matches_kind(&a.rule, at.kind)
                        && (at.start_s..=at.end_s).contains(&alert_tick(a))
                })
                .map(|a| alert_tick(a) - at.start_s)
                .min();
            Detection {
                kind: at.kind,
                drone: at.drone.clone(),
                start_s: at.start_s,
                end_s: at.end_s,
                latency_s,
            }
        })
        .collect();

    let false_positives = all_alerts
        .iter()
        .filter(|a| {
            !spec.attacks.iter().any(|at| {
                at.drone == a.drone
                    && rule_matches_kind(&a.rule, at.kind)
                    && (at.start_s..=at.end_s).contains(&alert_tick(a))
            })
        })
        .count() as u64;

    let total_lines: u64 = per_drone_lines.iter().map(|l| l.len() as u64).sum();
    let audit_lines: Vec<(DroneId, u64)> = spec
        .drones
        .iter()
        .map(|d| (d.id.clone(), repo.lines_for(&d.id).len() as u64))
        .collect();
    let audit_total: u64 = audit_lines.iter().map(|(_, n)| n).sum();
    let audit_completeness =
        if total_lines == 0 { 1.0 } else { audit_total as f64 / total_lines as f64 };

    let report = RunReport {
        scenario: spec.name.clone(),
        seed: spec.seed,
        duration_s: spec.duration_s,
        events_total: per_drone_events.iter().map(|e| e.len() as u64).sum(),
        ingest,
        rule_alerts,
        alerts_total: all_alerts.len() as u64,
        detections,
        false_positives,
        peak_modes: spec
            .drones
            .iter()
            .enumerate()
            .map(|(i, d)| (d.id.clone(), peaks[i]))
            .collect(),
        final_modes: spec
            .drones
            .iter()
            .enumerate()
            .map(|(i, d)| (d.id.clone(), engines[i].mode()))
            .collect(),
        destroyed: spec.destroys.clone(),
        triangulation,
        audit_lines,
        audit_completeness,
        level_alerts,
    };

    let artifacts = Artifacts {
        raw: generated
            .streams
            .iter()
            .map(|(d, records)| {
                let mut text = format!("# raw adapter records for {d}\n");
                for r in records {
                    text.push_str(&r.to_line());
                    text.push('\n');
                }
                (d.clone(), text)
            })
            .collect(),
        ground_truth: generated.ground_truth.clone(),
        logs: spec
            .drones
            .iter()
            .enumerate()
            .map(|(i, d)| {
                let mut text = per_drone_lines[i].join("\n");
                if !text.is_empty() {
                    text.push('\n');
                }
                (d.id.clone(), text)
            })
            .collect(),
        alerts_log,
        actions_log,
        modes_log,
        audit_dump: repo.dump(),
        report_text: report.to_text(),
    };

    Ok(SimResult { report, artifacts, alerts: all_alerts })
}

/// Collects localization observations from the origin and the reached
/// receivers at the broadcast tick, then solves with the scenario's method.
fn attempt_triangulation(
    spec: &ScenarioSpec,
    topology: &FleetTopology,
    positions: &[Vec<PlanarPoint>],
    origin: &DroneId,
    receivers: &[DroneId],
    tick: u64,
    noise_rng: &mut Lcg,
) -> Option<TriangulationReport> {
    let emitter = spec.emitter?;
    let mut contributors: Vec<&DroneId> = vec![origin];
    contributors.extend(receivers.iter());
    contributors.retain(|d| topology.link_up(d, tick));

    let obs: Vec<TriangObs> = contributors
        .iter()
        .map(|d| {
            let idx = spec.drone_index(d).unwrap();
            let pos = positions[idx][tick as usize];
            match spec.triang_method {
                LocateMethod::Tdoa => {
                    let noise_s =
                        spec.triang_noise_ns * 1e-9 * (2.0 * noise_rng.next_f64() - 1.0);
                    TriangObs::Timing(TimingObs {
                        receiver: pos,
                        arrival_time_s: emitter.distance(pos) / SPEED_OF_LIGHT_M_S + noise_s,
                    })
                }
                LocateMethod::Bearing => {
                    let noise_deg =
                        spec.triang_noise_deg * (2.0 * noise_rng.next_f64() - 1.0);
                    TriangObs::Bearing(BearingObs {
                        receiver: pos,
                        bearing_deg: bearing_from(pos, emitter) + noise_deg,
                    })
                }
            }
        })
        .collect();

    let solved: Result<EmitterEstimate, LocateError> = match spec.triang_method {
        LocateMethod::Tdoa => {
            let timing: Vec<TimingObs> = obs
                .iter()
                .filter_map(|o| match o {
                    TriangObs::Timing(t) => Some(*t),
                    _ => None,
                })
                .collect();
            tdoa_locate(&timing, SPEED_OF_LIGHT_M_S)
        }
        LocateMethod::Bearing => {
            let bearings: Vec<BearingObs> = obs
                .iter()
                .filter_map(|o| match o {
                    TriangObs::Bearing(b) => Some(*b),
                    _ => None,
                })
                .collect();
            bearing_locate(&bearings)
        }
    };

    let (estimate, converged) = match solved {
        Ok(e) => (e, true),
        Err(LocateError::NoConvergence { best }) => (best, false),
        Err(_) => return None,
    };
    Some(TriangulationReport {
        method: estimate.method,
        estimate: estimate.position,
        residual: estimate.residual,
        error_m: estimate.position.distance(emitter),
        converged,
        observations: obs.len(),
    })
}

/// Writes the full run artifact directory.
pub fn write_run_dir(sim: &SimResult, out: &Path) -> io::Result<()> {
    fs::create_dir_all(out.join("raw"))?;
    fs::create_dir_all(out.join("logs"))?;
    for (d, text) in &sim.artifacts.raw {
        fs::write(out.join("raw").join(format!("{d}.raw")), text)?;
    }
    fs::write(out.join("ground_truth.txt"), &sim.artifacts.ground_truth)?;
    for (d, text) in &sim.artifacts.logs {
        fs::write(out.join("logs").join(format!("{d}.log")), text)?;
    }
    fs::write(out.join("alerts.log"), &sim.artifacts.alerts_log)?;
    fs::write(out.join("actions.log"), &sim.artifacts.actions_log)?;
    fs::write(out.join("modes.log"), &sim.artifacts.modes_log)?;
    fs::write(out.join("audit.log"), &sim.artifacts.audit_dump)?;
    fs::write(out.join("report.txt"), &sim.artifacts.report_text)?;
    Ok(())
}

/// Writes generator output only (raw streams plus ground truth).
pub fn write_generate_dir(generated: &Generated, out: &Path) -> io::Result<()> {
    fs::create_dir_all(out.join("raw"))?;
    for (d, records) in &generated.streams {
        let mut text = format!("# raw adapter records for {d}\n");
        for r in records {
            text.push_str(&r.to_line());
            text.push('\n');
        }
        fs::write(out.join("raw").join(format!("{d}.raw")), text)?;
    }
    fs::write(out.join("ground_truth.txt"), &generated.ground_truth)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("expectation line {line}: {message}")]
pub struct ExpectationError {
    pub line: usize,
    pub message: String,
}

fn compare(cmp: &str, have: f64, want: f64) -> Option<bool> {
    match cmp {
        "=" => Some(have == want),
        "!=" => Some(have != want),
        "<" => Some(have < want),
        "<=" => Some(have <= want),
        ">" => Some(have > want),
        ">=" => Some(have >= want),
        _ => None,
    }
}

/// Checks a line-oriented expectations file against a run report.
/// Returns the list of human-readable failures (empty means all pass).
///
/// Supported checks:
/// ```text
/// rule_alerts <rule> <cmp> <n>
/// alerts_total <cmp> <n>
/// alerts_at_or_above <level> <cmp> <n>
/// latency_s <attack_kind> <drone> <cmp> <seconds>
/// false_positives <cmp> <n>
/// peak_mode <drone> = <mode>        (also !=)
/// final_mode <drone> = <mode>
/// audit_lines <drone> <cmp> <n>
/// audit_completeness <cmp> <fraction>
/// triang_error_m <cmp> <meters>
/// ```
pub fn check_expectations(
    report: &RunReport,
    text: &str,
) -> Result<Vec<String>, ExpectationError> {
    let mut failures = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let n = idx + 1;
        let err = |message: String| ExpectationError { line: n, message };
        let toks: Vec<&str> = line.split_whitespace().collect();

        let numeric = |cmp: &str, have: f64, want_tok: &str, label: &str| -> Result<Option<String>, ExpectationError> {
            let want: f64 =
                want_tok.parse().map_err(|_| err(format!("bad number `{want_tok}`")))?;
            let ok = compare(cmp, have, want)
                .ok_or_else(|| err(format!("bad comparator `{cmp}`")))?;
            Ok((!ok).then(|| format!("{label}: have {have}, want {cmp} {want}")))
        };

        let failure = match toks.as_slice() {
            ["rule_alerts", rule, cmp, want] => {
                let have = report.rule_alerts.get(*rule).copied().unwrap_or(0) as f64;
                numeric(cmp, have, want, &format!("rule_alerts {rule}"))?
            }
            ["alerts_total", cmp, want] => {
                numeric(cmp, report.alerts_total as f64, want, "alerts_total")?
            }
            ["alerts_at_or_above", level, cmp, want] => {
                let level: ActionLevel = level
                    .parse()
                    .map_err(|_| err(format!("unknown level `{level}`")))?;
                let have = report.alerts_at_or_above(level) as f64;
                numeric(cmp, have, want, &format!("alerts_at_or_above {level}"))?
            }
            ["latency_s", kind, drone, cmp, want] => {
                let kind: AttackKind =
                    kind.parse().map_err(|_| err(format!("unknown attack kind `{kind}`")))?;
                let drone: DroneId =
                    drone.parse().map_err(|_| err(format!("bad drone `{drone}`")))?;
                match report.latency_for(kind, &drone) {
                    Some(l) => numeric(cmp, l as f64, want, &format!("latency_s {kind} {drone}"))?,
                    None => Some(format!("latency_s {kind} {drone}: attack not detected")),
                }
            }
            ["false_positives", cmp, want] => {
                numeric(cmp, report.false_positives as f64, want, "false_positives")?
            }
            ["peak_mode", drone, cmp @ ("=" | "!="), want] => {
                mode_check(report, drone, cmp, want, true).map_err(err)?
            }
            ["final_mode", drone, cmp @ ("=" | "!="), want] => {
                mode_check(report, drone, cmp, want, false).map_err(err)?
            }
            ["audit_lines", drone, cmp, want] => {
                let drone: DroneId =
                    drone.parse().map_err(|_| err(format!("bad drone `{drone}`")))?;
                let have = report.audit_lines_for(&drone) as f64;
                numeric(cmp, have, want, &format!("audit_lines {drone}"))?
            }
            ["audit_completeness", cmp, want] => {
                numeric(cmp, report.audit_completeness, want, "audit_completeness")?
            }
            ["triang_error_m", cmp, want] => match &report.triangulation {
                Some(t) => numeric(cmp, t.error_m, want, "triang_error_m")?,
                None => Some("triang_error_m: no triangulation performed".to_string()),
            },
            _ => return Err(err(format!("unrecognized expectation `{line}`"))),
        };
        if let Some(f) = failure {
            failures.push(f);
        }
    }
    Ok(failures)
}

fn mode_check(
    report: &RunReport,
    drone: &str,
    cmp: &str,
    want: &str,
    peak: bool,
) -> Result<Option<String>, String> {
    let drone: DroneId = drone.parse().map_err(|_| format!("bad drone `{drone}`"))?;
    let want_mode: Mode = want.parse().map_err(|_| format!("unknown mode `{want}`"))?;
    let label = if peak { "peak_mode" } else { "final_mode" };
    let have = if peak { report.peak_mode(&drone) } else { report.final_mode(&drone) };
    let Some(have) = have else {
        return Ok(Some(format!("{label} {drone}: unknown drone")));
    };
    let ok = if cmp == "=" { have == want_mode } else { have != want_mode };
    Ok((!ok).then(|| format!("{label} {drone}: have {have}, want {cmp} {want_mode}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rules::default_ruleset;
    use crate::scenario::parse_scenario;
    use crate::telemetry::Timestamp;

    const SPOOF_SCN: &str = "\
name spoof_mini
seed 7
duration_s 200
radius_m 2000
DRONE alpha 0.0 0.0
DRONE bravo 0.0 500.0
DRONE charlie 400.0 250.0
FLIGHT alpha 0 36.0 90.0
ATTACK GPS_SPOOF 60 120 drone=alpha
EMITTER 250.0 150.0
";

    fn run(text: &str) -> SimResult {
        let spec = parse_scenario(text).unwrap();
        simulate(&spec, &default_ruleset(), &AnalyticsConfig::default()).unwrap()
    }

    #[test]
    fn spoof_scenario_detects_immediately_and_escalates() {
        let sim = run(SPOOF_SCN);
        let alpha: DroneId = "alpha".parse().unwrap();
        assert_eq!(sim.report.latency_for(AttackKind::GpsSpoof, &alpha), Some(0));
        assert_eq!(sim.report.peak_mode(&alpha), Some(Mode::Evasive));
        assert!(sim.report.rule_alerts.get("gps_spoof").copied().unwrap_or(0) >= 60);
        assert!(sim.report.rule_alerts.get("sat_count_anomaly").copied().unwrap_or(0) >= 60);
        assert_eq!(sim.report.false_positives, 0);
    }

    #[test]
    fn spoof_broadcast_reaches_peers_and_triangulates() {
        let sim = run(SPOOF_SCN);
        let bravo: DroneId = "bravo".parse().unwrap();
        assert_eq!(sim.report.peak_mode(&bravo), Some(Mode::SwarmMonitor));
        let t = sim.report.triangulation.as_ref().expect("emitter planted");
        assert!(t.converged);
        assert!(t.error_m < 1e-3, "triangulation error {}", t.error_m);
        assert_eq!(t.observations, 3);
    }

    #[test]
    fn trend_detector_fires_during_spoof() {
        let sim = run(SPOOF_SCN);
        let n = sim.report.rule_alerts.get(INTERVAL_CONSTANCY_RULE).copied().unwrap_or(0);
        assert_eq!(n, 1, "one rising edge per burst");
        let alert = sim.alerts.iter().find(|a| a.rule == INTERVAL_CONSTANCY_RULE).unwrap();
        let tick = alert.emitted.seconds_since(sim_start()) as u64;
        assert!((60..=120).contains(&tick), "trend alert at tick {tick}");
    }

    fn sim_start() -> Timestamp {
        "2020-03-01T19:40:08Z".parse().unwrap()
    }

    #[test]
    fn simulate_is_bit_deterministic() {
        let a = run(SPOOF_SCN);
        let b = run(SPOOF_SCN);
        assert_eq!(a.artifacts, b.artifacts);
        assert_eq!(a.report, b.report);
    }

    #[test]
    fn bearing_method_triangulates_during_run() {
        let sim = run("\
name spoof_bearing
seed 7
duration_s 200
radius_m 2000
triang_method bearing
triang_noise_deg 2.0
DRONE alpha 0.0 0.0
DRONE bravo 0.0 500.0
DRONE charlie 400.0 250.0
DRONE delta 500.0 -200.0
ATTACK GPS_SPOOF 60 120 drone=alpha
EMITTER 250.0 150.0
");
        let t = sim.report.triangulation.as_ref().expect("emitter planted");
        assert_eq!(t.method, crate::swarm::LocateMethod::Bearing);
        assert_eq!(t.observations, 4);
        // +-2 degree noise at a few hundred meters baseline.
        assert!(t.error_m < 30.0, "bearing error {}", t.error_m);
    }

    #[test]
    fn quiet_baseline_produces_no_alerts() {
        let sim = run("\
name quiet
seed 42
duration_s 120
radius_m 800
DRONE alpha 0.0 0.0
FLIGHT alpha 0 36.0 90.0
");
        assert_eq!(sim.report.alerts_total, 0);
        assert_eq!(sim.report.final_modes[0].1, Mode::Normal);
        assert!((sim.report.audit_completeness - 1.0).abs() < 1e-12);
    }

    #[test]
    fn expectations_pass_and_fail_correctly() {
        let sim = run(SPOOF_SCN);
        let ok = check_expectations(
            &sim.report,
            "latency_s GPS_SPOOF alpha <= 5\npeak_mode alpha = Evasive\nfalse_positives = 0\n",
        )
        .unwrap();
        assert!(ok.is_empty(), "{ok:?}");
        let bad = check_expectations(&sim.report, "peak_mode alpha = Normal\n").unwrap();
        assert_eq!(bad.len(), 1);
        assert!(check_expectations(&sim.report, "nonsense check\n").is_err());
    }

    #[test]
    fn report_text_round_trips_key_lines() {
        let sim = run(SPOOF_SCN);
        let text = sim.report.to_text();
        assert!(text.contains("scenario spoof_mini"));
        assert!(text.contains("detection GPS_SPOOF alpha start_s=60 end_s=120 latency_s=0"));
        assert!(text.contains("peak_mode alpha Evasive"));
        assert!(text.contains("false_positives 0"));
    }
}
