//! Acceptance suite: one test per shipped criterion, each printing a
//! pass/fail line (run with `--nocapture` to see them). Scenario-level
//! checks run the shipped scenario files end to end; property-level checks
//! drive the core algorithms against independent oracles.

use std::panic::{catch_unwind, resume_unwind, UnwindSafe};
use std::path::PathBuf;
use std::time::Instant;

use skysentry::analytics::{
    interval_constancy, AnalyticsConfig, MetaRecord, MetadataWindow, Mode, ModeInput, ModeMachine,
};
use skysentry::rules::{default_ruleset, ActionLevel};
use skysentry::scenario::{
    check_expectations, generate, parse_scenario, simulate, write_run_dir, Lcg, ScenarioSpec,
    SimResult,
};
use skysentry::swarm::{
    bearing_locate, tdoa_locate, BearingObs, PlanarPoint, TimingObs, SPEED_OF_LIGHT_M_S,
};
use skysentry::preprocess::SourceKind;
use skysentry::telemetry::{
    format_event, parse_event, DroneId, GeoPoint, KeyValue, Selector, TelemetryEvent, Timestamp,
};

fn criterion(n: u32, what: &str, body: impl FnOnce() + UnwindSafe) {
    match catch_unwind(body) {
        Ok(()) => println!("[PASS] criterion {n}: {what}"),
        Err(e) => {
            println!("[FAIL] criterion {n}: {what}");
            resume_unwind(e);
        }
    }
}

fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn load_spec(name: &str) -> ScenarioSpec {
    let text = std::fs::read_to_string(scenario_path(name)).expect("shipped scenario readable");
    parse_scenario(&text).expect("shipped scenario parses")
}

fn run_shipped(name: &str) -> (ScenarioSpec, SimResult) {
    let spec = load_spec(name);
    let sim = simulate(&spec, &default_ruleset(), &AnalyticsConfig::default())
        .expect("simulation completes");
    (spec, sim)
}

fn assert_expectations(name: &str, sim: &SimResult) {
    let text = std::fs::read_to_string(scenario_path(name)).expect("expectations readable");
    let failures = check_expectations(&sim.report, &text).expect("expectations parse");
    assert!(failures.is_empty(), "shipped expectations failed: {failures:?}");
}

fn drone(name: &str) -> DroneId {
    name.parse().unwrap()
}

#[test]
fn criterion_01_spoof_detection_latency_and_mode() {
    criterion(1, "gps_spoof detected within 5 s, target reaches Evasive, run under 5 s", || {
        let started = Instant::now();
        let (spec, sim) = run_shipped("gps_spoof.scn");
        let elapsed = started.elapsed();

        let first = sim
            .alerts
            .iter()
            .find(|a| a.rule == "gps_spoof" && a.level == ActionLevel::Emergency)
            .expect("gps_spoof Emergency alert fired");
        let tick = first.emitted.seconds_since(spec.start);
        assert!(tick >= 120, "alert before attack start: {tick}");
        assert!(tick - 120 <= 5, "detection latency {} s exceeds 5 s", tick - 120);

        assert_eq!(sim.report.peak_mode(&drone("alpha")), Some(Mode::Evasive));
        assert_expectations("gps_spoof.expect", &sim);
        assert!(elapsed.as_secs_f64() < 5.0, "run took {elapsed:?}");
    });
}

#[test]
fn criterion_02_zero_false_positive_baseline() {
    criterion(2, "baseline scenario yields zero alerts at Elevated or above", || {
        let (_, sim) = run_shipped("baseline.scn");
        assert_eq!(sim.report.alerts_at_or_above(ActionLevel::Elevated), 0);
        assert_eq!(sim.report.false_positives, 0);
        assert_expectations("baseline.expect", &sim);
    });
}

#[test]
fn criterion_03_sat_count_and_interval_constancy() {
    criterion(3, "sat_count_anomaly fires; interval constancy separates spoof from baseline", || {
        let (spec, sim) = run_shipped("gps_spoof.scn");
        assert!(
            sim.report.rule_alerts.get("sat_count_anomaly").copied().unwrap_or(0) >= 1,
            "sat_count_anomaly never fired"
        );

        // Rebuild the GPS message clock of the attacked drone from the
        // generated stream and test both segments directly.
        let generated = generate(&spec);
        let alpha_records = &generated.streams[0].1;
        let mut spoof_clock = vec![0.0f64];
        let mut baseline_clock = vec![0.0f64];
        for r in alpha_records {
            if r.kind != SourceKind::GpsStatus {
                continue;
            }
            let Some(interval) = r.f64_field("interval_s") else { continue };
            let tick = r.ts.seconds_since(spec.start) as u64;
            if (120..180).contains(&tick) {
                spoof_clock.push(spoof_clock.last().unwrap() + interval);
            } else if tick < 120 {
                baseline_clock.push(baseline_clock.last().unwrap() + interval);
            }
        }
        assert!(spoof_clock.len() > 50 && baseline_clock.len() > 100);

        let spoof = interval_constancy(&spoof_clock, 10, 0.01).unwrap().unwrap();
        assert!(spoof.indicator, "spoof segment not flagged (cov {})", spoof.cov);
        assert_eq!(spoof.cov, 0.0);

        let base = interval_constancy(&baseline_clock, 10, 0.01).unwrap().unwrap();
        assert!(!base.indicator, "baseline flagged (cov {})", base.cov);
        assert!(base.cov >= 0.05, "baseline cov {} below 0.05", base.cov);
    });
}

#[test]
fn criterion_04_tdoa_oracle_equivalence() {
    criterion(4, "TDoA recovers 100 seeded emitters: noiseless < 1e-3 m, noisy median < 10 m", || {
        let receivers = [
            PlanarPoint::new(0.0, 0.0),
            PlanarPoint::new(200.0, 0.0),
            PlanarPoint::new(200.0, 200.0),
            PlanarPoint::new(0.0, 200.0),
        ];
        let mut rng = Lcg::new(4001);
        let mut noisy_errors = Vec::with_capacity(100);

        for case in 0..100 {
            let emitter =
                PlanarPoint::new(rng.uniform(10.0, 190.0), rng.uniform(10.0, 190.0));
            // Forward model generates all inputs.
            let clean: Vec<TimingObs> = receivers
                .iter()
                .map(|&r| TimingObs {
                    receiver: r,
                    arrival_time_s: emitter.distance(r) / SPEED_OF_LIGHT_M_S,
                })
                .collect();
            let est = tdoa_locate(&clean, SPEED_OF_LIGHT_M_S).expect("noiseless convergence");
            let err = est.position.distance(emitter);
            assert!(err < 1e-3, "case {case}: noiseless error {err}");
            assert!(est.residual < 1e-6, "case {case}: residual {}", est.residual);

            let noisy: Vec<TimingObs> = clean
                .iter()
                .map(|o| TimingObs {
                    receiver: o.receiver,
                    arrival_time_s: o.arrival_time_s + rng.uniform(-10e-9, 10e-9),
                })
                .collect();
            let est = tdoa_locate(&noisy, SPEED_OF_LIGHT_M_S).expect("noisy convergence");
            noisy_errors.push(est.position.distance(emitter));
        }

        noisy_errors.sort_by(|a, b| a.total_cmp(b));
        let median = (noisy_errors[49] + noisy_errors[50]) / 2.0;
        assert!(median < 10.0, "noisy median error {median} m");
    });
}

#[test]
fn criterion_05_bearing_intersection() {
    criterion(5, "bearing intersection analytic case and translation invariance to 1e-9", || {
        let base = [
            BearingObs { receiver: PlanarPoint::new(0.0, 0.0), bearing_deg: 90.0 },
            BearingObs { receiver: PlanarPoint::new(100.0, 100.0), bearing_deg: 180.0 },
        ];
        let est = bearing_locate(&base).unwrap();
        assert!((est.position.x_m - 100.0).abs() < 1e-9);
        assert!(est.position.y_m.abs() < 1e-9);

        let mut rng = Lcg::new(5001);
        for case in 0..100 {
            let (tx, ty) = (rng.uniform(-5000.0, 5000.0), rng.uniform(-5000.0, 5000.0));
            let shifted: Vec<BearingObs> = base
                .iter()
                .map(|o| BearingObs {
                    receiver: PlanarPoint::new(o.receiver.x_m + tx, o.receiver.y_m + ty),
                    bearing_deg: o.bearing_deg,
                })
                .collect();
            let est = bearing_locate(&shifted).unwrap();
            assert!(
                (est.position.x_m - (100.0 + tx)).abs() < 1e-9
                    && (est.position.y_m - ty).abs() < 1e-9,
                "case {case}: translation not preserved"
            );
        }
    });
}

#[test]
fn criterion_06_sliding_window_bound() {
    criterion(6, "window equals brute-force 3600 s filter across 10,000 randomized inserts", || {
        let mut window = MetadataWindow::new(3600);
        let mut history: Vec<i64> = Vec::new();
        let mut rng = Lcg::new(6001);
        let mut t: i64 = 0;

        for _ in 0..10_000 {
            t += rng.below(121) as i64;
            history.push(t);
            window.insert(MetaRecord {
                ts: Timestamp::from_epoch_seconds(t).unwrap(),
                selector: Selector::General,
                numeric: vec![],
            });

            // Brute-force filter of the full history against the newest ts.
            let lo = history.partition_point(|&h| t - h > 3600);
            let expected = &history[lo..];
            let stored: Vec<i64> = window.iter().map(|r| r.ts.epoch_seconds()).collect();
            assert_eq!(stored, expected, "window diverged from brute-force filter");
            let oldest = window.oldest().unwrap().epoch_seconds();
            assert!(t - oldest <= 3600, "stale record {} s old survived", t - oldest);
        }
    });
}

fn random_event(rng: &mut Lcg) -> TelemetryEvent {
    let keys = ["freq_mhz", "power_db", "sat_count", "event", "link", "extra"];
    let n_tokens = rng.below(5) as usize;
    let tokens: Vec<KeyValue> = (0..n_tokens)
        .map(|_| {
            let key = keys[rng.below(keys.len() as u32) as usize];
            let value = match rng.below(3) {
                0 => format!("{}", rng.below(100_000)),
                1 => skysentry::telemetry::fmt_num(rng.uniform(-2000.0, 6000.0)),
                _ => format!("V{}", rng.next_u31()),
            };
            KeyValue::new(key, value).unwrap()
        })
        .collect();
    TelemetryEvent::new(
        Timestamp::from_epoch_seconds(rng.below(2_000_000_000) as i64).unwrap(),
        rng.uniform(0.0, 400.0),
        rng.uniform(0.0, 360.0),
        GeoPoint::new(
            rng.uniform(-90.0, 90.0),
            rng.uniform(-180.0, 180.0),
            rng.uniform(-400.0, 9000.0),
        )
        .unwrap(),
        Selector::ALL[rng.below(5) as usize],
        tokens,
    )
    .unwrap()
}

#[test]
fn criterion_07_round_trip_and_totality() {
    criterion(7, "10,000 events round-trip exactly; 10,000 fuzzed lines never panic", || {
        let mut rng = Lcg::new(7001);
        for i in 0..10_000 {
            let e = random_event(&mut rng);
            let line = format_event(&e);
            let back = parse_event(&line).unwrap_or_else(|err| {
                panic!("case {i}: failed to re-parse `{line}`: {err}")
            });
            assert_eq!(back, e, "case {i}: round trip changed the event");
        }

        // Fuzz: random printable lines plus mutations of valid lines.
        let palette: Vec<char> =
            (0x20u8..0x7f).map(|b| b as char).chain(['\t']).collect();
        let mut ok = 0u32;
        let mut err = 0u32;
        for i in 0..10_000 {
            let line = if i % 2 == 0 {
                let len = rng.below(120) as usize;
                (0..len).map(|_| palette[rng.below(palette.len() as u32) as usize]).collect()
            } else {
                let mut line: Vec<char> = format_event(&random_event(&mut rng)).chars().collect();
                for _ in 0..=rng.below(6) {
                    let pos = rng.below(line.len() as u32) as usize;
                    line[pos] = palette[rng.below(palette.len() as u32) as usize];
                }
                line.into_iter().collect::<String>()
            };
            match parse_event(&line) {
                Ok(_) => ok += 1,
                Err(_) => err += 1,
            }
        }
        assert_eq!(ok + err, 10_000);
        assert!(err > 0, "fuzz never produced an error, generator too tame");
    });
}

#[test]
fn criterion_08_mode_machine_properties_and_swarm_round() {
    criterion(8, "mode ranks obey escalation rules over 1,000 cases; peers swarm in 1 round", || {
        // Property half: randomized input sequences against rank rules.
        let mut rng = Lcg::new(8001);
        let quiet = 300u64;
        for case in 0..1_000 {
            let mut machine = ModeMachine::new(Timestamp::from_epoch_seconds(0).unwrap(), quiet);
            let mut now = 0i64;
            // Shadow of the sustain rule, re-derived from the contract:
            // an input sustains when its demanded rank meets the current one.
            let mut last_sustain = 0i64;
            for _ in 0..60 {
                now += rng.below(200) as i64;
                let ts = Timestamp::from_epoch_seconds(now).unwrap();
                let before = machine.mode();
                let inputs: Vec<ModeInput<'_>> = match rng.below(8) {
                    0 => vec![ModeInput::Alert(ActionLevel::Info, "lost_link")],
                    1 => vec![ModeInput::Alert(ActionLevel::Elevated, "wifi_deauth")],
                    2 => vec![ModeInput::Alert(ActionLevel::Group, "ddos")],
                    3 => vec![ModeInput::Alert(ActionLevel::Emergency, "gps_spoof")],
                    4 => vec![ModeInput::SwarmNotice],
                    5 => vec![
                        ModeInput::Alert(ActionLevel::Info, "lost_link"),
                        ModeInput::SwarmNotice,
                    ],
                    _ => vec![],
                };
                let target_rank = |i: &ModeInput<'_>| match i {
                    ModeInput::Alert(ActionLevel::Info, _) => 1,
                    ModeInput::Alert(ActionLevel::Elevated, _) => 2,
                    ModeInput::Alert(ActionLevel::Group, _) => 2,
                    ModeInput::Alert(ActionLevel::Emergency, _) => 3,
                    ModeInput::SwarmNotice => {
                        if before.rank() >= 2 {
                            2
                        } else {
                            1
                        }
                    }
                };
                let sustains = inputs.iter().any(|i| target_rank(i) >= before.rank());

                machine.step(&inputs, ts);
                let after = machine.mode();

                if after.rank() > before.rank() {
                    assert!(!inputs.is_empty(), "case {case}: rank rose with no input");
                }
                if after.rank() < before.rank() {
                    assert_eq!(
                        before.rank() - after.rank(),
                        1,
                        "case {case}: de-escalation skipped ranks"
                    );
                    assert!(
                        now - last_sustain >= quiet as i64,
                        "case {case}: de-escalated only {} s after sustain",
                        now - last_sustain
                    );
                    last_sustain = now;
                } else if sustains {
                    last_sustain = now;
                }
            }
        }

        // Scenario half: a Group broadcast puts the in-radius peers in
        // SwarmMonitor exactly one round after the first ddos alert.
        let (spec, sim) = run_shipped("ddos_swarm.scn");
        assert_expectations("ddos_swarm.expect", &sim);
        let first_ddos = sim
            .alerts
            .iter()
            .find(|a| a.rule == "ddos")
            .map(|a| a.emitted.seconds_since(spec.start))
            .expect("ddos alert fired");
        for peer in ["bravo", "charlie"] {
            assert_eq!(sim.report.peak_mode(&drone(peer)), Some(Mode::SwarmMonitor));
            let entered = sim
                .artifacts
                .modes_log
                .lines()
                .find(|l| l.contains(&format!("MODE {peer} Normal -> SwarmMonitor")))
                .map(|l| {
                    l.split_whitespace()
                        .next()
                        .unwrap()
                        .parse::<Timestamp>()
                        .unwrap()
                        .seconds_since(spec.start)
                })
                .expect("peer entered SwarmMonitor");
            assert_eq!(entered, first_ddos + 1, "{peer} needed more than one round");
        }
    });
}

#[test]
fn criterion_09_audit_durability() {
    criterion(9, "audit repository holds a bit-exact 40-tick prefix after link cut and loss", || {
        let (spec, sim) = run_shipped("jam_and_destroy.scn");
        assert_expectations("jam_and_destroy.expect", &sim);

        let bravo_log = &sim
            .artifacts
            .logs
            .iter()
            .find(|(d, _)| d == &drone("bravo"))
            .expect("bravo logged")
            .1;
        let cutoff = spec.start.plus_seconds(40);
        let expected_prefix: Vec<&str> = bravo_log
            .lines()
            .filter(|l| {
                let ts: Timestamp = l.split_whitespace().next().unwrap().parse().unwrap();
                ts < cutoff
            })
            .collect();
        // The drone kept logging after the cut until it was destroyed.
        assert!(bravo_log.lines().count() > expected_prefix.len());

        let forwarded: Vec<&str> = sim
            .artifacts
            .audit_dump
            .lines()
            .filter_map(|l| l.strip_prefix("bravo "))
            .collect();
        assert_eq!(forwarded, expected_prefix, "audit content is not the exact prefix");
        assert_eq!(sim.report.audit_lines_for(&drone("bravo")), expected_prefix.len() as u64);
    });
}

#[test]
fn criterion_10_run_determinism() {
    criterion(10, "two runs of every shipped scenario are bit-identical on disk", || {
        for name in ["baseline.scn", "gps_spoof.scn", "jam_and_destroy.scn", "ddos_swarm.scn"] {
            let spec = load_spec(name);
            let rules = default_ruleset();
            let config = AnalyticsConfig::default();
            let a = simulate(&spec, &rules, &config).unwrap();
            let b = simulate(&spec, &rules, &config).unwrap();

            let dir_a = tempfile::tempdir().unwrap();
            let dir_b = tempfile::tempdir().unwrap();
            write_run_dir(&a, dir_a.path()).unwrap();
            write_run_dir(&b, dir_b.path()).unwrap();

            let mut files_a = collect_files(dir_a.path());
            let mut files_b = collect_files(dir_b.path());
            files_a.sort();
            files_b.sort();
            assert_eq!(
                files_a.iter().map(|(p, _)| p).collect::<Vec<_>>(),
                files_b.iter().map(|(p, _)| p).collect::<Vec<_>>(),
                "{name}: file sets differ"
            );
            assert!(!files_a.is_empty());
            for ((path, bytes_a), (_, bytes_b)) in files_a.iter().zip(files_b.iter()) {
                assert_eq!(bytes_a, bytes_b, "{name}: {path} differs between runs");
            }
        }
    });
}

fn collect_files(root: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let entry = entry.unwrap();
            let path = entry.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().to_string();
                out.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    out
}
