//! Command-line front end: scenario generation, end-to-end runs, emitter
//! localization and detection replay over recorded logs.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use skysentry::analytics::{AnalyticsConfig, AnalyticsEngine};
use skysentry::rules::{default_ruleset, eval_event, parse_rules, SignatureRule};
use skysentry::scenario::{
    check_expectations, generate, parse_scenario, simulate, write_generate_dir, write_run_dir,
};
use skysentry::swarm::{
    bearing_locate, tdoa_locate, BearingObs, PlanarPoint, TimingObs, SPEED_OF_LIGHT_M_S,
};
use skysentry::telemetry::{parse_log, DroneId};

#[derive(Parser)]
#[command(name = "skysentry", version, about = "Drone RF attack sensing engine and simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Tdoa,
    Bearing,
}

#[derive(Subcommand)]
enum Command {
    /// Generate raw adapter streams and the ground-truth sidecar.
    Generate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the full pipeline over a scenario and write all artifacts.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Signature rule file; the built-in default set when omitted.
        #[arg(long)]
        rules: Option<PathBuf>,
        /// Analytics config file; built-in defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Expectations file; exit code 2 if any expectation fails.
        #[arg(long = "assert")]
        assert_file: Option<PathBuf>,
    },
    /// Localize an emitter from an observation file.
    Locate {
        #[arg(long)]
        obs: PathBuf,
        #[arg(long, value_enum)]
        method: MethodArg,
        /// Propagation speed override in m/s (TDoA only).
        #[arg(long)]
        speed: Option<f64>,
    },
    /// Re-run detection over a recorded telemetry log.
    Replay {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        rules: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Drone id to attribute alerts to.
        #[arg(long, default_value = "drone")]
        drone: String,
    },
}

fn load_rules(path: &Option<PathBuf>) -> Result<Vec<SignatureRule>> {
    match path {
        Some(p) => {
            let text = fs::read_to_string(p)
                .with_context(|| format!("reading rules file {}", p.display()))?;
            Ok(parse_rules(&text)?)
        }
        None => Ok(default_ruleset()),
    }
}

fn load_config(path: &Option<PathBuf>) -> Result<AnalyticsConfig> {
    match path {
        Some(p) => {
            let text = fs::read_to_string(p)
                .with_context(|| format!("reading config file {}", p.display()))?;
            Ok(AnalyticsConfig::parse(&text)?)
        }
        None => Ok(AnalyticsConfig::default()),
    }
}

fn cmd_generate(scenario: PathBuf, out: PathBuf) -> Result<()> {
    let text = fs::read_to_string(&scenario)
        .with_context(|| format!("reading scenario {}", scenario.display()))?;
    let spec = parse_scenario(&text)?;
    let generated = generate(&spec);
    write_generate_dir(&generated, &out)?;
    let records: usize = generated.streams.iter().map(|(_, r)| r.len()).sum();
    println!("generated {} raw records for {} drones into {}", records, generated.streams.len(), out.display());
    Ok(())
}

fn cmd_run(
    scenario: PathBuf,
    rules: Option<PathBuf>,
    config: Option<PathBuf>,
    out: PathBuf,
    assert_file: Option<PathBuf>,
) -> Result<ExitCode> {
    let text = fs::read_to_string(&scenario)
        .with_context(|| format!("reading scenario {}", scenario.display()))?;
    let spec = parse_scenario(&text)?;
    let rules = load_rules(&rules)?;
    let config = load_config(&config)?;

    let sim = simulate(&spec, &rules, &config)?;
    write_run_dir(&sim, &out)?;
    print!("{}", sim.report.to_text());

    if let Some(path) = assert_file {
        let expectations = fs::read_to_string(&path)
            .with_context(|| format!("reading expectations {}", path.display()))?;
        let failures = check_expectations(&sim.report, &expectations)?;
        if !failures.is_empty() {
            for f in &failures {
                eprintln!("expectation failed: {f}");
            }
            return Ok(ExitCode::from(2));
        }
        println!("expectations: all passed");
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_locate(obs: PathBuf, method: MethodArg, speed: Option<f64>) -> Result<()> {
    let text =
        fs::read_to_string(&obs).with_context(|| format!("reading observations {}", obs.display()))?;
    let mut timing: Vec<TimingObs> = Vec::new();
    let mut bearings: Vec<BearingObs> = Vec::new();
    let mut file_speed: Option<f64> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        let ctx = || format!("observation line {}", idx + 1);
        match toks.as_slice() {
            ["SPEED", v] => file_speed = Some(v.parse().with_context(ctx)?),
            ["TIME", x, y, t] => timing.push(TimingObs {
                receiver: PlanarPoint::new(
                    x.parse().with_context(ctx)?,
                    y.parse().with_context(ctx)?,
                ),
                arrival_time_s: t.parse().with_context(ctx)?,
            }),
            ["BEARING", x, y, b] => bearings.push(BearingObs {
                receiver: PlanarPoint::new(
                    x.parse().with_context(ctx)?,
                    y.parse().with_context(ctx)?,
                ),
                bearing_deg: b.parse().with_context(ctx)?,
            }),
            _ => bail!("{}: expected `SPEED`, `TIME` or `BEARING` line, got `{line}`", ctx()),
        }
    }

    let estimate = match method {
        MethodArg::Tdoa => {
            let c = speed.or(file_speed).unwrap_or(SPEED_OF_LIGHT_M_S);
            tdoa_locate(&timing, c)?
        }
        MethodArg::Bearing => bearing_locate(&bearings)?,
    };
    println!(
        "method={} x_m={:.6} y_m={:.6} residual={:.6} iterations={}",
        estimate.method,
        estimate.position.x_m,
        estimate.position.y_m,
        estimate.residual,
        estimate.iterations
    );
    Ok(())
}

fn cmd_replay(
    log: PathBuf,
    rules: Option<PathBuf>,
    config: Option<PathBuf>,
    drone: String,
) -> Result<()> {
    let text =
        fs::read_to_string(&log).with_context(|| format!("reading log {}", log.display()))?;
    let events = parse_log(&text)?;
    let rules = load_rules(&rules)?;
    let config = load_config(&config)?;
    let drone: DroneId = drone.parse().map_err(|_| anyhow::anyhow!("invalid drone id"))?;

    let start = events.first().map(|e| e.timestamp).unwrap_or("1970-01-01T00:00:00Z".parse().unwrap());
    let mut engine = AnalyticsEngine::new(drone, &config, start);
    let mut alert_count = 0u64;

    let mut i = 0;
    while i < events.len() {
        let ts = events[i].timestamp;
        let mut tick_alerts = Vec::new();
        while i < events.len() && events[i].timestamp == ts {
            let event = &events[i];
            i += 1;
            let outcome = engine.process_event(event);
            if outcome.rejected_non_monotonic {
                continue;
            }
            if let Some(a) = outcome.trend_alert {
                tick_alerts.push(a);
            }
            tick_alerts.extend(engine.process_matches(&eval_event(&rules, event), ts));
        }
        engine.step_mode(&tick_alerts, 0, ts);
        for a in &tick_alerts {
            println!("{}", a.to_line());
        }
        alert_count += tick_alerts.len() as u64;
    }

    println!("events {}", events.len());
    println!("rejected_non_monotonic {}", engine.rejected_events());
    println!("alerts {alert_count}");
    println!("final_mode {}", engine.mode());
    Ok(())
}

fn main() -> Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Generate { scenario, out } => {
            cmd_generate(scenario, out)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Run { scenario, rules, config, out, assert_file } => {
            cmd_run(scenario, rules, config, out, assert_file)
        }
        Command::Locate { obs, method, speed } => {
            cmd_locate(obs, method, speed)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Replay { log, rules, config, drone } => {
            cmd_replay(log, rules, config, drone)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}
