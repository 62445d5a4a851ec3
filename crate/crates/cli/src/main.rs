//! `rov`: batch scenario runs, the live tether service and protocol debugging.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use rov_core::harness::{run_scenario, HarnessError, Scenario};
use rov_core::telemetry::json::JsonMessage;
use rov_core::telemetry::{decode_stream, Message};
use rov_server::{serve, Pace, ServeConfig, ServerError, DEFAULT_TCP_PORT, DEFAULT_WS_PORT};

const EXIT_SCENARIO: u8 = 2;
const EXIT_DIVERGED: u8 = 3;

#[derive(Parser)]
#[command(
    name = "rov",
    version,
    about = "Tethered ROV simulator, controller and tether protocol"
)]
struct Cli {
    #[command(subcommand)]
    command: Top,
}

#[derive(Subcommand)]
enum Top {
    /// Run or serve the simulation.
    #[command(subcommand)]
    Sim(SimCommand),
    /// Tether protocol tools.
    #[command(subcommand)]
    Proto(ProtoCommand),
}

#[derive(Subcommand)]
enum SimCommand {
    /// Run a scenario faster than real time and report the outcome.
    Run {
        /// Built-in scenario name or path to a scenario JSON file.
        #[arg(long)]
        scenario: String,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Write the per-tick log as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print step-response metrics as JSON.
        #[arg(long)]
        metrics: bool,
    },
    /// Serve a live session over the raw tether and the dashboard bridge.
    Serve {
        #[arg(long, default_value_t = DEFAULT_TCP_PORT)]
        tcp_port: u16,
        #[arg(long, default_value_t = DEFAULT_WS_PORT)]
        ws_port: u16,
        /// Scenario JSON file (or built-in name) supplying vehicle, noise and link settings.
        #[arg(long)]
        scenario: Option<String>,
        /// Lock control ticks to the wall clock.
        #[arg(long)]
        realtime: bool,
        /// Address to bind both listeners on.
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
    },
}

#[derive(Subcommand)]
enum ProtoCommand {
    /// Decode a hex dump of tether bytes and print each message as JSON.
    Decode {
        /// File of hex digits; whitespace, commas and `0x` prefixes are ignored.
        hexfile: PathBuf,
    },
}

enum Failure {
    Scenario(String),
    Diverged(String),
    Other(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e.exit_code() {
            2 => Failure::Scenario(e.to_string()),
            3 => Failure::Diverged(e.to_string()),
            _ => Failure::Other(e.into()),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Top::Sim(SimCommand::Run {
            scenario,
            seed,
            out,
            metrics,
        }) => sim_run(&scenario, seed, out, metrics),
        Top::Sim(SimCommand::Serve {
            tcp_port,
            ws_port,
            scenario,
            realtime,
            host,
        }) => sim_serve(host, tcp_port, ws_port, scenario, realtime),
        Top::Proto(ProtoCommand::Decode { hexfile }) => proto_decode(&hexfile),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Scenario(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_SCENARIO)
        }
        Err(Failure::Diverged(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_DIVERGED)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn sim_run(
    name: &str,
    seed: Option<u64>,
    out: Option<PathBuf>,
    metrics: bool,
) -> Result<(), Failure> {
    let mut scenario = Scenario::load(name)?;
    if let Some(seed) = seed {
        scenario.seed = seed;
    }
    let log = run_scenario(&scenario)?;
    if let Some(path) = &out {
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        let mut w = BufWriter::new(file);
        log.write_csv(&mut w)?;
        w.flush()
            .with_context(|| format!("writing {}", path.display()))?;
    }
    let last = log.rows.last().map(|r| r.truth).unwrap_or_default();
    println!(
        "{}: {} ticks, seed {}, final t={:.2} s depth={:.3} m yaw={:.4} rad u={:.3} m/s",
        log.scenario,
        log.rows.len(),
        log.seed,
        last.t,
        last.depth,
        last.yaw,
        last.u
    );
    let l = log.link;
    println!(
        "link: telemetry {}/{} received, {} surface decode errors; commands {} sent, {} applied, {} rejected",
        l.telemetry_received,
        l.telemetry_sent,
        l.surface_decode_errors,
        l.commands_sent,
        l.commands_applied,
        l.commands_rejected
    );
    for e in &log.events {
        println!("event: {e}");
    }
    if metrics {
        let summary = log.step_summary();
        println!(
            "{}",
            serde_json::to_string_pretty(&summary).context("serializing metrics")?
        );
    }
    Ok(())
}

fn sim_serve(
    host: std::net::IpAddr,
    tcp_port: u16,
    ws_port: u16,
    scenario: Option<String>,
    realtime: bool,
) -> Result<(), Failure> {
    let scenario = match scenario {
        Some(s) => Scenario::load(&s)?,
        None => Scenario::new("live", 1.0),
    };
    let pace = if realtime {
        Pace::realtime()
    } else {
        Pace::Free
    };
    let config = ServeConfig {
        tcp_addr: (host, tcp_port).into(),
        ws_addr: (host, ws_port).into(),
        scenario,
        pace,
    };
    let runtime = tokio::runtime::Runtime::new().context("starting async runtime")?;
    runtime.block_on(async {
        let handle = serve(config).await.map_err(server_failure)?;
        println!("raw tether: tcp://{}", handle.tcp_addr);
        println!("dashboard bridge: ws://{}/ws", handle.ws_addr);
        let ctrl_c = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        handle.run_until(ctrl_c).await.map_err(server_failure)
    })
}

fn server_failure(e: ServerError) -> Failure {
    match e {
        ServerError::Scenario(m) => Failure::Scenario(m),
        ServerError::Session(rov_core::session::SessionError::Diverged { .. }) => {
            Failure::Diverged(e.to_string())
        }
        other => Failure::Other(other.into()),
    }
}

fn parse_hex(text: &str) -> anyhow::Result<Vec<u8>> {
    let digits: String = text
        .split(|c: char| c.is_whitespace() || c == ',')
        .map(|tok| tok.trim_start_matches("0x").trim_start_matches("0X"))
        .collect();
    hex::decode(&digits).context("invalid hex dump")
}

fn proto_decode(path: &PathBuf) -> Result<(), Failure> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let bytes = parse_hex(&text)?;
    let out = decode_stream(&bytes);
    for m in &out.messages {
        let json = match m.clone() {
            Message::Telemetry(frame) => {
                JsonMessage::Telemetry(rov_core::telemetry::json::TelemetryJson {
                    frame,
                    truth: None,
                })
            }
            Message::Command(c) => JsonMessage::Command(c),
            Message::Log(text) => JsonMessage::Log { text },
        };
        println!("{}", json.to_text());
    }
    for e in &out.errors {
        eprintln!("offset {}: {:?}", e.offset, e.kind);
    }
    if !out.remainder.is_empty() {
        eprintln!(
            "{} trailing bytes of an incomplete frame",
            out.remainder.len()
        );
    }
    eprintln!(
        "{} messages, {} errors",
        out.messages.len(),
        out.errors.len()
    );
    Ok(())
}
