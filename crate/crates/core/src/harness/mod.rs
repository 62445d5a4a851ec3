//! Scenario runner: drives a [`VehicleSession`] from a timed command script
//! through the tether loopback and records every tick.

mod builtin;
mod log;
mod metrics;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use builtin::{builtin, BUILTIN_NAMES};
pub use log::{replay, LinkSummary, RunLog, CSV_HEADER};
pub use metrics::{
    compute_step_metrics, detect_steps, step_response, Channel, StepMetrics, StepResponse,
};

use crate::dynamics::{VehicleParams, VehicleState};
use crate::sensors::{NoiseConfig, TurbidityField};
use crate::session::{CommandOutcome, ControlConfig, SessionConfig, SessionError, VehicleSession};
use crate::telemetry::link::LinkConfig;
use crate::telemetry::{Command, CommandMessage, Message, StreamDecoder};
use crate::CONTROL_DT;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("scenario error: {0}")]
    Scenario(String),
    #[error("simulation diverged at tick {tick}: {reason}")]
    Diverged { tick: u64, reason: String },
    #[error("metrics: {0}")]
    Metrics(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl HarnessError {
    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Diverged { .. } => 3,
            HarnessError::Scenario(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptEntry {
    /// Seconds from run start.
    pub at: f64,
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    /// Simulated seconds.
    pub duration: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub params: VehicleParams,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub field: TurbidityField,
    #[serde(default)]
    pub control: ControlConfig,
    #[serde(default)]
    pub link: LinkConfig,
    #[serde(default)]
    pub initial_state: VehicleState,
    #[serde(default)]
    pub script: Vec<ScriptEntry>,
}

impl Scenario {
    pub fn new(name: &str, duration: f64) -> Self {
        Self {
            name: name.to_string(),
            duration,
            seed: 0,
            params: VehicleParams::default(),
            noise: NoiseConfig::default(),
            field: TurbidityField::default(),
            control: ControlConfig::default(),
            link: LinkConfig::default(),
            initial_state: VehicleState::default(),
            script: Vec::new(),
        }
    }

    pub fn at(mut self, at: f64, command: Command) -> Self {
        self.script.push(ScriptEntry { at, command });
        self
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::Scenario(e.to_string()))
    }

    /// Resolves a built-in name first, then falls back to a JSON file path.
    pub fn load(name_or_path: &str) -> Result<Self, HarnessError> {
        if let Some(s) = builtin(name_or_path) {
            return Ok(s);
        }
        let path = Path::new(name_or_path);
        let text = std::fs::read_to_string(path).map_err(|e| {
            HarnessError::Scenario(format!(
                "`{name_or_path}` is neither a built-in scenario nor a readable file: {e}"
            ))
        })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Scenario(m));
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return bad(format!("duration must be > 0, got {}", self.duration));
        }
        let mut prev = 0.0;
        for (i, e) in self.script.iter().enumerate() {
            if !(e.at.is_finite() && e.at >= prev) {
                return bad(format!(
                    "script entry {i}: times must be non-decreasing and >= 0"
                ));
            }
            if e.at > self.duration {
                return bad(format!("script entry {i}: at = {} exceeds duration", e.at));
            }
            prev = e.at;
        }
        self.params
            .validate()
            .map_err(|e| HarnessError::Scenario(e.to_string()))?;
        self.noise
            .validate()
            .map_err(|e| HarnessError::Scenario(e.to_string()))?;
        self.link.validate().map_err(HarnessError::Scenario)?;
        Ok(())
    }

    pub fn session_config(&self) -> SessionConfig {
        SessionConfig {
            params: self.params,
            noise: self.noise,
            field: self.field,
            control: self.control,
            link: self.link,
            initial_state: self.initial_state,
            seed: self.seed,
        }
    }

    pub fn ticks(&self) -> u64 {
        (self.duration / CONTROL_DT).round() as u64
    }
}

/// Runs the scenario through the full stack. Script commands are encoded and
/// sent up the tether; telemetry comes back down and is decoded at the surface.
pub fn run_scenario(scenario: &Scenario) -> Result<RunLog, HarnessError> {
    scenario.validate()?;
    let mut session = VehicleSession::new(scenario.session_config()).map_err(|e| match e {
        SessionError::Config(m) => HarnessError::Scenario(m),
        other => HarnessError::Scenario(other.to_string()),
    })?;
    let mut surface = StreamDecoder::new();
    let mut link = LinkSummary::default();
    let mut events = Vec::new();
    let mut rows = Vec::with_capacity(scenario.ticks() as usize);
    let mut script = scenario.script.iter().peekable();
    let mut seq = 0u32;

    for k in 0..scenario.ticks() {
        let now = k as f64 * CONTROL_DT;
        while let Some(entry) = script.next_if(|e| e.at <= now + 1e-9) {
            seq += 1;
            session
                .submit(&CommandMessage::new(seq, entry.command))
                .map_err(|e| {
                    HarnessError::Scenario(format!("script command at {}: {e}", entry.at))
                })?;
            link.commands_sent += 1;
        }

        let out = session.tick().map_err(|e| match e {
            SessionError::Diverged { tick, source } => HarnessError::Diverged {
                tick,
                reason: source.to_string(),
            },
            SessionError::Config(m) => HarnessError::Scenario(m),
            other => HarnessError::Diverged {
                tick: k,
                reason: other.to_string(),
            },
        })?;

        for c in &out.commands {
            match c {
                CommandOutcome::Applied(_) => link.commands_applied += 1,
                CommandOutcome::Rejected(cmd, why) => {
                    link.commands_rejected += 1;
                    events.push(format!(
                        "t={:.2}: rejected {} (seq {}): {why}",
                        out.row.truth.t,
                        cmd.command.kind_name(),
                        cmd.seq
                    ));
                }
            }
        }
        link.vehicle_decode_errors += out.uplink_errors.len() as u64;
        link.telemetry_sent += 1;
        let decoded = surface.push(&out.downlink);
        link.telemetry_received += decoded
            .messages
            .iter()
            .filter(|m| matches!(m, Message::Telemetry(_)))
            .count() as u64;
        link.surface_decode_errors += decoded.errors.len() as u64;
        rows.push(out.row);
    }

    Ok(RunLog {
        scenario: scenario.name.clone(),
        seed: scenario.seed,
        params: scenario.params,
        rows,
        link,
        events,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::Mode;

    #[test]
    fn idle_noiseless_run_sits_at_surface() {
        let mut s = Scenario::new("idle", 2.0);
        s.noise = NoiseConfig::noiseless();
        let log = run_scenario(&s).unwrap();
        assert_eq!(log.rows.len(), 100);
        let first = log.rows[0].truth;
        for (k, r) in log.rows.iter().enumerate() {
            assert_eq!(r.tick, k as u64);
            assert_eq!(r.truth.depth, 0.0);
            assert_eq!(
                VehicleState {
                    t: first.t,
                    ..r.truth
                },
                first
            );
        }
        assert_eq!(log.link.telemetry_received, 100);
    }

    #[test]
    fn script_validation() {
        let s = Scenario::new("bad", 1.0)
            .at(0.5, Command::Ping)
            .at(0.2, Command::Ping);
        assert!(matches!(run_scenario(&s), Err(HarnessError::Scenario(_))));
        let s = Scenario::new("late", 1.0).at(2.0, Command::Ping);
        assert!(run_scenario(&s).is_err());
        assert!(run_scenario(&Scenario::new("empty", 0.0)).is_err());
    }

    #[test]
    fn rejected_commands_are_logged() {
        let s = Scenario::new("reject", 0.5)
            .at(
                0.0,
                Command::SetMode {
                    mode: Mode::ClosedLoop,
                },
            )
            .at(
                0.1,
                Command::SetSetpoints {
                    yaw_ref: 0.0,
                    depth_ref: 50.0,
                    surge_duty: 0.0,
                },
            );
        let log = run_scenario(&s).unwrap();
        assert_eq!(log.link.commands_rejected, 1);
        assert_eq!(log.events.len(), 1);
    }

    #[test]
    fn divergence_maps_to_exit_code_3() {
        let mut s = Scenario::new("blowup", 1.0);
        s.initial_state.u = 1e200;
        let err = run_scenario(&s).unwrap_err();
        assert_eq!(err.exit_code(), 3);
        assert!(matches!(err, HarnessError::Diverged { tick: 0, .. }));
    }

    #[test]
    fn scenario_json_round_trip() {
        let s = builtin("yaw_step_30deg").unwrap();
        let text = serde_json::to_string_pretty(&s).unwrap();
        assert_eq!(Scenario::from_json(&text).unwrap(), s);
        let minimal = Scenario::from_json(r#"{"name":"m","duration":1.5}"#).unwrap();
        assert_eq!(minimal.params, VehicleParams::default());
        assert!(Scenario::from_json(r#"{"name":"m","duration":1,"extra":0}"#).is_err());
    }
}
