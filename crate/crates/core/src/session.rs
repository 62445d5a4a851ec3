//! One simulated vehicle with its onboard loop and both tether directions.
//!
//! Each control tick runs in a fixed order:
//!
//! 1. bytes due on the uplink are decoded and applied, in arrival order;
//! 2. sensors are sampled from ground truth;
//! 3. heading filter and depth average are updated;
//! 4. the controller produces thruster duties;
//! 5. a telemetry frame reflecting steps 1-4 is queued on the downlink;
//! 6. the plant advances by [`SUBSTEPS_PER_TICK`] integration steps.
//!
//! A command that reaches the vehicle before tick `k` is therefore echoed in
//! the telemetry of tick `k`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::{control_step, ControlError, ControlSetpoints, Mode, PIGains, PiLoop};
use crate::dynamics::{step, DynamicsError, ThrusterDuties, VehicleParams, VehicleState};
use crate::estimation::{check_alpha, filter_update, DepthAverage, FilterState, DEFAULT_ALPHA};
use crate::sensors::{
    depth_from_pressure, voltage_to_ntu, NoiseConfig, SensorFrame, SensorSuite, TurbidityField,
};
use crate::telemetry::json::SimTruth;
use crate::telemetry::link::{Link, LinkConfig, LinkStats};
use crate::telemetry::{
    encode_frame, Command, CommandMessage, DecodeError, EncodeError, Flags, Gains, Message,
    StreamDecoder, TelemetryFrame,
};
use crate::{CONTROL_DT, SIM_DT, SUBSTEPS_PER_TICK};

/// Pressure readings implying a depth this far outside the water column are
/// flagged as a sensor fault.
const DEPTH_FAULT_MARGIN: f64 = 1.0;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("simulation diverged at tick {tick}: {source}")]
    Diverged {
        tick: u64,
        #[source]
        source: DynamicsError,
    },
    #[error("control failure at tick {tick}: {source}")]
    Control {
        tick: u64,
        #[source]
        source: ControlError,
    },
    #[error("telemetry encoding failed at tick {tick}: {source}")]
    Encode {
        tick: u64,
        #[source]
        source: EncodeError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlConfig {
    pub yaw_gains: PIGains,
    pub depth_gains: PIGains,
    pub alpha: f64,
}

impl Default for ControlConfig {
    fn default() -> Self {
        Self {
            yaw_gains: PIGains::default_yaw(),
            depth_gains: PIGains::default_depth(),
            alpha: DEFAULT_ALPHA,
        }
    }
}

/// Everything needed to start a session. `seed` drives the sensor noise and
/// both link shims through independent streams.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SessionConfig {
    pub params: VehicleParams,
    pub noise: NoiseConfig,
    pub field: TurbidityField,
    pub control: ControlConfig,
    pub link: LinkConfig,
    pub initial_state: VehicleState,
    pub seed: u64,
}

/// One row of the run log: what the vehicle saw and did during a tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TickRow {
    pub tick: u64,
    /// Ground truth at the start of the tick.
    pub truth: VehicleState,
    pub sensors: SensorFrame,
    pub yaw_est: f64,
    pub depth_est: f64,
    pub turbidity_ntu: f64,
    pub setpoints: ControlSetpoints,
    pub duties: ThrusterDuties,
    pub flags: Flags,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CommandOutcome {
    Applied(CommandMessage),
    Rejected(CommandMessage, String),
}

#[derive(Debug, Clone)]
pub struct TickOutput {
    pub row: TickRow,
    pub telemetry: TelemetryFrame,
    /// Downlink bytes that reached the surface this tick.
    pub downlink: Vec<u8>,
    pub commands: Vec<CommandOutcome>,
    /// Framing problems seen by the vehicle on the uplink.
    pub uplink_errors: Vec<DecodeError>,
}

pub struct VehicleSession {
    params: VehicleParams,
    field: TurbidityField,
    sensors: SensorSuite,
    filter: Option<FilterState>,
    alpha: f64,
    depth_avg: DepthAverage,
    yaw_pi: PiLoop,
    depth_pi: PiLoop,
    setpoints: ControlSetpoints,
    state: VehicleState,
    tick: u64,
    telemetry_seq: u32,
    uplink: Link,
    downlink: Link,
    uplink_decoder: StreamDecoder,
}

fn derive_seed(seed: u64, stream: u64) -> u64 {
    seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

impl VehicleSession {
    pub fn new(config: SessionConfig) -> Result<Self, SessionError> {
        let cfg_err = |e: String| SessionError::Config(e);
        config
            .params
            .validate()
            .map_err(|e| cfg_err(e.to_string()))?;
        config
            .control
            .yaw_gains
            .validate()
            .map_err(|e| cfg_err(format!("yaw_gains: {e}")))?;
        config
            .control
            .depth_gains
            .validate()
            .map_err(|e| cfg_err(format!("depth_gains: {e}")))?;
        check_alpha(config.control.alpha).map_err(|e| cfg_err(e.to_string()))?;
        config.link.validate().map_err(cfg_err)?;
        let mut initial = config.initial_state;
        if !initial.is_finite() {
            return Err(cfg_err("initial_state must be finite".into()));
        }
        if !(0.0..=config.params.max_depth).contains(&initial.depth) {
            return Err(cfg_err("initial depth outside [0, max_depth]".into()));
        }
        initial.yaw = crate::angle::wrap(initial.yaw);

        let noise = NoiseConfig {
            seed: derive_seed(config.seed, 0),
            ..config.noise
        };
        let sensors =
            SensorSuite::new(noise, &config.params).map_err(|e| cfg_err(e.to_string()))?;
        Ok(Self {
            params: config.params,
            field: config.field,
            sensors,
            filter: None,
            alpha: config.control.alpha,
            depth_avg: DepthAverage::new(),
            yaw_pi: PiLoop::new(config.control.yaw_gains),
            depth_pi: PiLoop::new(config.control.depth_gains),
            setpoints: ControlSetpoints::default(),
            state: initial,
            tick: 0,
            telemetry_seq: 0,
            uplink: Link::new(config.link, derive_seed(config.seed, 1)),
            downlink: Link::new(config.link, derive_seed(config.seed, 2)),
            uplink_decoder: StreamDecoder::new(),
        })
    }

    pub fn params(&self) -> &VehicleParams {
        &self.params
    }

    pub fn state(&self) -> &VehicleState {
        &self.state
    }

    pub fn setpoints(&self) -> &ControlSetpoints {
        &self.setpoints
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn tick_count(&self) -> u64 {
        self.tick
    }

    pub fn truth(&self) -> SimTruth {
        SimTruth {
            x: self.state.x,
            y: self.state.y,
            depth: self.state.depth,
            yaw: self.state.yaw,
        }
    }

    pub fn link_stats(&self) -> (LinkStats, LinkStats) {
        (self.uplink.stats(), self.downlink.stats())
    }

    /// Queues raw bytes on the uplink at the current simulation time.
    pub fn submit_bytes(&mut self, bytes: Vec<u8>) {
        self.uplink.send(self.state.t, bytes);
    }

    pub fn submit(&mut self, cmd: &CommandMessage) -> Result<(), EncodeError> {
        let bytes = encode_frame(&Message::Command(*cmd))?;
        self.submit_bytes(bytes);
        Ok(())
    }

    fn apply(&mut self, cmd: &CommandMessage) -> Result<(), String> {
        match cmd.command {
            Command::SetMode { mode } => self.set_mode(mode),
            Command::SetSetpoints {
                yaw_ref,
                depth_ref,
                surge_duty,
            } => {
                let sp = ControlSetpoints {
                    yaw_ref,
                    depth_ref,
                    surge_duty,
                    ..self.setpoints
                };
                self.setpoints = sp
                    .validated(self.params.max_depth)
                    .map_err(|e| e.to_string())?;
            }
            Command::SetGains {
                yaw_gains,
                depth_gains,
                alpha,
            } => {
                check_alpha(alpha).map_err(|e| e.to_string())?;
                let with = |g: PIGains, new: Gains| PIGains {
                    kp: new.kp,
                    ki: new.ki,
                    ..g
                };
                let yaw = with(self.yaw_pi.gains, yaw_gains);
                let depth = with(self.depth_pi.gains, depth_gains);
                yaw.validate().map_err(|e| format!("yaw_gains: {e}"))?;
                depth.validate().map_err(|e| format!("depth_gains: {e}"))?;
                self.yaw_pi.gains = yaw;
                self.depth_pi.gains = depth;
                self.alpha = alpha;
            }
            Command::ManualDuties {
                left,
                right,
                vertical,
            } => {
                // Carries its own mode switch so an all-stop is one message.
                self.setpoints.manual_duties =
                    ThrusterDuties::clamped(left, right, vertical).map_err(|e| e.to_string())?;
                self.set_mode(Mode::Manual);
            }
            Command::Ping => {}
        }
        Ok(())
    }

    fn set_mode(&mut self, mode: Mode) {
        if mode == Mode::ClosedLoop && self.setpoints.mode != Mode::ClosedLoop {
            self.yaw_pi.state = Default::default();
            self.depth_pi.state = Default::default();
        }
        self.setpoints.mode = mode;
    }

    pub fn tick(&mut self) -> Result<TickOutput, SessionError> {
        let tick = self.tick;
        let now = self.state.t;

        let incoming = self.uplink.poll(now);
        let decoded = self.uplink_decoder.push(&incoming);
        let mut commands = Vec::new();
        for msg in decoded.messages {
            if let Message::Command(cmd) = msg {
                commands.push(match self.apply(&cmd) {
                    Ok(()) => CommandOutcome::Applied(cmd),
                    Err(e) => CommandOutcome::Rejected(cmd, e),
                });
            }
        }

        let frame = self.sensors.sample(&self.state, &self.field);
        let filter = match self.filter {
            None => FilterState {
                yaw_est: frame.mag_yaw,
                alpha: self.alpha,
            },
            Some(fs) => filter_update(
                FilterState {
                    alpha: self.alpha,
                    ..fs
                },
                frame.gyro_z,
                frame.mag_yaw,
                CONTROL_DT,
            )
            .map_err(|e| SessionError::Config(e.to_string()))?,
        };
        self.filter = Some(filter);

        let measured = depth_from_pressure(
            frame.pressure,
            self.params.water_density,
            self.params.gravity,
        )
        .map_err(|e| SessionError::Config(e.to_string()))?;
        let sensor_fault =
            measured < -DEPTH_FAULT_MARGIN || measured > self.params.max_depth + DEPTH_FAULT_MARGIN;
        let depth_est = self.depth_avg.push(measured);
        let turbidity_ntu = voltage_to_ntu(frame.turbidity_voltage).unwrap_or(0.0);

        let out = control_step(
            &self.setpoints,
            filter.yaw_est,
            depth_est,
            &self.yaw_pi,
            &self.depth_pi,
            CONTROL_DT,
        )
        .map_err(|source| SessionError::Control { tick, source })?;
        self.yaw_pi.state = out.yaw_state;
        self.depth_pi.state = out.depth_state;
        let flags = Flags {
            sensor_fault,
            saturated: out.saturated,
        };

        let telemetry = TelemetryFrame {
            seq: self.telemetry_seq,
            t: now,
            yaw_est: filter.yaw_est,
            depth_est,
            turbidity: turbidity_ntu,
            duties: out.duties,
            mode: self.setpoints.mode,
            yaw_gains: Gains {
                kp: self.yaw_pi.gains.kp,
                ki: self.yaw_pi.gains.ki,
            },
            depth_gains: Gains {
                kp: self.depth_pi.gains.kp,
                ki: self.depth_pi.gains.ki,
            },
            flags,
        };
        let bytes = encode_frame(&Message::Telemetry(telemetry))
            .map_err(|source| SessionError::Encode { tick, source })?;
        self.telemetry_seq = self.telemetry_seq.wrapping_add(1);
        self.downlink.send(now, bytes);
        let downlink = self.downlink.poll(now);

        let row = TickRow {
            tick,
            truth: self.state,
            sensors: frame,
            yaw_est: filter.yaw_est,
            depth_est,
            turbidity_ntu,
            setpoints: self.setpoints,
            duties: out.duties,
            flags,
        };

        self.state = advance(&self.state, &out.duties, &self.params)
            .map_err(|source| SessionError::Diverged { tick, source })?;
        self.tick += 1;

        Ok(TickOutput {
            row,
            telemetry,
            downlink,
            commands,
            uplink_errors: decoded.errors,
        })
    }
}

/// Holds `duties` over one control period of plant substeps.
pub fn advance(
    state: &VehicleState,
    duties: &ThrusterDuties,
    params: &VehicleParams,
) -> Result<VehicleState, DynamicsError> {
    let mut s = *state;
    for _ in 0..SUBSTEPS_PER_TICK {
        s = step(&s, duties, params, SIM_DT)?;
    }
    Ok(s)
}
