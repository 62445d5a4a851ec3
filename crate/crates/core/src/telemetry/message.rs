//! Protocol messages in SI units, with their payload layouts.
//!
//! Telemetry payload (42 bytes):
//!
//! | bytes | field        | encoding              |
//! |-------|--------------|-----------------------|
//! | 4     | seq          | u32                   |
//! | 4     | t            | u32 ms                |
//! | 4     | yaw_est      | i32 centiradians      |
//! | 4     | depth_est    | i32 mm                |
//! | 2     | turbidity    | u16 NTU×10, clamped   |
//! | 6     | duties       | 3 × i16 per-mille     |
//! | 1     | mode         | u8                    |
//! | 8     | yaw_gains    | 2 × i32 ×1000         |
//! | 8     | depth_gains  | 2 × i32 ×1000         |
//! | 1     | flags        | bit0 fault, bit1 sat  |
//!
//! Command payload: `seq: u32 | kind: u8 | body`, where kind is 0 set_mode,
//! 1 set_setpoints, 2 set_gains, 3 manual_duties, 4 ping.

use serde::{Deserialize, Serialize};

use super::codec::EncodeError;
use super::fixed::{quantize, quantize_in, restore, CENTI, MILLI, PER_MILLE};
use crate::control::Mode;
use crate::dynamics::ThrusterDuties;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum MsgType {
    Telemetry = 0x01,
    Command = 0x02,
    Log = 0x03,
}

impl MsgType {
    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0x01 => Some(MsgType::Telemetry),
            0x02 => Some(MsgType::Command),
            0x03 => Some(MsgType::Log),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Gains {
    pub kp: f64,
    pub ki: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Flags {
    pub sensor_fault: bool,
    pub saturated: bool,
}

impl Flags {
    pub fn to_bits(self) -> u8 {
        u8::from(self.sensor_fault) | (u8::from(self.saturated) << 1)
    }

    /// Reserved bits are ignored.
    pub fn from_bits(bits: u8) -> Self {
        Self {
            sensor_fault: bits & 0x01 != 0,
            saturated: bits & 0x02 != 0,
        }
    }
}

/// Vehicle-to-surface status, one per control tick.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TelemetryFrame {
    pub seq: u32,
    /// Seconds since run start; millisecond resolution on the wire.
    pub t: f64,
    pub yaw_est: f64,
    pub depth_est: f64,
    /// NTU, clamped to [0, 6553.5] on the wire.
    pub turbidity: f64,
    pub duties: ThrusterDuties,
    pub mode: Mode,
    pub yaw_gains: Gains,
    pub depth_gains: Gains,
    pub flags: Flags,
}

/// Surface-to-vehicle request.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Command {
    SetMode {
        mode: Mode,
    },
    SetSetpoints {
        yaw_ref: f64,
        depth_ref: f64,
        surge_duty: f64,
    },
    SetGains {
        yaw_gains: Gains,
        depth_gains: Gains,
        alpha: f64,
    },
    ManualDuties {
        left: f64,
        right: f64,
        vertical: f64,
    },
    Ping,
}

impl Command {
    pub fn kind_byte(&self) -> u8 {
        match self {
            Command::SetMode { .. } => 0,
            Command::SetSetpoints { .. } => 1,
            Command::SetGains { .. } => 2,
            Command::ManualDuties { .. } => 3,
            Command::Ping => 4,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Command::SetMode { .. } => "set_mode",
            Command::SetSetpoints { .. } => "set_setpoints",
            Command::SetGains { .. } => "set_gains",
            Command::ManualDuties { .. } => "manual_duties",
            Command::Ping => "ping",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommandMessage {
    pub seq: u32,
    #[serde(flatten)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    Telemetry(TelemetryFrame),
    Command(CommandMessage),
    /// Free-form event text, UTF-8.
    Log(String),
}

impl Message {
    pub fn msg_type(&self) -> MsgType {
        match self {
            Message::Telemetry(_) => MsgType::Telemetry,
            Message::Command(_) => MsgType::Command,
            Message::Log(_) => MsgType::Log,
        }
    }

    pub(crate) fn payload(&self) -> Result<Vec<u8>, EncodeError> {
        match self {
            Message::Telemetry(f) => f.payload(),
            Message::Command(c) => c.payload(),
            Message::Log(text) => Ok(text.as_bytes().to_vec()),
        }
    }

    pub(crate) fn parse(msg_type: MsgType, payload: &[u8]) -> Result<Self, String> {
        match msg_type {
            MsgType::Telemetry => TelemetryFrame::parse(payload).map(Message::Telemetry),
            MsgType::Command => CommandMessage::parse(payload).map(Message::Command),
            MsgType::Log => String::from_utf8(payload.to_vec())
                .map(Message::Log)
                .map_err(|_| "log text is not UTF-8".to_string()),
        }
    }
}

fn push_duties(out: &mut Vec<u8>, d: &ThrusterDuties) -> Result<(), EncodeError> {
    for v in [d.left, d.right, d.vertical] {
        let q: i16 = quantize_in(v, PER_MILLE, -1.0, 1.0, "duties")?;
        out.extend_from_slice(&q.to_le_bytes());
    }
    Ok(())
}

fn push_gains(out: &mut Vec<u8>, g: &Gains, field: &'static str) -> Result<(), EncodeError> {
    for v in [g.kp, g.ki] {
        let q: i32 = quantize(v, MILLI, field)?;
        out.extend_from_slice(&q.to_le_bytes());
    }
    Ok(())
}

impl TelemetryFrame {
    pub const PAYLOAD_LEN: usize = 42;

    fn payload(&self) -> Result<Vec<u8>, EncodeError> {
        let mut out = Vec::with_capacity(Self::PAYLOAD_LEN);
        out.extend_from_slice(&self.seq.to_le_bytes());
        out.extend_from_slice(&quantize::<u32>(self.t, MILLI, "t")?.to_le_bytes());
        out.extend_from_slice(&quantize::<i32>(self.yaw_est, CENTI, "yaw_est")?.to_le_bytes());
        out.extend_from_slice(&quantize::<i32>(self.depth_est, MILLI, "depth_est")?.to_le_bytes());
        if self.turbidity.is_nan() {
            return Err(EncodeError::OutOfRange {
                field: "turbidity",
                value: self.turbidity,
            });
        }
        let turbidity = (self.turbidity * 10.0).round().clamp(0.0, u16::MAX as f64) as u16;
        out.extend_from_slice(&turbidity.to_le_bytes());
        push_duties(&mut out, &self.duties)?;
        out.push(self.mode.as_u8());
        push_gains(&mut out, &self.yaw_gains, "yaw_gains")?;
        push_gains(&mut out, &self.depth_gains, "depth_gains")?;
        out.push(self.flags.to_bits());
        Ok(out)
    }

    fn parse(p: &[u8]) -> Result<Self, String> {
        if p.len() != Self::PAYLOAD_LEN {
            return Err(format!(
                "telemetry payload is {} bytes, expected 42",
                p.len()
            ));
        }
        let mut r = Reader(p);
        let seq = r.u32();
        let t = restore(r.u32(), MILLI);
        let yaw_est = restore(r.i32(), CENTI);
        let depth_est = restore(r.i32(), MILLI);
        let turbidity = restore(r.u16(), 10.0);
        let duties = r.duties()?;
        let mode_byte = r.u8();
        let mode = Mode::from_u8(mode_byte).ok_or(format!("unknown mode {mode_byte}"))?;
        let yaw_gains = Gains {
            kp: restore(r.i32(), MILLI),
            ki: restore(r.i32(), MILLI),
        };
        let depth_gains = Gains {
            kp: restore(r.i32(), MILLI),
            ki: restore(r.i32(), MILLI),
        };
        let flags = Flags::from_bits(r.u8());
        Ok(Self {
            seq,
            t,
            yaw_est,
            depth_est,
            turbidity,
            duties,
            mode,
            yaw_gains,
            depth_gains,
            flags,
        })
    }
}

impl CommandMessage {
    pub fn new(seq: u32, command: Command) -> Self {
        Self { seq, command }
    }

    fn payload(&self) -> Result<Vec<u8>, EncodeError> {
        let mut out = Vec::with_capacity(25);
        out.extend_from_slice(&self.seq.to_le_bytes());
        out.push(self.command.kind_byte());
        match &self.command {
            Command::SetMode { mode } => out.push(mode.as_u8()),
            Command::SetSetpoints {
                yaw_ref,
                depth_ref,
                surge_duty,
            } => {
                out.extend_from_slice(&quantize::<i32>(*yaw_ref, CENTI, "yaw_ref")?.to_le_bytes());
                let depth: i32 = quantize_in(*depth_ref, MILLI, 0.0, f64::MAX, "depth_ref")?;
                out.extend_from_slice(&depth.to_le_bytes());
                let surge: i16 = quantize_in(*surge_duty, PER_MILLE, -1.0, 1.0, "surge_duty")?;
                out.extend_from_slice(&surge.to_le_bytes());
            }
            Command::SetGains {
                yaw_gains,
                depth_gains,
                alpha,
            } => {
                push_gains(&mut out, yaw_gains, "yaw_gains")?;
                push_gains(&mut out, depth_gains, "depth_gains")?;
                let a: i32 = quantize_in(*alpha, MILLI, 0.0, 1.0, "alpha")?;
                out.extend_from_slice(&a.to_le_bytes());
            }
            Command::ManualDuties {
                left,
                right,
                vertical,
            } => {
                let d = ThrusterDuties {
                    left: *left,
                    right: *right,
                    vertical: *vertical,
                };
                push_duties(&mut out, &d)?;
            }
            Command::Ping => {}
        }
        Ok(out)
    }

    fn parse(p: &[u8]) -> Result<Self, String> {
        if p.len() < 5 {
            return Err("command payload shorter than header".into());
        }
        let mut r = Reader(p);
        let seq = r.u32();
        let kind = r.u8();
        let expected = match kind {
            0 => 1,
            1 => 10,
            2 => 20,
            3 => 6,
            4 => 0,
            other => return Err(format!("unknown command kind {other}")),
        };
        if r.0.len() != expected {
            return Err(format!(
                "command kind {kind} body is {} bytes, expected {expected}",
                r.0.len()
            ));
        }
        let command = match kind {
            0 => {
                let m = r.u8();
                Command::SetMode {
                    mode: Mode::from_u8(m).ok_or(format!("unknown mode {m}"))?,
                }
            }
            1 => {
                let yaw_ref = restore(r.i32(), CENTI);
                let depth_ref = restore(r.i32(), MILLI);
                let surge = r.i16();
                if !(-1000..=1000).contains(&surge) {
                    return Err(format!("surge_duty {surge} per-mille out of range"));
                }
                if depth_ref < 0.0 {
                    return Err("negative depth_ref".into());
                }
                Command::SetSetpoints {
                    yaw_ref,
                    depth_ref,
                    surge_duty: restore(surge, PER_MILLE),
                }
            }
            2 => {
                let yaw_gains = Gains {
                    kp: restore(r.i32(), MILLI),
                    ki: restore(r.i32(), MILLI),
                };
                let depth_gains = Gains {
                    kp: restore(r.i32(), MILLI),
                    ki: restore(r.i32(), MILLI),
                };
                let alpha = r.i32();
                if !(0..=1000).contains(&alpha) {
                    return Err(format!("alpha {alpha}/1000 out of range"));
                }
                Command::SetGains {
                    yaw_gains,
                    depth_gains,
                    alpha: restore(alpha, MILLI),
                }
            }
            3 => {
                let d = r.duties()?;
                Command::ManualDuties {
                    left: d.left,
                    right: d.right,
                    vertical: d.vertical,
                }
            }
            _ => Command::Ping,
        };
        Ok(Self { seq, command })
    }
}

/// Little-endian cursor over a payload whose length was checked up front.
struct Reader<'a>(&'a [u8]);

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> [u8; N] {
        let (head, rest) = self.0.split_at(N);
        self.0 = rest;
        head.try_into().expect("split_at returned N bytes")
    }
    fn u8(&mut self) -> u8 {
        self.take::<1>()[0]
    }
    fn u16(&mut self) -> u16 {
        u16::from_le_bytes(self.take())
    }
    fn i16(&mut self) -> i16 {
        i16::from_le_bytes(self.take())
    }
    fn u32(&mut self) -> u32 {
        u32::from_le_bytes(self.take())
    }
    fn i32(&mut self) -> i32 {
        i32::from_le_bytes(self.take())
    }
    fn duties(&mut self) -> Result<ThrusterDuties, String> {
        let raw = [self.i16(), self.i16(), self.i16()];
        if raw.iter().any(|d| !(-1000..=1000).contains(d)) {
            return Err(format!("duty per-mille out of range: {raw:?}"));
        }
        Ok(ThrusterDuties {
            left: restore(raw[0], PER_MILLE),
            right: restore(raw[1], PER_MILLE),
            vertical: restore(raw[2], PER_MILLE),
        })
    }
}
