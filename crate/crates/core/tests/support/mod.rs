//! Test-only helpers shared by the integration targets.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rov_core::control::Mode;
use rov_core::dynamics::ThrusterDuties;
use rov_core::telemetry::{Command, CommandMessage, Flags, Gains, Message, TelemetryFrame};

/// Bit-at-a-time CRC-16/CCITT-FALSE, written straight from the polynomial.
pub fn crc16_bitwise(data: &[u8]) -> u16 {
    let mut crc: u16 = 0xFFFF;
    for &byte in data {
        crc ^= (byte as u16) << 8;
        for _ in 0..8 {
            crc = if crc & 0x8000 != 0 {
                (crc << 1) ^ 0x1021
            } else {
                crc << 1
            };
        }
    }
    crc
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A value on the wire grid: `k / scale` for an integer `k` in `[lo, hi]`.
fn grid(r: &mut ChaCha8Rng, lo: i64, hi: i64, scale: f64) -> f64 {
    r.random_range(lo..=hi) as f64 / scale
}

fn duties(r: &mut ChaCha8Rng) -> ThrusterDuties {
    ThrusterDuties {
        left: grid(r, -1000, 1000, 1000.0),
        right: grid(r, -1000, 1000, 1000.0),
        vertical: grid(r, -1000, 1000, 1000.0),
    }
}

fn gains(r: &mut ChaCha8Rng) -> Gains {
    Gains {
        kp: grid(r, 0, 100_000, 1000.0),
        ki: grid(r, 0, 100_000, 1000.0),
    }
}

pub fn random_telemetry(r: &mut ChaCha8Rng) -> TelemetryFrame {
    TelemetryFrame {
        seq: r.random(),
        t: grid(r, 0, u32::MAX as i64, 1000.0),
        yaw_est: grid(r, -315, 315, 100.0),
        depth_est: grid(r, -2000, 25_000, 1000.0),
        turbidity: grid(r, 0, u16::MAX as i64, 10.0),
        duties: duties(r),
        mode: if r.random() {
            Mode::Manual
        } else {
            Mode::ClosedLoop
        },
        yaw_gains: gains(r),
        depth_gains: gains(r),
        flags: Flags {
            sensor_fault: r.random(),
            saturated: r.random(),
        },
    }
}

pub fn random_command(r: &mut ChaCha8Rng) -> CommandMessage {
    let command = match r.random_range(0..5) {
        0 => Command::SetMode {
            mode: if r.random() {
                Mode::Manual
            } else {
                Mode::ClosedLoop
            },
        },
        1 => Command::SetSetpoints {
            yaw_ref: grid(r, -315, 315, 100.0),
            depth_ref: grid(r, 0, 20_000, 1000.0),
            surge_duty: grid(r, -1000, 1000, 1000.0),
        },
        2 => Command::SetGains {
            yaw_gains: gains(r),
            depth_gains: gains(r),
            alpha: grid(r, 0, 1000, 1000.0),
        },
        3 => {
            let d = duties(r);
            Command::ManualDuties {
                left: d.left,
                right: d.right,
                vertical: d.vertical,
            }
        }
        _ => Command::Ping,
    };
    CommandMessage::new(r.random(), command)
}

pub fn random_message(r: &mut ChaCha8Rng) -> Message {
    match r.random_range(0..3) {
        0 => Message::Telemetry(random_telemetry(r)),
        1 => Message::Command(random_command(r)),
        _ => {
            let len = r.random_range(0..=64);
            Message::Log(
                (0..len)
                    .map(|_| r.random_range(b'a'..=b'z') as char)
                    .collect(),
            )
        }
    }
}

/// One representative frame of every message type and command kind.
pub fn reference_messages() -> Vec<Message> {
    let mut r = rng(2024);
    let mut out = vec![Message::Telemetry(random_telemetry(&mut r))];
    let cmds = [
        Command::SetMode {
            mode: Mode::ClosedLoop,
        },
        Command::SetSetpoints {
            yaw_ref: 0.52,
            depth_ref: 1.0,
            surge_duty: 0.25,
        },
        Command::SetGains {
            yaw_gains: Gains { kp: 0.8, ki: 0.1 },
            depth_gains: Gains { kp: 0.6, ki: 0.15 },
            alpha: 0.98,
        },
        Command::ManualDuties {
            left: 0.4,
            right: -0.4,
            vertical: 0.0,
        },
        Command::Ping,
    ];
    for (i, c) in cmds.into_iter().enumerate() {
        out.push(Message::Command(CommandMessage::new(i as u32 + 1, c)));
    }
    out.push(Message::Log("depth sensor re-zeroed".into()));
    out
}
