use std::time::{Duration, Instant};

use rov_core::angle::wrap;
use rov_core::control::Mode;
use rov_core::harness::{builtin, replay, run_scenario, Scenario, BUILTIN_NAMES, CSV_HEADER};
use rov_core::sensors::NoiseConfig;
use rov_core::session::{SessionConfig, VehicleSession};
use rov_core::telemetry::{Command, CommandMessage, Gains, Message, StreamDecoder, TelemetryFrame};

fn session() -> VehicleSession {
    VehicleSession::new(SessionConfig::default()).unwrap()
}

fn telemetry_of(bytes: &[u8], dec: &mut StreamDecoder) -> Vec<TelemetryFrame> {
    dec.push(bytes)
        .messages
        .into_iter()
        .filter_map(|m| match m {
            Message::Telemetry(f) => Some(f),
            _ => None,
        })
        .collect()
}

#[test]
fn every_builtin_runs_quickly() {
    for name in BUILTIN_NAMES {
        let start = Instant::now();
        let log = run_scenario(&builtin(name).unwrap()).unwrap();
        assert!(
            start.elapsed() < Duration::from_secs(5),
            "{name} took {:?}",
            start.elapsed()
        );
        assert!(log.rows.iter().all(|r| r.truth.is_finite()), "{name}");
        assert!(log.link.commands_rejected == 0, "{name}: {:?}", log.events);
    }
}

#[test]
fn csv_replay_reproduces_truth() {
    for name in BUILTIN_NAMES {
        let log = run_scenario(&builtin(name).unwrap()).unwrap();
        let states = replay(&log.rows, &log.params).unwrap();
        for (row, s) in log.rows.iter().zip(&states) {
            for (a, b) in [
                (row.truth.x, s.x),
                (row.truth.y, s.y),
                (row.truth.depth, s.depth),
                (row.truth.yaw, s.yaw),
                (row.truth.u, s.u),
            ] {
                assert!(
                    (a - b).abs() <= 1e-9,
                    "{name} tick {}: {a} vs {b}",
                    row.tick
                );
            }
        }
    }
}

#[test]
fn csv_shape() {
    let log = run_scenario(&builtin("depth_step_1m").unwrap()).unwrap();
    let bytes = log.to_csv_bytes().unwrap();
    let mut rdr = csv::Reader::from_reader(bytes.as_slice());
    assert_eq!(
        rdr.headers().unwrap().iter().collect::<Vec<_>>(),
        CSV_HEADER.to_vec()
    );
    assert_eq!(rdr.records().count(), log.rows.len());
}

#[test]
fn seed_changes_noise_but_not_shape() {
    let a = builtin("yaw_step_30deg").unwrap();
    let b = Scenario {
        seed: 99,
        ..a.clone()
    };
    let (la, lb) = (run_scenario(&a).unwrap(), run_scenario(&b).unwrap());
    assert_ne!(la.to_csv_bytes().unwrap(), lb.to_csv_bytes().unwrap());
    let (ea, eb) = (
        la.rows.last().unwrap().truth.yaw,
        lb.rows.last().unwrap().truth.yaw,
    );
    assert!((ea - eb).abs() < 0.02);
}

#[test]
fn mirrored_burn_mirrors_yaw() {
    let run = |sign: f64| {
        let mut s = Scenario::new("mirror", 8.0).at(
            1.0,
            Command::ManualDuties {
                left: 0.4 * sign,
                right: -0.4 * sign,
                vertical: 0.0,
            },
        );
        s.noise = NoiseConfig::noiseless();
        run_scenario(&s).unwrap()
    };
    let (pos, neg) = (run(1.0), run(-1.0));
    for (a, b) in pos.rows.iter().zip(&neg.rows) {
        assert!((wrap(a.truth.yaw + b.truth.yaw)).abs() < 1e-12);
        assert_eq!(a.truth.r, -b.truth.r);
        assert_eq!(a.truth.u, b.truth.u);
    }
}

#[test]
fn state_change_is_echoed_within_two_ticks() {
    let mut s = session();
    let mut dec = StreamDecoder::new();
    for _ in 0..3 {
        s.tick().unwrap();
    }
    s.submit(&CommandMessage::new(
        1,
        Command::SetMode {
            mode: Mode::ClosedLoop,
        },
    ))
    .unwrap();
    let new_gains = Command::SetGains {
        yaw_gains: Gains { kp: 1.25, ki: 0.2 },
        depth_gains: Gains { kp: 0.5, ki: 0.125 },
        alpha: 0.95,
    };
    s.submit(&CommandMessage::new(2, new_gains)).unwrap();
    let mut echoed_at = None;
    for k in 0..2 {
        let out = s.tick().unwrap();
        for f in telemetry_of(&out.downlink, &mut dec) {
            if f.mode == Mode::ClosedLoop && f.yaw_gains == (Gains { kp: 1.25, ki: 0.2 }) {
                echoed_at.get_or_insert(k);
            }
        }
    }
    assert!(echoed_at.is_some());
    assert_eq!(s.alpha(), 0.95);
}

#[test]
fn last_writer_wins_within_a_tick() {
    let mut s = session();
    s.submit(&CommandMessage::new(
        1,
        Command::SetMode {
            mode: Mode::ClosedLoop,
        },
    ))
    .unwrap();
    for (seq, depth) in [(2, 1.0), (3, 4.0), (4, 2.5)] {
        let cmd = Command::SetSetpoints {
            yaw_ref: 0.0,
            depth_ref: depth,
            surge_duty: 0.0,
        };
        s.submit(&CommandMessage::new(seq, cmd)).unwrap();
    }
    let out = s.tick().unwrap();
    assert_eq!(out.commands.len(), 4);
    assert_eq!(s.setpoints().depth_ref, 2.5);
}

#[test]
fn manual_duties_stop_closed_loop() {
    let mut s = session();
    s.submit(&CommandMessage::new(
        1,
        Command::SetMode {
            mode: Mode::ClosedLoop,
        },
    ))
    .unwrap();
    s.submit(&CommandMessage::new(
        2,
        Command::SetSetpoints {
            yaw_ref: 0.0,
            depth_ref: 2.0,
            surge_duty: 0.5,
        },
    ))
    .unwrap();
    for _ in 0..50 {
        s.tick().unwrap();
    }
    s.submit(&CommandMessage::new(
        3,
        Command::ManualDuties {
            left: 0.0,
            right: 0.0,
            vertical: 0.0,
        },
    ))
    .unwrap();
    let out = s.tick().unwrap();
    assert_eq!(out.row.setpoints.mode, Mode::Manual);
    assert_eq!(out.row.duties.left, 0.0);
    assert_eq!(out.row.duties.vertical, 0.0);
}

#[test]
fn link_impaired_step_still_settles() {
    let log = run_scenario(&builtin("link_impaired_yaw_step").unwrap()).unwrap();
    assert!(log.link.telemetry_received < log.link.telemetry_sent);
    let last = log.rows.last().unwrap();
    assert_eq!(last.setpoints.mode, Mode::ClosedLoop);
    assert!((wrap(last.truth.yaw - last.setpoints.yaw_ref)).abs() < 2f64.to_radians());
}

#[test]
fn turbidity_survey_reads_the_gradient() {
    let log = run_scenario(&builtin("turbidity_survey").unwrap()).unwrap();
    let mean_ntu = |from: f64, to: f64| {
        let v: Vec<f64> = log
            .rows
            .iter()
            .filter(|r| r.truth.t >= from && r.truth.t < to)
            .map(|r| r.turbidity_ntu)
            .collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    let (a, b, c) = (
        mean_ntu(15.0, 20.0),
        mean_ntu(35.0, 40.0),
        mean_ntu(55.0, 60.0),
    );
    assert!(a < b && b < c, "{a} {b} {c}");
    assert!((c - (20.0 + 150.0 * 3.0)).abs() < 40.0, "{c}");
}
