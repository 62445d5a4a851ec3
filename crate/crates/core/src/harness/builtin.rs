use super::Scenario;
use crate::control::Mode;
use crate::sensors::TurbidityField;
use crate::telemetry::link::LinkConfig;
use crate::telemetry::Command;

pub const BUILTIN_NAMES: [&str; 6] = [
    "openloop_yaw",
    "yaw_step_30deg",
    "depth_step_1m",
    "resurface_drift",
    "turbidity_survey",
    "link_impaired_yaw_step",
];

const YAW_30: f64 = 30.0 * std::f64::consts::PI / 180.0;

fn closed_loop() -> Command {
    Command::SetMode {
        mode: Mode::ClosedLoop,
    }
}

fn setpoints(yaw_ref: f64, depth_ref: f64, surge_duty: f64) -> Command {
    Command::SetSetpoints {
        yaw_ref,
        depth_ref,
        surge_duty,
    }
}

fn manual(left: f64, right: f64, vertical: f64) -> Command {
    Command::ManualDuties {
        left,
        right,
        vertical,
    }
}

pub fn builtin(name: &str) -> Option<Scenario> {
    let s = match name {
        // Differential burn at the surface, then coast.
        "openloop_yaw" => Scenario::new(name, 20.0)
            .at(1.0, manual(0.4, -0.4, 0.0))
            .at(6.0, manual(0.0, 0.0, 0.0)),
        "yaw_step_30deg" => Scenario::new(name, 30.0)
            .at(0.0, closed_loop())
            .at(2.0, setpoints(YAW_30, 0.0, 0.0)),
        "depth_step_1m" => Scenario::new(name, 30.0)
            .at(0.0, closed_loop())
            .at(2.0, setpoints(0.0, 1.0, 0.0)),
        // Unpowered from 2 m while still carrying some forward speed.
        "resurface_drift" => {
            let mut s = Scenario::new(name, 20.0);
            s.initial_state.depth = 2.0;
            s.initial_state.u = 0.3;
            s.initial_state.yaw = 0.5;
            s
        }
        // Surge across a turbidity gradient at three depths.
        "turbidity_survey" => {
            let mut s = Scenario::new(name, 60.0)
                .at(0.0, closed_loop())
                .at(0.0, setpoints(0.0, 0.5, 0.6))
                .at(20.0, setpoints(0.0, 1.5, 0.6))
                .at(40.0, setpoints(0.0, 3.0, 0.6));
            s.field = TurbidityField::LinearDepth {
                surface_ntu: 20.0,
                ntu_per_m: 150.0,
            };
            s
        }
        // The pilot repeats commands, as over a lossy tether.
        "link_impaired_yaw_step" => {
            let mut s = Scenario::new(name, 30.0);
            for k in 0..3 {
                s = s.at(0.5 * k as f64, closed_loop());
            }
            for k in 0..4 {
                s = s.at(2.0 + 0.5 * k as f64, setpoints(YAW_30, 0.0, 0.0));
            }
            s.link = LinkConfig {
                latency_ms: 60.0,
                drop_prob: 0.1,
                corrupt_prob: 0.001,
            };
            s
        }
        _ => return None,
    };
    Some(Scenario { seed: 1, ..s })
}
