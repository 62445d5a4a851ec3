//! PI loops for yaw and depth, and the three-thruster mixer.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::angle::{shortest_arc, wrap};
use crate::dynamics::ThrusterDuties;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("invalid gains: {0}")]
    InvalidGains(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PIGains {
    pub kp: f64,
    pub ki: f64,
    pub out_min: f64,
    pub out_max: f64,
    /// Bound on the accumulated error integral (error units · s).
    pub integral_limit: f64,
}

impl PIGains {
    pub fn default_yaw() -> Self {
        Self {
            kp: 0.8,
            ki: 0.1,
            out_min: -1.0,
            out_max: 1.0,
            integral_limit: 0.5,
        }
    }

    /// The integral has to carry the hover duty against net buoyancy
    /// (≈ 0.24 with default params), which needs a limit above 0.24 / ki.
    pub fn default_depth() -> Self {
        Self {
            kp: 0.6,
            ki: 0.15,
            out_min: -1.0,
            out_max: 1.0,
            integral_limit: 2.0,
        }
    }

    pub fn validate(&self) -> Result<(), ControlError> {
        let all = [
            self.kp,
            self.ki,
            self.out_min,
            self.out_max,
            self.integral_limit,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(ControlError::InvalidGains("non-finite value".into()));
        }
        if self.kp < 0.0 || self.ki < 0.0 {
            return Err(ControlError::InvalidGains("kp and ki must be >= 0".into()));
        }
        if self.out_min >= self.out_max {
            return Err(ControlError::InvalidGains(
                "out_min must be < out_max".into(),
            ));
        }
        if self.integral_limit < 0.0 {
            return Err(ControlError::InvalidGains(
                "integral_limit must be >= 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PIState {
    pub integral: f64,
    pub last_t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PiOutput {
    pub output: f64,
    /// The raw command was clipped to the output range.
    pub saturated: bool,
    pub state: PIState,
}

/// One PI update with output clamping and conditional integration.
///
/// When the unclamped command is outside the output range and the error
/// pushes further in that direction, the integral is held for the step.
pub fn pi_step(
    gains: &PIGains,
    st: PIState,
    error: f64,
    dt: f64,
) -> Result<PiOutput, ControlError> {
    gains.validate()?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(ControlError::InvalidInput(format!("dt = {dt} must be > 0")));
    }
    if !error.is_finite() {
        return Err(ControlError::InvalidInput("error is not finite".into()));
    }
    let limit = gains.integral_limit;
    let mut integral = (st.integral + error * dt).clamp(-limit, limit);
    let mut raw = gains.kp * error + gains.ki * integral;
    let winding_up = (raw > gains.out_max && error > 0.0) || (raw < gains.out_min && error < 0.0);
    if winding_up {
        integral = st.integral.clamp(-limit, limit);
        raw = gains.kp * error + gains.ki * integral;
    }
    let output = raw.clamp(gains.out_min, gains.out_max);
    Ok(PiOutput {
        output,
        saturated: output != raw,
        state: PIState {
            integral,
            last_t: st.last_t + dt,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Manual,
    ClosedLoop,
}

impl Mode {
    pub fn as_u8(self) -> u8 {
        match self {
            Mode::Manual => 0,
            Mode::ClosedLoop => 1,
        }
    }

    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(Mode::Manual),
            1 => Some(Mode::ClosedLoop),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Manual => "manual",
            Mode::ClosedLoop => "closed_loop",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlSetpoints {
    pub mode: Mode,
    pub yaw_ref: f64,
    pub depth_ref: f64,
    /// Open-loop forward duty shared by both side thrusters.
    pub surge_duty: f64,
    pub manual_duties: ThrusterDuties,
}

impl ControlSetpoints {
    /// Checks ranges and normalizes `yaw_ref` onto (−π, π].
    pub fn validated(mut self, max_depth: f64) -> Result<Self, ControlError> {
        if !self.yaw_ref.is_finite() {
            return Err(ControlError::InvalidInput("yaw_ref is not finite".into()));
        }
        if !(0.0..=max_depth).contains(&self.depth_ref) {
            return Err(ControlError::InvalidInput(format!(
                "depth_ref {} outside [0, {max_depth}]",
                self.depth_ref
            )));
        }
        if !(-1.0..=1.0).contains(&self.surge_duty) {
            return Err(ControlError::InvalidInput(
                "surge_duty outside [-1, 1]".into(),
            ));
        }
        self.yaw_ref = wrap(self.yaw_ref);
        Ok(self)
    }
}

/// A PI loop's tuning together with its running state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PiLoop {
    pub gains: PIGains,
    pub state: PIState,
}

impl PiLoop {
    pub fn new(gains: PIGains) -> Self {
        Self {
            gains,
            state: PIState::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput {
    pub duties: ThrusterDuties,
    pub yaw_state: PIState,
    pub depth_state: PIState,
    pub yaw_cmd: f64,
    /// Any PI output or mixed duty was clipped this step.
    pub saturated: bool,
}

/// Differential mixer: surge plus/minus the yaw command on the side motors.
pub fn mix(surge_duty: f64, yaw_cmd: f64, vertical: f64) -> ThrusterDuties {
    ThrusterDuties {
        left: (surge_duty + yaw_cmd).clamp(-1.0, 1.0),
        right: (surge_duty - yaw_cmd).clamp(-1.0, 1.0),
        vertical: vertical.clamp(-1.0, 1.0),
    }
}

pub fn control_step(
    setpoints: &ControlSetpoints,
    yaw_est: f64,
    depth_est: f64,
    yaw_pi: &PiLoop,
    depth_pi: &PiLoop,
    dt: f64,
) -> Result<ControlOutput, ControlError> {
    match setpoints.mode {
        Mode::Manual => {
            let m = setpoints.manual_duties;
            let duties = ThrusterDuties::clamped(m.left, m.right, m.vertical)
                .map_err(|e| ControlError::InvalidInput(e.to_string()))?;
            Ok(ControlOutput {
                duties,
                yaw_state: yaw_pi.state,
                depth_state: depth_pi.state,
                yaw_cmd: 0.0,
                saturated: false,
            })
        }
        Mode::ClosedLoop => {
            let yaw_error = shortest_arc(yaw_est, setpoints.yaw_ref);
            let yaw = pi_step(&yaw_pi.gains, yaw_pi.state, yaw_error, dt)?;
            let depth_error = setpoints.depth_ref - depth_est;
            let depth = pi_step(&depth_pi.gains, depth_pi.state, depth_error, dt)?;
            let raw_left = setpoints.surge_duty + yaw.output;
            let raw_right = setpoints.surge_duty - yaw.output;
            let duties = mix(setpoints.surge_duty, yaw.output, depth.output);
            let mixer_clipped = duties.left != raw_left
                || duties.right != raw_right
                || duties.vertical != depth.output;
            Ok(ControlOutput {
                duties,
                yaw_state: yaw.state,
                depth_state: depth.state,
                yaw_cmd: yaw.output,
                saturated: yaw.saturated || depth.saturated || mixer_clipped,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unclamped(kp: f64, ki: f64) -> PIGains {
        PIGains {
            kp,
            ki,
            out_min: -1e9,
            out_max: 1e9,
            integral_limit: 1e9,
        }
    }

    #[test]
    fn zero_error_gives_zero_output() {
        let g = PIGains::default_yaw();
        let mut st = PIState::default();
        for _ in 0..100 {
            let out = pi_step(&g, st, 0.0, 0.02).unwrap();
            assert_eq!(out.output, 0.0);
            st = out.state;
        }
    }

    #[test]
    fn constant_error_closed_form() {
        let g = unclamped(2.0, 0.5);
        let mut st = PIState::default();
        let mut out = 0.0;
        for _ in 0..4 {
            let r = pi_step(&g, st, 1.0, 0.5).unwrap();
            out = r.output;
            st = r.state;
        }
        assert_eq!(out, 3.0);
        assert_eq!(st.last_t, 2.0);
    }

    #[test]
    fn proportional_saturation() {
        let g = PIGains {
            kp: 2.0,
            ki: 0.0,
            out_min: -0.4,
            out_max: 0.4,
            integral_limit: 1.0,
        };
        let r = pi_step(&g, PIState::default(), 0.25, 0.02).unwrap();
        assert_eq!(r.output, 0.4);
        assert!(r.saturated);
    }

    #[test]
    fn invalid_gains_rejected() {
        let mut g = PIGains::default_yaw();
        g.out_min = 2.0;
        assert!(pi_step(&g, PIState::default(), 0.0, 0.02).is_err());
        let mut g = PIGains::default_yaw();
        g.kp = -1.0;
        assert!(pi_step(&g, PIState::default(), 0.0, 0.02).is_err());
        let mut g = PIGains::default_yaw();
        g.integral_limit = -0.1;
        assert!(g.validate().is_err());
        assert!(pi_step(&PIGains::default_yaw(), PIState::default(), 0.0, 0.0).is_err());
    }

    #[test]
    fn integral_frozen_while_winding_up() {
        let g = PIGains::default_yaw();
        let st = PIState {
            integral: 0.1,
            last_t: 0.0,
        };
        let r = pi_step(&g, st, 3.0, 0.02).unwrap();
        assert_eq!(r.state.integral, 0.1);
        assert_eq!(r.output, 1.0);
    }

    #[test]
    fn desaturates_after_error_flip() {
        let g = PIGains::default_yaw();
        let mut st = PIState::default();
        for _ in 0..500 {
            st = pi_step(&g, st, 2.0, 0.02).unwrap().state;
        }
        let mut left_saturation = None;
        for k in 0..10 {
            let r = pi_step(&g, st, -2.0, 0.02).unwrap();
            st = r.state;
            if r.output < g.out_max {
                left_saturation = Some(k);
                break;
            }
        }
        assert_eq!(left_saturation, Some(0));
    }

    fn closed(surge: f64) -> ControlSetpoints {
        ControlSetpoints {
            mode: Mode::ClosedLoop,
            surge_duty: surge,
            ..Default::default()
        }
    }

    #[test]
    fn symmetric_surge_passthrough() {
        let yaw = PiLoop::new(PIGains::default_yaw());
        let depth = PiLoop::new(PIGains::default_depth());
        let out = control_step(&closed(0.5), 0.0, 0.0, &yaw, &depth, 0.02).unwrap();
        assert_eq!(
            out.duties,
            ThrusterDuties {
                left: 0.5,
                right: 0.5,
                vertical: 0.0
            }
        );
    }

    #[test]
    fn positive_yaw_error_turns_left_motor_forward() {
        let gains = PIGains {
            kp: 1.0,
            ki: 0.0,
            ..PIGains::default_yaw()
        };
        let yaw = PiLoop::new(gains);
        let depth = PiLoop::new(PIGains::default_depth());
        let mut sp = closed(0.0);
        sp.yaw_ref = 0.3;
        let out = control_step(&sp, 0.0, 0.0, &yaw, &depth, 0.02).unwrap();
        assert!((out.duties.left - 0.3).abs() < 1e-15);
        assert!((out.duties.right + 0.3).abs() < 1e-15);
    }

    #[test]
    fn yaw_error_wraps() {
        let gains = PIGains {
            kp: 1.0,
            ki: 0.0,
            ..PIGains::default_yaw()
        };
        let yaw = PiLoop::new(gains);
        let depth = PiLoop::new(PIGains::default_depth());
        let mut sp = closed(0.0);
        sp.yaw_ref = -3.1;
        let out = control_step(&sp, 3.1, 0.0, &yaw, &depth, 0.02).unwrap();
        let expected = 2.0 * std::f64::consts::PI - 6.2;
        assert!((out.yaw_cmd - expected).abs() < 1e-12);
    }

    #[test]
    fn manual_passthrough_leaves_states() {
        let mut yaw = PiLoop::new(PIGains::default_yaw());
        yaw.state.integral = 0.2;
        let depth = PiLoop::new(PIGains::default_depth());
        let sp = ControlSetpoints {
            mode: Mode::Manual,
            manual_duties: ThrusterDuties {
                left: 0.2,
                right: 0.2,
                vertical: -0.5,
            },
            ..Default::default()
        };
        let out = control_step(&sp, 1.0, 1.0, &yaw, &depth, 0.02).unwrap();
        assert_eq!(
            out.duties,
            ThrusterDuties {
                left: 0.2,
                right: 0.2,
                vertical: -0.5
            }
        );
        assert_eq!(out.yaw_state, yaw.state);
        assert_eq!(out.depth_state, depth.state);
    }

    #[test]
    fn setpoint_validation() {
        let sp = ControlSetpoints {
            depth_ref: 25.0,
            ..Default::default()
        };
        assert!(sp.validated(20.0).is_err());
        let sp = ControlSetpoints {
            yaw_ref: 4.0,
            ..Default::default()
        };
        assert_eq!(sp.validated(20.0).unwrap().yaw_ref, wrap(4.0));
    }

    proptest! {
        #[test]
        fn mixer_is_linear_inside_limits(surge in -0.5f64..0.5, cmd in -0.5f64..0.5) {
            let d = mix(surge, cmd, 0.0);
            prop_assert!((d.left + d.right - 2.0 * surge).abs() < 1e-12);
            prop_assert!((d.left - d.right - 2.0 * cmd).abs() < 1e-12);
        }

        #[test]
        fn doubling_gains_doubles_output(
            kp in 0.0f64..5.0,
            ki in 0.0f64..5.0,
            errors in proptest::collection::vec(-2.0f64..2.0, 1..50),
        ) {
            let g1 = unclamped(kp, ki);
            let g2 = unclamped(2.0 * kp, 2.0 * ki);
            let (mut s1, mut s2) = (PIState::default(), PIState::default());
            for e in errors {
                let a = pi_step(&g1, s1, e, 0.02).unwrap();
                let b = pi_step(&g2, s2, e, 0.02).unwrap();
                prop_assert!((b.output - 2.0 * a.output).abs() <= 1e-9 * (1.0 + a.output.abs()));
                s1 = a.state;
                s2 = b.state;
            }
        }

        #[test]
        fn integral_never_exceeds_limit(
            errors in proptest::collection::vec(-10.0f64..10.0, 1..300),
            limit in 0.0f64..2.0,
        ) {
            let g = PIGains { integral_limit: limit, ..PIGains::default_yaw() };
            let mut st = PIState::default();
            for e in errors {
                st = pi_step(&g, st, e, 0.02).unwrap().state;
                prop_assert!(st.integral.abs() <= limit);
            }
        }
    }
}
