//! Three-DOF rigid-body model (surge, heave, yaw) with planar kinematics.
//!
//! Conventions: depth and heave velocity are positive down, yaw is positive
//! counter-clockwise seen from above, and the left thruster pushing harder
//! than the right one produces positive yaw torque.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::angle::wrap;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid vehicle parameters: {0}")]
    InvalidParams(String),
    #[error("simulation diverged at t = {t} s (non-finite state)")]
    Diverged { t: f64 },
}

/// Physical constants of the vehicle, SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VehicleParams {
    /// Mass in air (kg).
    pub mass: f64,
    /// Hydrostatic buoyant force (N).
    pub buoyant_force: f64,
    /// Thrust of one motor at full duty (N).
    pub max_thrust_per_motor: f64,
    /// Duty magnitude below which a motor produces no thrust.
    pub thrust_deadband: f64,
    /// Quadratic surge drag (N·s²/m²).
    pub drag_surge: f64,
    /// Quadratic heave drag (N·s²/m²).
    pub drag_heave: f64,
    /// Quadratic yaw drag (N·m·s²/rad²).
    pub drag_yaw: f64,
    /// Moment of inertia about the vertical axis (kg·m²).
    pub yaw_inertia: f64,
    /// Lateral moment arm of the side thrusters (m).
    pub thruster_arm: f64,
    pub gravity: f64,
    pub water_density: f64,
    /// Depth of the floor / rated limit (m).
    pub max_depth: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            mass: 1.6,
            // Net positive buoyancy so the unpowered vehicle floats up.
            buoyant_force: 16.7,
            max_thrust_per_motor: 5.0,
            thrust_deadband: 0.05,
            // Full symmetric thrust (10 N) settles at sqrt(10/110) ≈ 0.30 m/s.
            drag_surge: 110.0,
            drag_heave: 30.0,
            drag_yaw: 4.0,
            yaw_inertia: 0.02,
            thruster_arm: 0.13,
            gravity: 9.81,
            water_density: 1000.0,
            max_depth: 20.0,
        }
    }
}

impl VehicleParams {
    /// Weight in air, always `mass · gravity`.
    pub fn weight_force(&self) -> f64 {
        self.mass * self.gravity
    }

    /// Buoyant force minus weight; positive floats.
    pub fn net_buoyancy(&self) -> f64 {
        self.buoyant_force - self.weight_force()
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        let fields = [
            ("mass", self.mass),
            ("buoyant_force", self.buoyant_force),
            ("max_thrust_per_motor", self.max_thrust_per_motor),
            ("thrust_deadband", self.thrust_deadband),
            ("drag_surge", self.drag_surge),
            ("drag_heave", self.drag_heave),
            ("drag_yaw", self.drag_yaw),
            ("yaw_inertia", self.yaw_inertia),
            ("thruster_arm", self.thruster_arm),
            ("gravity", self.gravity),
            ("water_density", self.water_density),
            ("max_depth", self.max_depth),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(DynamicsError::InvalidParams(format!(
                    "{name} is not finite"
                )));
            }
        }
        let positive = [
            ("mass", self.mass),
            ("yaw_inertia", self.yaw_inertia),
            ("thruster_arm", self.thruster_arm),
            ("gravity", self.gravity),
            ("water_density", self.water_density),
            ("max_depth", self.max_depth),
        ];
        for (name, v) in positive {
            if v <= 0.0 {
                return Err(DynamicsError::InvalidParams(format!("{name} must be > 0")));
            }
        }
        let non_negative = [
            ("drag_surge", self.drag_surge),
            ("drag_heave", self.drag_heave),
            ("drag_yaw", self.drag_yaw),
            ("buoyant_force", self.buoyant_force),
            ("max_thrust_per_motor", self.max_thrust_per_motor),
        ];
        for (name, v) in non_negative {
            if v < 0.0 {
                return Err(DynamicsError::InvalidParams(format!("{name} must be >= 0")));
            }
        }
        if !(0.0..1.0).contains(&self.thrust_deadband) {
            return Err(DynamicsError::InvalidParams(
                "thrust_deadband must be in [0, 1)".into(),
            ));
        }
        Ok(())
    }
}

/// Ground-truth pose and body velocities.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VehicleState {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    /// Positive down, 0 at the surface.
    pub depth: f64,
    /// Wrapped to (−π, π].
    pub yaw: f64,
    /// Body surge velocity (m/s).
    pub u: f64,
    /// Heave velocity, positive down (m/s).
    pub w: f64,
    /// Yaw rate (rad/s).
    pub r: f64,
}

impl VehicleState {
    pub fn is_finite(&self) -> bool {
        [
            self.t, self.x, self.y, self.depth, self.yaw, self.u, self.w, self.r,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

/// Signed PWM duties of the three motors, each in [−1, 1].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ThrusterDuties {
    pub left: f64,
    pub right: f64,
    pub vertical: f64,
}

impl ThrusterDuties {
    pub const ZERO: Self = Self {
        left: 0.0,
        right: 0.0,
        vertical: 0.0,
    };

    /// Builds duties with every component clamped to [−1, 1].
    pub fn clamped(left: f64, right: f64, vertical: f64) -> Result<Self, DynamicsError> {
        for (name, v) in [("left", left), ("right", right), ("vertical", vertical)] {
            if !v.is_finite() {
                return Err(DynamicsError::InvalidInput(format!(
                    "{name} duty is not finite"
                )));
            }
        }
        Ok(Self {
            left: left.clamp(-1.0, 1.0),
            right: right.clamp(-1.0, 1.0),
            vertical: vertical.clamp(-1.0, 1.0),
        })
    }
}

/// Static thrust curve of one motor: zero inside the deadband, then linear to
/// `±max_thrust_per_motor` at full duty.
pub fn duty_to_thrust(duty: f64, params: &VehicleParams) -> Result<f64, DynamicsError> {
    if !duty.is_finite() {
        return Err(DynamicsError::InvalidInput("duty is not finite".into()));
    }
    let mag = duty.abs().min(1.0);
    let deadband = params.thrust_deadband;
    if mag < deadband {
        return Ok(0.0);
    }
    let thrust = params.max_thrust_per_motor * (mag - deadband) / (1.0 - deadband);
    Ok(if duty < 0.0 { -thrust } else { thrust })
}

/// Generalized loads on the three modeled axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Loads {
    /// Body surge force (N).
    pub surge: f64,
    /// Vertical force, positive down (N).
    pub heave: f64,
    /// Yaw torque (N·m).
    pub yaw: f64,
}

pub fn net_forces(
    state: &VehicleState,
    duties: &ThrusterDuties,
    params: &VehicleParams,
) -> Result<Loads, DynamicsError> {
    let left = duty_to_thrust(duties.left, params)?;
    let right = duty_to_thrust(duties.right, params)?;
    let vertical = duty_to_thrust(duties.vertical, params)?;
    Ok(Loads {
        surge: left + right - params.drag_surge * state.u * state.u.abs(),
        heave: params.weight_force() - params.buoyant_force + vertical
            - params.drag_heave * state.w * state.w.abs(),
        yaw: (left - right) * params.thruster_arm - params.drag_yaw * state.r * state.r.abs(),
    })
}

/// Largest integration step accepted by [`step`].
pub const MAX_DT: f64 = 0.02;

/// Advances the state by `dt` with semi-implicit Euler.
///
/// Velocities are updated first, positions use the new velocities. Depth is
/// held inside `[0, max_depth]`; at either bound the velocity component
/// pushing through it is removed.
/// Velocity update `v + load/inertia·dt` where the quadratic-drag share of
/// `load` may stop `v` within one step but never reverse it.
fn drag_limited(v: f64, load: f64, drag: f64, inertia: f64, dt: f64) -> f64 {
    let drag_dv = drag * v * v.abs() / inertia * dt;
    if drag_dv.abs() <= v.abs() {
        v + load / inertia * dt
    } else {
        (load + drag * v * v.abs()) / inertia * dt
    }
}

pub fn step(
    state: &VehicleState,
    duties: &ThrusterDuties,
    params: &VehicleParams,
    dt: f64,
) -> Result<VehicleState, DynamicsError> {
    if !(dt > 0.0 && dt <= MAX_DT) {
        return Err(DynamicsError::InvalidInput(format!(
            "dt = {dt} outside (0, {MAX_DT}]"
        )));
    }
    let loads = net_forces(state, duties, params)?;

    let u = drag_limited(state.u, loads.surge, params.drag_surge, params.mass, dt);
    let mut w = drag_limited(state.w, loads.heave, params.drag_heave, params.mass, dt);
    let r = drag_limited(state.r, loads.yaw, params.drag_yaw, params.yaw_inertia, dt);

    let (sin_yaw, cos_yaw) = state.yaw.sin_cos();
    let x = state.x + u * cos_yaw * dt;
    let y = state.y + u * sin_yaw * dt;
    let mut depth = state.depth + w * dt;
    let yaw = wrap(state.yaw + r * dt);

    if depth < 0.0 {
        depth = 0.0;
        w = w.max(0.0);
    }
    if depth > params.max_depth {
        depth = params.max_depth;
        w = w.min(0.0);
    }

    let next = VehicleState {
        t: state.t + dt,
        x,
        y,
        depth,
        yaw,
        u,
        w,
        r,
    };
    if !next.is_finite() {
        return Err(DynamicsError::Diverged { t: next.t });
    }
    Ok(next)
}
