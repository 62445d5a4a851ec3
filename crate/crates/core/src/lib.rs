//! Software model of a small three-thruster ROV and its onboard stack.
//!
//! The pipeline mirrors the vehicle's data path:
//!
//! * [`dynamics`] integrates surge, heave and yaw under thruster, hydrostatic
//!   and drag loads.
//! * [`sensors`] projects ground truth onto an emulated IMU heading channel,
//!   pressure transducer and turbidity probe with seeded noise.
//! * [`estimation`] runs the onboard complementary heading filter.
//! * [`control`] holds the PI loops for yaw and depth and the thruster mixer.
//! * [`telemetry`] is the framed tether protocol plus its JSON mirror.
//! * [`session`] wires the above into one deterministic control tick.
//! * [`harness`] runs scenarios and produces logs and step metrics.

pub mod angle;
pub mod control;
pub mod dynamics;
pub mod estimation;
pub mod harness;
pub mod sensors;
pub mod session;
pub mod telemetry;

/// Simulator integration step (s).
pub const SIM_DT: f64 = 0.005;
/// Simulator substeps per control tick.
pub const SUBSTEPS_PER_TICK: u32 = 4;
/// Control, sensor and telemetry period (s), 50 Hz.
pub const CONTROL_DT: f64 = SIM_DT * SUBSTEPS_PER_TICK as f64;
