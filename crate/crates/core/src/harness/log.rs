//! Per-tick run log, CSV export and open-loop replay.

use std::io::Write;

use serde::Serialize;

use super::metrics::{compute_step_metrics, detect_steps, StepMetrics};
use super::HarnessError;
use crate::dynamics::{DynamicsError, VehicleParams, VehicleState};
use crate::session::{advance, TickRow};

/// Link-level counters gathered during a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct LinkSummary {
    pub telemetry_sent: u64,
    pub telemetry_received: u64,
    pub surface_decode_errors: u64,
    pub commands_sent: u64,
    pub commands_applied: u64,
    pub commands_rejected: u64,
    pub vehicle_decode_errors: u64,
}

#[derive(Debug, Clone)]
pub struct RunLog {
    pub scenario: String,
    pub seed: u64,
    pub params: VehicleParams,
    /// One row per control tick, in order.
    pub rows: Vec<TickRow>,
    pub link: LinkSummary,
    /// Human-readable notes (rejected commands and the like).
    pub events: Vec<String>,
}

pub const CSV_HEADER: [&str; 27] = [
    "t_s",
    "x_m",
    "y_m",
    "depth_m",
    "yaw_rad",
    "u_mps",
    "w_mps",
    "r_radps",
    "gyro_z_radps",
    "accel_x_mps2",
    "accel_y_mps2",
    "accel_z_mps2",
    "mag_yaw_rad",
    "pressure_pa",
    "turbidity_v",
    "yaw_est_rad",
    "depth_est_m",
    "turbidity_ntu",
    "mode",
    "yaw_ref_rad",
    "depth_ref_m",
    "surge_duty",
    "duty_left",
    "duty_right",
    "duty_vertical",
    "saturated",
    "sensor_fault",
];

fn f6(v: f64) -> String {
    format!("{v:.6}")
}

impl RunLog {
    /// Writes the log as RFC-4180 CSV with fixed six-decimal floats.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), HarnessError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER)?;
        for r in &self.rows {
            let s = &r.truth;
            let f = &r.sensors;
            let sp = &r.setpoints;
            let record = [
                f6(s.t),
                f6(s.x),
                f6(s.y),
                f6(s.depth),
                f6(s.yaw),
                f6(s.u),
                f6(s.w),
                f6(s.r),
                f6(f.gyro_z),
                f6(f.accel_xyz[0]),
                f6(f.accel_xyz[1]),
                f6(f.accel_xyz[2]),
                f6(f.mag_yaw),
                f6(f.pressure),
                f6(f.turbidity_voltage),
                f6(r.yaw_est),
                f6(r.depth_est),
                f6(r.turbidity_ntu),
                sp.mode.as_str().to_string(),
                f6(sp.yaw_ref),
                f6(sp.depth_ref),
                f6(sp.surge_duty),
                f6(r.duties.left),
                f6(r.duties.right),
                f6(r.duties.vertical),
                u8::from(r.flags.saturated).to_string(),
                u8::from(r.flags.sensor_fault).to_string(),
            ];
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_bytes(&self) -> Result<Vec<u8>, HarnessError> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(buf)
    }

    /// Metrics for every reference change found in the log.
    pub fn step_summary(&self) -> Vec<StepMetrics> {
        detect_steps(self)
            .into_iter()
            .filter_map(|(ch, t)| compute_step_metrics(self, ch, t).ok())
            .collect()
    }
}

/// Re-integrates the plant from the first logged state using only the logged
/// duties. Returns one state per row; closed-loop decisions play no part.
pub fn replay(
    rows: &[TickRow],
    params: &VehicleParams,
) -> Result<Vec<VehicleState>, DynamicsError> {
    let Some(first) = rows.first() else {
        return Ok(Vec::new());
    };
    let mut out = Vec::with_capacity(rows.len());
    let mut state = first.truth;
    for row in rows {
        out.push(state);
        state = advance(&state, &row.duties, params)?;
    }
    Ok(out)
}
