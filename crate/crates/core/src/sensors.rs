//! Emulated sensor kit: IMU heading/rate channels, pressure transducer and
//! turbidity probe, driven by ground truth plus seeded gaussian noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::angle::wrap;
use crate::dynamics::{VehicleParams, VehicleState};

/// Standard atmosphere at the surface (Pa).
pub const P_ATM: f64 = 101_325.0;

/// Probe output for perfectly clear water (V).
pub const TURBIDITY_CLEAR_VOLTAGE: f64 = 4.2;
/// Probe sensitivity (V per NTU).
pub const TURBIDITY_SLOPE: f64 = 0.0008;
/// Probe supply rail (V).
pub const TURBIDITY_RAIL: f64 = 5.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SensorError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorFrame {
    pub t: f64,
    pub gyro_z: f64,
    /// Specific force in the body frame (x forward, z down).
    pub accel_xyz: [f64; 3],
    pub mag_yaw: f64,
    /// Absolute pressure (Pa).
    pub pressure: f64,
    pub turbidity_voltage: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub gyro_sigma: f64,
    /// Random-walk intensity of the gyro bias (rad/s per √s).
    pub gyro_bias_walk: f64,
    pub mag_sigma: f64,
    pub pressure_sigma: f64,
    pub turbidity_sigma: f64,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            gyro_sigma: 0.005,
            gyro_bias_walk: 0.0005,
            mag_sigma: 0.01,
            pressure_sigma: 20.0,
            turbidity_sigma: 0.005,
            seed: 0,
        }
    }
}

impl NoiseConfig {
    /// All sigmas zero: samples are exact projections of ground truth.
    pub fn noiseless() -> Self {
        Self {
            gyro_sigma: 0.0,
            gyro_bias_walk: 0.0,
            mag_sigma: 0.0,
            pressure_sigma: 0.0,
            turbidity_sigma: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), SensorError> {
        for (name, v) in [
            ("gyro_sigma", self.gyro_sigma),
            ("gyro_bias_walk", self.gyro_bias_walk),
            ("mag_sigma", self.mag_sigma),
            ("pressure_sigma", self.pressure_sigma),
            ("turbidity_sigma", self.turbidity_sigma),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(SensorError::InvalidInput(format!(
                    "{name} must be finite and >= 0"
                )));
            }
        }
        Ok(())
    }
}

/// Water turbidity as a function of position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TurbidityField {
    Constant {
        ntu: f64,
    },
    /// `surface_ntu + ntu_per_m · depth`, floored at 0.
    LinearDepth {
        surface_ntu: f64,
        ntu_per_m: f64,
    },
}

impl Default for TurbidityField {
    fn default() -> Self {
        TurbidityField::Constant { ntu: 10.0 }
    }
}

impl TurbidityField {
    pub fn at(&self, _x: f64, _y: f64, depth: f64) -> f64 {
        match *self {
            TurbidityField::Constant { ntu } => ntu.max(0.0),
            TurbidityField::LinearDepth {
                surface_ntu,
                ntu_per_m,
            } => (surface_ntu + ntu_per_m * depth).max(0.0),
        }
    }
}

/// Affine probe model, clamped to [0, 4.2] V.
pub fn ntu_to_voltage(ntu: f64) -> f64 {
    (TURBIDITY_CLEAR_VOLTAGE - TURBIDITY_SLOPE * ntu).clamp(0.0, TURBIDITY_CLEAR_VOLTAGE)
}

/// Inverse of [`ntu_to_voltage`]. Readings above the clear-water intercept
/// map to 0 NTU.
pub fn voltage_to_ntu(voltage: f64) -> Result<f64, SensorError> {
    if !(voltage.is_finite() && (0.0..=TURBIDITY_RAIL).contains(&voltage)) {
        return Err(SensorError::InvalidInput(format!(
            "turbidity voltage {voltage} outside [0, {TURBIDITY_RAIL}] V"
        )));
    }
    Ok(((TURBIDITY_CLEAR_VOLTAGE - voltage) / TURBIDITY_SLOPE).max(0.0))
}

/// Hydrostatic depth below the surface. Not clamped: noisy readings near the
/// surface may come out slightly negative.
pub fn depth_from_pressure(
    pressure: f64,
    water_density: f64,
    gravity: f64,
) -> Result<f64, SensorError> {
    if !pressure.is_finite() {
        return Err(SensorError::InvalidInput("pressure is not finite".into()));
    }
    if !(water_density > 0.0 && gravity > 0.0) {
        return Err(SensorError::InvalidInput(
            "water density and gravity must be positive".into(),
        ));
    }
    Ok((pressure - P_ATM) / (water_density * gravity))
}

/// Sensor emulator with its own deterministic noise stream.
///
/// Every call to [`SensorSuite::sample`] consumes exactly five normal draws,
/// whatever the sigmas are, so changing a sigma never shifts the stream of
/// the other channels.
#[derive(Debug, Clone)]
pub struct SensorSuite {
    noise: NoiseConfig,
    water_density: f64,
    gravity: f64,
    rng: ChaCha8Rng,
    gyro_bias: f64,
    last: Option<(f64, f64, f64)>,
}

impl SensorSuite {
    pub fn new(noise: NoiseConfig, params: &VehicleParams) -> Result<Self, SensorError> {
        noise.validate()?;
        Ok(Self {
            noise,
            water_density: params.water_density,
            gravity: params.gravity,
            rng: ChaCha8Rng::seed_from_u64(noise.seed),
            gyro_bias: 0.0,
            last: None,
        })
    }

    pub fn gyro_bias(&self) -> f64 {
        self.gyro_bias
    }

    fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    pub fn sample(&mut self, state: &VehicleState, field: &TurbidityField) -> SensorFrame {
        let n = self.noise;
        let (walk, gyro_n, mag_n, pres_n, turb_n) = (
            self.normal(),
            self.normal(),
            self.normal(),
            self.normal(),
            self.normal(),
        );

        let (accel_x, heave_accel) = match self.last {
            Some((t0, u0, w0)) if state.t > t0 => {
                let dt = state.t - t0;
                self.gyro_bias += n.gyro_bias_walk * dt.sqrt() * walk;
                ((state.u - u0) / dt, (state.w - w0) / dt)
            }
            _ => (0.0, 0.0),
        };
        debug_assert!(self.last.is_none_or(|(t0, _, _)| state.t > t0));
        self.last = Some((state.t, state.u, state.w));

        let pressure =
            P_ATM + self.water_density * self.gravity * state.depth + n.pressure_sigma * pres_n;
        let turbidity =
            ntu_to_voltage(field.at(state.x, state.y, state.depth)) + n.turbidity_sigma * turb_n;

        SensorFrame {
            t: state.t,
            gyro_z: state.r + self.gyro_bias + n.gyro_sigma * gyro_n,
            accel_xyz: [accel_x, state.u * state.r, heave_accel - self.gravity],
            mag_yaw: wrap(state.yaw + n.mag_sigma * mag_n),
            pressure: pressure.max(0.0),
            turbidity_voltage: turbidity.clamp(0.0, TURBIDITY_RAIL),
        }
    }
}
