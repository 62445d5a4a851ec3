//! Onboard heading estimation and depth smoothing.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::angle::{shortest_arc, wrap};

pub const DEFAULT_ALPHA: f64 = 0.98;
pub const DEPTH_WINDOW: usize = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimationError {
    #[error("invalid filter config: alpha = {0} outside [0, 1]")]
    InvalidAlpha(f64),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Complementary heading filter state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterState {
    /// Heading estimate, wrapped to (−π, π].
    pub yaw_est: f64,
    /// Weight on the gyro-propagated estimate.
    pub alpha: f64,
}

impl Default for FilterState {
    fn default() -> Self {
        Self {
            yaw_est: 0.0,
            alpha: DEFAULT_ALPHA,
        }
    }
}

impl FilterState {
    pub fn new(yaw_est: f64, alpha: f64) -> Result<Self, EstimationError> {
        check_alpha(alpha)?;
        Ok(Self {
            yaw_est: wrap(yaw_est),
            alpha,
        })
    }
}

pub fn check_alpha(alpha: f64) -> Result<(), EstimationError> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(EstimationError::InvalidAlpha(alpha))
    }
}

/// One complementary-filter step.
///
/// The gyro rate is integrated first; the magnetometer heading then pulls the
/// prediction by `(1 − alpha)` of the shortest arc between them, so the blend
/// is correct across the ±π seam.
pub fn filter_update(
    fs: FilterState,
    gyro_z: f64,
    mag_yaw: f64,
    dt: f64,
) -> Result<FilterState, EstimationError> {
    check_alpha(fs.alpha)?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(EstimationError::InvalidInput(format!(
            "dt = {dt} must be > 0"
        )));
    }
    if !(gyro_z.is_finite() && mag_yaw.is_finite()) {
        return Err(EstimationError::InvalidInput(
            "non-finite sensor input".into(),
        ));
    }
    let predicted = fs.yaw_est + gyro_z * dt;
    let yaw_est = if fs.alpha == 0.0 {
        wrap(mag_yaw)
    } else {
        wrap(predicted + (1.0 - fs.alpha) * shortest_arc(predicted, mag_yaw))
    };
    Ok(FilterState { yaw_est, ..fs })
}

/// Fixed-length moving average over the most recent depth readings.
#[derive(Debug, Clone, Default)]
pub struct DepthAverage {
    window: VecDeque<f64>,
}

impl DepthAverage {
    pub fn new() -> Self {
        Self {
            window: VecDeque::with_capacity(DEPTH_WINDOW),
        }
    }

    pub fn push(&mut self, depth: f64) -> f64 {
        if self.window.len() == DEPTH_WINDOW {
            self.window.pop_front();
        }
        self.window.push_back(depth);
        self.value()
    }

    pub fn value(&self) -> f64 {
        if self.window.is_empty() {
            return 0.0;
        }
        self.window.iter().sum::<f64>() / self.window.len() as f64
    }
}
