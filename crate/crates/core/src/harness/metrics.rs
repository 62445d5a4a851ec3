//! Step-response metrics for yaw and depth experiments.

use serde::Serialize;

use super::log::RunLog;
use super::HarnessError;
use crate::angle::wrap;

/// Settling band as a fraction of the step magnitude.
pub const SETTLING_FRACTION: f64 = 0.02;
/// Lower bound of the yaw settling band (0.5°).
pub const YAW_BAND_FLOOR: f64 = 0.5 * std::f64::consts::PI / 180.0;
/// Lower bound of the depth settling band (m).
pub const DEPTH_BAND_FLOOR: f64 = 0.01;
/// Tail fraction of the window averaged for steady-state error.
pub const SSE_TAIL: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Yaw,
    Depth,
}

impl Channel {
    pub fn as_str(self) -> &'static str {
        match self {
            Channel::Yaw => "yaw",
            Channel::Depth => "depth",
        }
    }

    fn difference(self, from: f64, to: f64) -> f64 {
        match self {
            Channel::Yaw => wrap(to - from),
            Channel::Depth => to - from,
        }
    }

    fn band_floor(self) -> f64 {
        match self {
            Channel::Yaw => YAW_BAND_FLOOR,
            Channel::Depth => DEPTH_BAND_FLOOR,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepMetrics {
    pub channel: Channel,
    pub step_time: f64,
    pub step_size: f64,
    /// Seconds after the step; `f64::INFINITY` when the response never settles.
    pub settling_time: f64,
    pub overshoot_pct: f64,
    /// Mean of `target − response` over the final tenth of the window.
    pub sse: f64,
}

/// Samples of one step experiment: time and signed tracking error
/// (`response − target`, on the circle for yaw).
#[derive(Debug, Clone, PartialEq)]
pub struct StepResponse {
    pub channel: Channel,
    pub step_time: f64,
    pub step_size: f64,
    pub samples: Vec<(f64, f64)>,
}

impl StepResponse {
    /// Builds a response from `(t, reference, response)` triples. The step is
    /// taken between the last sample before `step_time` and the first at or
    /// after it; the window ends where the reference next changes.
    pub fn from_series(
        channel: Channel,
        series: &[(f64, f64, f64)],
        step_time: f64,
    ) -> Result<Self, HarnessError> {
        let start = series
            .iter()
            .position(|&(t, _, _)| t >= step_time - 1e-9)
            .ok_or_else(|| {
                HarnessError::Metrics(format!("no samples at or after t = {step_time}"))
            })?;
        let before = if start == 0 {
            return Err(HarnessError::Metrics(format!(
                "no samples before t = {step_time}"
            )));
        } else {
            series[start - 1].1
        };
        let target = series[start].1;
        let step_size = channel.difference(before, target);
        if step_size == 0.0 {
            return Err(HarnessError::Metrics(format!(
                "{} reference does not change at t = {step_time}",
                channel.as_str()
            )));
        }
        let samples = series[start..]
            .iter()
            .take_while(|&&(_, r, _)| r == target)
            .map(|&(t, _, y)| (t, channel.difference(target, y)))
            .collect();
        Ok(Self {
            channel,
            step_time: series[start].0,
            step_size,
            samples,
        })
    }

    /// Time after the step from which the error stays inside `band`, with
    /// the exit from the band located by linear interpolation.
    pub fn settling_time(&self, band: f64) -> f64 {
        let last_out = self.samples.iter().rposition(|&(_, e)| e.abs() > band);
        match last_out {
            None => 0.0,
            Some(j) if j + 1 == self.samples.len() => f64::INFINITY,
            Some(j) => {
                let (t0, e0) = self.samples[j];
                let (t1, e1) = self.samples[j + 1];
                let (a0, a1) = (e0.abs(), e1.abs());
                let frac = if a0 > a1 {
                    (a0 - band) / (a0 - a1)
                } else {
                    1.0
                };
                t0 + frac * (t1 - t0) - self.step_time
            }
        }
    }

    pub fn default_band(&self) -> f64 {
        (SETTLING_FRACTION * self.step_size.abs()).max(self.channel.band_floor())
    }

    /// Largest excursion past the target in the step direction, in percent of
    /// the step magnitude.
    pub fn overshoot_pct(&self) -> f64 {
        let dir = self.step_size.signum();
        let peak = self
            .samples
            .iter()
            .map(|&(_, e)| e * dir)
            .fold(0.0, f64::max);
        peak / self.step_size.abs() * 100.0
    }

    pub fn sse(&self) -> f64 {
        let n = self.samples.len();
        let tail = ((n as f64 * SSE_TAIL).ceil() as usize).clamp(1, n.max(1));
        let sum: f64 = self.samples[n - tail..].iter().map(|&(_, e)| -e).sum();
        sum / tail as f64
    }

    /// Largest absolute error from `from` seconds after the step onward.
    pub fn max_abs_error_after(&self, from: f64) -> f64 {
        self.samples
            .iter()
            .filter(|&&(t, _)| t - self.step_time >= from)
            .map(|&(_, e)| e.abs())
            .fold(0.0, f64::max)
    }

    pub fn metrics(&self) -> StepMetrics {
        StepMetrics {
            channel: self.channel,
            step_time: self.step_time,
            step_size: self.step_size,
            settling_time: self.settling_time(self.default_band()),
            overshoot_pct: self.overshoot_pct(),
            sse: self.sse(),
        }
    }
}

/// Extracts the step at `step_time` on `channel` from a run log and scores it
/// against ground truth.
pub fn step_response(
    log: &RunLog,
    channel: Channel,
    step_time: f64,
) -> Result<StepResponse, HarnessError> {
    let series: Vec<(f64, f64, f64)> = log
        .rows
        .iter()
        .map(|r| match channel {
            Channel::Yaw => (r.truth.t, r.setpoints.yaw_ref, r.truth.yaw),
            Channel::Depth => (r.truth.t, r.setpoints.depth_ref, r.truth.depth),
        })
        .collect();
    StepResponse::from_series(channel, &series, step_time)
}

pub fn compute_step_metrics(
    log: &RunLog,
    channel: Channel,
    step_time: f64,
) -> Result<StepMetrics, HarnessError> {
    Ok(step_response(log, channel, step_time)?.metrics())
}

/// Every reference change in the log, in time order.
pub fn detect_steps(log: &RunLog) -> Vec<(Channel, f64)> {
    let mut steps = Vec::new();
    for pair in log.rows.windows(2) {
        let (a, b) = (&pair[0].setpoints, &pair[1].setpoints);
        if a.yaw_ref != b.yaw_ref {
            steps.push((Channel::Yaw, pair[1].truth.t));
        }
        if a.depth_ref != b.depth_ref {
            steps.push((Channel::Depth, pair[1].truth.t));
        }
    }
    steps
}
